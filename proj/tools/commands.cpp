// commands.cpp
#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "qdlab/davies.hpp"
#include "qdlab/errors.hpp"

namespace qdlab::cli {

namespace {

struct Setup {
  FiniteGroup G = make_cyclic(1);
  TorusLattice L{2};
  Region R{RegionKind::Torus, 0, 0, 2, 2};
  bool has_region = false;
};

// The torus side for "auto": big enough that a rectangle stays open.
int auto_side(const std::string& region) {
  if (region.empty() || region.rfind("rect:", 0) != 0) return 2;
  Region r = parse_region(region, TorusLattice(64));
  return std::max(2, std::max(r.a, r.b) + 1);
}

Setup setup(const ExperimentConfig& c) {
  validate(c);
  Setup s;
  s.G = parse_group(c.group);
  int N = c.torus_side();
  if (N == 0) N = auto_side(c.region);
  s.L = TorusLattice(N);
  s.has_region = !c.region.empty();
  s.R = parse_region(s.has_region ? c.region : "torus", s.L);
  return s;
}

EigOptions eig_options(const ExperimentConfig& c) {
  EigOptions o;
  o.tol = c.tol;
  o.seed = c.seed;
  o.max_matvecs = c.max_matvecs;
  return o;
}

std::string beta_tag(double b) {
  std::ostringstream os;
  os << "beta=" << b;
  return os.str();
}

double pow_dim(int base, long exponent) { return std::pow(double(base), double(exponent)); }

// Vectors of length dim, a Krylov basis of max_basis of them plus scratch.
double krylov_bytes(double dim, const EigOptions& o) { return 16.0 * dim * (o.max_basis + 8); }

void estimate(Report& r, std::ostream& log, const std::string& what, double dim, double bytes,
              const ExperimentConfig& c, double dim_limit = 0) {
  r.estimates[what] = {{"dim", dim}, {"bytes", bytes}};
  log << "estimate: " << what << " dim " << dim << ", about " << bytes / (1 << 20) << " MB\n";
  if (bytes > c.max_memory_mb * double(1 << 20))
    throw FeasibilityError(what + ": needs about " + std::to_string(long(bytes / (1 << 20))) + " MB, limit " +
                               std::to_string(long(c.max_memory_mb)) + " MB",
                           bytes);
  if (dim_limit > 0 && dim > dim_limit)
    throw FeasibilityError(what + ": dimension " + std::to_string(long(dim)) + " above " +
                               std::to_string(long(dim_limit)),
                           bytes);
}

RateFunction rates_for(const ExperimentConfig& c, double beta) {
  if (c.rates == "exponential-half") return kms_rates(beta);
  const std::string path = c.rates.substr(6);
  std::ifstream in(path);
  if (!in) throw ConfigError("rates: cannot open " + path);
  return load_rate_table(beta, in);
}

// ---------------------------------------------------------------- commands

Report verify_peps(const ExperimentConfig& c, std::ostream& log) {
  Setup s = setup(c);
  Report r;
  QuantumDoubleModel m(s.G, s.L);
  const long E = s.L.num_edges();
  const double D = pow_dim(s.G.order(), E);
  estimate(r, log, "gibbs operator", D, 16.0 * D * D * 6, c, 4096);
  auto lay = network_layout(s.L, m.patch().edges);
  const MatC H = MatC(full_hamiltonian(m).H);
  const int d = static_cast<int>(D);
  for (double beta : c.betas) {
    SparseTensor T = contract_network(s.G, beta, lay, Variant::Full);
    VecC v = VecC::Zero(static_cast<long>(D * D));
    for (size_t t = 0; t < T.nnz(); ++t) v(static_cast<long>(T.keys[t])) = T.vals[t];
    const MatC ref = matrix_exp_hermitian(H, -beta / 2);
    const double rel = operator_norm(devectorize(v, d) - ref) / operator_norm(ref);
    r.add("pepo vs exponential, " + beta_tag(beta), 1e-10, rel, rel <= 1e-10, "contraction", c.seed);
    const double dev = edge_boundary_deviation(s.G, beta, Variant::Full);
    r.add("edge boundary formula vs contraction, " + beta_tag(beta), 1e-12, dev, dev <= 1e-12, "gram", c.seed);
    r.results.push_back({{"beta", beta}, {"pepo_relative_error", rel}, {"edge_boundary_deviation", dev}});
  }
  return r;
}

Report verify_boundary(const ExperimentConfig& c, std::ostream& log) {
  Setup s = setup(c);
  if (!s.has_region || s.R.kind != RegionKind::Rect) throw ConfigError("verify-boundary: needs --region rect:x0,y0,a,b");
  Report r;
  auto cls = classify_region(s.L, s.R);
  estimate(r, log, "region " + s.R.str() + " boundary", pow_dim(s.G.order(), (long)cls.boundary_edges.size()),
           16.0 * pow_dim(s.G.order(), 2 * (long)cls.boundary_edges.size()), c);
  for (double beta : c.betas) {
    auto cert = verify_leading_term(s.G, s.L, s.R, beta);
    r.add("leading term " + s.R.str() + ", " + beta_tag(beta), cert.bound, cert.measured, cert.pass, cert.method,
          c.seed);
    auto sup = support_and_sigma(s.G, s.L, s.R, beta);
    const double rank_gap = std::abs(sup.rank_rho - sup.rank_leading);
    r.add("support rank " + s.R.str() + ", " + beta_tag(beta), 0, rank_gap, rank_gap == 0, sup.method, c.seed);
    if (sup.hypothesis)
      r.add("rho^1/2 sigma^-1 rho^1/2 - J " + s.R.str() + ", " + beta_tag(beta), sup.epsilon, sup.norm_sigma_inv,
            sup.norm_sigma_inv < sup.epsilon, sup.method, c.seed);
    const double dev = edge_boundary_deviation(s.G, beta, Variant::Full);
    r.add("edge boundary formula vs contraction, " + beta_tag(beta), 1e-12, dev, dev <= 1e-12, "gram", c.seed);
    r.results.push_back({{"beta", beta},
                         {"region", s.R.str()},
                         {"kappa", cert.kappa},
                         {"epsilon", cert.epsilon},
                         {"measured", cert.measured},
                         {"vacuous", cert.vacuous},
                         {"exact", cert.exact},
                         {"rank_rho", sup.rank_rho},
                         {"rank_leading", sup.rank_leading},
                         {"angle", sup.angle},
                         {"norm_sigma_inv", sup.norm_sigma_inv},
                         {"norm_sigma", sup.norm_sigma}});
  }
  return r;
}

Split parse_split(const ExperimentConfig& c, const TorusLattice& L, const Region& R) {
  if (c.split.empty()) throw ConfigError("martingale: needs --split <pattern>:<widths>");
  const auto colon = c.split.find(':');
  if (colon == std::string::npos) throw ConfigError("split: expected <pattern>:<widths>, got '" + c.split + "'");
  std::vector<int> widths;
  std::stringstream ss(c.split.substr(colon + 1));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      widths.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw ConfigError("split: bad width '" + tok + "'");
    }
  }
  return split_region(L, R, parse_split_pattern(c.split.substr(0, colon)), widths);
}

Report martingale(const ExperimentConfig& c, std::ostream& log) {
  Setup s = setup(c);
  if (!s.has_region) throw ConfigError("martingale: needs --region");
  Split sp = parse_split(c, s.L, s.R);
  Report r;
  const auto opt = eig_options(c);
  const double dim = pow_dim(s.G.order(), 2 * (long)classify_region(s.L, s.R).edges.size());
  estimate(r, log, "region " + s.R.str() + " physical space", dim, krylov_bytes(dim, opt), c);
  for (double beta : c.betas) {
    auto m = martingale_measurement(s.G, s.L, s.R, sp, beta, opt);
    const std::string tag = ", " + beta_tag(beta);
    r.add("||P_AB P_BC - P_ABC|| <= 1" + tag, 1, m.measured, m.pass_unit, m.method, c.seed);
    r.add(std::string("||P_AB P_BC - P_ABC|| <= bound") + (m.bound_applies ? "" : " (not applicable)") + tag, m.bound,
          m.measured, m.pass_bound, m.method, c.seed);
    r.add("overlap lemma" + tag, -1e-10, m.lemma_min, m.lemma_pass, m.method, c.seed);
    r.results.push_back({{"beta", beta},
                         {"region", m.region},
                         {"split", m.split},
                         {"dim", m.dim},
                         {"measured", m.measured},
                         {"eps_b", m.eps_b},
                         {"bound", m.bound},
                         {"bound_applies", m.bound_applies},
                         {"lemma_min", m.lemma_min},
                         {"rank_ab", m.rank_ab},
                         {"rank_bc", m.rank_bc},
                         {"rank_abc", m.rank_abc}});
  }
  return r;
}

Report parent_gap_cmd(const ExperimentConfig& c, std::ostream& log) {
  Setup s = setup(c);
  Report r;
  const auto opt = eig_options(c);
  const double dim = pow_dim(s.G.order(), 2 * (long)classify_region(s.L, s.R).edges.size());
  estimate(r, log, "region " + s.R.str() + " physical space", dim, krylov_bytes(dim, opt), c);
  for (double beta : c.betas) {
    auto H = parent_hamiltonian(s.G, s.L, s.R, beta, c.n, 1);
    auto g = parent_gap(s.G, s.L, H, s.R, beta, opt);
    const std::string tag = ", " + beta_tag(beta);
    r.add("parent gap > 0" + tag, 0, g.gap, g.gap > 10 * c.tol, g.method, c.seed);
    r.add("ground space residual" + tag, 1e-8, g.kernel_residual, g.kernel_residual <= 1e-8, g.method, c.seed);
    Json fam = Json::array();
    for (const auto& X : H.family) fam.push_back(X.str());
    r.results.push_back({{"beta", beta},
                         {"region", s.R.str()},
                         {"n", c.n},
                         {"dim", g.dim},
                         {"family", fam},
                         {"gap", g.gap},
                         {"rank_p", g.rank_p},
                         {"kernel_residual", g.kernel_residual},
                         {"angle_bound", g.angle_bound},
                         {"matvecs", g.matvecs}});
  }
  return r;
}

QuantumDoubleModel davies_model(const Setup& s) {
  if (!s.has_region) return QuantumDoubleModel(s.G, s.L);
  return QuantumDoubleModel(s.G, s.L, make_patch(s.L, classify_region(s.L, s.R).edges));
}

Report davies_gap_cmd(const ExperimentConfig& c, std::ostream& log) {
  Setup s = setup(c);
  Report r;
  const auto opt = eig_options(c);
  const long E = s.has_region ? (long)classify_region(s.L, s.R).edges.size() : s.L.num_edges();
  const double D = pow_dim(s.G.order(), E);
  estimate(r, log, "vectorized generator", D * D, krylov_bytes(D * D, opt) + 48.0 * D * D, c, 4096.0 * 4096.0);
  QuantumDoubleModel m = davies_model(s);
  for (double beta : c.betas) {
    DaviesGenerator g(m, beta, default_coupling(s.G.order()), rates_for(c, beta));
    auto rep = davies_gap(g, opt);
    const std::string tag = ", " + beta_tag(beta);
    r.add("gap(H~) > 0" + tag, 0, rep.gap, rep.gap > 10 * c.tol, rep.method, c.seed);
    r.add("||H~ iota(1)||" + tag, 1e-10, rep.ground_residual, rep.ground_residual <= 1e-10, rep.method, c.seed);
    r.add("eigen residual" + tag, 10 * c.tol, rep.residual, rep.residual <= 10 * c.tol, rep.method, c.seed);
    r.results.push_back({{"beta", beta},
                         {"dim", rep.dim},
                         {"gap", rep.gap},
                         {"residual", rep.residual},
                         {"ground_residual", rep.ground_residual},
                         {"matvecs", rep.matvecs},
                         {"method", rep.method},
                         {"rates", g.rates().form}});
  }
  return r;
}

Report gap_chain_cmd(const ExperimentConfig& c, std::ostream& log) {
  Setup s = setup(c);
  if (s.has_region) throw ConfigError("gap-chain: runs on the whole torus, drop --region");
  Report r;
  const auto opt = eig_options(c);
  const double D = pow_dim(s.G.order(), s.L.num_edges());
  estimate(r, log, "vectorized generator", D * D, 4 * krylov_bytes(D * D, opt) + 48.0 * D * D, c, 4096.0 * 4096.0);
  for (double beta : c.betas) {
    auto g = gap_chain(s.G, s.L, beta, c.n, default_coupling(s.G.order()), rates_for(c, beta), opt);
    const std::string tag = ", " + beta_tag(beta);
    Json ineq = Json::array();
    for (const auto& q : g.inequalities) {
      r.add(q.name + tag, q.rhs - q.tol, q.lhs, q.pass, "chain", c.seed);
      ineq.push_back({{"name", q.name}, {"lhs", q.lhs}, {"rhs", q.rhs}, {"tol", q.tol}, {"pass", q.pass}, {"note", q.note}});
    }
    r.add("final bound > 0" + tag, 0, g.final_bound, g.final_bound > 0, "chain", c.seed);
    r.add("gap(L) >= final bound" + tag, g.final_bound, g.gap_l, g.gap_l >= g.final_bound, "chain", c.seed);
    Json fam = Json::array();
    for (const auto& X : g.family) fam.push_back(X.str());
    Json local = Json::array();
    for (const auto& l : g.local)
      local.push_back({{"edge", l.edge}, {"c1", l.c1}, {"bound", l.bound}, {"lambda_min", l.lambda_min}, {"pass", l.pass}});
    r.results.push_back({{"beta", beta},
                         {"model", g.model},
                         {"coupling", g.coupling},
                         {"rates", g.rates},
                         {"n", g.n},
                         {"dim", g.dim},
                         {"gap_l", g.gap_l},
                         {"gap_pi", g.gap_pi},
                         {"gap_parent", g.gap_parent},
                         {"c1", g.c1},
                         {"c2", g.c2},
                         {"g_min", g.g_min},
                         {"omega_count", g.omega_count},
                         {"m", g.m},
                         {"m_estimate", g.m_estimate},
                         {"local_bound", g.local_bound},
                         {"final_bound", g.final_bound},
                         {"family", fam},
                         {"inequalities", ineq},
                         {"local", local},
                         {"partial", g.partial},
                         {"pass", g.pass}});
  }
  return r;
}

using Command = Report (*)(const ExperimentConfig&, std::ostream&);

const std::map<std::string, std::pair<Command, std::string>>& table() {
  static const std::map<std::string, std::pair<Command, std::string>> t = {
      {"verify-peps", {verify_peps, "PEPO contraction vs e^{-beta H/2} on the torus, edge boundary identity"}},
      {"verify-boundary", {verify_boundary, "leading term and support projector of a rectangle"}},
      {"martingale", {martingale, "||P_AB P_BC - P_ABC|| against 16 eps_B, overlap lemma"}},
      {"parent-gap", {parent_gap_cmd, "gap of the thermofield parent Hamiltonian on a region"}},
      {"davies-gap", {davies_gap_cmd, "gap of the Davies generator, matrix-free"}},
      {"gap-chain", {gap_chain_cmd, "chain of inequalities from gap(L) down to the parent Hamiltonian"}},
  };
  return t;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"verify-peps", "verify-boundary", "martingale",
                                                 "parent-gap",  "davies-gap",      "gap-chain"};
  return names;
}

std::string command_help(const std::string& name) { return table().at(name).second; }

Report run_command(const std::string& name, const ExperimentConfig& c, std::ostream& log) {
  auto it = table().find(name);
  if (it == table().end()) throw ConfigError("unknown command '" + name + "'");
  Report r = it->second.first(c, log);
  r.command = name;
  for (const auto& [k, v] : describe(c)) r.config[k] = v;
  return r;
}

int exit_code(const Report& r) { return r.pass() ? 0 : 1; }

}  // namespace qdlab::cli
