// groups.hpp
// Finite groups stored as multiplication tables, plus the left regular
// representation and the regular character.
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qdlab {

using Elem = int;

class FiniteGroup {
 public:
  // Builds a group from a full multiplication table. Element 0 must be the
  // identity. Throws std::invalid_argument if the table is not a group.
  FiniteGroup(std::vector<std::vector<Elem>> table, std::string label);

  int order() const { return n_; }
  Elem identity() const { return 0; }
  Elem mul(Elem a, Elem b) const { return mul_[a * n_ + b]; }
  Elem inv(Elem a) const { return inv_[a]; }
  const std::string& label() const { return label_; }

  bool is_abelian() const;
  // Conjugacy classes by brute force, each sorted, ordered by smallest member.
  std::vector<std::vector<Elem>> conjugacy_classes() const;
  void check_index(Elem g) const;

 private:
  int n_ = 0;
  std::vector<Elem> mul_;
  std::vector<Elem> inv_;
  std::string label_;
};

FiniteGroup make_cyclic(int n);
FiniteGroup make_symmetric(int n);
// Plain text: first token is the order, then order*order table entries.
FiniteGroup load_group_file(const std::string& path);
// "Z<n>", "S<n>" or "file:<path>".
FiniteGroup parse_group(const std::string& spec);

// L^g = sum_h |gh><h|, as a real 0/1 matrix.
Eigen::MatrixXd left_regular_matrix(const FiniteGroup& G, Elem g);
// chi_reg(g) = Tr L^g = |G| delta_{g,1}
double regular_character(const FiniteGroup& G, Elem g);

struct TrivialProjector {
  Eigen::MatrixXd P1;
  Eigen::MatrixXd P0;
};
TrivialProjector trivial_projector(const FiniteGroup& G);

}  // namespace qdlab
