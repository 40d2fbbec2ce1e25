#pragma once

#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace klmpc {

/// Monomial observable library phi(x) over R^n, all total degrees up to
/// max_degree, in graded ordering: degree ascending, and within one degree
/// the exponent of x_1 dominates (x1^2 before x1*x2 before x2^2). The first
/// entry is therefore the constant monomial and entries 2..n+1 are the raw
/// coordinates. Every downstream matrix indexes into this ordering, so it is
/// fixed once and never depends on input data.
///
/// Immutable after construction; safe to share across threads read-only.
class Dictionary {
 public:
  Dictionary(int n_states, int max_degree);

  int n_states() const { return n_states_; }
  int max_degree() const { return max_degree_; }
  /// Number of monomials, binomial(n_states + max_degree, max_degree).
  int size() const { return static_cast<int>(exponents_.size()); }

  const std::vector<Eigen::VectorXi>& exponents() const { return exponents_; }

  /// phi(x): entry j is prod_i x_i^e_ji, with 0^0 = 1.
  Eigen::VectorXd evaluate(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// d phi / dx, size N x n_states, analytic.
  Eigen::MatrixXd jacobian(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  nlohmann::json to_json() const;
  static Dictionary from_json(const nlohmann::json& j);

  bool operator==(const Dictionary& other) const;

 private:
  void check_dimension(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  int n_states_;
  int max_degree_;
  std::vector<Eigen::VectorXi> exponents_;
};

}  // namespace klmpc
