#include "klmpc/dictionary.hpp"

#include "klmpc/errors.hpp"

namespace klmpc {

namespace {

// x^e by repeated multiplication; exact for e = 0 (returns 1, so 0^0 = 1).
double ipow(double x, int e) {
  double out = 1.0;
  for (int i = 0; i < e; ++i) out *= x;
  return out;
}

// Appends all exponent vectors of total degree exactly `degree`, leading
// variable exponent descending, recursing on the remaining variables.
void enumerate_degree(int n_vars, int degree, int var, Eigen::VectorXi& current,
                      std::vector<Eigen::VectorXi>& out) {
  if (var == n_vars - 1) {
    current[var] = degree;
    out.push_back(current);
    return;
  }
  for (int e = degree; e >= 0; --e) {
    current[var] = e;
    enumerate_degree(n_vars, degree - e, var + 1, current, out);
  }
}

}  // namespace

Dictionary::Dictionary(int n_states, int max_degree)
    : n_states_(n_states), max_degree_(max_degree) {
  if (n_states < 1) throw ValidationError("dictionary: n_states must be >= 1");
  if (max_degree < 0) throw ValidationError("dictionary: max_degree must be >= 0");
  Eigen::VectorXi current = Eigen::VectorXi::Zero(n_states);
  for (int degree = 0; degree <= max_degree; ++degree) {
    enumerate_degree(n_states, degree, 0, current, exponents_);
  }
}

void Dictionary::check_dimension(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != n_states_) {
    throw ValidationError("dictionary: state has length " + std::to_string(x.size()) +
                          ", expected " + std::to_string(n_states_));
  }
}

Eigen::VectorXd Dictionary::evaluate(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  check_dimension(x);
  Eigen::VectorXd phi(size());
  for (int j = 0; j < size(); ++j) {
    double value = 1.0;
    for (int i = 0; i < n_states_; ++i) value *= ipow(x[i], exponents_[j][i]);
    phi[j] = value;
  }
  return phi;
}

Eigen::MatrixXd Dictionary::jacobian(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  check_dimension(x);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(size(), n_states_);
  for (int j = 0; j < size(); ++j) {
    const Eigen::VectorXi& e = exponents_[j];
    for (int i = 0; i < n_states_; ++i) {
      if (e[i] == 0) continue;
      double value = e[i] * ipow(x[i], e[i] - 1);
      for (int k = 0; k < n_states_; ++k) {
        if (k != i) value *= ipow(x[k], e[k]);
      }
      jac(j, i) = value;
    }
  }
  return jac;
}

nlohmann::json Dictionary::to_json() const {
  nlohmann::json exps = nlohmann::json::array();
  for (const auto& e : exponents_) {
    nlohmann::json row = nlohmann::json::array();
    for (int i = 0; i < e.size(); ++i) row.push_back(e[i]);
    exps.push_back(row);
  }
  return {{"n_states", n_states_}, {"max_degree", max_degree_}, {"exponents", exps}};
}

Dictionary Dictionary::from_json(const nlohmann::json& j) {
  Dictionary dict(j.at("n_states").get<int>(), j.at("max_degree").get<int>());
  const auto& exps = j.at("exponents");
  if (static_cast<int>(exps.size()) != dict.size()) {
    throw ValidationError("dictionary: serialized exponent list has wrong length");
  }
  for (int row = 0; row < dict.size(); ++row) {
    for (int i = 0; i < dict.n_states(); ++i) {
      if (exps[row][i].get<int>() != dict.exponents_[row][i]) {
        throw ValidationError("dictionary: serialized exponents do not match canonical ordering");
      }
    }
  }
  return dict;
}

bool Dictionary::operator==(const Dictionary& other) const {
  return n_states_ == other.n_states_ && max_degree_ == other.max_degree_;
}

}  // namespace klmpc
