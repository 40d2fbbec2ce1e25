#pragma once

#include <complex>

#include <Eigen/Dense>
#include <json.hpp>

namespace klmpc {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);

/// Complex scalars serialize as {"re": .., "im": ..}.
nlohmann::json complex_to_json(const std::complex<double>& c);
std::complex<double> complex_from_json(const nlohmann::json& j);

nlohmann::json cvector_to_json(const Eigen::VectorXcd& v);
Eigen::VectorXcd cvector_from_json(const nlohmann::json& j);

nlohmann::json cmatrix_to_json(const Eigen::MatrixXcd& m);
Eigen::MatrixXcd cmatrix_from_json(const nlohmann::json& j);

nlohmann::json load_json_file(const std::string& path);
void write_json_file(const nlohmann::json& j, const std::string& path);

}  // namespace klmpc
