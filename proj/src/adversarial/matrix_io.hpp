#pragma once

#include <Eigen/Dense>
#include <json.hpp>

namespace vicsim::detail {

// {"rows", "cols", "data"}: column-major little-endian doubles, base64.
nlohmann::json encode_matrix(const Eigen::MatrixXd& m);
Eigen::MatrixXd decode_matrix(const nlohmann::json& j);

}  // namespace vicsim::detail
