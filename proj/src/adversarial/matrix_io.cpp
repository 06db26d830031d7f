#include "matrix_io.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <string>
#include <vector>

#include "vicsim/error.hpp"

namespace vicsim::detail {

nlohmann::json encode_matrix(const Eigen::MatrixXd& m) {
  const auto bytes = static_cast<int>(m.size() * sizeof(double));
  std::string out(4 * ((bytes + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(m.data()), bytes);
  out.resize(static_cast<std::size_t>(n));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", out}};
}

Eigen::MatrixXd decode_matrix(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::string>();
  std::vector<unsigned char> buf(3 * data.size() / 4 + 3);
  const int n = EVP_DecodeBlock(buf.data(), reinterpret_cast<const unsigned char*>(data.data()),
                                static_cast<int>(data.size()));
  const auto expected = static_cast<std::size_t>(rows * cols) * sizeof(double);
  // DecodeBlock keeps base64 padding bytes in its count.
  if (n < 0 || static_cast<std::size_t>(n) < expected || static_cast<std::size_t>(n) > expected + 2) {
    throw InvalidArgument("corrupt matrix payload");
  }
  Eigen::MatrixXd m(rows, cols);
  if (expected) std::memcpy(m.data(), buf.data(), expected);
  return m;
}

}  // namespace vicsim::detail
