#include "causeweave/tensor_io.h"

#include <cmath>
#include <vector>

#include "causeweave/base64.h"
#include "causeweave/errors.h"

namespace causeweave {

using nlohmann::json;

json tensor_to_json(const Eigen::MatrixXd &m) {
  std::vector<float> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(static_cast<float>(m(r, c)));
  }
  return {{"shape", {m.rows(), m.cols()}}, {"data", base64::encode_floats(flat)}};
}

Eigen::MatrixXd tensor_from_json(const json &entry, const std::string &name, Eigen::Index rows,
                                 Eigen::Index cols) {
  if (!entry.is_object() || !entry.contains("shape") || !entry.contains("data") ||
      !entry["data"].is_string()) {
    throw FormatError("tensor '" + name + "': expected {shape, data}");
  }
  const json &shape = entry["shape"];
  if (!shape.is_array() || shape.size() != 2 || shape[0] != rows || shape[1] != cols) {
    throw FormatError("tensor '" + name + "': shape " + shape.dump() + ", expected [" +
                      std::to_string(rows) + "," + std::to_string(cols) + "]");
  }
  std::vector<float> flat;
  try {
    flat = base64::decode_floats(entry["data"].get<std::string>());
  } catch (const FormatError &e) {
    throw FormatError("tensor '" + name + "': " + e.what());
  }
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) {
    throw FormatError("tensor '" + name + "': " + std::to_string(flat.size()) +
                      " values for shape [" + std::to_string(rows) + "," +
                      std::to_string(cols) + "]");
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      float v = flat[k++];
      if (!std::isfinite(v)) throw FormatError("tensor '" + name + "': non-finite value");
      m(r, c) = v;
    }
  }
  return m;
}

void check_manifest(const json &manifest, const std::string &kind) {
  if (!manifest.is_object()) throw FormatError("checkpoint is not a JSON object");
  auto version = manifest.find("format_version");
  if (version == manifest.end() || !version->is_number_integer() ||
      version->get<int>() != kCheckpointFormatVersion) {
    throw FormatError("unsupported checkpoint format_version " +
                      (version == manifest.end() ? std::string("<missing>") : version->dump()));
  }
  auto k = manifest.find("kind");
  if (k == manifest.end() || *k != kind) {
    throw FormatError("checkpoint kind is not '" + kind + "'");
  }
  if (!manifest.contains("tensors") || !manifest["tensors"].is_object()) {
    throw FormatError("checkpoint has no tensors object");
  }
}

}  // namespace causeweave
