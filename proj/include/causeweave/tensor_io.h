#pragma once

#include <string>

#include <Eigen/Dense>

#include "json.hpp"

namespace causeweave {

inline constexpr int kCheckpointFormatVersion = 1;

// {"shape":[rows, cols], "data": base64 little-endian float32, row-major}.
// Parameters are trained in double and rounded to float32 on save.
nlohmann::json tensor_to_json(const Eigen::MatrixXd &m);

// Throws FormatError if the entry is malformed or its shape differs from
// (rows, cols).
Eigen::MatrixXd tensor_from_json(const nlohmann::json &entry, const std::string &name,
                                 Eigen::Index rows, Eigen::Index cols);

// Checks "format_version" and "kind" of a checkpoint manifest.
void check_manifest(const nlohmann::json &manifest, const std::string &kind);

}  // namespace causeweave
