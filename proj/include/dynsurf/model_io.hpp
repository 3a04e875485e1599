// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "dynsurf/model.hpp"

namespace dynsurf {

template <class Real>
constexpr const char* precision_name();
template <>
constexpr const char* precision_name<float>() { return "f32"; }
template <>
constexpr const char* precision_name<double>() { return "f64"; }

// One JSON file: format version, precision tag, config snapshot (with the
// resolved split patterns, so the architecture is explicit in the file), and
// every named parameter as a base64 little-endian f64 array. Parameters are
// stored widened to 64-bit regardless of Real; float values widen and narrow
// exactly, so the round trip is bit-identical either way.
template <class Real>
void save_model(const Model<Real>& m, const std::filesystem::path& path);

// Rebuilds the architecture via Model::init on the stored config, then
// overwrites the parameters with the stored values. The file's precision tag
// must match Real; read it with model_file_precision to dispatch.
template <class Real>
Model<Real> load_model(const std::filesystem::path& path);

std::string model_file_precision(const std::filesystem::path& path);

}  // namespace dynsurf
