#pragma once

#include <filesystem>
#include <string>

#include "weightlab/network.hpp"

namespace weightlab {

/// Serializes a WeightSet as a single JSON document:
///   {"spec_hash": "...", "layers": [{"index": i, "kernel_shape": [...],
///    "kernel": [...], "bias_shape": [...], "bias": [...]}]}
/// Floats carry 17 significant digits so parsing reproduces every bit.
std::string weight_set_to_json(const NetworkSpec& spec, const WeightSet& weights);

void save_weight_set(const std::filesystem::path& path, const NetworkSpec& spec,
                     const WeightSet& weights);

/// Parses a WeightSet and checks it against the expected spec (hash and
/// shapes). Throws std::runtime_error on malformed input or mismatch.
WeightSet load_weight_set(const std::filesystem::path& path, const NetworkSpec& expected_spec);

WeightSet weight_set_from_json(const std::string& json_text, const NetworkSpec& expected_spec);

/// %.17g rendering used across all numeric file formats in this project.
std::string format_double(double v);

}  // namespace weightlab
