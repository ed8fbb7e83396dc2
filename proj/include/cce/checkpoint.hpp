#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cce/tensor.hpp"

namespace cce::ckpt {

std::string base64_encode(const std::uint8_t* data, std::size_t len);
std::vector<std::uint8_t> base64_decode(const std::string& text);

// Named float tensors <-> {"name": {"shape": [...], "dtype": "f32",
// "data": base64 of little-endian bytes}}.
using ArrayRefs = std::vector<std::pair<std::string, const num::Tensor<float>*>>;
using MutableArrayRefs = std::vector<std::pair<std::string, num::Tensor<float>*>>;

nlohmann::json arrays_to_json(const ArrayRefs& arrays);

// Strict: the file must contain exactly the expected names with exactly the
// expected shapes.
void arrays_from_json(const nlohmann::json& j, const MutableArrayRefs& arrays);

// FNV-1a 64 over (name, shape, little-endian f32 bytes) in sorted name
// order; hex encoded. Stable across save/load round trips.
std::string content_hash(const ArrayRefs& arrays);

void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

}  // namespace cce::ckpt
