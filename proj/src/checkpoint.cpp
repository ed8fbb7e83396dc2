#include "cce/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>

#include "cce/error.hpp"

namespace cce::ckpt {

namespace {

constexpr char kAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::uint32_t float_bits(float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, sizeof(u));
  return u;
}

inline float bits_float(std::uint32_t u) {
  float f;
  std::memcpy(&f, &u, sizeof(f));
  return f;
}

std::vector<std::uint8_t> tensor_le_bytes(const num::Tensor<float>& t) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(t.size() * 4);
  for (std::size_t k = 0; k < t.size(); ++k) {
    const std::uint32_t u = float_bits(t[k]);
    bytes.push_back(static_cast<std::uint8_t>(u & 0xff));
    bytes.push_back(static_cast<std::uint8_t>((u >> 8) & 0xff));
    bytes.push_back(static_cast<std::uint8_t>((u >> 16) & 0xff));
    bytes.push_back(static_cast<std::uint8_t>((u >> 24) & 0xff));
  }
  return bytes;
}

}  // namespace

std::string base64_encode(const std::uint8_t* data, std::size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (std::size_t i = 0; i < len; i += 3) {
    const std::uint32_t b0 = data[i];
    const std::uint32_t b1 = i + 1 < len ? data[i + 1] : 0;
    const std::uint32_t b2 = i + 2 < len ? data[i + 2] : 0;
    const std::uint32_t triple = (b0 << 16) | (b1 << 8) | b2;
    out += kAlphabet[(triple >> 18) & 0x3f];
    out += kAlphabet[(triple >> 12) & 0x3f];
    out += i + 1 < len ? kAlphabet[(triple >> 6) & 0x3f] : '=';
    out += i + 2 < len ? kAlphabet[triple & 0x3f] : '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  static const auto value_of = [] {
    std::array<std::int8_t, 256> table;
    table.fill(-1);
    for (int i = 0; i < 64; ++i) {
      table[static_cast<unsigned char>(kAlphabet[i])] = static_cast<std::int8_t>(i);
    }
    return table;
  }();
  if (text.size() % 4 != 0) {
    throw ParseError("base64: length not a multiple of 4");
  }
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t triple = 0;
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=') {
        if (i + 4 != text.size() || k < 2) {
          throw ParseError("base64: misplaced padding");
        }
        triple <<= 6;
        ++pad;
        continue;
      }
      const std::int8_t v = value_of[static_cast<unsigned char>(c)];
      if (v < 0 || pad > 0) {
        throw ParseError("base64: invalid character");
      }
      triple = (triple << 6) | static_cast<std::uint32_t>(v);
    }
    out.push_back(static_cast<std::uint8_t>((triple >> 16) & 0xff));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((triple >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(triple & 0xff));
  }
  return out;
}

nlohmann::json arrays_to_json(const ArrayRefs& arrays) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, tensor] : arrays) {
    const auto bytes = tensor_le_bytes(*tensor);
    j[name] = {{"shape", tensor->shape()},
               {"dtype", "f32"},
               {"data", base64_encode(bytes.data(), bytes.size())}};
  }
  return j;
}

void arrays_from_json(const nlohmann::json& j, const MutableArrayRefs& arrays) {
  if (!j.is_object()) {
    throw ParseError("checkpoint: 'arrays' must be an object");
  }
  if (j.size() != arrays.size()) {
    throw ParseError("checkpoint: expected " + std::to_string(arrays.size()) +
                     " arrays, found " + std::to_string(j.size()));
  }
  for (const auto& [name, tensor] : arrays) {
    if (!j.contains(name)) {
      throw ParseError("checkpoint: missing array '" + name + "'");
    }
    const auto& entry = j.at(name);
    if (entry.at("dtype").get<std::string>() != "f32") {
      throw ParseError("checkpoint: array '" + name + "' has unsupported dtype");
    }
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape != tensor->shape()) {
      throw ParseError("checkpoint: array '" + name + "' shape " +
                       num::format_shape(shape) + " != expected " +
                       tensor->shape_str());
    }
    const auto bytes = base64_decode(entry.at("data").get<std::string>());
    if (bytes.size() != tensor->size() * 4) {
      throw ParseError("checkpoint: array '" + name + "' byte length mismatch");
    }
    for (std::size_t k = 0; k < tensor->size(); ++k) {
      const std::uint32_t u = static_cast<std::uint32_t>(bytes[4 * k]) |
                              (static_cast<std::uint32_t>(bytes[4 * k + 1]) << 8) |
                              (static_cast<std::uint32_t>(bytes[4 * k + 2]) << 16) |
                              (static_cast<std::uint32_t>(bytes[4 * k + 3]) << 24);
      (*tensor)[k] = bits_float(u);
    }
  }
}

std::string content_hash(const ArrayRefs& arrays) {
  ArrayRefs sorted = arrays;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::uint64_t h = 14695981039346656037ull;
  const auto mix = [&h](std::uint8_t byte) {
    h ^= byte;
    h *= 1099511628211ull;
  };
  for (const auto& [name, tensor] : sorted) {
    for (char c : name) mix(static_cast<std::uint8_t>(c));
    mix(0);
    for (std::size_t d : tensor->shape()) {
      for (int s = 0; s < 64; s += 8) {
        mix(static_cast<std::uint8_t>((d >> s) & 0xff));
      }
    }
    for (std::size_t k = 0; k < tensor->size(); ++k) {
      const std::uint32_t u = float_bits((*tensor)[k]);
      mix(static_cast<std::uint8_t>(u & 0xff));
      mix(static_cast<std::uint8_t>((u >> 8) & 0xff));
      mix(static_cast<std::uint8_t>((u >> 16) & 0xff));
      mix(static_cast<std::uint8_t>((u >> 24) & 0xff));
    }
  }
  static const char* kHex = "0123456789abcdef";
  std::string hex(16, '0');
  for (int i = 15; i >= 0; --i) {
    hex[i] = kHex[h & 0xf];
    h >>= 4;
  }
  return hex;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ValidationError("cannot open '" + path + "' for writing");
  }
  out << j.dump() << '\n';
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("cannot open '" + path + "'");
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("invalid JSON in '" + path + "': " + e.what());
  }
}

}  // namespace cce::ckpt
