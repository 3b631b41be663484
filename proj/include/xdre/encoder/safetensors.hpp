#ifndef XDRE_ENCODER_SAFETENSORS_HPP_
#define XDRE_ENCODER_SAFETENSORS_HPP_

// Reader for the safetensors container: an 8-byte little-endian header
// length, a JSON header mapping names to dtype/shape/byte ranges, then the
// raw little-endian tensor data.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace xdre::encoder {

struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<double> values;  // row-major
};

inline float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  std::uint32_t exp = (h >> 10) & 0x1fu;
  std::uint32_t mant = h & 0x3ffu;
  std::uint32_t bits;
  if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {
      exp = 127 - 15 + 1;
      while (!(mant & 0x400u)) {
        mant <<= 1;
        --exp;
      }
      bits = sign | (exp << 23) | ((mant & 0x3ffu) << 13);
    }
  } else if (exp == 0x1f) {
    bits = sign | 0x7f800000u | (mant << 13);
  } else {
    bits = sign | ((exp + 127 - 15) << 23) | (mant << 13);
  }
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

inline std::map<std::string, Tensor> load_safetensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open safetensors file '" + path.string() + "'");
  unsigned char len_bytes[8];
  if (!in.read(reinterpret_cast<char*>(len_bytes), 8)) throw std::runtime_error("truncated safetensors header");
  std::uint64_t header_len = 0;
  for (int i = 7; i >= 0; --i) header_len = (header_len << 8) | len_bytes[i];
  if (header_len > (1ull << 30)) throw std::runtime_error("implausible safetensors header length");
  std::string header(header_len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(header_len))) throw std::runtime_error("truncated safetensors header");
  const auto meta = nlohmann::json::parse(header);
  std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::map<std::string, Tensor> out;
  for (const auto& [name, info] : meta.items()) {
    if (name == "__metadata__") continue;
    Tensor t;
    std::int64_t count = 1;
    for (const auto& d : info.at("shape")) {
      t.shape.push_back(d.get<std::int64_t>());
      count *= t.shape.back();
    }
    const auto begin = info.at("data_offsets").at(0).get<std::uint64_t>();
    const auto end = info.at("data_offsets").at(1).get<std::uint64_t>();
    if (end > blob.size() || begin > end) throw std::runtime_error("tensor '" + name + "' lies outside the data section");
    const std::string dtype = info.at("dtype").get<std::string>();
    const std::size_t width = dtype == "F64" ? 8 : dtype == "F32" ? 4 : (dtype == "F16" || dtype == "BF16") ? 2 : 0;
    if (width == 0) throw std::runtime_error("tensor '" + name + "' has unsupported dtype " + dtype);
    if (end - begin != static_cast<std::uint64_t>(count) * width) throw std::runtime_error("tensor '" + name + "' size mismatch");
    t.values.resize(static_cast<std::size_t>(count));
    const char* p = blob.data() + begin;
    for (std::int64_t i = 0; i < count; ++i, p += width) {
      if (dtype == "F64") {
        double v;
        std::memcpy(&v, p, 8);
        t.values[static_cast<std::size_t>(i)] = v;
      } else if (dtype == "F32") {
        float v;
        std::memcpy(&v, p, 4);
        t.values[static_cast<std::size_t>(i)] = v;
      } else {
        std::uint16_t h;
        std::memcpy(&h, p, 2);
        if (dtype == "F16") {
          t.values[static_cast<std::size_t>(i)] = half_to_float(h);
        } else {
          const std::uint32_t bits = static_cast<std::uint32_t>(h) << 16;
          float v;
          std::memcpy(&v, &bits, 4);
          t.values[static_cast<std::size_t>(i)] = v;
        }
      }
    }
    out.emplace(name, std::move(t));
  }
  return out;
}

}  // namespace xdre::encoder

#endif  // XDRE_ENCODER_SAFETENSORS_HPP_
