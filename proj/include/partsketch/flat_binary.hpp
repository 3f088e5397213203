#pragma once

// "PSTA" | u32 version | u32 rows | u32 cols | rows*cols values, all
// little-endian, row-major. Version 1 stores float32, version 2 float64.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "partsketch/tensor.hpp"

namespace partsketch {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kFlatFloat32 = 1;
inline constexpr std::uint32_t kFlatFloat64 = 2;

std::string write_flat(const Tensor2& t, std::uint32_t version = kFlatFloat32);
// `consumed`, when given, receives the number of bytes read; trailing bytes
// are an error otherwise.
Tensor2 read_flat(std::string_view bytes, std::size_t* consumed = nullptr);

void save_flat(const std::string& path, const Tensor2& t, std::uint32_t version = kFlatFloat32);
Tensor2 load_flat(const std::string& path);

}  // namespace partsketch
