#include "partsketch/flat_binary.hpp"

#include <bit>
#include <limits>
#include <cstring>
#include <fstream>
#include <sstream>

namespace partsketch {

namespace {

static_assert(std::numeric_limits<float>::is_iec559 && std::numeric_limits<double>::is_iec559);

template <class U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <class U>
U get_le(std::string_view in, std::size_t at) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string write_flat(const Tensor2& t, std::uint32_t version) {
  if (version != kFlatFloat32 && version != kFlatFloat64) throw FormatError("flat: unknown version");
  std::string out = "PSTA";
  put_le<std::uint32_t>(out, version);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.cols()));
  for (double v : t.values()) {
    if (version == kFlatFloat32)
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    else
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Tensor2 read_flat(std::string_view bytes, std::size_t* consumed) {
  if (bytes.size() < 16 || bytes.substr(0, 4) != "PSTA") throw FormatError("flat: bad magic or short header");
  const auto version = get_le<std::uint32_t>(bytes, 4);
  const auto rows = get_le<std::uint32_t>(bytes, 8);
  const auto cols = get_le<std::uint32_t>(bytes, 12);
  const std::size_t width = version == kFlatFloat32 ? 4 : version == kFlatFloat64 ? 8 : 0;
  if (width == 0) throw FormatError("flat: unsupported version " + std::to_string(version));
  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  const std::size_t total = 16 + count * width;
  if (bytes.size() < total) throw FormatError("flat: payload truncated");
  if (!consumed && bytes.size() != total) throw FormatError("flat: trailing bytes");
  Tensor2 t(rows, cols);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t at = 16 + i * width;
    t[i] = width == 4 ? static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, at)))
                      : std::bit_cast<double>(get_le<std::uint64_t>(bytes, at));
  }
  if (!t.all_finite()) throw FormatError("flat: non-finite values");
  if (consumed) *consumed = total;
  return t;
}

void save_flat(const std::string& path, const Tensor2& t, std::uint32_t version) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << write_flat(t, version);
}

Tensor2 load_flat(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return read_flat(ss.str());
}

}  // namespace partsketch
