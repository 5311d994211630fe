#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "bkgnn/io.hpp"
#include "bkgnn/nn/matrix.hpp"

namespace bkgnn::nn {

// Checkpoint container (see docs/formats.md):
//
//   BKGNN-CHECKPOINT 1\n
//   <tensor count>\n
//   repeated: <name> <rows> <cols>\n followed by rows*cols little-endian
//             IEEE-754 binary64 values, row-major
//
// Names contain no whitespace.

struct NamedTensor {
  std::string name;
  DenseMatrix value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

inline constexpr const char* kCheckpointMagic = "BKGNN-CHECKPOINT 1";

inline void write_checkpoint(std::ostream& out, const std::vector<NamedTensor>& tensors) {
  out << kCheckpointMagic << '\n' << tensors.size() << '\n';
  for (const auto& t : tensors) {
    if (t.name.empty() || t.name.find_first_of(" \t\n") != std::string::npos)
      throw Error(Errc::InvalidParam, "tensor name must be non-empty without whitespace");
    out << t.name << ' ' << t.value.rows() << ' ' << t.value.cols() << '\n';
    for (double x : t.value.values()) {
      auto bits = std::bit_cast<std::uint64_t>(x);
      unsigned char bytes[8];
      for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
      out.write(reinterpret_cast<const char*>(bytes), 8);
    }
  }
  if (!out) throw Error(Errc::IoError, "checkpoint write failed");
}

inline std::vector<NamedTensor> read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic)
    throw Error(Errc::ParseError, "not a checkpoint (bad magic)");
  if (!std::getline(in, line)) throw Error(Errc::ParseError, "checkpoint: missing count");
  const auto count = parse_int<std::size_t>(line, "checkpoint count");
  std::vector<NamedTensor> out;
  for (std::size_t t = 0; t < count; ++t) {
    if (!std::getline(in, line)) throw Error(Errc::ParseError, "checkpoint: truncated header");
    const auto parts = split(line, ' ');
    if (parts.size() != 3) throw Error(Errc::ParseError, "checkpoint: bad tensor header '" + line + "'");
    NamedTensor nt{std::string(parts[0]),
                   DenseMatrix(parse_int<std::size_t>(parts[1], "rows"), parse_int<std::size_t>(parts[2], "cols"))};
    for (double& x : nt.value.values()) {
      unsigned char bytes[8];
      if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw Error(Errc::ParseError, "checkpoint: truncated data");
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
      x = std::bit_cast<double>(bits);
    }
    out.push_back(std::move(nt));
  }
  return out;
}

inline void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  auto out = open_out(path);
  write_checkpoint(out, tensors);
}

inline std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_checkpoint(in);
}

}  // namespace bkgnn::nn
