#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "dpbm/async_sim.hpp"

namespace dpbm {
namespace {

constexpr char kMagic[8] = {'D', 'P', 'B', 'M', 'T', 'R', 'C', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((v >> (8 * b)) & 0xffu);
  out.write(bytes, 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int b = 0; b < 4; ++b) bytes[b] = static_cast<char>((v >> (8 * b)) & 0xffu);
  out.write(bytes, 4);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw std::runtime_error("trace file truncated");
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | bytes[b];
  return v;
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw std::runtime_error("trace file truncated");
  std::uint32_t v = 0;
  for (int b = 3; b >= 0; --b) v = (v << 8) | bytes[b];
  return v;
}

}  // namespace

void write_trace_binary(const std::string& path, const Trace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kMagic, 8);
  put_u32(out, kVersion);
  put_u64(out, static_cast<std::uint64_t>(trace.nodes));
  put_u64(out, static_cast<std::uint64_t>(trace.dim));
  put_u64(out, trace.snapshots.size());
  for (std::size_t t = 0; t < trace.snapshots.size(); ++t) {
    const Matrix& X = trace.snapshots[t];
    if (X.rows() != trace.dim || X.cols() != trace.nodes) throw std::invalid_argument("snapshot has the wrong shape");
    put_u64(out, static_cast<std::uint64_t>(trace.iterations[t]));
    for (Index k = 0; k < X.size(); ++k) put_u64(out, std::bit_cast<std::uint64_t>(X.data()[k]));
  }
  if (!out) throw std::runtime_error("error while writing " + path);
}

Trace read_trace_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error(path + ": not a trace file");
  const std::uint32_t version = get_u32(in);
  if (version != kVersion) throw std::runtime_error(path + ": unsupported trace version " + std::to_string(version));
  Trace trace;
  trace.nodes = static_cast<Index>(get_u64(in));
  trace.dim = static_cast<Index>(get_u64(in));
  const std::uint64_t count = get_u64(in);
  for (std::uint64_t t = 0; t < count; ++t) {
    trace.iterations.push_back(static_cast<long>(get_u64(in)));
    Matrix X(trace.dim, trace.nodes);
    for (Index k = 0; k < X.size(); ++k) X.data()[k] = std::bit_cast<double>(get_u64(in));
    trace.snapshots.push_back(std::move(X));
  }
  return trace;
}

}  // namespace dpbm
