#pragma once

// Little-endian POD streaming used by the cache, checkpoint and dataset
// files. All formats assume a little-endian host.

#include <Eigen/Core>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "adaptherm/error.hpp"

namespace adaptherm::io {

template <typename T>
  requires std::is_trivially_copyable_v<T>
void write(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
  requires std::is_trivially_copyable_v<T>
T read(std::istream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError(std::string("truncated file while reading ") + what);
  return v;
}

void write_doubles(std::ostream& out, const double* data, std::size_t n);
void read_doubles(std::istream& in, double* data, std::size_t n,
                  const char* what);

void write_vector(std::ostream& out, const Eigen::VectorXd& v);
Eigen::VectorXd read_vector(std::istream& in, std::size_t n, const char* what);

/// Writes a 4-byte magic tag followed by a uint32 version.
void write_header(std::ostream& out, const char (&magic)[5],
                  std::uint32_t version);
/// Validates magic and version; throws FormatError naming `what`.
void read_header(std::istream& in, const char (&magic)[5],
                 std::uint32_t version, const char* what);

}  // namespace adaptherm::io
