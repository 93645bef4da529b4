#include "adaptherm/binary_io.hpp"

#include <cstring>

namespace adaptherm::io {

void write_doubles(std::ostream& out, const double* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::istream& in, double* data, std::size_t n,
                  const char* what) {
  in.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw FormatError(std::string("truncated file while reading ") + what);
}

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
  write_doubles(out, v.data(), static_cast<std::size_t>(v.size()));
}

Eigen::VectorXd read_vector(std::istream& in, std::size_t n, const char* what) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  read_doubles(in, v.data(), n, what);
  return v;
}

void write_header(std::ostream& out, const char (&magic)[5],
                  std::uint32_t version) {
  out.write(magic, 4);
  write(out, version);
}

void read_header(std::istream& in, const char (&magic)[5],
                 std::uint32_t version, const char* what) {
  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, magic, 4) != 0) {
    throw FormatError(std::string(what) + ": bad magic");
  }
  const auto v = read<std::uint32_t>(in, what);
  if (v != version) {
    throw FormatError(std::string(what) + ": unsupported version " +
                      std::to_string(v));
  }
}

}  // namespace adaptherm::io
