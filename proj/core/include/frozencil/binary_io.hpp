#pragma once

// Little-endian primitive encoding shared by the EMBD dataset format and the
// checkpoint blobs. Encoding is explicit byte-by-byte, independent of host order.

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace frozencil::io {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void magic(std::string_view four_cc);
  void u8(std::uint8_t v);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  /// u16 byte length followed by the raw bytes.
  void short_string(std::string_view s);
  /// u32 rows, u32 cols, then column-major float64 values.
  void matrix_f64(const Eigen::MatrixXd& m);
  /// u32 rows, u32 cols, then column-major float32 values.
  void matrix_f32(const Eigen::MatrixXd& m);

 private:
  void bytes(const void* data, std::size_t n);
  std::ostream& out_;
};

/// Every read throws Error(kFormat) on a short read.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void expect_magic(std::string_view four_cc);
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string short_string();
  Eigen::MatrixXd matrix_f64();
  Eigen::MatrixXd matrix_f32();
  /// True when the stream has no bytes left.
  bool at_end();

 private:
  void bytes(void* data, std::size_t n);
  std::istream& in_;
};

}  // namespace frozencil::io
