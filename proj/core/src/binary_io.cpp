#include "frozencil/binary_io.hpp"

#include <array>
#include <bit>

#include "frozencil/error.hpp"

namespace frozencil::io {

namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
  std::array<char, sizeof(T)> buf{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
  }
  out.write(buf.data(), buf.size());
}

template <typename T>
T get_le(const std::array<unsigned char, sizeof(T)>& buf) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

void Writer::bytes(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void Writer::magic(std::string_view four_cc) { bytes(four_cc.data(), four_cc.size()); }
void Writer::u8(std::uint8_t v) { put_le(out_, v); }
void Writer::u16(std::uint16_t v) { put_le(out_, v); }
void Writer::u32(std::uint32_t v) { put_le(out_, v); }
void Writer::u64(std::uint64_t v) { put_le(out_, v); }
void Writer::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void Writer::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void Writer::short_string(std::string_view s) {
  if (s.size() > 0xFFFF) {
    throw Error(ErrorCode::kArgument, "string longer than 65535 bytes");
  }
  u16(static_cast<std::uint16_t>(s.size()));
  bytes(s.data(), s.size());
}

void Writer::matrix_f64(const Eigen::MatrixXd& m) {
  u32(static_cast<std::uint32_t>(m.rows()));
  u32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
}

void Writer::matrix_f32(const Eigen::MatrixXd& m) {
  u32(static_cast<std::uint32_t>(m.rows()));
  u32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) f32(static_cast<float>(m.data()[i]));
}

void Reader::bytes(void* data, std::size_t n) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) {
    throw Error(ErrorCode::kFormat, "unexpected end of file");
  }
}

void Reader::expect_magic(std::string_view four_cc) {
  std::string got(four_cc.size(), '\0');
  in_.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (static_cast<std::size_t>(in_.gcount()) != got.size() || got != four_cc) {
    throw Error(ErrorCode::kFormat, "bad magic: expected \"" + std::string(four_cc) + "\"");
  }
}

std::uint8_t Reader::u8() {
  std::array<unsigned char, 1> b{};
  bytes(b.data(), b.size());
  return b[0];
}

std::uint16_t Reader::u16() {
  std::array<unsigned char, 2> b{};
  bytes(b.data(), b.size());
  return get_le<std::uint16_t>(b);
}

std::uint32_t Reader::u32() {
  std::array<unsigned char, 4> b{};
  bytes(b.data(), b.size());
  return get_le<std::uint32_t>(b);
}

std::uint64_t Reader::u64() {
  std::array<unsigned char, 8> b{};
  bytes(b.data(), b.size());
  return get_le<std::uint64_t>(b);
}

float Reader::f32() { return std::bit_cast<float>(u32()); }
double Reader::f64() { return std::bit_cast<double>(u64()); }

std::string Reader::short_string() {
  const std::uint16_t n = u16();
  std::string s(n, '\0');
  if (n > 0) bytes(s.data(), n);
  return s;
}

Eigen::MatrixXd Reader::matrix_f64() {
  const auto rows = u32();
  const auto cols = u32();
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f64();
  return m;
}

Eigen::MatrixXd Reader::matrix_f32() {
  const auto rows = u32();
  const auto cols = u32();
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f32();
  return m;
}

bool Reader::at_end() {
  return in_.peek() == std::char_traits<char>::eof();
}

}  // namespace frozencil::io
