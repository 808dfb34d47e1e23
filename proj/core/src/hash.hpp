#pragma once

#include <cstdint>
#include <cstring>
#include <string_view>

#include <Eigen/Core>

namespace frozencil::detail {

/// 64-bit FNV-1a, used for state fingerprints and config hashes.
class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001B3ULL;
    }
  }
  template <typename T>
    requires std::is_arithmetic_v<T>
  void add(T v) { bytes(&v, sizeof(v)); }
  void add(std::string_view s) {
    add(static_cast<std::uint64_t>(s.size()));
    bytes(s.data(), s.size());
  }
  template <typename Derived>
  void add(const Eigen::DenseBase<Derived>& m) {
    add(static_cast<std::int64_t>(m.rows()));
    add(static_cast<std::int64_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) add(m(i, j));
    }
  }
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

}  // namespace frozencil::detail
