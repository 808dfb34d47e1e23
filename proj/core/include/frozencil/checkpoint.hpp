#pragma once

// Versioned little-endian checkpoint blobs. Layouts are documented in
// docs/formats.md. Every blob starts with a four-byte magic and a u32 version.

#include <filesystem>
#include <istream>
#include <ostream>

#include "frozencil/hyperbolic.hpp"
#include "frozencil/mlp.hpp"
#include "frozencil/projections.hpp"
#include "frozencil/prototypes.hpp"

namespace frozencil {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "MLPH": dims, class ids, float32 parameters.
void write_head(const MlpHead& head, std::ostream& out);
MlpHead read_head(std::istream& in);

/// "PBNK": space id, dim, entries (float64).
void write_bank(const PrototypeBank& bank, std::ostream& out);
PrototypeBank read_bank(std::istream& in);

/// "RPRJ"
void write_random_projection(const RandomProj& proj, std::ostream& out);
RandomProj read_random_projection(std::istream& in);

/// "PCAM"
void write_pca(const PcaModel& model, std::ostream& out);
PcaModel read_pca(std::istream& in);

/// "LDAM"
void write_lda(const LdaModel& model, std::ostream& out);
LdaModel read_lda(std::istream& in);

/// "HYPP"
void write_hyp_params(const HypProjParams& params, std::ostream& out);
HypProjParams read_hyp_params(std::istream& in);

/// File helpers; throw Error(kIo) when the file cannot be opened.
template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& write);
template <typename Fn>
auto read_file(const std::filesystem::path& path, Fn&& read);

}  // namespace frozencil

#include <fstream>

#include "frozencil/error.hpp"

namespace frozencil {

template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& write) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  write(out);
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

template <typename Fn>
auto read_file(const std::filesystem::path& path, Fn&& read) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  return read(in);
}

}  // namespace frozencil
