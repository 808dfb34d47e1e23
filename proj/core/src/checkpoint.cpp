#include "frozencil/checkpoint.hpp"

#include "frozencil/binary_io.hpp"
#include "frozencil/error.hpp"

namespace frozencil {

namespace {

void header(io::Writer& w, std::string_view magic) {
  w.magic(magic);
  w.u32(kCheckpointVersion);
}

void expect_header(io::Reader& r, std::string_view magic) {
  r.expect_magic(magic);
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kFormat, std::string(magic) + " checkpoint version " +
                                        std::to_string(version) + " is not supported");
  }
}

Eigen::VectorXd read_vector(io::Reader& r) {
  Eigen::MatrixXd m = r.matrix_f64();
  if (m.cols() != 1 && m.size() != 0) throw Error(ErrorCode::kFormat, "expected a column vector");
  return m.size() == 0 ? Eigen::VectorXd() : Eigen::VectorXd(m.col(0));
}

void write_vector(io::Writer& w, const Eigen::VectorXd& v) { w.matrix_f64(Eigen::MatrixXd(v)); }

}  // namespace

void write_head(const MlpHead& head, std::ostream& out) {
  io::Writer w(out);
  header(w, "MLPH");
  w.u32(static_cast<std::uint32_t>(head.input_dim()));
  w.u32(static_cast<std::uint32_t>(head.hidden1()));
  w.u32(static_cast<std::uint32_t>(head.hidden2()));
  w.u32(static_cast<std::uint32_t>(head.num_classes()));
  for (ClassId c : head.class_ids()) w.u32(c);
  for (const auto& p : head.params()) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      for (Eigen::Index i = 0; i < p.rows(); ++i) w.f32(static_cast<float>(p(i, j)));
    }
  }
}

MlpHead read_head(std::istream& in) {
  io::Reader r(in);
  expect_header(r, "MLPH");
  const auto d = static_cast<Eigen::Index>(r.u32());
  const auto h1 = static_cast<Eigen::Index>(r.u32());
  const auto h2 = static_cast<Eigen::Index>(r.u32());
  const auto k = static_cast<Eigen::Index>(r.u32());
  std::vector<ClassId> ids(static_cast<std::size_t>(k));
  for (auto& c : ids) c = r.u32();
  const std::pair<Eigen::Index, Eigen::Index> shapes[] = {{h1, d}, {h1, 1}, {h2, h1},
                                                          {h2, 1}, {k, h2}, {k, 1}};
  ParamSet params;
  for (const auto& [rows, cols] : shapes) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = r.f32();
    }
    params.push_back(std::move(m));
  }
  return MlpHead(std::move(params), std::move(ids));
}

void write_bank(const PrototypeBank& bank, std::ostream& out) {
  io::Writer w(out);
  header(w, "PBNK");
  w.u8(static_cast<std::uint8_t>(bank.space().kind));
  w.u8(bank.space().normalized ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(bank.dim()));
  w.u32(static_cast<std::uint32_t>(bank.size()));
  for (const auto& [c, e] : bank.entries()) {
    w.u32(c);
    w.u64(e.count);
    write_vector(w, e.prototype);
    write_vector(w, e.raw_mean);
    write_vector(w, e.pre_mean);
  }
}

PrototypeBank read_bank(std::istream& in) {
  io::Reader r(in);
  expect_header(r, "PBNK");
  SpaceId space;
  const auto kind = r.u8();
  if (kind > static_cast<std::uint8_t>(SpaceKind::kHyperbolic)) {
    throw Error(ErrorCode::kFormat, "unknown space kind " + std::to_string(kind));
  }
  space.kind = static_cast<SpaceKind>(kind);
  space.normalized = r.u8() != 0;
  const auto dim = r.u32();
  const auto n = r.u32();
  PrototypeBank bank(space);
  std::vector<PrototypeEntry> entries;
  for (std::uint32_t i = 0; i < n; ++i) {
    PrototypeEntry e;
    e.label = r.u32();
    e.count = r.u64();
    e.prototype = read_vector(r);
    e.raw_mean = read_vector(r);
    e.pre_mean = read_vector(r);
    if (static_cast<std::uint32_t>(e.prototype.size()) != dim) {
      throw Error(ErrorCode::kFormat, "bank entry dimension disagrees with header");
    }
    entries.push_back(std::move(e));
  }
  bank.add(entries);
  return bank;
}

void write_random_projection(const RandomProj& proj, std::ostream& out) {
  io::Writer w(out);
  header(w, "RPRJ");
  w.u64(proj.seed);
  w.u8(proj.relu ? 1 : 0);
  w.matrix_f64(proj.weights);
}

RandomProj read_random_projection(std::istream& in) {
  io::Reader r(in);
  expect_header(r, "RPRJ");
  RandomProj p;
  p.seed = r.u64();
  p.relu = r.u8() != 0;
  p.weights = r.matrix_f64();
  return p;
}

void write_pca(const PcaModel& model, std::ostream& out) {
  io::Writer w(out);
  header(w, "PCAM");
  write_vector(w, model.mean);
  w.matrix_f64(model.components);
  write_vector(w, model.eigenvalues);
}

PcaModel read_pca(std::istream& in) {
  io::Reader r(in);
  expect_header(r, "PCAM");
  PcaModel m;
  m.mean = read_vector(r);
  m.components = r.matrix_f64();
  m.eigenvalues = read_vector(r);
  return m;
}

void write_lda(const LdaModel& model, std::ostream& out) {
  io::Writer w(out);
  header(w, "LDAM");
  w.f64(model.ridge);
  write_vector(w, model.mean);
  w.matrix_f64(model.directions);
  write_vector(w, model.eigenvalues);
}

LdaModel read_lda(std::istream& in) {
  io::Reader r(in);
  expect_header(r, "LDAM");
  LdaModel m;
  m.ridge = r.f64();
  m.mean = read_vector(r);
  m.directions = r.matrix_f64();
  m.eigenvalues = read_vector(r);
  return m;
}

void write_hyp_params(const HypProjParams& params, std::ostream& out) {
  io::Writer w(out);
  header(w, "HYPP");
  w.f64(params.curvature);
  w.f64(params.temperature);
  w.u8(params.normalize_input ? 1 : 0);
  w.matrix_f64(params.weights);
}

HypProjParams read_hyp_params(std::istream& in) {
  io::Reader r(in);
  expect_header(r, "HYPP");
  HypProjParams p;
  p.curvature = r.f64();
  p.temperature = r.f64();
  p.normalize_input = r.u8() != 0;
  p.weights = r.matrix_f64();
  return p;
}

}  // namespace frozencil
