#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "harness_internal.hpp"
#include "lrpr/errors.hpp"
#include "lrpr/harness.hpp"

namespace lrpr {

using nlohmann::json;

namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t out = 0;
    for (int b = 0; b < 8; ++b) out |= ((v >> (8 * b)) & 0xffu) << (8 * (7 - b));
    return out;
  }
}

void write_doubles(const std::filesystem::path& path, const double* data, std::size_t count) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &data[i], sizeof bits);
    bits = to_little(bits);
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<double> read_doubles(const std::filesystem::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  const auto size = static_cast<std::size_t>(in.tellg());
  if (size != count * sizeof(double)) {
    throw IoError(path.string() + ": expected " + std::to_string(count * sizeof(double)) +
                  " bytes, found " + std::to_string(size));
  }
  in.seekg(0);
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits;
    in.read(reinterpret_cast<char*>(&bits), sizeof bits);
    bits = to_little(bits);
    std::memcpy(&out[i], &bits, sizeof bits);
  }
  if (!in) throw IoError("read failed for " + path.string());
  return out;
}

template <class Scalar>
void write_blocks(const std::filesystem::path& path, const std::vector<const Mat<Scalar>*>& blocks) {
  std::size_t count = 0;
  for (const auto* b : blocks) count += static_cast<std::size_t>(b->size());
  std::vector<double> flat;
  flat.reserve(count * (is_complex_v<Scalar> ? 2 : 1));
  for (const auto* b : blocks) {
    const Scalar* p = b->data();
    for (Index i = 0; i < b->size(); ++i) {
      if constexpr (is_complex_v<Scalar>) {
        flat.push_back(p[i].real());
        flat.push_back(p[i].imag());
      } else {
        flat.push_back(p[i]);
      }
    }
  }
  write_doubles(path, flat.data(), flat.size());
}

template <class Scalar>
std::vector<Mat<Scalar>> read_blocks(const std::filesystem::path& path, Index rows, Index cols,
                                     Index count) {
  const std::size_t per = static_cast<std::size_t>(rows * cols) * (is_complex_v<Scalar> ? 2 : 1);
  const std::vector<double> flat = read_doubles(path, per * static_cast<std::size_t>(count));
  std::vector<Mat<Scalar>> out;
  for (Index k = 0; k < count; ++k) {
    Mat<Scalar> m(rows, cols);
    const double* src = flat.data() + per * static_cast<std::size_t>(k);
    for (Index i = 0; i < m.size(); ++i) {
      if constexpr (is_complex_v<Scalar>) {
        m.data()[i] = cplx(src[2 * i], src[2 * i + 1]);
      } else {
        m.data()[i] = src[i];
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::string field_name(Field f) { return f == Field::Real ? "real" : "complex"; }

json shape(Index rows, Index cols, Index count, bool complex) {
  return json{{"rows", rows}, {"cols", cols}, {"count", count}, {"complex", complex}};
}

template <class Scalar>
void write_ensemble(const Ensemble<Scalar>& ens, const std::filesystem::path& path, json& files) {
  std::vector<const Mat<Scalar>*> blocks;
  Index rows = ens.rows();
  Index cols = ens.dim();
  if constexpr (is_complex_v<Scalar>) {
    if (const auto* cdp = dynamic_cast<const CdpEnsemble*>(&ens)) {
      for (Index k = 0; k < ens.columns(); ++k) blocks.push_back(&cdp->masks(k));
      rows = ens.dim();
      cols = cdp->dims().masks;
    }
  }
  if (blocks.empty()) {
    for (Index k = 0; k < ens.columns(); ++k) blocks.push_back(ens.dense_rows(k));
  }
  write_blocks<Scalar>(path, blocks);
  files["ensemble"] = shape(rows, cols, ens.columns(), is_complex_v<Scalar>);
}

}  // namespace

void write_matrix(const std::filesystem::path& path, const RealMat& m) {
  write_blocks<double>(path, {&m});
}

void write_matrix(const std::filesystem::path& path, const Mat<cplx>& m) {
  write_blocks<cplx>(path, {&m});
}

RealMat read_real_matrix(const std::filesystem::path& path, Index rows, Index cols) {
  return std::move(read_blocks<double>(path, rows, cols, 1).front());
}

Mat<cplx> read_complex_matrix(const std::filesystem::path& path, Index rows, Index cols) {
  return std::move(read_blocks<cplx>(path, rows, cols, 1).front());
}

InstanceInfo write_instance(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  cfg.validate();
  InstanceInfo info;
  info.n = cfg.n;
  info.q = cfg.q.front();
  info.r = cfg.r;
  info.m = cfg.rows_for(cfg.m_over_n.front());
  info.field = cfg.field;
  info.sharing = cfg.sharing;
  info.noise_halfwidth = cfg.noise_halfwidth;
  info.seed = cfg.seed;

  // Cell 0, trial 0 of the experiment grid.
  const GroundTruth gt = gen_low_rank(cfg.n, info.q, cfg.r, detail::grid_seed(cfg, detail::kTruthSeed, 0));
  const EnsembleSpec spec = detail::ensemble_spec(cfg, info.m, info.q,
                                                  detail::grid_seed(cfg, detail::kEnsembleSeed, 0, 0),
                                                  cfg.sharing, 0);
  info.kind = spec.kind;
  info.cdp = spec.cdp;
  const std::uint64_t noise_seed = detail::grid_seed(cfg, detail::kNoiseSeed, 0, 0);

  std::filesystem::create_directories(dir);
  json files;
  RealMat y;
  if (cfg.field == Field::Real) {
    const auto ens = gen_ensemble<double>(spec);
    y = measure(*ens, gt, cfg.noise_halfwidth, noise_seed).y;
    write_ensemble(*ens, dir / "ensemble.bin", files);
  } else {
    const auto ens = gen_ensemble<cplx>(spec);
    y = measure(*ens, gt, cfg.noise_halfwidth, noise_seed).y;
    write_ensemble(*ens, dir / "ensemble.bin", files);
  }
  write_matrix(dir / "U.bin", gt.U);
  write_matrix(dir / "B.bin", gt.B);
  write_matrix(dir / "X.bin", gt.X);
  write_matrix(dir / "y.bin", y);
  files["U"] = shape(gt.n, gt.r, 1, false);
  files["B"] = shape(gt.r, gt.q, 1, false);
  files["X"] = shape(gt.n, gt.q, 1, false);
  files["y"] = shape(y.rows(), y.cols(), 1, false);

  json side;
  side["n"] = info.n;
  side["q"] = info.q;
  side["r"] = info.r;
  side["m"] = info.m;
  side["field"] = field_name(info.field);
  side["kind"] = to_string(info.kind);
  side["sharing"] = to_string(info.sharing);
  if (info.cdp) side["cdp"] = {{"n1", info.cdp->n1}, {"n2", info.cdp->n2}, {"masks", info.cdp->masks}};
  side["noise_halfwidth"] = info.noise_halfwidth;
  side["seed"] = info.seed;
  side["layout"] = "column-major little-endian float64; complex entries interleave (re, im)";
  side["files"] = files;
  write_text(dir / "instance.json", side.dump(2));
  return info;
}

Instance read_instance(const std::filesystem::path& dir) {
  Instance inst;
  json side;
  try {
    side = json::parse(read_text(dir / "instance.json"));
    InstanceInfo& info = inst.info;
    info.n = side.at("n").get<Index>();
    info.q = side.at("q").get<Index>();
    info.r = side.at("r").get<Index>();
    info.m = side.at("m").get<Index>();
    info.field = side.at("field").get<std::string>() == "real" ? Field::Real : Field::Complex;
    info.kind = parse_ensemble_kind(side.at("kind").get<std::string>());
    info.sharing = parse_sharing(side.at("sharing").get<std::string>());
    if (side.contains("cdp")) {
      const json& c = side.at("cdp");
      info.cdp = CdpDims{c.at("n1").get<Index>(), c.at("n2").get<Index>(), c.at("masks").get<Index>()};
    }
    info.noise_halfwidth = side.at("noise_halfwidth").get<double>();
    info.seed = side.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw IoError((dir / "instance.json").string() + ": " + e.what());
  }
  const InstanceInfo& info = inst.info;
  inst.U = read_real_matrix(dir / "U.bin", info.n, info.r);
  inst.B = read_real_matrix(dir / "B.bin", info.r, info.q);
  inst.X = read_real_matrix(dir / "X.bin", info.n, info.q);
  inst.y = read_real_matrix(dir / "y.bin", info.m, info.q);
  const json& e = side.at("files").at("ensemble");
  const Index rows = e.at("rows").get<Index>();
  const Index cols = e.at("cols").get<Index>();
  if (e.at("complex").get<bool>()) {
    inst.complex_blocks = read_blocks<cplx>(dir / "ensemble.bin", rows, cols, info.q);
  } else {
    inst.real_blocks = read_blocks<double>(dir / "ensemble.bin", rows, cols, info.q);
  }
  return inst;
}

}  // namespace lrpr
