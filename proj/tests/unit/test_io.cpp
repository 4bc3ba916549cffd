#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "elastored/config_io.hpp"
#include "elastored/field_io.hpp"
#include "elastored/metrics.hpp"
#include "elastored/pipeline.hpp"

using namespace elastored;
namespace fs = std::filesystem;

namespace {

Vector random_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Vector v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

template <class T>
void append(std::string& s, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  s.append(buf, sizeof(T));
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / name) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& f) const { return (path_ / f).string(); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace

TEST(Efld, ByteLayoutOfDisplacementField) {
  // Two nodes, interleaved (x0, y0, x1, y1) in memory; planar on disk.
  const FieldFile ff{FieldKind::displacement, {1, 2}, Vector{{1.5, -2.0, 3.25, 4.0}}};
  std::string want = "EFLD";
  for (std::uint32_t v : {1u, 1u, 1u, 2u}) append(want, v);
  for (double v : {1.5, 3.25, -2.0, 4.0}) append(want, v);
  EXPECT_EQ(encode_efld(ff), want);
  EXPECT_EQ(want.size(), kEfldHeaderBytes + 32);
}

TEST(Efld, RoundTripIsBitExact) {
  std::mt19937_64 rng(1);
  for (FieldKind k : {FieldKind::elasticity, FieldKind::displacement, FieldKind::force}) {
    const RasterDims dims{5, 7};
    const FieldFile ff{k, dims, random_vector(rng, dims.size() * plane_count(k))};
    const FieldFile back = decode_efld(encode_efld(ff));
    EXPECT_EQ(back.kind, k);
    EXPECT_TRUE(back.dims == dims);
    EXPECT_EQ(std::memcmp(back.values.data(), ff.values.data(), std::size_t(ff.values.size()) * 8), 0);
  }
}

TEST(Efld, FileRoundTrip) {
  TempDir dir("elastored_test_efld");
  const ElasticityField E(Vector{{0.1, 0.2, 0.3, 0.4, 0.5, 0.6}});
  write_efld(dir / "e.efld", to_file(E, {2, 3}));
  const FieldFile ff = read_efld(dir / "e.efld");
  EXPECT_TRUE(field_from_file<ElasticityField>(ff, FieldKind::elasticity, {2, 3}) == E);
  EXPECT_THROW(field_from_file<ElasticityField>(ff, FieldKind::force, {2, 3}), ParseError);
  EXPECT_THROW(field_from_file<ElasticityField>(ff, FieldKind::elasticity, {3, 2}), ParseError);
  EXPECT_THROW(read_efld(dir / "missing.efld"), IoError);
}

TEST(Efld, MalformedInputsRejected) {
  const std::string good = encode_efld({FieldKind::elasticity, {2, 2}, Vector::Ones(4)});
  EXPECT_THROW(decode_efld(good.substr(0, good.size() - 1)), ParseError);
  EXPECT_THROW(decode_efld(good + "x"), ParseError);
  EXPECT_THROW(decode_efld(good.substr(0, 10)), ParseError);
  std::string bad = good;
  bad[0] = 'X';
  EXPECT_THROW(decode_efld(bad), ParseError);
  bad = good;
  bad[4] = 9;
  EXPECT_THROW(decode_efld(bad), ParseError);
  bad = good;
  bad[8] = 3;
  EXPECT_THROW(decode_efld(bad), ParseError);
  EXPECT_THROW(encode_efld({FieldKind::force, {2, 2}, Vector::Ones(4)}), InvalidArgument);
}

TEST(Pgm, ConstantFieldRendersUniformGray) {
  const std::string pgm = render_pgm(Vector::Constant(12, 0.5), {3, 4});
  const std::string header = "P5\n4 3\n255\n";
  ASSERT_EQ(pgm.size(), header.size() + 12);
  EXPECT_EQ(pgm.substr(0, header.size()), header);
  for (std::size_t i = header.size(); i < pgm.size(); ++i) EXPECT_EQ(std::uint8_t(pgm[i]), 128);
}

TEST(Pgm, TopImageRowIsLastRasterRowAndWindowClamps) {
  // Raster row 0 is y = 0 (bottom); the file lists the top row first.
  const Vector f{{-1.0, 0.0, 1.0, 2.0}};
  const std::string pgm = render_pgm(f, {2, 2});
  const std::string px = pgm.substr(pgm.size() - 4);
  EXPECT_EQ(std::uint8_t(px[0]), 255);
  EXPECT_EQ(std::uint8_t(px[1]), 255);
  EXPECT_EQ(std::uint8_t(px[2]), 0);
  EXPECT_EQ(std::uint8_t(px[3]), 0);
  EXPECT_THROW(render_pgm(f, {2, 2}, 1.0, 1.0), InvalidArgument);
}

TEST(Pgm, MaskRoundTrip) {
  const Mask m = generate_mask(DiscShape{0.3, 0.6, 0.2}, {13, 17});
  const Mask back = decode_mask_pgm(encode_mask_pgm(m));
  EXPECT_TRUE(back.dims == m.dims);
  EXPECT_EQ(back.data, m.data);
}

TEST(Pgm, MaskDecoderHandlesCommentsAndThreshold) {
  std::string bytes = "P5\n# made by hand\n2 1\n255\n";
  bytes += char(127);
  bytes += char(128);
  const Mask m = decode_mask_pgm(bytes);
  EXPECT_FALSE(m.at(0, 0));
  EXPECT_TRUE(m.at(0, 1));
  EXPECT_THROW(decode_mask_pgm("P2\n1 1\n255\n0"), ParseError);
  EXPECT_THROW(decode_mask_pgm("P5\n1 1\n65535\n00"), ParseError);
  EXPECT_THROW(decode_mask_pgm("P5\n2 2\n255\nabc"), ParseError);
}

TEST(ConfigJson, MeshRoundTrip) {
  const Mesh m = build_rect_mesh(4, 3, 2.0, 1.5);
  const Mesh back = mesh_from_json(Json::parse(mesh_to_json(m).dump()));
  EXPECT_EQ(back.nx, 4);
  EXPECT_EQ(back.ny, 3);
  EXPECT_EQ(back.width, 2.0);
  EXPECT_EQ(back.dirichlet, m.dirichlet);
  EXPECT_THROW(mesh_from_json(Json{{"nx", 4}, {"ny", 3}, {"width", 1.0}}), ParseError);
  EXPECT_THROW(mesh_from_json(Json{{"nx", 4}, {"ny", 3}, {"width", 1.0}, {"height", 1.0}, {"bogus", 1}}),
               ParseError);
  EXPECT_THROW(mesh_from_json(Json::parse(R"({"nx":1,"ny":1,"width":1,"height":1,"dirichlet":[[99,0]]})")),
               ParseError);
}

TEST(ConfigJson, SolverConfigRoundTrip) {
  SolverConfig c;
  c.lambda = 0.25;
  c.inner_iters = 7;
  c.e_init = InitKind::constant;
  c.init_value = 0.2;
  const SolverConfig back = solver_config_from_json(solver_config_to_json(c));
  EXPECT_EQ(solver_config_to_json(back), solver_config_to_json(c));
  EXPECT_FALSE(back.step.has_value());
  EXPECT_EQ(*back.lambda, 0.25);
  EXPECT_EQ(back.e_init, InitKind::constant);
  EXPECT_EQ(back.init_value, 0.2);
}

TEST(ConfigJson, SolverConfigErrors) {
  EXPECT_THROW(solver_config_from_json(Json{{"stepp", 1.0}}), ParseError);
  EXPECT_THROW(solver_config_from_json(Json{{"lambda", "big"}}), ParseError);
  EXPECT_THROW(solver_config_from_json(Json{{"e_init", "zero"}}), ParseError);
  EXPECT_THROW(solver_config_from_json(Json{{"tol", -1.0}}), InvalidArgument);
  EXPECT_THROW(solver_config_from_json(Json{{"inner_iters", "many"}}), ParseError);
  EXPECT_NO_THROW(solver_config_from_json(Json{{"step", "auto"}, {"poisson_ratio", 0.4}}));
}

TEST(ConfigJson, DenoiserSpecs) {
  const RasterDims dims{4, 4};
  EXPECT_EQ(parse_denoiser_spec("identity", dims).name(), "identity");
  const Denoiser g = parse_denoiser_spec("gaussian_blur:1.5", dims);
  EXPECT_EQ(std::get<GaussianBlur>(g.kind).sigma_px, 1.5);
  const Denoiser tv = parse_denoiser_spec("tv:0.1:30", dims);
  EXPECT_EQ(std::get<TotalVariation>(tv.kind).weight, 0.1);
  EXPECT_EQ(std::get<TotalVariation>(tv.kind).iterations, 30);
  EXPECT_EQ(std::get<MedianFilter>(parse_denoiser_spec("median:5", dims).kind).size, 5);
  EXPECT_THROW(parse_denoiser_spec("gaussian_blur:abc", dims), ParseError);
  EXPECT_THROW(parse_denoiser_spec("wavelet", dims), ParseError);
  EXPECT_THROW(parse_denoiser_spec("cnn:/nonexistent/w.redw", dims), LoadError);
}

TEST(Metrics, TruthAgainstItself) {
  const Vector t{{0.1, 0.4, 0.2}};
  const Metrics m = evaluate(t, t);
  EXPECT_EQ(m.rmse, 0.0);
  EXPECT_TRUE(std::isinf(m.psnr));
  EXPECT_EQ(metrics_to_json(m)["psnr"], "inf");
}

TEST(Metrics, KnownValues) {
  const Vector t{{1.0, 1.0, 1.0, 1.0}};
  const Vector e{{1.1, 0.9, 1.1, 0.9}};
  const Metrics m = evaluate(t, e);
  EXPECT_NEAR(m.rmse, 0.1, 1e-15);
  EXPECT_NEAR(m.psnr, 20.0, 1e-12);

  Mask mask = Mask::empty({2, 2});
  mask.data = {0, 0, 1, 1};
  const Vector est{{1.0, 3.0, 6.0, 8.0}};
  // means 2 and 7, population variances 1 and 1
  EXPECT_NEAR(*evaluate(t, est, &mask).cnr, 5.0 / std::sqrt(2.0), 1e-12);
  EXPECT_FALSE(evaluate(t, est).cnr.has_value());
}

TEST(Metrics, ProfileAndCsv) {
  const Vector field{{1, 2, 3, 4, 5, 6}};
  EXPECT_TRUE(profile(field, {2, 3}, 1) == (Vector{{4.0, 5.0, 6.0}}));
  EXPECT_THROW(profile(field, {2, 3}, 2), InvalidArgument);
  EXPECT_DOUBLE_EQ(profile_mad(Vector{{1.0, 2.0}}, Vector{{2.0, 4.0}}), 1.5);
  const Vector truth{{0.5, 0.5, 0.5}};
  EXPECT_EQ(profile_csv(Vector{{1.0, 2.0, 0.25}}, &truth),
            "col,x,value,truth\n0,0,1,0.5\n1,0.5,2,0.5\n2,1,0.25,0.5\n");
  Mask mask = generate_mask(DiscShape{0.5, 0.3, 0.15}, {21, 21});
  EXPECT_EQ(inclusion_center_row(mask), 6);
  EXPECT_EQ(inclusion_center_row(Mask::empty({21, 21})), 10);
}

TEST(Metrics, TraceCsvHasOneRowPerStep) {
  std::vector<TraceRecord> trace(3);
  trace[1].inner = 1;
  trace[2].g = 0.1;
  const std::string csv = trace_csv(trace);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_NE(csv.find("\n0,0,0.10000000000000001,"), std::string::npos);
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
}

TEST(ExportPairs, EmptyBatchWritesEmptyManifest) {
  TempDir dir("elastored_test_pairs0");
  BatchSpec spec;
  spec.nx = spec.ny = 8;
  const Json manifest = export_training_pairs(spec, dir.path().string());
  EXPECT_TRUE(manifest["pairs"].empty());
  EXPECT_EQ(read_json_file(dir / "manifest.json"), manifest);
  EXPECT_EQ(std::distance(fs::directory_iterator(dir.path()), fs::directory_iterator{}), 1);
}

TEST(ExportPairs, ThreeSeedsGiveSixFieldsAndThreeEntries) {
  TempDir dir("elastored_test_pairs3");
  const BatchSpec spec = batch_spec_from_json(
      Json{{"nx", 8}, {"ny", 8}, {"count", 3}, {"first_seed", 10}, {"solver", {{"ml_iters", 500}}}});
  ASSERT_EQ(spec.seeds, (std::vector<std::uint64_t>{10, 11, 12}));
  const Json manifest = export_training_pairs(spec, dir.path().string());
  EXPECT_EQ(manifest["version"], 1);
  EXPECT_EQ(manifest["rows"], 9);
  EXPECT_EQ(manifest["cols"], 9);
  ASSERT_EQ(manifest["pairs"].size(), 3u);
  for (const Json& p : manifest["pairs"]) {
    EXPECT_EQ(p["status"], "ok");
    EXPECT_GT(p["rmse"].get<double>(), 0.0);
    const FieldFile noisy = read_efld(dir / p["noisy"].get<std::string>());
    const FieldFile clean = read_efld(dir / p["clean"].get<std::string>());
    EXPECT_EQ(noisy.kind, FieldKind::elasticity);
    EXPECT_TRUE(clean.dims == (RasterDims{9, 9}));
    EXPECT_NEAR(rms(noisy.values - clean.values), p["rmse"].get<double>(), 1e-15);
  }
  EXPECT_EQ(std::distance(fs::directory_iterator(dir.path()), fs::directory_iterator{}), 7);
  EXPECT_THROW(batch_spec_from_json(Json{{"shape", "star"}}), ParseError);
}
