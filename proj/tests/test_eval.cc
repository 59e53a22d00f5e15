#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"

#include "decay_lidar/baselines.h"
#include "decay_lidar/eval.h"
#include "decay_lidar/simulator.h"
#include "test_util.h"

namespace decay_lidar {
namespace {

Pose At(const Vec3& p) { return Pose(p, Quat::Identity()); }

Scenario SmallPark() {
  Scenario s = MakeScenario("park", 1);
  s.trajectory.steps = 4;
  s.mapping_steps = 40;
  return s;
}

// Short park run with all three models, shared by the pipeline tests.
struct Fixture {
  Scenario scenario;
  SimulatedRun run;
  std::shared_ptr<DecayModel> decay;
  std::shared_ptr<ReflectionModel> reflection;
  std::shared_ptr<EndpointModel> endpoint;

  Fixture() : scenario(SmallPark()), run(SimulateScenario(scenario, 0.1, 5)) {
    const GridGeometry& g = scenario.map_geom;
    decay = std::make_shared<DecayModel>(
        std::make_shared<DecayGrid>(Finalize(BuildAccumulator(g, run.mapping_scans))));
    reflection = std::make_shared<ReflectionModel>(
        std::make_shared<ReflectionGrid>(BuildReflectionMap(run.mapping_scans, g)));
    endpoint = std::make_shared<EndpointModel>(
        std::make_shared<LikelihoodField>(BuildLikelihoodField(run.mapping_scans, g)));
  }
};

TEST_SUITE("eval") {

TEST_CASE("forward KL of a single ray") {
  // Uniform lambda 1: density at r is e^-r; r = 1 - ln 1 gives e^-1.
  const GridGeometry g(Vec3(-5, -5, -5), 1.0, {10, 10, 10});
  const DecayModel model(std::make_shared<DecayGrid>(g, 1.0, 1.0));
  const Scan scan{At(Vec3::Zero()), 0.1, 4.0, {{Vec3f::UnitX(), ReadingKind::kRange, 1.0f}}};
  CHECK(ForwardKl(model, {scan}) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(ForwardKl(model, {scan, scan}) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("forward KL is invariant under ray reordering") {
  Fixture f;
  std::vector<Scan> shuffled = f.run.scans;
  std::mt19937_64 gen(3);
  for (Scan& s : shuffled) std::shuffle(s.rays.begin(), s.rays.end(), gen);
  std::reverse(shuffled.begin(), shuffled.end());
  const double a = ForwardKl(*f.decay, f.run.scans);
  const double b = ForwardKl(*f.decay, shuffled);
  CHECK(a == doctest::Approx(b).epsilon(1e-10));
  CHECK(std::isfinite(ForwardKl(*f.reflection, f.run.scans)));
  CHECK(std::isfinite(ForwardKl(*f.endpoint, f.run.scans)));
}

TEST_CASE("sample KL identities") {
  std::vector<double> surrogate = {-1.0, -2.5, -0.3, -4.0};
  std::vector<double> proportional = surrogate;
  for (double& x : proportional) x += 123.0;
  CHECK(std::abs(SampleKl(proportional, surrogate, false)) < 1e-12);

  // All mass on one of M samples, surrogate nearly uniform: about log M.
  const std::size_t m = 50;
  std::vector<double> flat(m, 0.0), spike(m, -1e6);
  for (std::size_t i = 0; i < m; ++i) flat[i] = -1e-9 * static_cast<double>(i);
  spike[0] = 0.0;
  CHECK(SampleKl(spike, flat, false) == doctest::Approx(std::log(50.0)).epsilon(1e-6));

  RandomStream rng(61);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(m), b(m);
    for (std::size_t i = 0; i < m; ++i) {
      a[i] = rng.Normal(0, 30);
      b[i] = rng.Normal(0, 3);
    }
    CHECK(SampleKl(a, b, false) >= -1e-9);
  }
  CHECK_THROWS(SampleKl({}, {}, false));
}

TEST_CASE("disc samples are uniform in the disc") {
  RandomStream rng(62);
  const Pose c(Vec3(3, 4, 1.5), YawRotation(0.7));
  int inner = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Pose p = SampleDisc(c, 2.5, rng);
    const double r = (p.translation - c.translation).head<2>().norm();
    CHECK(r <= 2.5);
    CHECK(p.translation.z() == 1.5);
    CHECK(p.rotation.coeffs() == c.rotation.coeffs());
    inner += r < 2.5 / std::sqrt(2.0);
  }
  CHECK(std::abs(static_cast<double>(inner) / n - 0.5) < 0.01);
}

TEST_CASE("inverse KL is finite, non-negative and deterministic") {
  Fixture f;
  EvalConfig cfg;
  for (const SensorModel* model :
       {static_cast<const SensorModel*>(f.decay.get()),
        static_cast<const SensorModel*>(f.reflection.get()),
        static_cast<const SensorModel*>(f.endpoint.get())}) {
    RandomStream a(7, StreamTag::kPoseSamples, 0), b(7, StreamTag::kPoseSamples, 0);
    const InverseKlResult ra = InverseKl(*model, f.run.scans[0], f.run.scans[0].pose, cfg, a, 1);
    const InverseKlResult rb = InverseKl(*model, f.run.scans[0], f.run.scans[0].pose, cfg, b, 3);
    CHECK(ra.valid);
    CHECK(ra.value >= -1e-9);
    CHECK(std::isfinite(ra.value));
    CHECK(ra.value == rb.value);
  }
}

TEST_CASE("inverse KL flags scans whose likelihoods are all floored") {
  // Every ray ends in a zero-rate voxel.
  const GridGeometry g(Vec3(-10, -10, -10), 1.0, {20, 20, 20});
  const DecayModel vacuum(std::make_shared<DecayGrid>(g, 0.0, 0.0));
  const Scan scan{At(Vec3::Zero()), 0.1, 5.0, {{Vec3f::UnitX(), ReadingKind::kRange, 2.0f}}};
  RandomStream rng(63);
  CHECK_FALSE(InverseKl(vacuum, scan, scan.pose, EvalConfig{}, rng).valid);
}

TEST_CASE("inverse KL decreases as world structure sharpens") {
  // Walled room with pillars; the same layout with rates scaled by 10 pins
  // the pose more tightly.
  WorldSpec soft;
  soft.geom = GridGeometry(Vec3::Zero(), 0.25, {48, 48, 12});
  const double rate = 0.04;
  soft.primitives = {Primitive::Box(Vec3(6, 0.5, 1.5), Vec3(12, 1, 3), rate),
                     Primitive::Box(Vec3(6, 11.5, 1.5), Vec3(12, 1, 3), rate),
                     Primitive::Box(Vec3(0.5, 6, 1.5), Vec3(1, 12, 3), rate),
                     Primitive::Box(Vec3(11.5, 6, 1.5), Vec3(1, 12, 3), rate),
                     Primitive::Cylinder(Vec3(3.5, 8, 1.5), 0.4, 3, rate),
                     Primitive::Box(Vec3(8.5, 3.5, 1.5), Vec3(1.2, 0.6, 3), rate, 0.4)};
  WorldSpec sharp = soft;
  for (Primitive& p : sharp.primitives) p.rate *= 10.0;
  const auto soft_truth = std::make_shared<DecayGrid>(RasterizeWorld(soft));
  const auto sharp_truth = std::make_shared<DecayGrid>(RasterizeWorld(sharp));
  ScanPattern pattern;
  pattern.azimuth_count = 36;
  pattern.elevation_min = pattern.elevation_max = 0.0;
  pattern.elevation_count = 1;
  RandomStream place(64);
  std::vector<Pose> poses;
  for (int i = 0; i < 30; ++i) {
    poses.push_back(Pose(Vec3(place.Uniform(4, 8), place.Uniform(4, 8), 1.5),
                         YawRotation(place.Uniform(-M_PI, M_PI))));
  }
  const auto soft_scans = SimulateScans(*soft_truth, poses, pattern, 0.2, 20.0, 0.0, 1);
  const auto sharp_scans = SimulateScans(*sharp_truth, poses, pattern, 0.2, 20.0, 0.0, 1);
  double soft_sum = 0.0, sharp_sum = 0.0;
  for (std::size_t s = 0; s < poses.size(); ++s) {
    RandomStream r1(9, StreamTag::kPoseSamples, s), r2(9, StreamTag::kPoseSamples, s);
    soft_sum += InverseKl(DecayModel(soft_truth), soft_scans[s], poses[s], EvalConfig{}, r1).value;
    sharp_sum += InverseKl(DecayModel(sharp_truth), sharp_scans[s], poses[s], EvalConfig{}, r2).value;
  }
  CHECK(sharp_sum < soft_sum);
}

TEST_CASE("report schema, determinism and serialization") {
  Fixture f;
  CompareOptions opt;
  opt.seed = 11;
  opt.filter.particle_count = 30;
  opt.eval.sample_count = 10;
  const std::vector<const SensorModel*> models = {f.decay.get(), f.reflection.get(),
                                                  f.endpoint.get()};
  const Report a = CompareModels(models, f.run.scans, opt);
  const Report b = CompareModels(models, f.run.scans, opt);
  REQUIRE(a.models.size() == 3);
  CHECK(a.models[0].model == ModelKind::kDecay);
  CHECK(a.models[1].model == ModelKind::kReflection);
  CHECK(a.models[2].model == ModelKind::kEndpoint);
  const nlohmann::json ja = ReportToJson(a);
  CHECK(ja.dump() == ReportToJson(b).dump());
  for (const char* name : {"decay", "reflection", "endpoint"}) {
    REQUIRE(ja.contains(name));
    for (const char* key : {"forward_kl", "inverse_kl_mean", "mcl_mean_error_m"}) {
      CHECK(ja[name].contains(key));
    }
  }
  CHECK(ja.size() == 3);
  CHECK(ja["endpoint"]["config"]["model_parameters"]["sigma"] == 0.2);
  const Report back = ReportFromJson(ja);
  CHECK(ReportToJson(back).dump() == ja.dump());

  const std::string csv = ReportToCsv(a);
  std::istringstream lines(csv);
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 4);
  CHECK(csv.rfind("model,forward_kl,inverse_kl_mean,mcl_mean_error_m", 0) == 0);
}

TEST_CASE("eval config validation") {
  EvalConfig c;
  CHECK(c.sample_count == 50);
  CHECK(c.sample_radius == 2.5);
  CHECK(c.gt_sigma_xy == 0.3);
  c.sample_count = 1;
  CHECK_THROWS(c.Validate());
  c = EvalConfig{};
  c.sample_radius = 0.0;
  CHECK_THROWS(c.Validate());
  c = EvalConfig{};
  c.gt_sigma_xy = -0.1;
  CHECK_THROWS(c.Validate());
}

}  // TEST_SUITE

}  // namespace
}  // namespace decay_lidar
