#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "decay_lidar/baselines.h"
#include "decay_lidar/config.h"
#include "decay_lidar/decay_map.h"
#include "decay_lidar/eval.h"
#include "decay_lidar/io.h"
#include "decay_lidar/likelihood.h"
#include "decay_lidar/mcl.h"
#include "decay_lidar/simulator.h"

namespace py = pybind11;

namespace decay_lidar {
namespace {

using ModelPtr = std::shared_ptr<SensorModel>;

ModelPtr Mutable(std::shared_ptr<const SensorModel> model) {
  return std::const_pointer_cast<SensorModel>(std::move(model));
}

Quat QuatFromWxyz(const Eigen::Vector4d& wxyz) {
  return Quat(wxyz[0], wxyz[1], wxyz[2], wxyz[3]).normalized();
}

Measurement MakeMeasurement(const Pose& pose, const Vec3& direction, ReadingKind kind,
                            double range, double r_min, double r_max) {
  const Vec3 unit = direction.normalized();
  switch (kind) {
    case ReadingKind::kSub:
      return Measurement::Sub(pose, unit, r_min, r_max);
    case ReadingKind::kSup:
      return Measurement::Sup(pose, unit, r_min, r_max);
    case ReadingKind::kRange:
      break;
  }
  return Measurement::Range(pose, unit, range, r_min, r_max);
}

Scan ScanFromArrays(const Pose& pose, double r_min, double r_max,
                    const Eigen::Ref<const Eigen::Matrix<float, Eigen::Dynamic, 3, Eigen::RowMajor>>& dirs,
                    const std::vector<std::uint8_t>& kinds, const std::vector<float>& ranges) {
  const auto n = static_cast<std::size_t>(dirs.rows());
  if (kinds.size() != n || ranges.size() != n) {
    throw std::invalid_argument("directions, kinds and ranges must have equal length");
  }
  Scan scan{pose, r_min, r_max, {}};
  scan.rays.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (kinds[j] > 2) throw std::invalid_argument("reading kind must be 0, 1 or 2");
    scan.rays.push_back({dirs.row(static_cast<Eigen::Index>(j)).transpose(),
                         static_cast<ReadingKind>(kinds[j]), ranges[j]});
  }
  return scan;
}

py::array_t<double> RatesArray(const DecayGrid& grid) {
  const auto& d = grid.geometry().dims();
  // Linear index is x-fastest, so the (nz, ny, nx) view is contiguous.
  py::array_t<double> out({static_cast<py::ssize_t>(d[2]), static_cast<py::ssize_t>(d[1]),
                           static_cast<py::ssize_t>(d[0])});
  std::copy(grid.rates().begin(), grid.rates().end(), out.mutable_data());
  return out;
}

}  // namespace
}  // namespace decay_lidar

PYBIND11_MODULE(_core, m) {
  using namespace decay_lidar;
  m.doc() = "Decay-rate lidar sensor model core";

  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::enum_<ReadingKind>(m, "ReadingKind")
      .value("SUB", ReadingKind::kSub)
      .value("RANGE", ReadingKind::kRange)
      .value("SUP", ReadingKind::kSup);

  py::class_<Pose>(m, "Pose")
      .def(py::init([](const Vec3& t, const Eigen::Vector4d& wxyz) {
             return Pose(t, QuatFromWxyz(wxyz));
           }),
           py::arg("translation"), py::arg("quaternion_wxyz") = Eigen::Vector4d(1, 0, 0, 0))
      .def_static("from_yaw",
                  [](const Vec3& t, double yaw) { return Pose(t, YawRotation(yaw)); },
                  py::arg("translation"), py::arg("yaw"))
      .def_property_readonly("translation", [](const Pose& p) { return p.translation; })
      .def_property_readonly("quaternion_wxyz",
                             [](const Pose& p) {
                               const Quat& q = p.rotation;
                               return Eigen::Vector4d(q.w(), q.x(), q.y(), q.z());
                             })
      .def("__repr__", [](const Pose& p) {
        return "Pose(translation=[" + std::to_string(p.translation.x()) + ", " +
               std::to_string(p.translation.y()) + ", " + std::to_string(p.translation.z()) +
               "])";
      });

  py::class_<GridGeometry>(m, "GridGeometry")
      .def(py::init([](const Vec3& origin, double edge, const std::array<std::uint32_t, 3>& dims) {
             return GridGeometry(origin, edge, {dims[0], dims[1], dims[2]});
           }),
           py::arg("origin"), py::arg("edge_length"), py::arg("dims"))
      .def_property_readonly("origin", [](const GridGeometry& g) { return g.origin(); })
      .def_property_readonly("edge_length", &GridGeometry::edge_length)
      .def_property_readonly("dims",
                             [](const GridGeometry& g) {
                               const auto& d = g.dims();
                               return std::array<std::uint32_t, 3>{d[0], d[1], d[2]};
                             })
      .def_property_readonly("voxel_count", &GridGeometry::voxel_count)
      .def("locate", [](const GridGeometry& g, const Vec3& p) { return Locate(g, p); },
           py::arg("point"), "Linear voxel index, or -1 outside the grid.")
      .def(
          "trace_ray",
          [](const GridGeometry& g, const Vec3& origin, const Vec3& direction, double length) {
            std::vector<std::pair<std::int64_t, double>> out;
            for (const Segment& s : TraceRay(g, origin, direction, length).segments) {
              out.emplace_back(s.voxel, s.length);
            }
            return out;
          },
          py::arg("origin"), py::arg("direction"), py::arg("length"),
          "(voxel, distance) segments in travel order; voxel -1 is outside.");

  py::class_<DecayGrid>(m, "DecayGrid")
      .def(py::init([](const GridGeometry& g, py::array_t<double, py::array::c_style |
                                                                      py::array::forcecast> rates,
                       double prior_rate, double unobserved_rate) {
             if (rates.size() != g.voxel_count()) {
               throw std::invalid_argument("rates must have one entry per voxel");
             }
             return DecayGrid(g, std::vector<double>(rates.data(), rates.data() + rates.size()),
                              prior_rate, unobserved_rate);
           }),
           py::arg("geometry"), py::arg("rates"), py::arg("prior_rate") = 0.05,
           py::arg("unobserved_rate") = 0.05)
      .def_property_readonly("geometry", &DecayGrid::geometry)
      .def_property_readonly("rates", &RatesArray, "Rates as an (nz, ny, nx) array.")
      .def_property_readonly("prior_rate", &DecayGrid::prior_rate)
      .def_property_readonly("unobserved_rate", &DecayGrid::unobserved_rate)
      .def("rate_at", &DecayGrid::RateAt, py::arg("voxel"))
      .def("save", [](const DecayGrid& g, const std::filesystem::path& p) { WriteMap(p, g); },
           py::arg("path"))
      .def_static(
          "load",
          [](const std::filesystem::path& p) {
            AnyMap map = ReadMap(p);
            if (!std::holds_alternative<DecayGrid>(map)) {
              throw std::invalid_argument(p.string() + " is not a decay-rate map");
            }
            return std::get<DecayGrid>(std::move(map));
          },
          py::arg("path"));

  py::class_<Scan>(m, "Scan")
      .def(py::init(&ScanFromArrays), py::arg("pose"), py::arg("r_min"), py::arg("r_max"),
           py::arg("directions"), py::arg("kinds"), py::arg("ranges"))
      .def_readonly("pose", &Scan::pose)
      .def_readonly("r_min", &Scan::r_min)
      .def_readonly("r_max", &Scan::r_max)
      .def("__len__", [](const Scan& s) { return s.rays.size(); })
      .def_property_readonly("directions",
                             [](const Scan& s) {
                               Eigen::Matrix<float, Eigen::Dynamic, 3, Eigen::RowMajor> d(
                                   static_cast<Eigen::Index>(s.rays.size()), 3);
                               for (std::size_t j = 0; j < s.rays.size(); ++j) {
                                 d.row(static_cast<Eigen::Index>(j)) = s.rays[j].direction;
                               }
                               return d;
                             })
      .def_property_readonly("kinds",
                             [](const Scan& s) {
                               py::array_t<std::uint8_t> k(static_cast<py::ssize_t>(s.rays.size()));
                               for (std::size_t j = 0; j < s.rays.size(); ++j) {
                                 k.mutable_at(j) = static_cast<std::uint8_t>(s.rays[j].kind);
                               }
                               return k;
                             })
      .def_property_readonly("ranges", [](const Scan& s) {
        py::array_t<float> r(static_cast<py::ssize_t>(s.rays.size()));
        for (std::size_t j = 0; j < s.rays.size(); ++j) r.mutable_at(j) = s.rays[j].range;
        return r;
      });

  m.def("read_scans", py::overload_cast<const std::filesystem::path&>(&ReadScans),
        py::arg("path"));
  m.def("write_scans",
        py::overload_cast<const std::filesystem::path&, const std::vector<Scan>&>(&WriteScans),
        py::arg("path"), py::arg("scans"));

  m.def(
      "accumulate",
      [](const std::vector<Scan>& scans, const GridGeometry& g, int threads) {
        MapAccumulator acc = [&] {
          py::gil_scoped_release release;
          return BuildAccumulator(g, scans, threads);
        }();
        py::array_t<std::uint64_t> hits(static_cast<py::ssize_t>(acc.hits().size()));
        py::array_t<double> dist(static_cast<py::ssize_t>(acc.dist().size()));
        std::copy(acc.hits().begin(), acc.hits().end(), hits.mutable_data());
        std::copy(acc.dist().begin(), acc.dist().end(), dist.mutable_data());
        return py::make_tuple(hits, dist);
      },
      py::arg("scans"), py::arg("geometry"), py::arg("threads") = 1,
      "Per-voxel hit counts and traveled distances, flat in linear index order.");
  m.def(
      "build_decay_map",
      [](const std::vector<Scan>& scans, const GridGeometry& g, int threads, double prior_rate,
         double unobserved_rate, double rate_cap) {
        py::gil_scoped_release release;
        return Finalize(BuildAccumulator(g, scans, threads),
                        FinalizeOptions{prior_rate, unobserved_rate, rate_cap});
      },
      py::arg("scans"), py::arg("geometry"), py::arg("threads") = 1,
      py::arg("prior_rate") = 0.05, py::arg("unobserved_rate") = 0.05,
      py::arg("rate_cap") = 1e4);

  py::class_<SensorModel, ModelPtr>(m, "SensorModel")
      .def_property_readonly("kind",
                             [](const SensorModel& s) { return std::string(ModelName(s.kind())); })
      .def(
          "ray_log_likelihood",
          [](const SensorModel& s, const Pose& pose, const Vec3& direction, ReadingKind kind,
             double range, double r_min, double r_max) {
            return s.Evaluate(MakeMeasurement(pose, direction, kind, range, r_min, r_max))
                .log_value;
          },
          py::arg("pose"), py::arg("direction"), py::arg("kind"), py::arg("range") = 0.0,
          py::arg("r_min"), py::arg("r_max"),
          "Unfloored log density (RANGE) or log probability (SUB, SUP) of one reading.")
      .def(
          "scan_log_likelihood",
          [](const SensorModel& s, const Scan& scan, std::optional<Pose> pose, int stride,
             double log_floor) {
            return ScanLogLikelihood(s, scan, pose.value_or(scan.pose),
                                     ScanEvalOptions{log_floor, stride})
                .log_likelihood;
          },
          py::arg("scan"), py::arg("pose") = py::none(), py::arg("stride") = 1,
          py::arg("log_floor") = kDefaultLogFloor);

  m.def(
      "decay_model",
      [](const DecayGrid& g) -> ModelPtr {
        return std::make_shared<DecayModel>(std::make_shared<DecayGrid>(g));
      },
      py::arg("grid"));
  m.def(
      "reflection_model",
      [](const std::vector<Scan>& scans, const GridGeometry& g, int threads) -> ModelPtr {
        return std::make_shared<ReflectionModel>(
            std::make_shared<ReflectionGrid>(BuildReflectionMap(scans, g, {}, threads)));
      },
      py::arg("scans"), py::arg("geometry"), py::arg("threads") = 1,
      "Reflection model mapped from `scans`.");
  m.def(
      "endpoint_model",
      [](const std::vector<Scan>& scans, const GridGeometry& g) -> ModelPtr {
        return std::make_shared<EndpointModel>(
            std::make_shared<LikelihoodField>(BuildLikelihoodField(scans, g)));
      },
      py::arg("scans"), py::arg("geometry"), "Endpoint model mapped from `scans`.");
  m.def(
      "load_model", [](const std::filesystem::path& p) { return Mutable(MakeModel(ReadMap(p))); },
      py::arg("path"), "Sensor model for a .drm, .rfm or .lfm map file.");

  m.def(
      "sample_ray",
      [](const DecayGrid& g, const Pose& pose, const Vec3& direction, double r_min, double r_max,
         std::uint64_t seed, std::uint64_t index) {
        RandomStream rng(seed, StreamTag::kRaySample, index);
        const Measurement s = SampleRay(g, pose, direction.normalized(), r_min, r_max, rng);
        return py::make_tuple(s.kind, s.range);
      },
      py::arg("grid"), py::arg("pose"), py::arg("direction"), py::arg("r_min"), py::arg("r_max"),
      py::arg("seed"), py::arg("index") = 0, "(kind, range) drawn from the decay process.");

  m.def(
      "simulate_scenario",
      [](const std::string& name, double failure_rate, std::uint64_t seed, int threads) {
        const Scenario sc = MakeScenario(name, seed);
        SimulatedRun run = [&] {
          py::gil_scoped_release release;
          return SimulateScenario(sc, failure_rate, seed, threads);
        }();
        py::dict out;
        out["truth"] = run.truth;
        out["map_geometry"] = sc.map_geom;
        out["trajectory"] = run.trajectory;
        out["scans"] = run.scans;
        out["mapping_scans"] = run.mapping_scans;
        return out;
      },
      py::arg("name"), py::arg("failure_rate") = 0.1, py::arg("seed") = 1,
      py::arg("threads") = 1, "Scenario 'campus', 'forest' or 'park'.");
  m.def("standard_suite", &StandardSuite);

  m.def(
      "_compare_models_json",
      [](const std::vector<ModelPtr>& models, const std::vector<Scan>& scans, std::uint64_t seed,
         bool run_mcl, int threads, std::size_t sample_count, std::size_t particle_count) {
        CompareOptions options;
        options.seed = seed;
        options.run_mcl = run_mcl;
        options.threads = threads;
        options.eval.sample_count = sample_count;
        options.filter.particle_count = particle_count;
        std::vector<const SensorModel*> raw;
        for (const ModelPtr& p : models) raw.push_back(p.get());
        py::gil_scoped_release release;
        return ReportToJson(CompareModels(raw, scans, options)).dump();
      },
      py::arg("models"), py::arg("scans"), py::arg("seed"), py::arg("run_mcl"),
      py::arg("threads"), py::arg("sample_count"), py::arg("particle_count"));
}
