#ifndef DECAY_LIDAR_CONFIG_H_
#define DECAY_LIDAR_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "decay_lidar/baselines.h"
#include "decay_lidar/decay_map.h"
#include "decay_lidar/eval.h"
#include "decay_lidar/likelihood.h"
#include "decay_lidar/mcl.h"
#include "decay_lidar/simulator.h"

namespace decay_lidar {

// Invalid or unknown configuration content. `what()` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MapOptions {
  FinalizeOptions decay;
  ReflectionOptions reflection;
  LikelihoodFieldOptions endpoint;
};

// Everything a pipeline run needs besides file paths (given on the command
// line). JSON layout:
//
//   {
//     "seed": 1, "threads": 1, "model": "decay",
//     "scenario": "campus",
//     "world": {"origin": [x, y, z], "edge_length": e, "dims": [nx, ny, nz],
//               "background_rate": r, "primitives": [
//                 {"shape": "box", "center": [..], "size": [..], "yaw": a,
//                  "rate": r},
//                 {"shape": "sphere", "center": [..], "radius": r, "rate": r},
//                 {"shape": "cylinder", "center": [..], "radius": r,
//                  "height": h, "rate": r}]},
//     "scan": {"azimuth_count", "elevation_min", "elevation_max",
//              "elevation_count", "r_min", "r_max", "failure_rate"},
//     "trajectory": {"waypoints": [[x, y], ..], "steps", "height"},
//     "mapping": {"steps"},
//     "map": {"origin", "edge_length", "dims", "prior_rate", "unobserved_rate", "rate_cap", "prior_q",
//             "unobserved_q", "sigma", "p_oor"},
//     "filter": {"particle_count", "init_sigma": {"xy", "z", "rot"},
//                "motion_noise": {"translation", "rotation"},
//                "odometry_noise": {"translation", "rotation"},
//                "resample_threshold", "ray_subsample",
//                "offset_initial_guess", "log_floor"},
//     "eval": {"sample_count", "sample_radius", "gt_sigma_xy", "kl_raw",
//              "ray_subsample", "log_floor", "run_mcl"}
//   }
//
// Every key is optional. "scenario" selects a preset whose fields the other
// sections then override; "world.primitives" replaces the preset list.
struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = not set
  ModelKind model = ModelKind::kDecay;
  Scenario scenario;
  double failure_rate = 0.1;
  MapOptions map;
  FilterConfig filter;
  EvalConfig eval;
  bool run_mcl = true;

  // Throws ConfigError.
  void Validate() const;
};

// Strict parse: unknown keys and wrong types throw ConfigError.
RunConfig ParseRunConfig(const nlohmann::json& j);
// Throws IoError if unreadable, ConfigError if malformed.
RunConfig LoadRunConfig(const std::filesystem::path& path);

// Complete, re-parseable echo of `config`.
nlohmann::json RunConfigToJson(const RunConfig& config);

}  // namespace decay_lidar

#endif  // DECAY_LIDAR_CONFIG_H_
