#include "decay_lidar/config.h"

#include <cmath>
#include <fstream>
#include <set>

#include "decay_lidar/io.h"

namespace decay_lidar {
namespace {

using nlohmann::json;

// Reads keys of one JSON object and rejects the ones nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(Where() + " must be an object");
  }

  bool Has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  void Get(const std::string& key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    out = Convert<T>(j_.at(key), Path(key));
  }

  Section Child(const std::string& key) {
    used_.insert(key);
    return Section(j_.at(key), Path(key));
  }

  const json& Raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  std::string Path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  // Throws on keys never requested.
  void Finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.count(item.key())) {
        throw ConfigError("unknown key '" + Path(item.key()) + "'");
      }
    }
  }

  template <typename T>
  static T Convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where + " must be a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where + " must be a string");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(where + " must be an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned()) {
          throw ConfigError(where + " must be non-negative");
        }
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where + " must be a number");
    }
    return v.get<T>();
  }

 private:
  std::string Where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

Vec3 ToVec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) {
    throw ConfigError(where + " must be an array of 3 numbers");
  }
  Vec3 out;
  for (int a = 0; a < 3; ++a) {
    out[a] = Section::Convert<double>(v[static_cast<std::size_t>(a)], where);
  }
  return out;
}

json FromVec3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Primitive ParsePrimitive(const json& j, const std::string& path) {
  Section s(j, path);
  std::string shape;
  s.Get("shape", shape);
  if (!s.Has("center") || !s.Has("rate")) {
    throw ConfigError(path + " needs center and rate");
  }
  const Vec3 center = ToVec3(s.Raw("center"), s.Path("center"));
  double rate = 0.0;
  s.Get("rate", rate);
  Primitive p;
  if (shape == "box") {
    if (!s.Has("size")) throw ConfigError(path + " (box) needs size");
    double yaw = 0.0;
    s.Get("yaw", yaw);
    p = Primitive::Box(center, ToVec3(s.Raw("size"), s.Path("size")), rate, yaw);
  } else if (shape == "sphere") {
    double radius = 0.0;
    s.Get("radius", radius);
    p = Primitive::Sphere(center, radius, rate);
  } else if (shape == "cylinder") {
    double radius = 0.0, height = 0.0;
    s.Get("radius", radius);
    s.Get("height", height);
    p = Primitive::Cylinder(center, radius, height, rate);
  } else {
    throw ConfigError(s.Path("shape") + " must be box, sphere or cylinder");
  }
  s.Finish();
  return p;
}

json PrimitiveToJson(const Primitive& p) {
  switch (p.shape) {
    case Primitive::Shape::kBox:
      return {{"shape", "box"},
              {"center", FromVec3(p.center)},
              {"size", FromVec3(2.0 * p.half_extents)},
              {"yaw", p.yaw},
              {"rate", p.rate}};
    case Primitive::Shape::kSphere:
      return {{"shape", "sphere"},
              {"center", FromVec3(p.center)},
              {"radius", p.radius},
              {"rate", p.rate}};
    case Primitive::Shape::kCylinder:
      return {{"shape", "cylinder"},
              {"center", FromVec3(p.center)},
              {"radius", p.radius},
              {"height", p.height},
              {"rate", p.rate}};
  }
  return {};
}

// Reads optional origin / edge_length / dims keys over `geom`.
void ParseGrid(Section& s, GridGeometry& geom, const std::string& what) {
  Vec3 origin = geom.origin();
  double edge = geom.edge_length();
  GridDims dims = geom.dims();
  if (s.Has("origin")) origin = ToVec3(s.Raw("origin"), s.Path("origin"));
  s.Get("edge_length", edge);
  if (s.Has("dims")) {
    const json& d = s.Raw("dims");
    if (!d.is_array() || d.size() != 3) {
      throw ConfigError(s.Path("dims") + " must be an array of 3 integers");
    }
    for (std::size_t a = 0; a < 3; ++a) {
      dims[a] = Section::Convert<std::uint32_t>(d[a], s.Path("dims"));
    }
  }
  try {
    geom = GridGeometry(origin, edge, dims);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

json GridToJson(const GridGeometry& g) {
  const auto& dims = g.dims();
  return {{"origin", FromVec3(g.origin())},
          {"edge_length", g.edge_length()},
          {"dims", {dims[0], dims[1], dims[2]}}};
}

void ParseWorld(Section s, WorldSpec& world) {
  ParseGrid(s, world.geom, "world");
  s.Get("background_rate", world.background_rate);
  if (s.Has("primitives")) {
    const json& list = s.Raw("primitives");
    if (!list.is_array()) throw ConfigError("world.primitives must be an array");
    world.primitives.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      world.primitives.push_back(
          ParsePrimitive(list[i], "world.primitives[" + std::to_string(i) + "]"));
    }
  }
  s.Finish();
}

void ParseNoise(Section s, MotionNoise& noise) {
  s.Get("translation", noise.translation);
  s.Get("rotation", noise.rotation);
  s.Finish();
}

json NoiseToJson(const MotionNoise& n) {
  return {{"translation", n.translation}, {"rotation", n.rotation}};
}

}  // namespace

void RunConfig::Validate() const {
  try {
    filter.Validate();
    eval.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (threads < 0) throw ConfigError("threads must be >= 0");
  if (!(failure_rate >= 0.0 && failure_rate <= 1.0)) {
    throw ConfigError("scan.failure_rate must lie in [0, 1]");
  }
  if (!(scenario.r_min >= 0.0 && scenario.r_min < scenario.r_max) ||
      !std::isfinite(scenario.r_max)) {
    throw ConfigError("scan range must satisfy 0 <= r_min < r_max < inf");
  }
  if (scenario.pattern.azimuth_count < 1 || scenario.pattern.elevation_count < 1) {
    throw ConfigError("scan pattern needs at least one azimuth and elevation");
  }
  if (!(scenario.pattern.elevation_min <= scenario.pattern.elevation_max)) {
    throw ConfigError("scan.elevation_min must not exceed elevation_max");
  }
  if (!(scenario.world.background_rate >= 0.0) ||
      !std::isfinite(scenario.world.background_rate)) {
    throw ConfigError("world.background_rate must be finite and >= 0");
  }
  for (const Primitive& p : scenario.world.primitives) {
    if (!(p.rate >= 0.0) || !std::isfinite(p.rate)) {
      throw ConfigError("primitive rates must be finite and >= 0");
    }
  }
  if (scenario.trajectory.waypoints.size() < 2) {
    throw ConfigError("trajectory needs at least 2 waypoints");
  }
  if (scenario.trajectory.steps < 2 || scenario.mapping_steps < 1) {
    throw ConfigError("trajectory.steps must be >= 2 and mapping.steps >= 1");
  }
  const FinalizeOptions& d = map.decay;
  if (!(d.prior_rate >= 0.0) || !(d.unobserved_rate >= 0.0) ||
      !(d.rate_cap > 0.0)) {
    throw ConfigError("map rates must be >= 0 and rate_cap > 0");
  }
  const ReflectionOptions& r = map.reflection;
  if (!(r.prior_q >= 0.0 && r.prior_q < 1.0) ||
      !(r.unobserved_q >= 0.0 && r.unobserved_q < 1.0)) {
    throw ConfigError("map.prior_q and unobserved_q must lie in [0, 1)");
  }
  if (!(map.endpoint.sigma > 0.0) ||
      !(map.endpoint.p_oor >= 0.0 && map.endpoint.p_oor < 1.0)) {
    throw ConfigError("map.sigma must be > 0 and p_oor in [0, 1)");
  }
}

RunConfig ParseRunConfig(const json& j) {
  RunConfig c;
  Section root(j, "");
  root.Get("seed", c.seed);
  root.Get("threads", c.threads);
  std::string model = "decay";
  root.Get("model", model);
  try {
    c.model = ParseModelKind(model);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  std::string scenario = "campus";
  root.Get("scenario", scenario);
  try {
    c.scenario = MakeScenario(scenario, c.seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  c.scenario.world.seed = c.seed;

  if (root.Has("world")) ParseWorld(root.Child("world"), c.scenario.world);

  if (root.Has("scan")) {
    Section s = root.Child("scan");
    ScanPattern& p = c.scenario.pattern;
    s.Get("azimuth_count", p.azimuth_count);
    s.Get("elevation_min", p.elevation_min);
    s.Get("elevation_max", p.elevation_max);
    s.Get("elevation_count", p.elevation_count);
    s.Get("r_min", c.scenario.r_min);
    s.Get("r_max", c.scenario.r_max);
    s.Get("failure_rate", c.failure_rate);
    s.Finish();
  }

  if (root.Has("trajectory")) {
    Section s = root.Child("trajectory");
    TrajectorySpec& t = c.scenario.trajectory;
    if (s.Has("waypoints")) {
      const json& w = s.Raw("waypoints");
      if (!w.is_array()) throw ConfigError("trajectory.waypoints must be an array");
      t.waypoints.clear();
      for (const json& p : w) {
        if (!p.is_array() || p.size() != 2) {
          throw ConfigError("trajectory.waypoints entries must be [x, y]");
        }
        t.waypoints.emplace_back(
            Section::Convert<double>(p[0], "trajectory.waypoints"),
            Section::Convert<double>(p[1], "trajectory.waypoints"));
      }
    }
    s.Get("steps", t.steps);
    s.Get("height", t.height);
    s.Finish();
  }

  if (root.Has("mapping")) {
    Section s = root.Child("mapping");
    s.Get("steps", c.scenario.mapping_steps);
    s.Finish();
  }

  if (root.Has("map")) {
    Section s = root.Child("map");
    ParseGrid(s, c.scenario.map_geom, "map");
    s.Get("prior_rate", c.map.decay.prior_rate);
    c.map.decay.unobserved_rate = c.map.decay.prior_rate;
    s.Get("unobserved_rate", c.map.decay.unobserved_rate);
    s.Get("rate_cap", c.map.decay.rate_cap);
    s.Get("prior_q", c.map.reflection.prior_q);
    c.map.reflection.unobserved_q = c.map.reflection.prior_q;
    s.Get("unobserved_q", c.map.reflection.unobserved_q);
    s.Get("sigma", c.map.endpoint.sigma);
    s.Get("p_oor", c.map.endpoint.p_oor);
    s.Finish();
  }

  if (root.Has("filter")) {
    Section s = root.Child("filter");
    FilterConfig& f = c.filter;
    s.Get("particle_count", f.particle_count);
    if (s.Has("init_sigma")) {
      Section i = s.Child("init_sigma");
      i.Get("xy", f.init_sigma.xy);
      i.Get("z", f.init_sigma.z);
      i.Get("rot", f.init_sigma.rot);
      i.Finish();
    }
    if (s.Has("motion_noise")) ParseNoise(s.Child("motion_noise"), f.motion_noise);
    if (s.Has("odometry_noise")) {
      ParseNoise(s.Child("odometry_noise"), f.odometry_noise);
    }
    s.Get("resample_threshold", f.resample_threshold);
    s.Get("ray_subsample", f.ray_subsample);
    s.Get("offset_initial_guess", f.offset_initial_guess);
    s.Get("log_floor", f.log_floor);
    s.Finish();
  }
  c.filter.model = c.model;

  if (root.Has("eval")) {
    Section s = root.Child("eval");
    EvalConfig& e = c.eval;
    s.Get("sample_count", e.sample_count);
    s.Get("sample_radius", e.sample_radius);
    s.Get("gt_sigma_xy", e.gt_sigma_xy);
    s.Get("kl_raw", e.kl_raw);
    s.Get("ray_subsample", e.ray_subsample);
    s.Get("log_floor", e.log_floor);
    s.Get("run_mcl", c.run_mcl);
    s.Finish();
  }
  root.Finish();
  c.Validate();
  return c;
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " +
                      e.what());
  }
  return ParseRunConfig(j);
}

json RunConfigToJson(const RunConfig& c) {
  const WorldSpec& w = c.scenario.world;
  json primitives = json::array();
  for (const Primitive& p : w.primitives) primitives.push_back(PrimitiveToJson(p));
  json waypoints = json::array();
  for (const auto& p : c.scenario.trajectory.waypoints) {
    waypoints.push_back({p.x(), p.y()});
  }
  json world = GridToJson(w.geom);
  world["background_rate"] = w.background_rate;
  world["primitives"] = primitives;
  json map = GridToJson(c.scenario.map_geom);
  map.update(json{{"prior_rate", c.map.decay.prior_rate},
                  {"unobserved_rate", c.map.decay.unobserved_rate},
                  {"rate_cap", c.map.decay.rate_cap},
                  {"prior_q", c.map.reflection.prior_q},
                  {"unobserved_q", c.map.reflection.unobserved_q},
                  {"sigma", c.map.endpoint.sigma},
                  {"p_oor", c.map.endpoint.p_oor}});
  const FilterConfig& f = c.filter;
  return {
      {"seed", c.seed},
      {"threads", c.threads},
      {"model", std::string(ModelName(c.model))},
      {"scenario", c.scenario.name},
      {"world", world},
      {"scan",
       {{"azimuth_count", c.scenario.pattern.azimuth_count},
        {"elevation_min", c.scenario.pattern.elevation_min},
        {"elevation_max", c.scenario.pattern.elevation_max},
        {"elevation_count", c.scenario.pattern.elevation_count},
        {"r_min", c.scenario.r_min},
        {"r_max", c.scenario.r_max},
        {"failure_rate", c.failure_rate}}},
      {"trajectory",
       {{"waypoints", waypoints},
        {"steps", c.scenario.trajectory.steps},
        {"height", c.scenario.trajectory.height}}},
      {"mapping", {{"steps", c.scenario.mapping_steps}}},
      {"map", map},
      {"filter",
       {{"particle_count", f.particle_count},
        {"init_sigma",
         {{"xy", f.init_sigma.xy}, {"z", f.init_sigma.z}, {"rot", f.init_sigma.rot}}},
        {"motion_noise", NoiseToJson(f.motion_noise)},
        {"odometry_noise", NoiseToJson(f.odometry_noise)},
        {"resample_threshold", f.resample_threshold},
        {"ray_subsample", f.ray_subsample},
        {"offset_initial_guess", f.offset_initial_guess},
        {"log_floor", f.log_floor}}},
      {"eval",
       {{"sample_count", c.eval.sample_count},
        {"sample_radius", c.eval.sample_radius},
        {"gt_sigma_xy", c.eval.gt_sigma_xy},
        {"kl_raw", c.eval.kl_raw},
        {"ray_subsample", c.eval.ray_subsample},
        {"log_floor", c.eval.log_floor},
        {"run_mcl", c.run_mcl}}},
  };
}

}  // namespace decay_lidar
