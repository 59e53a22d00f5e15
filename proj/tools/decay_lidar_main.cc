// decay_lidar: batch front end for simulation, mapping, localization and
// sensor-model evaluation. Logs go to stderr, data to files only.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "decay_lidar/baselines.h"
#include "decay_lidar/config.h"
#include "decay_lidar/decay_map.h"
#include "decay_lidar/eval.h"
#include "decay_lidar/io.h"
#include "decay_lidar/likelihood.h"
#include "decay_lidar/mcl.h"
#include "decay_lidar/simulator.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace decay_lidar {
namespace {

enum ExitCode { kOk = 0, kConfigFailure = 2, kIoFailure = 3, kNumericFailure = 4 };

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

void Log(const std::string& msg) { std::cerr << "decay_lidar: " << msg << '\n'; }

RunConfig LoadConfig(const CommonArgs& args) {
  if (!args.seed) {
    return args.config_path.empty() ? ParseRunConfig(json::object())
                                    : LoadRunConfig(args.config_path);
  }
  json j = json::object();
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) throw IoError("cannot open config '" + args.config_path + "'");
    try {
      in >> j;
    } catch (const json::parse_error& e) {
      throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  // Set before parsing so scenario presets are generated with this seed.
  j["seed"] = *args.seed;
  return ParseRunConfig(j);
}

// --threads, else DECAY_LIDAR_THREADS, else the config value, else 1.
int ResolveThreads(const CommonArgs& args, const RunConfig& config) {
  if (args.threads) {
    if (*args.threads < 1) throw ConfigError("--threads must be >= 1");
    return *args.threads;
  }
  if (const char* env = std::getenv("DECAY_LIDAR_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 1 || n > 4096) {
      throw ConfigError(std::string("DECAY_LIDAR_THREADS must be a positive "
                                    "integer, got '") + env + "'");
    }
    return static_cast<int>(n);
  }
  return config.threads > 0 ? config.threads : 1;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Echo of the effective configuration next to `output`. The thread count is
// left out: it never changes results.
void WriteEcho(const fs::path& echo_path, const std::string& command,
               const RunConfig& config, json args) {
  json config_json = RunConfigToJson(config);
  config_json.erase("threads");
  json echo = {{"command", command}, {"config", config_json}, {"args", args}};
  WriteText(echo_path, echo.dump(2) + "\n");
}

fs::path EchoPathFor(const fs::path& output) {
  return fs::path(output.string() + ".config.json");
}

std::string Fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string PoseColumns(const Pose& p) {
  const Quat& q = p.rotation;
  std::ostringstream os;
  os << std::setprecision(17) << p.translation.x() << ',' << p.translation.y()
     << ',' << p.translation.z() << ',' << q.w() << ',' << q.x() << ','
     << q.y() << ',' << q.z();
  return os.str();
}

Vec3 ParseTriple(const std::string& text, const std::string& name) {
  std::stringstream ss(text);
  Vec3 v;
  std::string part;
  for (int a = 0; a < 3; ++a) {
    if (!std::getline(ss, part, ',')) {
      throw ConfigError(name + " must be 'x,y,z'");
    }
    try {
      std::size_t used = 0;
      v[a] = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ConfigError(name + " must be 'x,y,z'");
    }
  }
  if (std::getline(ss, part, ',')) throw ConfigError(name + " must be 'x,y,z'");
  return v;
}

// --- simulate -------------------------------------------------------------------

struct SimulateArgs {
  std::string out_dir;
};

int RunSimulate(const CommonArgs& common, const SimulateArgs& args) {
  const RunConfig config = LoadConfig(common);
  const int threads = ResolveThreads(common, config);
  Log("simulating scenario '" + config.scenario.name + "' (seed " +
      std::to_string(config.seed) + ", " + std::to_string(threads) + " threads)");
  const SimulatedRun run =
      SimulateScenario(config.scenario, config.failure_rate, config.seed, threads);
  const fs::path dir(args.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

  WriteScans(dir / "scans.dsc", run.scans);
  WriteScans(dir / "mapping_scans.dsc", run.mapping_scans);
  WriteMap(dir / "ground_truth.drm", run.truth);
  std::ostringstream csv;
  csv << "step,x,y,z,qw,qx,qy,qz\n";
  for (std::size_t i = 0; i < run.trajectory.size(); ++i) {
    csv << i << ',' << PoseColumns(run.trajectory[i]) << '\n';
  }
  WriteText(dir / "trajectory.csv", csv.str());
  WriteEcho(dir / "config_echo.json", "simulate", config, {{"out", args.out_dir}});
  Log("wrote " + std::to_string(run.scans.size()) + " localization and " +
      std::to_string(run.mapping_scans.size()) + " mapping scans to " +
      dir.string());
  return kOk;
}

// --- build-map ------------------------------------------------------------------

struct BuildMapArgs {
  std::string scans;
  std::string model;
  std::string out;
  std::string accumulator_out;
};

int RunBuildMap(const CommonArgs& common, const BuildMapArgs& args) {
  RunConfig config = LoadConfig(common);
  if (!args.model.empty()) {
    try {
      config.model = ParseModelKind(args.model);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("--model: ") + e.what());
    }
  }
  const int threads = ResolveThreads(common, config);
  const std::vector<Scan> scans = ReadScans(fs::path(args.scans));
  const GridGeometry& geom = config.scenario.map_geom;
  const auto& dims = geom.dims();
  Log("building " + std::string(ModelName(config.model)) + " map " +
      std::to_string(dims[0]) + "x" + std::to_string(dims[1]) + "x" +
      std::to_string(dims[2]) + " from " + std::to_string(scans.size()) +
      " scans");
  switch (config.model) {
    case ModelKind::kDecay: {
      const MapAccumulator acc = BuildAccumulator(geom, scans, threads);
      if (!args.accumulator_out.empty()) {
        WriteAccumulator(fs::path(args.accumulator_out), acc);
      }
      WriteMap(args.out, Finalize(acc, config.map.decay));
      break;
    }
    case ModelKind::kReflection:
      WriteMap(args.out,
               BuildReflectionMap(scans, geom, config.map.reflection, threads));
      break;
    case ModelKind::kEndpoint:
      try {
        WriteMap(args.out, BuildLikelihoodField(scans, geom, config.map.endpoint));
      } catch (const std::invalid_argument& e) {
        throw NumericError(e.what());
      }
      break;
  }
  WriteEcho(EchoPathFor(args.out), "build-map", config,
            {{"scans", args.scans},
             {"model", std::string(ModelName(config.model))},
             {"out", args.out}});
  Log("wrote " + args.out);
  return kOk;
}

// --- localize -------------------------------------------------------------------

struct LocalizeArgs {
  std::string map;
  std::string scans;
  std::string out;
};

int RunLocalize(const CommonArgs& common, const LocalizeArgs& args) {
  RunConfig config = LoadConfig(common);
  const int threads = ResolveThreads(common, config);
  const auto model = MakeModel(ReadMap(fs::path(args.map)));
  config.model = model->kind();
  config.filter.model = model->kind();
  const std::vector<Scan> scans = ReadScans(fs::path(args.scans));
  Log("localizing " + std::to_string(scans.size()) + " scans with the " +
      std::string(ModelName(model->kind())) + " model, " +
      std::to_string(config.filter.particle_count) + " particles");
  const std::vector<FilterStep> steps =
      RunFilter(*model, scans, config.filter, config.seed, threads);
  std::ostringstream csv;
  csv << "step,est_x,est_y,est_z,est_qw,est_qx,est_qy,est_qz,"
         "true_x,true_y,true_z,true_qw,true_qx,true_qy,true_qz,"
         "position_error_m\n";
  for (const FilterStep& s : steps) {
    if (!std::isfinite(s.position_error)) {
      throw NumericError("non-finite pose estimate at step " +
                         std::to_string(s.step));
    }
    csv << s.step << ',' << PoseColumns(s.estimate) << ','
        << PoseColumns(s.truth) << ',' << Fmt(s.position_error) << '\n';
  }
  WriteText(args.out, csv.str());
  WriteEcho(EchoPathFor(args.out), "localize", config,
            {{"map", args.map}, {"scans", args.scans}, {"out", args.out}});
  Log("mean position error " + Fmt(MeanPositionError(steps)) + " m");
  return kOk;
}

// --- eval -----------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> maps;
  std::string scans;
  std::string out;
  std::string csv;
  bool kl_raw = false;
  bool no_mcl = false;
};

int RunEval(const CommonArgs& common, const EvalArgs& args) {
  RunConfig config = LoadConfig(common);
  if (args.kl_raw) config.eval.kl_raw = true;
  if (args.no_mcl) config.run_mcl = false;
  const int threads = ResolveThreads(common, config);
  std::vector<std::shared_ptr<const SensorModel>> owned;
  std::vector<const SensorModel*> models;
  for (const std::string& path : args.maps) {
    owned.push_back(MakeModel(ReadMap(fs::path(path))));
    models.push_back(owned.back().get());
  }
  const std::vector<Scan> scans = ReadScans(fs::path(args.scans));
  Log("evaluating " + std::to_string(models.size()) + " models on " +
      std::to_string(scans.size()) + " scans");
  CompareOptions options;
  options.eval = config.eval;
  options.filter = config.filter;
  options.run_mcl = config.run_mcl;
  options.seed = config.seed;
  options.threads = threads;
  const Report report = CompareModels(models, scans, options);
  WriteText(args.out, ReportToJson(report).dump(2) + "\n");
  if (!args.csv.empty()) WriteText(args.csv, ReportToCsv(report));
  WriteEcho(EchoPathFor(args.out), "eval", config,
            {{"maps", args.maps},
             {"scans", args.scans},
             {"out", args.out},
             {"csv", args.csv}});
  for (const ModelReport& m : report.models) {
    Log(std::string(ModelName(m.model)) + ": forward_kl " + Fmt(m.forward_kl) +
        ", inverse_kl_mean " + Fmt(m.inverse_kl_mean) + ", mcl_mean_error_m " +
        Fmt(m.mcl_mean_error_m));
    if (!scans.empty() && m.inverse_kl_invalid == scans.size()) {
      Log(std::string(ModelName(m.model)) +
          ": every pose sample was floored on every scan");
      return kNumericFailure;
    }
  }
  return kOk;
}

// --- plot-data ------------------------------------------------------------------

struct PlotArgs {
  std::string kind;
  std::string in;
  std::string out;
  std::vector<std::string> maps;
  std::string origin = "0,0,0";
  std::string direction = "1,0,0";
  double r_min = 0.5;
  double r_max = 30.0;
  double step = 0.01;
};

int PlotTrajectory(const PlotArgs& args) {
  std::istringstream in(ReadText(args.in));
  std::string header;
  std::getline(in, header);
  std::vector<std::string> columns;
  {
    std::stringstream hs(header);
    std::string c;
    while (std::getline(hs, c, ',')) columns.push_back(c);
  }
  const auto find = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return i;
    }
    throw FormatError("trajectory CSV lacks column '" + name + "'", 0);
  };
  const std::size_t step_col = find("step");
  const std::size_t err_col = find("position_error_m");
  std::ostringstream out;
  out << "step,position_error_m\n";
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    if (cells.size() != columns.size()) {
      throw FormatError("ragged trajectory CSV row", 0);
    }
    out << cells[step_col] << ',' << cells[err_col] << '\n';
  }
  WriteText(args.out, out.str());
  return kOk;
}

int PlotReport(const PlotArgs& args) {
  json j;
  try {
    j = json::parse(ReadText(args.in));
  } catch (const json::exception& e) {
    throw FormatError(std::string("report is not valid JSON: ") + e.what(), 0);
  }
  const Report report = ReportFromJson(j);
  std::ostringstream out;
  out << std::setprecision(17) << "model,metric,value\n";
  for (const ModelReport& m : report.models) {
    const std::string name(ModelName(m.model));
    out << name << ",forward_kl," << m.forward_kl << '\n'
        << name << ",inverse_kl_mean," << m.inverse_kl_mean << '\n'
        << name << ",mcl_mean_error_m," << m.mcl_mean_error_m << '\n';
  }
  WriteText(args.out, out.str());
  return kOk;
}

// p(r) of every model along one ray, on a uniform grid of ranges.
int PlotRayProbe(const RunConfig& config, const PlotArgs& args) {
  if (args.maps.empty()) throw ConfigError("ray-probe needs at least one --map");
  if (!(args.step > 0.0) || !(args.r_min >= 0.0 && args.r_min < args.r_max)) {
    throw ConfigError("ray-probe needs step > 0 and 0 <= r_min < r_max");
  }
  const Vec3 direction = ParseTriple(args.direction, "--direction");
  if (!(direction.norm() > 0.0)) throw ConfigError("--direction must be non-zero");
  const Pose pose(ParseTriple(args.origin, "--origin"), Quat::Identity());
  const Vec3 unit = direction.normalized();
  std::vector<std::shared_ptr<const SensorModel>> models;
  for (const std::string& path : args.maps) {
    models.push_back(MakeModel(ReadMap(fs::path(path))));
  }
  std::ostringstream out;
  out << std::setprecision(17) << "r";
  for (const auto& m : models) out << ',' << ModelName(m->kind());
  out << '\n';
  const auto count =
      static_cast<std::size_t>(std::floor((args.r_max - args.r_min) / args.step));
  for (std::size_t i = 0; i <= count; ++i) {
    const double r = std::min(args.r_min + args.step * static_cast<double>(i),
                              args.r_max);
    out << r;
    for (const auto& m : models) {
      out << ','
          << m->Evaluate(Measurement::Range(pose, unit, r, args.r_min, args.r_max))
                 .value();
    }
    out << '\n';
  }
  WriteText(args.out, out.str());
  json oor = json::object();
  for (const auto& m : models) {
    oor[std::string(ModelName(m->kind()))] = {
        {"p_sub",
         m->Evaluate(Measurement::Sub(pose, unit, args.r_min, args.r_max)).value()},
        {"p_sup",
         m->Evaluate(Measurement::Sup(pose, unit, args.r_min, args.r_max)).value()}};
  }
  WriteEcho(EchoPathFor(args.out), "plot-data ray-probe", config,
            {{"maps", args.maps},
             {"origin", args.origin},
             {"direction", args.direction},
             {"r_min", args.r_min},
             {"r_max", args.r_max},
             {"step", args.step},
             {"out_of_range", oor}});
  return kOk;
}

int RunPlot(const CommonArgs& common, const PlotArgs& args) {
  const RunConfig config = LoadConfig(common);
  int code = kOk;
  if (args.kind == "trajectory") {
    code = PlotTrajectory(args);
  } else if (args.kind == "report") {
    code = PlotReport(args);
  } else {
    return PlotRayProbe(config, args);
  }
  WriteEcho(EchoPathFor(args.out), "plot-data " + args.kind, config,
            {{"in", args.in}, {"out", args.out}});
  return code;
}

// --- export-cloud ---------------------------------------------------------------

struct ExportArgs {
  std::string scans;
  std::string map;
  std::string format = "ply";
  std::string out;
};

int RunExport(const CommonArgs& common, const ExportArgs& args) {
  const RunConfig config = LoadConfig(common);
  CloudFormat format;
  try {
    format = ParseCloudFormat(args.format);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (args.scans.empty() == args.map.empty()) {
    throw ConfigError("export-cloud needs exactly one of --scans or --map");
  }
  if (!args.scans.empty()) {
    ExportPointCloud(ReadScans(fs::path(args.scans)), args.out, format);
  } else {
    AnyMap map = ReadMap(fs::path(args.map));
    const auto* decay = std::get_if<DecayGrid>(&map);
    if (decay == nullptr) {
      throw ConfigError("--map must be a decay-rate map (DRM1)");
    }
    ExportMapProjection(*decay, args.out, format);
  }
  WriteEcho(EchoPathFor(args.out), "export-cloud", config,
            {{"scans", args.scans},
             {"map", args.map},
             {"format", args.format},
             {"out", args.out}});
  return kOk;
}

void AddCommon(CLI::App* cmd, CommonArgs& common) {
  cmd->add_option("-c,--config", common.config_path, "JSON run configuration")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", common.seed, "Override the configured seed");
  cmd->add_option("--threads", common.threads,
                  "Worker threads (default: $DECAY_LIDAR_THREADS, else 1)");
}

int Main(int argc, char** argv) {
  CLI::App app{"Decay-rate lidar sensor models: simulation, mapping, "
               "localization and evaluation"};
  app.require_subcommand(1);
  CommonArgs common;

  SimulateArgs sim;
  auto* simulate = app.add_subcommand(
      "simulate", "Generate a world, trajectory, and localization/mapping scans");
  AddCommon(simulate, common);
  simulate->add_option("-o,--out", sim.out_dir, "Output directory")->required();

  BuildMapArgs build;
  auto* build_map =
      app.add_subcommand("build-map", "Build a sensor-model map from scans with known poses");
  AddCommon(build_map, common);
  build_map->add_option("-s,--scans", build.scans, "Scan file (DSC1)")->required();
  build_map->add_option("-m,--model", build.model, "decay | reflection | endpoint");
  build_map->add_option("-o,--out", build.out, "Map file")->required();
  build_map->add_option("--accumulator", build.accumulator_out,
                        "Also write the decay-map accumulator (DRA1)");

  LocalizeArgs loc;
  auto* localize = app.add_subcommand("localize", "Run Monte Carlo localization");
  AddCommon(localize, common);
  localize->add_option("--map", loc.map, "Map file (DRM1, RFM1 or LFM1)")->required();
  localize->add_option("-s,--scans", loc.scans, "Scan file (DSC1)")->required();
  localize->add_option("-o,--out", loc.out, "Trajectory CSV")->required();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Compare sensor models (KL, MCL error)");
  AddCommon(eval, common);
  eval->add_option("--map", ev.maps, "Map files, one per model")->required();
  eval->add_option("-s,--scans", ev.scans, "Scan file (DSC1)")->required();
  eval->add_option("-o,--out", ev.out, "Report JSON")->required();
  eval->add_option("--csv", ev.csv, "Also write the report as CSV");
  eval->add_flag("--kl-raw", ev.kl_raw,
                 "Do not renormalize the surrogate over the pose samples");
  eval->add_flag("--no-mcl", ev.no_mcl, "Skip the localization runs");

  PlotArgs plot;
  auto* plot_data = app.add_subcommand("plot-data", "Write CSV series for plotting");
  AddCommon(plot_data, common);
  plot_data->add_option("kind", plot.kind, "trajectory | report | ray-probe")
      ->required()
      ->check(CLI::IsMember({"trajectory", "report", "ray-probe"}));
  plot_data->add_option("-i,--in", plot.in, "Trajectory CSV or report JSON");
  plot_data->add_option("-o,--out", plot.out, "Output CSV")->required();
  plot_data->add_option("--map", plot.maps, "ray-probe: map files");
  plot_data->add_option("--origin", plot.origin, "ray-probe: sensor position x,y,z");
  plot_data->add_option("--direction", plot.direction, "ray-probe: direction x,y,z");
  plot_data->add_option("--r-min", plot.r_min, "ray-probe: minimum range");
  plot_data->add_option("--r-max", plot.r_max, "ray-probe: maximum range");
  plot_data->add_option("--step", plot.step, "ray-probe: range step");

  ExportArgs ex;
  auto* export_cloud =
      app.add_subcommand("export-cloud", "Export scan endpoints or a map projection");
  AddCommon(export_cloud, common);
  export_cloud->add_option("-s,--scans", ex.scans, "Scan file: export endpoints");
  export_cloud->add_option("--map", ex.map, "Decay map: export column sums");
  export_cloud->add_option("-f,--format", ex.format, "csv | ply");
  export_cloud->add_option("-o,--out", ex.out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigFailure;
  }

  try {
    if (simulate->parsed()) return RunSimulate(common, sim);
    if (build_map->parsed()) return RunBuildMap(common, build);
    if (localize->parsed()) return RunLocalize(common, loc);
    if (eval->parsed()) return RunEval(common, ev);
    if (plot_data->parsed()) {
      if (plot.kind != "ray-probe" && plot.in.empty()) {
        throw ConfigError("plot-data " + plot.kind + " needs --in");
      }
      return RunPlot(common, plot);
    }
    if (export_cloud->parsed()) return RunExport(common, ex);
  } catch (const ConfigError& e) {
    Log("config error: " + std::string(e.what()));
    return kConfigFailure;
  } catch (const IoError& e) {
    Log("i/o error: " + std::string(e.what()));
    return kIoFailure;
  } catch (const FormatError& e) {
    Log("format error: " + std::string(e.what()));
    return kIoFailure;
  } catch (const NumericError& e) {
    Log("numeric failure: " + std::string(e.what()));
    return kNumericFailure;
  } catch (const json::exception& e) {
    Log("config error: " + std::string(e.what()));
    return kConfigFailure;
  } catch (const std::invalid_argument& e) {
    Log("invalid input: " + std::string(e.what()));
    return kConfigFailure;
  } catch (const std::exception& e) {
    Log("numeric failure: " + std::string(e.what()));
    return kNumericFailure;
  }
  return kConfigFailure;
}

}  // namespace
}  // namespace decay_lidar

int main(int argc, char** argv) { return decay_lidar::Main(argc, argv); }
