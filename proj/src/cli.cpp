#include "widepose/cli.hpp"

#include "widepose/error.hpp"
#include "widepose/io.hpp"
#include "widepose/losses.hpp"
#include "widepose/sampling.hpp"
#include "widepose/simulator.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace widepose {

namespace {

const std::vector<std::string> kSubcommands = {"sample-plan", "gradcheck", "simulate",
                                               "fuse",        "bench",     "metrics"};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string config_value(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

// Turns a flat JSON object into command-line tokens.
std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw UsageError("config file is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw UsageError("config file must hold a JSON object");
  std::vector<std::string> tokens;
  for (const auto& [key, value] : j.items()) {
    const std::string flag = key.rfind("--", 0) == 0 ? key : "--" + key;
    if (value.is_boolean()) {
      if (value.get<bool>()) tokens.push_back(flag);
    } else if (value.is_array()) {
      tokens.push_back(flag);
      for (const auto& x : value) tokens.push_back(config_value(x));
    } else if (value.is_object() || value.is_null()) {
      throw UsageError("config key " + key + " must be a scalar or a list");
    } else {
      tokens.push_back(flag);
      tokens.push_back(config_value(value));
    }
  }
  return tokens;
}

// Removes `--config` from the arguments and splices the file's tokens in
// right after the subcommand name.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config requires a file");
      config = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!config) return args;
  const auto sub = std::find_if(args.begin(), args.end(), [](const std::string& a) {
    return std::find(kSubcommands.begin(), kSubcommands.end(), a) != kSubcommands.end();
  });
  if (sub == args.end()) throw UsageError("--config needs a subcommand");
  const auto tokens = config_tokens(*config);
  args.insert(sub + 1, tokens.begin(), tokens.end());
  return args;
}

const CLI::Validator kOpenUnit = CLI::Validator(
    [](std::string& s) -> std::string {
      const double x = std::stod(s);
      return x > 0.0 && x < 1.0 ? std::string() : "value must lie in (0, 1)";
    },
    "(0,1)");

const CLI::Validator kShard = CLI::Validator(
    [](std::string& s) -> std::string {
      std::size_t i = 0, n = 0;
      char slash = 0;
      std::istringstream ss(s);
      if (!(ss >> i >> slash >> n) || slash != '/' || !ss.eof() || n == 0 || i >= n) {
        return "shard must look like i/n with 0 <= i < n";
      }
      return {};
    },
    "i/n");

std::pair<std::size_t, std::size_t> parse_shard(const std::string& s) {
  std::size_t i = 0, n = 0;
  char slash = 0;
  std::istringstream ss(s);
  ss >> i >> slash >> n;
  return {i, n};
}

struct FusionOptions {
  FusionParams params;
  std::string size_mode = "argmax";
  std::string count_mode = "rounded";

  void add(CLI::App* app) {
    app->add_option("--alpha", params.sampling.alpha, "Sample budget alpha")->check(CLI::PositiveNumber);
    app->add_option("--lambda", params.sampling.lambda, "Softmax sharpness lambda")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--tau", params.objectness_threshold, "Objectness threshold")->check(kOpenUnit);
    app->add_option("--ransac-iterations", params.ransac.max_iterations)->check(CLI::PositiveNumber);
    app->add_option("--ransac-threshold", params.ransac.inlier_threshold_px, "Inlier threshold in pixels")
        ->check(CLI::PositiveNumber);
    app->add_option("--ransac-confidence", params.ransac.confidence)->check(kOpenUnit);
    app->add_option("--ransac-seed", params.ransac.seed, "Mixed into every per-scene RANSAC seed");
    app->add_option("--size-mode", size_mode)->check(CLI::IsMember({"argmax", "averaged"}));
    app->add_option("--count-mode", count_mode)->check(CLI::IsMember({"rounded", "stochastic"}));
    app->add_flag("--weights", params.objectness_weights, "Weight correspondences by objectness");
  }

  FusionParams resolve() {
    params.size_mode = size_mode == "averaged" ? SizeMode::kAveraged : SizeMode::kArgmax;
    params.count_mode = count_mode == "stochastic" ? CountMode::kStochastic : CountMode::kRounded;
    params.validate();
    return params;
  }
};

struct SimulationOptions {
  std::size_t scenes = 1000;
  std::uint64_t seed = 0;
  std::string shard = "0/1";
  std::string model;
  bool noiseless = false;
  ScenarioParams scenario;
  NoiseModel noise;

  void add(CLI::App* app, std::size_t default_scenes) {
    scenes = default_scenes;
    app->add_option("--scenes", scenes, "Number of scenes")->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "Master seed");
    app->add_option("--shard", shard, "Contiguous block i of n")->check(kShard);
    app->add_option("--fov", scenario.fov_deg, "Horizontal field of view, degrees");
    app->add_option("--width", scenario.width);
    app->add_option("--height", scenario.height);
    app->add_option("--depth-min", scenario.depth_min, "In object diameters");
    app->add_option("--depth-max", scenario.depth_max, "In object diameters");
    app->add_option("--diameter", scenario.diameter, "Diameter of the default cube model");
    app->add_option("--model", model, "OBJ or PLY model; replaces the cube");
    app->add_flag("--truncation", scenario.allow_truncation, "Allow boxes to leave the image");
    app->add_option("--sigma", noise.sigma_strides, "Offset noise in strides")->check(CLI::NonNegativeNumber);
    app->add_option("--mismatch-gain", noise.scale_mismatch_gain)->check(CLI::NonNegativeNumber);
    app->add_option("--correlation", noise.level_correlation, "Share of offset noise common to a level")
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--size-relative", noise.size_relative, "Offset noise scales with the object size");
    app->add_option("--outlier-rate", noise.outlier_rate)->check(CLI::Range(0.0, 1.0));
    app->add_flag("--noiseless", noiseless, "Zero offset noise and no outlier cells");
  }

  SimulationSetup resolve(const FusionParams& fusion) {
    SimulationSetup setup;
    setup.scenario = scenario;
    setup.noise = noiseless ? NoiseModel::noiseless() : noise;
    setup.fusion = fusion;
    setup.spec = PyramidSpec::standard();
    setup.spec.width = scenario.width;
    setup.spec.height = scenario.height;
    if (!model.empty()) setup.cloud = std::make_shared<const ModelCloud>(ModelCloud::load(model));
    setup.scenario.validate();
    setup.noise.validate();
    setup.spec.validate();
    return setup;
  }
};

// Output goes to the named file, or to `fallback` when the path is empty or "-".
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (path.empty() || path == "-") {
      os_ = &fallback;
    } else {
      file_.open(path, std::ios::binary);
      if (!file_) throw Error(ErrorCode::kInvalidArgument, "cannot write " + path);
      os_ = &file_;
    }
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

std::vector<Json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open " + path);
  std::vector<Json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument, path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

int cmd_sample_plan(double size, bool sweep, double alpha, double lambda, const std::string& format,
                    std::ostream& out) {
  SamplingParams params;
  params.alpha = alpha;
  params.lambda = lambda;
  params.validate();
  std::vector<double> sizes;
  if (sweep) {
    for (int i = 0; i <= 24; ++i) sizes.push_back(std::exp2(3.0 + 0.25 * i));
  } else {
    sizes.push_back(size);
  }
  if (format == "json") {
    Json plans = Json::array();
    for (double s : sizes) {
      const auto expected = sample_counts(s, params).expected;
      plans.push_back({{"size", s},
                       {"lambda", lambda},
                       {"alpha", alpha},
                       {"expected", expected},
                       {"rounded", realize_counts_rounded(expected)}});
    }
    out << Json{{"schema_version", kSchemaVersion},
                {"reference_sizes", params.reference_sizes},
                {"plans", std::move(plans)}}
               .dump(2)
        << '\n';
    return kExitSuccess;
  }
  out << "size,lambda,alpha";
  for (std::size_t k = 0; k < params.reference_sizes.size(); ++k) out << ",N" << k + 1;
  out << '\n';
  for (double s : sizes) {
    out << format_double(s) << ',' << format_double(lambda) << ',' << format_double(alpha);
    for (double n : sample_counts(s, params).expected) out << ',' << format_double(n);
    out << '\n';
  }
  return kExitSuccess;
}

int cmd_gradcheck(int configurations, std::uint64_t seed, double step, std::ostream& out) {
  constexpr double kTolerance = 1e-4;
  const auto r = gradient_check(configurations, seed, step);
  out << Json{{"schema_version", kSchemaVersion},
              {"configurations", r.configurations},
              {"step", r.step},
              {"tolerance", kTolerance},
              {"loss3d", {{"max_rel_err", r.loss3d_max_rel_err}}},
              {"loss2d", {{"max_rel_err", r.loss2d_max_rel_err}}},
              {"focal_loss", {{"max_rel_err", r.focal_max_rel_err}}},
              {"passed", r.passed(kTolerance)}}
             .dump(2)
      << '\n';
  return r.passed(kTolerance) ? kExitSuccess : kExitDomainFailure;
}

int cmd_simulate(SimulationOptions& sim, FusionOptions& fusion, const std::string& out_path,
                 std::ostream& out) {
  const SimulationSetup setup = sim.resolve(fusion.resolve());
  const auto [index, count] = parse_shard(sim.shard);
  const auto [first, last] = shard_range(sim.scenes, index, count);
  SimulationSetup shared = setup;
  shared.cloud = setup.model();
  Sink sink(out_path, out);
  for (std::size_t id = first; id < last; ++id) {
    const auto [scene, pred] = simulate_scene(shared, sim.seed, id);
    *sink << simulation_record(scene, pred).dump() << '\n';
  }
  return kExitSuccess;
}

int cmd_fuse(const std::string& input, FusionOptions& fusion_opts, std::optional<std::uint64_t> scene_id,
             const std::string& out_path, std::ostream& out, std::ostream& err) {
  const FusionParams base = fusion_opts.resolve();
  const auto records = read_jsonl(input);
  Sink sink(out_path, out);
  bool selected = false;
  bool failed = false;
  for (const auto& rec : records) {
    const auto [scene, pred] = simulation_record_from_json(rec);
    if (scene_id && scene.id != *scene_id) continue;
    selected = true;
    Json line = {{"schema_version", kSchemaVersion}, {"scene", to_json(scene)}};
    try {
      line["result"] = to_json(fuse(pred, scene.keypoints, scene.K, fusion_params_for_scene(base, scene)));
    } catch (const Error& e) {
      line["failure"] = to_string(e.code());
      err << "scene " << scene.id << ": " << e.what() << '\n';
      failed = true;
    }
    *sink << line.dump() << '\n';
  }
  if (!selected) throw UsageError("no matching scene in " + input);
  return failed ? kExitDomainFailure : kExitSuccess;
}

int cmd_bench(SimulationOptions& sim, FusionOptions& fusion, const std::string& input, unsigned jobs,
              const std::string& out_path, const std::string& summary_path, std::ostream& out) {
  const SimulationSetup setup = sim.resolve(fusion.resolve());
  const auto [index, count] = parse_shard(sim.shard);
  std::vector<SceneEvaluation> rows;
  if (input.empty()) {
    BenchmarkOptions options;
    options.n_scenes = sim.scenes;
    options.seed = sim.seed;
    options.shard_index = index;
    options.shard_count = count;
    options.jobs = jobs;
    rows = run_benchmark(setup, options);
  } else {
    const auto records = read_jsonl(input);
    const auto [first, last] = shard_range(records.size(), index, count);
    for (std::size_t i = first; i < last; ++i) {
      const auto [scene, pred] = simulation_record_from_json(records[i]);
      rows.push_back(evaluate_scene(scene, pred, fusion_params_for_scene(setup.fusion, scene), setup.bands));
    }
  }
  {
    Sink sink(out_path, out);
    // Only the first shard carries the header, so shard outputs concatenate
    // into the unsharded file.
    if (index == 0) write_benchmark_header(*sink);
    write_benchmark_rows(*sink, rows);
  }
  const auto table = summarize(rows, setup.bands);
  if (!summary_path.empty()) {
    Sink sink(summary_path, out);
    write_summary_csv(*sink, table);
  } else if (!out_path.empty() && out_path != "-") {
    write_summary_csv(out, table);
  }
  return kExitSuccess;
}

int cmd_metrics(const std::string& input, const std::string& out_path, std::ostream& out) {
  const auto records = read_jsonl(input);
  Sink sink(out_path, out);
  write_metrics_header(*sink);
  for (const auto& rec : records) {
    const Scene scene = scene_from_json(rec.at("scene"));
    PoseMetricsRow row;
    row.scene_id = scene.id;
    row.depth_over_d = scene.depth_over_d;
    if (rec.contains("result")) {
      const Pose est = pose_from_json(rec.at("result").at("pose").at("pose"));
      row.adi = adi_distance(scene.gt_pose, est, *scene.cloud);
      row.add = add_distance(scene.gt_pose, est, *scene.cloud);
      const SpeedScore s = speed_score(scene.gt_pose, est);
      row.e_q = s.e_q;
      row.e_t = s.e_t;
    } else {
      row.adi = row.add = row.e_q = row.e_t = std::nan("");
    }
    write_metrics_row(*sink, row);
  }
  return kExitSuccess;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wide-depth-range 6D pose estimation toolkit", "widepose"};
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_version_flag("--version", std::string("widepose ") + kLibraryVersion + " (schema " +
                                        std::to_string(kSchemaVersion) + ")");
  app.require_subcommand(1);
  app.footer(
      "Pyramid levels: strides 8,16,32,64,128 px with reference sizes s_k = 16,32,64,128,256 px.\n"
      "--config FILE reads a JSON object of flag names to values; command-line flags win.\n"
      "Exit codes: 0 success, 1 domain failure, 2 usage error.");
  // Accept --config in the help listing; it is consumed before parsing.
  std::string config_path;
  app.add_option("--config", config_path, "JSON file of default flag values");

  double plan_size = 64.0, plan_alpha = 10.0, plan_lambda = 1.0;
  bool plan_sweep = false;
  std::string plan_format = "csv";
  auto* plan = app.add_subcommand("sample-plan", "Per-level expected sample counts N_k");
  plan->add_option("--size", plan_size, "Object size S in pixels")->check(CLI::PositiveNumber);
  plan->add_flag("--sweep", plan_sweep, "Sizes 8..512 px in quarter-octave steps");
  plan->add_option("--alpha", plan_alpha)->check(CLI::PositiveNumber);
  plan->add_option("--lambda", plan_lambda)->check(CLI::NonNegativeNumber);
  plan->add_option("--format", plan_format)->check(CLI::IsMember({"csv", "json"}));

  int grad_configs = 100;
  std::uint64_t grad_seed = 0;
  double grad_step = 1e-5;
  auto* grad = app.add_subcommand("gradcheck", "Analytic loss gradients against finite differences");
  grad->add_option("--configs", grad_configs)->check(CLI::PositiveNumber);
  grad->add_option("--seed", grad_seed);
  grad->add_option("--step", grad_step)->check(CLI::PositiveNumber);

  SimulationOptions sim_opts;
  FusionOptions sim_fusion;
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "Write scenes and synthetic predictions as JSON lines");
  sim_opts.add(simulate, 10);
  simulate->add_option("--out", sim_out, "Output file (stdout if omitted)");

  FusionOptions fuse_opts;
  std::string fuse_input, fuse_out;
  std::optional<std::uint64_t> fuse_scene;
  auto* fuse_cmd = app.add_subcommand("fuse", "Fused pose and per-level diagnostics for simulated scenes");
  fuse_cmd->add_option("--input", fuse_input, "Output of simulate")->required();
  fuse_opts.add(fuse_cmd);
  fuse_cmd->add_option("--scene-id", fuse_scene, "Only this scene");
  fuse_cmd->add_option("--out", fuse_out);

  SimulationOptions bench_sim;
  FusionOptions bench_fusion;
  std::string bench_input, bench_out, bench_summary;
  unsigned bench_jobs = 1;
  auto* bench = app.add_subcommand("bench", "ADI-0.1d accuracy per depth band for fused and per-level poses");
  bench_sim.add(bench, 1000);
  bench_fusion.add(bench);
  bench->add_option("--input", bench_input, "Read scenes from simulate output instead of simulating");
  bench->add_option("--jobs", bench_jobs, "Worker threads")->check(CLI::PositiveNumber);
  bench->add_option("--out", bench_out, "Per-scene CSV (stdout if omitted)");
  bench->add_option("--summary", bench_summary, "Accuracy table CSV");

  std::string metrics_input, metrics_out;
  auto* metrics = app.add_subcommand("metrics", "ADI, ADD and pose errors for fuse output");
  metrics->add_option("--input", metrics_input, "Output of fuse")->required();
  metrics->add_option("--out", metrics_out);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitSuccess;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << '\n';
    return kExitSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*plan) return cmd_sample_plan(plan_size, plan_sweep, plan_alpha, plan_lambda, plan_format, out);
    if (*grad) return cmd_gradcheck(grad_configs, grad_seed, grad_step, out);
    if (*simulate) return cmd_simulate(sim_opts, sim_fusion, sim_out, out);
    if (*fuse_cmd) return cmd_fuse(fuse_input, fuse_opts, fuse_scene, fuse_out, out, err);
    if (*bench) return cmd_bench(bench_sim, bench_fusion, bench_input, bench_jobs, bench_out, bench_summary, out);
    if (*metrics) return cmd_metrics(metrics_input, metrics_out, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kInvalidArgument ? kExitUsage : kExitDomainFailure;
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace widepose
