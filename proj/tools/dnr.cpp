// dnr: command-line harness for training, reproducing presets, generating
// data and inspecting trained models.
//
// Exit status: 0 success, 1 usage/validation/config/format error, 2 runtime failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dnr/error.hpp"
#include "dnr/experiments.hpp"
#include "dnr/io.hpp"

using namespace dnr;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::config:
    case ErrorCode::format:
    case ErrorCode::invalid_argument:
    case ErrorCode::dimension_mismatch:
    case ErrorCode::out_of_domain:
    case ErrorCode::io:
      return kExitValidation;
    default:
      return kExitRuntime;
  }
}

std::string normalize_name(std::string s) {
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

bool is_fd_reference(const std::string& name) {
  return name == "burgers_1d" || name == "burgers_2d_scalar" || name == "burgers_2d_vector" ||
         name == "allen_cahn" || name == "heat_symmetric" || name == "heat_asymmetric";
}

struct Common {
  std::string out_root;
  std::filesystem::path root() const {
    return out_root.empty() ? output_root() : output_root(std::filesystem::path(out_root));
  }
};

struct TrainArgs {
  std::string preset;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> seeds;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> steps;
};

int cmd_train(const Common& common, const TrainArgs& a) {
  ExperimentPreset p = a.config.empty() ? find_preset(a.preset)
                                        : ExperimentPreset::from_config(KeyValues::load(a.config));
  if (a.seed) p.train.seed = *a.seed;
  if (a.seeds) p.seeds = *a.seeds;
  if (a.epochs) p.train.epochs = *a.epochs;
  if (a.steps) p.train.steps_per_epoch = *a.steps;
  p.validate();
  const Task task = build_task(p);
  int status = 0;
  for (std::size_t r = 0; r < p.seeds; ++r) {
    const RunRecord rec = execute_run(p, task, run_seed(p, r), common.root());
    if (!rec.ok()) {
      std::cerr << "run " << rec.dir.string() << " failed: " << rec.error << "\n";
      status = kExitRuntime;
      continue;
    }
    const auto missing = missing_artifacts(rec.dir);
    if (!missing.empty()) {
      std::cerr << "run " << rec.dir.string() << " is missing " << missing.front() << "\n";
      status = kExitRuntime;
    }
    std::cout << rec.dir.string() << " seed=" << rec.seed << " final_mse=" << format_double(rec.report->final_mse)
              << " effective_rank=" << rec.collapse->effective_rank << "/" << task.spec.width << "\n";
  }
  return status;
}

int cmd_reproduce(const Common& common, const std::string& target, std::optional<std::size_t> seeds) {
  const ReproduceResult r = reproduce(target, common.root(), seeds);
  std::cout << read_file(r.summary);
  std::cout << "summary: " << r.summary.string() << "\n";
  const bool all_ok = std::all_of(r.runs.begin(), r.runs.end(), [](const RunRecord& x) { return x.ok(); });
  return all_ok ? 0 : kExitRuntime;
}

struct GenArgs {
  std::string name;
  std::uint64_t seed = 1;
  std::size_t samples = 500;
  std::size_t boundary = 0;
  double lo = -1.0;
  double hi = 1.0;
  bool scale = false;
  double margin = kDefaultMargin;
  std::string out;
  std::string grid;
};

int cmd_gen_data(const Common& common, const GenArgs& a) {
  const std::string name = normalize_name(a.name);
  SeededRng rng(a.seed);
  Dataset d;
  if (is_fd_reference(name)) {
    const GridField g = solve_reference(name);
    if (!a.grid.empty()) save_grid(g, a.grid);
    const std::size_t boundary = a.boundary ? a.boundary : a.samples;
    const SpacetimeSample s = sample_spacetime(g, a.samples, boundary, rng);
    d = concat(s.interior, s.boundary);
    d.provenance = "fd:" + name + " interior=" + std::to_string(a.samples) + " boundary=" + std::to_string(boundary) +
                   " seed=" + std::to_string(a.seed);
  } else if (name == "symmetric8" || name == "asymmetric9" || name == "uat3" || name == "uat6") {
    d = gen_piecewise(piecewise_by_name(name), a.samples, rng);
  } else {
    if (!a.grid.empty()) throw Error(ErrorCode::invalid_argument, "--grid only applies to FD references");
    d = gen_parabola_family(parse_parabola_kind(a.name), a.lo, a.hi, a.samples, rng);
  }
  if (a.scale) d = with_scaled_labels(d, a.margin);
  const std::filesystem::path out =
      a.out.empty() ? common.root() / "data" / (a.name + "-s" + std::to_string(a.seed) + ".csv")
                    : std::filesystem::path(a.out);
  save_dataset(d, out);
  std::cout << out.string() << " rows=" << d.inputs.rows() << "\n";
  return 0;
}

struct ModelArgs {
  std::string model;
  std::string data;
  std::string out;
};

int cmd_analyze(const ModelArgs& a, double rank_tol, double dup_tol) {
  const Network net = load_model(a.model);
  const Dataset d = load_dataset(a.data);
  const CollapseReport rep = analyze_collapse(net, d.inputs, CollapseTolerances{rank_tol, dup_tol});
  const std::string text = encode_collapse(rep);
  if (!a.out.empty()) write_file(a.out, text);
  std::cout << text;
  std::cerr << "effective rank " << rep.effective_rank << " of width " << net.spec.width << ", suggested width "
            << suggest_width(rep) << "\n";
  return 0;
}

struct ScanArgs {
  ModelArgs io;
  std::string x;
  std::string y;
  std::vector<double> x_range{-2.0, 2.0};
  std::vector<double> y_range{-2.0, 2.0};
  std::size_t points = 41;
  std::string loss = "mse";
};

int cmd_scan(const ScanArgs& a) {
  const Network net = load_model(a.io.model);
  const Dataset d = load_dataset(a.io.data);
  if (d.inputs.cols() != net.spec.input_dim || d.labels.cols() != net.spec.output_dim) {
    throw Error(ErrorCode::dimension_mismatch, "dataset " + d.inputs.shape() + " -> " + d.labels.shape() +
                                                   " does not fit the model");
  }
  const DataLoss kind = a.loss == "mae" ? DataLoss::mae : DataLoss::mse;
  const LossClosure loss = [&](const Network& n) {
    const Matrix pred = predict(n, d.inputs);
    return kind == DataLoss::mae ? mae(pred, d.labels) : mse(pred, d.labels);
  };
  const ScanAxis x{parse_param_coord(a.x, net.spec), a.x_range[0], a.x_range[1], a.points};
  const ScanAxis y{parse_param_coord(a.y, net.spec), a.y_range[0], a.y_range[1], a.points};
  const SurfaceScan scan = scan_surface(net, loss, x, y);
  const std::string text = encode_scan(scan, net.spec);
  if (!a.io.out.empty()) write_file(a.io.out, text);
  else std::cout << text;
  std::cerr << "total variation " << format_double(total_variation(scan.values)) << "\n";
  return 0;
}

struct ExtrapArgs {
  std::string run;
  std::string model;
  std::string data;
  std::string function;
  std::vector<double> inner{-1.0, 1.0};
  std::vector<double> outer{-2.0, 2.0};
  std::size_t points = 41;
  double tol = 0.1;
  std::string out;
};

int cmd_extrapolate(const ExtrapArgs& a) {
  Network net;
  ScalingRecord scaling = ScalingRecord::identity(1);
  std::string function = a.function;
  std::vector<double> inner = a.inner;
  if (!a.run.empty()) {
    const std::filesystem::path dir(a.run);
    const ExperimentPreset p = ExperimentPreset::from_config(KeyValues::load(dir / "config.cfg"));
    if (p.task != TaskKind::parabola) {
      throw Error(ErrorCode::invalid_argument, "extrapolation needs a run of a parabola preset");
    }
    net = load_model(dir / "model.dnr");
    scaling = build_task(p).samples.scaling;
    if (function.empty()) function = p.dataset;
    inner = {p.domain_lo, p.domain_hi};
  } else {
    if (a.model.empty() || function.empty()) {
      throw Error(ErrorCode::invalid_argument, "give --run, or --model with --function");
    }
    net = load_model(a.model);
    if (!a.data.empty()) scaling = load_dataset(a.data).scaling;
  }
  const ParabolaKind kind = parse_parabola_kind(function);
  const auto rep = extrapolate_report(net, scaling, [kind](double x) { return parabola_value(kind, x); }, inner[0],
                                      inner[1], a.outer[0], a.outer[1], a.points, a.tol);
  std::string text = "x,prediction,truth,inside,diverged\n";
  for (const auto& r : rep.rows) {
    text += format_double(r.x) + "," + format_double(r.prediction) + "," + format_double(r.truth) + "," +
            (r.inside ? "1" : "0") + "," + (r.diverged ? "1" : "0") + "\n";
  }
  if (!a.out.empty()) write_file(a.out, text);
  else std::cout << text;
  std::cerr << "inside mse " << format_double(rep.inside_mse) << ", max outside error "
            << format_double(rep.max_outside_error) << ", diverged points " << rep.diverged << "\n";
  return 0;
}

struct UatArgs {
  std::string rule = "all";
  std::size_t runs = 10;
  std::string dataset = "uat3";
  std::optional<std::size_t> depth;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> steps;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
  std::string out;
};

double median_mse(std::vector<double> v) {
  std::erase_if(v, [](double x) { return !std::isfinite(x); });
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
}

int cmd_uat(const UatArgs& a) {
  std::vector<WidthRule> rules;
  if (a.rule == "all") rules = {WidthRule::n_plus_1, WidthRule::n_plus_4, WidthRule::feature_count};
  else rules = {parse_width_rule(a.rule)};
  const PiecewiseSpec spec = piecewise_by_name(a.dataset);
  std::string text = "rule,width,activation,runs,successes,success_rate,collapsed_zero,collapsed_mean,other,median_mse\n";
  if (a.runs > 0) {
    for (WidthRule rule : rules) {
      UatSweepConfig c = uat_defaults(rule);
      c.dataset = spec;
      if (a.depth) c.depth = *a.depth;
      if (a.epochs) c.train.epochs = *a.epochs;
      if (a.steps) c.train.steps_per_epoch = *a.steps;
      if (a.seed) c.train.seed = *a.seed;
      if (a.threshold) c.success_mse = *a.threshold;
      const UatRow row = uat_sweep(rule, c, a.runs);
      text += std::string(to_string(rule)) + "," + std::to_string(row.width) + "," +
              std::string(to_string(c.activation)) + "," + std::to_string(row.runs) + "," +
              std::to_string(row.successes) + "," + format_double(row.success_rate()) + "," +
              std::to_string(row.collapsed_zero) + "," + std::to_string(row.collapsed_mean) + "," +
              std::to_string(row.other_failures) + "," + format_double(median_mse(row.mse)) + "\n";
    }
  }
  if (!a.out.empty()) write_file(a.out, text);
  std::cout << text;
  return 0;
}

int cmd_presets(const std::string& export_dir) {
  if (!export_dir.empty()) {
    for (const auto& p : builtin_presets()) {
      write_file(std::filesystem::path(export_dir) / (p.id + ".cfg"), "# " + p.description + "\n" +
                                                                            p.to_config().format());
    }
    std::cout << "wrote " << builtin_presets().size() << " presets to " << export_dir << "\n";
    return 0;
  }
  for (const auto& g : preset_groups()) {
    std::cout << g.id << ": " << g.description << "\n";
    for (const auto& id : g.members) std::cout << "  " << id << "  " << find_preset(id).description << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-weight dense network regression harness"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--out-root", common.out_root, "Output root (default: $DNR_OUTPUT_ROOT or ./runs)");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a preset or a config file; one run directory per seed");
  auto* preset_opt = train_cmd->add_option("--preset", train.preset, "Builtin preset id");
  auto* config_opt = train_cmd->add_option("--config", train.config, "Preset config file");
  preset_opt->excludes(config_opt);
  train_cmd->add_option("--seed", train.seed, "Training seed");
  train_cmd->add_option("--seeds", train.seeds, "Number of seeds")->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", train.epochs, "Override epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--steps", train.steps, "Override steps per epoch")->check(CLI::PositiveNumber);

  std::string target;
  std::optional<std::size_t> repro_seeds;
  auto* repro_cmd = app.add_subcommand("reproduce", "Run a preset, a preset group, or all, and write summary.csv");
  repro_cmd->add_option("target", target, "Preset id, group id, or all")->required();
  repro_cmd->add_option("--seeds", repro_seeds, "Override seeds per preset")->check(CLI::PositiveNumber);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a dataset CSV");
  gen_cmd->add_option("name", gen.name, "symmetric8, asymmetric9, uat3, uat6, x, x2, 5x, 5x2, shifted, or an FD reference")
      ->required();
  gen_cmd->add_option("--seed", gen.seed, "Sampling seed");
  gen_cmd->add_option("--samples", gen.samples, "Samples (interior samples for FD references)")
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--boundary", gen.boundary, "Boundary samples for FD references (default: --samples)");
  gen_cmd->add_option("--lo", gen.lo, "Parabola domain start");
  gen_cmd->add_option("--hi", gen.hi, "Parabola domain end");
  gen_cmd->add_flag("--scale", gen.scale, "Scale labels into (-margin, margin)");
  gen_cmd->add_option("--margin", gen.margin, "Scaling margin");
  gen_cmd->add_option("--out", gen.out, "Output file (default: <root>/data/<name>-s<seed>.csv)");
  gen_cmd->add_option("--grid", gen.grid, "Also save the FD reference grid here");

  ModelArgs analyze;
  double rank_tol = CollapseTolerances{}.rank_relative;
  double dup_tol = CollapseTolerances{}.duplicate;
  auto* analyze_cmd = app.add_subcommand("analyze", "Collapse report of a model's first-layer features");
  analyze_cmd->add_option("--model", analyze.model, "Model file")->required();
  analyze_cmd->add_option("--data", analyze.data, "Dataset CSV whose inputs probe the features")->required();
  analyze_cmd->add_option("--rank-tol", rank_tol, "Relative singular value cutoff");
  analyze_cmd->add_option("--dup-tol", dup_tol, "Duplicate distance cutoff");
  analyze_cmd->add_option("--out", analyze.out, "Also write the JSON report here");

  ScanArgs scan;
  auto* scan_cmd = app.add_subcommand("scan-surface", "Loss over a grid of two parameters");
  scan_cmd->add_option("--model", scan.io.model, "Model file")->required();
  scan_cmd->add_option("--data", scan.io.data, "Dataset CSV")->required();
  scan_cmd->add_option("--x", scan.x, "First parameter, e.g. hidden[0].weights(0,0)")->required();
  scan_cmd->add_option("--y", scan.y, "Second parameter, e.g. output.weights(0,1)")->required();
  scan_cmd->add_option("--x-range", scan.x_range, "lo hi")->expected(2);
  scan_cmd->add_option("--y-range", scan.y_range, "lo hi")->expected(2);
  scan_cmd->add_option("--points", scan.points, "Points per axis")->check(CLI::Range(2, 10001));
  scan_cmd->add_option("--loss", scan.loss, "mse or mae")->check(CLI::IsMember({"mse", "mae"}));
  scan_cmd->add_option("--out", scan.io.out, "Output CSV (default: stdout)");

  ExtrapArgs extrap;
  auto* extrap_cmd = app.add_subcommand("extrapolate", "Predictions inside and outside the training domain");
  auto* run_opt = extrap_cmd->add_option("--run", extrap.run, "Run directory of a parabola preset");
  auto* model_opt = extrap_cmd->add_option("--model", extrap.model, "Model file");
  run_opt->excludes(model_opt);
  extrap_cmd->add_option("--data", extrap.data, "Dataset CSV carrying the label scaling");
  extrap_cmd->add_option("--function", extrap.function, "Truth: x, x2, 5x, 5x2 or shifted");
  extrap_cmd->add_option("--inner", extrap.inner, "Training domain lo hi")->expected(2);
  extrap_cmd->add_option("--outer", extrap.outer, "Query domain lo hi")->expected(2);
  extrap_cmd->add_option("--points", extrap.points, "Query points")->check(CLI::Range(2, 1000001));
  extrap_cmd->add_option("--tol", extrap.tol, "Divergence tolerance outside the training domain");
  extrap_cmd->add_option("--out", extrap.out, "Output CSV (default: stdout)");

  UatArgs uat;
  auto* uat_cmd = app.add_subcommand("uat-sweep", "Success rate of width rules on a piecewise dataset");
  uat_cmd->add_option("--rule", uat.rule, "n_plus_1, n_plus_4, feature_count, or all");
  uat_cmd->add_option("--runs", uat.runs, "Runs per rule");
  uat_cmd->add_option("--dataset", uat.dataset, "Piecewise dataset");
  uat_cmd->add_option("--depth", uat.depth, "Override depth")->check(CLI::PositiveNumber);
  uat_cmd->add_option("--epochs", uat.epochs, "Override epochs")->check(CLI::PositiveNumber);
  uat_cmd->add_option("--steps", uat.steps, "Override steps per epoch")->check(CLI::PositiveNumber);
  uat_cmd->add_option("--seed", uat.seed, "Base seed");
  uat_cmd->add_option("--threshold", uat.threshold, "Success mse threshold (scaled units)");
  uat_cmd->add_option("--out", uat.out, "Also write the table here");

  std::string export_dir;
  auto* presets_cmd = app.add_subcommand("presets", "List presets and groups, or export them as config files");
  presets_cmd->add_option("--export", export_dir, "Directory to write <id>.cfg files into");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  try {
    if (*train_cmd) {
      if (train.preset.empty() && train.config.empty()) {
        std::cerr << "error: train needs --preset or --config\n\n" << train_cmd->help();
        return kExitValidation;
      }
      return cmd_train(common, train);
    }
    if (*repro_cmd) return cmd_reproduce(common, target, repro_seeds);
    if (*gen_cmd) return cmd_gen_data(common, gen);
    if (*analyze_cmd) return cmd_analyze(analyze, rank_tol, dup_tol);
    if (*scan_cmd) return cmd_scan(scan);
    if (*extrap_cmd) return cmd_extrapolate(extrap);
    if (*uat_cmd) return cmd_uat(uat);
    if (*presets_cmd) return cmd_presets(export_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const int code = exit_code_for(e.code());
    if (code == kExitValidation && e.code() == ErrorCode::config) std::cerr << "\n" << app.help();
    return code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
