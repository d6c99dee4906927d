#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dnr/config.hpp"
#include "dnr/data.hpp"
#include "dnr/solvers.hpp"
#include "dnr/training.hpp"

namespace dnr {

enum class TaskKind { piecewise, parabola, residual, pde };

std::string_view to_string(TaskKind k);
TaskKind parse_task_kind(std::string_view name);

struct ExpectedOutcome {
  double published_mse = std::nan("");  // NaN when nothing was published
  double max_mse = std::nan("");        // runs at or below this count as reproduced
  std::string source;                   // short label of the result being mirrored
  /// Constants of a previously published wide baseline, kept verbatim and never re-run.
  double baseline_mse = std::nan("");
  std::size_t baseline_params = 0;
};

/// One reproducible experiment. Every field round-trips through a flat
/// key=value config file.
struct ExperimentPreset {
  std::string id;
  std::string description;
  TaskKind task = TaskKind::piecewise;
  /// piecewise spec name, parabola kind, or FD reference
  /// (burgers_1d, burgers_2d_scalar, burgers_2d_vector, allen_cahn, heat_symmetric, heat_asymmetric,
  /// or grid:<path> for a grid file computed elsewhere).
  std::string dataset;
  std::string form;  // residual tasks only
  double domain_lo = -1.0;
  double domain_hi = 1.0;
  std::size_t samples = 500;
  std::size_t boundary_samples = 0;
  bool scale_labels = true;
  double margin = kDefaultMargin;
  std::uint64_t data_seed = 1;
  std::size_t width = 4;
  std::size_t depth = 1;
  Activation activation = Activation::tanh;
  TrainConfig train;
  std::size_t seeds = 1;
  ExpectedOutcome expected;

  void validate() const;
  KeyValues to_config() const;
  /// Rejects unknown keys.
  static ExperimentPreset from_config(const KeyValues& kv);
};

/// Everything a run needs, derived deterministically from a preset.
struct Task {
  NetworkSpec spec;
  TrainingData data;
  TrainConfig config;  // preset config with the residual scaling filled in
  Dataset samples;     // training (or reference) samples, labels in training units
  Matrix probe;        // inputs for collapse analysis
  std::optional<GridField> reference;
};

Task build_task(const ExperimentPreset& preset);

/// Shifted-parabola conditions for the exact/ODE/PDE forms on [lo, hi]
/// (and [lo, hi] in t for two-variable forms). The reference holds the
/// interior points with their analytic targets in physical units.
struct ParabolaProblem {
  ConditionSet conditions;
  DataBatch reference;
  ScalingRecord scaling;
};
ParabolaProblem parabola_problem(FormId form, double lo, double hi, std::size_t interior, std::size_t boundary,
                                 double margin, SeededRng& rng);

/// FD reference solution named by `name` with its default parameters, or
/// the grid file behind a "grid:<path>" name.
GridField solve_reference(std::string_view name);

inline constexpr std::array<std::string_view, 5> kRunArtifacts = {"config.cfg", "metrics.csv", "model.dnr",
                                                                  "collapse.json", "run.json"};
inline constexpr std::string_view kOutputRootEnv = "DNR_OUTPUT_ROOT";

/// `override_root` if set, else $DNR_OUTPUT_ROOT, else ./runs.
std::filesystem::path output_root(const std::optional<std::filesystem::path>& override_root = std::nullopt);

struct RunRecord {
  std::string preset_id;
  std::uint64_t seed = 0;
  std::filesystem::path dir;
  std::optional<TrainReport> report;
  std::optional<CollapseReport> collapse;
  std::string error;
  std::string started_at;
  std::string finished_at;

  bool ok() const { return error.empty(); }
};

/// Trains once and writes the run directory <root>/<preset>-s<seed>-<UTC time>.
/// Training failures are recorded, not thrown; I/O failures throw.
RunRecord execute_run(const ExperimentPreset& preset, const Task& task, std::uint64_t seed,
                      const std::filesystem::path& root);
std::vector<std::string> missing_artifacts(const std::filesystem::path& run_dir);

/// Seed of run r: the preset seed for single-seed presets, derived sub-seeds otherwise.
std::uint64_t run_seed(const ExperimentPreset& preset, std::size_t r);

const std::vector<ExperimentPreset>& builtin_presets();
const ExperimentPreset& find_preset(std::string_view id);

struct PresetGroup {
  std::string id;
  std::string description;
  std::vector<std::string> members;
};
const std::vector<PresetGroup>& preset_groups();

/// A preset id, a group id, or "all".
std::vector<ExperimentPreset> resolve_target(std::string_view target);

struct ReproduceResult {
  std::filesystem::path dir;
  std::vector<RunRecord> runs;
  std::filesystem::path summary;
};

/// Runs every seed of every preset in `target` under one directory and
/// writes summary.csv next to the run directories.
ReproduceResult reproduce(std::string_view target, const std::filesystem::path& root,
                          std::optional<std::size_t> seeds_override = std::nullopt);
/// Same, for an explicit preset list labelled `label`.
ReproduceResult reproduce(std::string_view label, const std::vector<ExperimentPreset>& presets,
                          const std::filesystem::path& root);

struct ExtrapolationRow {
  double x = 0.0;
  double prediction = 0.0;
  double truth = 0.0;
  bool inside = false;
  bool diverged = false;  // outside the training domain and off by more than the tolerance
};

struct ExtrapolationReport {
  std::vector<ExtrapolationRow> rows;
  double inside_mse = 0.0;  // physical units
  double max_outside_error = 0.0;
  std::size_t diverged = 0;
};

/// Evenly spaced queries over [outer_lo, outer_hi]; predictions are mapped
/// back to physical units through `scaling`.
ExtrapolationReport extrapolate_report(const Network& net, const ScalingRecord& scaling,
                                       const std::function<double(double)>& truth, double inner_lo,
                                       double inner_hi, double outer_lo, double outer_hi, std::size_t points,
                                       double divergence_tol = 0.1);

enum class WidthRule { n_plus_1, n_plus_4, feature_count };

std::string_view to_string(WidthRule r);
WidthRule parse_width_rule(std::string_view name);

enum class PredictionCollapse { none, zeros, mean };

/// zeros: max |pred| <= 5% of max |label|; mean: pred spread <= 10% of the
/// label spread around a non-zero level.
PredictionCollapse classify_prediction(const Matrix& pred, const Matrix& labels);

struct UatSweepConfig {
  PiecewiseSpec dataset = uat3_spec();
  std::size_t samples = 500;
  std::uint64_t data_seed = 1;
  std::size_t depth = 1;
  Activation activation = Activation::relu;
  TrainConfig train;
  double success_mse = 1e-3;  // scaled units
};

/// relu + mae for the dimension rules; tanh + mae + l1 similarity for feature_count.
UatSweepConfig uat_defaults(WidthRule rule);

struct UatRow {
  WidthRule rule = WidthRule::n_plus_1;
  std::size_t width = 0;
  std::size_t runs = 0;
  std::size_t successes = 0;
  std::size_t collapsed_zero = 0;
  std::size_t collapsed_mean = 0;
  std::size_t other_failures = 0;  // neither fit nor collapsed, or training error
  std::vector<double> mse;

  double success_rate() const { return runs ? static_cast<double>(successes) / static_cast<double>(runs) : 0.0; }
};

std::size_t rule_width(WidthRule rule, const PiecewiseSpec& dataset, std::size_t input_dim = 1);
UatRow uat_sweep(WidthRule rule, const UatSweepConfig& config, std::size_t runs);

}  // namespace dnr
