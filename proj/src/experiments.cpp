#include "dnr/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <limits>
#include <map>
#include <tuple>

#include "json.hpp"
#include "dnr/error.hpp"
#include "dnr/io.hpp"

namespace dnr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_reference_name(std::string_view name) {
  return name == "burgers_1d" || name == "burgers_2d_scalar" || name == "burgers_2d_vector" ||
         name == "allen_cahn" || name == "heat_symmetric" || name == "heat_asymmetric" ||
         (name.starts_with("grid:") && name.size() > 5);
}

bool is_parabola_form(FormId id) {
  return id == FormId::exact_parabola || id == FormId::ode1_parabola || id == FormId::ode2_parabola ||
         id == FormId::pde1_parabola || id == FormId::pde2_parabola;
}

std::string utc_stamp(std::chrono::system_clock::time_point t, bool compact) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, compact ? "%Y%m%dT%H%M%SZ" : "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Dataset to_dataset(const Matrix& inputs, const Matrix& labels, std::string provenance) {
  Dataset d;
  d.inputs = inputs;
  d.labels = labels;
  d.scaling = ScalingRecord::identity(labels.cols());
  d.provenance = std::move(provenance);
  return d;
}

}  // namespace

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::piecewise: return "piecewise";
    case TaskKind::parabola: return "parabola";
    case TaskKind::residual: return "residual";
    case TaskKind::pde: return "pde";
  }
  return "unknown";
}

TaskKind parse_task_kind(std::string_view name) {
  for (TaskKind k : {TaskKind::piecewise, TaskKind::parabola, TaskKind::residual, TaskKind::pde})
    if (to_string(k) == name) return k;
  throw Error(ErrorCode::config, "unknown task '" + std::string(name) + "'");
}

void ExperimentPreset::validate() const {
  if (id.empty()) throw Error(ErrorCode::config, "preset id is empty");
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
    if (!ok) throw Error(ErrorCode::config, "preset id '" + id + "' may only hold [a-z0-9_-]");
  }
  if (!(domain_hi > domain_lo)) throw Error(ErrorCode::config, id + ": domain_hi must exceed domain_lo");
  if (samples < 2) throw Error(ErrorCode::config, id + ": samples must be >= 2");
  if (seeds < 1) throw Error(ErrorCode::config, id + ": seeds must be >= 1");
  if (!(margin > 0.0 && margin <= 1.0)) throw Error(ErrorCode::config, id + ": margin must be in (0, 1]");
  switch (task) {
    case TaskKind::piecewise: (void)piecewise_by_name(dataset); break;
    case TaskKind::parabola: (void)parse_parabola_kind(dataset); break;
    case TaskKind::residual: {
      const FormId f = parse_form(form);
      if (!is_parabola_form(f) && !is_reference_name(dataset)) {
        throw Error(ErrorCode::config, id + ": form " + form + " needs an FD reference dataset");
      }
      if (!train.loss.residual) throw Error(ErrorCode::config, id + ": residual task without a residual loss");
      break;
    }
    case TaskKind::pde:
      if (!is_reference_name(dataset)) throw Error(ErrorCode::config, id + ": unknown FD reference '" + dataset + "'");
      if (boundary_samples < 1) throw Error(ErrorCode::config, id + ": pde tasks need boundary_samples >= 1");
      break;
  }
  if (task != TaskKind::residual && !train.loss.data) {
    throw Error(ErrorCode::config, id + ": data-driven task without a data loss");
  }
  NetworkSpec{1, 1, width, depth, activation}.validate();
  train.validate();
}

KeyValues ExperimentPreset::to_config() const {
  KeyValues kv;
  kv.set("id", id);
  kv.set("description", description);
  kv.set("task", std::string(to_string(task)));
  kv.set("dataset", dataset);
  if (task == TaskKind::residual) kv.set("form", form);
  kv.set("domain_lo", format_double(domain_lo));
  kv.set("domain_hi", format_double(domain_hi));
  kv.set("samples", std::to_string(samples));
  kv.set("boundary_samples", std::to_string(boundary_samples));
  kv.set("scale_labels", scale_labels ? "true" : "false");
  kv.set("margin", format_double(margin));
  kv.set("data_seed", std::to_string(data_seed));
  kv.set("width", std::to_string(width));
  kv.set("depth", std::to_string(depth));
  kv.set("activation", std::string(to_string(activation)));
  kv.set("epochs", std::to_string(train.epochs));
  kv.set("steps_per_epoch", std::to_string(train.steps_per_epoch));
  kv.set("lr", format_double(train.lr));
  kv.set("batch_size", std::to_string(train.batch_size));
  kv.set("full_batch_limit", std::to_string(train.full_batch_limit));
  kv.set("optimizer", std::string(to_string(train.optimizer)));
  kv.set("seed", std::to_string(train.seed));
  kv.set("converge_threshold", format_double(train.converge_threshold));
  kv.set("loss", train.loss.residual ? "residual" : std::string(to_string(*train.loss.data)));
  if (train.loss.residual) {
    kv.set("w_residual", "1");
  }
  const SimilaritySpec& sim = train.loss.similarity;
  kv.set("similarity", sim.enabled ? "true" : "false");
  kv.set("sigma", format_double(sim.sigma));
  kv.set("similarity_weight", format_double(sim.weight));
  kv.set("distance", sim.distance == DistanceKind::l2 ? "l2" : "l1");
  kv.set("seeds", std::to_string(seeds));
  kv.set("expected_published_mse", format_double(expected.published_mse));
  kv.set("expected_max_mse", format_double(expected.max_mse));
  kv.set("expected_source", expected.source);
  kv.set("baseline_mse", format_double(expected.baseline_mse));
  kv.set("baseline_params", std::to_string(expected.baseline_params));
  return kv;
}

ExperimentPreset ExperimentPreset::from_config(const KeyValues& kv) {
  ExperimentPreset p;
  p.id = kv.str("id");
  p.description = kv.str_or("description", "");
  p.task = parse_task_kind(kv.str("task"));
  p.dataset = kv.str("dataset");
  if (p.task == TaskKind::residual) p.form = kv.str("form");
  p.domain_lo = kv.real_or("domain_lo", p.domain_lo);
  p.domain_hi = kv.real_or("domain_hi", p.domain_hi);
  p.samples = kv.count_or("samples", p.samples);
  p.boundary_samples = kv.count_or("boundary_samples", p.boundary_samples);
  p.scale_labels = kv.flag_or("scale_labels", p.scale_labels);
  p.margin = kv.real_or("margin", p.margin);
  p.data_seed = kv.count_or("data_seed", p.data_seed);
  p.width = kv.count("width");
  p.depth = kv.count("depth");
  try {
    p.activation = parse_activation(kv.str_or("activation", "tanh"));
    TrainConfig& t = p.train;
    t.epochs = kv.count_or("epochs", t.epochs);
    t.steps_per_epoch = kv.count_or("steps_per_epoch", t.steps_per_epoch);
    t.lr = kv.real_or("lr", t.lr);
    t.batch_size = kv.count_or("batch_size", t.batch_size);
    t.full_batch_limit = kv.count_or("full_batch_limit", t.full_batch_limit);
    t.optimizer = parse_optimizer(kv.str_or("optimizer", "adagrad"));
    t.seed = kv.count_or("seed", 0);
    t.converge_threshold = kv.real_or("converge_threshold", t.converge_threshold);
    const std::string loss = kv.str_or("loss", p.task == TaskKind::residual ? "residual" : "mse");
    if (loss == "residual") {
      if (p.task != TaskKind::residual) throw Error(ErrorCode::config, "loss = residual needs task = residual");
      (void)kv.real_or("w_residual", 1.0);
      t.loss.residual = ResidualForm{parse_form(p.form)};
    } else if (loss == "mse") {
      t.loss.data = DataLoss::mse;
    } else if (loss == "mae") {
      t.loss.data = DataLoss::mae;
    } else {
      throw Error(ErrorCode::config, "unknown loss '" + loss + "'");
    }
    SimilaritySpec& sim = t.loss.similarity;
    sim.enabled = kv.flag_or("similarity", false);
    sim.sigma = kv.real_or("sigma", sim.sigma);
    sim.weight = kv.real_or("similarity_weight", sim.weight);
    const std::string dist = kv.str_or("distance", "l2");
    if (dist != "l2" && dist != "l1") throw Error(ErrorCode::config, "distance must be l2 or l1");
    sim.distance = dist == "l2" ? DistanceKind::l2 : DistanceKind::l1;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config) throw;
    throw Error(ErrorCode::config, e.what());
  }
  p.seeds = kv.count_or("seeds", 1);
  // NaN is a valid "not published" marker, so these skip the finite check of real()
  auto optional_real = [&kv](std::string_view key) {
    if (!kv.has(key)) return kNaN;
    try {
      return parse_double(kv.str(key));
    } catch (const Error&) {
      throw Error(ErrorCode::config, "key '" + std::string(key) + "' needs a number or nan");
    }
  };
  p.expected.published_mse = optional_real("expected_published_mse");
  p.expected.max_mse = optional_real("expected_max_mse");
  p.expected.source = kv.str_or("expected_source", "");
  p.expected.baseline_mse = optional_real("baseline_mse");
  p.expected.baseline_params = kv.count_or("baseline_params", 0);
  const auto unused = kv.unused();
  if (!unused.empty()) throw Error(ErrorCode::config, "unknown config key '" + unused.front() + "'");
  try {
    p.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config) throw;
    throw Error(ErrorCode::config, e.what());
  }
  return p;
}

GridField solve_reference(std::string_view name) {
  if (name == "burgers_1d") return solve_burgers(burgers_defaults(BurgersForm::one_d));
  if (name == "burgers_2d_scalar") return solve_burgers(burgers_defaults(BurgersForm::two_d_scalar));
  if (name == "burgers_2d_vector") return solve_burgers(burgers_defaults(BurgersForm::two_d_vector));
  if (name == "allen_cahn") return solve_allen_cahn(allen_cahn_defaults());
  if (name == "heat_symmetric") return solve_heat2d(heat_symmetric_defaults());
  if (name == "heat_asymmetric") return solve_heat2d(heat_asymmetric_defaults());
  if (name.starts_with("grid:") && name.size() > 5) return load_grid(std::filesystem::path(name.substr(5)));
  throw Error(ErrorCode::invalid_argument, "unknown FD reference '" + std::string(name) + "'");
}

ParabolaProblem parabola_problem(FormId form, double lo, double hi, std::size_t interior, std::size_t boundary,
                                 double margin, SeededRng& rng) {
  if (!is_parabola_form(form)) {
    throw Error(ErrorCode::invalid_argument, std::string(to_string(form)) + " is not a parabola form");
  }
  if (!(hi > lo)) throw Error(ErrorCode::invalid_argument, "parabola domain is empty");
  if (interior < 1) throw Error(ErrorCode::invalid_argument, "need at least one interior point");
  const bool two_var = form == FormId::pde1_parabola || form == FormId::pde2_parabola;
  const std::size_t cols = two_var ? 2 : 1;
  auto truth = [&](std::span<const double> p) { return two_var ? parabola_2d(p[0], p[1]) : parabola_1d(p[0]); };

  ParabolaProblem out;
  ConditionSet& c = out.conditions;
  c.interior = Matrix(interior, cols);
  Matrix ref_targets(interior, 1);
  for (std::size_t s = 0; s < interior; ++s) {
    auto row = c.interior.row(s);
    for (double& v : row) v = rng.uniform(lo, hi);
    ref_targets(s, 0) = truth(row);
  }
  out.reference = DataBatch{c.interior, ref_targets};
  out.scaling = scale_labels(ref_targets, margin).second;

  if (form == FormId::ode1_parabola || form == FormId::ode2_parabola) {
    // y(0) = 1
    c.ic_points = Matrix(1, 1);
    c.ic_targets = Matrix(1, 1);
    c.ic_targets(0, 0) = parabola_1d(0.0);
  }
  if (two_var) {
    if (boundary < 3) throw Error(ErrorCode::invalid_argument, "two-variable forms need >= 3 boundary points");
    // initial line t = lo, boundary lines x = lo and x = hi
    const std::size_t n_ic = boundary - 2 * (boundary / 3);
    const std::size_t n_bc = boundary - n_ic;
    c.ic_points = Matrix(n_ic, 2);
    c.ic_targets = Matrix(n_ic, 1);
    for (std::size_t s = 0; s < n_ic; ++s) {
      c.ic_points(s, 0) = rng.uniform(lo, hi);
      c.ic_points(s, 1) = lo;
      c.ic_targets(s, 0) = truth(c.ic_points.row(s));
    }
    c.bc_points = Matrix(n_bc, 2);
    c.bc_targets = Matrix(n_bc, 1);
    for (std::size_t s = 0; s < n_bc; ++s) {
      c.bc_points(s, 0) = s % 2 == 0 ? lo : hi;
      c.bc_points(s, 1) = rng.uniform(lo, hi);
      c.bc_targets(s, 0) = truth(c.bc_points.row(s));
    }
  }
  return out;
}

Task build_task(const ExperimentPreset& p) {
  p.validate();
  SeededRng rng(p.data_seed);
  Task task;
  task.config = p.train;
  auto finish_data = [&](Dataset d) {
    if (p.scale_labels) d = with_scaled_labels(d, p.margin);
    task.data = TrainingData{DataBatch{d.inputs, d.labels}, std::nullopt};
    task.probe = d.inputs;
    task.spec = NetworkSpec{d.inputs.cols(), d.labels.cols(), p.width, p.depth, p.activation};
    task.samples = std::move(d);
  };

  switch (p.task) {
    case TaskKind::piecewise:
      finish_data(gen_piecewise(piecewise_by_name(p.dataset), p.samples, rng));
      break;
    case TaskKind::parabola:
      finish_data(gen_parabola_family(parse_parabola_kind(p.dataset), p.domain_lo, p.domain_hi, p.samples, rng));
      break;
    case TaskKind::pde: {
      task.reference = solve_reference(p.dataset);
      const SpacetimeSample s = sample_spacetime(*task.reference, p.samples, p.boundary_samples, rng);
      Dataset d = concat(s.interior, s.boundary);
      d.provenance = "fd:" + p.dataset + " interior=" + std::to_string(p.samples) +
                     " boundary=" + std::to_string(p.boundary_samples) + " seed=" + std::to_string(p.data_seed);
      finish_data(std::move(d));
      break;
    }
    case TaskKind::residual: {
      ResidualForm form = *p.train.loss.residual;
      form.id = parse_form(p.form);
      ConditionSet conditions;
      DataBatch reference;
      ScalingRecord scaling;
      if (is_parabola_form(form.id)) {
        ParabolaProblem prob = parabola_problem(form.id, p.domain_lo, p.domain_hi, p.samples, p.boundary_samples,
                                                p.margin, rng);
        conditions = std::move(prob.conditions);
        reference = std::move(prob.reference);
        scaling = std::move(prob.scaling);
      } else {
        task.reference = solve_reference(p.dataset);
        const SpacetimeSample s = sample_spacetime(*task.reference, p.samples, p.boundary_samples, rng);
        conditions = s.conditions;
        reference = DataBatch{s.interior.inputs, s.interior.labels};
        scaling = scale_labels(s.interior.labels, p.margin).second;
      }
      if (!p.scale_labels) scaling = ScalingRecord::identity(reference.labels.cols());
      if (scaling.scale.size() > 1) {
        // one shared affine map keeps vector residuals consistent
        const double s = *std::min_element(scaling.scale.begin(), scaling.scale.end());
        for (auto& v : scaling.scale) v = s;
        for (auto& o : scaling.offset) o = 0.0;
      }
      form.output_scale = scaling.scale[0];
      form.output_offset = scaling.offset[0];
      task.config.loss.residual = form;
      task.data = TrainingData{conditions, reference};
      task.probe = conditions.interior;
      task.spec = NetworkSpec{form.input_dim(), form.output_dim(), p.width, p.depth, p.activation};
      Dataset d = to_dataset(reference.inputs, scaling.apply(reference.labels),
                             "residual:" + p.form + " seed=" + std::to_string(p.data_seed));
      d.scaling = scaling;
      task.samples = std::move(d);
      break;
    }
  }
  task.spec.validate();
  return task;
}

std::filesystem::path output_root(const std::optional<std::filesystem::path>& override_root) {
  if (override_root) return *override_root;
  if (const char* env = std::getenv(std::string(kOutputRootEnv).c_str()); env && *env) return env;
  return "runs";
}

std::vector<std::string> missing_artifacts(const std::filesystem::path& run_dir) {
  std::vector<std::string> out;
  for (auto name : kRunArtifacts)
    if (!std::filesystem::is_regular_file(run_dir / name)) out.emplace_back(name);
  return out;
}

std::uint64_t run_seed(const ExperimentPreset& preset, std::size_t r) {
  return preset.seeds == 1 ? preset.train.seed : SeededRng::derive(preset.train.seed, r);
}

namespace {

std::filesystem::path unique_dir(const std::filesystem::path& root, const std::string& stem) {
  std::filesystem::path dir = root / stem;
  for (int k = 1; std::filesystem::exists(dir); ++k) dir = root / (stem + "-" + std::to_string(k));
  std::filesystem::create_directories(dir);
  return dir;
}

nlohmann::json json_number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

RunRecord execute_run(const ExperimentPreset& preset, const Task& task, std::uint64_t seed,
                      const std::filesystem::path& root) {
  RunRecord rec;
  rec.preset_id = preset.id;
  rec.seed = seed;
  const auto start = std::chrono::system_clock::now();
  rec.started_at = utc_stamp(start, false);
  rec.dir = unique_dir(root, preset.id + "-s" + std::to_string(seed) + "-" + utc_stamp(start, true));

  ExperimentPreset snapshot = preset;
  snapshot.train.seed = seed;
  snapshot.seeds = 1;
  write_file(rec.dir / "config.cfg", "# " + preset.description + "\n" + snapshot.to_config().format());

  TrainConfig cfg = task.config;
  cfg.seed = seed;
  try {
    rec.report = train_seeded(task.spec, task.data, cfg);
  } catch (const Error& e) {
    rec.error = e.what();
  }

  nlohmann::json run;
  run["preset"] = preset.id;
  run["seed"] = seed;
  run["started_at"] = rec.started_at;
  run["network"] = {{"input_dim", task.spec.input_dim}, {"output_dim", task.spec.output_dim},
                    {"width", task.spec.width},          {"depth", task.spec.depth},
                    {"activation", to_string(task.spec.activation)}, {"params", param_count(task.spec)}};
  run["dataset"] = task.samples.provenance;
  run["expected"] = {{"published_mse", json_number(preset.expected.published_mse)},
                     {"max_mse", json_number(preset.expected.max_mse)},
                     {"source", preset.expected.source},
                     {"baseline_mse", json_number(preset.expected.baseline_mse)},
                     {"baseline_params", preset.expected.baseline_params}};
  if (rec.report) {
    write_file(rec.dir / "metrics.csv", encode_metrics(rec.report->history));
    save_model(rec.report->network, rec.dir / "model.dnr");
    rec.collapse = analyze_collapse(rec.report->network, task.probe);
    write_file(rec.dir / "collapse.json", encode_collapse(*rec.collapse));
    run["final_mse"] = json_number(rec.report->final_mse);
    run["converged"] = rec.report->converged;
    run["wall_seconds"] = rec.report->wall_seconds;
    run["effective_rank"] = rec.collapse->effective_rank;
    const double bound = preset.expected.max_mse;
    if (std::isfinite(bound)) run["within_expected"] = rec.report->final_mse <= bound;
  } else {
    write_file(rec.dir / "metrics.csv", std::string(kMetricsHeader) + "\n");
    run["error"] = rec.error;
  }
  rec.finished_at = utc_stamp(std::chrono::system_clock::now(), false);
  run["finished_at"] = rec.finished_at;
  nlohmann::json artifacts = nlohmann::json::array();
  for (auto name : kRunArtifacts)
    if (name == "run.json" || std::filesystem::exists(rec.dir / name)) artifacts.push_back(name);
  run["artifacts"] = artifacts;
  write_file(rec.dir / "run.json", run.dump(2) + "\n");
  return rec;
}

namespace {

ExperimentPreset make(std::string id, std::string description, TaskKind task, std::string dataset,
                      std::size_t width, std::size_t depth) {
  ExperimentPreset p;
  p.id = std::move(id);
  p.description = std::move(description);
  p.task = task;
  p.dataset = std::move(dataset);
  p.width = width;
  p.depth = depth;
  p.train.epochs = 30;
  p.train.steps_per_epoch = 2000;
  p.train.lr = 0.2;
  p.train.seed = 1;
  p.train.loss.data = DataLoss::mse;
  return p;
}

ExperimentPreset residual(std::string id, std::string description, std::string form, double lo, double hi,
                          std::size_t interior, std::size_t boundary) {
  ExperimentPreset p = make(std::move(id), std::move(description), TaskKind::residual, "shifted", 4, 2);
  p.form = std::move(form);
  p.domain_lo = lo;
  p.domain_hi = hi;
  p.samples = interior;
  p.boundary_samples = boundary;
  p.train.loss.data.reset();
  p.train.loss.residual = ResidualForm{parse_form(p.form)};
  return p;
}

void with_similarity(ExperimentPreset& p, DistanceKind d = DistanceKind::l2) {
  p.train.loss.similarity.enabled = true;
  p.train.loss.similarity.sigma = 0.01;
  p.train.loss.similarity.weight = 1.0;
  p.train.loss.similarity.distance = d;
}

void expect(ExperimentPreset& p, double published, double bound, std::string source) {
  p.expected = ExpectedOutcome{published, bound, std::move(source)};
}

std::vector<ExperimentPreset> make_presets() {
  std::vector<ExperimentPreset> v;

  {
    auto p = make("collapse-sym8", "(8,1) tanh on the symmetric 8-slope dataset without similarity loss",
                  TaskKind::piecewise, "symmetric8", 8, 1);
    p.seeds = 10;
    expect(p, kNaN, kNaN, "collapse study: repeated runs without the similarity term");
    v.push_back(p);
    p.id = "collapse-sym8-similarity";
    p.description = "(8,1) tanh on the symmetric 8-slope dataset with similarity loss, sigma 0.01";
    with_similarity(p);
    expect(p, 1e-4, 5e-4, "collapse study: good fit with the similarity term");
    v.push_back(p);
  }
  for (auto [id, data, w, d] : {std::tuple{"widthdepth-sym8-w8d1", "symmetric8", 8, 1},
                                std::tuple{"widthdepth-sym8-w4d2", "symmetric8", 4, 2},
                                std::tuple{"widthdepth-sym8-w4d1", "symmetric8", 4, 1},
                                std::tuple{"widthdepth-asym9-w9d1", "asymmetric9", 9, 1},
                                std::tuple{"widthdepth-asym9-w4d10", "asymmetric9", 4, 10}}) {
    auto p = make(id, "width/depth sweep on " + std::string(data), TaskKind::piecewise, data,
                  static_cast<std::size_t>(w), static_cast<std::size_t>(d));
    p.seeds = 5;
    expect(p, kNaN, kNaN, "width/depth study");
    v.push_back(p);
  }
  {
    auto p = make("scaling-5x2-scaled", "(2,1) tanh on y = 5x^2 with labels scaled into (-0.9, 0.9)",
                  TaskKind::parabola, "5x2", 2, 1);
    expect(p, kNaN, 1e-3, "label scaling study: scaled fit");
    v.push_back(p);
    p.id = "scaling-5x2-unscaled";
    p.description = "(2,1) tanh on y = 5x^2 with raw labels";
    p.scale_labels = false;
    expect(p, kNaN, kNaN, "label scaling study: unscaled fit settles at the label mean");
    v.push_back(p);
  }
  for (Activation a : {Activation::tanh, Activation::relu}) {
    auto p = make("extrapolation-x2-" + std::string(to_string(a)),
                  "(3,1) " + std::string(to_string(a)) + " on y = x^2 over [-1, 1], queried out to +-2",
                  TaskKind::parabola, "x2", 3, 1);
    p.activation = a;
    expect(p, kNaN, 1e-3, "extrapolation study");
    v.push_back(p);
  }
  {
    auto p = make("rvd-regress", "(4,2) tanh regression on 0.5x^2 + 2x + 1 over [-5, 5]", TaskKind::parabola,
                  "shifted", 4, 2);
    p.domain_lo = -5.0;
    p.domain_hi = 5.0;
    expect(p, 1.85e-4, 5e-3, "data vs representation: regress");
    v.push_back(p);
    auto e = residual("rvd-exact", "(4,2) tanh, exact functional form", "exact_parabola", -5.0, 5.0, 500, 0);
    expect(e, 2.01e-4, 5e-3, "data vs representation: exact");
    v.push_back(e);
    auto o1 = residual("rvd-ode1", "(4,2) tanh, first-order ODE with y(0) = 1", "ode1_parabola", -5.0, 5.0, 500, 0);
    expect(o1, 2.03e-4, 5e-3, "data vs representation: first-order ODE");
    v.push_back(o1);
    auto o2 = residual("rvd-ode2", "(4,2) tanh, second-order ODE with slope and y(0) = 1 conditions",
                       "ode2_parabola", -5.0, 5.0, 500, 0);
    expect(o2, 2.11e-4, 5e-3, "data vs representation: second-order ODE");
    v.push_back(o2);
    auto p1 = residual("rvd-pde1", "(4,2) tanh, first-order PDE on [-4, 4]^2 with initial and boundary lines",
                       "pde1_parabola", -4.0, 4.0, 500, 300);
    expect(p1, 4.76e-4, 5e-3, "data vs representation: first-order PDE");
    v.push_back(p1);
    auto p2 = residual("rvd-pde2", "(4,2) tanh, heat-type PDE on [-4, 4]^2 with initial and boundary lines",
                       "pde2_parabola", -4.0, 4.0, 500, 300);
    expect(p2, 4.94e-4, 5e-3, "data vs representation: second-order PDE");
    v.push_back(p2);
  }
  for (auto [id, ref, w, pub, base, base_params] :
       {std::tuple{"pde-burgers1d", "burgers_1d", 4, 1.28e-4, 4.78e-3, 3441},
        std::tuple{"pde-allen-cahn", "allen_cahn", 6, 3.64e-4, 6.99e-3, 121401}}) {
    auto p = make(id, "(" + std::to_string(w) + ",3) tanh data-driven fit of the " + std::string(ref) +
                          " FD reference", TaskKind::pde, ref, static_cast<std::size_t>(w), 3);
    p.samples = kDefaultInteriorSamples;
    p.boundary_samples = kDefaultBoundarySamples;
    p.train.epochs = 40;
    p.seeds = 3;
    with_similarity(p);
    expect(p, pub, 1.3e-3, "low-weight PDE fit, mean over seeds");
    p.expected.baseline_mse = base;
    p.expected.baseline_params = static_cast<std::size_t>(base_params);
    v.push_back(p);
  }
  for (auto [id, ref] : {std::tuple{"pde-burgers2d-scalar", "burgers_2d_scalar"},
                         std::tuple{"pde-burgers2d-vector", "burgers_2d_vector"}}) {
    auto p = make(id, "(4,4) tanh data-driven fit of the " + std::string(ref) + " FD reference", TaskKind::pde,
                  ref, 4, 4);
    p.samples = kDefaultInteriorSamples;
    p.boundary_samples = kDefaultBoundarySamples;
    p.train.epochs = 40;
    with_similarity(p);
    expect(p, 2.18e-4, kNaN, "two-dimensional Burgers fit");
    v.push_back(p);
  }
  for (auto [id, ref, w] : {std::tuple{"heat-symmetric", "heat_symmetric", 4},
                            std::tuple{"heat-asymmetric", "heat_asymmetric", 8}}) {
    auto p = make(id, "(" + std::to_string(w) + ",4) tanh data-driven fit of the " + std::string(ref) +
                          " FD reference", TaskKind::pde, ref, static_cast<std::size_t>(w), 4);
    p.samples = kDefaultInteriorSamples;
    p.boundary_samples = kDefaultBoundarySamples;
    p.train.epochs = 40;
    with_similarity(p);
    expect(p, 1e-4, kNaN, "heat dissipation fit, loss at scale 1e-4");
    v.push_back(p);
  }
  for (const auto& p : v) p.validate();
  return v;
}

}  // namespace

const std::vector<ExperimentPreset>& builtin_presets() {
  static const std::vector<ExperimentPreset> presets = make_presets();
  return presets;
}

const ExperimentPreset& find_preset(std::string_view id) {
  for (const auto& p : builtin_presets())
    if (p.id == id) return p;
  throw Error(ErrorCode::config, "unknown preset '" + std::string(id) + "'");
}

const std::vector<PresetGroup>& preset_groups() {
  static const std::vector<PresetGroup> groups = [] {
    std::vector<PresetGroup> g{
        {"collapse", "collapse study with and without similarity loss", {}},
        {"width-depth", "width/depth sweep on the piecewise datasets", {}},
        {"scaling", "scaled vs unscaled labels", {}},
        {"extrapolation", "predictions outside the training domain", {}},
        {"repr-vs-data", "regression vs exact, ODE and PDE representations of one parabola", {}},
        {"pde-fits", "low-weight fits of the Burgers and Allen-Cahn references", {}},
        {"burgers-2d", "two-dimensional Burgers fits", {}},
        {"heat", "heat dissipation fits", {}},
    };
    auto add = [&](std::string_view group, std::string_view prefix) {
      for (auto& grp : g) {
        if (grp.id != group) continue;
        for (const auto& p : builtin_presets())
          if (p.id.starts_with(prefix)) grp.members.push_back(p.id);
      }
    };
    add("collapse", "collapse-");
    add("width-depth", "widthdepth-");
    add("scaling", "scaling-");
    add("extrapolation", "extrapolation-");
    add("repr-vs-data", "rvd-");
    add("pde-fits", "pde-burgers1d");
    add("pde-fits", "pde-allen-cahn");
    add("burgers-2d", "pde-burgers2d-");
    add("heat", "heat-");
    return g;
  }();
  return groups;
}

std::vector<ExperimentPreset> resolve_target(std::string_view target) {
  if (target == "all") return builtin_presets();
  for (const auto& g : preset_groups()) {
    if (g.id != target) continue;
    std::vector<ExperimentPreset> out;
    for (const auto& id : g.members) out.push_back(find_preset(id));
    return out;
  }
  return {find_preset(target)};
}

ReproduceResult reproduce(std::string_view target, const std::filesystem::path& root,
                          std::optional<std::size_t> seeds_override) {
  auto presets = resolve_target(target);
  if (seeds_override)
    for (auto& p : presets) p.seeds = *seeds_override;
  return reproduce(target, presets, root);
}

ReproduceResult reproduce(std::string_view label, const std::vector<ExperimentPreset>& presets,
                          const std::filesystem::path& root) {
  ReproduceResult result;
  result.dir = unique_dir(root, "reproduce-" + std::string(label) + "-" +
                                    utc_stamp(std::chrono::system_clock::now(), true));
  std::string summary = "preset,seed,status,final_mse,published_mse,max_mse,within_bound,baseline_mse,effective_rank,width,run_dir\n";
  for (const ExperimentPreset& p : presets) {
    const Task task = build_task(p);
    for (std::size_t r = 0; r < p.seeds; ++r) {
      RunRecord rec = execute_run(p, task, run_seed(p, r), result.dir);
      const double mse = rec.report ? rec.report->final_mse : kNaN;
      std::string within = "";
      if (std::isfinite(p.expected.max_mse) && rec.report) within = mse <= p.expected.max_mse ? "yes" : "no";
      summary += p.id + "," + std::to_string(rec.seed) + "," + (rec.ok() ? "ok" : "error") + "," +
                 format_double(mse) + "," + format_double(p.expected.published_mse) + "," +
                 format_double(p.expected.max_mse) + "," + within + "," + format_double(p.expected.baseline_mse) + "," +
                 (rec.collapse ? std::to_string(rec.collapse->effective_rank) : "") + "," +
                 std::to_string(task.spec.width) + "," + rec.dir.filename().string() + "\n";
      result.runs.push_back(std::move(rec));
    }
  }
  result.summary = result.dir / "summary.csv";
  write_file(result.summary, summary);
  return result;
}

ExtrapolationReport extrapolate_report(const Network& net, const ScalingRecord& scaling,
                                       const std::function<double(double)>& truth, double inner_lo,
                                       double inner_hi, double outer_lo, double outer_hi, std::size_t points,
                                       double divergence_tol) {
  if (points < 2) throw Error(ErrorCode::invalid_argument, "extrapolation needs >= 2 query points");
  if (!(inner_hi > inner_lo) || !(outer_hi > outer_lo) || outer_lo > inner_lo || outer_hi < inner_hi) {
    throw Error(ErrorCode::invalid_argument, "outer domain must contain a non-empty inner domain");
  }
  if (net.spec.input_dim != 1 || net.spec.output_dim != 1) {
    throw Error(ErrorCode::dimension_mismatch, "extrapolation reports need a 1-input, 1-output network");
  }
  Matrix x(points, 1);
  for (std::size_t i = 0; i < points; ++i) {
    x(i, 0) = outer_lo + (outer_hi - outer_lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  const Matrix pred = scaling.invert(predict(net, x));
  ExtrapolationReport rep;
  double acc = 0.0;
  std::size_t inside = 0;
  for (std::size_t i = 0; i < points; ++i) {
    ExtrapolationRow row{x(i, 0), pred(i, 0), truth(x(i, 0))};
    row.inside = row.x >= inner_lo && row.x <= inner_hi;
    const double err = std::abs(row.prediction - row.truth);
    if (row.inside) {
      acc += err * err;
      ++inside;
    } else {
      rep.max_outside_error = std::max(rep.max_outside_error, err);
      row.diverged = err > divergence_tol;
      rep.diverged += row.diverged ? 1 : 0;
    }
    rep.rows.push_back(row);
  }
  rep.inside_mse = inside ? acc / static_cast<double>(inside) : kNaN;
  return rep;
}

std::string_view to_string(WidthRule r) {
  switch (r) {
    case WidthRule::n_plus_1: return "n_plus_1";
    case WidthRule::n_plus_4: return "n_plus_4";
    case WidthRule::feature_count: return "feature_count";
  }
  return "unknown";
}

WidthRule parse_width_rule(std::string_view name) {
  for (WidthRule r : {WidthRule::n_plus_1, WidthRule::n_plus_4, WidthRule::feature_count})
    if (to_string(r) == name) return r;
  throw Error(ErrorCode::invalid_argument, "unknown width rule '" + std::string(name) + "'");
}

PredictionCollapse classify_prediction(const Matrix& pred, const Matrix& labels) {
  if (pred.rows() != labels.rows() || pred.cols() != labels.cols() || pred.rows() == 0) {
    throw Error(ErrorCode::dimension_mismatch, "prediction " + pred.shape() + " vs labels " + labels.shape());
  }
  auto stats = [](const Matrix& m) {
    double mean = 0.0;
    double peak = 0.0;
    for (double v : m.values()) {
      mean += v;
      peak = std::max(peak, std::abs(v));
    }
    mean /= static_cast<double>(m.size());
    double var = 0.0;
    for (double v : m.values()) var += (v - mean) * (v - mean);
    return std::tuple{mean, std::sqrt(var / static_cast<double>(m.size())), peak};
  };
  const auto [p_mean, p_sd, p_peak] = stats(pred);
  const auto [l_mean, l_sd, l_peak] = stats(labels);
  (void)p_mean;
  (void)l_mean;
  if (p_peak <= 0.05 * l_peak) return PredictionCollapse::zeros;
  if (p_sd <= 0.1 * l_sd) return PredictionCollapse::mean;
  return PredictionCollapse::none;
}

UatSweepConfig uat_defaults(WidthRule rule) {
  UatSweepConfig c;
  c.train.epochs = 30;
  c.train.steps_per_epoch = 2000;
  c.train.lr = 0.2;
  c.train.seed = 1;
  c.train.loss.data = DataLoss::mae;
  if (rule == WidthRule::feature_count) {
    c.activation = Activation::tanh;
    c.depth = 1;
    c.train.loss.similarity = SimilaritySpec{true, 0.01, 1.0, DistanceKind::l1};
  } else {
    c.activation = Activation::relu;
    c.depth = 2;
  }
  return c;
}

std::size_t rule_width(WidthRule rule, const PiecewiseSpec& dataset, std::size_t input_dim) {
  switch (rule) {
    case WidthRule::n_plus_1: return input_dim + 1;
    case WidthRule::n_plus_4: return input_dim + 4;
    case WidthRule::feature_count: return dataset.asymmetric_features();
  }
  return 1;
}

UatRow uat_sweep(WidthRule rule, const UatSweepConfig& config, std::size_t runs) {
  UatRow row;
  row.rule = rule;
  row.width = rule_width(rule, config.dataset);
  if (runs == 0) return row;
  SeededRng data_rng(config.data_seed);
  const Dataset d = with_scaled_labels(gen_piecewise(config.dataset, config.samples, data_rng));
  const TrainingData data{DataBatch{d.inputs, d.labels}, std::nullopt};
  const NetworkSpec spec{1, 1, row.width, config.depth, config.activation};
  for (std::size_t r = 0; r < runs; ++r) {
    TrainConfig cfg = config.train;
    cfg.seed = SeededRng::derive(config.train.seed, r);
    ++row.runs;
    try {
      const TrainReport rep = train_seeded(spec, data, cfg);
      row.mse.push_back(rep.final_mse);
      const PredictionCollapse c = classify_prediction(predict(rep.network, d.inputs), d.labels);
      if (c == PredictionCollapse::zeros) {
        ++row.collapsed_zero;
      } else if (c == PredictionCollapse::mean) {
        ++row.collapsed_mean;
      } else if (rep.final_mse <= config.success_mse) {
        ++row.successes;
      } else {
        ++row.other_failures;
      }
    } catch (const Error&) {
      row.mse.push_back(kNaN);
      ++row.other_failures;
    }
  }
  return row;
}

}  // namespace dnr
