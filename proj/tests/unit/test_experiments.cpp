#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "dnr/error.hpp"
#include "dnr/experiments.hpp"
#include "dnr/io.hpp"

using namespace dnr;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "dnr_experiment_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

ExperimentPreset small(const std::string& id) {
  ExperimentPreset p = find_preset(id);
  p.train.epochs = 2;
  p.train.steps_per_epoch = 5;
  p.seeds = 1;
  return p;
}

}  // namespace

TEST_CASE("config text parses comments, blanks and trimmed pairs") {
  const auto kv = KeyValues::parse("# note\n\n  width = 4 \nname=a b\nflag = on\nx = 0.25\n", "t.cfg");
  CHECK(kv.count("width") == 4);
  CHECK(kv.str("name") == "a b");
  CHECK(kv.flag("flag"));
  CHECK(kv.real("x") == 0.25);
  CHECK(kv.real_or("missing", 7.0) == 7.0);
  CHECK(kv.unused().empty());
}

TEST_CASE("config errors carry the origin and line") {
  auto message = [](std::string_view text) {
    try {
      (void)KeyValues::parse(text, "bad.cfg");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::config);
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("a = 1\nno equals\n").find("bad.cfg:2") != std::string::npos);
  CHECK(message("a = 1\na = 2\n").find("duplicate") != std::string::npos);
  CHECK(message(" = 3\n").find("empty key") != std::string::npos);

  const auto kv = KeyValues::parse("n = -3\nr = abc\nb = maybe\n", "v.cfg");
  CHECK_THROWS_AS((void)kv.count("n"), Error);
  CHECK_THROWS_AS((void)kv.real("r"), Error);
  CHECK_THROWS_AS((void)kv.flag("b"), Error);
  CHECK_THROWS_AS((void)kv.str("absent"), Error);
}

TEST_CASE("a missing config file is a config error") {
  try {
    (void)KeyValues::load("/nonexistent/dir/x.cfg");
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
  }
}

TEST_CASE("every builtin preset round-trips through its config text") {
  std::set<std::string> ids;
  for (const auto& p : builtin_presets()) {
    CAPTURE(p.id);
    CHECK(ids.insert(p.id).second);
    const std::string text = p.to_config().format();
    const ExperimentPreset back = ExperimentPreset::from_config(KeyValues::parse(text, p.id));
    CHECK(back.to_config().format() == text);
    CHECK(back.width == p.width);
    CHECK(back.train.steps_per_epoch == p.train.steps_per_epoch);
    CHECK(back.train.loss.similarity.enabled == p.train.loss.similarity.enabled);
    CHECK(back.train.loss.residual.has_value() == p.train.loss.residual.has_value());
  }
}

TEST_CASE("preset configs reject unknown keys and bad values") {
  const std::string base = find_preset("rvd-regress").to_config().format();
  CHECK_THROWS_AS((void)ExperimentPreset::from_config(KeyValues::parse(base + "widht = 3\n")), Error);
  auto with = [&](const std::string& key, const std::string& value) {
    auto kv = KeyValues::parse(base);
    kv.set(key, value);
    try {
      (void)ExperimentPreset::from_config(kv);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::invalid_argument;
  };
  CHECK(with("activation", "sigmoid") == ErrorCode::config);
  CHECK(with("width", "0") == ErrorCode::config);
  CHECK(with("loss", "huber") == ErrorCode::config);
  CHECK(with("task", "pde") == ErrorCode::config);
  CHECK(with("margin", "1.5") == ErrorCode::config);
  CHECK(with("seeds", "0") == ErrorCode::config);
}

TEST_CASE("groups resolve to registered presets") {
  std::set<std::string> grouped;
  for (const auto& g : preset_groups()) {
    CAPTURE(g.id);
    CHECK(!g.members.empty());
    for (const auto& id : g.members) {
      CHECK_NOTHROW((void)find_preset(id));
      grouped.insert(id);
    }
    CHECK(resolve_target(g.id).size() == g.members.size());
  }
  CHECK(grouped.size() == builtin_presets().size());
  CHECK(resolve_target("all").size() == builtin_presets().size());
  CHECK(resolve_target("rvd-ode1").size() == 1);
  CHECK(resolve_target("repr-vs-data").size() == 6);
  CHECK_THROWS_AS((void)resolve_target("nope"), Error);
}

TEST_CASE("published targets are attached to the representation presets") {
  CHECK(find_preset("rvd-regress").expected.published_mse == 1.85e-4);
  CHECK(find_preset("rvd-pde2").expected.published_mse == 4.94e-4);
  const auto& burgers = find_preset("pde-burgers1d");
  CHECK(burgers.width == 4);
  CHECK(burgers.depth == 3);
  CHECK(burgers.train.epochs == 40);
  CHECK(burgers.train.steps_per_epoch == 2000);
  CHECK(param_count(NetworkSpec{2, 1, burgers.width, burgers.depth, burgers.activation}) == 56);
  const auto& ac = find_preset("pde-allen-cahn");
  CHECK(param_count(NetworkSpec{2, 1, ac.width, ac.depth, ac.activation}) == 108);
}

TEST_CASE("parabola problems carry analytic conditions") {
  SeededRng rng(2);
  const auto ode = parabola_problem(FormId::ode1_parabola, -5, 5, 100, 0, 0.9, rng);
  REQUIRE(ode.conditions.ic_points.rows() == 1);
  CHECK(ode.conditions.ic_points(0, 0) == 0.0);
  CHECK(ode.conditions.ic_targets(0, 0) == 1.0);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(ode.reference.labels(i, 0) == parabola_1d(ode.reference.inputs(i, 0)));
  }

  const auto pde = parabola_problem(FormId::pde2_parabola, -4, 4, 200, 90, 0.9, rng);
  CHECK(pde.conditions.ic_points.rows() + pde.conditions.bc_points.rows() == 90);
  for (std::size_t i = 0; i < pde.conditions.ic_points.rows(); ++i) {
    CHECK(pde.conditions.ic_points(i, 1) == -4.0);
    CHECK(pde.conditions.ic_targets(i, 0) == parabola_2d(pde.conditions.ic_points(i, 0), -4.0));
  }
  for (std::size_t i = 0; i < pde.conditions.bc_points.rows(); ++i) {
    CHECK(std::abs(pde.conditions.bc_points(i, 0)) == 4.0);
  }
  CHECK_THROWS_AS((void)parabola_problem(FormId::burgers_1d, -1, 1, 10, 0, 0.9, rng), Error);
  CHECK_THROWS_AS((void)parabola_problem(FormId::pde1_parabola, -1, 1, 10, 2, 0.9, rng), Error);
}

TEST_CASE("tasks are deterministic and sized by the preset") {
  for (const char* id : {"collapse-sym8", "scaling-5x2-unscaled", "rvd-exact", "rvd-pde1"}) {
    CAPTURE(id);
    const auto& p = find_preset(id);
    const Task a = build_task(p);
    const Task b = build_task(p);
    CHECK(a.samples.inputs == b.samples.inputs);
    CHECK(a.samples.labels == b.samples.labels);
    CHECK(a.spec.width == p.width);
    CHECK(a.probe.rows() == p.samples);
  }
  const Task unscaled = build_task(find_preset("scaling-5x2-unscaled"));
  CHECK(unscaled.samples.scaling.is_identity());
  const Task scaled = build_task(find_preset("scaling-5x2-scaled"));
  double peak = 0.0;
  for (double v : scaled.samples.labels.values()) peak = std::max(peak, std::abs(v));
  CHECK(peak <= 0.9 + 1e-12);
  const Task res = build_task(find_preset("rvd-ode2"));
  CHECK(res.config.loss.residual->output_scale == doctest::Approx(res.samples.scaling.scale[0]));
}

TEST_CASE("a run directory holds every artifact and reloads") {
  const auto root = fresh_dir("run");
  const ExperimentPreset p = small("rvd-regress");
  const Task task = build_task(p);
  const RunRecord rec = execute_run(p, task, 9, root);
  REQUIRE(rec.ok());
  CHECK(missing_artifacts(rec.dir).empty());
  CHECK(rec.dir.filename().string().rfind("rvd-regress-s9-", 0) == 0);

  const auto cfg = ExperimentPreset::from_config(KeyValues::load(rec.dir / "config.cfg"));
  CHECK(cfg.train.seed == 9);
  CHECK(cfg.seeds == 1);
  const Network net = load_model(rec.dir / "model.dnr");
  CHECK(net.params == rec.report->network.params);
  const std::string metrics = read_file(rec.dir / "metrics.csv");
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 3);
  CHECK(read_file(rec.dir / "run.json").find("\"final_mse\"") != std::string::npos);

  // a second run in the same second gets its own directory
  const RunRecord again = execute_run(p, task, 9, root);
  CHECK(again.dir != rec.dir);
  CHECK(read_file(again.dir / "metrics.csv") == metrics);
  CHECK(read_file(again.dir / "model.dnr") == read_file(rec.dir / "model.dnr"));
}

TEST_CASE("reproduce writes a summary row per run") {
  const auto root = fresh_dir("reproduce");
  ExperimentPreset a = small("rvd-ode1");
  ExperimentPreset b = small("collapse-sym8");
  b.seeds = 2;
  const ReproduceResult r = reproduce("mini", {a, b}, root);
  CHECK(r.runs.size() == 3);
  const std::string summary = read_file(r.summary);
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 4);
  CHECK(summary.find("rvd-ode1,1,ok,") != std::string::npos);
  for (const auto& run : r.runs) CHECK(missing_artifacts(run.dir).empty());
  CHECK(r.runs[1].seed != r.runs[2].seed);
  CHECK(r.runs[1].seed == run_seed(b, 0));
}

TEST_CASE("output root prefers the override, then the environment") {
  CHECK(output_root(std::filesystem::path("x")) == "x");
  ::setenv(std::string(kOutputRootEnv).c_str(), "/tmp/dnr-env-root", 1);
  CHECK(output_root() == "/tmp/dnr-env-root");
  ::unsetenv(std::string(kOutputRootEnv).c_str());
  CHECK(output_root() == "runs");
}

TEST_CASE("extrapolation report separates inside and outside errors") {
  const Network net = zero_network(NetworkSpec{1, 1, 2, 1, Activation::tanh});
  const auto rep = extrapolate_report(net, ScalingRecord::identity(1), [](double x) { return x; }, -1, 1, -2, 2, 5);
  REQUIRE(rep.rows.size() == 5);
  CHECK(rep.inside_mse == doctest::Approx(2.0 / 3.0));
  CHECK(rep.max_outside_error == 2.0);
  CHECK(rep.diverged == 2);
  CHECK(!rep.rows[1].diverged);
  CHECK(rep.rows[1].inside);
  CHECK_THROWS_AS((void)extrapolate_report(net, ScalingRecord::identity(1), [](double x) { return x; }, -1, 1, 0, 2, 5),
                  Error);
}

TEST_CASE("prediction collapse classes") {
  Matrix labels(4, 1);
  labels(0, 0) = -0.9;
  labels(1, 0) = -0.3;
  labels(2, 0) = 0.3;
  labels(3, 0) = 0.9;
  Matrix zeros(4, 1);
  CHECK(classify_prediction(zeros, labels) == PredictionCollapse::zeros);
  Matrix flat(4, 1);
  for (double& v : flat.values()) v = 0.5;
  CHECK(classify_prediction(flat, labels) == PredictionCollapse::mean);
  CHECK(classify_prediction(labels, labels) == PredictionCollapse::none);
  CHECK_THROWS_AS((void)classify_prediction(Matrix(3, 1), labels), Error);
}

TEST_CASE("uat widths follow the rules and zero runs give an empty row") {
  const PiecewiseSpec uat3 = uat3_spec();
  CHECK(rule_width(WidthRule::n_plus_1, uat3) == 2);
  CHECK(rule_width(WidthRule::n_plus_4, uat3) == 5);
  CHECK(rule_width(WidthRule::feature_count, uat3) == 3);
  const UatRow row = uat_sweep(WidthRule::n_plus_4, uat_defaults(WidthRule::n_plus_4), 0);
  CHECK(row.runs == 0);
  CHECK(row.success_rate() == 0.0);
  CHECK(row.width == 5);
  CHECK(parse_width_rule("feature_count") == WidthRule::feature_count);
  CHECK_THROWS_AS((void)parse_width_rule("n_plus_2"), Error);

  UatSweepConfig quick = uat_defaults(WidthRule::feature_count);
  quick.train.epochs = 1;
  quick.train.steps_per_epoch = 3;
  const UatRow r = uat_sweep(WidthRule::feature_count, quick, 3);
  CHECK(r.runs == 3);
  CHECK(r.successes + r.collapsed_zero + r.collapsed_mean + r.other_failures == 3);
  CHECK(r.mse.size() == 3);
}

TEST_CASE("shipped preset files match the builtin registry") {
  const std::filesystem::path dir = std::filesystem::path(DNR_SOURCE_DIR) / "presets";
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".cfg") continue;
    ++files;
    CAPTURE(entry.path().string());
    const ExperimentPreset p = ExperimentPreset::from_config(KeyValues::load(entry.path()));
    CHECK(entry.path().stem().string() == p.id);
    CHECK(p.to_config().format() == find_preset(p.id).to_config().format());
  }
  CHECK(files == builtin_presets().size());
}

TEST_CASE("pde tasks can train on an externally computed grid file") {
  const auto dir = fresh_dir("grid");
  HeatParams hp = heat_asymmetric_defaults();
  hp.grid.nx = 11;
  hp.grid.ny = 11;
  hp.snapshots = 5;
  save_grid(solve_heat2d(hp), dir / "external.dng");

  ExperimentPreset p = small("heat-asymmetric");
  p.dataset = "grid:" + (dir / "external.dng").string();
  p.samples = 200;
  p.boundary_samples = 100;
  const Task task = build_task(p);
  CHECK(task.samples.inputs.rows() == 300);
  CHECK(task.spec.input_dim == 3);
  p.dataset = "grid:" + (dir / "absent.dng").string();
  CHECK_THROWS_AS((void)build_task(p), Error);
}
