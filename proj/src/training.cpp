#include "dnr/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace dnr {

namespace {

void check_grads(const Parameters& params, const Parameters& grads) {
  const auto pb = params.blocks();
  const auto gb = grads.blocks();
  if (pb.size() != gb.size()) {
    throw Error(ErrorCode::dimension_mismatch, "gradient has " + std::to_string(gb.size()) +
                                                   " blocks, parameters have " + std::to_string(pb.size()));
  }
  for (std::size_t b = 0; b < gb.size(); ++b) {
    if (pb[b].values.size() != gb[b].values.size()) {
      throw Error(ErrorCode::dimension_mismatch, "gradient block " + gb[b].name + " has wrong size");
    }
    for (double g : gb[b].values) {
      if (!std::isfinite(g)) throw Error(ErrorCode::non_finite, "non-finite gradient in " + gb[b].name);
    }
  }
}

}  // namespace

void adagrad_step(Parameters& params, const Parameters& grads, Parameters& accumulators, double lr) {
  check_grads(params, grads);
  auto pb = params.blocks();
  const auto gb = grads.blocks();
  auto ab = accumulators.blocks();
  if (ab.size() != pb.size()) throw Error(ErrorCode::dimension_mismatch, "accumulators do not match parameters");
  for (std::size_t b = 0; b < pb.size(); ++b) {
    auto p = pb[b].values;
    auto g = gb[b].values;
    auto a = ab[b].values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      a[i] += g[i] * g[i];
      p[i] -= lr * g[i] / std::sqrt(a[i] + kAdagradEpsilon);
    }
  }
}

void sgd_step(Parameters& params, const Parameters& grads, double lr) {
  check_grads(params, grads);
  add_scaled(params, grads, -lr);
}

std::string_view to_string(Optimizer o) { return o == Optimizer::adagrad ? "adagrad" : "sgd"; }

Optimizer parse_optimizer(std::string_view name) {
  if (name == "adagrad") return Optimizer::adagrad;
  if (name == "sgd") return Optimizer::sgd;
  throw Error(ErrorCode::invalid_argument, "unknown optimizer '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorCode::config, "epochs must be >= 1");
  if (steps_per_epoch < 1) throw Error(ErrorCode::config, "steps_per_epoch must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw Error(ErrorCode::config, "learning rate must be > 0");
  if (batch_size < 1) throw Error(ErrorCode::config, "batch_size must be >= 1");
  loss.validate();
}

double reported_mse(const Network& net, const TrainingData& data, const LossSpec& loss) {
  if (const auto* batch = std::get_if<DataBatch>(&data.source)) return mse(predict(net, batch->inputs), batch->labels);
  if (!data.reference || !loss.residual) return std::numeric_limits<double>::quiet_NaN();
  const ResidualForm& form = *loss.residual;
  Matrix target = data.reference->labels;
  for (double& v : target.values()) v = form.output_scale * (v - form.output_offset);
  return mse(predict(net, data.reference->inputs), target);
}

namespace {

class BatchSampler {
 public:
  BatchSampler(const TrainConfig& cfg, SeededRng& rng) : cfg_(cfg), rng_(rng) {}

  Matrix rows(const Matrix& m, std::vector<std::size_t>& idx) {
    const std::size_t take = std::min(cfg_.batch_size, m.rows());
    // partial Fisher-Yates: the first `take` entries form a uniform sample
    for (std::size_t i = 0; i < take; ++i) std::swap(idx[i], idx[i + rng_.index(m.rows() - i)]);
    return gather_rows(m, std::span<const std::size_t>(idx.data(), take));
  }

  bool needed(std::size_t n) const { return n > cfg_.full_batch_limit; }

 private:
  const TrainConfig& cfg_;
  SeededRng& rng_;
};

std::vector<std::size_t> iota_vec(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

bool loss_finite(const LossValue& v) {
  return std::isfinite(v.total) && std::isfinite(v.main) && std::isfinite(v.similarity);
}

}  // namespace

TrainReport train(Network net, const TrainingData& data, const TrainConfig& config, SeededRng& rng) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();

  BatchSampler sampler(config, rng);
  const auto* full_data = std::get_if<DataBatch>(&data.source);
  const auto* full_cond = std::get_if<ConditionSet>(&data.source);
  std::vector<std::size_t> idx_a;
  std::vector<std::size_t> idx_ic;
  std::vector<std::size_t> idx_bc;
  bool sample = false;
  if (full_data) {
    sample = sampler.needed(full_data->inputs.rows());
    idx_a = iota_vec(full_data->inputs.rows());
  } else {
    full_cond->validate(*config.loss.residual);
    sample = sampler.needed(full_cond->interior.rows()) || sampler.needed(full_cond->ic_points.rows()) ||
             sampler.needed(full_cond->bc_points.rows());
    idx_a = iota_vec(full_cond->interior.rows());
    idx_ic = iota_vec(full_cond->ic_points.rows());
    idx_bc = iota_vec(full_cond->bc_points.rows());
  }

  auto next_batch = [&]() -> LossBatch {
    if (full_data) {
      const std::size_t take = std::min(config.batch_size, full_data->inputs.rows());
      Matrix x = sampler.rows(full_data->inputs, idx_a);
      Matrix y = gather_rows(full_data->labels, std::span<const std::size_t>(idx_a.data(), take));
      return DataBatch{std::move(x), std::move(y)};
    }
    ConditionSet c = *full_cond;
    c.interior = sampler.rows(full_cond->interior, idx_a);
    if (!idx_ic.empty()) {
      c.ic_points = sampler.rows(full_cond->ic_points, idx_ic);
      c.ic_targets = gather_rows(full_cond->ic_targets,
                                 std::span<const std::size_t>(idx_ic.data(), c.ic_points.rows()));
    }
    if (!idx_bc.empty()) {
      c.bc_points = sampler.rows(full_cond->bc_points, idx_bc);
      c.bc_targets = gather_rows(full_cond->bc_targets,
                                 std::span<const std::size_t>(idx_bc.data(), c.bc_points.rows()));
    }
    return c;
  };

  Parameters acc = Parameters::zeros(net.spec);
  TrainReport report;
  report.seed = config.seed;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t s = 0; s < config.steps_per_epoch; ++s, ++step) {
      LossEvaluation eval = sample ? composite_loss_with_gradient(config.loss, net, next_batch())
                                   : composite_loss_with_gradient(config.loss, net, data.source);
      if (!loss_finite(eval.value)) {
        throw TrainingDiverged("loss became non-finite at step " + std::to_string(step), step, net);
      }
      try {
        if (config.optimizer == Optimizer::adagrad) {
          adagrad_step(net.params, eval.gradient, acc, config.lr);
        } else {
          sgd_step(net.params, eval.gradient, config.lr);
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::non_finite) throw;
        throw TrainingDiverged(std::string(e.what()) + " at step " + std::to_string(step), step, net);
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = composite_loss(config.loss, net, data.source);
    if (!loss_finite(rec.loss)) {
      throw TrainingDiverged("loss became non-finite after epoch " + std::to_string(epoch), step, net);
    }
    rec.mse = reported_mse(net, data, config.loss);
    report.history.push_back(rec);
  }

  report.network = std::move(net);
  report.final_mse = report.history.back().mse;
  report.converged = std::isfinite(report.final_mse) && report.final_mse <= config.converge_threshold;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

TrainReport train_seeded(const NetworkSpec& spec, const TrainingData& data, const TrainConfig& config) {
  SeededRng rng(config.seed);
  Network net = init_network(spec, rng);
  return train(std::move(net), data, config, rng);
}

MultiSeedResult multi_seed(const NetworkSpec& spec, const TrainingData& data, const TrainConfig& config,
                           std::size_t k, const Matrix& probe_inputs) {
  if (k < 2) throw Error(ErrorCode::invalid_argument, "multi_seed needs at least 2 runs");
  Matrix probe = probe_inputs;
  if (probe.empty()) {
    if (const auto* b = std::get_if<DataBatch>(&data.source)) {
      probe = b->inputs;
    } else {
      probe = std::get<ConditionSet>(data.source).interior;
    }
  }

  // Runs are independent; executed in order so output is reproducible.
  MultiSeedResult result;
  std::vector<double> mses;
  for (std::size_t r = 0; r < k; ++r) {
    RunOutcome out;
    out.seed = SeededRng::derive(config.seed, r);
    TrainConfig cfg = config;
    cfg.seed = out.seed;
    try {
      out.report = train_seeded(spec, data, cfg);
      out.collapse = analyze_collapse(out.report->network, probe);
      if (std::isfinite(out.report->final_mse)) mses.push_back(out.report->final_mse);
    } catch (const Error& e) {
      out.report.reset();
      out.error = e.what();
    }
    result.runs.push_back(std::move(out));
  }

  MultiSeedSummary& s = result.summary;
  s.runs = k;
  for (const auto& run : result.runs) {
    if (!run.report) {
      ++s.failed;
      continue;
    }
    if (run.report->converged) ++s.converged;
    if (run.collapse && run.collapse->effective_rank < spec.width) ++s.collapsed;
  }
  if (!mses.empty()) {
    std::sort(mses.begin(), mses.end());
    s.min_mse = mses.front();
    s.max_mse = mses.back();
    s.mean_mse = std::accumulate(mses.begin(), mses.end(), 0.0) / static_cast<double>(mses.size());
    const std::size_t m = mses.size();
    s.median_mse = m % 2 ? mses[m / 2] : 0.5 * (mses[m / 2 - 1] + mses[m / 2]);
  } else {
    s.min_mse = s.max_mse = s.mean_mse = s.median_mse = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

}  // namespace dnr
