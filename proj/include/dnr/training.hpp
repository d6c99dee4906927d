#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dnr/analysis.hpp"
#include "dnr/error.hpp"
#include "dnr/losses.hpp"
#include "dnr/network.hpp"
#include "dnr/rng.hpp"

namespace dnr {

inline constexpr double kAdagradEpsilon = 1e-8;

/// acc += g^2; p -= lr * g / sqrt(acc + eps). Throws Error(non_finite) naming
/// the first block holding a non-finite gradient; nothing is updated then.
void adagrad_step(Parameters& params, const Parameters& grads, Parameters& accumulators, double lr);
/// p -= lr * g, same non-finite check.
void sgd_step(Parameters& params, const Parameters& grads, double lr);

enum class Optimizer { adagrad, sgd };

std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view name);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t steps_per_epoch = 100;
  double lr = 0.2;
  std::size_t batch_size = 256;
  /// Datasets up to this many rows are used whole at every step.
  std::size_t full_batch_limit = 1024;
  Optimizer optimizer = Optimizer::adagrad;
  std::uint64_t seed = 0;
  LossSpec loss;
  double converge_threshold = 1e-4;

  void validate() const;
};

struct TrainingData {
  LossBatch source;
  /// Reference samples for the reported mse in residual mode, targets in
  /// physical units. Data-driven runs report mse on `source` directly.
  std::optional<DataBatch> reference;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  LossValue loss;         // over the whole training set after the epoch
  double mse = 0.0;       // NaN when no reference is available
};

struct TrainReport {
  std::vector<EpochRecord> history;
  Network network;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  bool converged = false;
  double final_mse = 0.0;
};

/// Raised on a non-finite loss or gradient; keeps the state before the bad step.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::string message, std::size_t step, Network last_finite)
      : Error(ErrorCode::non_finite, std::move(message)), step_(step), last_finite_(std::move(last_finite)) {}

  std::size_t step() const noexcept { return step_; }
  const Network& last_finite() const noexcept { return last_finite_; }

 private:
  std::size_t step_;
  Network last_finite_;
};

/// Mean squared error of the scaled prediction, in the units the network is
/// trained in. Returns NaN when no reference exists.
double reported_mse(const Network& net, const TrainingData& data, const LossSpec& loss);

/// Trains `net` in place of a copy; `rng` drives mini-batch sampling only.
TrainReport train(Network net, const TrainingData& data, const TrainConfig& config, SeededRng& rng);

/// Initializes from `config.seed` and trains with the same stream.
TrainReport train_seeded(const NetworkSpec& spec, const TrainingData& data, const TrainConfig& config);

struct RunOutcome {
  std::uint64_t seed = 0;
  std::optional<TrainReport> report;
  std::string error;  // set when the run failed
  std::optional<CollapseReport> collapse;
};

struct MultiSeedSummary {
  std::size_t runs = 0;
  std::size_t failed = 0;
  double mean_mse = 0.0;
  double min_mse = 0.0;
  double max_mse = 0.0;
  double median_mse = 0.0;
  std::size_t converged = 0;
  /// Runs whose layer-1 effective rank is below the width.
  std::size_t collapsed = 0;
};

struct MultiSeedResult {
  std::vector<RunOutcome> runs;
  MultiSeedSummary summary;
};

/// `k` independent runs with sub-seeds derived from `config.seed`. Collapse
/// is measured on `probe_inputs` (or the training inputs when empty).
MultiSeedResult multi_seed(const NetworkSpec& spec, const TrainingData& data, const TrainConfig& config,
                           std::size_t k, const Matrix& probe_inputs = {});

}  // namespace dnr
