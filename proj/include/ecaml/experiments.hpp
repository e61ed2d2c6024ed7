#pragma once

// Training loop, periodic zero-shot evaluation, and the lambda / embedding
// size ablations built on top of it.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include "ecaml/confusion.hpp"
#include "ecaml/dataset.hpp"
#include "ecaml/losses.hpp"
#include "ecaml/mlp.hpp"
#include "ecaml/sampling.hpp"

namespace ecaml {

enum class LossKind { triplet, npair, binomial };

const char* to_string(LossKind kind);

struct LossConfig {
  LossKind kind = LossKind::binomial;
  TripletConfig triplet;
  BinomialConfig binomial;
};

struct TrainConfig {
  std::size_t iterations = 2000;
  double lr = 1e-3;
  double weight_decay = 2e-4;
  double last_layer_lr_mult = 10.0;
  std::size_t eval_every = 100;
  BatchSpec batch{8, 2};
  LossConfig loss;
  EcConfig ec;
  std::vector<std::size_t> recall_ks{1, 2, 4, 8};
  std::uint64_t seed = 0;

  void validate() const;
};

struct EvalRecord {
  std::size_t iteration = 0;
  double seen_r1 = 0.0;
  double unseen_r1 = 0.0;
  double nmi = 0.0;
  double f1 = 0.0;
  // Objective of the most recent step (NaN before the first step).
  double train_loss = 0.0;
  // Mean (log-)EC over the most recent step's class pairs.
  double ec_value = 0.0;
};

struct RunHistory {
  std::vector<EvalRecord> evals;
  // Objective value at every optimizer step.
  std::vector<double> step_losses;
  // Baseline loss alone at every step.
  std::vector<double> step_base_losses;
};

struct FinalMetrics {
  std::map<std::size_t, double> unseen_recall;
  double seen_r1 = 0.0;
  double unseen_r1 = 0.0;
  double nmi = 0.0;
  double f1 = 0.0;

  bool operator==(const FinalMetrics&) const = default;
};

struct TrainResult {
  MlpParams params;
  RunHistory history;
  FinalMetrics final_metrics;
};

// Thrown when the objective or an update turns non-finite. Carries the
// parameters from before the failing step.
class TrainingAborted : public NumericError {
 public:
  TrainingAborted(const std::string& what, std::size_t iteration, MlpParams last_good, RunHistory history)
      : NumericError(what), iteration_(iteration), last_good_(std::move(last_good)), history_(std::move(history)) {}

  std::size_t iteration() const noexcept { return iteration_; }
  const MlpParams& last_good() const noexcept { return last_good_; }
  const RunHistory& history() const noexcept { return history_; }

 private:
  std::size_t iteration_;
  MlpParams last_good_;
  RunHistory history_;
};

// Independent random streams derived from one seed, so that drawing class
// pairs for the confusion term never perturbs batch or tuple sampling.
enum class RngStream : std::uint64_t { batches = 1, tuples = 2, pairs = 3, clustering = 4 };

std::mt19937_64 rng_stream(std::uint64_t seed, RngStream id);

// The embedding view each loss expects: unit-norm for triplet, raw otherwise.
MlpConfig effective_mlp_config(MlpConfig mlp, const Dataset& data, const TrainConfig& train);

FinalMetrics evaluate_model(const MlpParams& params, const Dataset& data, const TrainConfig& cfg);

// Samples seen-class batches, minimizes baseline + lambda * confusion with
// Adam and evaluates every eval_every iterations (and at 0 and the end).
TrainResult train(const Dataset& data, const MlpConfig& mlp, const TrainConfig& cfg);

// Called once per finished run with the exact configs it trained under.
// May be invoked concurrently from worker threads.
using RunSink = std::function<void(const MlpConfig&, const TrainConfig&, const TrainResult&)>;

struct LambdaRow {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  FinalMetrics metrics;
};

// One run per (lambda, seed); rows ordered lambda-major. `jobs` worker
// threads; each run is single-threaded.
std::vector<LambdaRow> ablate_lambda(const Dataset& data, const MlpConfig& mlp, const TrainConfig& cfg,
                                     const std::vector<double>& lambdas, const std::vector<std::uint64_t>& seeds,
                                     std::size_t jobs = 1, const RunSink& sink = {});

struct SweepRow {
  std::size_t embedding_dim = 0;
  bool ecaml = false;
  std::uint64_t seed = 0;
  FinalMetrics metrics;
};

// Paired baseline (lambda = 0) and ECAML (cfg.ec.lambda) runs per dimension.
std::vector<SweepRow> embedding_size_sweep(const Dataset& data, const MlpConfig& mlp, const TrainConfig& cfg,
                                           const std::vector<std::size_t>& dims,
                                           const std::vector<std::uint64_t>& seeds, std::size_t jobs = 1,
                                           const RunSink& sink = {});

double median(std::vector<double> values);

}  // namespace ecaml
