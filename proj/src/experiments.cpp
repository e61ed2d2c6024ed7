#include "ecaml/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "ecaml/eval.hpp"

namespace ecaml {

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::triplet:
      return "triplet";
    case LossKind::npair:
      return "npair";
    case LossKind::binomial:
      return "binomial";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train.lr must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(last_layer_lr_mult > 0.0)) throw ConfigError("train.last_layer_lr_mult must be > 0");
  if (eval_every == 0) throw ConfigError("train.eval_every must be >= 1");
  if (recall_ks.empty()) throw ConfigError("eval.recall_ks must not be empty");
  for (std::size_t k : recall_ks) {
    if (k == 0) throw ConfigError("eval.recall_ks entries must be >= 1");
  }
  batch.validate();
  ec.validate();
  if (loss.triplet.margin < 0.0) throw ConfigError("loss.margin must be >= 0");
  if (loss.kind != LossKind::binomial && batch.instances_per_class < 2) {
    throw ConfigError("triplet and N-pair losses need batch.instances_per_class >= 2");
  }
  if (loss.kind == LossKind::npair && batch.instances_per_class != 2) {
    throw ConfigError("N-pair loss needs batch.instances_per_class == 2");
  }
}

MlpConfig effective_mlp_config(MlpConfig mlp, const Dataset& data, const TrainConfig& train) {
  mlp.input_dim = data.input_dim();
  mlp.normalize_output = train.loss.kind == LossKind::triplet;
  return mlp;
}

std::mt19937_64 rng_stream(std::uint64_t seed, RngStream id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id)};
  return std::mt19937_64(seq);
}

namespace {

struct StepLoss {
  LossOutput base;
  std::size_t skipped = 0;
};

StepLoss baseline_loss(const Matrix& emb, const Batch& batch, const LossConfig& cfg, std::mt19937_64& tuple_rng) {
  switch (cfg.kind) {
    case LossKind::triplet: {
      const auto triplets = build_triplets(batch, tuple_rng);
      return {triplet_loss(emb, triplets, cfg.triplet), 0};
    }
    case LossKind::npair: {
      const auto tuples = build_npair_tuples(batch);
      auto r = npair_loss(emb, tuples);
      return {std::move(r.loss), r.skipped};
    }
    case LossKind::binomial: {
      const auto pairs = build_contrastive_pairs(batch);
      return {binomial_loss(emb, pairs, cfg.binomial), 0};
    }
  }
  throw ConfigError("unknown loss kind");
}

}  // namespace

FinalMetrics evaluate_model(const MlpParams& params, const Dataset& data, const TrainConfig& cfg) {
  FinalMetrics m;
  const SplitView seen = view_of(data, SplitFilter::seen);
  const SplitView unseen = view_of(data, SplitFilter::unseen);
  const Matrix seen_emb = l2_normalized(embed(params, seen.features));
  const Matrix unseen_emb = l2_normalized(embed(params, unseen.features));

  std::vector<std::size_t> ks = cfg.recall_ks;
  if (std::find(ks.begin(), ks.end(), 1) == ks.end()) ks.push_back(1);
  const std::size_t one = 1;
  m.seen_r1 = recall_at_k(seen_emb, seen.labels, std::span(&one, 1)).recall_at.at(1);
  const RetrievalReport unseen_rr = recall_at_k(unseen_emb, unseen.labels, ks);
  m.unseen_r1 = unseen_rr.recall_at.at(1);
  for (std::size_t k : cfg.recall_ks) m.unseen_recall[k] = unseen_rr.recall_at.at(k);

  auto rng = rng_stream(cfg.seed, RngStream::clustering);
  const ClusteringReport cr = evaluate_clustering(unseen_emb, unseen.labels, rng());
  m.nmi = cr.nmi;
  m.f1 = cr.f1;
  return m;
}

TrainResult train(const Dataset& data, const MlpConfig& mlp_in, const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  const MlpConfig mlp = effective_mlp_config(mlp_in, data, cfg);

  TrainResult result;
  result.params = init_params(mlp);
  AdamState adam = AdamState::for_params(result.params);
  AdamOptions opts{cfg.lr, cfg.weight_decay, std::vector<double>(result.params.layers.size(), 1.0)};
  opts.layer_lr_multipliers.back() = cfg.last_layer_lr_mult;

  auto batch_rng = rng_stream(cfg.seed, RngStream::batches);
  auto tuple_rng = rng_stream(cfg.seed, RngStream::tuples);
  auto pair_rng = rng_stream(cfg.seed, RngStream::pairs);

  double last_loss = std::numeric_limits<double>::quiet_NaN();
  double last_ec = std::numeric_limits<double>::quiet_NaN();
  auto record = [&](std::size_t iteration) {
    const FinalMetrics m = evaluate_model(result.params, data, cfg);
    result.history.evals.push_back({iteration, m.seen_r1, m.unseen_r1, m.nmi, m.f1, last_loss, last_ec});
  };
  record(0);

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    const Batch batch = sample_batch(data, cfg.batch, SplitFilter::seen, batch_rng);
    auto fwd = forward(result.params, batch.features);
    if (!all_finite(fwd.embeddings.flat())) {
      throw TrainingAborted("non-finite embeddings at iteration " + std::to_string(it), it, result.params,
                            result.history);
    }
    StepLoss step = baseline_loss(fwd.embeddings, batch, cfg.loss, tuple_rng);
    const PairSelection sel = select_class_pairs(batch.groups, cfg.ec, pair_rng);
    const EcTerm term = confusion_term(fwd.embeddings, batch.groups, sel.pairs, cfg.ec);

    const double objective = step.base.value + (cfg.ec.lambda == 0.0 ? 0.0 : cfg.ec.lambda * term.mean_value);
    if (!std::isfinite(objective)) {
      std::ostringstream msg;
      msg << "non-finite objective at iteration " << it << " (baseline " << step.base.value << ", confusion "
          << term.mean_value << ")";
      throw TrainingAborted(msg.str(), it, result.params, result.history);
    }

    Gradients grads{MlpParams{}, Matrix{}};
    const bool confuse = cfg.ec.lambda != 0.0 && !sel.pairs.empty();
    if (confuse && cfg.ec.stop_gradient_before_last_layer) {
      grads = backward(result.params, fwd.trace, step.base.grad);
      const Gradients ec_grads =
          backward(result.params, fwd.trace, term.weighted_grad, BackwardScope::output_layer_only);
      add_in_place(grads.params, ec_grads.params);
    } else if (confuse) {
      LossOutput total = ecaml_objective(step.base, fwd.embeddings, batch.groups, sel.pairs, cfg.ec);
      grads = backward(result.params, fwd.trace, total.grad);
    } else {
      grads = backward(result.params, fwd.trace, step.base.grad);
    }

    MlpParams before = result.params;
    try {
      adam_step(result.params, grads.params, adam, opts);
    } catch (const NumericError& e) {
      throw TrainingAborted(std::string(e.what()) + " at iteration " + std::to_string(it), it, std::move(before),
                            result.history);
    }

    last_loss = objective;
    last_ec = term.mean_value;
    result.history.step_losses.push_back(objective);
    result.history.step_base_losses.push_back(step.base.value);
    if (it % cfg.eval_every == 0 || it == cfg.iterations) record(it);
  }
  result.final_metrics = evaluate_model(result.params, data, cfg);
  return result;
}

namespace {

template <class Job>
void run_parallel(std::size_t count, std::size_t jobs, Job&& job) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<LambdaRow> ablate_lambda(const Dataset& data, const MlpConfig& mlp, const TrainConfig& cfg,
                                     const std::vector<double>& lambdas, const std::vector<std::uint64_t>& seeds,
                                     std::size_t jobs, const RunSink& sink) {
  if (lambdas.size() < 2) throw ConfigError("lambda ablation needs at least two values");
  if (std::find(lambdas.begin(), lambdas.end(), 0.0) == lambdas.end()) {
    throw ConfigError("lambda ablation must include 0 (the baseline)");
  }
  if (seeds.empty()) throw ConfigError("lambda ablation needs at least one seed");
  std::vector<LambdaRow> rows;
  for (double l : lambdas) {
    for (std::uint64_t s : seeds) rows.push_back({l, s, {}});
  }
  run_parallel(rows.size(), jobs, [&](std::size_t i) {
    MlpConfig m = mlp;
    TrainConfig c = cfg;
    m.seed = rows[i].seed;
    c.seed = rows[i].seed;
    c.ec.lambda = rows[i].lambda;
    TrainResult r = train(data, m, c);
    rows[i].metrics = r.final_metrics;
    if (sink) sink(m, c, r);
  });
  return rows;
}

std::vector<SweepRow> embedding_size_sweep(const Dataset& data, const MlpConfig& mlp, const TrainConfig& cfg,
                                           const std::vector<std::size_t>& dims,
                                           const std::vector<std::uint64_t>& seeds, std::size_t jobs,
                                           const RunSink& sink) {
  if (dims.empty()) throw ConfigError("embedding-size sweep needs at least one dimension");
  if (seeds.empty()) throw ConfigError("embedding-size sweep needs at least one seed");
  std::vector<SweepRow> rows;
  for (std::size_t d : dims) {
    for (bool arm : {false, true}) {
      for (std::uint64_t s : seeds) rows.push_back({d, arm, s, {}});
    }
  }
  run_parallel(rows.size(), jobs, [&](std::size_t i) {
    MlpConfig m = mlp;
    TrainConfig c = cfg;
    m.seed = rows[i].seed;
    m.embedding_dim = rows[i].embedding_dim;
    c.seed = rows[i].seed;
    if (!rows[i].ecaml) c.ec.lambda = 0.0;
    TrainResult r = train(data, m, c);
    rows[i].metrics = r.final_metrics;
    if (sink) sink(m, c, r);
  });
  return rows;
}

double median(std::vector<double> values) {
  if (values.empty()) throw PreconditionError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace ecaml
