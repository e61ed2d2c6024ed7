#include "ecaml/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "ecaml/confusion.hpp"
#include "ecaml/divergences.hpp"
#include "ecaml/experiments.hpp"
#include "ecaml/gradcheck.hpp"
#include "ecaml/kernels.hpp"
#include "ecaml/losses.hpp"
#include "ecaml/mlp.hpp"
#include "ecaml/sampling.hpp"

namespace ecaml {

using nlohmann::json;

namespace {

constexpr double kGradTolerance = 1e-4;

Matrix random_matrix(std::size_t rows, std::size_t cols, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (double& v : m.flat()) v = n(rng);
  return m;
}

// P classes with K rows each, rows grouped by class.
Batch random_batch(std::size_t p, std::size_t k, std::size_t dim, std::mt19937_64& rng) {
  Batch b;
  b.features = random_matrix(p * k, dim, 1.0, rng);
  for (std::size_t g = 0; g < p; ++g) {
    ClassGroup group{static_cast<Label>(g), {}};
    for (std::size_t i = 0; i < k; ++i) {
      b.labels.push_back(static_cast<Label>(g));
      group.rows.push_back(g * k + i);
      b.source_rows.push_back(g * k + i);
    }
    b.groups.push_back(group);
  }
  return b;
}

// He-initialized network with small random biases, so no unit starts dead
// and no output row is exactly zero.
MlpParams random_network(std::size_t in, std::size_t out, bool unit, std::mt19937_64& rng) {
  MlpParams params = init_params({in, {6}, out, unit, rng()});
  std::normal_distribution<double> n(0.0, 0.1);
  for (DenseLayer& layer : params.layers) {
    for (double& b : layer.bias) b = n(rng);
  }
  return params;
}

using EmbeddingLoss = std::function<LossOutput(const Matrix&)>;

// Objective over the embedding entries themselves.
Objective over_embeddings(std::size_t rows, std::size_t cols, EmbeddingLoss loss) {
  return [=](std::span<const double> x) {
    Matrix e(rows, cols, std::vector<double>(x.begin(), x.end()));
    LossOutput out = loss(e);
    return ValueAndGradient{out.value, std::vector<double>(out.grad.flat().begin(), out.grad.flat().end())};
  };
}

// Objective over the parameters of a network applied to fixed inputs.
Objective over_params(MlpParams shape, Matrix inputs, EmbeddingLoss loss) {
  return [=](std::span<const double> theta) {
    MlpParams p = shape;
    unflatten(theta, p);
    ForwardResult f = forward(p, inputs);
    LossOutput out = loss(f.embeddings);
    Gradients g = backward(p, f.trace, out.grad);
    return ValueAndGradient{out.value, flatten(g.params)};
  };
}

PropertyResult gradient_property(const std::string& name, std::size_t instances,
                                 const std::function<std::pair<Objective, std::vector<double>>()>& make) {
  PropertyResult r{"gradient/" + name, instances, 0, 0.0, kGradTolerance};
  for (std::size_t i = 0; i < instances; ++i) {
    auto [objective, point] = make();
    GradCheckReport rep = finite_diff_check(objective, point);
    r.worst = std::max(r.worst, rep.max_relative_error);
    if (!(rep.max_relative_error <= kGradTolerance)) ++r.violations;
  }
  return r;
}

// True when some triplet sits within `gap` of the hinge, where central
// differences straddle the kink.
bool near_hinge(const Matrix& unit, std::span<const Triplet> triplets, double margin, double gap) {
  for (const Triplet& t : triplets) {
    double h = kernels::squared_distance(unit.row(t.anchor), unit.row(t.positive)) -
               kernels::squared_distance(unit.row(t.anchor), unit.row(t.negative)) + margin;
    if (std::abs(h) < gap) return true;
  }
  return false;
}

}  // namespace

std::size_t VerifyReport::violations() const {
  std::size_t n = 0;
  for (const auto& p : properties) n += p.violations;
  return n;
}

json VerifyReport::to_json() const {
  json props = json::array();
  for (const auto& p : properties) {
    props.push_back({{"name", p.name},
                     {"instances", p.instances},
                     {"violations", p.violations},
                     {"worst", p.worst},
                     {"tolerance", p.tolerance}});
  }
  return json{{"seed", seed}, {"fuzz", fuzz}, {"violations", violations()}, {"ok", ok()}, {"properties", props}};
}

VerifyReport run_property_suite(std::size_t fuzz, std::uint64_t seed, std::size_t gradient_instances) {
  VerifyReport report;
  report.seed = seed;
  report.fuzz = fuzz;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> dim_dist(2, 16), size_dist(1, 10);
  std::uniform_real_distribution<double> log_scale(std::log(0.1), std::log(10.0));

  PropertyResult ged_bound{"ec_ge_half_ged", fuzz, 0, 0.0, kInequalityTolerance};
  PropertyResult mmd_bound{"ec_ge_mmd2_linear", fuzz, 0, 0.0, kInequalityTolerance};
  PropertyResult equality{"mmd2_linear_eq_half_ged", fuzz, 0, 0.0, kInequalityTolerance};
  for (std::size_t i = 0; i < fuzz; ++i) {
    std::size_t d = dim_dist(rng);
    double scale = std::exp(log_scale(rng));
    Matrix x = random_matrix(size_dist(rng), d, scale, rng);
    Matrix y = random_matrix(size_dist(rng), d, scale, rng);
    GedBoundCheck c2 = check_ec_bounds_ged(x, y);
    MmdBoundCheck c3 = check_ec_bounds_mmd(x, y);
    if (!c2.holds) ++ged_bound.violations;
    ged_bound.worst = std::max(ged_bound.worst, c2.half_ged - c2.ec);
    if (!c3.holds) ++mmd_bound.violations;
    mmd_bound.worst = std::max(mmd_bound.worst, c3.mmd - c3.ec);
    double gap = std::abs(c3.mmd - c3.half_ged);
    if (!c3.equality_holds) ++equality.violations;
    equality.worst = std::max(equality.worst, gap);
  }

  PropertyResult witness{"negative_type_witness", fuzz, 0, 0.0, kInequalityTolerance};
  PropertyResult closed{"negative_type_closed_form", fuzz, 0, 0.0, kInequalityTolerance};
  PropertyResult psd{"distance_induced_gram_psd", fuzz, 0, 0.0, kInequalityTolerance};
  const Semimetric metrics[] = {Semimetric::squared_euclidean(), Semimetric::euclidean(), Semimetric::power(0.5)};
  for (std::size_t i = 0; i < fuzz; ++i) {
    std::size_t d = dim_dist(rng);
    std::size_t n = size_dist(rng) + 1;
    Matrix z = random_matrix(n, d, 1.0, rng);
    std::normal_distribution<double> a(0.0, 1.0);
    std::vector<double> alpha(n);
    for (double& v : alpha) v = a(rng);
    double mean = 0.0;
    for (double v : alpha) mean += v;
    mean /= static_cast<double>(n);
    for (double& v : alpha) v -= mean;
    double w = negative_type_witness(z, alpha, Semimetric::squared_euclidean());
    double c = squared_euclidean_witness_closed_form(z, alpha);
    if (w > kInequalityTolerance) ++witness.violations;
    witness.worst = std::max(witness.worst, w);
    if (std::abs(w - c) > kInequalityTolerance) ++closed.violations;
    closed.worst = std::max(closed.worst, std::abs(w - c));

    Matrix center = random_matrix(1, d, 1.0, rng);
    Matrix gram = distance_induced_kernel_gram(z, metrics[i % 3], center.row(0));
    double lo = min_eigenvalue(gram);
    if (lo < -kInequalityTolerance) ++psd.violations;
    psd.worst = std::max(psd.worst, -lo);
  }
  report.properties = {ged_bound, mmd_bound, equality, witness, closed, psd};

  const std::size_t p = 3, k = 2, dim = 5, emb = 4;
  const TripletConfig tcfg;
  const BinomialConfig bcfg;
  auto add = [&](PropertyResult r) { report.properties.push_back(std::move(r)); };

  add(gradient_property("triplet", gradient_instances, [&] {
    while (true) {
      Batch b = random_batch(p, k, dim, rng);
      MlpParams params = random_network(dim, emb, true, rng);
      std::vector<Triplet> triplets = build_triplets(b, rng);
      if (near_hinge(embed(params, b.features), triplets, tcfg.margin, 1e-3)) continue;
      return std::pair{over_params(params, b.features,
                                   [=](const Matrix& e) { return triplet_loss(e, triplets, tcfg); }),
                       flatten(params)};
    }
  }));
  add(gradient_property("npair", gradient_instances, [&] {
    Batch b = random_batch(p, k, emb, rng);
    auto tuples = build_npair_tuples(b);
    return std::pair{over_embeddings(b.features.rows(), emb,
                                     [=](const Matrix& e) { return npair_loss(e, tuples).loss; }),
                     std::vector<double>(b.features.flat().begin(), b.features.flat().end())};
  }));
  add(gradient_property("binomial", gradient_instances, [&] {
    Batch b = random_batch(p, k, emb, rng);
    auto pairs = build_contrastive_pairs(b);
    return std::pair{over_embeddings(b.features.rows(), emb,
                                     [=](const Matrix& e) { return binomial_loss(e, pairs, bcfg); }),
                     std::vector<double>(b.features.flat().begin(), b.features.flat().end())};
  }));
  for (bool log_form : {false, true}) {
    add(gradient_property(log_form ? "log_ec" : "ec", gradient_instances, [&] {
      Batch b = random_batch(2, size_dist(rng) % 4 + 1, emb, rng);
      auto g0 = b.groups[0], g1 = b.groups[1];
      return std::pair{over_embeddings(b.features.rows(), emb,
                                       [=](const Matrix& e) {
                                         return log_form ? log_energy_confusion(e, g0, g1)
                                                         : energy_confusion(e, g0, g1);
                                       }),
                       std::vector<double>(b.features.flat().begin(), b.features.flat().end())};
    }));
  }
  for (LossKind kind : {LossKind::triplet, LossKind::npair, LossKind::binomial}) {
    add(gradient_property(std::string("ecaml_") + to_string(kind), gradient_instances, [&] {
      while (true) {
        Batch b = random_batch(p, k, dim, rng);
        bool unit = kind == LossKind::triplet;
        MlpParams params = random_network(dim, emb, unit, rng);
        EcConfig ec;
        ec.lambda = 0.7;
        ec.pair_mode = PairMode::all_unordered;
        ec.stop_gradient_before_last_layer = false;
        auto pairs = select_class_pairs(b.groups, ec, rng).pairs;
        auto groups = b.groups;
        EmbeddingLoss base;
        if (kind == LossKind::triplet) {
          std::vector<Triplet> triplets = build_triplets(b, rng);
          if (near_hinge(embed(params, b.features), triplets, tcfg.margin, 1e-3)) continue;
          base = [=](const Matrix& e) { return triplet_loss(e, triplets, tcfg); };
        } else if (kind == LossKind::npair) {
          auto tuples = build_npair_tuples(b);
          base = [=](const Matrix& e) { return npair_loss(e, tuples).loss; };
        } else {
          auto cp = build_contrastive_pairs(b);
          base = [=](const Matrix& e) { return binomial_loss(e, cp, bcfg); };
        }
        auto objective = [=](const Matrix& e) { return ecaml_objective(base(e), e, groups, pairs, ec); };
        return std::pair{over_params(params, b.features, objective), flatten(params)};
      }
    }));
  }
  return report;
}

}  // namespace ecaml
