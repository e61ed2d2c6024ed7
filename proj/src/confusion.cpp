#include "ecaml/confusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ecaml/kernels.hpp"

namespace ecaml {

void EcConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("ec.lambda must be >= 0");
  if (pair_mode == PairMode::sample_k && sample_k < 1) throw ConfigError("ec.sample_k must be >= 1");
}

double energy_confusion_value(const Matrix& x, const Matrix& y) {
  if (x.rows() == 0 || y.rows() == 0) throw PreconditionError("energy confusion needs non-empty sets");
  if (x.cols() != y.cols()) throw ShapeError("energy confusion sets differ in dimension");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < y.rows(); ++j) sum += kernels::squared_distance(x.row(i), y.row(j));
  }
  return sum / (static_cast<double>(x.rows()) * static_cast<double>(y.rows()));
}

namespace {

void check_groups(const Matrix& embeddings, const ClassGroup& a, const ClassGroup& b) {
  if (a.label == b.label) {
    throw PreconditionError("energy confusion needs two different classes (both are " + std::to_string(a.label) + ")");
  }
  if (a.rows.empty() || b.rows.empty()) throw PreconditionError("energy confusion needs non-empty class groups");
  for (const auto* g : {&a, &b}) {
    for (std::size_t r : g->rows) {
      if (r >= embeddings.rows()) throw PreconditionError("class group row out of range");
    }
  }
}

// Accumulates scale * d EC / d x into grad and returns EC.
double accumulate_ec(const Matrix& embeddings, const ClassGroup& first, const ClassGroup& second, double scale,
                     Matrix& grad) {
  // Fixed summation order so that EC(I, J) and EC(J, I) agree bit for bit.
  const bool swap = second.label < first.label;
  const ClassGroup& a = swap ? second : first;
  const ClassGroup& b = swap ? first : second;
  const double na = static_cast<double>(a.rows.size());
  const double nb = static_cast<double>(b.rows.size());
  double sum = 0.0;
  for (std::size_t i : a.rows) {
    for (std::size_t j : b.rows) sum += kernels::squared_distance(embeddings.row(i), embeddings.row(j));
  }
  const double ec = sum / (na * nb);
  if (scale == 0.0) return ec;

  // d/dx_i = (2/(Na Nb)) sum_j (x_i - x_j) = (2/Na) (x_i - mean_b), and symmetrically.
  const std::size_t dim = embeddings.cols();
  std::vector<double> mean_a(dim, 0.0), mean_b(dim, 0.0);
  for (std::size_t i : a.rows) kernels::axpy(1.0 / na, embeddings.row(i), mean_a);
  for (std::size_t j : b.rows) kernels::axpy(1.0 / nb, embeddings.row(j), mean_b);
  for (std::size_t i : a.rows) {
    auto g = grad.row(i);
    kernels::axpy(2.0 * scale / na, embeddings.row(i), g);
    kernels::axpy(-2.0 * scale / na, mean_b, g);
  }
  for (std::size_t j : b.rows) {
    auto g = grad.row(j);
    kernels::axpy(2.0 * scale / nb, embeddings.row(j), g);
    kernels::axpy(-2.0 * scale / nb, mean_a, g);
  }
  return ec;
}

}  // namespace

LossOutput energy_confusion(const Matrix& embeddings, const ClassGroup& first, const ClassGroup& second) {
  check_groups(embeddings, first, second);
  LossOutput out{0.0, Matrix(embeddings.rows(), embeddings.cols())};
  out.value = accumulate_ec(embeddings, first, second, 1.0, out.grad);
  return out;
}

LossOutput log_energy_confusion(const Matrix& embeddings, const ClassGroup& first, const ClassGroup& second) {
  LossOutput out = energy_confusion(embeddings, first, second);
  const double denom = 1.0 + out.value;
  out.value = std::log1p(out.value);
  for (double& g : out.grad.flat()) g /= denom;
  return out;
}

PairSelection select_class_pairs(std::span<const ClassGroup> groups, const EcConfig& cfg, std::mt19937_64& rng) {
  PairSelection sel;
  if (groups.size() < 2) {
    sel.too_few_groups = true;
    return sel;
  }
  std::vector<GroupPair> all;
  all.reserve(groups.size() * (groups.size() - 1) / 2);
  for (std::size_t a = 0; a < groups.size(); ++a) {
    for (std::size_t b = a + 1; b < groups.size(); ++b) {
      if (groups[a].label != groups[b].label) all.push_back({a, b});
    }
  }
  if (cfg.pair_mode == PairMode::all_unordered) {
    sel.pairs = std::move(all);
    return sel;
  }
  const std::size_t k = std::min(cfg.sample_k, all.size());
  // Partial Fisher-Yates: the first k slots become a uniform sample.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(k);
  sel.pairs = std::move(all);
  return sel;
}

EcTerm confusion_term(const Matrix& embeddings, std::span<const ClassGroup> groups,
                      std::span<const GroupPair> pairs, const EcConfig& cfg) {
  EcTerm term{0.0, Matrix(embeddings.rows(), embeddings.cols())};
  if (pairs.empty()) return term;
  const double weight = cfg.lambda / static_cast<double>(pairs.size());
  Matrix scratch(embeddings.rows(), embeddings.cols());
  double total = 0.0;
  for (const GroupPair& gp : pairs) {
    if (gp.first >= groups.size() || gp.second >= groups.size()) throw PreconditionError("group pair out of range");
    const ClassGroup& a = groups[gp.first];
    const ClassGroup& b = groups[gp.second];
    check_groups(embeddings, a, b);
    if (!cfg.log_form) {
      total += accumulate_ec(embeddings, a, b, weight, term.weighted_grad);
      continue;
    }
    // The log form needs EC before its gradient can be scaled.
    scratch.fill(0.0);
    const double ec = accumulate_ec(embeddings, a, b, 1.0, scratch);
    total += std::log1p(ec);
    kernels::axpy(weight / (1.0 + ec), scratch.flat(), term.weighted_grad.flat());
  }
  term.mean_value = total / static_cast<double>(pairs.size());
  return term;
}

LossOutput ecaml_objective(const LossOutput& base, const Matrix& embeddings, std::span<const ClassGroup> groups,
                           std::span<const GroupPair> pairs, const EcConfig& cfg) {
  cfg.validate();
  if (base.grad.rows() != embeddings.rows() || base.grad.cols() != embeddings.cols()) {
    throw ShapeError("base loss gradient does not match embeddings");
  }
  if (cfg.lambda == 0.0 || pairs.empty()) return base;
  const EcTerm term = confusion_term(embeddings, groups, pairs, cfg);
  LossOutput out = base;
  out.value += cfg.lambda * term.mean_value;
  kernels::axpy(1.0, term.weighted_grad.flat(), out.grad.flat());
  return out;
}

}  // namespace ecaml
