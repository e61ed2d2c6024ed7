#include "ecaml/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ecaml/kernels.hpp"

namespace ecaml {

double softplus(double z) noexcept {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double logistic(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

void check_index(std::size_t idx, const Matrix& embeddings) {
  if (idx >= embeddings.rows()) {
    throw PreconditionError("tuple index " + std::to_string(idx) + " out of range for " +
                            std::to_string(embeddings.rows()) + " embeddings");
  }
}

}  // namespace

LossOutput triplet_loss(const Matrix& embeddings, std::span<const Triplet> triplets, const TripletConfig& cfg) {
  if (cfg.margin < 0.0) throw ConfigError("triplet margin must be >= 0");
  LossOutput out{0.0, Matrix(embeddings.rows(), embeddings.cols())};
  for (const Triplet& t : triplets) {
    for (std::size_t idx : {t.anchor, t.positive, t.negative}) {
      check_index(idx, embeddings);
      const double norm = std::sqrt(kernels::squared_norm(embeddings.row(idx)));
      if (std::abs(norm - 1.0) > 1e-6) {
        throw PreconditionError("triplet loss needs unit-norm embeddings; row " + std::to_string(idx) +
                                " has norm " + std::to_string(norm));
      }
    }
  }
  for (const Triplet& t : triplets) {
    const auto a = embeddings.row(t.anchor);
    const auto p = embeddings.row(t.positive);
    const auto n = embeddings.row(t.negative);
    const double hinge = kernels::squared_distance(a, p) - kernels::squared_distance(a, n) + cfg.margin;
    if (hinge <= 0.0) continue;
    out.value += hinge;
    // d/da = 2(n - p), d/dp = 2(p - a), d/dn = 2(a - n)
    auto ga = out.grad.row(t.anchor);
    kernels::axpy(2.0, n, ga);
    kernels::axpy(-2.0, p, ga);
    auto gp = out.grad.row(t.positive);
    kernels::axpy(2.0, p, gp);
    kernels::axpy(-2.0, a, gp);
    auto gn = out.grad.row(t.negative);
    kernels::axpy(2.0, a, gn);
    kernels::axpy(-2.0, n, gn);
  }
  return out;
}

NPairResult npair_loss(const Matrix& embeddings, std::span<const NPairTuple> tuples) {
  NPairResult result{{0.0, Matrix(embeddings.rows(), embeddings.cols())}, 0};
  if (!all_finite(embeddings.flat())) throw InputError("non-finite embedding passed to N-pair loss");
  std::vector<double> logits;
  for (const NPairTuple& t : tuples) {
    check_index(t.anchor, embeddings);
    check_index(t.positive, embeddings);
    for (std::size_t n : t.negatives) check_index(n, embeddings);
    if (t.negatives.empty()) {
      ++result.skipped;
      continue;
    }
    const auto a = embeddings.row(t.anchor);
    const auto p = embeddings.row(t.positive);
    const double ap = kernels::dot(a, p);
    logits.resize(t.negatives.size());
    double shift = 0.0;  // the implicit "1" inside the log is exp(0)
    std::size_t top = t.negatives.size();  // index of the max term; size() means the implicit 0
    for (std::size_t k = 0; k < t.negatives.size(); ++k) {
      logits[k] = kernels::dot(a, embeddings.row(t.negatives[k])) - ap;
      if (logits[k] > shift) shift = logits[k], top = k;
    }
    // The max term is exactly 1; summing the rest separately keeps log1p
    // accurate when every other term is tiny.
    double rest = top == t.negatives.size() ? 0.0 : std::exp(-shift);
    for (std::size_t k = 0; k < logits.size(); ++k) {
      if (k != top) rest += std::exp(logits[k] - shift);
    }
    const double sum = 1.0 + rest;
    result.loss.value += shift + std::log1p(rest);

    // Softmax weights of each negative against the augmented set {0, z_k}.
    auto ga = result.loss.grad.row(t.anchor);
    double total_weight = 0.0;
    for (std::size_t k = 0; k < t.negatives.size(); ++k) {
      const double w = std::exp(logits[k] - shift) / sum;
      if (w == 0.0) continue;
      total_weight += w;
      const auto neg = embeddings.row(t.negatives[k]);
      kernels::axpy(w, neg, ga);
      kernels::axpy(w, a, result.loss.grad.row(t.negatives[k]));
    }
    kernels::axpy(-total_weight, p, ga);
    kernels::axpy(-total_weight, a, result.loss.grad.row(t.positive));
  }
  return result;
}

LossOutput binomial_loss(const Matrix& embeddings, std::span<const Pair> pairs, const BinomialConfig& cfg) {
  if (!(cfg.alpha > 0.0) || !(cfg.eta_pos > 0.0) || !(cfg.eta_neg > 0.0)) {
    throw ConfigError("binomial loss needs alpha, eta_pos and eta_neg > 0");
  }
  LossOutput out{0.0, Matrix(embeddings.rows(), embeddings.cols())};
  std::vector<double> norms(embeddings.rows(), -1.0);
  auto norm_of = [&](std::size_t r) {
    check_index(r, embeddings);
    if (norms[r] < 0.0) {
      norms[r] = std::sqrt(kernels::squared_norm(embeddings.row(r)));
      if (norms[r] == 0.0) {
        throw PreconditionError("binomial loss: row " + std::to_string(r) + " has zero norm");
      }
    }
    return norms[r];
  };
  for (const Pair& pr : pairs) {
    norm_of(pr.i);
    norm_of(pr.j);
  }
  for (const Pair& pr : pairs) {
    const auto xi = embeddings.row(pr.i);
    const auto xj = embeddings.row(pr.j);
    const double ni = norms[pr.i];
    const double nj = norms[pr.j];
    const double cosine = kernels::dot(xi, xj) / (ni * nj);
    const double sign = pr.same_class ? 1.0 : -1.0;
    const double eta = pr.same_class ? cfg.eta_pos : cfg.eta_neg;
    const double z = -sign * cfg.alpha * (cosine - cfg.beta) * eta;
    out.value += softplus(z);

    // dL/dcos = sigmoid(z) * dz/dcos
    const double dcos = logistic(z) * (-sign * cfg.alpha * eta);
    if (dcos == 0.0) continue;
    // dcos/dxi = xj/(|xi||xj|) - cos * xi/|xi|^2
    auto gi = out.grad.row(pr.i);
    kernels::axpy(dcos / (ni * nj), xj, gi);
    kernels::axpy(-dcos * cosine / (ni * ni), xi, gi);
    auto gj = out.grad.row(pr.j);
    kernels::axpy(dcos / (ni * nj), xi, gj);
    kernels::axpy(-dcos * cosine / (nj * nj), xj, gj);
  }
  return out;
}

}  // namespace ecaml
