#include "ecaml/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "ecaml/errors.hpp"
#include "ecaml/kernels.hpp"

namespace ecaml {

Matrix pairwise_sq_distances(const Matrix& embeddings) {
  const std::size_t n = embeddings.rows();
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = kernels::squared_norm(embeddings.row(i));
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::max(0.0, sq[i] + sq[j] - 2.0 * kernels::dot(embeddings.row(i), embeddings.row(j)));
      out(i, j) = d;
      out(j, i) = d;
    }
  }
  return out;
}

RetrievalReport recall_at_k(const Matrix& embeddings, std::span<const Label> labels, std::span<const std::size_t> ks) {
  const std::size_t n = embeddings.rows();
  if (labels.size() != n) throw ShapeError("one label per embedding required");
  std::map<Label, std::size_t> counts;
  for (Label l : labels) ++counts[l];
  for (const auto& [l, c] : counts) {
    if (c < 2) throw PreconditionError("class " + std::to_string(l) + " has a single member; Recall@K undefined");
  }
  std::size_t max_k = 0;
  for (std::size_t k : ks) {
    if (k == 0) throw PreconditionError("Recall@K needs K >= 1");
    max_k = std::max(max_k, k);
  }
  max_k = std::min(max_k, n - 1);

  const Matrix dist = pairwise_sq_distances(embeddings);
  // Rank of the first same-label neighbour for every query.
  std::vector<std::size_t> first_hit(n, n);
  std::vector<std::size_t> order(n - 1);
  for (std::size_t q = 0; q < n; ++q) {
    std::size_t t = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != q) order[t++] = j;
    }
    const auto row = dist.row(q);
    auto closer = [&](std::size_t a, std::size_t b) { return row[a] < row[b] || (row[a] == row[b] && a < b); };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(max_k), order.end(), closer);
    for (std::size_t r = 0; r < max_k; ++r) {
      if (labels[order[r]] == labels[q]) {
        first_hit[q] = r;
        break;
      }
    }
  }
  RetrievalReport report;
  report.queries = n;
  for (std::size_t k : ks) {
    std::size_t hits = 0;
    for (std::size_t q = 0; q < n; ++q) hits += first_hit[q] < k ? 1 : 0;
    report.recall_at[k] = static_cast<double>(hits) / static_cast<double>(n);
  }
  return report;
}

namespace {

std::size_t nearest(std::span<const double> x, const Matrix& centroids, double* dist_out) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = kernels::squared_distance(x, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist_out) *dist_out = best_d;
  return best;
}

}  // namespace

KMeansResult kmeans(const Matrix& embeddings, const KMeansOptions& options) {
  const std::size_t n = embeddings.rows();
  const std::size_t k = options.clusters;
  if (k == 0) throw PreconditionError("k-means needs at least one cluster");
  if (k > n) throw PreconditionError("k-means: more clusters (" + std::to_string(k) + ") than points (" +
                                     std::to_string(n) + ")");
  std::mt19937_64 rng(options.seed);
  KMeansResult res;
  res.centroids = Matrix(k, embeddings.cols());

  // k-means++ seeding.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(n, false);
  std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t pick = first;
    if (c > 0) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += d2[i];
      if (total > 0.0) {
        double u = std::uniform_real_distribution<double>(0.0, total)(rng);
        pick = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (d2[i] <= 0.0) continue;
          pick = i;
          u -= d2[i];
          if (u < 0.0) break;
        }
      } else {
        // All remaining points coincide with a centroid; take the first unused one.
        pick = 0;
        while (chosen[pick]) ++pick;
      }
    }
    chosen[pick] = true;
    const auto src = embeddings.row(pick);
    std::copy(src.begin(), src.end(), res.centroids.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], kernels::squared_distance(embeddings.row(i), res.centroids.row(c)));
    }
  }

  res.assignments.assign(n, 0);
  std::vector<double> point_dist(n);
  for (res.iterations = 0; res.iterations < options.max_iter;) {
    for (std::size_t i = 0; i < n; ++i) res.assignments[i] = nearest(embeddings.row(i), res.centroids, &point_dist[i]);
    ++res.iterations;

    Matrix next(k, embeddings.cols());
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++sizes[res.assignments[i]];
      kernels::axpy(1.0, embeddings.row(i), next.row(res.assignments[i]));
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) {
        for (double& v : next.row(c)) v /= static_cast<double>(sizes[c]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its centroid.
      std::size_t far = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (point_dist[i] > point_dist[far]) far = i;
      }
      const auto src = embeddings.row(far);
      std::copy(src.begin(), src.end(), next.row(c).begin());
      point_dist[far] = 0.0;
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      shift = std::max(shift, std::sqrt(kernels::squared_distance(next.row(c), res.centroids.row(c))));
    }
    res.centroids = std::move(next);
    if (shift < options.tol) break;
  }
  res.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    res.assignments[i] = nearest(embeddings.row(i), res.centroids, &d);
    res.inertia += d;
  }
  return res;
}

namespace {

struct Contingency {
  std::map<std::pair<std::size_t, Label>, std::size_t> joint;
  std::map<std::size_t, std::size_t> rows;
  std::map<Label, std::size_t> cols;
  std::size_t n = 0;
};

Contingency tabulate(std::span<const std::size_t> a, std::span<const Label> b) {
  if (a.size() != b.size()) throw ShapeError("assignments and labels differ in length");
  Contingency t;
  t.n = a.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++t.joint[{a[i], b[i]}];
    ++t.rows[a[i]];
    ++t.cols[b[i]];
  }
  return t;
}

// Entropy from counts; counts are sorted first so that equal multisets give
// bit-identical results.
template <class Map>
double entropy(const Map& counts, double n) {
  if (counts.size() <= 1) return 0.0;
  std::vector<double> c;
  c.reserve(counts.size());
  for (const auto& [key, v] : counts) c.push_back(static_cast<double>(v));
  std::sort(c.begin(), c.end());
  double s = 0.0;
  for (double v : c) s += v * std::log(v);
  return std::log(n) - s / n;
}

double choose2(std::size_t m) { return 0.5 * static_cast<double>(m) * static_cast<double>(m > 0 ? m - 1 : 0); }

}  // namespace

double nmi(std::span<const std::size_t> assignments, std::span<const Label> labels) {
  if (assignments.empty()) throw PreconditionError("NMI of an empty clustering");
  const Contingency t = tabulate(assignments, labels);
  const double n = static_cast<double>(t.n);
  const double ha = entropy(t.rows, n);
  const double hb = entropy(t.cols, n);
  if (ha + hb == 0.0) return 0.0;
  const double mi = ha + hb - entropy(t.joint, n);
  return std::clamp(2.0 * mi / (ha + hb), 0.0, 1.0);
}

double pairwise_f1(std::span<const std::size_t> assignments, std::span<const Label> labels) {
  if (assignments.size() < 2) throw PreconditionError("pairwise F1 needs at least two samples");
  const Contingency t = tabulate(assignments, labels);
  double tp = 0.0;
  for (const auto& [key, c] : t.joint) tp += choose2(c);
  double same_cluster = 0.0;
  for (const auto& [key, c] : t.rows) same_cluster += choose2(c);
  double same_class = 0.0;
  for (const auto& [key, c] : t.cols) same_class += choose2(c);
  if (tp == 0.0) return 0.0;
  const double precision = tp / same_cluster;
  const double recall = tp / same_class;
  return 2.0 * precision * recall / (precision + recall);
}

ClusteringReport evaluate_clustering(const Matrix& embeddings, std::span<const Label> labels, std::uint64_t seed) {
  const std::set<Label> distinct(labels.begin(), labels.end());
  ClusteringReport r;
  r.clusters = distinct.size();
  const KMeansResult km = kmeans(embeddings, {r.clusters, seed, 100, 1e-6});
  r.nmi = nmi(km.assignments, labels);
  r.f1 = pairwise_f1(km.assignments, labels);
  return r;
}

Matrix l2_normalized(const Matrix& embeddings) {
  Matrix out = embeddings;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    const double norm = std::sqrt(kernels::squared_norm(row));
    if (norm > 0.0) {
      for (double& v : row) v /= norm;
    }
  }
  return out;
}

}  // namespace ecaml
