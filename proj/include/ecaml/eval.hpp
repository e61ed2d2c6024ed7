#pragma once

// Zero-shot evaluation: Recall@K retrieval and k-means clustering scored by
// NMI and pairwise F1.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "ecaml/matrix.hpp"
#include "ecaml/types.hpp"

namespace ecaml {

// M[i][j] = |x_i|^2 + |x_j|^2 - 2 x_i.x_j clamped at 0; zero diagonal,
// exactly symmetric.
Matrix pairwise_sq_distances(const Matrix& embeddings);

struct RetrievalReport {
  std::map<std::size_t, double> recall_at;
  std::size_t queries = 0;
};

// Query i succeeds at K when one of its K nearest neighbours (itself
// excluded, ties to the lower row index) shares its label. Throws
// PreconditionError if a label occurs only once.
RetrievalReport recall_at_k(const Matrix& embeddings, std::span<const Label> labels, std::span<const std::size_t> ks);

struct KMeansOptions {
  std::size_t clusters = 2;
  std::uint64_t seed = 0;
  std::size_t max_iter = 100;
  double tol = 1e-6;
};

struct KMeansResult {
  std::vector<std::size_t> assignments;
  Matrix centroids;
  double inertia = 0.0;
  std::size_t iterations = 0;
};

// k-means++ seeding then Lloyd iterations until every centroid moves less
// than tol or max_iter is reached. An emptied cluster is re-seeded at the
// point farthest from its current centroid.
KMeansResult kmeans(const Matrix& embeddings, const KMeansOptions& options);

// 2 I(A; B) / (H(A) + H(B)), natural log; 0 when both entropies vanish.
double nmi(std::span<const std::size_t> assignments, std::span<const Label> labels);

// Pair-counting F1 of co-clustering decisions; 0 when no true positives.
double pairwise_f1(std::span<const std::size_t> assignments, std::span<const Label> labels);

struct ClusteringReport {
  double nmi = 0.0;
  double f1 = 0.0;
  std::size_t clusters = 0;
};

// k-means with one cluster per distinct label, then NMI and F1.
ClusteringReport evaluate_clustering(const Matrix& embeddings, std::span<const Label> labels, std::uint64_t seed);

// Rows scaled to unit length (zero rows left as they are).
Matrix l2_normalized(const Matrix& embeddings);

}  // namespace ecaml
