#include "ecaml/sampling.hpp"

#include <map>
#include <sstream>

namespace ecaml {

void BatchSpec::validate() const {
  if (classes_per_batch < 2) throw ConfigError("batch.classes_per_batch must be >= 2");
  if (instances_per_class < 1) throw ConfigError("batch.instances_per_class must be >= 1");
}

namespace {

// Moves a uniform sample of k elements to the front of v.
template <class T>
void partial_shuffle(std::vector<T>& v, std::size_t k, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, v.size() - 1);
    std::swap(v[i], v[pick(rng)]);
  }
}

}  // namespace

Batch sample_batch(const Dataset& data, const BatchSpec& spec, SplitFilter filter, std::mt19937_64& rng) {
  spec.validate();
  std::map<Label, std::vector<std::size_t>> by_class;
  for (std::size_t r : data.rows_in(filter)) by_class[data.labels[r]].push_back(r);

  std::vector<Label> eligible;
  for (const auto& [label, rows] : by_class) {
    if (rows.size() >= spec.instances_per_class) eligible.push_back(label);
  }
  if (eligible.size() < spec.classes_per_batch) {
    std::ostringstream msg;
    msg << "need " << spec.classes_per_batch << " classes with at least " << spec.instances_per_class
        << " samples, split has only " << eligible.size() << " (short by "
        << spec.classes_per_batch - eligible.size() << ")";
    throw SamplingError(msg.str());
  }

  partial_shuffle(eligible, spec.classes_per_batch, rng);
  Batch batch;
  const std::size_t k = spec.instances_per_class;
  batch.features = Matrix(spec.classes_per_batch * k, data.input_dim());
  for (std::size_t g = 0; g < spec.classes_per_batch; ++g) {
    const Label label = eligible[g];
    std::vector<std::size_t> pool = by_class[label];
    partial_shuffle(pool, k, rng);
    ClassGroup group{label, {}};
    for (std::size_t t = 0; t < k; ++t) {
      const std::size_t row = batch.labels.size();
      const auto src = data.features.row(pool[t]);
      std::copy(src.begin(), src.end(), batch.features.row(row).begin());
      batch.labels.push_back(label);
      batch.source_rows.push_back(pool[t]);
      group.rows.push_back(row);
    }
    batch.groups.push_back(std::move(group));
  }
  return batch;
}

std::vector<Triplet> build_triplets(const Batch& batch, std::mt19937_64& rng) {
  std::vector<Triplet> out;
  if (batch.groups.size() < 2) return out;
  const std::size_t n = batch.labels.size();
  for (const ClassGroup& g : batch.groups) {
    const std::size_t outside = n - g.rows.size();
    for (std::size_t a : g.rows) {
      for (std::size_t p : g.rows) {
        if (a == p) continue;
        // Draw uniformly among rows of other classes.
        std::uniform_int_distribution<std::size_t> pick(0, outside - 1);
        std::size_t idx = pick(rng);
        std::size_t neg = 0;
        for (std::size_t r = 0; r < n; ++r) {
          if (batch.labels[r] == g.label) continue;
          if (idx-- == 0) {
            neg = r;
            break;
          }
        }
        out.push_back({a, p, neg});
      }
    }
  }
  return out;
}

std::vector<NPairTuple> build_npair_tuples(const Batch& batch) {
  std::vector<NPairTuple> out;
  for (const ClassGroup& g : batch.groups) {
    if (g.rows.size() != 2) throw PreconditionError("N-pair layout needs exactly 2 instances per class");
  }
  for (std::size_t a = 0; a < batch.groups.size(); ++a) {
    NPairTuple t{batch.groups[a].rows[0], batch.groups[a].rows[1], {}};
    for (std::size_t b = 0; b < batch.groups.size(); ++b) {
      if (b != a) t.negatives.push_back(batch.groups[b].rows[1]);
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Pair> build_contrastive_pairs(const Batch& batch) {
  std::vector<Pair> out;
  const std::size_t n = batch.labels.size();
  out.reserve(n * (n - (n > 0 ? 1 : 0)) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) out.push_back({i, j, batch.labels[i] == batch.labels[j]});
  }
  return out;
}

}  // namespace ecaml
