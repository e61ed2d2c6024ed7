#include "ecaml/dataset.hpp"

#include <set>
#include <string>

namespace ecaml {

std::string_view to_string(Split s) { return s == Split::seen ? "seen" : "unseen"; }

Split parse_split(std::string_view token) {
  if (token == "seen") return Split::seen;
  if (token == "unseen") return Split::unseen;
  throw ParseError("unknown split token '" + std::string(token) + "' (expected seen or unseen)");
}

void Dataset::validate() const {
  if (features.rows() != labels.size()) throw InputError("dataset has a different number of feature rows and labels");
  if (labels.empty()) throw InputError("dataset is empty");
  if (features.cols() == 0) throw InputError("dataset has no feature columns");
  std::map<Label, std::size_t> counts;
  for (Label l : labels) ++counts[l];
  bool any_seen = false, any_unseen = false;
  for (const auto& [label, n] : counts) {
    auto it = split.find(label);
    if (it == split.end()) throw InputError("class " + std::to_string(label) + " has no split assignment");
    if (n < 2) throw InputError("class " + std::to_string(label) + " has fewer than 2 samples");
    (it->second == Split::seen ? any_seen : any_unseen) = true;
  }
  if (!any_seen || !any_unseen) throw InputError("dataset needs both seen and unseen classes");
  if (!all_finite(features.flat())) throw InputError("dataset contains non-finite features");
}

namespace {

bool keep(const Dataset& d, Label l, SplitFilter f) {
  if (f == SplitFilter::all) return true;
  const Split s = d.split.at(l);
  return (f == SplitFilter::seen) == (s == Split::seen);
}

}  // namespace

std::vector<std::size_t> Dataset::rows_in(SplitFilter filter) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (keep(*this, labels[i], filter)) rows.push_back(i);
  }
  return rows;
}

std::vector<Label> Dataset::classes_in(SplitFilter filter) const {
  std::set<Label> out;
  for (Label l : labels) {
    if (keep(*this, l, filter)) out.insert(l);
  }
  return {out.begin(), out.end()};
}

SplitView view_of(const Dataset& data, SplitFilter filter) {
  const auto rows = data.rows_in(filter);
  SplitView v{gather_rows(data.features, rows), {}};
  v.labels.reserve(rows.size());
  for (std::size_t r : rows) v.labels.push_back(data.labels[r]);
  return v;
}

}  // namespace ecaml
