#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ecaml/matrix.hpp"
#include "ecaml/types.hpp"

namespace ecaml {

enum class Split { seen, unseen };
enum class SplitFilter { seen, unseen, all };

std::string_view to_string(Split s);
Split parse_split(std::string_view token);  // throws ParseError

// Feature rows with class labels and a seen/unseen assignment per class.
struct Dataset {
  Matrix features;
  std::vector<Label> labels;
  std::map<Label, Split> split;

  std::size_t size() const { return labels.size(); }
  std::size_t input_dim() const { return features.cols(); }

  // Enforces: one label per row, every label assigned to a split, both
  // splits non-empty, every class has at least two samples.
  void validate() const;

  std::vector<std::size_t> rows_in(SplitFilter filter) const;
  std::vector<Label> classes_in(SplitFilter filter) const;

  bool operator==(const Dataset&) const = default;
};

// Rows of one split, in dataset order.
struct SplitView {
  Matrix features;
  std::vector<Label> labels;
};

SplitView view_of(const Dataset& data, SplitFilter filter);

}  // namespace ecaml
