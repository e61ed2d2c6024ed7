#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ecaml {

using Label = std::int64_t;

// The rows of one class inside a batch.
struct ClassGroup {
  Label label = 0;
  std::vector<std::size_t> rows;
};

}  // namespace ecaml
