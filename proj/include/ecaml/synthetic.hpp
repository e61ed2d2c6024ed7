#pragma once

// A zero-shot benchmark with a planted shortcut. Every class has a
// prototype in a "general" subspace; seen classes additionally carry a
// strong class code in a few "shortcut" dimensions, which unseen classes
// fill with noise. A model that leans on the shortcut separates the seen
// classes easily and transfers badly.

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "ecaml/dataset.hpp"

namespace ecaml {

struct SynthConfig {
  std::size_t seen_classes = 8;
  std::size_t unseen_classes = 8;
  std::size_t samples_per_class = 32;
  std::size_t d_general = 16;
  std::size_t d_shortcut = 4;
  double noise_sigma = 0.3;
  double shortcut_gain = 4.0;
  std::uint64_t seed = 0;

  std::size_t input_dim() const { return d_general + d_shortcut; }
  void validate() const;
};

// Columns [0, d_general) are general, [d_general, input_dim) shortcut.
// Labels 0..seen-1 are seen, the rest unseen.
Dataset generate(const SynthConfig& cfg);

// CSV with header `label,split,f0,f1,...`, 17 significant digits.
void save_csv(const Dataset& data, const std::filesystem::path& path);
Dataset load_csv(const std::filesystem::path& path);

}  // namespace ecaml
