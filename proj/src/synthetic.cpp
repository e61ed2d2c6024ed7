#include "ecaml/synthetic.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ecaml/kernels.hpp"

namespace ecaml {

void SynthConfig::validate() const {
  if (seen_classes < 2) throw ConfigError("data.seen_classes must be >= 2");
  if (unseen_classes < 2) throw ConfigError("data.unseen_classes must be >= 2");
  if (samples_per_class < 4) throw ConfigError("data.samples_per_class must be >= 4");
  if (d_general < 2) throw ConfigError("data.d_general must be >= 2");
  if (d_shortcut < 1) throw ConfigError("data.d_shortcut must be >= 1");
  if (!(noise_sigma > 0.0)) throw ConfigError("data.noise_sigma must be > 0");
  if (!(shortcut_gain > 0.0)) throw ConfigError("data.shortcut_gain must be > 0");
}

namespace {

std::vector<double> random_direction(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  while (norm < 1e-12) {
    for (double& x : v) x = normal(rng);
    norm = std::sqrt(kernels::squared_norm(v));
  }
  for (double& x : v) x /= norm;
  return v;
}

}  // namespace

Dataset generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const std::size_t classes = cfg.seen_classes + cfg.unseen_classes;

  std::vector<std::vector<double>> prototypes;
  for (std::size_t c = 0; c < classes; ++c) prototypes.push_back(random_direction(cfg.d_general, rng));
  std::vector<std::vector<double>> codes;
  for (std::size_t c = 0; c < cfg.seen_classes; ++c) {
    auto code = random_direction(cfg.d_shortcut, rng);
    for (double& x : code) x *= cfg.shortcut_gain;
    codes.push_back(std::move(code));
  }

  Dataset data;
  data.features = Matrix(classes * cfg.samples_per_class, cfg.input_dim());
  data.labels.reserve(classes * cfg.samples_per_class);
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
  std::size_t row = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    const bool seen = c < cfg.seen_classes;
    const auto label = static_cast<Label>(c);
    data.split[label] = seen ? Split::seen : Split::unseen;
    for (std::size_t s = 0; s < cfg.samples_per_class; ++s, ++row) {
      auto r = data.features.row(row);
      for (std::size_t d = 0; d < cfg.d_general; ++d) r[d] = prototypes[c][d] + noise(rng);
      for (std::size_t d = 0; d < cfg.d_shortcut; ++d) {
        r[cfg.d_general + d] = (seen ? codes[c][d] : 0.0) + noise(rng);
      }
      data.labels.push_back(label);
    }
  }
  data.validate();
  return data;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  data.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "label,split";
  for (std::size_t d = 0; d < data.input_dim(); ++d) out << ",f" << d;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i] << ',' << to_string(data.split.at(data.labels[i]));
    for (double v : data.features.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

template <class T>
T parse_number(std::string_view cell, std::size_t line_no, const char* what) {
  T value{};
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("cannot parse " + std::string(what) + " '" + std::string(cell) + "'", line_no);
  }
  return value;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");

  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  if (!std::getline(in, line)) throw ParseError("empty file '" + path.string() + "'");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    const auto header = split_commas(line);
    if (header.size() < 3 || header[0] != "label" || header[1] != "split") {
      throw ParseError("header must start with label,split,f0", line_no);
    }
    for (std::size_t d = 2; d < header.size(); ++d) {
      if (header[d] != "f" + std::to_string(d - 2)) {
        throw ParseError("unexpected header column '" + std::string(header[d]) + "'", line_no);
      }
    }
    width = header.size() - 2;
  }

  Dataset data;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != width + 2) {
      throw ParseError("expected " + std::to_string(width + 2) + " columns, found " + std::to_string(cells.size()),
                       line_no);
    }
    const auto label = parse_number<Label>(cells[0], line_no, "label");
    Split s;
    try {
      s = parse_split(cells[1]);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
    if (auto [it, inserted] = data.split.emplace(label, s); !inserted && it->second != s) {
      throw ParseError("class " + std::to_string(label) + " appears in both seen and unseen splits", line_no);
    }
    data.labels.push_back(label);
    for (std::size_t d = 0; d < width; ++d) values.push_back(parse_number<double>(cells[d + 2], line_no, "feature"));
  }
  if (data.labels.empty()) throw ParseError("no data rows in '" + path.string() + "'");
  data.features = Matrix(data.labels.size(), width, std::move(values));
  try {
    data.validate();
  } catch (const InputError& e) {
    throw ParseError(std::string("invalid dataset: ") + e.what());
  }
  return data;
}

}  // namespace ecaml
