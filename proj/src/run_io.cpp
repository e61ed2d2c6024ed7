#include "ecaml/run_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ecaml/errors.hpp"

namespace ecaml {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double to_double(const std::string& s, std::size_t line) {
  if (s == "nan") return std::nan("");
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw ParseError("bad number \"" + s + "\"", line);
  return v;
}

std::size_t to_index(const std::string& s, std::size_t line) {
  std::size_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw ParseError("bad index \"" + s + "\"", line);
  return v;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return in;
}

const char* kHistoryHeader = "iteration,seen_r1,unseen_r1,nmi,f1,train_loss,ec_value";

}  // namespace

void prepare_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir)) {
      if (!force) throw IoError(dir.string() + " already exists; pass --force to overwrite");
      for (const auto& entry : fs::directory_iterator(dir)) fs::remove_all(entry.path());
    }
  }
  fs::create_directories(dir);
}

void write_history_csv(const fs::path& path, const RunHistory& history) {
  std::ofstream out = open_out(path);
  out << kHistoryHeader << '\n';
  for (const EvalRecord& r : history.evals) {
    out << r.iteration << ',' << fmt(r.seen_r1) << ',' << fmt(r.unseen_r1) << ',' << fmt(r.nmi) << ',' << fmt(r.f1)
        << ',' << fmt(r.train_loss) << ',' << fmt(r.ec_value) << '\n';
  }
}

std::vector<EvalRecord> read_history_csv(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != kHistoryHeader) throw ParseError("unexpected history header", 1);
  std::vector<EvalRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_commas(line);
    if (f.size() != 7) throw ParseError("expected 7 fields, got " + std::to_string(f.size()), lineno);
    EvalRecord r;
    r.iteration = to_index(f[0], lineno);
    r.seen_r1 = to_double(f[1], lineno);
    r.unseen_r1 = to_double(f[2], lineno);
    r.nmi = to_double(f[3], lineno);
    r.f1 = to_double(f[4], lineno);
    r.train_loss = to_double(f[5], lineno);
    r.ec_value = to_double(f[6], lineno);
    out.push_back(r);
  }
  return out;
}

void save_weights_csv(const fs::path& path, const MlpParams& params) {
  std::ofstream out = open_out(path);
  out << "layer,tensor,row,col,value\n";
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const DenseLayer& layer = params.layers[l];
    for (std::size_t r = 0; r < layer.weight.rows(); ++r) {
      for (std::size_t c = 0; c < layer.weight.cols(); ++c) {
        out << l << ",weight," << r << ',' << c << ',' << fmt(layer.weight(r, c)) << '\n';
      }
    }
    for (std::size_t c = 0; c < layer.bias.size(); ++c) {
      out << l << ",bias,0," << c << ',' << fmt(layer.bias[c]) << '\n';
    }
  }
}

MlpParams load_weights_csv(const fs::path& path, bool normalize_output) {
  struct Entry {
    std::size_t layer, row, col;
    bool bias;
    double value;
  };
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != "layer,tensor,row,col,value") {
    throw ParseError("unexpected weights header", 1);
  }
  std::vector<Entry> entries;
  std::size_t layers = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_commas(line);
    if (f.size() != 5) throw ParseError("expected 5 fields, got " + std::to_string(f.size()), lineno);
    if (f[1] != "weight" && f[1] != "bias") throw ParseError("unknown tensor \"" + f[1] + "\"", lineno);
    Entry e{to_index(f[0], lineno), to_index(f[2], lineno), to_index(f[3], lineno), f[1] == "bias",
            to_double(f[4], lineno)};
    layers = std::max(layers, e.layer + 1);
    entries.push_back(e);
  }
  if (layers == 0) throw ParseError("no weights in " + path.string());

  std::vector<std::size_t> rows(layers, 0), cols(layers, 0);
  for (const Entry& e : entries) {
    if (!e.bias) {
      rows[e.layer] = std::max(rows[e.layer], e.row + 1);
      cols[e.layer] = std::max(cols[e.layer], e.col + 1);
    }
  }
  MlpParams params;
  params.normalize_output = normalize_output;
  for (std::size_t l = 0; l < layers; ++l) {
    if (l > 0 && rows[l] != cols[l - 1]) throw ShapeError("layer widths in " + path.string() + " do not chain");
    params.layers.push_back({Matrix(rows[l], cols[l], std::nan("")), std::vector<double>(cols[l], std::nan(""))});
  }
  for (const Entry& e : entries) {
    DenseLayer& layer = params.layers[e.layer];
    if (e.bias) {
      if (e.col >= layer.bias.size()) throw ShapeError("bias index out of range");
      layer.bias[e.col] = e.value;
    } else {
      layer.weight(e.row, e.col) = e.value;
    }
  }
  if (!params.all_finite()) throw ParseError("missing or non-finite weights in " + path.string());
  return params;
}

json metrics_json(const FinalMetrics& m) {
  json recall = json::object();
  for (const auto& [k, v] : m.unseen_recall) recall[std::to_string(k)] = v;
  return json{{"seen_r1", m.seen_r1}, {"unseen_r1", m.unseen_r1}, {"nmi", m.nmi}, {"f1", m.f1},
              {"unseen_recall", recall}};
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out = open_out(path);
  out << doc.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_run(const fs::path& dir, const RunConfig& cfg, const TrainResult& result) {
  write_history_csv(dir / "history.csv", result.history);
  save_weights_csv(dir / "weights.csv", result.params);
  json summary{{"seed", cfg.train.seed},
               {"iterations", cfg.train.iterations},
               {"loss", to_string(cfg.train.loss.kind)},
               {"lambda", cfg.train.ec.lambda},
               {"normalize_output", result.params.normalize_output},
               {"final", metrics_json(result.final_metrics)},
               {"config", to_json(cfg)}};
  write_json(dir / "summary.json", summary);
}

}  // namespace ecaml
