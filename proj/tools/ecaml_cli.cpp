// ecaml: generate data, train, evaluate, ablate, verify and report.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ecaml/config.hpp"
#include "ecaml/errors.hpp"
#include "ecaml/eval.hpp"
#include "ecaml/experiments.hpp"
#include "ecaml/run_io.hpp"
#include "ecaml/synthetic.hpp"
#include "ecaml/verify.hpp"
#include "svg_chart.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ecaml;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::string data;
  std::string out;
  std::string run;
  std::optional<std::uint64_t> seed;
  std::string lambdas;
  std::string dims;
  std::size_t jobs = 1;
  std::size_t fuzz = 1000;
  bool force = false;
  std::vector<std::string> inputs;
};

RunConfig config_from(const Options& o) {
  RunConfig cfg = o.config.empty() ? parse_config(json::object()) : load_config(o.config);
  if (o.seed) cfg.train.seed = *o.seed;
  cfg.mlp.seed = cfg.train.seed;
  return cfg;
}

// --data if given, otherwise the synthetic benchmark from the data section.
Dataset dataset_from(const Options& o, const RunConfig& cfg) {
  if (!o.data.empty()) return load_csv(o.data);
  return generate(cfg.data);
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

void claim_output(const fs::path& out, bool force, bool directory) {
  if (fs::exists(out) && !force) {
    if (!directory || !fs::is_directory(out) || !fs::is_empty(out)) {
      throw UsageError(out.string() + " already exists; pass --force to overwrite");
    }
  }
  if (directory) {
    prepare_output_dir(out, true);
  } else if (out.has_parent_path()) {
    fs::create_directories(out.parent_path());
  }
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof()) throw UsageError(std::string(flag) + ": bad entry \"" + item + "\"");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string(flag) + " must not be empty");
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::string metrics_header(const std::vector<std::size_t>& ks) {
  std::string h = "seen_r1,unseen_r1,nmi,f1";
  for (std::size_t k : ks) h += ",unseen_recall_at_" + std::to_string(k);
  return h;
}

std::string metrics_cells(const FinalMetrics& m, const std::vector<std::size_t>& ks) {
  std::string s = fmt(m.seen_r1) + "," + fmt(m.unseen_r1) + "," + fmt(m.nmi) + "," + fmt(m.f1);
  for (std::size_t k : ks) s += "," + fmt(m.unseen_recall.at(k));
  return s;
}

int cmd_gen_data(const Options& o) {
  require(o.out, "--out");
  RunConfig cfg = config_from(o);
  if (o.seed) cfg.data.seed = *o.seed;
  claim_output(o.out, o.force, false);
  Dataset d = generate(cfg.data);
  save_csv(d, o.out);
  std::cout << "wrote " << d.size() << " rows (" << d.classes_in(SplitFilter::seen).size() << " seen, "
            << d.classes_in(SplitFilter::unseen).size() << " unseen classes) to " << o.out << "\n";
  return 0;
}

int cmd_train(const Options& o) {
  require(o.out, "--out");
  RunConfig cfg = config_from(o);
  Dataset data = dataset_from(o, cfg);
  claim_output(o.out, o.force, true);
  TrainResult r = train(data, cfg.mlp, cfg.train);
  write_run(o.out, cfg, r);
  std::cout << "seen R@1 " << r.final_metrics.seen_r1 << "  unseen R@1 " << r.final_metrics.unseen_r1 << "  NMI "
            << r.final_metrics.nmi << "  F1 " << r.final_metrics.f1 << "\n";
  return 0;
}

int cmd_eval(const Options& o) {
  require(o.run, "--run");
  require(o.data, "--data");
  fs::path run = o.run;
  json summary = read_json(run / "summary.json");
  RunConfig cfg = parse_config(summary.at("config"));
  MlpParams params = load_weights_csv(run / "weights.csv", summary.at("normalize_output").get<bool>());
  Dataset data = load_csv(o.data);
  FinalMetrics m = evaluate_model(params, data, cfg.train);

  json recall = json::object();
  for (const auto& [k, v] : m.unseen_recall) recall[std::to_string(k)] = v;
  json report{{"retrieval", {{"recall_at", recall}, {"queries", data.rows_in(SplitFilter::unseen).size()}}},
              {"clustering",
               {{"nmi", m.nmi}, {"f1", m.f1}, {"clusters", data.classes_in(SplitFilter::unseen).size()}}},
              {"seen_r1", m.seen_r1}};
  if (o.out.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    claim_output(o.out, o.force, false);
    write_json(o.out, report);
  }
  return 0;
}

int cmd_ablate(const Options& o) {
  require(o.out, "--out");
  if (!o.lambdas.empty() && !o.dims.empty()) throw UsageError("--lambdas and --dims are mutually exclusive");
  RunConfig cfg = config_from(o);
  std::vector<std::uint64_t> seeds = o.seed ? std::vector<std::uint64_t>{*o.seed} : cfg.grid.seeds;
  Dataset data = dataset_from(o, cfg);
  const fs::path out = o.out;
  claim_output(out, o.force, true);
  const auto& ks = cfg.train.recall_ks;

  auto sink_for = [&](auto dir_name) {
    return [&, dir_name](const MlpConfig& m, const TrainConfig& t, const TrainResult& r) {
      RunConfig run_cfg = cfg;
      run_cfg.mlp = m;
      run_cfg.train = t;
      fs::path dir = out / "runs" / dir_name(m, t);
      fs::create_directories(dir);
      write_run(dir, run_cfg, r);
    };
  };

  if (!o.dims.empty()) {
    auto dims = parse_list<std::size_t>(o.dims, "--dims");
    double ec_lambda = cfg.train.ec.lambda;
    if (ec_lambda == 0.0) throw ConfigError("ec.lambda: the embedding-size sweep needs a nonzero ECAML lambda");
    auto rows = embedding_size_sweep(data, cfg.mlp, cfg.train, dims, seeds, o.jobs,
                                     sink_for([](const MlpConfig& m, const TrainConfig& t) {
                                       return "dim_" + std::to_string(m.embedding_dim) + "_" +
                                              (t.ec.lambda == 0.0 ? "baseline" : "ecaml") +
                                              "_seed_" + std::to_string(t.seed);
                                     }));
    std::ostringstream csv;
    csv << "embedding_dim,arm,seed," << metrics_header(ks) << "\n";
    for (const SweepRow& r : rows) {
      csv << r.embedding_dim << ',' << (r.ecaml ? "ecaml" : "baseline") << ',' << r.seed << ','
          << metrics_cells(r.metrics, ks) << "\n";
    }
    write_text(out / "sweep.csv", csv.str());
    std::cout << "dim  baseline_unseen_r1  ecaml_unseen_r1 (median over " << seeds.size() << " seeds)\n";
    for (std::size_t d : dims) {
      std::vector<double> base, ecaml;
      for (const SweepRow& r : rows) {
        if (r.embedding_dim == d) (r.ecaml ? ecaml : base).push_back(r.metrics.unseen_r1);
      }
      std::printf("%-4zu %-19.4f %.4f\n", d, median(base), median(ecaml));
    }
    return 0;
  }

  auto lambdas = o.lambdas.empty() ? cfg.grid.lambdas : parse_list<double>(o.lambdas, "--lambdas");
  auto rows = ablate_lambda(data, cfg.mlp, cfg.train, lambdas, seeds, o.jobs,
                            sink_for([](const MlpConfig&, const TrainConfig& t) {
                              return "lambda_" + short_num(t.ec.lambda) + "_seed_" + std::to_string(t.seed);
                            }));
  std::ostringstream csv;
  csv << "lambda,seed," << metrics_header(ks) << "\n";
  for (const LambdaRow& r : rows) csv << fmt(r.lambda) << ',' << r.seed << ',' << metrics_cells(r.metrics, ks) << "\n";
  write_text(out / "ablation.csv", csv.str());

  json table = json::array();
  std::cout << "lambda      seen_r1  unseen_r1  nmi     f1      (median over " << seeds.size() << " seeds)\n";
  for (double l : lambdas) {
    std::vector<double> seen, unseen, nmi, f1;
    for (const LambdaRow& r : rows) {
      if (r.lambda != l) continue;
      seen.push_back(r.metrics.seen_r1);
      unseen.push_back(r.metrics.unseen_r1);
      nmi.push_back(r.metrics.nmi);
      f1.push_back(r.metrics.f1);
    }
    table.push_back({{"lambda", l},
                     {"seen_r1", median(seen)},
                     {"unseen_r1", median(unseen)},
                     {"nmi", median(nmi)},
                     {"f1", median(f1)}});
    std::printf("%-11g %-8.4f %-10.4f %-7.4f %.4f\n", l, median(seen), median(unseen), median(nmi), median(f1));
  }
  write_json(out / "summary.json", {{"seeds", seeds}, {"medians", table}, {"config", to_json(cfg)}});
  return 0;
}

int cmd_verify(const Options& o) {
  VerifyReport report = run_property_suite(o.fuzz, o.seed.value_or(0));
  json doc = report.to_json();
  if (o.out.empty()) {
    std::cout << doc.dump(2) << "\n";
  } else {
    claim_output(o.out, o.force, false);
    write_json(o.out, doc);
  }
  for (const PropertyResult& p : report.properties) {
    std::fprintf(stderr, "%-4s %-28s %5zu instances  %zu violations  worst %.3g\n",
                 p.violations == 0 ? "ok" : "FAIL", p.name.c_str(), p.instances, p.violations, p.worst);
  }
  return report.ok() ? 0 : 1;
}

struct RunRecord {
  fs::path dir;
  json summary;
  std::vector<EvalRecord> history;
};

std::vector<RunRecord> collect_runs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> dirs;
  for (const std::string& in : inputs) {
    fs::path p = in;
    if (!fs::is_directory(p)) throw UsageError(in + " is not a directory");
    if (fs::exists(p / "history.csv")) {
      dirs.push_back(p);
      continue;
    }
    for (const auto& entry : fs::recursive_directory_iterator(p)) {
      if (entry.is_regular_file() && entry.path().filename() == "history.csv" &&
          fs::exists(entry.path().parent_path() / "summary.json")) {
        dirs.push_back(entry.path().parent_path());
      }
    }
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw UsageError("no run directories found");
  std::vector<RunRecord> runs;
  for (const fs::path& d : dirs) runs.push_back({d, read_json(d / "summary.json"), read_history_csv(d / "history.csv")});
  return runs;
}

int cmd_report(const Options& o) {
  require(o.out, "--out");
  if (o.inputs.empty()) throw UsageError("report needs at least one run directory");
  std::vector<RunRecord> runs = collect_runs(o.inputs);
  const fs::path out = o.out;
  claim_output(out, o.force, true);

  std::ostringstream csv;
  csv << "run,loss,lambda,seed,embedding_dim,iterations,seen_r1,unseen_r1,gap,nmi,f1\n";
  for (const RunRecord& r : runs) {
    const json& f = r.summary.at("final");
    double seen = f.at("seen_r1").get<double>(), unseen = f.at("unseen_r1").get<double>();
    csv << r.dir.string() << ',' << r.summary.at("loss").get<std::string>() << ','
        << fmt(r.summary.at("lambda").get<double>()) << ',' << r.summary.at("seed").get<std::uint64_t>() << ','
        << r.summary.at("config").at("mlp").at("embedding_dim").get<std::size_t>() << ','
        << r.summary.at("iterations").get<std::size_t>() << ',' << fmt(seen) << ',' << fmt(unseen) << ','
        << fmt(seen - unseen) << ',' << fmt(f.at("nmi").get<double>()) << ',' << fmt(f.at("f1").get<double>())
        << "\n";
  }
  write_text(out / "report.csv", csv.str());

  // One pair of curves per (loss, lambda, embedding size): median over the
  // runs in the group at each shared evaluation point.
  std::map<std::string, std::vector<const RunRecord*>> groups;
  for (const RunRecord& r : runs) {
    std::string key = r.summary.at("loss").get<std::string>() + " lambda=" +
                      short_num(r.summary.at("lambda").get<double>()) + " D=" +
                      std::to_string(r.summary.at("config").at("mlp").at("embedding_dim").get<std::size_t>());
    groups[key].push_back(&r);
  }
  std::vector<tools::Series> series;
  std::size_t color = 0;
  for (const auto& [key, members] : groups) {
    std::size_t points = members.front()->history.size();
    for (const RunRecord* m : members) points = std::min(points, m->history.size());
    tools::Series seen{key + " seen", {}, {}, color, true};
    tools::Series unseen{key + " unseen", {}, {}, color, false};
    for (std::size_t i = 0; i < points; ++i) {
      std::vector<double> s, u;
      for (const RunRecord* m : members) {
        s.push_back(m->history[i].seen_r1);
        u.push_back(m->history[i].unseen_r1);
      }
      double x = static_cast<double>(members.front()->history[i].iteration);
      seen.x.push_back(x);
      seen.y.push_back(median(s));
      unseen.x.push_back(x);
      unseen.y.push_back(median(u));
    }
    series.push_back(std::move(seen));
    series.push_back(std::move(unseen));
    ++color;
  }
  write_text(out / "r1_curves.svg",
             tools::line_chart_svg("Recall@1 during training (median over runs)", "iteration", "Recall@1", series));
  std::cout << "aggregated " << runs.size() << " runs into " << (out / "report.csv").string() << " and "
            << (out / "r1_curves.svg").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-confusion metric learning lab"};
  app.require_subcommand(1);
  Options o;

  auto add_config = [&](CLI::App* c) { c->add_option("--config", o.config, "JSON run config")->check(CLI::ExistingFile); };
  auto add_seed = [&](CLI::App* c, const char* what) { c->add_option("--seed", o.seed, what); };
  auto add_force = [&](CLI::App* c) { c->add_flag("--force", o.force, "overwrite an existing --out"); };

  auto* gen = app.add_subcommand("gen-data", "write the synthetic seen/unseen benchmark as CSV");
  add_config(gen);
  add_seed(gen, "overrides data.seed");
  gen->add_option("--out", o.out, "CSV file")->required();
  add_force(gen);

  auto* tr = app.add_subcommand("train", "train one model and write a run directory");
  add_config(tr);
  tr->add_option("--data", o.data, "dataset CSV (default: generate from the data section)");
  tr->add_option("--out", o.out, "run directory")->required();
  add_seed(tr, "overrides train.seed");
  add_force(tr);

  auto* ev = app.add_subcommand("eval", "evaluate saved weights on a dataset");
  ev->add_option("--run", o.run, "run directory written by train")->required();
  ev->add_option("--data", o.data, "dataset CSV")->required();
  ev->add_option("--out", o.out, "JSON report (default: stdout)");
  add_force(ev);

  auto* ab = app.add_subcommand("ablate", "lambda grid or embedding-size sweep");
  add_config(ab);
  ab->add_option("--data", o.data, "dataset CSV (default: generate from the data section)");
  ab->add_option("--out", o.out, "output directory")->required();
  ab->add_option("--lambdas", o.lambdas, "comma-separated lambda grid (must include 0)");
  ab->add_option("--dims", o.dims, "comma-separated embedding sizes; runs the paired sweep instead");
  ab->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  add_seed(ab, "single seed instead of eval.seeds");
  add_force(ab);

  auto* ve = app.add_subcommand("verify", "randomized divergence and gradient property suite");
  ve->add_option("--fuzz", o.fuzz, "instances per divergence property");
  add_seed(ve, "fuzz seed");
  ve->add_option("--out", o.out, "JSON report (default: stdout)");
  add_force(ve);

  auto* rp = app.add_subcommand("report", "aggregate run directories into report.csv and r1_curves.svg");
  rp->add_option("runs", o.inputs, "run directories or directories containing them");
  rp->add_option("--out", o.out, "output directory")->required();
  add_force(rp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(o);
    if (tr->parsed()) return cmd_train(o);
    if (ev->parsed()) return cmd_eval(o);
    if (ab->parsed()) return cmd_ablate(o);
    if (ve->parsed()) return cmd_verify(o);
    if (rp->parsed()) return cmd_report(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
