#include "ecaml/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "ecaml/errors.hpp"

namespace ecaml {

using nlohmann::json;

namespace {

// Reads the keys of one JSON object, remembering which were consumed so the
// leftovers can be reported.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) fail(path_, "expected an object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(at(key), "expected a number");
      out = v->get<double>();
    }
  }

  template <typename U>
  void unsigned_int(const std::string& key, U& out) {
    if (const json* v = find(key)) out = as_unsigned<U>(*v, at(key));
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(at(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(at(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  template <typename U>
  void unsigned_list(const std::string& key, std::vector<U>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(at(key), "expected an array");
      std::vector<U> values;
      for (std::size_t i = 0; i < v->size(); ++i) {
        values.push_back(as_unsigned<U>((*v)[i], at(key) + "[" + std::to_string(i) + "]"));
      }
      out = std::move(values);
    }
  }

  void number_list(const std::string& key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(at(key), "expected an array");
      std::vector<double> values;
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number()) fail(at(key) + "[" + std::to_string(i) + "]", "expected a number");
        values.push_back((*v)[i].get<double>());
      }
      out = std::move(values);
    }
  }

  void reject_unknown() const {
    for (auto it = doc_.begin(); it != doc_.end(); ++it) {
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
    }
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] static void fail(const std::string& path, const std::string& why) {
    throw ConfigError((path.empty() ? std::string("<root>") : path) + ": " + why);
  }

 private:
  template <typename U>
  static U as_unsigned(const json& v, const std::string& path) {
    if (v.is_number_unsigned()) return static_cast<U>(v.get<std::uint64_t>());
    if (v.is_number_integer()) fail(path, "must be >= 0");
    fail(path, "expected a non-negative integer");
  }

  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_mlp(Section s, MlpConfig& mlp) {
  s.unsigned_list("hidden_dims", mlp.hidden_dims);
  s.unsigned_int("embedding_dim", mlp.embedding_dim);
  s.reject_unknown();
}

void read_train(Section s, TrainConfig& t) {
  s.unsigned_int("iterations", t.iterations);
  s.number("lr", t.lr);
  s.number("weight_decay", t.weight_decay);
  s.number("last_layer_lr_mult", t.last_layer_lr_mult);
  s.unsigned_int("eval_every", t.eval_every);
  s.unsigned_int("classes_per_batch", t.batch.classes_per_batch);
  s.unsigned_int("instances_per_class", t.batch.instances_per_class);
  s.unsigned_int("seed", t.seed);
  s.reject_unknown();
}

void read_loss(Section s, LossConfig& l) {
  std::string kind = to_string(l.kind);
  s.string("kind", kind);
  try {
    l.kind = parse_loss_kind(kind);
  } catch (const ConfigError& e) {
    Section::fail(s.at("kind"), e.what());
  }
  s.number("margin", l.triplet.margin);
  s.number("alpha", l.binomial.alpha);
  s.number("beta", l.binomial.beta);
  s.number("eta_pos", l.binomial.eta_pos);
  s.number("eta_neg", l.binomial.eta_neg);
  s.reject_unknown();
}

void read_ec(Section s, EcConfig& ec) {
  s.number("lambda", ec.lambda);
  std::string mode = ec.pair_mode == PairMode::all_unordered ? "all" : "sample_k";
  s.string("pair_mode", mode);
  if (mode == "all") {
    ec.pair_mode = PairMode::all_unordered;
  } else if (mode == "sample_k") {
    ec.pair_mode = PairMode::sample_k;
  } else {
    Section::fail(s.at("pair_mode"), "expected \"all\" or \"sample_k\", got \"" + mode + "\"");
  }
  s.unsigned_int("sample_k", ec.sample_k);
  s.boolean("log_form", ec.log_form);
  s.boolean("stop_gradient", ec.stop_gradient_before_last_layer);
  s.reject_unknown();
}

void read_data(Section s, SynthConfig& d) {
  s.unsigned_int("seen_classes", d.seen_classes);
  s.unsigned_int("unseen_classes", d.unseen_classes);
  s.unsigned_int("samples_per_class", d.samples_per_class);
  s.unsigned_int("d_general", d.d_general);
  s.unsigned_int("d_shortcut", d.d_shortcut);
  s.number("noise_sigma", d.noise_sigma);
  s.number("shortcut_gain", d.shortcut_gain);
  s.unsigned_int("seed", d.seed);
  s.reject_unknown();
}

void read_eval(Section s, TrainConfig& t, AblationGrid& g) {
  s.unsigned_list("recall_ks", t.recall_ks);
  s.number_list("lambdas", g.lambdas);
  s.unsigned_list("dims", g.dims);
  s.unsigned_list("seeds", g.seeds);
  s.reject_unknown();
}

}  // namespace

LossKind parse_loss_kind(const std::string& name) {
  if (name == "triplet") return LossKind::triplet;
  if (name == "npair") return LossKind::npair;
  if (name == "binomial") return LossKind::binomial;
  throw ConfigError("unknown loss \"" + name + "\" (expected triplet, npair or binomial)");
}

void RunConfig::validate() const {
  MlpConfig probe = mlp;
  probe.input_dim = 1;
  probe.validate();
  train.validate();
  data.validate();
  if (grid.seeds.empty()) throw ConfigError("eval.seeds must not be empty");
  if (grid.lambdas.empty()) throw ConfigError("eval.lambdas must not be empty");
  if (grid.dims.empty()) throw ConfigError("eval.dims must not be empty");
  for (double l : grid.lambdas) {
    if (!(l >= 0.0)) throw ConfigError("eval.lambdas entries must be >= 0");
  }
  for (std::size_t d : grid.dims) {
    if (d == 0) throw ConfigError("eval.dims entries must be >= 1");
  }
}

RunConfig parse_config(const json& doc) {
  RunConfig cfg;
  Section root(doc, "");
  if (const json* v = root.find("mlp")) read_mlp(Section(*v, "mlp"), cfg.mlp);
  if (const json* v = root.find("train")) read_train(Section(*v, "train"), cfg.train);
  if (const json* v = root.find("loss")) read_loss(Section(*v, "loss"), cfg.train.loss);
  if (const json* v = root.find("ec")) read_ec(Section(*v, "ec"), cfg.train.ec);
  if (const json* v = root.find("data")) read_data(Section(*v, "data"), cfg.data);
  if (const json* v = root.find("eval")) read_eval(Section(*v, "eval"), cfg.train, cfg.grid);
  root.reject_unknown();
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

json to_json(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  return json{
      {"mlp", {{"hidden_dims", cfg.mlp.hidden_dims}, {"embedding_dim", cfg.mlp.embedding_dim}}},
      {"train",
       {{"iterations", t.iterations},
        {"lr", t.lr},
        {"weight_decay", t.weight_decay},
        {"last_layer_lr_mult", t.last_layer_lr_mult},
        {"eval_every", t.eval_every},
        {"classes_per_batch", t.batch.classes_per_batch},
        {"instances_per_class", t.batch.instances_per_class},
        {"seed", t.seed}}},
      {"loss",
       {{"kind", to_string(t.loss.kind)},
        {"margin", t.loss.triplet.margin},
        {"alpha", t.loss.binomial.alpha},
        {"beta", t.loss.binomial.beta},
        {"eta_pos", t.loss.binomial.eta_pos},
        {"eta_neg", t.loss.binomial.eta_neg}}},
      {"ec",
       {{"lambda", t.ec.lambda},
        {"pair_mode", t.ec.pair_mode == PairMode::all_unordered ? "all" : "sample_k"},
        {"sample_k", t.ec.sample_k},
        {"log_form", t.ec.log_form},
        {"stop_gradient", t.ec.stop_gradient_before_last_layer}}},
      {"data",
       {{"seen_classes", cfg.data.seen_classes},
        {"unseen_classes", cfg.data.unseen_classes},
        {"samples_per_class", cfg.data.samples_per_class},
        {"d_general", cfg.data.d_general},
        {"d_shortcut", cfg.data.d_shortcut},
        {"noise_sigma", cfg.data.noise_sigma},
        {"shortcut_gain", cfg.data.shortcut_gain},
        {"seed", cfg.data.seed}}},
      {"eval",
       {{"recall_ks", t.recall_ks}, {"lambdas", cfg.grid.lambdas}, {"dims", cfg.grid.dims}, {"seeds", cfg.grid.seeds}}},
  };
}

}  // namespace ecaml
