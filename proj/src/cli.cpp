#include "ngram/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ngram/compose.hpp"
#include "ngram/data.hpp"
#include "ngram/errors.hpp"
#include "ngram/interpret.hpp"

namespace ngram {

namespace fs = std::filesystem;

std::string to_string(TaskKind task) {
  switch (task) {
    case TaskKind::Classify:
      return "classify";
    case TaskKind::Regress:
      return "regress";
    case TaskKind::LM:
      return "lm";
  }
  return "?";
}

TaskKind parse_task(const std::string& name) {
  for (TaskKind t : {TaskKind::Classify, TaskKind::Regress, TaskKind::LM}) {
    if (to_string(t) == name) return t;
  }
  throw ConfigError("task: unknown value '" + name + "' (classify, regress, lm)");
}

void RunConfig::validate() const {
  const std::string pair = "family=" + model.name() + " does not support task=" + to_string(task);
  if (model.arch == Arch::MVM_R && task != TaskKind::Classify) throw ConfigError(pair);
  if (model.arch == Arch::VA_W && task == TaskKind::LM) throw ConfigError(pair);
  if (model.activation == Activation::Identity && model.name() != "standard-E") {
    throw ConfigError("activation=identity requires family=standard-E");
  }
  if (task == TaskKind::Classify && classes < 2) throw ConfigError("classes must be >= 2");
  if (min_freq < 1) throw ConfigError("min_freq must be >= 1");
  if (model.hidden_dim < 1) throw ConfigError("hidden_dim must be positive");
  if (model.input_dim < 1) throw ConfigError("input_dim must be positive");
  if (train_path.empty()) throw ConfigError("train: a training data path is required");
  if (valid_path.empty()) throw ConfigError("valid: a validation data path is required");
  train.validate();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string canonical_key(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "family",   "task",      "input_dim", "hidden_dim", "window",   "bias",     "activation",  "classes",
      "min_freq", "train",     "valid",     "test",       "optimizer", "lr",      "beta1",       "beta2",
      "dropout",  "weight_decay", "spectral_norm", "bptt", "epochs",  "batch",    "context",     "seed",
      "threads",  "timing",    "out",       "checkpoint", "data",     "text",     "pos",         "neg",
      "mode",     "lexicon",   "ratio",     "n_train",    "n_valid",  "n_test",   "pad_to",      "not_weight",
      "very_weight", "max_modifiers", "synth_mode", "approx_mode"};
  return keys;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    T out;
    if constexpr (std::is_floating_point_v<T>) {
      out = static_cast<T>(std::stod(value, &used));
    } else {
      if (!value.empty() && value[0] == '-') throw std::invalid_argument(value);
      out = static_cast<T>(std::stoull(value, &used));
    }
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": cannot parse '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + value + "'");
}

// Settings with typed accessors and per-key error messages.
class Settings {
 public:
  explicit Settings(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  bool has(const std::string& k) const { return kv_.count(k) != 0; }
  std::string str(const std::string& k, const std::string& def = "") const {
    auto it = kv_.find(k);
    return it == kv_.end() ? def : it->second;
  }
  std::string required(const std::string& k) const {
    if (!has(k) || str(k).empty()) throw ConfigError(k + ": required");
    return str(k);
  }
  std::size_t size(const std::string& k, std::size_t def) const {
    return has(k) ? parse_number<std::size_t>(k, str(k)) : def;
  }
  double real(const std::string& k, double def) const { return has(k) ? parse_number<double>(k, str(k)) : def; }
  bool flag(const std::string& k, bool def = false) const { return has(k) ? parse_bool(k, str(k)) : def; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace

std::map<std::string, std::string> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config " + path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = canonical_key(trim(line.substr(0, eq)));
    if (!known_keys().count(key)) {
      throw ConfigError("config " + path.string() + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

RunConfig make_run_config(const std::map<std::string, std::string>& kv) {
  for (const auto& [k, v] : kv) {
    if (!known_keys().count(k)) throw ConfigError("unknown setting '" + k + "'");
  }
  const Settings s(kv);
  RunConfig rc;
  rc.model.set_family(s.str("family", "MVMA-G"));
  rc.task = parse_task(s.str("task", "classify"));
  rc.model.hidden_dim = s.size("hidden_dim", 32);
  rc.model.input_dim = s.size("input_dim", rc.model.hidden_dim);
  rc.model.window = s.size("window", 5);
  rc.model.has_bias = s.flag("bias");
  const std::string act = s.str("activation", "tanh");
  if (act == "identity") {
    rc.model.activation = Activation::Identity;
  } else if (act != "tanh") {
    throw ConfigError("activation: unknown value '" + act + "' (tanh, identity)");
  }
  rc.classes = s.size("classes", 2);
  rc.min_freq = s.size("min_freq", 1);
  rc.train_path = s.str("train");
  rc.valid_path = s.str("valid");
  rc.test_path = s.str("test");
  rc.out = s.str("out", "run");

  TrainConfig& t = rc.train;
  const bool lm = rc.task == TaskKind::LM;
  t.optimizer = parse_optimizer(s.str("optimizer", lm ? "adam" : "adagrad"));
  const double default_lr = t.optimizer == OptimizerKind::Adam ? 0.002 : t.optimizer == OptimizerKind::SGD ? 0.5 : 0.05;
  t.lr = s.real("lr", default_lr);
  t.beta1 = s.real("beta1", 0.9);
  t.beta2 = s.real("beta2", 0.999);
  t.dropout = s.real("dropout", 0.0);
  t.weight_decay = s.real("weight_decay", 0.0);
  t.spectral_norm = s.flag("spectral_norm");
  t.bptt = s.size("bptt", 35);
  t.epochs = s.size("epochs", lm ? 50 : 20);
  t.batch = s.size("batch", lm ? 20 : 32);
  t.context = parse_context_mode(s.str("context", "final"));
  t.seed = s.size("seed", 1);
  t.threads = s.size("threads", 1);
  t.record_time = s.flag("timing");
  if (t.spectral_norm && rc.model.arch != Arch::Standard) {
    throw ConfigError("spectral_norm applies to standard-* families only, not family=" + rc.model.name());
  }
  rc.validate();
  return rc;
}

namespace {

struct Context {
  std::ostream& out;
  std::ostream& err;
  Settings s;
  fs::path out_dir;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

std::string json_text(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

HeadKind head_for(TaskKind task) {
  switch (task) {
    case TaskKind::Classify:
      return HeadKind::Classifier;
    case TaskKind::Regress:
      return HeadKind::Regressor;
    case TaskKind::LM:
      return HeadKind::LanguageModel;
  }
  return HeadKind::Classifier;
}

std::vector<std::string> flatten(const std::vector<std::vector<std::string>>& docs) {
  std::vector<std::string> out;
  for (const auto& d : docs) out.insert(out.end(), d.begin(), d.end());
  return out;
}

std::vector<std::string> flatten(const std::vector<LabeledInstance>& data) {
  std::vector<std::string> out;
  for (const auto& inst : data) out.insert(out.end(), inst.tokens.begin(), inst.tokens.end());
  return out;
}

int cmd_train(Context& c) {
  std::map<std::string, std::string> kv;
  // Settings only exposes lookups, so rebuild the map of known keys.
  for (const auto& k : known_keys()) {
    if (c.s.has(k)) kv[k] = c.s.str(k);
  }
  kv["out"] = c.out_dir.string();
  const RunConfig rc = make_run_config(kv);
  ensure_dir(rc.out);

  Rng rng(rc.train.seed);
  Vocab vocab;
  std::vector<Example> train, valid, test;
  EncodedCorpus lm_train, lm_valid, lm_test;
  if (rc.task == TaskKind::LM) {
    const auto docs = read_lm_corpus(rc.train_path);
    vocab = build_vocab(flatten(docs), rc.min_freq);
    lm_train = encode_corpus(vocab, docs);
    lm_valid = encode_corpus(vocab, read_lm_corpus(rc.valid_path));
    if (!rc.test_path.empty()) lm_test = encode_corpus(vocab, read_lm_corpus(rc.test_path));
  } else {
    const auto raw = load_labeled_tsv(rc.train_path);
    vocab = build_vocab(flatten(raw), rc.min_freq);
    train = encode_examples(vocab, raw);
    valid = encode_examples(vocab, load_labeled_tsv(rc.valid_path));
    if (!rc.test_path.empty()) test = encode_examples(vocab, load_labeled_tsv(rc.test_path));
  }

  ModelSpec spec = rc.model;
  spec.vocab_size = vocab.size();
  Model model = Model::init(spec, rng);
  const HeadKind hk = head_for(rc.task);
  const std::size_t outputs = hk == HeadKind::Classifier ? rc.classes : hk == HeadKind::Regressor ? 1 : vocab.size();
  Head head = Head::init(hk, outputs, spec.hidden_dim, rng);

  std::ofstream metrics(rc.out / "metrics.jsonl");
  if (!metrics) throw IoError("cannot write " + (rc.out / "metrics.jsonl").string());
  auto sink = [&](const EpochRecord& r) {
    metrics << to_json_line(r) << '\n';
    metrics.flush();
  };
  const TrainResult res = rc.task == TaskKind::LM ? train_lm(model, head, lm_train, lm_valid, rc.train, sink)
                                                  : train_labeled(model, head, train, valid, rc.train, sink);

  const fs::path ckpt = rc.out / "checkpoint";
  std::ostringstream wd;
  wd << rc.train.weight_decay;
  save_checkpoint(ckpt, model, head,
                  {{"task", to_string(rc.task)},
                   {"seed", std::to_string(rc.train.seed)},
                   {"weight_decay", wd.str()},
                   {"context", to_string(rc.train.context)},
                   {"bptt", std::to_string(rc.train.bptt)},
                   {"best_epoch", std::to_string(res.best_epoch)}});
  vocab.save(ckpt / "vocab.tsv");

  nlohmann::ordered_json summary;
  summary["family"] = spec.name();
  summary["task"] = to_string(rc.task);
  summary["vocab_size"] = vocab.size();
  summary["best_epoch"] = res.best_epoch;
  summary["best_valid_metric"] = res.best_valid_metric;
  summary["diverged"] = res.diverged;
  if (!res.diverged) {
    if (rc.task == TaskKind::LM && !lm_test.ids.empty()) {
      const EvalResult e = evaluate_lm(model, head, lm_test, rc.train);
      summary["test_loss"] = e.loss;
      summary["test_metric"] = e.metric;
    } else if (!test.empty()) {
      const EvalResult e = evaluate_labeled(model, head, test, rc.train);
      summary["test_loss"] = e.loss;
      summary["test_metric"] = e.metric;
    }
  }
  write_text(rc.out / "summary.json", json_text(summary));

  if (res.diverged) {
    c.err << "training diverged (" << res.divergence_reason << "); last good checkpoint kept at " << ckpt.string()
          << "\n";
    return kExitDivergence;
  }
  c.out << "trained " << spec.name() << ": best epoch " << res.best_epoch << ", valid metric "
        << res.best_valid_metric << "\n";
  return kExitOk;
}

struct Loaded {
  Checkpoint ck;
  Vocab vocab;
  TrainConfig cfg;
};

Loaded load_run(const Context& c) {
  const fs::path dir = c.s.required("checkpoint");
  Loaded l;
  l.ck = load_checkpoint(dir);
  l.vocab = Vocab::load(dir / "vocab.tsv");
  if (l.vocab.size() != l.ck.model.spec().vocab_size) throw DataError("checkpoint vocabulary size mismatch");
  l.cfg.threads = c.s.size("threads", 1);
  l.cfg.bptt = l.ck.manifest.count("bptt") ? std::stoull(l.ck.manifest.at("bptt")) : 35;
  if (l.ck.manifest.count("context")) l.cfg.context = parse_context_mode(l.ck.manifest.at("context"));
  l.cfg.batch = c.s.size("batch", 32);
  return l;
}

int cmd_eval(Context& c) {
  Loaded l = load_run(c);
  const fs::path data = c.s.required("data");
  ensure_dir(c.out_dir);
  EvalResult e;
  std::size_t count = 0;
  if (l.ck.head.kind == HeadKind::LanguageModel) {
    const EncodedCorpus corpus = encode_corpus(l.vocab, read_lm_corpus(data));
    e = evaluate_lm(l.ck.model, l.ck.head, corpus, l.cfg);
    count = corpus.ids.size();
  } else {
    const auto examples = encode_examples(l.vocab, load_labeled_tsv(data));
    e = evaluate_labeled(l.ck.model, l.ck.head, examples, l.cfg);
    count = examples.size();
  }
  nlohmann::ordered_json j;
  j["family"] = l.ck.model.spec().name();
  j["task"] = to_string(l.ck.head.kind);
  j["count"] = count;
  j["loss"] = e.loss;
  j["metric"] = e.metric;
  write_text(c.out_dir / "eval.json", json_text(j));
  c.out << "loss " << e.loss << " metric " << e.metric << "\n";
  return kExitOk;
}

void require_linearization(const Model& m, const std::string& command) {
  if (!m.spec().exposes_linearization()) {
    throw ConfigError(command + ": family " + m.spec().name() +
                      " has no token-level A(x), g(x) to decompose (only standard, MVMA and MVM families do)");
  }
}

std::vector<NgramComponent> components_for(const Model& m, std::span<const std::size_t> ids) {
  std::vector<Tensor> emb;
  emb.reserve(ids.size());
  for (std::size_t id : ids) emb.push_back(m.embedding(id));
  return enumerate_components(m.linearization(), emb);
}

int cmd_decompose(Context& c) {
  Loaded l = load_run(c);
  require_linearization(l.ck.model, "decompose");
  const std::vector<std::string> tokens = tokenize(c.s.required("text"));
  if (tokens.empty()) throw DataError("decompose: empty text");
  const auto ids = l.vocab.encode(tokens);
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    if (ids[k] == Vocab::kUnk) c.err << "note: '" << tokens[k] << "' is out of vocabulary\n";
  }
  const Tensor w = l.ck.head.polarity_vector();
  const auto comps = components_for(l.ck.model, ids);
  const PolarityReport report = polarity_scores(w, comps, tokens);
  ensure_dir(c.out_dir);
  export_heatmap_tsv(report, c.out_dir / "heatmap.tsv");
  export_context_tsv(report, c.out_dir / "context.tsv");
  write_components_tsv(c.out_dir / "components.tsv", [&] {
    std::vector<NgramRep> reps;
    for (const auto& comp : comps) reps.push_back({comp.i, comp.t, comp.v});
    return reps;
  }());
  c.out << report.length() * (report.length() + 1) / 2 << " spans scored; context polarity at end "
        << report.context.back() << "\n";
  return kExitOk;
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::string fmt12(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

int cmd_probe(Context& c) {
  Loaded l = load_run(c);
  require_linearization(l.ck.model, "probe");
  const std::string mode = c.s.str("mode", "negation");
  std::string modifier;
  if (mode == "negation") {
    modifier = "not";
  } else if (mode == "intensification") {
    modifier = "very";
  } else {
    throw ConfigError("mode: unknown value '" + mode + "' (negation, intensification)");
  }
  if (!l.vocab.contains(modifier)) throw DataError("probe: modifier '" + modifier + "' is not in the vocabulary");
  ensure_dir(c.out_dir);

  std::vector<std::string> pos, neg;
  if (c.s.has("pos") || c.s.has("neg")) {
    pos = read_lexicon(c.s.required("pos"));
    neg = read_lexicon(c.s.required("neg"));
  } else {
    // Lexicons extracted from labeled data by frequency ratio.
    const auto data = load_labeled_tsv(c.s.required("data"));
    std::optional<std::set<std::string>> lexicon;
    if (c.s.has("lexicon")) {
      const auto words = read_lexicon(c.s.str("lexicon"));
      lexicon = std::set<std::string>(words.begin(), words.end());
    }
    const PolarTokens polar = extract_polar_tokens(data, c.s.real("ratio", 3.0), 1.0, lexicon);
    write_token_set(c.out_dir / "polar_positive.txt", polar.positive);
    write_token_set(c.out_dir / "polar_negative.txt", polar.negative);
    pos.assign(polar.positive.begin(), polar.positive.end());
    neg.assign(polar.negative.begin(), polar.negative.end());
  }

  std::vector<std::string> misses;
  auto usable = [&](const std::vector<std::string>& words) {
    std::vector<std::string> keep;
    for (const auto& w : words) {
      if (l.vocab.contains(w) && w != modifier) {
        keep.push_back(w);
      } else {
        misses.push_back(w);
      }
    }
    return keep;
  };
  pos = usable(pos);
  neg = usable(neg);
  if (!misses.empty()) {
    std::string list;
    for (const auto& m : misses) list += (list.empty() ? "" : ", ") + m;
    if (pos.empty() && neg.empty()) throw DataError("probe: no lexicon token is in the vocabulary; missing: " + list);
    c.err << "skipped (not in vocabulary): " << list << "\n";
  }
  if (pos.empty() || neg.empty()) throw DataError("probe: both lexicons need at least one in-vocabulary token");

  const Tensor w = l.ck.head.polarity_vector();
  const std::size_t mod_id = l.vocab.index(modifier);
  std::map<std::string, std::vector<double>> groups;
  std::ostringstream detail;
  detail << "token\tgroup\tunigram\tbigram\n";
  auto score = [&](const std::vector<std::string>& words, const std::string& group) {
    for (const auto& word : words) {
      const std::size_t id = l.vocab.index(word);
      const std::size_t uni_ids[] = {id};
      const std::size_t bi_ids[] = {mod_id, id};
      const double uni = polarity_scores(w, components_for(l.ck.model, uni_ids)).score(1, 1);
      const double bi = polarity_scores(w, components_for(l.ck.model, bi_ids)).score(1, 2);
      groups[group].push_back(uni);
      groups[modifier + "+" + group].push_back(bi);
      detail << word << '\t' << group << '\t' << fmt12(uni) << '\t' << fmt12(bi) << '\n';
    }
  };
  score(pos, "pos");
  score(neg, "neg");

  std::ostringstream summary;
  summary << "group\tn\tmin\tq1\tmedian\tq3\tmax\n";
  for (const std::string& g : std::vector<std::string>{"pos", modifier + "+pos", "neg", modifier + "+neg"}) {
    const auto& v = groups[g];
    summary << g << '\t' << v.size() << '\t' << fmt12(quantile(v, 0.0)) << '\t' << fmt12(quantile(v, 0.25)) << '\t'
            << fmt12(quantile(v, 0.5)) << '\t' << fmt12(quantile(v, 0.75)) << '\t' << fmt12(quantile(v, 1.0))
            << '\n';
  }
  write_text(c.out_dir / ("probe_" + mode + ".tsv"), summary.str());
  write_text(c.out_dir / ("probe_" + mode + "_scores.tsv"), detail.str());
  c.out << summary.str();
  return kExitOk;
}

int cmd_approx_error(Context& c) {
  Loaded l = load_run(c);
  const Model& m = l.ck.model;
  if (m.spec().arch != Arch::Standard) {
    throw ConfigError("approx-error: family " + m.spec().name() +
                      " is not a standard cell; the error compares a standard cell with its linearization");
  }
  const ApproxMode mode = c.s.str("approx_mode", "one-step") == "accumulated" ? ApproxMode::Accumulated
                                                                             : ApproxMode::OneStep;
  const fs::path data = c.s.required("data");
  std::vector<std::vector<std::size_t>> sequences;
  if (l.ck.manifest.count("task") && l.ck.manifest.at("task") == "lm") {
    for (const auto& doc : read_lm_corpus(data)) sequences.push_back(l.vocab.encode(doc));
  } else {
    for (const auto& inst : load_labeled_tsv(data)) sequences.push_back(l.vocab.encode(inst.tokens));
  }
  const double wd = l.ck.manifest.count("weight_decay") ? std::stod(l.ck.manifest.at("weight_decay")) : 0.0;
  const LinearizedCell lin = m.linearization();
  ApproxErrorTrace total;
  total.weight_decay = wd;
  for (const auto& ids : sequences) {
    std::vector<Tensor> emb;
    for (std::size_t id : ids) emb.push_back(m.embedding(id));
    total.merge(approx_error_trace(*m.cell(), lin, emb, wd, mode));
  }
  std::vector<double> defined;
  for (std::size_t k = 0; k < total.errors.size(); ++k) {
    if (total.defined[k]) defined.push_back(total.errors[k]);
  }
  nlohmann::ordered_json j;
  j["family"] = m.spec().name();
  j["weight_decay"] = wd;
  j["mode"] = mode == ApproxMode::OneStep ? "one-step" : "accumulated";
  j["steps"] = total.errors.size();
  j["undefined_steps"] = total.errors.size() - defined.size();
  j["mean_error"] = total.mean;
  nlohmann::ordered_json deciles = nlohmann::ordered_json::array();
  if (!defined.empty()) {
    for (int q = 0; q <= 10; ++q) deciles.push_back(quantile(defined, q / 10.0));
  }
  j["deciles"] = deciles;
  ensure_dir(c.out_dir);
  write_text(c.out_dir / "approx_error.json", json_text(j));
  c.out << "mean one-step error " << total.mean << " over " << defined.size() << " steps\n";
  return kExitOk;
}

int cmd_gen_synth(Context& c) {
  SynthSpec spec = SynthSpec::default_spec();
  const std::string mode = c.s.str("synth_mode", "binary");
  if (mode == "binary") {
    spec.mode = SynthMode::Binary;
  } else if (mode == "regression") {
    spec.mode = SynthMode::Regression;
  } else {
    throw ConfigError("synth_mode: unknown value '" + mode + "' (binary, regression)");
  }
  spec.pad_to = c.s.size("pad_to", 0);
  spec.not_weight = c.s.real("not_weight", spec.not_weight);
  spec.very_weight = c.s.real("very_weight", spec.very_weight);
  spec.max_modifiers = c.s.size("max_modifiers", spec.max_modifiers);
  if (!(spec.not_weight >= 0.0 && spec.very_weight >= 0.0 && spec.not_weight + spec.very_weight > 0.0)) {
    throw ConfigError("not_weight/very_weight must be non-negative and not both zero");
  }
  const std::uint64_t seed = c.s.size("seed", 1);
  ensure_dir(c.out_dir);
  const std::pair<const char*, std::size_t> splits[] = {
      {"train", c.s.size("n_train", 5000)}, {"valid", c.s.size("n_valid", 500)}, {"test", c.s.size("n_test", 1000)}};
  std::uint64_t offset = 0;
  for (const auto& [name, n] : splits) {
    spec.seed = seed * 1000003ULL + offset++;
    if (n == 0) continue;
    write_labeled_tsv(c.out_dir / (std::string(name) + ".tsv"), gen_synthetic_polarity(spec, n));
  }
  const auto write_set = [&](const char* file, const std::vector<std::string>& words) {
    write_token_set(c.out_dir / file, std::set<std::string>(words.begin(), words.end()));
  };
  write_set("positive.txt", spec.positive);
  write_set("negative.txt", spec.negative);
  c.out << "wrote synthetic splits to " << c.out_dir.string() << "\n";
  return kExitOk;
}

int cmd_export_vectors(Context& c) {
  Loaded l = load_run(c);
  if (l.ck.head.kind == HeadKind::LanguageModel) throw ConfigError("export-vectors needs a classify or regress checkpoint");
  const auto data = load_labeled_tsv(c.s.required("data"));
  std::vector<LabeledVector> vectors;
  vectors.reserve(data.size());
  for (const auto& inst : data) {
    Tape tape;
    const ModelVars vars = l.ck.model.bind_constants(tape);
    const auto outs = l.ck.model.encode(tape, vars, l.vocab.encode(inst.tokens));
    const Var ctx = l.cfg.context == ContextMode::Mean ? mean(outs) : outs.back();
    std::ostringstream label;
    label << inst.label;
    vectors.push_back({label.str(), ctx.value()});
  }
  ensure_dir(c.out_dir);
  export_vectors_tsv(vectors, c.out_dir / "vectors.tsv");
  c.out << "exported " << vectors.size() << " vectors\n";
  return kExitOk;
}

struct OptionSet {
  std::map<std::string, std::string> values;
  std::map<std::string, bool> switches;
  std::vector<std::pair<std::string, CLI::Option*>> given;
};

void add_value(CLI::App* app, OptionSet& o, const std::string& key, const std::string& help) {
  std::string flag = "--" + key;
  std::replace(flag.begin(), flag.end(), '_', '-');
  o.given.emplace_back(key, app->add_option(flag, o.values[key], help));
}

void add_switch(CLI::App* app, OptionSet& o, const std::string& key, const std::string& help) {
  std::string flag = "--" + key;
  std::replace(flag.begin(), flag.end(), '_', '-');
  o.given.emplace_back(key, app->add_flag(flag, o.switches[key], help));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Linearized recurrent n-gram models: training, decomposition and probes"};
  app.require_subcommand(1);
  OptionSet o;
  add_value(&app, o, "config", "key=value settings file; flags override it");
  add_value(&app, o, "seed", "random seed");
  add_value(&app, o, "out", "output directory");
  add_value(&app, o, "threads", "evaluation threads");

  auto* train = app.add_subcommand("train", "train a model and keep the best validation checkpoint");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a data file");
  auto* decompose = app.add_subcommand("decompose", "score every n-gram component of a text");
  auto* probe = app.add_subcommand("probe", "negation / intensification bigram polarity");
  auto* approx = app.add_subcommand("approx-error", "one-step linearization error of a standard cell");
  auto* synth = app.add_subcommand("gen-synth", "write synthetic negation/intensification data");
  auto* vectors = app.add_subcommand("export-vectors", "write context vectors of a labeled file");

  for (const char* k : {"family", "task", "input_dim", "hidden_dim", "window", "activation", "classes", "min_freq",
                        "train", "valid", "test", "optimizer", "lr", "beta1", "beta2", "dropout", "weight_decay",
                        "bptt", "epochs", "batch", "context"}) {
    add_value(train, o, k, k);
  }
  for (const char* k : {"bias", "spectral_norm", "timing"}) add_switch(train, o, k, k);
  for (auto* sub : {eval, decompose, probe, approx, vectors}) add_value(sub, o, "checkpoint", "checkpoint directory");
  for (auto* sub : {eval, approx, vectors}) add_value(sub, o, "data", "data file");
  add_value(eval, o, "batch", "evaluation batch size");
  add_value(decompose, o, "text", "input text");
  for (const char* k : {"pos", "neg", "mode", "data", "lexicon", "ratio"}) add_value(probe, o, k, k);
  add_value(approx, o, "approx_mode", "one-step or accumulated");
  for (const char* k : {"n_train", "n_valid", "n_test", "pad_to", "not_weight", "very_weight", "max_modifiers"}) {
    add_value(synth, o, k, k);
  }
  add_value(synth, o, "synth_mode", "binary or regression");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    std::map<std::string, std::string> kv;
    for (const auto& [key, opt] : o.given) {
      if (key == "config" && opt->count()) kv = read_config_file(o.values["config"]);
    }
    for (const auto& [key, opt] : o.given) {
      if (key == "config" || !opt->count()) continue;
      kv[key] = o.switches.count(key) ? (o.switches[key] ? "1" : "0") : o.values[key];
    }
    Context c{out, err, Settings(kv), fs::path(kv.count("out") ? kv.at("out") : "run")};
    if (train->parsed()) return cmd_train(c);
    if (eval->parsed()) return cmd_eval(c);
    if (decompose->parsed()) return cmd_decompose(c);
    if (probe->parsed()) return cmd_probe(c);
    if (approx->parsed()) return cmd_approx_error(c);
    if (synth->parsed()) return cmd_gen_synth(c);
    if (vectors->parsed()) return cmd_export_vectors(c);
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace ngram
