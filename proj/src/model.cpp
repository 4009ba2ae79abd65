#include "ngram/model.hpp"

#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>

#include "ngram/errors.hpp"

namespace ngram {

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.mutable_data()) v = rng.uniform(-bound, bound);
  return t;
}

const char* arch_prefix(Arch a) {
  switch (a) {
    case Arch::Standard:
      return "standard";
    case Arch::MVMA:
      return "MVMA";
    case Arch::MVM:
      return "MVM";
    case Arch::MM:
      return "MM";
    case Arch::VA_W:
      return "VA-W";
    case Arch::VA_EW:
      return "VA-EW";
    case Arch::MVM_R:
      return "MVM-R";
  }
  return "?";
}

CellKind cell_kind_of(Provenance p) {
  switch (p) {
    case Provenance::E:
      return CellKind::Elman;
    case Provenance::L:
      return CellKind::LSTM;
    default:
      return CellKind::GRU;
  }
}

}  // namespace

std::vector<std::string> model_family_names() {
  return {"standard-E", "standard-G", "standard-L", "MVMA-G", "MVMA-L", "MVMA-E", "MVMA-ME",
          "MVM-G",      "MVM-L",      "MVM-E",      "MM",     "VA-W",   "VA-EW",  "MVM-R"};
}

std::string ModelSpec::name() const {
  switch (arch) {
    case Arch::Standard:
    case Arch::MVMA:
    case Arch::MVM:
      return std::string(arch_prefix(arch)) + "-" + to_string(provenance);
    default:
      return arch_prefix(arch);
  }
}

void ModelSpec::set_family(const std::string& family) {
  for (Arch a : {Arch::MM, Arch::VA_W, Arch::VA_EW, Arch::MVM_R}) {
    if (family == arch_prefix(a)) {
      arch = a;
      provenance = Provenance::G;
      return;
    }
  }
  const auto dash = family.rfind('-');
  if (dash != std::string::npos) {
    const std::string prefix = family.substr(0, dash);
    const std::string suffix = family.substr(dash + 1);
    for (Arch a : {Arch::Standard, Arch::MVMA, Arch::MVM}) {
      if (prefix != arch_prefix(a)) continue;
      for (Provenance p : {Provenance::E, Provenance::G, Provenance::L, Provenance::ME}) {
        if (suffix != to_string(p)) continue;
        if (p == Provenance::ME && a != Arch::MVMA) break;
        arch = a;
        provenance = p;
        return;
      }
    }
  }
  throw ConfigError("unknown model family '" + family + "'");
}

void ModelSpec::validate() const {
  if (vocab_size < 1) throw ConfigError("vocab_size must be positive");
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be positive");
  if (arch != Arch::MM && input_dim < 1) throw ConfigError("input_dim must be positive");
  if (arch == Arch::VA_W && window < 1) throw ConfigError("window must be >= 1 for VA-W");
  if (provenance == Provenance::ME && arch != Arch::MVMA) throw ConfigError("ME provenance is MVMA only");
  if (activation == Activation::Identity && !(arch == Arch::Standard && provenance == Provenance::E)) {
    throw ConfigError("identity activation is only available for standard-E");
  }
}

bool ModelSpec::exposes_linearization() const {
  return arch == Arch::Standard || arch == Arch::MVMA || arch == Arch::MVM;
}

Model Model::init(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  Model m;
  m.spec_ = spec;
  const std::size_t V = spec.vocab_size;
  const std::size_t dx = spec.input_dim;
  const std::size_t d = spec.hidden_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  auto add = [&](const std::string& name, Tensor value) { m.own_[name] = Parameter{name, std::move(value)}; };

  if (spec.arch == Arch::MM) {
    // Token matrices start near the identity so long products stay bounded.
    Tensor table({V, d * d});
    auto data = table.mutable_data();
    for (std::size_t v = 0; v < V; ++v) {
      for (std::size_t k = 0; k < d * d; ++k) {
        data[v * d * d + k] = (k % (d + 1) == 0 ? 1.0 : 0.0) + 0.1 * bound * rng.normal();
      }
    }
    add("A_table", std::move(table));
    add("u", uniform_tensor({d}, bound, rng));
    return m;
  }

  Tensor emb({V, dx});
  for (double& v : emb.mutable_data()) v = rng.normal();
  add("embedding", std::move(emb));

  switch (spec.arch) {
    case Arch::Standard:
    case Arch::MVMA:
    case Arch::MVM:
      if (spec.provenance == Provenance::ME) {
        m.me_ = MEParams::init(dx, d, rng);
      } else {
        m.cell_ = CellParams::init(cell_kind_of(spec.provenance), dx, d, rng, spec.has_bias);
        m.cell_->activation = spec.activation;
      }
      break;
    case Arch::MVM_R:
      m.cell_ = CellParams::init(CellKind::GRU, dx, d, rng, spec.has_bias);
      break;
    case Arch::VA_W:
      add("W_g", uniform_tensor({d, dx}, bound, rng));
      for (std::size_t k = 0; k < spec.window; ++k) add("C" + std::to_string(k), uniform_tensor({d, d}, bound, rng));
      break;
    case Arch::VA_EW:
      add("W_g", uniform_tensor({d, dx}, bound, rng));
      add("C", uniform_tensor({d, d}, bound, rng));
      break;
    case Arch::MM:
      break;
  }
  return m;
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  for (auto& [name, p] : own_) out.push_back(&p);
  if (cell_) {
    for (Parameter* p : cell_->parameters()) out.push_back(p);
  }
  if (me_) {
    for (Parameter* p : me_->parameters()) out.push_back(p);
  }
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  std::vector<const Parameter*> out;
  for (Parameter* p : const_cast<Model*>(this)->parameters()) out.push_back(p);
  return out;
}

Parameter& Model::param(const std::string& name) {
  for (Parameter* p : parameters()) {
    if (p->name == name) return *p;
  }
  throw ContractError("model " + spec_.name() + " has no parameter '" + name + "'");
}

const Parameter& Model::param(const std::string& name) const { return const_cast<Model*>(this)->param(name); }

ModelVars Model::bind(Tape& tape) {
  ModelVars vars;
  for (auto& [name, p] : own_) vars.own[name] = tape.param(p);
  if (cell_) vars.cell = CellVars::bind(tape, *cell_);
  if (me_) vars.me = MEVars::bind(tape, *me_);
  return vars;
}

ModelVars Model::bind_constants(Tape& tape) const {
  ModelVars vars;
  for (const auto& [name, p] : own_) vars.own[name] = tape.constant(p.value);
  if (cell_) vars.cell = CellVars::constants(tape, *cell_);
  if (me_) vars.me = MEVars::constants(tape, *me_);
  return vars;
}

Tensor Model::embedding(std::size_t id) const {
  const Tensor& table = own_.at("embedding").value;
  if (id >= table.rows()) throw DataError("token index " + std::to_string(id) + " outside vocabulary");
  const auto data = table.data().subspan(id * table.cols(), table.cols());
  return Tensor::vector(std::vector<double>(data.begin(), data.end()));
}

LinearizedCell Model::linearization() const {
  if (!spec_.exposes_linearization()) {
    throw ContractError(spec_.name() + " has no token-level A(x), g(x)");
  }
  if (me_) return LinearizedCell::from_me(*me_, true);
  return LinearizedCell::from_cell(*cell_, spec_.arch != Arch::Standard);
}

std::vector<Var> Model::encode(Tape& tape, const ModelVars& vars, std::span<const std::size_t> ids, Carry* carry,
                               const std::vector<bool>& reset) const {
  const std::size_t T = ids.size();
  if (T == 0) throw ContractError("encode: empty sequence");
  if (!reset.empty() && reset.size() != T) throw ContractError("encode: reset flags misaligned");
  for (std::size_t id : ids) {
    if (id >= spec_.vocab_size) {
      throw DataError("token index " + std::to_string(id) + " outside vocabulary of " +
                      std::to_string(spec_.vocab_size));
    }
  }
  if (carry && (spec_.arch == Arch::VA_W || spec_.arch == Arch::MVM_R)) {
    throw ContractError(spec_.name() + " does not carry state across windows");
  }
  const std::size_t d = spec_.hidden_dim;
  const bool lstm_state = cell_ && cell_->kind == CellKind::LSTM && spec_.arch != Arch::MVM_R;

  bool started = carry && carry->started();
  Var state;
  if (started) state = tape.constant(carry->state);
  auto restart = [&](std::size_t k) {
    if (!reset.empty() && reset[k]) started = false;
  };
  auto x_of = [&](std::size_t id) { return row(vars.own.at("embedding"), id); };
  auto lin_of = [&](const Var& x) { return vars.cell ? linearize_token(*vars.cell, x) : linearize_token(*vars.me, x); };

  std::vector<Var> out;
  out.reserve(T);
  switch (spec_.arch) {
    case Arch::Standard: {
      CellStateVar cs;
      auto unpack = [&] {
        if (lstm_state) {
          cs.c = slice(state, 0, d);
          cs.h = slice(state, d, d);
        } else {
          cs.h = state;
        }
      };
      if (started) unpack();
      for (std::size_t k = 0; k < T; ++k) {
        restart(k);
        if (!started) cs = zero_state(tape, *vars.cell);
        cs = cell_step(*vars.cell, x_of(ids[k]), cs);
        started = true;
        out.push_back(cs.h);
      }
      state = lstm_state ? concat(cs.c, cs.h) : cs.h;
      break;
    }
    case Arch::MVMA:
    case Arch::MVM: {
      const bool additive = spec_.arch == Arch::MVMA;
      for (std::size_t k = 0; k < T; ++k) {
        restart(k);
        const LinearStep step = lin_of(x_of(ids[k]));
        if (!started) {
          state = step.g;
        } else {
          state = additive ? step.g + step.apply(state) : step.apply(state);
        }
        started = true;
        out.push_back(lstm_state ? slice(state, d, d) : state);
      }
      break;
    }
    case Arch::MM: {
      const Var& table = vars.own.at("A_table");
      for (std::size_t k = 0; k < T; ++k) {
        restart(k);
        if (!started) state = vars.own.at("u");
        state = matmul(reshape(row(table, ids[k]), {d, d}), state);
        started = true;
        out.push_back(state);
      }
      break;
    }
    case Arch::VA_EW: {
      const Var& C = vars.own.at("C");
      for (std::size_t k = 0; k < T; ++k) {
        restart(k);
        Var g = tanh(matmul(vars.own.at("W_g"), x_of(ids[k])));
        state = started ? g + matmul(C, state) : g;
        started = true;
        out.push_back(state);
      }
      break;
    }
    case Arch::VA_W: {
      std::vector<Var> gs;
      for (std::size_t k = 0; k < T; ++k) {
        if (!reset.empty() && reset[k]) gs.clear();
        gs.push_back(tanh(matmul(vars.own.at("W_g"), x_of(ids[k]))));
        const std::size_t n = std::min(spec_.window, gs.size());
        Var c = matmul(vars.own.at("C0"), gs.back());
        for (std::size_t lag = 1; lag < n; ++lag) {
          c = c + matmul(vars.own.at("C" + std::to_string(lag)), gs[gs.size() - 1 - lag]);
        }
        out.push_back(c);
      }
      return out;
    }
    case Arch::MVM_R: {
      std::optional<LinearStep> prev;
      for (std::size_t k = 0; k < T; ++k) {
        if (!reset.empty() && reset[k]) prev.reset();
        LinearStep step = linearize_token(*vars.cell, x_of(ids[k]));
        out.push_back(prev ? prev->apply(step.g) : step.g);
        prev = std::move(step);
      }
      return out;
    }
  }
  if (carry) carry->state = state.value();
  return out;
}

std::string to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::Classifier:
      return "classify";
    case HeadKind::Regressor:
      return "regress";
    case HeadKind::LanguageModel:
      return "lm";
  }
  return "?";
}

Head Head::init(HeadKind kind, std::size_t outputs, std::size_t hidden_dim, Rng& rng) {
  if (outputs < 1 || hidden_dim < 1) throw ConfigError("head dimensions must be positive");
  if (kind == HeadKind::Regressor && outputs != 1) throw ConfigError("regression head has one output");
  Head h;
  h.kind = kind;
  h.W_out = Parameter{"W_out", uniform_tensor({outputs, hidden_dim}, 1.0 / std::sqrt(double(hidden_dim)), rng)};
  return h;
}

Tensor Head::polarity_vector() const {
  const Tensor& W = W_out.value;
  const std::size_t d = W.cols();
  auto row_of = [&](std::size_t r) {
    const auto data = W.data().subspan(r * d, d);
    return Tensor::vector(std::vector<double>(data.begin(), data.end()));
  };
  if (kind == HeadKind::Regressor) return row_of(0);
  if (kind == HeadKind::Classifier && W.rows() == 2) return sub(row_of(1), row_of(0));
  throw ContractError("polarity vector needs a binary classifier or a regressor head");
}

namespace {

std::string bool_str(bool b) { return b ? "1" : "0"; }

std::map<std::string, std::string> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint manifest " + path.string() + ": " + std::strerror(errno));
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::size_t manifest_size(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw DataError("checkpoint manifest lacks '" + key + "'");
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw DataError("checkpoint manifest: bad value for '" + key + "'");
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const Model& model, const Head& head,
                     const std::map<std::string, std::string>& extra) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const ModelSpec& s = model.spec();
  std::map<std::string, std::string> kv = extra;
  kv["format"] = "1";
  kv["family"] = s.name();
  kv["vocab_size"] = std::to_string(s.vocab_size);
  kv["input_dim"] = std::to_string(s.input_dim);
  kv["hidden_dim"] = std::to_string(s.hidden_dim);
  kv["window"] = std::to_string(s.window);
  kv["has_bias"] = bool_str(s.has_bias);
  kv["activation"] = s.activation == Activation::Identity ? "identity" : "tanh";
  kv["head"] = to_string(head.kind);
  kv["outputs"] = std::to_string(head.outputs());

  for (const Parameter* p : model.parameters()) save_tensor(dir / (p->name + ".ngrt"), p->value);
  save_tensor(dir / "W_out.ngrt", head.W_out.value);

  std::ofstream out(dir / "manifest.txt");
  if (!out) throw IoError("cannot write " + (dir / "manifest.txt").string());
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
  if (!out) throw IoError("failed writing " + (dir / "manifest.txt").string());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  Checkpoint ck;
  ck.manifest = read_manifest(dir / "manifest.txt");
  const auto& kv = ck.manifest;
  if (kv.count("family") == 0 || kv.count("head") == 0) throw DataError("checkpoint manifest incomplete");

  ModelSpec spec;
  try {
    spec.set_family(kv.at("family"));
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  spec.vocab_size = manifest_size(kv, "vocab_size");
  spec.input_dim = manifest_size(kv, "input_dim");
  spec.hidden_dim = manifest_size(kv, "hidden_dim");
  spec.window = manifest_size(kv, "window");
  spec.has_bias = manifest_size(kv, "has_bias") != 0;
  spec.activation = kv.count("activation") && kv.at("activation") == "identity" ? Activation::Identity
                                                                                  : Activation::Tanh;
  Rng rng(0);
  ck.model = Model::init(spec, rng);
  for (Parameter* p : ck.model.parameters()) {
    Tensor t = load_tensor(dir / (p->name + ".ngrt"));
    if (t.shape() != p->value.shape()) {
      throw DataError("checkpoint parameter " + p->name + " has shape " + shape_string(t.shape()) + ", expected " +
                      shape_string(p->value.shape()));
    }
    p->value = std::move(t);
  }

  HeadKind kind;
  const std::string& hk = kv.at("head");
  if (hk == "classify") {
    kind = HeadKind::Classifier;
  } else if (hk == "regress") {
    kind = HeadKind::Regressor;
  } else if (hk == "lm") {
    kind = HeadKind::LanguageModel;
  } else {
    throw DataError("checkpoint: unknown head '" + hk + "'");
  }
  ck.head = Head::init(kind, manifest_size(kv, "outputs"), spec.hidden_dim, rng);
  Tensor W = load_tensor(dir / "W_out.ngrt");
  if (W.shape() != ck.head.W_out.value.shape()) throw DataError("checkpoint W_out has the wrong shape");
  ck.head.W_out.value = std::move(W);
  return ck;
}

}  // namespace ngram
