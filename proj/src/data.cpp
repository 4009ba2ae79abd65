#include "ngram/data.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ngram/errors.hpp"
#include "ngram/rng.hpp"

namespace ngram {

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string() + ": " + std::strerror(errno));
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing: " + std::strerror(errno));
  return out;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocab::Vocab() {
  add(kUnkToken, 0);
  add(kPadToken, 0);
}

std::size_t Vocab::add(const std::string& token, std::size_t count) {
  auto [it, inserted] = ids_.emplace(token, tokens_.size());
  if (!inserted) throw ContractError("vocabulary already contains '" + token + "'");
  tokens_.push_back(token);
  counts_.push_back(count);
  return it->second;
}

std::size_t Vocab::index(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<std::size_t> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(index(t));
  return out;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out = open_out(path);
  for (std::size_t k = 0; k < tokens_.size(); ++k) out << tokens_[k] << '\t' << counts_[k] << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  Vocab v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected token<TAB>count");
    }
    const std::string token = line.substr(0, tab);
    std::size_t count = 0;
    try {
      count = std::stoull(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad count");
    }
    if (lineno <= 2) {
      if (token != v.tokens_[lineno - 1]) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": reserved token '" +
                        v.tokens_[lineno - 1] + "' expected");
      }
      v.counts_[lineno - 1] = count;
      continue;
    }
    v.add(token, count);
  }
  return v;
}

Vocab build_vocab(std::span<const std::string> stream, std::size_t min_freq) {
  if (stream.empty()) throw ContractError("build_vocab: empty token stream");
  if (min_freq < 1) throw ContractError("build_vocab: min_freq must be >= 1");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& t : stream) ++counts[t];

  std::vector<std::pair<std::string, std::size_t>> kept;
  std::size_t unk = 0;
  for (auto& [tok, n] : counts) {
    if (tok == Vocab::kUnkToken || tok == Vocab::kPadToken) {
      unk += tok == Vocab::kUnkToken ? n : 0;
      continue;
    }
    if (n >= min_freq) {
      kept.emplace_back(tok, n);
    } else {
      unk += n;
    }
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  Vocab v;
  v.set_frequency(Vocab::kUnk, unk);
  for (const auto& [tok, n] : kept) v.add(tok, n);
  return v;
}

std::vector<LabeledInstance> parse_labeled_tsv(std::istream& in, const std::string& source) {
  std::vector<LabeledInstance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(where + "expected label<TAB>text");
    const std::string label = line.substr(0, tab);
    LabeledInstance inst;
    try {
      std::size_t used = 0;
      inst.label = std::stod(label, &used);
      if (used != label.size()) throw std::invalid_argument(label);
    } catch (const std::exception&) {
      throw DataError(where + "non-numeric label '" + label + "'");
    }
    if (!std::isfinite(inst.label)) throw DataError(where + "non-finite label");
    inst.tokens = tokenize(line.substr(tab + 1));
    if (inst.tokens.empty()) throw DataError(where + "empty text");
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<LabeledInstance> load_labeled_tsv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  return parse_labeled_tsv(in, path.string());
}

void write_labeled_tsv(const std::filesystem::path& path, std::span<const LabeledInstance> data) {
  std::ofstream out = open_out(path);
  char buf[32];
  for (const auto& inst : data) {
    std::snprintf(buf, sizeof buf, "%.17g", inst.label);
    out << buf << '\t';
    for (std::size_t k = 0; k < inst.tokens.size(); ++k) out << (k ? " " : "") << inst.tokens[k];
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::string> read_lexicon(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto toks = tokenize(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    out.push_back(toks[0]);
  }
  return out;
}

void write_token_set(const std::filesystem::path& path, const std::set<std::string>& tokens) {
  std::ofstream out = open_out(path);
  for (const auto& t : tokens) out << t << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::vector<std::string>> read_lm_corpus(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::vector<std::vector<std::string>> docs(1);
  std::string line;
  while (std::getline(in, line)) {
    auto toks = tokenize(line);
    if (toks.empty()) {
      if (!docs.back().empty()) docs.emplace_back();
      continue;
    }
    docs.back().insert(docs.back().end(), toks.begin(), toks.end());
    docs.back().push_back("<eos>");
  }
  if (docs.back().empty()) docs.pop_back();
  if (docs.empty()) throw DataError(path.string() + ": corpus has no tokens");
  return docs;
}

EncodedCorpus encode_corpus(const Vocab& vocab, const std::vector<std::vector<std::string>>& docs) {
  EncodedCorpus out;
  for (const auto& doc : docs) {
    for (std::size_t k = 0; k < doc.size(); ++k) {
      out.ids.push_back(vocab.index(doc[k]));
      out.doc_start.push_back(k == 0);
    }
  }
  return out;
}

std::vector<LmWindow> batchify_lm(const EncodedCorpus& corpus, std::size_t batch, std::size_t bptt) {
  if (batch < 1 || bptt < 1) throw ContractError("batchify_lm: batch and bptt must be >= 1");
  if (corpus.doc_start.size() != corpus.ids.size()) throw ContractError("batchify_lm: boundary flags misaligned");
  const std::size_t L = corpus.ids.size();
  if (L < batch * (bptt + 1)) {
    throw ContractError("batchify_lm: corpus of " + std::to_string(L) + " tokens is shorter than batch*(bptt+1) = " +
                        std::to_string(batch * (bptt + 1)));
  }
  const std::size_t stream_len = L / batch;
  // Inputs use positions 0..stream_len-2 so every input has a target.
  const std::size_t windows = (stream_len - 1) / bptt;
  std::vector<LmWindow> out(windows);
  for (std::size_t w = 0; w < windows; ++w) {
    LmWindow& win = out[w];
    win.inputs.resize(batch);
    win.targets.resize(batch);
    win.reset.resize(batch);
    for (std::size_t s = 0; s < batch; ++s) {
      const std::size_t base = s * stream_len + w * bptt;
      for (std::size_t k = 0; k < bptt; ++k) {
        win.inputs[s].push_back(corpus.ids[base + k]);
        win.targets[s].push_back(corpus.ids[base + k + 1]);
        win.reset[s].push_back(corpus.doc_start[base + k]);
      }
    }
  }
  return out;
}

SynthSpec SynthSpec::default_spec() {
  SynthSpec s;
  s.positive = {"good", "great", "excellent", "wonderful", "fine", "nice", "brilliant", "superb", "pleasant", "lovely"};
  s.negative = {"bad", "awful", "terrible", "poor", "horrible", "dreadful", "boring", "weak", "nasty", "ugly"};
  s.nouns = {"movie", "film", "plot", "story", "acting", "cast", "script", "ending", "music", "scene"};
  s.fillers = {"well", "so", "anyway", "today", "frankly", "overall", "again", "also", "indeed", "then"};
  return s;
}

double synthetic_label(int base_polarity, std::span<const std::string> modifiers, SynthMode mode) {
  if (base_polarity != 1 && base_polarity != -1) throw ContractError("base polarity must be +1 or -1");
  double sign = base_polarity;
  double intensity = 1.0;
  for (const auto& m : modifiers) {
    if (m == "not") {
      sign = -sign;
    } else if (m == "very") {
      intensity *= 1.5;
    } else {
      throw ContractError("unknown modifier '" + m + "'");
    }
  }
  if (mode == SynthMode::Binary) return sign > 0 ? 1.0 : 0.0;
  return std::clamp(sign * intensity, -2.0, 2.0);
}

std::vector<LabeledInstance> gen_synthetic_polarity(const SynthSpec& spec, std::size_t n) {
  if (spec.positive.empty() || spec.negative.empty() || spec.nouns.empty()) {
    throw ContractError("gen_synthetic_polarity: lexicons and nouns must be nonempty");
  }
  if (n < 1) throw ContractError("gen_synthetic_polarity: n must be >= 1");
  if ((spec.max_filler_prefix > 0 || spec.pad_to > 0) && spec.fillers.empty()) {
    throw ContractError("gen_synthetic_polarity: filler tokens required");
  }
  if (spec.max_filler_prefix + 4 + spec.max_modifiers > 12) {
    throw ContractError("gen_synthetic_polarity: phrases would exceed 12 tokens");
  }
  const double p_not = spec.not_weight / (spec.not_weight + spec.very_weight);

  Rng rng(spec.seed);
  auto pick = [&](const std::vector<std::string>& v) -> const std::string& { return v[rng.below(v.size())]; };

  std::vector<LabeledInstance> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const int base = rng.bernoulli(0.5) ? 1 : -1;
    const std::string& adj = pick(base > 0 ? spec.positive : spec.negative);
    std::vector<std::string> mods;
    while (mods.size() < spec.max_modifiers && rng.bernoulli(spec.modifier_prob)) {
      mods.push_back(rng.bernoulli(p_not) ? "not" : "very");
    }

    std::vector<std::string> phrase;
    const std::size_t prefix = spec.max_filler_prefix ? rng.below(spec.max_filler_prefix + 1) : 0;
    for (std::size_t f = 0; f < prefix; ++f) phrase.push_back(pick(spec.fillers));
    phrase.push_back("the");
    phrase.push_back(pick(spec.nouns));
    phrase.push_back("is");
    phrase.insert(phrase.end(), mods.begin(), mods.end());
    phrase.push_back(adj);

    LabeledInstance inst;
    inst.label = synthetic_label(base, mods, spec.mode);
    while (inst.tokens.size() + phrase.size() < spec.pad_to) inst.tokens.push_back(pick(spec.fillers));
    inst.tokens.insert(inst.tokens.end(), phrase.begin(), phrase.end());
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace ngram
