#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ngram {

// Whitespace split with ASCII lowercasing.
std::vector<std::string> tokenize(const std::string& text);

class Vocab {
 public:
  static constexpr std::size_t kUnk = 0;
  static constexpr std::size_t kPad = 1;
  static constexpr const char* kUnkToken = "<unk>";
  static constexpr const char* kPadToken = "<pad>";

  Vocab();

  std::size_t size() const { return tokens_.size(); }
  std::size_t index(const std::string& token) const;
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  std::size_t frequency(std::size_t index) const { return counts_.at(index); }

  std::vector<std::size_t> encode(std::span<const std::string> tokens) const;

  // One "token<TAB>count" line per index.
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  std::size_t add(const std::string& token, std::size_t count);
  void set_frequency(std::size_t index, std::size_t count) { counts_.at(index) = count; }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::size_t> counts_;
  std::unordered_map<std::string, std::size_t> ids_;
};

// Reserved slots first, then descending frequency with lexicographic ties.
// Tokens seen fewer than `min_freq` times map to <unk>.
Vocab build_vocab(std::span<const std::string> stream, std::size_t min_freq);

struct LabeledInstance {
  double label = 0.0;
  std::vector<std::string> tokens;
};

// "label<TAB>space separated text" per line.
std::vector<LabeledInstance> load_labeled_tsv(const std::filesystem::path& path);
void write_labeled_tsv(const std::filesystem::path& path, std::span<const LabeledInstance> data);
std::vector<LabeledInstance> parse_labeled_tsv(std::istream& in, const std::string& source);

// One token per line; blank lines and '#' comments ignored.
std::vector<std::string> read_lexicon(const std::filesystem::path& path);
void write_token_set(const std::filesystem::path& path, const std::set<std::string>& tokens);

// Plain-text corpus: documents separated by blank lines. Each non-blank line
// is tokenized and terminated with <eos>.
std::vector<std::vector<std::string>> read_lm_corpus(const std::filesystem::path& path);

struct EncodedCorpus {
  std::vector<std::size_t> ids;
  std::vector<bool> doc_start;  // true where a document begins
};

EncodedCorpus encode_corpus(const Vocab& vocab, const std::vector<std::vector<std::string>>& docs);

struct LmWindow {
  // [stream][position]
  std::vector<std::vector<std::size_t>> inputs;
  std::vector<std::vector<std::size_t>> targets;
  // reset[s][k]: the state is cleared before inputs[s][k] (document start).
  std::vector<std::vector<bool>> reset;
};

// Splits the corpus into `batch` contiguous streams and cuts each into
// windows of `bptt` inputs whose targets are shifted by one. Tokens that do
// not fit a whole window are dropped.
std::vector<LmWindow> batchify_lm(const EncodedCorpus& corpus, std::size_t batch, std::size_t bptt);

enum class SynthMode { Binary, Regression };

struct SynthSpec {
  std::vector<std::string> positive;
  std::vector<std::string> negative;
  std::vector<std::string> nouns;
  std::vector<std::string> fillers;
  SynthMode mode = SynthMode::Binary;
  std::size_t max_modifiers = 2;
  // Relative weights of "not" and "very" when a modifier is drawn.
  double not_weight = 4.0;
  double very_weight = 1.0;
  double modifier_prob = 0.6;
  std::size_t max_filler_prefix = 2;
  // When positive, filler tokens are prefixed until the phrase has at least
  // this many tokens.
  std::size_t pad_to = 0;
  std::uint64_t seed = 1;

  static SynthSpec default_spec();
};

// Label rule: every "not" flips the sign of the base polarity; every "very"
// multiplies the intensity by 1.5 (regression, clipped to [-2, 2]).
double synthetic_label(int base_polarity, std::span<const std::string> modifiers, SynthMode mode);

std::vector<LabeledInstance> gen_synthetic_polarity(const SynthSpec& spec, std::size_t n);

}  // namespace ngram
