#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ngram/cells.hpp"
#include "ngram/data.hpp"
#include "ngram/linearize.hpp"
#include "ngram/tensor.hpp"

namespace ngram {

// v_{i:t} for 1 <= i <= t, positions 1-based.
struct NgramComponent {
  std::size_t i = 0;
  std::size_t t = 0;
  Tensor v;
};

// All T(T+1)/2 components, ordered by t then i. Each suffix product is
// extended by one matrix-vector product per step. `offset` selects the block
// returned (the LSTM h-block lives at offset d of the 2d state).
std::vector<NgramComponent> enumerate_components(std::span<const Tensor> A, std::span<const Tensor> g,
                                                 std::size_t offset = 0);

// A(x_t), g(x_t) per token and the component offset for this linearization.
std::vector<NgramComponent> enumerate_components(const LinearizedCell& lin, std::span<const Tensor> embeddings);

struct PolarityReport {
  std::vector<std::string> tokens;
  // span_scores[t-1][i-1] = w^T v_{i:t}
  std::vector<std::vector<double>> span_scores;
  // context[t-1] = sum_i s_{i:t}
  std::vector<double> context;

  std::size_t length() const { return span_scores.size(); }
  double score(std::size_t i, std::size_t t) const { return span_scores.at(t - 1).at(i - 1); }
};

PolarityReport polarity_scores(const Tensor& w, std::span<const NgramComponent> components,
                               std::vector<std::string> tokens = {});

struct ApproxErrorTrace {
  std::vector<double> errors;  // NaN-free; undefined steps hold 0 and are flagged
  std::vector<bool> defined;
  double mean = 0.0;  // over defined steps
  double weight_decay = 0.0;

  std::size_t defined_count() const;
  // Appends another trace, keeping the mean over all defined steps.
  void merge(const ApproxErrorTrace& other);
};

enum class ApproxMode {
  OneStep,      // h_hat_t = g(x_t) + A(x_t) h_{t-1} with the true h_{t-1}
  Accumulated,  // the linear recurrence runs on its own states
};

// Relative error ||h_t - h_hat_t|| / ||h_t|| per step. For the LSTM the
// comparison uses the h block while the prediction uses the full (c, h) state.
ApproxErrorTrace approx_error_trace(const CellParams& cell, const LinearizedCell& lin,
                                    std::span<const Tensor> embeddings, double weight_decay = 0.0,
                                    ApproxMode mode = ApproxMode::OneStep);

struct PolarTokens {
  std::set<std::string> positive;
  std::set<std::string> negative;
};

// ratio = (count in positive instances + lambda) / (count in negative + lambda).
// Labels > 0.5 count as positive. When `lexicon` is given both sets are
// intersected with it.
PolarTokens extract_polar_tokens(std::span<const LabeledInstance> corpus, double ratio_threshold = 3.0,
                                 double lambda = 1.0,
                                 const std::optional<std::set<std::string>>& lexicon = std::nullopt);

// Rows are end positions t, columns start positions i, so filled cells form
// the lower triangle; cells with i > t are blank. The header row and the
// first column carry the tokens. Values use 12 significant digits.
void export_heatmap_tsv(const PolarityReport& report, const std::filesystem::path& path);

struct HeatmapTable {
  std::vector<std::string> tokens;
  std::vector<std::vector<std::optional<double>>> cells;  // [t-1][i-1]
};

HeatmapTable parse_heatmap_tsv(const std::filesystem::path& path);

// "t<TAB>token<TAB>context score" per position.
void export_context_tsv(const PolarityReport& report, const std::filesystem::path& path);

struct LabeledVector {
  std::string label;
  Tensor v;
};

// "label<TAB>x_1<TAB>...<TAB>x_d" per vector.
void export_vectors_tsv(std::span<const LabeledVector> vectors, const std::filesystem::path& path);

}  // namespace ngram
