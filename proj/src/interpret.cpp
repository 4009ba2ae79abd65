#include "ngram/interpret.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "ngram/errors.hpp"

namespace ngram {

namespace {

Tensor block(const Tensor& v, std::size_t offset) {
  if (offset == 0) return v;
  const auto d = v.data();
  return Tensor::vector(std::vector<double>(d.begin() + static_cast<std::ptrdiff_t>(offset), d.end()));
}

std::string fmt12(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing: " + std::strerror(errno));
  return out;
}

}  // namespace

std::vector<NgramComponent> enumerate_components(std::span<const Tensor> A, std::span<const Tensor> g,
                                                 std::size_t offset) {
  if (g.empty()) throw ContractError("enumerate_components: empty sequence");
  if (A.size() != g.size()) throw ContractError("enumerate_components: A and g lengths differ");
  if (offset >= g[0].size()) throw ContractError("enumerate_components: block offset outside state");
  const std::size_t T = g.size();

  std::vector<NgramComponent> out;
  out.reserve(T * (T + 1) / 2);
  // suffix[i-1] = full-state v_{i:t} for the current t.
  std::vector<Tensor> suffix;
  suffix.reserve(T);
  for (std::size_t t = 1; t <= T; ++t) {
    for (auto& v : suffix) v = matmul(A[t - 1], v);
    suffix.push_back(g[t - 1]);
    for (std::size_t i = 1; i <= t; ++i) out.push_back({i, t, block(suffix[i - 1], offset)});
  }
  return out;
}

std::vector<NgramComponent> enumerate_components(const LinearizedCell& lin, std::span<const Tensor> embeddings) {
  std::vector<Tensor> A, g;
  A.reserve(embeddings.size());
  g.reserve(embeddings.size());
  for (const auto& x : embeddings) {
    TokenLinearization tl = lin.at(x);
    A.push_back(std::move(tl.A));
    g.push_back(std::move(tl.g));
  }
  return enumerate_components(A, g, lin.output_offset());
}

PolarityReport polarity_scores(const Tensor& w, std::span<const NgramComponent> components,
                               std::vector<std::string> tokens) {
  PolarityReport report;
  std::size_t T = 0;
  for (const auto& c : components) T = std::max(T, c.t);
  if (T == 0) throw ContractError("polarity_scores: no components");
  if (!tokens.empty() && tokens.size() != T) {
    throw ContractError("polarity_scores: " + std::to_string(tokens.size()) + " tokens for " + std::to_string(T) +
                        " positions");
  }
  report.tokens = std::move(tokens);
  report.span_scores.resize(T);
  for (std::size_t t = 1; t <= T; ++t) report.span_scores[t - 1].assign(t, 0.0);
  for (const auto& c : components) {
    if (c.v.size() != w.size()) {
      throw ShapeError("polarity_scores: w has length " + std::to_string(w.size()) + ", component has " +
                       std::to_string(c.v.size()));
    }
    report.span_scores[c.t - 1][c.i - 1] = dot(w, c.v);
  }
  report.context.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    double s = 0.0;
    for (double v : report.span_scores[t]) s += v;
    report.context[t] = s;
  }
  return report;
}

std::size_t ApproxErrorTrace::defined_count() const {
  std::size_t n = 0;
  for (bool b : defined) n += b ? 1 : 0;
  return n;
}

void ApproxErrorTrace::merge(const ApproxErrorTrace& other) {
  errors.insert(errors.end(), other.errors.begin(), other.errors.end());
  defined.insert(defined.end(), other.defined.begin(), other.defined.end());
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (!defined[k]) continue;
    total += errors[k];
    ++n;
  }
  mean = n ? total / static_cast<double>(n) : 0.0;
}

ApproxErrorTrace approx_error_trace(const CellParams& cell, const LinearizedCell& lin,
                                    std::span<const Tensor> embeddings, double weight_decay, ApproxMode mode) {
  if (!lin.cell() || lin.cell()->kind != cell.kind || lin.state_dim() != cell.state_dim()) {
    throw ContractError("approx_error_trace: linearization was not derived from this cell");
  }
  ApproxErrorTrace trace;
  trace.weight_decay = weight_decay;
  if (embeddings.empty()) return trace;

  const std::size_t offset = lin.output_offset();
  const std::vector<CellState> states = run_sequence(cell, embeddings);
  Tensor prev = Tensor::zeros({cell.state_dim()});
  Tensor linear_prev = prev;
  for (std::size_t t = 0; t < embeddings.size(); ++t) {
    const TokenLinearization tl = lin.at(embeddings[t]);
    const Tensor& base = mode == ApproxMode::OneStep ? prev : linear_prev;
    const Tensor predicted = add(tl.g, matmul(tl.A, base));
    const Tensor truth = states[t].stacked();
    const Tensor h = block(truth, offset);
    const double norm = norm2(h);
    if (norm == 0.0) {
      trace.errors.push_back(0.0);
      trace.defined.push_back(false);
    } else {
      trace.errors.push_back(norm2(sub(h, block(predicted, offset))) / norm);
      trace.defined.push_back(true);
    }
    prev = truth;
    linear_prev = predicted;
  }
  trace.merge({});
  return trace;
}

PolarTokens extract_polar_tokens(std::span<const LabeledInstance> corpus, double ratio_threshold, double lambda,
                                 const std::optional<std::set<std::string>>& lexicon) {
  if (corpus.empty()) throw ContractError("extract_polar_tokens: empty corpus");
  if (!(ratio_threshold > 1.0)) throw ContractError("extract_polar_tokens: ratio threshold must exceed 1");
  if (!(lambda > 0.0)) throw ContractError("extract_polar_tokens: smoothing must be positive");

  std::map<std::string, std::pair<double, double>> counts;
  for (const auto& inst : corpus) {
    const bool positive = inst.label > 0.5;
    for (const auto& tok : inst.tokens) {
      auto& c = counts[tok];
      (positive ? c.first : c.second) += 1.0;
    }
  }
  PolarTokens out;
  for (const auto& [tok, c] : counts) {
    if (lexicon && !lexicon->count(tok)) continue;
    const double ratio = (c.first + lambda) / (c.second + lambda);
    if (ratio > ratio_threshold) {
      out.positive.insert(tok);
    } else if (ratio < 1.0 / ratio_threshold) {
      out.negative.insert(tok);
    }
  }
  return out;
}

void export_heatmap_tsv(const PolarityReport& report, const std::filesystem::path& path) {
  const std::size_t T = report.length();
  if (T == 0) throw ContractError("export_heatmap_tsv: empty report");
  auto token = [&](std::size_t k) { return report.tokens.empty() ? std::to_string(k + 1) : report.tokens[k]; };

  std::ofstream out = open_out(path);
  out << "end\\start";
  for (std::size_t i = 0; i < T; ++i) out << '\t' << token(i);
  out << '\n';
  for (std::size_t t = 0; t < T; ++t) {
    out << token(t);
    for (std::size_t i = 0; i < T; ++i) {
      out << '\t';
      if (i <= t) out << fmt12(report.span_scores[t][i]);
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

HeatmapTable parse_heatmap_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + ": " + std::strerror(errno));
  auto split = [](const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    return fields;
  };

  HeatmapTable table;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty heatmap");
  auto header = split(line);
  table.tokens.assign(header.begin() + 1, header.end());
  const std::size_t T = table.tokens.size();
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = split(line);
    if (fields.size() != T + 1) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(T + 1) +
                      " fields");
    }
    std::vector<std::optional<double>> row;
    for (std::size_t k = 1; k <= T; ++k) {
      if (fields[k].empty()) {
        row.emplace_back();
        continue;
      }
      try {
        std::size_t used = 0;
        row.emplace_back(std::stod(fields[k], &used));
        if (used != fields[k].size()) throw std::invalid_argument(fields[k]);
      } catch (const std::exception&) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad value '" + fields[k] + "'");
      }
    }
    table.cells.push_back(std::move(row));
  }
  return table;
}

void export_context_tsv(const PolarityReport& report, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  for (std::size_t t = 0; t < report.context.size(); ++t) {
    out << t + 1 << '\t' << (report.tokens.empty() ? "" : report.tokens[t]) << '\t' << fmt12(report.context[t])
        << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void export_vectors_tsv(std::span<const LabeledVector> vectors, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  for (const auto& lv : vectors) {
    out << lv.label;
    for (double v : lv.v.data()) out << '\t' << fmt12(v);
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace ngram
