#include "ngram/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ngram/errors.hpp"

namespace ngram {

namespace {

std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

template <typename F>
Tensor map_unary(const Tensor& a, F f) {
  std::vector<double> out(a.size());
  auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return Tensor(a.shape(), std::move(out));
}

template <typename F>
Tensor map_binary(const Tensor& a, const Tensor& b, const char* op, F f) {
  require_same_shape(a, b, op);
  std::vector<double> out(a.size());
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i], y[i]);
  return Tensor(a.shape(), std::move(out));
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : shape_{0} {}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {
  if (shape_.size() > 2) throw ShapeError("tensor rank above 2 is not supported");
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.size() > 2) throw ShapeError("tensor rank above 2 is not supported");
  if (shape_product(shape_) != data_.size()) {
    throw ShapeError("shape " + shape_string(shape_) + " does not match " + std::to_string(data_.size()) +
                     " values");
  }
  check_finite();
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

Tensor Tensor::filled(Shape shape, double value) {
  const std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::identity(std::size_t d) {
  std::vector<double> v(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;
  return Tensor(Shape{d, d}, std::move(v));
}

std::size_t Tensor::rows() const {
  if (shape_.empty()) return 1;
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() < 2) return 1;
  return shape_[1];
}

double Tensor::item() const {
  if (data_.size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

void Tensor::check_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) throw NumericalError("non-finite entry in tensor of shape " + shape_string(shape_));
  }
}

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

Tensor elementwise(ElementwiseKind kind, const Tensor& a) {
  switch (kind) {
    case ElementwiseKind::Sigmoid:
      return map_unary(a, [](double u) { return sigmoid(u); });
    case ElementwiseKind::Tanh:
      return map_unary(a, [](double u) { return std::tanh(u); });
    case ElementwiseKind::SigmoidDeriv:
      return map_unary(a, [](double u) {
        const double s = sigmoid(u);
        return s * (1.0 - s);
      });
    case ElementwiseKind::TanhDeriv:
      return map_unary(a, [](double u) {
        const double t = std::tanh(u);
        return 1.0 - t * t;
      });
    default:
      throw ContractError("binary elementwise kind called with one operand");
  }
}

Tensor elementwise(ElementwiseKind kind, const Tensor& a, const Tensor& b) {
  switch (kind) {
    case ElementwiseKind::Mul:
      return hadamard(a, b);
    case ElementwiseKind::Add:
      return add(a, b);
    case ElementwiseKind::Sub:
      return sub(a, b);
    default:
      throw ContractError("unary elementwise kind called with two operands");
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (!a.is_matrix() || (!b.is_matrix() && !b.is_vector())) {
    throw ShapeError("matmul: expected matrix x (matrix|vector), got " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  const std::size_t m = a.rows();
  const std::size_t k = a.cols();
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: inner dimensions differ " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  if (b.is_vector()) {
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double* row = pa + i * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += row[p] * pb[p];
      out[i] = acc;
    }
    return Tensor(Shape{m}, std::move(out));
  }
  const std::size_t n = b.cols();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = pa[i * k + p];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += s * brow[j];
    }
  }
  return Tensor(Shape{m, n}, std::move(out));
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  if (!a.is_matrix() || (!b.is_matrix() && !b.is_vector())) {
    throw ShapeError("matmul_tn: expected matrix^T x (matrix|vector)");
  }
  const std::size_t k = a.rows();
  const std::size_t m = a.cols();
  if (b.shape()[0] != k) {
    throw ShapeError("matmul_tn: inner dimensions differ " + shape_string(a.shape()) + "^T x " +
                     shape_string(b.shape()));
  }
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  const std::size_t n = b.is_vector() ? 1 : b.cols();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = pa + p * m;
    const double* brow = pb + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double s = arow[i];
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += s * brow[j];
    }
  }
  if (b.is_vector()) return Tensor(Shape{m}, std::move(out));
  return Tensor(Shape{m, n}, std::move(out));
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (!a.is_matrix() || !b.is_matrix()) throw ShapeError("matmul_nt: expected matrix x matrix^T");
  const std::size_t m = a.rows();
  const std::size_t k = a.cols();
  const std::size_t n = b.rows();
  if (b.cols() != k) {
    throw ShapeError("matmul_nt: inner dimensions differ " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()) + "^T");
  }
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += pa[i * k + p] * pb[j * k + p];
      out[i * n + j] = acc;
    }
  }
  return Tensor(Shape{m, n}, std::move(out));
}

Tensor transpose(const Tensor& a) {
  if (a.is_vector()) return a;
  if (!a.is_matrix()) throw ShapeError("transpose: expected matrix");
  const std::size_t r = a.rows();
  const std::size_t c = a.cols();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a(i, j);
  }
  return Tensor(Shape{c, r}, std::move(out));
}

Tensor outer(const Tensor& u, const Tensor& v) {
  if (!u.is_vector() || !v.is_vector()) throw ShapeError("outer: expected two vectors");
  const std::size_t m = u.size();
  const std::size_t n = v.size();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = u[i] * v[j];
  }
  return Tensor(Shape{m, n}, std::move(out));
}

Tensor diag_embed(const Tensor& v) {
  if (!v.is_vector()) throw ShapeError("diag_embed: expected vector, got " + shape_string(v.shape()));
  const std::size_t d = v.size();
  std::vector<double> out(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) out[i * d + i] = v[i];
  return Tensor(Shape{d, d}, std::move(out));
}

Tensor diagonal(const Tensor& m) {
  if (!m.is_matrix() || m.rows() != m.cols()) throw ShapeError("diagonal: expected square matrix");
  std::vector<double> out(m.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = m(i, i);
  return Tensor::vector(std::move(out));
}

Tensor add(const Tensor& a, const Tensor& b) {
  return map_binary(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return map_binary(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  return map_binary(a, b, "mul", [](double x, double y) { return x * y; });
}

Tensor scale(const Tensor& a, double s) {
  return map_unary(a, [s](double x) { return s * x; });
}

void axpy(double s, const Tensor& a, Tensor& out) {
  require_same_shape(a, out, "axpy");
  auto x = a.data();
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += s * x[i];
}

double dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw ShapeError("dot: size mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return acc;
}

double norm2(const Tensor& a) { return std::sqrt(dot(a, a)); }

double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double relative_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "relative_diff");
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] - b[i]) * (a[i] - b[i]);
  const double denom = std::max(norm2(a), norm2(b));
  if (denom == 0.0) return std::sqrt(diff) == 0.0 ? 0.0 : INFINITY;
  return std::sqrt(diff) / denom;
}

namespace {

template <typename T>
void write_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!in) throw IoError("tensor container truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
  out.write("NGRT", 4);
  write_le<std::uint32_t>(out, kTensorFormatVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t dim : t.shape()) write_le<std::uint64_t>(out, dim);
  for (double v : t.data()) write_le<double>(out, v);
  if (!out) throw IoError("failed writing tensor container");
}

Tensor read_tensor(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "NGRT", 4) != 0) throw IoError("bad tensor container magic");
  const auto version = read_le<std::uint32_t>(in);
  if (version != kTensorFormatVersion) {
    throw IoError("unsupported tensor container version " + std::to_string(version));
  }
  const auto rank = read_le<std::uint32_t>(in);
  if (rank > 2) throw IoError("tensor container rank " + std::to_string(rank) + " exceeds 2");
  Shape shape(rank);
  for (auto& dim : shape) dim = static_cast<std::size_t>(read_le<std::uint64_t>(in));
  std::vector<double> data(shape_product(shape));
  for (auto& v : data) v = read_le<double>(in);
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing: " + std::strerror(errno));
  write_tensor(out, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + ": " + std::strerror(errno));
  return read_tensor(in);
}

}  // namespace ngram
