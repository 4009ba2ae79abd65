#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ngram {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Dense row-major array of doubles, rank 0, 1 or 2. Every entry is finite;
// construction rejects NaN and Inf with NumericalError.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor filled(Shape shape, double value);
  static Tensor identity(std::size_t d);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool is_scalar() const { return data_.size() == 1 && shape_.size() <= 1; }
  bool is_vector() const { return shape_.size() == 1; }
  bool is_matrix() const { return shape_.size() == 2; }

  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return data_; }
  // Writes through this span must keep entries finite; check_finite() re-validates.
  std::span<double> mutable_data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  double item() const;

  void check_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

enum class ElementwiseKind { Sigmoid, Tanh, SigmoidDeriv, TanhDeriv, Mul, Add, Sub };

double sigmoid(double u);

Tensor elementwise(ElementwiseKind kind, const Tensor& a);
Tensor elementwise(ElementwiseKind kind, const Tensor& a, const Tensor& b);

Tensor matmul(const Tensor& a, const Tensor& b);
// a^T * b without materializing the transpose.
Tensor matmul_tn(const Tensor& a, const Tensor& b);
// a * b^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor outer(const Tensor& u, const Tensor& v);
Tensor diag_embed(const Tensor& v);
Tensor diagonal(const Tensor& m);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

// out += s * a, shapes must match.
void axpy(double s, const Tensor& a, Tensor& out);

double dot(const Tensor& a, const Tensor& b);
double sum(const Tensor& a);
double norm2(const Tensor& a);
double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
// ||a - b|| / max(||a||, ||b||); 0 when both are zero.
double relative_diff(const Tensor& a, const Tensor& b);

// Binary container: "NGRT", u32 version, u32 rank, u64 dims, f64 payload, all
// little-endian.
inline constexpr std::uint32_t kTensorFormatVersion = 1;
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace ngram
