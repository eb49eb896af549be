#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ib {

// All numeric state in this library is double precision. Vectors are plain
// std::vector<double>; Matrix is dense row-major.
using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  Vector& data() { return data_; }
  const Vector& data() const { return data_; }

  Vector row(std::size_t r) const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

// Standard matrix product; rejects shape mismatches with a shape report.
Matrix matmul(const Matrix& a, const Matrix& b);

// y = A x.
Vector matvec(const Matrix& a, const Vector& x);

// Softmax with max-subtraction so large logits cannot overflow. Input must
// be nonempty; finiteness is the caller's obligation.
Vector stable_softmax(const Vector& z);

enum class Norm { L1, L2, Linf };

double norm(const Vector& v, Norm mode = Norm::L1);

Norm parse_norm(const std::string& text);  // "l1" | "l2" | "linf"
std::string to_string(Norm mode);

// Length-K indicator vector; label must lie in [0, num_classes).
Vector one_hot(int label, int num_classes);

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

// Deterministic child seed for a (seed, stream) pair. Used wherever one run
// seed has to drive several independent generators.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// xoshiro256++ seeded through splitmix64. Uniform doubles take the top 53
// bits of the raw output; normals use the Marsaglia polar method; bounded
// integers use rejection sampling, so every draw is reproducible from the
// seed alone. Single-owner: never share one instance across threads, derive
// per-stream generators with split().
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();                          // [0, 1)
  double normal();                           // standard normal
  std::uint64_t below(std::uint64_t bound);  // unbiased draw from [0, bound)
  std::vector<std::size_t> permutation(std::size_t n);

  // Child generator, deterministic in (seed, stream) and independent of how
  // much this instance has already drawn.
  Rng split(std::uint64_t stream) const;

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t state_[4] = {};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ib
