#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace frn {

/// Extents of a rank-4 activation tensor in batch, height, width, channel order.
struct Shape {
  std::size_t batch = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t channels = 1;

  std::size_t size() const { return batch * height * width * channels; }
  std::size_t spatial() const { return height * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Throws ShapeError if any extent is zero.
void validate(const Shape& s);

/// One real per channel: γ, β, τ, κ and the per-channel gradients.
struct ChannelVec {
  std::vector<double> values;

  ChannelVec() = default;
  explicit ChannelVec(std::size_t n, double fill = 0.0) : values(n, fill) {}
  ChannelVec(std::initializer_list<double> init) : values(init) {}

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  std::span<double> span() { return values; }
  std::span<const double> span() const { return values; }
  friend bool operator==(const ChannelVec&, const ChannelVec&) = default;
};

/// Dense row-major matrix, used for per-(batch, channel) statistics.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// Deterministic random stream: std::mt19937_64 (whose output sequence the
/// C++ standard pins down) with hand-rolled uniform and Box-Muller normal
/// conversions, so a seed yields the same numbers with any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Uniform integer in [0, n) by rejection sampling.
  std::uint64_t uniform_index(std::uint64_t n);
  std::uint64_t next_u64() { return engine_(); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Dense rank-4 tensor of doubles in B,H,W,C row-major order.
///
/// Operations in this header never mutate their arguments; they return
/// fresh tensors. Element access through data()/at() is provided for
/// kernels that build a result tensor.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape shape);
  Tensor4(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  std::size_t index(std::size_t b, std::size_t h, std::size_t w, std::size_t c) const {
    return ((b * shape_.height + h) * shape_.width + w) * shape_.channels + c;
  }
  double at(std::size_t b, std::size_t h, std::size_t w, std::size_t c) const {
    return data_[index(b, h, w, c)];
  }
  double& at(std::size_t b, std::size_t h, std::size_t w, std::size_t c) {
    return data_[index(b, h, w, c)];
  }

  /// Contiguous slice of samples [first, first + count).
  Tensor4 samples(std::size_t first, std::size_t count) const;

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  Shape shape_{};
  std::vector<double> data_;
};

Tensor4 zeros(Shape shape);
Tensor4 full(Shape shape, double value);
Tensor4 random_normal(Shape shape, Rng& rng, double mean = 0.0, double stddev = 1.0);

/// Mean over H and W for every (b, c), accumulated sequentially in h, w order.
Matrix reduce_mean_spatial(const Tensor4& x);

Tensor4 map(const Tensor4& x, const std::function<double(double)>& op);
/// Elementwise binary op; shapes must match exactly.
Tensor4 zip(const Tensor4& x, const Tensor4& y, const std::function<double(double, double)>& op);
/// op(x[b,h,w,c], v[c]) for every element; v.size() must equal C.
Tensor4 broadcast_channel(const Tensor4& x, const ChannelVec& v,
                          const std::function<double(double, double)>& op);

/// Concatenate along the batch axis; all other extents must match.
Tensor4 concat_batch(const Tensor4& a, const Tensor4& b);

/// Throws NumericError naming `what` if any entry is NaN or infinite.
void require_finite(std::span<const double> values, const char* what);

}  // namespace frn
