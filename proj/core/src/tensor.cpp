#include "frn/tensor.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "frn/error.hpp"

namespace frn {

std::string to_string(const Shape& s) {
  return std::to_string(s.batch) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width) +
         "x" + std::to_string(s.channels);
}

void validate(const Shape& s) {
  if (s.batch == 0 || s.height == 0 || s.width == 0 || s.channels == 0) {
    throw ShapeError("tensor shape " + to_string(s) + " has a zero dimension");
  }
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 1 - uniform() lies in (0, 1], keeping log finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw RangeError("uniform_index: empty range");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return v % n;
}

Tensor4::Tensor4(Shape shape) : shape_(shape) {
  validate(shape_);
  data_.assign(shape_.size(), 0.0);
}

Tensor4::Tensor4(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  validate(shape_);
  if (data_.size() != shape_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                     to_string(shape_));
  }
}

Tensor4 Tensor4::samples(std::size_t first, std::size_t count) const {
  if (count == 0 || first + count > shape_.batch) {
    throw ShapeError("sample range out of bounds for batch of " + std::to_string(shape_.batch));
  }
  Shape s = shape_;
  s.batch = count;
  const std::size_t stride = shape_.height * shape_.width * shape_.channels;
  std::vector<double> out(data_.begin() + static_cast<std::ptrdiff_t>(first * stride),
                          data_.begin() + static_cast<std::ptrdiff_t>((first + count) * stride));
  return Tensor4(s, std::move(out));
}

Tensor4 zeros(Shape shape) { return Tensor4(shape); }

Tensor4 full(Shape shape, double value) {
  validate(shape);
  return Tensor4(shape, std::vector<double>(shape.size(), value));
}

Tensor4 random_normal(Shape shape, Rng& rng, double mean, double stddev) {
  Tensor4 t(shape);
  for (double& v : t.data()) v = rng.normal(mean, stddev);
  return t;
}

Matrix reduce_mean_spatial(const Tensor4& x) {
  const Shape& s = x.shape();
  Matrix m{s.batch, s.channels, std::vector<double>(s.batch * s.channels, 0.0)};
  const auto d = x.data();
  for (std::size_t b = 0; b < s.batch; ++b) {
    double* row = m.data.data() + b * s.channels;
    const double* src = d.data() + b * s.spatial() * s.channels;
    for (std::size_t p = 0; p < s.spatial(); ++p) {
      for (std::size_t c = 0; c < s.channels; ++c) row[c] += src[p * s.channels + c];
    }
    const double inv = 1.0 / static_cast<double>(s.spatial());
    for (std::size_t c = 0; c < s.channels; ++c) row[c] *= inv;
  }
  return m;
}

Tensor4 map(const Tensor4& x, const std::function<double(double)>& op) {
  Tensor4 out(x.shape());
  auto o = out.data();
  auto in = x.data();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = op(in[i]);
  return out;
}

Tensor4 zip(const Tensor4& x, const Tensor4& y, const std::function<double(double, double)>& op) {
  if (x.shape() != y.shape()) {
    throw ShapeError("zip: shape " + to_string(x.shape()) + " vs " + to_string(y.shape()));
  }
  Tensor4 out(x.shape());
  auto o = out.data();
  auto a = x.data();
  auto b = y.data();
  for (std::size_t i = 0; i < a.size(); ++i) o[i] = op(a[i], b[i]);
  return out;
}

Tensor4 broadcast_channel(const Tensor4& x, const ChannelVec& v,
                          const std::function<double(double, double)>& op) {
  const std::size_t channels = x.shape().channels;
  if (v.size() != channels) {
    throw ShapeError("broadcast_channel: vector of length " + std::to_string(v.size()) +
                     " for " + std::to_string(channels) + " channels");
  }
  Tensor4 out(x.shape());
  auto o = out.data();
  auto in = x.data();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = op(in[i], v[i % channels]);
  return out;
}

Tensor4 concat_batch(const Tensor4& a, const Tensor4& b) {
  Shape sa = a.shape();
  Shape sb = b.shape();
  if (sa.height != sb.height || sa.width != sb.width || sa.channels != sb.channels) {
    throw ShapeError("concat_batch: " + to_string(sa) + " vs " + to_string(sb));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  sa.batch += sb.batch;
  return Tensor4(sa, std::move(out));
}

void require_finite(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError(std::string(what) + ": non-finite value at index " + std::to_string(i));
    }
  }
}

}  // namespace frn
