#pragma once

// Naive reference normalizers used as test oracles. They gather each
// reduction cell into an explicit list of coordinates and evaluate the
// textbook formulas on it, sharing no code with the library kernels.

#include <cmath>
#include <cstddef>
#include <vector>

#include "frn/norm.hpp"
#include "frn/tensor.hpp"

namespace frn::ref {

struct Coord {
  std::size_t b, h, w, c;
};

inline std::vector<std::vector<Coord>> cells(NormKind kind, const Shape& s, std::size_t group) {
  std::vector<std::vector<Coord>> out;
  auto spatial = [&](std::size_t b, std::size_t c0, std::size_t c1, std::vector<Coord>& into) {
    for (std::size_t h = 0; h < s.height; ++h)
      for (std::size_t w = 0; w < s.width; ++w)
        for (std::size_t c = c0; c < c1; ++c) into.push_back({b, h, w, c});
  };
  switch (kind) {
    case NormKind::FRN:
    case NormKind::IN:
      for (std::size_t b = 0; b < s.batch; ++b)
        for (std::size_t c = 0; c < s.channels; ++c) spatial(b, c, c + 1, out.emplace_back());
      break;
    case NormKind::GN:
    case NormKind::GFRN:
      for (std::size_t b = 0; b < s.batch; ++b)
        for (std::size_t c = 0; c < s.channels; c += group) spatial(b, c, c + group, out.emplace_back());
      break;
    case NormKind::LN:
    case NormKind::LFRN:
      for (std::size_t b = 0; b < s.batch; ++b) spatial(b, 0, s.channels, out.emplace_back());
      break;
    case NormKind::BN:
      for (std::size_t c = 0; c < s.channels; ++c) {
        auto& cell = out.emplace_back();
        for (std::size_t b = 0; b < s.batch; ++b) spatial(b, c, c + 1, cell);
      }
      break;
    case NormKind::NONE: break;
  }
  return out;
}

/// x̂ for any scheme, with a fixed ε.
inline Tensor4 normalize(const Tensor4& x, NormKind kind, std::size_t group, double eps) {
  Tensor4 out(x.shape());
  if (kind == NormKind::NONE) return x;
  for (const auto& cell : cells(kind, x.shape(), group)) {
    const double n = static_cast<double>(cell.size());
    double mean = 0.0;
    if (is_centered(kind)) {
      for (const Coord& k : cell) mean += x.at(k.b, k.h, k.w, k.c);
      mean /= n;
    }
    double second = 0.0;
    for (const Coord& k : cell) {
      const double v = x.at(k.b, k.h, k.w, k.c) - mean;
      second += v * v;
    }
    second /= n;
    for (const Coord& k : cell) {
      out.at(k.b, k.h, k.w, k.c) = (x.at(k.b, k.h, k.w, k.c) - mean) / std::sqrt(second + eps);
    }
  }
  return out;
}

}  // namespace frn::ref
