#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "frn/activation.hpp"
#include "frn/norm.hpp"

namespace frn {

/// Agreement thresholds between analytic and numerical gradients.
struct Tolerance {
  double rel = 1e-6;
  double abs_floor = 1e-8;
};

/// Outcome of comparing one gradient surface.
///
/// max_rel_error is the floored relative error
///   max_i |a_i − n_i| / max(|a_i|, |n_i|, abs_floor / rel),
/// so a coordinate counts as passing when it is within `rel` relatively or
/// within `abs_floor` absolutely, and pass ⇔ max_rel_error ≤ rel. Since every
/// coordinate with |a_i − n_i| ≤ abs_floor is then within tolerance,
/// max_abs_error ≤ abs_floor also implies pass.
struct GradReport {
  std::string parameter;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  bool pass = true;
};

using ScalarFn = std::function<double(std::span<const double>)>;

/// Central differences (f(x + h·e_i) − f(x − h·e_i)) / 2h per coordinate.
/// Throws RangeError for step ≤ 0, NumericError if f returns a non-finite value.
std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> at, double step);

GradReport compare_gradients(std::string parameter, std::span<const double> analytic,
                             std::span<const double> numeric, const Tolerance& tol);

/// The layer under test: a normalization followed by an activation.
struct LayerUnderTest {
  NormSpec norm;
  ActKind act = ActKind::TLU;
};

struct CheckOptions {
  Tolerance tol;
  double step = 1e-5;
  /// Minimum distance of every activation input from its kink.
  double kink_margin = 1e-3;
  /// Cells whose statistic is nonzero must have sqrt(stat + ε) at least this large.
  double min_denominator = 0.2;
  std::size_t max_draws = 1000;
};

/// Checks every gradient surface (input, gamma, beta, and tau, kappa, eps_l
/// where present) of the layer at a random point drawn from `rng`.
///
/// The scalar loss is Σ w_i·z_i with fixed random weights w, so the upstream
/// gradient is generic. Draws too close to a kink, or with a badly
/// conditioned normalizer cell, are discarded and redrawn. BN runs in
/// training mode.
std::vector<GradReport> check_layer(const LayerUnderTest& layer, const Shape& shape, Rng& rng,
                                    const CheckOptions& options = {});

}  // namespace frn
