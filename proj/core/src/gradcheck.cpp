#include "frn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "frn/error.hpp"
#include "frn/layer.hpp"

namespace frn {
namespace {

struct Point {
  Tensor4 x;
  NormActParams params;
};

double weighted_loss(const Point& pt, const NormSpec& spec, std::span<const double> weights) {
  BnState bn = make_bn_state(pt.x.shape().channels, spec.bn_momentum);
  const NormActForward f = norm_act_forward(pt.x, spec, pt.params, Phase::Train, &bn);
  double loss = 0.0;
  const auto z = f.z.data();
  for (std::size_t i = 0; i < z.size(); ++i) loss += weights[i] * z[i];
  return loss;
}

// True when every non-degenerate cell has a denominator of at least `floor`.
// A cell whose normalized values are all zero (IN with N = 1, say) has an
// identically zero input gradient and is fine at any denominator.
bool well_conditioned(const NormContext& ctx, double floor) {
  if (ctx.denom.empty()) return true;
  std::vector<double> peak(ctx.denom.size(), 0.0);
  const Shape& s = ctx.shape;
  const std::size_t per_sample = s.spatial() * s.channels;
  const auto xh = ctx.xhat.data();
  for (std::size_t i = 0; i < xh.size(); ++i) {
    const std::size_t k = cell_index(ctx.kind, s, ctx.group_size, i / per_sample, i % s.channels);
    peak[k] = std::max(peak[k], std::abs(xh[i]));
  }
  for (std::size_t k = 0; k < peak.size(); ++k) {
    if (peak[k] > 0.0 && ctx.denom[k] < floor) return false;
  }
  return true;
}

using Accessor = std::function<std::span<double>(Point&)>;

struct Surface {
  std::string name;
  Accessor access;
};

}  // namespace

std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> at, double step) {
  if (!(step > 0.0)) throw RangeError("finite_diff_grad: step must be positive");
  std::vector<double> probe(at.begin(), at.end());
  std::vector<double> grad(at.size());
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double up = f(probe);
    probe[i] = orig - step;
    const double down = f(probe);
    probe[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff_grad: non-finite function value at coordinate " +
                         std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

GradReport compare_gradients(std::string parameter, std::span<const double> analytic,
                             std::span<const double> numeric, const Tolerance& tol) {
  if (analytic.size() != numeric.size()) {
    throw ShapeError("compare_gradients: " + std::to_string(analytic.size()) + " analytic vs " +
                     std::to_string(numeric.size()) + " numeric entries");
  }
  GradReport r;
  r.parameter = std::move(parameter);
  const double scale_floor = tol.abs_floor / tol.rel;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double diff = std::abs(analytic[i] - numeric[i]);
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), scale_floor});
    const double rel = diff / scale;
    // A NaN entry becomes the worst entry and stays there.
    if (!std::isnan(r.max_rel_error) && !(rel <= r.max_rel_error)) {
      r.max_rel_error = rel;
      r.worst_index = i;
    }
    if (!std::isnan(r.max_abs_error) && !(diff <= r.max_abs_error)) r.max_abs_error = diff;
  }
  r.pass = r.max_rel_error <= tol.rel;
  return r;
}

std::vector<GradReport> check_layer(const LayerUnderTest& layer, const Shape& shape, Rng& rng,
                                    const CheckOptions& options) {
  validate(shape);
  const NormSpec& spec = layer.norm;
  validate(spec, shape.channels);

  Point pt;
  std::vector<double> weights(shape.size());
  NormActForward fwd;
  bool accepted = false;
  for (std::size_t attempt = 0; attempt < options.max_draws && !accepted; ++attempt) {
    pt.x = random_normal(shape, rng);
    pt.params = init_norm_act_params(spec, layer.act, shape.channels);
    for (double& g : pt.params.norm.gamma.values) g = 1.0 + 0.25 * rng.normal();
    for (double& b : pt.params.norm.beta.values) b = 0.5 * rng.normal();
    for (double& t : pt.params.act.tau.values) t = 0.5 * rng.normal();
    for (double& k : pt.params.act.kappa.values) k = kDefaultKappa + 0.1 * rng.normal();
    for (double& w : weights) w = rng.normal();

    BnState bn = make_bn_state(shape.channels, spec.bn_momentum);
    NormOutput n = norm_forward(pt.x, pt.params.norm, spec, Phase::Train, &bn);
    if (!well_conditioned(n.ctx, options.min_denominator)) continue;
    if (kink_margin(n.y, pt.params.act) < options.kink_margin) continue;
    fwd = norm_act_forward(pt.x, spec, pt.params, Phase::Train, &bn);
    accepted = true;
  }
  if (!accepted) {
    throw NumericError("check_layer: no admissible random point in " +
                       std::to_string(options.max_draws) + " draws");
  }

  Tensor4 upstream(shape, weights);
  const NormActGrads grads = norm_act_backward(upstream, fwd, pt.params);

  std::vector<std::pair<Surface, std::vector<double>>> surfaces;
  surfaces.push_back({{"input", [](Point& p) { return p.x.data(); }},
                      {grads.dx.data().begin(), grads.dx.data().end()}});
  surfaces.push_back({{"gamma", [](Point& p) { return p.params.norm.gamma.span(); }},
                      grads.dgamma.values});
  surfaces.push_back({{"beta", [](Point& p) { return p.params.norm.beta.span(); }},
                      grads.dbeta.values});
  if (grads.dtau) {
    surfaces.push_back({{"tau", [](Point& p) { return p.params.act.tau.span(); }},
                        grads.dtau->values});
  }
  if (grads.dkappa) {
    surfaces.push_back({{"kappa", [](Point& p) { return p.params.act.kappa.span(); }},
                        grads.dkappa->values});
  }
  if (grads.deps_l) {
    surfaces.push_back(
        {{"eps_l", [](Point& p) { return std::span<double>(&*p.params.norm.eps_l, 1); }},
         {*grads.deps_l}});
  }

  std::vector<GradReport> reports;
  for (auto& [surface, analytic] : surfaces) {
    Point probe = pt;
    const std::span<double> target = surface.access(probe);
    const std::vector<double> at(target.begin(), target.end());
    const ScalarFn f = [&](std::span<const double> v) {
      std::copy(v.begin(), v.end(), target.begin());
      return weighted_loss(probe, spec, weights);
    };
    const std::vector<double> numeric = finite_diff_grad(f, at, options.step);
    reports.push_back(compare_gradients(surface.name, analytic, numeric, options.tol));
  }
  return reports;
}

}  // namespace frn
