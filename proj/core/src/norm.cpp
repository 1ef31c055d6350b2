#include "frn/norm.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "frn/error.hpp"

namespace frn {
namespace {

struct Stats {
  std::vector<double> mean;  // empty when uncentered
  std::vector<double> second;  // variance, or mean of squares when uncentered
};

void check_params(const NormParams& p, const NormSpec& spec, std::size_t channels) {
  if (p.gamma.size() != channels || p.beta.size() != channels) {
    throw ShapeError("norm params: gamma/beta of length " + std::to_string(p.gamma.size()) + "/" +
                     std::to_string(p.beta.size()) + " for " + std::to_string(channels) +
                     " channels");
  }
  const bool learned = std::holds_alternative<LearnedEps>(spec.eps);
  if (learned && !p.eps_l) throw ConfigError("learned epsilon policy but params carry no eps_l");
  if (!learned && p.eps_l) throw ConfigError("fixed epsilon policy but params carry eps_l");
}

void require_kind(const NormSpec& spec, NormKind expected) {
  if (spec.kind != expected) {
    throw ConfigError("expected a " + std::string(name(expected)) + " spec, got " +
                      std::string(name(spec.kind)));
  }
}

// Cell statistics, accumulated in memory order. The order in which any one
// cell receives its terms depends only on that cell's elements, so per-sample
// schemes give the same bits regardless of what else is in the batch.
Stats cell_stats(const Tensor4& x, NormKind kind, std::size_t group_size) {
  const Shape& s = x.shape();
  const std::size_t cells = cell_count(kind, s, group_size);
  const double inv_n = static_cast<double>(cells) / static_cast<double>(s.size());
  const auto d = x.data();
  Stats st;
  st.second.assign(cells, 0.0);
  const std::size_t per_sample = s.spatial() * s.channels;

  if (is_centered(kind)) {
    st.mean.assign(cells, 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
      st.mean[cell_index(kind, s, group_size, i / per_sample, i % s.channels)] += d[i];
    }
    for (double& m : st.mean) m *= inv_n;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const std::size_t k = cell_index(kind, s, group_size, i / per_sample, i % s.channels);
      const double centered = d[i] - st.mean[k];
      st.second[k] += centered * centered;
    }
  } else {
    for (std::size_t i = 0; i < d.size(); ++i) {
      st.second[cell_index(kind, s, group_size, i / per_sample, i % s.channels)] += d[i] * d[i];
    }
  }
  for (double& v : st.second) v *= inv_n;
  return st;
}

double resolve_eps(const NormSpec& spec, const NormParams& p, bool& learned, double& eps_l) {
  learned = std::holds_alternative<LearnedEps>(spec.eps);
  if (learned) {
    eps_l = *p.eps_l;
    if (!std::isfinite(eps_l)) throw NumericError("eps_l is not finite");
    return kLearnedEpsFloor + std::abs(eps_l);
  }
  eps_l = 0.0;
  const double eps = std::get<FixedEps>(spec.eps).eps;
  if (!(eps >= 0.0) || !std::isfinite(eps)) {
    throw ConfigError("fixed epsilon must be finite and >= 0");
  }
  return eps;
}

// Normalizes x with the given statistics and applies the affine transform.
NormOutput apply(const Tensor4& x, const NormParams& p, const NormSpec& spec, const Stats& st,
                 bool inference) {
  const Shape& s = x.shape();
  NormContext ctx;
  ctx.kind = spec.kind;
  ctx.shape = s;
  ctx.group_size = spec.group_size;
  ctx.inference = inference;
  ctx.eps = resolve_eps(spec, p, ctx.learned_eps, ctx.eps_l);

  const std::size_t cells = cell_count(spec.kind, s, spec.group_size);
  ctx.cell_size = s.size() / cells;
  ctx.mean = st.mean;
  ctx.denom.resize(cells);
  for (std::size_t k = 0; k < cells; ++k) {
    ctx.denom[k] = std::sqrt(st.second[k] + ctx.eps);
    if (ctx.denom[k] == 0.0) {
      throw NumericError("division by zero: reduction cell " + std::to_string(k) +
                         " is constant and epsilon is 0");
    }
  }

  ctx.xhat = Tensor4(s);
  Tensor4 y(s);
  const auto in = x.data();
  auto xh = ctx.xhat.data();
  auto out = y.data();
  const std::size_t per_sample = s.spatial() * s.channels;
  const bool centered = !ctx.mean.empty();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const std::size_t c = i % s.channels;
    const std::size_t k = cell_index(spec.kind, s, spec.group_size, i / per_sample, c);
    const double v = centered ? in[i] - ctx.mean[k] : in[i];
    xh[i] = v / ctx.denom[k];
    out[i] = p.gamma[c] * xh[i] + p.beta[c];
  }
  return {std::move(y), std::move(ctx)};
}

NormOutput forward_from_batch(const Tensor4& x, const NormParams& p, const NormSpec& spec) {
  validate(spec, x.shape().channels);
  check_params(p, spec, x.shape().channels);
  require_finite(x.data(), "normalization input");
  if (spec.kind == NormKind::NONE) {
    NormContext ctx;
    ctx.kind = NormKind::NONE;
    ctx.shape = x.shape();
    ctx.eps = resolve_eps(spec, p, ctx.learned_eps, ctx.eps_l);
    ctx.xhat = x;
    Tensor4 y = broadcast_channel(x, p.gamma, [](double a, double g) { return a * g; });
    y = broadcast_channel(y, p.beta, [](double a, double b) { return a + b; });
    return {std::move(y), std::move(ctx)};
  }
  return apply(x, p, spec, cell_stats(x, spec.kind, spec.group_size), false);
}

}  // namespace

std::string_view name(NormKind kind) {
  switch (kind) {
    case NormKind::FRN: return "frn";
    case NormKind::IN: return "in";
    case NormKind::BN: return "bn";
    case NormKind::GN: return "gn";
    case NormKind::LN: return "ln";
    case NormKind::GFRN: return "gfrn";
    case NormKind::LFRN: return "lfrn";
    case NormKind::NONE: return "none";
  }
  return "?";
}

NormKind parse_norm_kind(std::string_view text) {
  for (NormKind k : {NormKind::FRN, NormKind::IN, NormKind::BN, NormKind::GN, NormKind::LN,
                     NormKind::GFRN, NormKind::LFRN, NormKind::NONE}) {
    if (name(k) == text) return k;
  }
  throw ConfigError("unknown normalization scheme '" + std::string(text) + "'");
}

bool is_per_sample(NormKind kind) { return kind != NormKind::BN; }

bool is_centered(NormKind kind) {
  return kind == NormKind::IN || kind == NormKind::BN || kind == NormKind::GN ||
         kind == NormKind::LN;
}

double effective_eps(const EpsPolicy& policy) {
  if (const auto* learned = std::get_if<LearnedEps>(&policy)) {
    return kLearnedEpsFloor + std::abs(learned->init);
  }
  return std::get<FixedEps>(policy).eps;
}

void validate(const NormSpec& spec, std::size_t channels) {
  if (spec.kind == NormKind::GN || spec.kind == NormKind::GFRN) {
    if (spec.group_size == 0 || channels % spec.group_size != 0) {
      throw ConfigError(std::string(name(spec.kind)) + ": group size " +
                        std::to_string(spec.group_size) + " does not divide " +
                        std::to_string(channels) + " channels");
    }
  }
  if (const auto* fixed = std::get_if<FixedEps>(&spec.eps)) {
    if (!(fixed->eps >= 0.0) || !std::isfinite(fixed->eps)) {
      throw ConfigError("fixed epsilon must be finite and >= 0");
    }
  }
  if (spec.kind == NormKind::BN && !(spec.bn_momentum > 0.0 && spec.bn_momentum < 1.0)) {
    throw ConfigError("bn momentum must lie in (0, 1)");
  }
}

std::string describe(const NormSpec& spec) {
  std::ostringstream os;
  os << name(spec.kind);
  if (spec.kind == NormKind::GN || spec.kind == NormKind::GFRN) os << "(group=" << spec.group_size << ")";
  if (const auto* learned = std::get_if<LearnedEps>(&spec.eps)) {
    os << " eps=learned(" << learned->init << ")";
  } else {
    os << " eps=" << std::get<FixedEps>(spec.eps).eps;
  }
  return os.str();
}

NormParams init_norm_params(const NormSpec& spec, std::size_t channels) {
  NormParams p{ChannelVec(channels, 1.0), ChannelVec(channels, 0.0), std::nullopt};
  if (const auto* learned = std::get_if<LearnedEps>(&spec.eps)) p.eps_l = learned->init;
  return p;
}

BnState make_bn_state(std::size_t channels, double momentum) {
  return BnState{ChannelVec(channels, 0.0), ChannelVec(channels, 1.0), momentum, false};
}

std::size_t cell_count(NormKind kind, const Shape& shape, std::size_t group_size) {
  switch (kind) {
    case NormKind::FRN:
    case NormKind::IN: return shape.batch * shape.channels;
    case NormKind::GN:
    case NormKind::GFRN: return shape.batch * (shape.channels / group_size);
    case NormKind::LN:
    case NormKind::LFRN: return shape.batch;
    case NormKind::BN: return shape.channels;
    case NormKind::NONE: return shape.size();
  }
  return 0;
}

std::size_t cell_index(NormKind kind, const Shape& shape, std::size_t group_size, std::size_t b,
                       std::size_t c) {
  switch (kind) {
    case NormKind::FRN:
    case NormKind::IN: return b * shape.channels + c;
    case NormKind::GN:
    case NormKind::GFRN: return b * (shape.channels / group_size) + c / group_size;
    case NormKind::LN:
    case NormKind::LFRN: return b;
    case NormKind::BN: return c;
    case NormKind::NONE: break;
  }
  throw ConfigError("cell_index: scheme has no reduction cells");
}

NormOutput norm_forward(const Tensor4& x, const NormParams& params, const NormSpec& spec,
                        Phase phase, BnState* state) {
  if (spec.kind != NormKind::BN) return forward_from_batch(x, params, spec);
  if (state == nullptr) throw StateError("bn forward requires a BnState");
  if (phase == Phase::Train) return bn_forward_train(x, params, spec, *state);

  validate(spec, x.shape().channels);
  check_params(params, spec, x.shape().channels);
  require_finite(x.data(), "normalization input");
  if (!state->initialized) throw StateError("bn eval: moving statistics were never updated");
  Stats st{state->moving_mean.values, state->moving_var.values};
  return apply(x, params, spec, st, true);
}

NormGrads norm_backward(const Tensor4& upstream, const NormContext& ctx, const NormParams& params) {
  if (ctx.inference) throw StateError("no backward pass for inference-mode normalization");
  if (upstream.shape() != ctx.shape) {
    throw ShapeError("norm backward: upstream " + to_string(upstream.shape()) + " vs context " +
                     to_string(ctx.shape));
  }
  const Shape& s = ctx.shape;
  if (params.gamma.size() != s.channels || params.beta.size() != s.channels) {
    throw ShapeError("norm backward: params do not match channel count");
  }

  NormGrads g{Tensor4(s), ChannelVec(s.channels), ChannelVec(s.channels), std::nullopt};
  const auto dy = upstream.data();
  const auto xh = ctx.xhat.data();
  for (std::size_t i = 0; i < dy.size(); ++i) {
    const std::size_t c = i % s.channels;
    g.dgamma[c] += dy[i] * xh[i];
    g.dbeta[c] += dy[i];
  }

  auto dx = g.dx.data();
  if (ctx.kind == NormKind::NONE) {
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = params.gamma[i % s.channels] * dy[i];
    if (ctx.learned_eps) g.deps_l = 0.0;
    return g;
  }

  // Per cell: with ĝ = γ·dy, dx = (ĝ − mean(ĝ) − x̂·mean(ĝ·x̂)) / denom,
  // where the mean(ĝ) term is present only for centered schemes. This is the
  // projector (I − x̂x̂ᵀ/N) applied without forming it.
  const std::size_t cells = ctx.denom.size();
  const std::size_t per_sample = s.spatial() * s.channels;
  const bool centered = !ctx.mean.empty();
  std::vector<double> sum_g(cells, 0.0);
  std::vector<double> sum_gx(cells, 0.0);
  for (std::size_t i = 0; i < dy.size(); ++i) {
    const std::size_t c = i % s.channels;
    const std::size_t k = cell_index(ctx.kind, s, ctx.group_size, i / per_sample, c);
    const double gh = params.gamma[c] * dy[i];
    sum_g[k] += gh;
    sum_gx[k] += gh * xh[i];
  }
  const double inv_n = 1.0 / static_cast<double>(ctx.cell_size);
  for (std::size_t i = 0; i < dy.size(); ++i) {
    const std::size_t c = i % s.channels;
    const std::size_t k = cell_index(ctx.kind, s, ctx.group_size, i / per_sample, c);
    double v = params.gamma[c] * dy[i] - xh[i] * (sum_gx[k] * inv_n);
    if (centered) v -= sum_g[k] * inv_n;
    dx[i] = v / ctx.denom[k];
  }

  if (ctx.learned_eps) {
    // ∂x̂/∂ε = −x̂ / (2·denom²) in every cell.
    double deps = 0.0;
    for (std::size_t k = 0; k < cells; ++k) deps += -0.5 * sum_gx[k] / (ctx.denom[k] * ctx.denom[k]);
    const double sign = ctx.eps_l > 0.0 ? 1.0 : (ctx.eps_l < 0.0 ? -1.0 : 0.0);
    g.deps_l = sign * deps;
  }
  return g;
}

NormOutput frn_forward(const Tensor4& x, const NormParams& params, const NormSpec& spec) {
  require_kind(spec, NormKind::FRN);
  return forward_from_batch(x, params, spec);
}

NormGrads frn_backward(const Tensor4& upstream, const NormContext& ctx, const NormParams& params) {
  if (ctx.kind != NormKind::FRN) throw ConfigError("frn_backward: context is not from FRN");
  return norm_backward(upstream, ctx, params);
}

NormOutput in_forward(const Tensor4& x, const NormParams& params, const NormSpec& spec) {
  require_kind(spec, NormKind::IN);
  return forward_from_batch(x, params, spec);
}

NormGrads in_backward(const Tensor4& upstream, const NormContext& ctx, const NormParams& params) {
  if (ctx.kind != NormKind::IN) throw ConfigError("in_backward: context is not from IN");
  return norm_backward(upstream, ctx, params);
}

NormOutput gn_forward(const Tensor4& x, const NormParams& params, const NormSpec& spec) {
  require_kind(spec, NormKind::GN);
  return forward_from_batch(x, params, spec);
}

NormGrads gn_backward(const Tensor4& upstream, const NormContext& ctx, const NormParams& params) {
  if (ctx.kind != NormKind::GN) throw ConfigError("gn_backward: context is not from GN");
  return norm_backward(upstream, ctx, params);
}

NormOutput ln_forward(const Tensor4& x, const NormParams& params, const NormSpec& spec) {
  require_kind(spec, NormKind::LN);
  return forward_from_batch(x, params, spec);
}

NormGrads ln_backward(const Tensor4& upstream, const NormContext& ctx, const NormParams& params) {
  if (ctx.kind != NormKind::LN) throw ConfigError("ln_backward: context is not from LN");
  return norm_backward(upstream, ctx, params);
}

NormOutput gfrn_forward(const Tensor4& x, const NormParams& params, const NormSpec& spec) {
  require_kind(spec, NormKind::GFRN);
  return forward_from_batch(x, params, spec);
}

NormGrads gfrn_backward(const Tensor4& upstream, const NormContext& ctx, const NormParams& params) {
  if (ctx.kind != NormKind::GFRN) throw ConfigError("gfrn_backward: context is not from GFRN");
  return norm_backward(upstream, ctx, params);
}

NormOutput lfrn_forward(const Tensor4& x, const NormParams& params, const NormSpec& spec) {
  require_kind(spec, NormKind::LFRN);
  return forward_from_batch(x, params, spec);
}

NormGrads lfrn_backward(const Tensor4& upstream, const NormContext& ctx, const NormParams& params) {
  if (ctx.kind != NormKind::LFRN) throw ConfigError("lfrn_backward: context is not from LFRN");
  return norm_backward(upstream, ctx, params);
}

NormOutput bn_forward_train(const Tensor4& x, const NormParams& params, const NormSpec& spec,
                            BnState& state) {
  require_kind(spec, NormKind::BN);
  validate(spec, x.shape().channels);
  check_params(params, spec, x.shape().channels);
  require_finite(x.data(), "normalization input");
  const std::size_t channels = x.shape().channels;
  if (state.moving_mean.size() != channels || state.moving_var.size() != channels) {
    throw ShapeError("bn state does not match channel count");
  }

  Stats st = cell_stats(x, NormKind::BN, spec.group_size);
  NormOutput out = apply(x, params, spec, st, false);

  const double m = state.momentum;
  for (std::size_t c = 0; c < channels; ++c) {
    state.moving_mean[c] = m * state.moving_mean[c] + (1.0 - m) * st.mean[c];
    state.moving_var[c] = m * state.moving_var[c] + (1.0 - m) * st.second[c];
  }
  state.initialized = true;
  return out;
}

Tensor4 bn_forward_eval(const Tensor4& x, const NormParams& params, const NormSpec& spec,
                        const BnState& state) {
  require_kind(spec, NormKind::BN);
  BnState copy = state;
  return norm_forward(x, params, spec, Phase::Eval, &copy).y;
}

NormGrads bn_backward(const Tensor4& upstream, const NormContext& ctx, const NormParams& params) {
  if (ctx.kind != NormKind::BN) throw ConfigError("bn_backward: context is not from BN");
  return norm_backward(upstream, ctx, params);
}

double frn_scalar(double x, double eps) {
  if (eps < 0.0) throw DomainError("frn_scalar: negative epsilon");
  if (x == 0.0 && eps == 0.0) throw DomainError("frn_scalar: 0/0 at x = 0 with epsilon = 0");
  return x / std::sqrt(x * x + eps);
}

}  // namespace frn
