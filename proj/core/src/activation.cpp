#include "frn/activation.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "frn/error.hpp"

namespace frn {
namespace {

double second_branch(ActKind kind, double y, const ActSpec& spec, std::size_t c) {
  switch (kind) {
    case ActKind::RELU: return 0.0;
    case ActKind::TLU: return spec.tau[c];
    case ActKind::PRELU: return spec.kappa[c] * y;
    case ActKind::AFFINE_TLU: return spec.kappa[c] * y + spec.tau[c];
  }
  return 0.0;
}

}  // namespace

std::string_view name(ActKind kind) {
  switch (kind) {
    case ActKind::RELU: return "relu";
    case ActKind::TLU: return "tlu";
    case ActKind::PRELU: return "prelu";
    case ActKind::AFFINE_TLU: return "affine-tlu";
  }
  return "?";
}

ActKind parse_act_kind(std::string_view text) {
  for (ActKind k : {ActKind::RELU, ActKind::TLU, ActKind::PRELU, ActKind::AFFINE_TLU}) {
    if (name(k) == text) return k;
  }
  throw ConfigError("unknown activation '" + std::string(text) + "'");
}

bool uses_tau(ActKind kind) { return kind == ActKind::TLU || kind == ActKind::AFFINE_TLU; }
bool uses_kappa(ActKind kind) { return kind == ActKind::PRELU || kind == ActKind::AFFINE_TLU; }

ActSpec make_act_spec(ActKind kind, std::size_t channels) {
  ActSpec spec{kind, {}, {}};
  if (uses_tau(kind)) spec.tau = ChannelVec(channels, kDefaultTau);
  if (uses_kappa(kind)) spec.kappa = ChannelVec(channels, kDefaultKappa);
  return spec;
}

void validate(const ActSpec& spec, std::size_t channels) {
  const std::size_t want_tau = uses_tau(spec.kind) ? channels : 0;
  const std::size_t want_kappa = uses_kappa(spec.kind) ? channels : 0;
  if (spec.tau.size() != want_tau || spec.kappa.size() != want_kappa) {
    throw ConfigError(std::string(name(spec.kind)) + ": expected tau/kappa of length " +
                      std::to_string(want_tau) + "/" + std::to_string(want_kappa) + ", got " +
                      std::to_string(spec.tau.size()) + "/" + std::to_string(spec.kappa.size()));
  }
  require_finite(spec.tau.span(), "tau");
  require_finite(spec.kappa.span(), "kappa");
}

ActOutput act_forward(const Tensor4& y, const ActSpec& spec) {
  const std::size_t channels = y.shape().channels;
  validate(spec, channels);
  ActOutput out{Tensor4(y.shape()), ActContext{std::vector<unsigned char>(y.size(), 0), y}};
  const auto in = y.data();
  auto z = out.z.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double other = second_branch(spec.kind, in[i], spec, i % channels);
    if (other > in[i]) {
      z[i] = other;
      out.ctx.second_branch[i] = 1;
    } else {
      z[i] = in[i];
    }
  }
  return out;
}

ActGrads act_backward(const Tensor4& upstream, const ActContext& ctx, const ActSpec& spec) {
  const Shape& s = ctx.input.shape();
  if (upstream.shape() != s || ctx.second_branch.size() != s.size()) {
    throw ShapeError("act backward: upstream " + to_string(upstream.shape()) + " vs context " +
                     to_string(s));
  }
  validate(spec, s.channels);

  ActGrads g{Tensor4(s), std::nullopt, std::nullopt};
  if (uses_tau(spec.kind)) g.dtau = ChannelVec(s.channels);
  if (uses_kappa(spec.kind)) g.dkappa = ChannelVec(s.channels);

  const auto up = upstream.data();
  const auto y = ctx.input.data();
  auto dy = g.dy.data();
  for (std::size_t i = 0; i < up.size(); ++i) {
    const std::size_t c = i % s.channels;
    if (!ctx.second_branch[i]) {
      dy[i] = up[i];
      continue;
    }
    switch (spec.kind) {
      case ActKind::RELU:
      case ActKind::TLU: dy[i] = 0.0; break;
      case ActKind::PRELU:
      case ActKind::AFFINE_TLU:
        dy[i] = spec.kappa[c] * up[i];
        (*g.dkappa)[c] += up[i] * y[i];
        break;
    }
    if (g.dtau) (*g.dtau)[c] += up[i];
  }
  return g;
}

double kink_margin(const Tensor4& y, const ActSpec& spec) {
  const std::size_t channels = y.shape().channels;
  validate(spec, channels);
  double margin = std::numeric_limits<double>::infinity();
  const auto in = y.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    margin = std::min(margin, std::abs(in[i] - second_branch(spec.kind, in[i], spec, i % channels)));
  }
  return margin;
}

}  // namespace frn
