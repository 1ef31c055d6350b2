#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "frn/tensor.hpp"

namespace frn {

/// Pointwise activations of the form max(first, second):
///   RELU        max(y, 0)
///   TLU         max(y, τ)
///   PRELU       max(y, κ·y)
///   AFFINE_TLU  max(y, κ·y + τ)
enum class ActKind { RELU, TLU, PRELU, AFFINE_TLU };

std::string_view name(ActKind kind);
/// Accepts "relu", "tlu", "prelu", "affine-tlu". Throws ConfigError.
ActKind parse_act_kind(std::string_view text);
bool uses_tau(ActKind kind);
bool uses_kappa(ActKind kind);

inline constexpr double kDefaultTau = 0.0;
inline constexpr double kDefaultKappa = 0.25;

/// Activation kind plus its per-channel parameters. `tau` is empty unless the
/// kind uses τ, likewise `kappa`.
struct ActSpec {
  ActKind kind = ActKind::RELU;
  ChannelVec tau;
  ChannelVec kappa;
};

/// τ = 0 (TLU starts out as ReLU), κ = 0.25.
ActSpec make_act_spec(ActKind kind, std::size_t channels);
/// Throws ConfigError if the parameter vectors do not fit `kind` and `channels`.
void validate(const ActSpec& spec, std::size_t channels);

struct ActContext {
  /// 1 where the second branch of the max was taken.
  std::vector<unsigned char> second_branch;
  /// The activation input, needed for ∂f/∂κ.
  Tensor4 input;
};

struct ActOutput {
  Tensor4 z;
  ActContext ctx;
};

struct ActGrads {
  Tensor4 dy;
  std::optional<ChannelVec> dtau;
  std::optional<ChannelVec> dkappa;
};

/// Ties (first == second) resolve to the first branch y.
ActOutput act_forward(const Tensor4& y, const ActSpec& spec);
ActGrads act_backward(const Tensor4& upstream, const ActContext& ctx, const ActSpec& spec);

/// min over elements of |first − second|: the distance from the kink, in output units.
double kink_margin(const Tensor4& y, const ActSpec& spec);

}  // namespace frn
