#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "frn/tensor.hpp"

namespace frn {

/// Normalization schemes. FRN and its group/layer-extent siblings GFRN and
/// LFRN divide by the uncentered second moment; IN, GN, LN and BN subtract the
/// mean first. NONE applies only the affine transform.
enum class NormKind { FRN, IN, BN, GN, LN, GFRN, LFRN, NONE };

std::string_view name(NormKind kind);
/// Parses the lower-case CLI spelling ("frn", "gfrn", ...). Throws ConfigError.
NormKind parse_norm_kind(std::string_view text);
/// True for every scheme whose statistics come from a single sample.
bool is_per_sample(NormKind kind);
bool is_centered(NormKind kind);

/// Floor added to the learned offset: ε = kLearnedEpsFloor + |ε_l|.
inline constexpr double kLearnedEpsFloor = 1e-6;
inline constexpr double kDefaultEps = 1e-6;
inline constexpr double kDefaultLearnedEpsInit = 1e-4;
inline constexpr double kDefaultBnMomentum = 0.99;

struct FixedEps {
  double eps = kDefaultEps;
};
struct LearnedEps {
  double init = kDefaultLearnedEpsInit;
};
using EpsPolicy = std::variant<FixedEps, LearnedEps>;

double effective_eps(const EpsPolicy& policy);

struct NormSpec {
  NormKind kind = NormKind::FRN;
  /// Channels per group; consulted by GN and GFRN only.
  std::size_t group_size = 1;
  EpsPolicy eps = FixedEps{};
  double bn_momentum = kDefaultBnMomentum;
};

/// Throws ConfigError when `spec` cannot normalize a tensor with `channels` channels.
void validate(const NormSpec& spec, std::size_t channels);
std::string describe(const NormSpec& spec);

/// Learned affine parameters of one normalization layer, plus the learned
/// ε offset when the spec uses LearnedEps.
struct NormParams {
  ChannelVec gamma;
  ChannelVec beta;
  std::optional<double> eps_l;
};

/// γ = 1, β = 0, ε_l from the policy's initial value (absent for FixedEps).
NormParams init_norm_params(const NormSpec& spec, std::size_t channels);

/// Moving statistics that BN uses at inference time.
struct BnState {
  ChannelVec moving_mean;
  ChannelVec moving_var;
  double momentum = kDefaultBnMomentum;
  bool initialized = false;
};

BnState make_bn_state(std::size_t channels, double momentum = kDefaultBnMomentum);

/// Everything the backward pass needs; produced by a forward call.
struct NormContext {
  NormKind kind = NormKind::NONE;
  Shape shape;
  std::size_t group_size = 1;
  /// Normalized activations x̂ (centered for IN/BN/GN/LN).
  Tensor4 xhat;
  /// sqrt(statistic + ε) per reduction cell.
  std::vector<double> denom;
  /// Cell means; empty for uncentered schemes.
  std::vector<double> mean;
  /// Number of elements sharing one statistic (N).
  std::size_t cell_size = 1;
  double eps = 0.0;
  bool learned_eps = false;
  double eps_l = 0.0;
  /// BN evaluated with moving statistics; has no backward.
  bool inference = false;
};

struct NormOutput {
  Tensor4 y;
  NormContext ctx;
};

struct NormGrads {
  Tensor4 dx;
  ChannelVec dgamma;
  ChannelVec dbeta;
  /// Present exactly when the forward used a learned ε.
  std::optional<double> deps_l;
};

enum class Phase { Train, Eval };

/// Number of reduction cells and the cell holding element (b, ·, ·, c).
std::size_t cell_count(NormKind kind, const Shape& shape, std::size_t group_size);
std::size_t cell_index(NormKind kind, const Shape& shape, std::size_t group_size, std::size_t b,
                       std::size_t c);

/// Dispatching entry points used by the network and the gradient checker.
/// `state` is required for BN and ignored otherwise; in Phase::Train, BN updates it.
NormOutput norm_forward(const Tensor4& x, const NormParams& params, const NormSpec& spec,
                        Phase phase = Phase::Train, BnState* state = nullptr);
NormGrads norm_backward(const Tensor4& upstream, const NormContext& ctx, const NormParams& params);

// Per-scheme entry points. Each checks that spec.kind matches.

NormOutput frn_forward(const Tensor4& x, const NormParams& params, const NormSpec& spec);
NormGrads frn_backward(const Tensor4& upstream, const NormContext& ctx, const NormParams& params);

NormOutput in_forward(const Tensor4& x, const NormParams& params, const NormSpec& spec);
NormGrads in_backward(const Tensor4& upstream, const NormContext& ctx, const NormParams& params);

NormOutput gn_forward(const Tensor4& x, const NormParams& params, const NormSpec& spec);
NormGrads gn_backward(const Tensor4& upstream, const NormContext& ctx, const NormParams& params);

NormOutput ln_forward(const Tensor4& x, const NormParams& params, const NormSpec& spec);
NormGrads ln_backward(const Tensor4& upstream, const NormContext& ctx, const NormParams& params);

NormOutput gfrn_forward(const Tensor4& x, const NormParams& params, const NormSpec& spec);
NormGrads gfrn_backward(const Tensor4& upstream, const NormContext& ctx, const NormParams& params);

NormOutput lfrn_forward(const Tensor4& x, const NormParams& params, const NormSpec& spec);
NormGrads lfrn_backward(const Tensor4& upstream, const NormContext& ctx, const NormParams& params);

/// Batch statistics over (B, H, W) per channel; folds them into `state`.
NormOutput bn_forward_train(const Tensor4& x, const NormParams& params, const NormSpec& spec,
                            BnState& state);
/// Uses the moving statistics. Throws StateError if `state` was never updated.
Tensor4 bn_forward_eval(const Tensor4& x, const NormParams& params, const NormSpec& spec,
                        const BnState& state);
/// Exact train-mode gradient, including the dependence of the batch statistics on x.
NormGrads bn_backward(const Tensor4& upstream, const NormContext& ctx, const NormParams& params);

/// N = 1 specialization of FRN: x / sqrt(x² + ε). Softsign-like for large ε,
/// sign-like as ε → 0. Throws DomainError for x = ε = 0 or ε < 0.
double frn_scalar(double x, double eps);

}  // namespace frn
