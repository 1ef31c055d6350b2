#pragma once

#include <optional>

#include "frn/activation.hpp"
#include "frn/norm.hpp"

namespace frn {

/// A normalization followed by a pointwise activation, e.g. FRN + TLU.
struct NormActParams {
  NormParams norm;
  ActSpec act;
};

NormActParams init_norm_act_params(const NormSpec& norm, ActKind act, std::size_t channels);

struct NormActForward {
  Tensor4 z;
  NormContext norm_ctx;
  ActContext act_ctx;
};

struct NormActGrads {
  Tensor4 dx;
  ChannelVec dgamma;
  ChannelVec dbeta;
  std::optional<double> deps_l;
  std::optional<ChannelVec> dtau;
  std::optional<ChannelVec> dkappa;
};

NormActForward norm_act_forward(const Tensor4& x, const NormSpec& spec, const NormActParams& params,
                                Phase phase = Phase::Train, BnState* bn = nullptr);
NormActGrads norm_act_backward(const Tensor4& upstream, const NormActForward& fwd,
                               const NormActParams& params);

}  // namespace frn
