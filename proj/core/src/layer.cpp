#include "frn/layer.hpp"

#include <utility>

namespace frn {

NormActParams init_norm_act_params(const NormSpec& norm, ActKind act, std::size_t channels) {
  return {init_norm_params(norm, channels), make_act_spec(act, channels)};
}

NormActForward norm_act_forward(const Tensor4& x, const NormSpec& spec, const NormActParams& params,
                                Phase phase, BnState* bn) {
  NormOutput n = norm_forward(x, params.norm, spec, phase, bn);
  ActOutput a = act_forward(n.y, params.act);
  return {std::move(a.z), std::move(n.ctx), std::move(a.ctx)};
}

NormActGrads norm_act_backward(const Tensor4& upstream, const NormActForward& fwd,
                               const NormActParams& params) {
  ActGrads a = act_backward(upstream, fwd.act_ctx, params.act);
  NormGrads n = norm_backward(a.dy, fwd.norm_ctx, params.norm);
  return {std::move(n.dx), std::move(n.dgamma), std::move(n.dbeta), n.deps_l, std::move(a.dtau),
          std::move(a.dkappa)};
}

}  // namespace frn
