#include "frn/schedule.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "frn/error.hpp"
#include "frn/tensor.hpp"

namespace frn {

double cosine_decay_lr(std::size_t step, std::size_t total, double base) {
  if (step > total) {
    throw RangeError("cosine_decay_lr: step " + std::to_string(step) + " beyond total " +
                     std::to_string(total));
  }
  if (total == 0) return base;
  const double frac = static_cast<double>(step) / static_cast<double>(total);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

double cosine_warmup_lr(std::size_t step, std::size_t warmup, double base) {
  if (warmup == 0) return base;
  if (step > warmup) {
    throw RangeError("cosine_warmup_lr: step " + std::to_string(step) + " beyond warmup " +
                     std::to_string(warmup));
  }
  const double frac = static_cast<double>(step) / static_cast<double>(warmup);
  return base * 0.5 * (1.0 - std::cos(std::numbers::pi * frac));
}

double scheduled_lr(std::size_t step, std::size_t total, std::size_t warmup, double base) {
  if (warmup > total) throw RangeError("scheduled_lr: warmup exceeds total steps");
  if (warmup > 0 && step <= warmup) return cosine_warmup_lr(step, warmup, base);
  return cosine_decay_lr(step - warmup, total - warmup, base);
}

double linear_scaled_lr(std::size_t batch_size, double reference_lr) {
  return reference_lr * static_cast<double>(batch_size) / 256.0;
}

void sgd_step(std::span<double> weights, std::span<const double> grads, std::span<double> velocity,
              const SgdHyper& hyper, bool apply_decay) {
  if (grads.size() != weights.size() || velocity.size() != weights.size()) {
    throw ShapeError("sgd_step: weights/grads/velocity lengths differ");
  }
  require_finite(grads, "sgd_step gradient");
  const double decay = apply_decay ? hyper.weight_decay : 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    velocity[i] = hyper.momentum * velocity[i] + grads[i] + decay * weights[i];
    weights[i] -= hyper.lr * velocity[i];
  }
}

}  // namespace frn
