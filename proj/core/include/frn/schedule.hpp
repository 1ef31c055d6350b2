#pragma once

#include <cstddef>
#include <span>

namespace frn {

/// base · ½(1 + cos(π·step/total)), no restarts. Throws RangeError for step > total.
double cosine_decay_lr(std::size_t step, std::size_t total, double base);

/// base · ½(1 − cos(π·step/warmup)): rises from 0 to base.
/// Throws RangeError for step > warmup; with warmup = 0 returns base.
double cosine_warmup_lr(std::size_t step, std::size_t warmup, double base);

/// Warm-up over [0, warmup], then cosine decay over the remaining steps.
/// Both phases give `base` at step == warmup.
double scheduled_lr(std::size_t step, std::size_t total, std::size_t warmup, double base);

/// Linear scaling rule: reference_lr · batch / 256 (0.1 at batch 256 by default).
double linear_scaled_lr(std::size_t batch_size, double reference_lr = 0.1);

struct SgdHyper {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 4e-4;
};

/// One momentum-SGD update, in place:
///   v ← momentum·v + g + weight_decay·w   (decay term only if apply_decay)
///   w ← w − lr·v
/// Throws NumericError on a non-finite gradient and ShapeError on length mismatch.
void sgd_step(std::span<double> weights, std::span<const double> grads, std::span<double> velocity,
              const SgdHyper& hyper, bool apply_decay);

}  // namespace frn
