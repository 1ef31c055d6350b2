#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "frn/layer.hpp"
#include "frn/tensor.hpp"

namespace frn {

// ---------------------------------------------------------------------------
// Convolution with TensorFlow-style SAME padding. Weights are laid out as
// [kernel_h][kernel_w][in_channels][out_channels].
// ---------------------------------------------------------------------------

struct ConvGeometry {
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
};

/// Output extent ceil(in / stride), with padding split floor-first.
std::size_t same_output_size(std::size_t in, std::size_t stride);
std::size_t same_pad_before(std::size_t in, std::size_t kernel, std::size_t stride);

Tensor4 conv2d_forward(const Tensor4& x, std::span<const double> weights, const ConvGeometry& g);

struct ConvGrads {
  Tensor4 dx;
  std::vector<double> dweights;
};

/// Gradients of conv2d_forward; dx is skipped (left empty) when want_dx is false.
ConvGrads conv2d_backward(const Tensor4& x, std::span<const double> weights,
                          const Tensor4& upstream, const ConvGeometry& g, bool want_dx = true);

/// Mean over H and W, giving a (B, C) matrix.
Matrix global_avg_pool(const Tensor4& x);

struct CrossEntropy {
  double loss = 0.0;          // mean over the batch
  Matrix dlogits;             // ∂loss/∂logits
  std::size_t correct = 0;    // argmax hits
};

/// Softmax cross-entropy with max-subtraction.
CrossEntropy softmax_cross_entropy(const Matrix& logits, std::span<const int> labels);

// ---------------------------------------------------------------------------
// ToyNet: conv3×3(C_in→16) → norm+act → conv3×3/2(16→32) → norm+act →
// global average pool → dense(32→classes).
// ---------------------------------------------------------------------------

struct ToyNetShape {
  std::size_t in_channels = 1;
  std::size_t num_classes = 4;
  std::size_t width1 = 16;
  std::size_t width2 = 32;
};

/// All trainable parameters. The same struct holds gradients and momentum
/// buffers, so the three can be walked in lockstep through views().
struct ToyNetParams {
  std::vector<double> conv1;
  NormActParams layer1;
  std::vector<double> conv2;
  NormActParams layer2;
  std::vector<double> dense_w;  // [width2][num_classes]
  std::vector<double> dense_b;
};

struct ParamView {
  std::string name;
  std::span<double> values;
  /// Conv and dense weights; normalization/activation parameters and the
  /// dense bias are exempt from weight decay.
  bool is_weight = false;
};

/// Fixed-order list of every parameter tensor in `p`.
std::vector<ParamView> views(ToyNetParams& p);
/// A structurally identical copy with every entry set to zero.
ToyNetParams zeros_like(const ToyNetParams& p);

struct ToyNetCache {
  Tensor4 input;
  Tensor4 a1;
  NormActForward l1;
  Tensor4 a2;
  NormActForward l2;
  Matrix pooled;
  Matrix logits;
};

class ToyNet {
 public:
  /// He-normal conv/dense weights (stddev sqrt(2 / fan_in)), zero dense bias,
  /// default norm/activation parameters.
  ToyNet(const ToyNetShape& shape, const NormSpec& norm, ActKind act, Rng& rng);

  const ToyNetShape& shape() const { return shape_; }
  const NormSpec& norm_spec() const { return norm_; }

  ToyNetParams& params() { return params_; }
  const ToyNetParams& params() const { return params_; }

  /// In Phase::Train BN layers use (and fold into their moving averages) the
  /// batch statistics; in Phase::Eval they use the moving averages.
  ToyNetCache forward(const Tensor4& x, Phase phase);
  /// Parameter gradients given ∂loss/∂logits.
  ToyNetParams backward(const ToyNetCache& cache, const Matrix& dlogits) const;

  /// min kink margin over both activation layers of a forward pass.
  double kink_margin(const ToyNetCache& cache) const;

  const BnState& bn1() const { return bn1_; }
  const BnState& bn2() const { return bn2_; }

 private:
  ToyNetShape shape_;
  NormSpec norm_;
  ConvGeometry g1_;
  ConvGeometry g2_;
  ToyNetParams params_;
  BnState bn1_;
  BnState bn2_;
};

}  // namespace frn
