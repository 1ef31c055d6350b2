#include "frn/toynet.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "frn/error.hpp"

namespace frn {

std::size_t same_output_size(std::size_t in, std::size_t stride) { return (in + stride - 1) / stride; }

std::size_t same_pad_before(std::size_t in, std::size_t kernel, std::size_t stride) {
  const std::size_t out = same_output_size(in, stride);
  const std::size_t needed = (out - 1) * stride + kernel;
  return needed > in ? (needed - in) / 2 : 0;
}

// AVX2 clones only widen the vectorized channel loops; without FMA every
// output sees the same operations in the same order as the default clone.
#if defined(__GNUC__) && defined(__x86_64__) && !defined(__clang__)
#define FRN_KERNEL_CLONES __attribute__((target_clones("avx2", "default")))
#else
#define FRN_KERNEL_CLONES
#endif

FRN_KERNEL_CLONES
Tensor4 conv2d_forward(const Tensor4& x, std::span<const double> weights, const ConvGeometry& g) {
  const Shape& s = x.shape();
  if (s.channels != g.in_channels ||
      weights.size() != g.kernel * g.kernel * g.in_channels * g.out_channels) {
    throw ShapeError("conv2d_forward: input " + to_string(s) + " does not fit the kernel");
  }
  const std::size_t oh_n = same_output_size(s.height, g.stride);
  const std::size_t ow_n = same_output_size(s.width, g.stride);
  const std::size_t pad_h = same_pad_before(s.height, g.kernel, g.stride);
  const std::size_t pad_w = same_pad_before(s.width, g.kernel, g.stride);
  const std::size_t cin = g.in_channels;
  const std::size_t cout = g.out_channels;

  Tensor4 y(Shape{s.batch, oh_n, ow_n, cout});
  const double* in = x.data().data();
  double* out = y.data().data();
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t oh = 0; oh < oh_n; ++oh) {
      for (std::size_t ow = 0; ow < ow_n; ++ow) {
        double* o = out + ((b * oh_n + oh) * ow_n + ow) * cout;
        for (std::size_t kh = 0; kh < g.kernel; ++kh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + kh) -
                                    static_cast<std::ptrdiff_t>(pad_h);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(s.height)) continue;
          for (std::size_t kw = 0; kw < g.kernel; ++kw) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + kw) -
                                      static_cast<std::ptrdiff_t>(pad_w);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(s.width)) continue;
            const double* px = in + ((b * s.height + static_cast<std::size_t>(ih)) * s.width +
                                     static_cast<std::size_t>(iw)) * cin;
            const double* pw = weights.data() + (kh * g.kernel + kw) * cin * cout;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double xv = px[ci];
              const double* wrow = pw + ci * cout;
              for (std::size_t co = 0; co < cout; ++co) o[co] += xv * wrow[co];
            }
          }
        }
      }
    }
  }
  return y;
}

FRN_KERNEL_CLONES
ConvGrads conv2d_backward(const Tensor4& x, std::span<const double> weights,
                          const Tensor4& upstream, const ConvGeometry& g, bool want_dx) {
  const Shape& s = x.shape();
  const std::size_t oh_n = same_output_size(s.height, g.stride);
  const std::size_t ow_n = same_output_size(s.width, g.stride);
  if (upstream.shape() != Shape{s.batch, oh_n, ow_n, g.out_channels}) {
    throw ShapeError("conv2d_backward: upstream " + to_string(upstream.shape()) +
                     " does not match the forward output");
  }
  const std::size_t pad_h = same_pad_before(s.height, g.kernel, g.stride);
  const std::size_t pad_w = same_pad_before(s.width, g.kernel, g.stride);
  const std::size_t cin = g.in_channels;
  const std::size_t cout = g.out_channels;

  // Kernel transposed to [kh][kw][cout][cin] so the dx update runs along cin.
  std::vector<double> wt(weights.size());
  for (std::size_t k = 0; k < g.kernel * g.kernel; ++k) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t co = 0; co < cout; ++co) {
        wt[(k * cout + co) * cin + ci] = weights[(k * cin + ci) * cout + co];
      }
    }
  }

  ConvGrads grads{want_dx ? Tensor4(s) : Tensor4(), std::vector<double>(weights.size(), 0.0)};
  const double* in = x.data().data();
  const double* up = upstream.data().data();
  double* dx = want_dx ? grads.dx.data().data() : nullptr;
  double* dw = grads.dweights.data();
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t oh = 0; oh < oh_n; ++oh) {
      for (std::size_t ow = 0; ow < ow_n; ++ow) {
        const double* u = up + ((b * oh_n + oh) * ow_n + ow) * cout;
        for (std::size_t kh = 0; kh < g.kernel; ++kh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + kh) -
                                    static_cast<std::ptrdiff_t>(pad_h);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(s.height)) continue;
          for (std::size_t kw = 0; kw < g.kernel; ++kw) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + kw) -
                                      static_cast<std::ptrdiff_t>(pad_w);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(s.width)) continue;
            const std::size_t pix = ((b * s.height + static_cast<std::size_t>(ih)) * s.width +
                                     static_cast<std::size_t>(iw)) * cin;
            const std::size_t k = kh * g.kernel + kw;
            double* pdw = dw + k * cin * cout;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double xv = in[pix + ci];
              double* row = pdw + ci * cout;
              for (std::size_t co = 0; co < cout; ++co) row[co] += xv * u[co];
            }
            if (dx != nullptr) {
              double* pdx = dx + pix;
              const double* pwt = wt.data() + k * cout * cin;
              for (std::size_t co = 0; co < cout; ++co) {
                const double uv = u[co];
                const double* row = pwt + co * cin;
                for (std::size_t ci = 0; ci < cin; ++ci) pdx[ci] += uv * row[ci];
              }
            }
          }
        }
      }
    }
  }
  return grads;
}

Matrix global_avg_pool(const Tensor4& x) { return reduce_mean_spatial(x); }

CrossEntropy softmax_cross_entropy(const Matrix& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows) throw ShapeError("cross entropy: label count mismatch");
  CrossEntropy ce;
  ce.dlogits = Matrix{logits.rows, logits.cols, std::vector<double>(logits.data.size())};
  const double inv_b = 1.0 / static_cast<double>(logits.rows);
  for (std::size_t b = 0; b < logits.rows; ++b) {
    const double* row = logits.data.data() + b * logits.cols;
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= logits.cols) {
      throw RangeError("cross entropy: label " + std::to_string(label) + " out of range");
    }
    const std::size_t arg = static_cast<std::size_t>(std::max_element(row, row + logits.cols) - row);
    const double peak = row[arg];
    double denom = 0.0;
    for (std::size_t k = 0; k < logits.cols; ++k) denom += std::exp(row[k] - peak);
    const double log_denom = std::log(denom);
    ce.loss += (log_denom - (row[label] - peak)) * inv_b;
    if (arg == static_cast<std::size_t>(label)) ++ce.correct;
    double* d = ce.dlogits.data.data() + b * logits.cols;
    for (std::size_t k = 0; k < logits.cols; ++k) {
      const double p = std::exp(row[k] - peak - log_denom);
      d[k] = (p - (k == static_cast<std::size_t>(label) ? 1.0 : 0.0)) * inv_b;
    }
  }
  return ce;
}

namespace {

void append_norm_act_views(std::vector<ParamView>& out, const std::string& prefix,
                           NormActParams& p) {
  out.push_back({prefix + ".gamma", p.norm.gamma.span(), false});
  out.push_back({prefix + ".beta", p.norm.beta.span(), false});
  if (p.norm.eps_l) out.push_back({prefix + ".eps_l", std::span<double>(&*p.norm.eps_l, 1), false});
  if (p.act.tau.size() > 0) out.push_back({prefix + ".tau", p.act.tau.span(), false});
  if (p.act.kappa.size() > 0) out.push_back({prefix + ".kappa", p.act.kappa.span(), false});
}

std::vector<double> he_normal(std::size_t count, std::size_t fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  std::vector<double> w(count);
  for (double& v : w) v = rng.normal(0.0, stddev);
  return w;
}

}  // namespace

std::vector<ParamView> views(ToyNetParams& p) {
  std::vector<ParamView> out;
  out.push_back({"conv1", p.conv1, true});
  append_norm_act_views(out, "layer1", p.layer1);
  out.push_back({"conv2", p.conv2, true});
  append_norm_act_views(out, "layer2", p.layer2);
  out.push_back({"dense_w", p.dense_w, true});
  out.push_back({"dense_b", p.dense_b, false});
  return out;
}

ToyNetParams zeros_like(const ToyNetParams& p) {
  ToyNetParams z = p;
  for (ParamView& v : views(z)) std::fill(v.values.begin(), v.values.end(), 0.0);
  return z;
}

ToyNet::ToyNet(const ToyNetShape& shape, const NormSpec& norm, ActKind act, Rng& rng)
    : shape_(shape),
      norm_(norm),
      g1_{3, 1, shape.in_channels, shape.width1},
      g2_{3, 2, shape.width1, shape.width2} {
  validate(norm_, shape.width1);
  validate(norm_, shape.width2);
  params_.conv1 = he_normal(9 * shape.in_channels * shape.width1, 9 * shape.in_channels, rng);
  params_.layer1 = init_norm_act_params(norm_, act, shape.width1);
  params_.conv2 = he_normal(9 * shape.width1 * shape.width2, 9 * shape.width1, rng);
  params_.layer2 = init_norm_act_params(norm_, act, shape.width2);
  params_.dense_w = he_normal(shape.width2 * shape.num_classes, shape.width2, rng);
  params_.dense_b.assign(shape.num_classes, 0.0);
  bn1_ = make_bn_state(shape.width1, norm_.bn_momentum);
  bn2_ = make_bn_state(shape.width2, norm_.bn_momentum);
}

ToyNetCache ToyNet::forward(const Tensor4& x, Phase phase) {
  ToyNetCache c;
  c.input = x;
  c.a1 = conv2d_forward(x, params_.conv1, g1_);
  c.l1 = norm_act_forward(c.a1, norm_, params_.layer1, phase, &bn1_);
  c.a2 = conv2d_forward(c.l1.z, params_.conv2, g2_);
  c.l2 = norm_act_forward(c.a2, norm_, params_.layer2, phase, &bn2_);
  c.pooled = global_avg_pool(c.l2.z);

  const std::size_t batch = x.shape().batch;
  const std::size_t k_n = shape_.num_classes;
  const std::size_t d_n = shape_.width2;
  c.logits = Matrix{batch, k_n, std::vector<double>(batch * k_n)};
  for (std::size_t b = 0; b < batch; ++b) {
    double* out = c.logits.data.data() + b * k_n;
    for (std::size_t k = 0; k < k_n; ++k) out[k] = params_.dense_b[k];
    for (std::size_t d = 0; d < d_n; ++d) {
      const double p = c.pooled(b, d);
      const double* w = params_.dense_w.data() + d * k_n;
      for (std::size_t k = 0; k < k_n; ++k) out[k] += p * w[k];
    }
  }
  return c;
}

ToyNetParams ToyNet::backward(const ToyNetCache& c, const Matrix& dlogits) const {
  ToyNetParams g = zeros_like(params_);
  const std::size_t batch = dlogits.rows;
  const std::size_t k_n = shape_.num_classes;
  const std::size_t d_n = shape_.width2;

  Matrix dpooled{batch, d_n, std::vector<double>(batch * d_n, 0.0)};
  for (std::size_t b = 0; b < batch; ++b) {
    const double* dl = dlogits.data.data() + b * k_n;
    for (std::size_t k = 0; k < k_n; ++k) g.dense_b[k] += dl[k];
    for (std::size_t d = 0; d < d_n; ++d) {
      const double p = c.pooled(b, d);
      double* gw = g.dense_w.data() + d * k_n;
      const double* w = params_.dense_w.data() + d * k_n;
      double acc = 0.0;
      for (std::size_t k = 0; k < k_n; ++k) {
        gw[k] += p * dl[k];
        acc += w[k] * dl[k];
      }
      dpooled.data[b * d_n + d] = acc;
    }
  }

  const Shape& s2 = c.l2.z.shape();
  Tensor4 dz2(s2);
  const double inv_area = 1.0 / static_cast<double>(s2.spatial());
  auto dz2d = dz2.data();
  for (std::size_t i = 0; i < dz2d.size(); ++i) {
    const std::size_t b = i / (s2.spatial() * s2.channels);
    dz2d[i] = dpooled.data[b * d_n + i % s2.channels] * inv_area;
  }

  auto copy_layer = [](NormActParams& dst, NormActGrads&& src) {
    dst.norm.gamma = std::move(src.dgamma);
    dst.norm.beta = std::move(src.dbeta);
    if (dst.norm.eps_l) dst.norm.eps_l = src.deps_l.value_or(0.0);
    if (src.dtau) dst.act.tau = std::move(*src.dtau);
    if (src.dkappa) dst.act.kappa = std::move(*src.dkappa);
  };

  NormActGrads l2 = norm_act_backward(dz2, c.l2, params_.layer2);
  ConvGrads conv2 = conv2d_backward(c.l1.z, params_.conv2, l2.dx, g2_, true);
  g.conv2 = std::move(conv2.dweights);
  copy_layer(g.layer2, std::move(l2));

  NormActGrads l1 = norm_act_backward(conv2.dx, c.l1, params_.layer1);
  ConvGrads conv1 = conv2d_backward(c.input, params_.conv1, l1.dx, g1_, false);
  g.conv1 = std::move(conv1.dweights);
  copy_layer(g.layer1, std::move(l1));
  return g;
}

double ToyNet::kink_margin(const ToyNetCache& cache) const {
  return std::min(frn::kink_margin(cache.l1.act_ctx.input, params_.layer1.act),
                  frn::kink_margin(cache.l2.act_ctx.input, params_.layer2.act));
}

}  // namespace frn
