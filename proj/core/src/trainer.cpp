#include "frn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "frn/csv.hpp"
#include "frn/error.hpp"
#include "frn/schedule.hpp"
#include "frn/toynet.hpp"

namespace frn {
namespace {

constexpr std::uint64_t kOrderStream = 0x9E3779B97F4A7C15ULL;
constexpr std::size_t kEvalChunk = 256;

double accuracy(ToyNet& net, const Dataset& data) {
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t first = 0; first < data.size(); first += kEvalChunk) {
    const std::size_t count = std::min(kEvalChunk, data.size() - first);
    idx.resize(count);
    std::iota(idx.begin(), idx.end(), first);
    const ToyNetCache c = net.forward(gather(data.images, idx), Phase::Eval);
    for (std::size_t b = 0; b < count; ++b) {
      const double* row = c.logits.data.data() + b * c.logits.cols;
      const auto arg = std::max_element(row, row + c.logits.cols) - row;
      if (arg == data.labels[first + b]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

// Walks shuffled epochs; a partial batch at the end of an epoch is dropped.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed)
      : order_(n), batch_(batch), rng_(seed) {
    std::iota(order_.begin(), order_.end(), 0);
    shuffle();
  }

  std::span<const std::size_t> next() {
    if (pos_ + batch_ > order_.size()) shuffle();
    std::span<const std::size_t> out(order_.data() + pos_, batch_);
    pos_ += batch_;
    return out;
  }

 private:
  void shuffle() {
    for (std::size_t i = order_.size(); i > 1; --i) {
      std::swap(order_[i - 1], order_[rng_.uniform_index(i)]);
    }
    pos_ = 0;
  }

  std::vector<std::size_t> order_;
  std::size_t batch_;
  std::size_t pos_ = 0;
  Rng rng_;
};

}  // namespace

DatasetSpec parse_dataset_spec(const std::string& text) {
  if (text == "synthetic") return {};
  if (text.rfind("idx:", 0) == 0) {
    const std::string rest = text.substr(4);
    const auto colon = rest.find(':');
    if (colon != std::string::npos && colon > 0 && colon + 1 < rest.size()) {
      return {rest.substr(0, colon), rest.substr(colon + 1)};
    }
  }
  throw ConfigError("dataset must be 'synthetic' or 'idx:IMAGES:LABELS', got '" + text + "'");
}

std::string describe(const DatasetSpec& spec) {
  return spec.synthetic() ? "synthetic" : "idx:" + spec.images_path + ":" + spec.labels_path;
}

void validate(const TrainConfig& c) {
  if (c.batch_size == 0) throw ConfigError("batch size must be positive");
  if (c.total_steps == 0) throw ConfigError("total steps must be positive");
  if (c.base_lr && !(*c.base_lr > 0.0 && std::isfinite(*c.base_lr))) {
    throw ConfigError("learning rate must be positive");
  }
  if (c.warmup_steps && *c.warmup_steps > c.total_steps) {
    throw ConfigError("warmup steps exceed total steps");
  }
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(c.weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
  // ToyNet widths are fixed at 16 and 32 channels.
  validate(c.norm, 16);
  validate(c.norm, 32);
}

double resolved_lr(const TrainConfig& c) { return c.base_lr.value_or(linear_scaled_lr(c.batch_size)); }

std::size_t resolved_warmup(const TrainConfig& c) {
  return c.warmup_steps.value_or(c.total_steps / 20);
}

std::size_t resolved_eval_every(const TrainConfig& c) {
  if (c.eval_every > 0) return c.eval_every;
  return std::max<std::size_t>(1, c.total_steps / 10);
}

DatasetSplit load_dataset(const TrainConfig& c) {
  if (c.dataset.synthetic()) return make_synthetic(c.seed);
  const Dataset all = load_idx(c.dataset.images_path, c.dataset.labels_path);
  return split_tail(all, std::max<std::size_t>(1, all.size() / 8));
}

TrainResult train(const TrainConfig& config) {
  validate(config);
  return train(config, load_dataset(config));
}

TrainResult train(const TrainConfig& config, const DatasetSplit& data) {
  validate(config);
  if (config.batch_size > data.train.size()) {
    throw ConfigError("batch size exceeds the training set");
  }

  Rng init_rng(config.seed);
  const ToyNetShape shape{data.train.images.shape().channels, data.train.num_classes, 16, 32};
  ToyNet net(shape, config.norm, config.act, init_rng);
  ToyNetParams velocity = zeros_like(net.params());
  BatchSampler sampler(data.train.size(), config.batch_size, config.seed ^ kOrderStream);

  const double base = resolved_lr(config);
  const std::size_t warmup = resolved_warmup(config);
  const std::size_t eval_every = resolved_eval_every(config);

  TrainResult result;
  result.rows.reserve(config.total_steps);
  std::vector<int> labels(config.batch_size);
  for (std::size_t step = 0; step < config.total_steps; ++step) {
    const auto idx = sampler.next();
    for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = data.train.labels[idx[i]];

    MetricsRow row;
    row.step = step;
    row.lr = scheduled_lr(step, config.total_steps, warmup, base);

    const ToyNetCache cache = net.forward(gather(data.train.images, idx), Phase::Train);
    const CrossEntropy ce = softmax_cross_entropy(cache.logits, labels);
    row.train_loss = ce.loss;
    row.train_accuracy = static_cast<double>(ce.correct) / static_cast<double>(config.batch_size);
    if (!std::isfinite(ce.loss) || ce.loss >= kDivergenceLoss) {
      result.rows.push_back(row);
      result.diverged = true;
      result.abort_reason = "loss " + format_double(ce.loss) + " at step " + std::to_string(step);
      break;
    }

    ToyNetParams grads = net.backward(cache, ce.dlogits);
    const SgdHyper hyper{row.lr, config.momentum, config.weight_decay};
    try {
      auto w = views(net.params());
      auto g = views(grads);
      auto v = views(velocity);
      for (std::size_t i = 0; i < w.size(); ++i) {
        sgd_step(w[i].values, g[i].values, v[i].values, hyper, w[i].is_weight || config.decay_all_params);
      }
    } catch (const NumericError& e) {
      result.rows.push_back(row);
      result.diverged = true;
      result.abort_reason = std::string(e.what()) + " at step " + std::to_string(step);
      break;
    }

    if ((step + 1) % eval_every == 0 || step + 1 == config.total_steps) {
      row.eval_accuracy = accuracy(net, data.eval);
      result.final_eval_accuracy = row.eval_accuracy;
    }
    result.rows.push_back(row);
  }

  if (config.measure_train_accuracy && !result.diverged) {
    result.final_train_accuracy = accuracy(net, data.train);
  }
  return result;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
  os << kMetricsHeader << '\n';
  for (const MetricsRow& r : rows) {
    os << r.step << ',' << format_double(r.lr) << ',' << format_double(r.train_loss) << ','
       << format_double(r.train_accuracy) << ',';
    if (r.eval_accuracy) os << format_double(*r.eval_accuracy);
    os << '\n';
  }
}

}  // namespace frn
