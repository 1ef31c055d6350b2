#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "frn/tensor.hpp"

namespace frn {

/// Labelled images, (n, H, W, channels) plus one class index per image.
struct Dataset {
  Tensor4 images;
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
};

struct DatasetSplit {
  Dataset train;
  Dataset eval;
};

struct SyntheticOptions {
  std::size_t side = 16;
  std::size_t num_classes = 4;
  std::size_t train_count = 2048;
  std::size_t eval_count = 512;
  double noise_stddev = 0.3;
};

/// Oriented-ramp classification task. Class k is a linear intensity ramp
/// along angle k·π/num_classes with random amplitude in [0.5, 1.5) and random
/// sign, plus i.i.d. Gaussian pixel noise. Sample i has class i mod
/// num_classes, so the classes are balanced. Deterministic in `seed`.
DatasetSplit make_synthetic(std::uint64_t seed, const SyntheticOptions& options = {});

/// Reads an IDX image file (magic 0x00000803, unsigned bytes, n×rows×cols)
/// and the matching IDX label file (magic 0x00000801). Pixels are scaled to
/// [0, 1]; num_classes is one more than the largest label. Throws ParseError
/// with the offending byte offset on bad magic, truncation, or count mismatch.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

/// Parses IDX data already in memory; `what` names the source in errors.
Tensor4 parse_idx_images(std::span<const std::uint8_t> bytes, const std::string& what);
std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes, const std::string& what);

/// Deterministic split: the last `eval_count` samples become the eval set.
DatasetSplit split_tail(const Dataset& data, std::size_t eval_count);

/// Gathers the listed samples into a new batch.
Tensor4 gather(const Tensor4& images, std::span<const std::size_t> indices);

}  // namespace frn
