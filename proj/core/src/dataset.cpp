#include "frn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numbers>

#include "frn/error.hpp"

namespace frn {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset,
                        const std::string& what) {
  if (offset + 4 > bytes.size()) {
    throw ParseError(what + ": truncated header", bytes.size());
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void expect_magic(std::span<const std::uint8_t> bytes, std::uint32_t expected,
                  const std::string& what) {
  const std::uint32_t actual = read_be32(bytes, 0, what);
  if (actual != expected) {
    char buf[96];
    std::snprintf(buf, sizeof buf, ": bad magic, expected 0x%08X, got 0x%08X", expected, actual);
    throw ParseError(what + buf, 0);
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Dataset subset(const Dataset& data, std::size_t first, std::size_t count) {
  Dataset out;
  out.images = data.images.samples(first, count);
  out.labels.assign(data.labels.begin() + static_cast<std::ptrdiff_t>(first),
                    data.labels.begin() + static_cast<std::ptrdiff_t>(first + count));
  out.num_classes = data.num_classes;
  return out;
}

Dataset synthesize(Rng& rng, std::size_t count, const SyntheticOptions& opt) {
  Dataset d;
  d.num_classes = opt.num_classes;
  d.images = Tensor4(Shape{count, opt.side, opt.side, 1});
  d.labels.resize(count);
  const double half = 0.5 * static_cast<double>(opt.side - 1);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t cls = i % opt.num_classes;
    d.labels[i] = static_cast<int>(cls);
    const double angle = std::numbers::pi * static_cast<double>(cls) /
                         static_cast<double>(opt.num_classes);
    const double amplitude = rng.uniform(0.5, 1.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    const double ca = std::cos(angle);
    const double sa = std::sin(angle);
    for (std::size_t h = 0; h < opt.side; ++h) {
      for (std::size_t w = 0; w < opt.side; ++w) {
        const double u = (static_cast<double>(w) - half) / half;
        const double v = (static_cast<double>(h) - half) / half;
        d.images.at(i, h, w, 0) = amplitude * (u * ca + v * sa) + opt.noise_stddev * rng.normal();
      }
    }
  }
  return d;
}

}  // namespace

DatasetSplit make_synthetic(std::uint64_t seed, const SyntheticOptions& options) {
  if (options.side < 2 || options.num_classes == 0 || options.train_count == 0 ||
      options.eval_count == 0) {
    throw ConfigError("synthetic dataset: degenerate options");
  }
  Rng rng(seed);
  DatasetSplit split;
  split.train = synthesize(rng, options.train_count, options);
  split.eval = synthesize(rng, options.eval_count, options);
  return split;
}

Tensor4 parse_idx_images(std::span<const std::uint8_t> bytes, const std::string& what) {
  expect_magic(bytes, kImageMagic, what);
  const std::size_t n = read_be32(bytes, 4, what);
  const std::size_t rows = read_be32(bytes, 8, what);
  const std::size_t cols = read_be32(bytes, 12, what);
  if (n == 0 || rows == 0 || cols == 0) throw ParseError(what + ": zero dimension", 4);
  // rows·cols fits in 64 bits; compare by division so n·rows·cols cannot overflow.
  if (rows * cols > (bytes.size() - 16) / n) {
    throw ParseError(what + ": truncated, header declares " + std::to_string(n) + "x" +
                         std::to_string(rows) + "x" + std::to_string(cols) +
                         " pixels, file has " + std::to_string(bytes.size()) + " bytes",
                     bytes.size());
  }
  const std::size_t payload = n * rows * cols;
  Tensor4 t(Shape{n, rows, cols, 1});
  auto out = t.data();
  for (std::size_t i = 0; i < payload; ++i) out[i] = static_cast<double>(bytes[16 + i]) / 255.0;
  return t;
}

std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes, const std::string& what) {
  expect_magic(bytes, kLabelMagic, what);
  const std::size_t n = read_be32(bytes, 4, what);
  if (bytes.size() < 8 + n) {
    throw ParseError(what + ": truncated, expected " + std::to_string(8 + n) +
                         " bytes, file has " + std::to_string(bytes.size()),
                     bytes.size());
  }
  return std::vector<int>(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(n));
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const auto image_bytes = read_file(images_path);
  const auto label_bytes = read_file(labels_path);
  Dataset d;
  d.images = parse_idx_images(image_bytes, images_path.string());
  d.labels = parse_idx_labels(label_bytes, labels_path.string());
  if (d.labels.size() != d.images.shape().batch) {
    // Offset 4 is the item-count field of the label header.
    throw ParseError(labels_path.string() + ": " + std::to_string(d.labels.size()) +
                         " labels for " + std::to_string(d.images.shape().batch) + " images",
                     4);
  }
  d.num_classes = static_cast<std::size_t>(*std::max_element(d.labels.begin(), d.labels.end())) + 1;
  return d;
}

DatasetSplit split_tail(const Dataset& data, std::size_t eval_count) {
  if (eval_count == 0 || eval_count >= data.size()) {
    throw ConfigError("split_tail: eval count must be in [1, n)");
  }
  const std::size_t train_count = data.size() - eval_count;
  return {subset(data, 0, train_count), subset(data, train_count, eval_count)};
}

Tensor4 gather(const Tensor4& images, std::span<const std::size_t> indices) {
  Shape s = images.shape();
  const std::size_t stride = s.spatial() * s.channels;
  s.batch = indices.size();
  Tensor4 out(s);
  auto dst = out.data();
  const auto src = images.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(indices[i] * stride), stride,
                dst.begin() + static_cast<std::ptrdiff_t>(i * stride));
  }
  return out;
}

}  // namespace frn
