#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "frn/csv.hpp"
#include "frn/error.hpp"
#include "frn/norm.hpp"
#include "frn/schedule.hpp"

namespace frn::cli {
namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_real(const std::string& text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError("not a number: '" + text + "'");
  }
  return v;
}

std::size_t parse_count(const std::string& text) {
  std::size_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError("not a non-negative integer: '" + text + "'");
  }
  return v;
}

Shape parse_shape(const std::string& text) {
  const auto parts = split(text, 'x');
  if (parts.size() != 4) throw ConfigError("shape must look like BxHxWxC, got '" + text + "'");
  Shape s{parse_count(parts[0]), parse_count(parts[1]), parse_count(parts[2]), parse_count(parts[3])};
  try {
    validate(s);
  } catch (const ShapeError& e) {
    throw ConfigError(e.what());
  }
  return s;
}

// "learned", "learned:VAL" or a plain non-negative number.
EpsPolicy parse_eps_token(const std::string& text) {
  if (text == "learned") return LearnedEps{};
  if (text.rfind("learned:", 0) == 0) return LearnedEps{parse_real(text.substr(8))};
  const double eps = parse_real(text);
  if (!(eps >= 0.0)) throw ConfigError("epsilon must be >= 0");
  return FixedEps{eps};
}

std::string eps_label(const EpsPolicy& p) {
  if (const auto* l = std::get_if<LearnedEps>(&p)) return "learned:" + format_double(l->init);
  return format_double(std::get<FixedEps>(p).eps);
}

std::string scheme_label(NormKind norm, ActKind act) {
  return std::string(name(norm)) + "+" + std::string(name(act));
}

// Writes `body` to `path`, or to `out` when path is "-".
void emit(const std::string& path, std::ostream& out, const std::string& body) {
  if (path == "-") {
    out << body;
    out.flush();
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write " + path);
  f << body;
  if (!f) throw ConfigError("failed writing " + path);
}

std::string config_comment(const TrainConfig& c) {
  std::ostringstream os;
  os << "# norm=" << name(c.norm.kind) << '\n'
     << "# group_size=" << c.norm.group_size << '\n'
     << "# eps=" << eps_label(c.norm.eps) << '\n'
     << "# act=" << name(c.act) << '\n'
     << "# batch_size=" << c.batch_size << '\n'
     << "# steps=" << c.total_steps << '\n'
     << "# lr=" << format_double(resolved_lr(c)) << '\n'
     << "# warmup_steps=" << resolved_warmup(c) << '\n'
     << "# momentum=" << format_double(c.momentum) << '\n'
     << "# weight_decay=" << format_double(c.weight_decay) << '\n'
     << "# decay_all_params=" << (c.decay_all_params ? "true" : "false") << '\n'
     << "# seed=" << c.seed << '\n'
     << "# dataset=" << describe(c.dataset) << '\n'
     << "# eval_every=" << resolved_eval_every(c) << '\n';
  return os.str();
}

// Flags shared by train and sweep, bound to string holders and applied after parsing.
struct SharedFlags {
  std::string norm = "frn";
  std::string act = "tlu";
  std::size_t group_size = 8;
  std::string eps;
  bool eps_learnable = false;
  double eps_init = kDefaultLearnedEpsInit;
  std::size_t steps = 2000;
  std::optional<double> lr;
  std::optional<std::size_t> warmup;
  double momentum = 0.9;
  double weight_decay = 4e-4;
  bool decay_all = false;
  std::uint64_t seed = 0;
  std::string dataset = "synthetic";
  std::size_t eval_every = 0;

  void bind(CLI::App& app) {
    app.add_option("--norm", norm, "Normalization: frn, in, bn, gn, ln, gfrn, lfrn, none");
    app.add_option("--act", act, "Activation: relu, tlu, prelu, affine-tlu");
    app.add_option("--group-size", group_size, "Channels per group for gn/gfrn");
    auto* eps_opt = app.add_option("--eps", eps, "Fixed epsilon (default 1e-6)");
    app.add_flag("--eps-learnable", eps_learnable, "Learn epsilon as 1e-6 + |eps_l|")
        ->excludes(eps_opt);
    app.add_option("--eps-init", eps_init, "Initial eps_l for --eps-learnable");
    app.add_option("--steps", steps, "Total training steps");
    app.add_option("--warmup-steps", warmup, "Cosine warm-up steps (default 5% of steps)");
    app.add_option("--momentum", momentum, "SGD momentum");
    app.add_option("--weight-decay", weight_decay, "Weight decay on conv/dense weights");
    app.add_flag("--decay-all-params", decay_all, "Also decay norm/activation params and biases");
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--dataset", dataset, "synthetic or idx:IMAGES:LABELS");
    app.add_option("--eval-every", eval_every, "Steps between evaluations (default steps/10)");
  }

  TrainConfig to_config() const {
    TrainConfig c;
    c.norm.kind = parse_norm_kind(norm);
    c.norm.group_size = group_size;
    if (eps_learnable) {
      c.norm.eps = LearnedEps{eps_init};
    } else if (!eps.empty()) {
      const EpsPolicy p = parse_eps_token(eps);
      c.norm.eps = p;
    }
    c.act = parse_act_kind(act);
    c.total_steps = steps;
    c.base_lr = lr;
    c.warmup_steps = warmup;
    c.momentum = momentum;
    c.weight_decay = weight_decay;
    c.decay_all_params = decay_all;
    c.seed = seed;
    c.dataset = parse_dataset_spec(dataset);
    c.eval_every = eval_every;
    return c;
  }
};

}  // namespace

int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out, std::ostream& err) {
  std::ostringstream csv;
  csv << kGradcheckHeader << '\n';
  bool all_pass = true;
  std::string worst_line;
  double worst = -1.0;
  for (NormKind norm : opt.norms) {
    for (ActKind act : opt.acts) {
      for (const Shape& shape : opt.shapes) {
        for (const EpsPolicy& eps : opt.eps) {
          for (std::size_t s = 0; s < opt.seeds; ++s) {
            const std::uint64_t seed = opt.seed + s;
            LayerUnderTest layer{NormSpec{norm, opt.group_size, eps, kDefaultBnMomentum}, act};
            Rng rng(seed);
            const auto reports = check_layer(layer, shape, rng, opt.check);
            for (const GradReport& r : reports) {
              std::ostringstream line;
              line << name(norm) << ',' << name(act) << ',' << to_string(shape) << ','
                   << eps_label(eps) << ',' << seed << ',' << r.parameter << ','
                   << format_double(r.max_rel_error) << ',' << format_double(r.max_abs_error)
                   << ',' << r.worst_index << ',' << (r.pass ? "true" : "false");
              csv << line.str() << '\n';
              if (!r.pass) all_pass = false;
              if (!(r.max_rel_error <= worst)) {
                worst = r.max_rel_error;
                worst_line = line.str();
              }
            }
          }
        }
      }
    }
  }
  emit(opt.out, out, csv.str());
  if (!all_pass) {
    err << "gradcheck FAILED; worst offender: " << worst_line << '\n';
    return kCheckFailed;
  }
  return kOk;
}

int cmd_curve(const CurveOptions& opt, std::ostream& out, std::ostream&) {
  if (opt.samples < 2) throw ConfigError("curve needs at least 2 samples");
  if (!std::isfinite(opt.x_min) || !std::isfinite(opt.x_max) || !(opt.x_min < opt.x_max)) {
    throw ConfigError("curve x range must be finite with x-min < x-max");
  }
  if (opt.eps.empty()) throw ConfigError("curve needs at least one epsilon");
  for (double e : opt.eps) {
    if (!(e >= 0.0) || !std::isfinite(e)) throw ConfigError("curve epsilon must be finite and >= 0");
  }

  std::ostringstream csv;
  csv << 'x';
  for (double e : opt.eps) csv << ",eps_" << format_double(e);
  csv << '\n';
  const double last = static_cast<double>(opt.samples - 1);
  for (std::size_t i = 0; i < opt.samples; ++i) {
    // Written as a weighted sum of the endpoints so a symmetric range gives
    // exactly mirrored grid points.
    const double k = static_cast<double>(i);
    const double x = (opt.x_min * (last - k) + opt.x_max * k) / last;
    csv << format_double(x);
    for (double e : opt.eps) {
      const double v = (x == 0.0) ? 0.0 : frn_scalar(x, e);
      csv << ',' << format_double(v);
    }
    csv << '\n';
  }
  emit(opt.out, out, csv.str());
  return kOk;
}

int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
  validate(opt.config);
  const TrainResult result = train(opt.config);
  std::ostringstream csv;
  if (opt.print_config) csv << config_comment(opt.config);
  write_metrics_csv(csv, result.rows);
  emit(opt.out, out, csv.str());
  if (result.diverged) {
    err << "training diverged: " << result.abort_reason << '\n';
    return kDiverged;
  }
  if (result.final_eval_accuracy) {
    err << "final eval accuracy " << format_double(*result.final_eval_accuracy) << '\n';
  }
  return kOk;
}

TrainConfig sweep_cell_config(const SweepOptions& opt, NormKind norm, ActKind act,
                              std::size_t batch_size, std::uint64_t seed) {
  const std::size_t max_batch = *std::max_element(opt.batch_sizes.begin(), opt.batch_sizes.end());
  TrainConfig c = opt.base;
  c.norm.kind = norm;
  c.act = act;
  c.batch_size = batch_size;
  c.seed = seed;
  c.total_steps = opt.base.total_steps * max_batch / batch_size;
  if (opt.base.warmup_steps) c.warmup_steps = *opt.base.warmup_steps * max_batch / batch_size;
  c.base_lr = linear_scaled_lr(batch_size, opt.reference_lr);
  c.eval_every = opt.base.eval_every == 0 ? 0 : opt.base.eval_every * max_batch / batch_size;
  return c;
}

std::vector<SweepCell> run_sweep(const SweepOptions& opt) {
  if (opt.batch_sizes.empty() || opt.pairs.empty() || opt.seeds == 0) {
    throw ConfigError("sweep needs at least one batch size, pair and seed");
  }
  if (std::find(opt.batch_sizes.begin(), opt.batch_sizes.end(), 0u) != opt.batch_sizes.end()) {
    throw ConfigError("batch sizes must be positive");
  }
  std::vector<SweepCell> cells;
  for (const auto& [norm, act] : opt.pairs) {
    for (std::size_t b : opt.batch_sizes) {
      for (std::size_t s = 0; s < opt.seeds; ++s) {
        cells.push_back({norm, act, b, opt.base.seed + s, {}});
        validate(sweep_cell_config(opt, norm, act, b, opt.base.seed + s));
      }
    }
  }

  // Cells share nothing, so each worker claims the next index; every result
  // lands in its own slot and the output order does not depend on scheduling.
  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(cells.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      SweepCell& cell = cells[i];
      try {
        cell.result = train(sweep_cell_config(opt, cell.norm, cell.act, cell.batch_size, cell.seed));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(opt.jobs, 1, cells.size());
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const std::string& e : errors) {
    if (!e.empty()) throw Error("sweep cell failed: " + e);
  }
  return cells;
}

int cmd_sweep(const SweepOptions& opt, std::ostream& out, std::ostream& err) {
  if (opt.out_dir.empty()) throw ConfigError("sweep requires --out DIR");
  namespace fs = std::filesystem;
  fs::create_directories(opt.out_dir);
  const std::vector<SweepCell> cells = run_sweep(opt);

  std::ostringstream summary;
  summary << kSweepSummaryHeader << '\n';
  for (const SweepCell& cell : cells) {
    std::ostringstream csv;
    write_metrics_csv(csv, cell.result.rows);
    const std::string file = std::string(name(cell.norm)) + "-" + std::string(name(cell.act)) +
                             "_b" + std::to_string(cell.batch_size) + "_s" +
                             std::to_string(cell.seed) + ".csv";
    emit((fs::path(opt.out_dir) / file).string(), out, csv.str());

    summary << scheme_label(cell.norm, cell.act) << ',' << cell.batch_size << ',';
    if (!cell.result.diverged && cell.result.final_eval_accuracy) {
      summary << format_double(*cell.result.final_eval_accuracy);
    } else {
      summary << "nan";
    }
    summary << ',' << cell.seed << ',' << (cell.result.diverged ? "diverged" : "ok") << '\n';
    if (cell.result.diverged) {
      err << scheme_label(cell.norm, cell.act) << " batch " << cell.batch_size << " diverged: "
          << cell.result.abort_reason << '\n';
    }
  }
  emit((fs::path(opt.out_dir) / "summary.csv").string(), out, summary.str());
  return kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Filter Response Normalization toolkit: gradient checks, epsilon curves, training"};
  app.require_subcommand(1);

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  std::string gc_norms = "frn,in,bn,gn,ln,gfrn,lfrn";
  std::string gc_acts = "relu,tlu,prelu,affine-tlu";
  std::string gc_shapes = "2x3x3x4,2x1x1x4";
  std::string gc_eps = "1e-6,1e-2,learned";
  bool gc_eps_learnable = false;
  GradcheckOptions gopt;
  gc->add_option("--norm", gc_norms, "Comma-separated schemes");
  gc->add_option("--act", gc_acts, "Comma-separated activations");
  gc->add_option("--shapes", gc_shapes, "Comma-separated BxHxWxC shapes");
  gc->add_option("--eps", gc_eps, "Comma-separated epsilons; 'learned' or 'learned:VAL' for eps_l");
  gc->add_flag("--eps-learnable", gc_eps_learnable, "Check only the learned-epsilon policy");
  gc->add_option("--group-size", gopt.group_size, "Channels per group for gn/gfrn");
  gc->add_option("--seeds", gopt.seeds, "Random points per configuration");
  gc->add_option("--seed", gopt.seed, "First seed");
  gc->add_option("--tolerance", gopt.check.tol.rel, "Relative tolerance");
  gc->add_option("--abs-floor", gopt.check.tol.abs_floor, "Absolute error floor");
  gc->add_option("--step", gopt.check.step, "Finite-difference step");
  gc->add_option("--out", gopt.out, "Output CSV path, - for stdout");

  // curve
  auto* cv = app.add_subcommand("curve", "Tabulate x / sqrt(x^2 + eps), the N = 1 FRN response");
  CurveOptions copt;
  std::string cv_eps = "1e-6,1e-4,1e-2,1e-1,1";
  cv->add_option("--eps", cv_eps, "Comma-separated epsilons");
  cv->add_option("--x-min", copt.x_min, "Lower end of the x range");
  cv->add_option("--x-max", copt.x_max, "Upper end of the x range");
  cv->add_option("--samples", copt.samples, "Number of grid points");
  cv->add_option("--out", copt.out, "Output CSV path, - for stdout");

  // train
  auto* tr = app.add_subcommand("train", "Train ToyNet and write per-step metrics");
  SharedFlags tflags;
  tflags.bind(*tr);
  std::size_t batch_size = 32;
  TrainOptions topt;
  tr->add_option("--batch-size", batch_size, "Mini-batch size");
  tr->add_option("--lr", tflags.lr, "Peak learning rate (default 0.1 * batch / 256)");
  tr->add_option("--out", topt.out, "Metrics CSV path, - for stdout");
  tr->add_flag("--print-config", topt.print_config, "Prefix the CSV with the resolved config");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Train over several batch sizes with equal samples seen");
  SharedFlags sflags;
  sflags.bind(*sw);
  SweepOptions sopt;
  std::string sw_batches = "1,2,4,8,32";
  std::string sw_pairs;
  sw->add_option("--batch-sizes", sw_batches, "Comma-separated batch sizes");
  sw->add_option("--pairs", sw_pairs, "Comma-separated norm:act pairs (default --norm/--act)");
  sw->add_option("--lr", sopt.reference_lr, "Learning rate at batch 256; scaled linearly per cell");
  sw->add_option("--seeds", sopt.seeds, "Seeds per cell, counting up from --seed");
  sw->add_option("--jobs", sopt.jobs, "Cells trained concurrently");
  sw->add_option("--out", sopt.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gc) {
      gopt.norms.clear();
      for (const auto& t : split(gc_norms, ',')) gopt.norms.push_back(parse_norm_kind(t));
      gopt.acts.clear();
      for (const auto& t : split(gc_acts, ',')) gopt.acts.push_back(parse_act_kind(t));
      gopt.shapes.clear();
      for (const auto& t : split(gc_shapes, ',')) gopt.shapes.push_back(parse_shape(t));
      gopt.eps.clear();
      if (gc_eps_learnable) {
        gopt.eps.push_back(LearnedEps{});
      } else {
        for (const auto& t : split(gc_eps, ',')) gopt.eps.push_back(parse_eps_token(t));
      }
      if (gopt.norms.empty() || gopt.acts.empty() || gopt.shapes.empty() || gopt.eps.empty() ||
          gopt.seeds == 0) {
        throw ConfigError("gradcheck needs at least one scheme, activation, shape, epsilon and seed");
      }
      if (!(gopt.check.step > 0.0) || !(gopt.check.tol.rel > 0.0)) {
        throw ConfigError("step and tolerance must be positive");
      }
      for (NormKind k : gopt.norms) {
        for (const Shape& s : gopt.shapes) validate(NormSpec{k, gopt.group_size}, s.channels);
      }
      return cmd_gradcheck(gopt, out, err);
    }
    if (*cv) {
      copt.eps.clear();
      for (const auto& t : split(cv_eps, ',')) copt.eps.push_back(parse_real(t));
      return cmd_curve(copt, out, err);
    }
    if (*tr) {
      topt.config = tflags.to_config();
      topt.config.batch_size = batch_size;
      return cmd_train(topt, out, err);
    }
    if (*sw) {
      sopt.base = sflags.to_config();
      sopt.batch_sizes.clear();
      for (const auto& t : split(sw_batches, ',')) sopt.batch_sizes.push_back(parse_count(t));
      if (!sw_pairs.empty()) {
        sopt.pairs.clear();
        for (const auto& t : split(sw_pairs, ',')) {
          const auto colon = t.find(':');
          if (colon == std::string::npos) throw ConfigError("pair must be norm:act, got '" + t + "'");
          sopt.pairs.emplace_back(parse_norm_kind(t.substr(0, colon)),
                                  parse_act_kind(t.substr(colon + 1)));
        }
      } else {
        sopt.pairs = {{sopt.base.norm.kind, sopt.base.act}};
      }
      return cmd_sweep(sopt, out, err);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kCheckFailed;
  }
  return kUsage;
}

}  // namespace frn::cli
