#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "frn/gradcheck.hpp"
#include "frn/trainer.hpp"

namespace frn::cli {

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kUsage = 2,
  kDiverged = 3,
};

struct GradcheckOptions {
  std::vector<NormKind> norms{NormKind::FRN, NormKind::IN,   NormKind::BN,  NormKind::GN,
                              NormKind::LN,  NormKind::GFRN, NormKind::LFRN};
  std::vector<ActKind> acts{ActKind::RELU, ActKind::TLU, ActKind::PRELU, ActKind::AFFINE_TLU};
  std::vector<Shape> shapes{{2, 3, 3, 4}, {2, 1, 1, 4}};
  std::vector<EpsPolicy> eps{FixedEps{1e-6}, FixedEps{1e-2}, LearnedEps{kDefaultLearnedEpsInit}};
  std::size_t group_size = 2;
  std::size_t seeds = 5;
  std::uint64_t seed = 0;
  CheckOptions check;
  std::string out = "-";
};

struct CurveOptions {
  std::vector<double> eps{1e-6, 1e-4, 1e-2, 1e-1, 1.0};
  double x_min = -5.0;
  double x_max = 5.0;
  std::size_t samples = 1001;
  std::string out = "-";
};

struct TrainOptions {
  TrainConfig config;
  std::string out = "-";
  bool print_config = false;
};

struct SweepOptions {
  std::vector<std::size_t> batch_sizes{1, 2, 4, 8, 32};
  std::vector<std::pair<NormKind, ActKind>> pairs{{NormKind::FRN, ActKind::TLU}};
  /// Template config. total_steps and warmup_steps are given at the largest
  /// batch size and scaled by max_batch / batch per cell; the learning rate is
  /// reference_lr · batch / 256.
  TrainConfig base;
  double reference_lr = 0.1;
  std::size_t seeds = 1;
  std::size_t jobs = 1;
  std::string out_dir;
};

/// One finished sweep cell.
struct SweepCell {
  NormKind norm = NormKind::FRN;
  ActKind act = ActKind::TLU;
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
  TrainResult result;
};

int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out, std::ostream& err);
int cmd_curve(const CurveOptions& opt, std::ostream& out, std::ostream& err);
int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err);
int cmd_sweep(const SweepOptions& opt, std::ostream& out, std::ostream& err);

/// Runs every sweep cell (in parallel when jobs > 1) and returns them in
/// pair-major, batch-size, seed order. Does not write files.
std::vector<SweepCell> run_sweep(const SweepOptions& opt);
/// Config used for one sweep cell.
TrainConfig sweep_cell_config(const SweepOptions& opt, NormKind norm, ActKind act,
                              std::size_t batch_size, std::uint64_t seed);

inline constexpr const char* kSweepSummaryHeader = "scheme,batch_size,final_eval_acc,seed,status";
inline constexpr const char* kGradcheckHeader =
    "norm,act,shape,eps,seed,parameter,max_rel_error,max_abs_error,worst_index,pass";

/// Full command-line entry point: parses argv and dispatches.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace frn::cli
