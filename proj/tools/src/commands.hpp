#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace spatial::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitIo = 2;

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

struct BuildCoocOptions {
  std::string annotations_path;
  std::string output_path;
};

struct GenDatasetResult {
  std::size_t requested = 0;
  std::size_t written = 0;
  std::size_t rejected_layouts = 0;
  std::size_t failed_records = 0;
};

/// Perturbation applied by sim-eval: "swap:F", "drop:F" (fraction of records)
/// or "jitter:N" (pixels, every record).
struct PerturbSpec {
  enum class Kind { None, Swap, Drop, Jitter };
  Kind kind = Kind::None;
  double fraction = 0;
  int max_px = 0;
};

/// Throws Error(InvalidInput) for malformed specs.
PerturbSpec parse_perturb_spec(const std::string& text);

struct SimEvalOptions {
  std::string dataset_path;
  PerturbSpec perturb;
  std::optional<std::string> detections_out;
  std::optional<std::string> cases_out;
};

struct EvalOptions {
  std::string cases_path;
  std::string detections_path;
};

struct DdimDemoOptions {
  int steps = 100;
  double alpha = 0.7;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t channels = 4;
};

struct GradCheckOptions {
  int instances = 20;
  double h = 1e-5;
  double tolerance = 1e-4;
};

int cmd_build_cooc(const BuildCoocOptions& options, Streams io);
int cmd_gen_dataset(const PipelineConfig& config, Streams io, GenDatasetResult* result = nullptr);
int cmd_validate(const std::string& dataset_path, const PipelineConfig& config, Streams io);
int cmd_sim_eval(const SimEvalOptions& options, const PipelineConfig& config, Streams io);
int cmd_eval(const EvalOptions& options, const PipelineConfig& config, Streams io);
int cmd_ddim_demo(const DdimDemoOptions& options, const PipelineConfig& config, Streams io);
int cmd_grad_check(const GradCheckOptions& options, const PipelineConfig& config, Streams io);

/// Max relative gradient errors over random 6x4 instances.
struct GradCheckReport {
  double attention_control = 0;
  double background_retention = 0;
};
GradCheckReport run_grad_check(const GradCheckOptions& options, const EnergyConfig& energy,
                               std::uint64_t seed);

/// Max-abs round-trip error of the enhancement pass with the Gaussian oracle.
double run_ddim_demo(const DdimDemoOptions& options, std::uint64_t seed);

/// Full command line, argv[0] excluded.
int run_cli(const std::vector<std::string>& args, Streams io, const EnvLookup& env);

}  // namespace spatial::cli
