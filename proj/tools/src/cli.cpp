#include <algorithm>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "spatial/error.hpp"

namespace spatial::cli {

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError:
    case ErrorCode::SchemaError:
    case ErrorCode::ParseError:
      return kExitIo;
    default:
      return kExitDomain;
  }
}

void report(const Error& e, std::ostream& err) {
  err << e.what();
  for (std::size_t i = 0; i < e.violations().size(); ++i) err << (i == 0 ? " [" : ", ") << e.violations()[i];
  if (!e.violations().empty()) err << "]";
  err << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, Streams io, const EnvLookup& env) {
  CLI::App app{"Spatial editing dataset synthesis and evaluation", "spatial-synth"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SPATIAL_SYNTH_VERSION);

  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out_dir;
  app.add_option("--config", config_path, "TOML configuration file");
  app.add_option("--seed", seed, "Run seed");
  app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "Output directory");

  std::optional<std::string> cooc;
  std::optional<double> threshold;

  BuildCoocOptions build;
  std::optional<std::string> build_output;
  auto* build_cmd = app.add_subcommand("build-cooc", "Build the category co-occurrence matrix");
  build_cmd->add_option("annotations", build.annotations_path, "COCO instances JSON")->required();
  build_cmd->add_option("-o,--output", build_output, "Matrix JSON path (default <out>/cooccurrence.json)");

  std::optional<std::size_t> records;
  std::optional<std::size_t> heldout;
  std::optional<double> min_yield;
  std::optional<std::string> provider_mode;
  std::optional<std::string> endpoint;
  auto* gen_cmd = app.add_subcommand("gen-dataset", "Generate training triplets");
  gen_cmd->add_option("--cooc", cooc, "Co-occurrence matrix JSON");
  gen_cmd->add_option("--records", records, "Number of records")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--heldout", heldout, "Held-out records taken from the end");
  gen_cmd->add_option("--min-yield", min_yield, "Minimum fraction of records written");
  gen_cmd->add_option("--provider", provider_mode, "deterministic or external");
  gen_cmd->add_option("--endpoint", endpoint, "Chat-completions endpoint URL");

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check every record of a dataset");
  validate_cmd->add_option("dataset", validate_path, "Triplet JSONL")->required();

  SimEvalOptions sim;
  std::string perturb_text;
  auto* sim_cmd = app.add_subcommand("sim-eval", "Render, detect and score a dataset");
  sim_cmd->add_option("dataset", sim.dataset_path, "Triplet JSONL")->required();
  sim_cmd->add_option("--cooc", cooc, "Co-occurrence matrix JSON (category vocabulary)");
  sim_cmd->add_option("--perturb", perturb_text, "swap:F, drop:F or jitter:N");
  sim_cmd->add_option("--threshold", threshold, "Detection score threshold");
  sim_cmd->add_option("--detections-out", sim.detections_out, "Write oracle detections JSONL");
  sim_cmd->add_option("--cases-out", sim.cases_out, "Write evaluation cases JSONL");

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score detections against cases");
  eval_cmd->add_option("cases", eval.cases_path, "Cases JSONL")->required();
  eval_cmd->add_option("detections", eval.detections_path, "Detections JSONL")->required();
  eval_cmd->add_option("--threshold", threshold, "Detection score threshold");

  DdimDemoOptions ddim;
  std::string grid_text = "8x8x4";
  auto* ddim_cmd = app.add_subcommand("ddim-demo", "Enhancement round trip with a Gaussian oracle");
  ddim_cmd->add_option("--steps", ddim.steps, "Total DDIM steps T")->capture_default_str();
  ddim_cmd->add_option("--alpha", ddim.alpha, "Enhancement strength")->capture_default_str();
  ddim_cmd->add_option("--grid", grid_text, "HxWxC latent shape")->capture_default_str();

  GradCheckOptions grad;
  auto* grad_cmd = app.add_subcommand("grad-check", "Compare energy gradients with finite differences");
  grad_cmd->add_option("--instances", grad.instances, "Random instances")->capture_default_str();
  grad_cmd->add_option("--step", grad.h, "Finite-difference step")->capture_default_str();
  grad_cmd->add_option("--tolerance", grad.tolerance, "Maximum relative error")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, io.out, io.err);
    return code == 0 ? kExitOk : kExitIo;
  }

  try {
    PipelineConfig config;
    try {
      config = load_config(config_path, env);
      if (seed) config.seed = *seed;
      if (workers) config.workers = *workers;
      if (out_dir) config.out_dir = *out_dir;
      if (cooc) config.dataset.cooc_path = *cooc;
      if (threshold) config.score_threshold = *threshold;
      if (records) config.dataset.records = *records;
      if (heldout) config.dataset.heldout = *heldout;
      if (min_yield) config.dataset.min_yield = *min_yield;
      if (endpoint) config.provider.endpoint_url = *endpoint;
      if (provider_mode) {
        if (*provider_mode != "deterministic" && *provider_mode != "external") {
          throw Error(ErrorCode::InvalidInput, "--provider must be deterministic or external");
        }
        config.provider.mode =
            *provider_mode == "external" ? ProviderMode::External : ProviderMode::Deterministic;
      }
      validate(config);
    } catch (const Error& e) {
      report(e, io.err);
      return kExitIo;
    }

    if (*build_cmd) {
      build.output_path = build_output.value_or(config.out_dir + "/cooccurrence.json");
      return cmd_build_cooc(build, io);
    }
    if (*gen_cmd) return cmd_gen_dataset(config, io);
    if (*validate_cmd) return cmd_validate(validate_path, config, io);
    if (*sim_cmd) {
      sim.perturb = parse_perturb_spec(perturb_text);
      return cmd_sim_eval(sim, config, io);
    }
    if (*eval_cmd) return cmd_eval(eval, config, io);
    if (*ddim_cmd) {
      std::size_t h = 0, w = 0, c = 0;
      char tail = 0;
      if (std::sscanf(grid_text.c_str(), "%zux%zux%zu%c", &h, &w, &c, &tail) != 3 || h == 0 || w == 0 || c == 0) {
        throw Error(ErrorCode::InvalidInput, "--grid must look like 8x8x4");
      }
      ddim.height = h;
      ddim.width = w;
      ddim.channels = c;
      return cmd_ddim_demo(ddim, config, io);
    }
    if (*grad_cmd) return cmd_grad_check(grad, config, io);
  } catch (const Error& e) {
    report(e, io.err);
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitDomain;
}

}  // namespace spatial::cli
