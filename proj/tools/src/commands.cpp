#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "spatial/cooccur.hpp"
#include "spatial/diffusion.hpp"
#include "spatial/error.hpp"
#include "spatial/evaluator.hpp"
#include "spatial/layout.hpp"
#include "spatial/random.hpp"
#include "spatial/scenesim.hpp"

namespace spatial::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Seed streams derived from the run seed.
constexpr std::uint64_t kPairStream = 1;
constexpr std::uint64_t kRecordStream = 2;
constexpr std::uint64_t kPerturbStream = 3;
constexpr std::uint64_t kDdimStream = 4;
constexpr std::uint64_t kGradStream = 5;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << content;
  if (!out.flush()) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

std::vector<std::string> nonempty_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) lines.push_back(std::move(line));
  }
  return lines;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// is rethrown after all threads join.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  const auto threads = static_cast<std::size_t>(std::clamp<long long>(workers, 1, static_cast<long long>(std::max<std::size_t>(n, 1))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto loop = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(loop);
  loop();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::string record_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rec-%06zu", index);
  return buf;
}

std::string join_violations(const Error& e) {
  std::string out;
  for (const auto& v : e.violations()) out += (out.empty() ? " [" : ", ") + v;
  return out.empty() ? out : out + "]";
}

bool is_rejection(ErrorCode code) {
  return code == ErrorCode::ParseError || code == ErrorCode::ValidationError ||
         code == ErrorCode::NaRelation || code == ErrorCode::ArityError;
}

const char* mode_name(ProviderMode mode) {
  return mode == ProviderMode::Deterministic ? "deterministic" : "external";
}

std::string read_cooc(const PipelineConfig& config) {
  if (config.dataset.cooc_path.empty()) {
    throw Error(ErrorCode::IoError, "no co-occurrence matrix given (--cooc or dataset.cooc)");
  }
  return read_file(config.dataset.cooc_path);
}

struct RecordOutcome {
  std::optional<std::string> line;
  std::size_t rejected = 0;
  std::vector<std::string> log;
};

RecordOutcome generate_record(std::size_t index, const PairSample& pair, const PipelineConfig& config,
                              ChatClient& client) {
  RecordOutcome outcome;
  const std::string id = record_id(index);
  const std::uint64_t record_seed = derive_seed(config.seed, kRecordStream, index);
  for (int attempt = 0; attempt <= config.dataset.max_resamples; ++attempt) {
    const auto a = static_cast<std::uint64_t>(attempt);
    try {
      ChatRequest caption_request = render_caption_prompt(pair.category_a, pair.category_b, config.caption_sampling);
      caption_request.seed = derive_seed(record_seed, 1, a);
      const std::string caption = client.complete(caption_request);

      ChatRequest layout_request = render_layout_prompt(caption, config.layout_sampling);
      layout_request.seed = derive_seed(record_seed, 2, a);
      const Layout layout = parse_layout_response(client.complete(layout_request), config.provider.canvas);
      if (layout.objects.size() != 2) {
        throw Error(ErrorCode::ArityError, "layout has " + std::to_string(layout.objects.size()) + " objects");
      }
      Rng pick(derive_seed(record_seed, 3, a));
      const int removed = static_cast<int>(uniform_int(pick, 0, 1));
      outcome.line = to_jsonl(make_triplet(id, layout, removed, record_seed));
      return outcome;
    } catch (const Error& e) {
      outcome.log.push_back(id + " attempt " + std::to_string(attempt + 1) + ": " + e.what() + join_violations(e));
      if (!is_rejection(e.code())) return outcome;
      ++outcome.rejected;
    }
  }
  outcome.log.push_back(id + ": skipped after " + std::to_string(config.dataset.max_resamples + 1) + " attempts");
  return outcome;
}

json canvas_json(const CanvasSpec& canvas) {
  json j;
  j["width"] = canvas.width;
  j["height"] = canvas.height;
  j["max_box_dim"] = canvas.max_box_dim;
  return j;
}

std::string format_real(double v, const char* fmt = "%.6e") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

PerturbSpec parse_perturb_spec(const std::string& text) {
  PerturbSpec spec;
  if (text.empty() || text == "none") return spec;
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string value = colon == std::string::npos ? "" : text.substr(colon + 1);
  char* end = nullptr;
  const double number = std::strtod(value.c_str(), &end);
  if (value.empty() || *end != '\0' || !std::isfinite(number)) {
    throw Error(ErrorCode::InvalidInput, "perturbation must look like swap:0.3, drop:0.5 or jitter:8");
  }
  if (kind == "swap" || kind == "drop") {
    if (number < 0.0 || number > 1.0) throw Error(ErrorCode::InvalidInput, "perturbation fraction must lie in [0, 1]");
    spec.kind = kind == "swap" ? PerturbSpec::Kind::Swap : PerturbSpec::Kind::Drop;
    spec.fraction = number;
  } else if (kind == "jitter") {
    if (number < 0.0 || number != std::floor(number)) {
      throw Error(ErrorCode::InvalidInput, "jitter magnitude must be a non-negative integer");
    }
    spec.kind = PerturbSpec::Kind::Jitter;
    spec.max_px = static_cast<int>(number);
  } else {
    throw Error(ErrorCode::InvalidInput, "unknown perturbation '" + kind + "'");
  }
  return spec;
}

int cmd_build_cooc(const BuildCoocOptions& options, Streams io) {
  const CooccurrenceMatrix matrix = build_matrix(read_file(options.annotations_path));
  write_file(options.output_path, matrix_to_json(matrix) + "\n");
  io.err << "wrote " << options.output_path << " (" << matrix.vocab().size() << " categories)\n";
  return kExitOk;
}

int cmd_gen_dataset(const PipelineConfig& config, Streams io, GenDatasetResult* result) {
  const std::string cooc_text = read_cooc(config);
  const CooccurrenceMatrix matrix = matrix_from_json(cooc_text);
  const std::size_t n = config.dataset.records;
  const auto pairs = sample_pairs(matrix, n, derive_seed(config.seed, kPairStream),
                                  std::max<std::uint64_t>(config.dataset.min_pair_count, 1));

  ChatClient client(config.provider);
  std::vector<RecordOutcome> outcomes(n);
  parallel_for(n, config.workers,
               [&](std::size_t i) { outcomes[i] = generate_record(i, pairs[i], config, client); });

  GenDatasetResult stats;
  stats.requested = n;
  std::string train;
  std::string heldout;
  std::size_t train_count = 0;
  std::size_t heldout_count = 0;
  const std::size_t train_slots = n - config.dataset.heldout;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& entry : outcomes[i].log) io.err << entry << "\n";
    stats.rejected_layouts += outcomes[i].rejected;
    if (!outcomes[i].line) {
      ++stats.failed_records;
      continue;
    }
    ++stats.written;
    if (i < train_slots) {
      train += *outcomes[i].line + "\n";
      ++train_count;
    } else {
      heldout += *outcomes[i].line + "\n";
      ++heldout_count;
    }
  }

  const fs::path out_dir(config.out_dir);
  write_file(out_dir / "train.jsonl", train);
  write_file(out_dir / "heldout.jsonl", heldout);

  json manifest;
  manifest["tool"] = "spatial-synth";
  manifest["version"] = SPATIAL_SYNTH_VERSION;
  manifest["config_hash"] = fnv1a_hex(canonical_text(config));
  manifest["cooc_hash"] = fnv1a_hex(cooc_text);
  manifest["seed"] = config.seed;
  manifest["provider_mode"] = mode_name(config.provider.mode);
  manifest["model"] = config.provider.model;
  manifest["canvas"] = canvas_json(config.provider.canvas);
  manifest["records_requested"] = n;
  manifest["records_written"] = stats.written;
  manifest["train_records"] = train_count;
  manifest["heldout_records"] = heldout_count;
  manifest["rejected_layouts"] = stats.rejected_layouts;
  manifest["failed_records"] = stats.failed_records;
  manifest["max_resamples"] = config.dataset.max_resamples;
  manifest["min_pair_count"] = config.dataset.min_pair_count;
  manifest["energy"] = {{"omega", config.energy.omega},
                        {"eta", config.energy.eta},
                        {"topk_fraction", config.energy.topk_fraction}};
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  if (result) *result = stats;

  io.err << "wrote " << stats.written << "/" << n << " records (train " << train_count << ", heldout "
         << heldout_count << "), " << stats.rejected_layouts << " rejected layouts, " << stats.failed_records
         << " failed records\n";
  const double yield = static_cast<double>(stats.written) / static_cast<double>(n);
  if (yield < config.dataset.min_yield) {
    io.err << "yield " << yield << " below minimum " << config.dataset.min_yield << "\n";
    return kExitDomain;
  }
  return kExitOk;
}

int cmd_validate(const std::string& dataset_path, const PipelineConfig& config, Streams io) {
  const auto lines = nonempty_lines(read_file(dataset_path));
  std::size_t invalid = 0;
  std::vector<std::string> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string label = "line " + std::to_string(i + 1);
    try {
      const auto parsed = json::parse(lines[i], nullptr, false);
      if (parsed.is_object() && parsed.contains("id") && parsed["id"].is_string()) {
        label = parsed["id"].get<std::string>();
      }
      const TrainingTriplet triplet = triplet_from_jsonl(lines[i], config.provider.canvas);
      if (std::find(seen.begin(), seen.end(), triplet.id()) != seen.end()) {
        throw Error(ErrorCode::ValidationError, "duplicate record id");
      }
      seen.push_back(triplet.id());
    } catch (const Error& e) {
      ++invalid;
      io.out << label << ": " << e.what() << join_violations(e) << "\n";
    }
  }
  io.out << "checked " << lines.size() << " records, " << invalid << " invalid\n";
  if (lines.empty()) {
    io.err << "dataset is empty\n";
    return kExitDomain;
  }
  return invalid == 0 ? kExitOk : kExitDomain;
}

int cmd_sim_eval(const SimEvalOptions& options, const PipelineConfig& config, Streams io) {
  const CooccurrenceMatrix matrix = matrix_from_json(read_cooc(config));
  const CategoryVocab& vocab = matrix.vocab();
  const auto lines = nonempty_lines(read_file(options.dataset_path));
  std::vector<TrainingTriplet> triplets;
  triplets.reserve(lines.size());
  for (const auto& line : lines) triplets.push_back(triplet_from_jsonl(line, config.provider.canvas));
  const std::size_t n = triplets.size();

  std::vector<char> selected(n, 0);
  const auto& spec = options.perturb;
  if (spec.kind == PerturbSpec::Kind::Swap || spec.kind == PerturbSpec::Kind::Drop) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, kPerturbStream));
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)))]);
    }
    const auto k = static_cast<std::size_t>(std::llround(spec.fraction * static_cast<double>(n)));
    for (std::size_t i = 0; i < k; ++i) selected[order[i]] = 1;
  }

  std::vector<EvalCase> cases(n);
  std::vector<DetectionRecord> records(n);
  parallel_for(n, config.workers, [&](std::size_t i) {
    const TrainingTriplet& t = triplets[i];
    const auto& objects = t.target_layout().objects;
    const int placed = t.placed_index();
    EvalCase& c = cases[i];
    c.image_id = t.id();
    c.label_a = vocab.name_of(category_for_caption(objects[static_cast<std::size_t>(1 - placed)].caption, vocab));
    c.label_b = vocab.name_of(category_for_caption(objects[static_cast<std::size_t>(placed)].caption, vocab));
    c.expected_relation = t.instruction().relation;

    Layout layout = t.target_layout();
    if (spec.kind == PerturbSpec::Kind::Swap && selected[i]) {
      layout = perturb(layout, Perturbation::swap_positions());
    } else if (spec.kind == PerturbSpec::Kind::Drop && selected[i]) {
      layout = perturb(layout, Perturbation::drop_object(placed));
    } else if (spec.kind == PerturbSpec::Kind::Jitter) {
      layout = perturb(layout, Perturbation::jitter(spec.max_px, derive_seed(config.seed, kPerturbStream, i)));
    }
    records[i] = oracle_detect(rasterize(layout, vocab), vocab, t.id());
  });

  if (options.cases_out) {
    std::string text;
    for (const auto& c : cases) text += to_jsonl(c) + "\n";
    write_file(*options.cases_out, text);
  }
  if (options.detections_out) {
    std::string text;
    for (const auto& r : records) text += to_jsonl(r) + "\n";
    write_file(*options.detections_out, text);
  }
  const EvalReport report = visor(cases, records, config.score_threshold);
  io.out << report_to_json(report) << "\n" << report_table(report);
  return kExitOk;
}

int cmd_eval(const EvalOptions& options, const PipelineConfig& config, Streams io) {
  const auto cases = parse_cases_jsonl(read_file(options.cases_path));
  const auto records = parse_detections_jsonl(read_file(options.detections_path));
  const EvalReport report = visor(cases, records, config.score_threshold);
  io.out << report_to_json(report) << "\n" << report_table(report);
  return kExitOk;
}

double run_ddim_demo(const DdimDemoOptions& options, std::uint64_t seed) {
  const DDIMSchedule schedule = DDIMSchedule::linear(options.steps);
  const EnhancementSchedule phases = enhancement_phases(options.steps, options.alpha);
  const GaussianOracleNetwork net(0.0, 1.0, schedule);
  const GridShape shape{options.height, options.width, options.channels};
  Rng rng(derive_seed(seed, kDdimStream));
  std::vector<double> values(shape.size());
  for (double& v : values) v = standard_normal(rng);
  const LatentGrid z(shape, std::move(values));
  return max_abs_difference(run_enhancement(z, net, net, phases, schedule), z);
}

int cmd_ddim_demo(const DdimDemoOptions& options, const PipelineConfig& config, Streams io) {
  const EnhancementSchedule phases = enhancement_phases(options.steps, options.alpha);
  io.err << "T=" << phases.total_steps << " alpha=" << phases.alpha << " t1=" << phases.t1 << " t2=" << phases.t2
         << " (inversion " << phases.inversion_steps() << ", base " << phases.base_steps() << ", enhancer "
         << phases.enhancer_steps() << " steps)\n";
  io.out << format_real(run_ddim_demo(options, config.seed)) << "\n";
  return kExitOk;
}

GradCheckReport run_grad_check(const GradCheckOptions& options, const EnergyConfig& energy, std::uint64_t seed) {
  constexpr std::size_t kHeight = 2;
  constexpr std::size_t kWidth = 3;  // 6 spatial locations
  constexpr std::size_t kChannels = 3;
  constexpr std::size_t kDim = 3;
  constexpr std::size_t kTokens = 4;

  GradCheckReport report;
  for (int inst = 0; inst < options.instances; ++inst) {
    Rng rng(derive_seed(seed, kGradStream, static_cast<std::uint64_t>(inst)));
    auto normal_matrix = [&](std::size_t rows, std::size_t cols) {
      Matrix m(rows, cols);
      for (double& v : m.data()) v = standard_normal(rng);
      return m;
    };
    auto normal_grid = [&] {
      LatentGrid z(GridShape{kHeight, kWidth, kChannels});
      for (double& v : z.values()) v = standard_normal(rng);
      return z;
    };
    auto random_mask = [&] {
      Mask m(kHeight, kWidth);
      for (std::size_t u = 0; u < m.size(); ++u) m.set(u, uniform_int(rng, 0, 1) == 1);
      return m;
    };
    auto random_tokens = [&](std::size_t max_size) {
      std::vector<std::size_t> all(kTokens);
      std::iota(all.begin(), all.end(), 0);
      for (std::size_t i = kTokens; i > 1; --i) {
        std::swap(all[i - 1], all[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)))]);
      }
      all.resize(static_cast<std::size_t>(uniform_int(rng, 1, static_cast<std::int64_t>(max_size))));
      return all;
    };

    const CrossAttentionProbe probe(normal_matrix(kChannels, kDim), normal_matrix(kTokens, kDim));
    const LatentGrid z = normal_grid();
    const LatentGrid z_ref = normal_grid();

    const AttentionControlEnergy control(probe, random_mask(), random_tokens(kTokens), energy);
    const BackgroundRetentionEnergy retention(probe, probe.attention(z_ref), random_mask(),
                                              random_tokens(kTokens - 1));
    auto check = [&](const DifferentiableEnergy& e) {
      const LatentGrid numeric =
          finite_difference_gradient([&](const LatentGrid& x) { return e.value(x); }, z, options.h);
      return gradient_relative_error(e.gradient(z), numeric);
    };
    report.attention_control = std::max(report.attention_control, check(control));
    report.background_retention = std::max(report.background_retention, check(retention));
  }
  return report;
}

int cmd_grad_check(const GradCheckOptions& options, const PipelineConfig& config, Streams io) {
  const GradCheckReport r = run_grad_check(options, config.energy, config.seed);
  io.out << "attention_control " << format_real(r.attention_control) << "\n"
         << "background_retention " << format_real(r.background_retention) << "\n";
  if (r.attention_control > options.tolerance || r.background_retention > options.tolerance) {
    io.err << "relative error above tolerance " << options.tolerance << "\n";
    return kExitDomain;
  }
  return kExitOk;
}

}  // namespace spatial::cli
