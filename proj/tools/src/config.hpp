#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "spatial/energies.hpp"
#include "spatial/prompting.hpp"

namespace spatial::cli {

struct DatasetSettings {
  std::size_t records = 22000;
  std::size_t heldout = 2000;
  double min_yield = 0.95;
  int max_resamples = 3;
  std::uint64_t min_pair_count = 10;
  std::string cooc_path;
};

struct PipelineConfig {
  ProviderConfig provider;
  SamplingParams caption_sampling = default_caption_sampling();
  SamplingParams layout_sampling = default_layout_sampling();
  DatasetSettings dataset;
  std::uint64_t seed = 0;
  int workers = 4;
  std::string out_dir = "out";
  double score_threshold = 0.1;
  EnergyConfig energy;
};

/// Looks up an environment variable; empty optional when unset.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

EnvLookup process_env();

/// Defaults, then the TOML file (if any), then SPATIAL_SYNTH_* variables.
/// Keys are dotted paths ("dataset.records"); the variable for a key is
/// SPATIAL_SYNTH_ plus the upper-cased path with '.' replaced by '_'.
/// Throws Error(SchemaError) for unknown keys or ill-typed values and
/// Error(IoError) when the file cannot be read.
PipelineConfig load_config(const std::optional<std::string>& path, const EnvLookup& env);

/// Throws Error(InvalidInput) when settings are inconsistent.
void validate(const PipelineConfig& config);

/// Canonical text of every setting that affects generated artifacts.
std::string canonical_text(const PipelineConfig& config);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

}  // namespace spatial::cli
