#include "config.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "spatial/error.hpp"
#include "toml.hpp"

namespace spatial::cli {

namespace {

// A setting visible in the TOML file and the environment.
struct Key {
  const char* path;
  std::function<void(PipelineConfig&, const toml::node&)> from_toml;
  std::function<void(PipelineConfig&, const std::string&)> from_text;
};

[[noreturn]] void bad_value(const std::string& path, const std::string& expected) {
  throw Error(ErrorCode::SchemaError, "config key '" + path + "' must be " + expected);
}

template <typename T>
T toml_int(const toml::node& node, const std::string& path, long long lo) {
  const auto v = node.value<long long>();
  if (!v || !node.is_integer() || *v < lo) bad_value(path, "an integer >= " + std::to_string(lo));
  return static_cast<T>(*v);
}

double toml_real(const toml::node& node, const std::string& path) {
  const auto v = node.value<double>();
  if (!v || !(node.is_floating_point() || node.is_integer())) bad_value(path, "a number");
  return *v;
}

std::string toml_str(const toml::node& node, const std::string& path) {
  const auto v = node.value<std::string>();
  if (!v || !node.is_string()) bad_value(path, "a string");
  return *v;
}

template <typename T>
T text_int(const std::string& text, const std::string& path, long long lo) {
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(text.c_str(), &end, 10);
  if (text.empty() || *end != '\0' || errno != 0 || v < lo) {
    bad_value(path, "an integer >= " + std::to_string(lo));
  }
  return static_cast<T>(v);
}

double text_real(const std::string& text, const std::string& path) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || *end != '\0') bad_value(path, "a number");
  return v;
}

ProviderMode parse_mode(const std::string& text) {
  if (text == "deterministic") return ProviderMode::Deterministic;
  if (text == "external") return ProviderMode::External;
  bad_value("provider.mode", "\"deterministic\" or \"external\"");
}

#define SPATIAL_INT_KEY(PATH, FIELD, TYPE, LO)                                                  \
  Key {                                                                                         \
    PATH, [](PipelineConfig& c, const toml::node& n) { c.FIELD = toml_int<TYPE>(n, PATH, LO); }, \
        [](PipelineConfig& c, const std::string& s) { c.FIELD = text_int<TYPE>(s, PATH, LO); }   \
  }
#define SPATIAL_REAL_KEY(PATH, FIELD)                                                  \
  Key {                                                                                \
    PATH, [](PipelineConfig& c, const toml::node& n) { c.FIELD = toml_real(n, PATH); }, \
        [](PipelineConfig& c, const std::string& s) { c.FIELD = text_real(s, PATH); }   \
  }
// sampling.* applies to both prompt tasks; stop sequences stay per task.
#define SPATIAL_SAMPLING_KEY(PATH, FIELD, PARSE_TOML, PARSE_TEXT)                    \
  Key {                                                                             \
    PATH,                                                                           \
        [](PipelineConfig& c, const toml::node& n) {                                \
          c.caption_sampling.FIELD = c.layout_sampling.FIELD = PARSE_TOML;          \
        },                                                                          \
        [](PipelineConfig& c, const std::string& s) {                               \
          c.caption_sampling.FIELD = c.layout_sampling.FIELD = PARSE_TEXT;          \
        }                                                                           \
  }
#define SPATIAL_STR_KEY(PATH, FIELD)                                                  \
  Key {                                                                               \
    PATH, [](PipelineConfig& c, const toml::node& n) { c.FIELD = toml_str(n, PATH); }, \
        [](PipelineConfig& c, const std::string& s) { c.FIELD = s; }                   \
  }

constexpr const char* PATH_T = "sampling.temperature";
constexpr const char* PATH_P = "sampling.top_p";
constexpr const char* PATH_M = "sampling.max_tokens";
constexpr const char* PATH_F = "sampling.frequency_penalty";
constexpr const char* PATH_R = "sampling.presence_penalty";

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      SPATIAL_INT_KEY("seed", seed, std::uint64_t, 0),
      SPATIAL_INT_KEY("workers", workers, int, 1),
      SPATIAL_STR_KEY("out", out_dir),
      Key{"provider.mode",
          [](PipelineConfig& c, const toml::node& n) { c.provider.mode = parse_mode(toml_str(n, "provider.mode")); },
          [](PipelineConfig& c, const std::string& s) { c.provider.mode = parse_mode(s); }},
      SPATIAL_STR_KEY("provider.endpoint", provider.endpoint_url),
      SPATIAL_STR_KEY("provider.model", provider.model),
      SPATIAL_STR_KEY("provider.api_key_env", provider.api_key_env_var),
      SPATIAL_INT_KEY("provider.max_attempts", provider.retry.max_attempts, int, 1),
      Key{"provider.backoff_ms",
          [](PipelineConfig& c, const toml::node& n) {
            c.provider.retry.backoff = std::chrono::milliseconds(toml_int<long long>(n, "provider.backoff_ms", 0));
          },
          [](PipelineConfig& c, const std::string& s) {
            c.provider.retry.backoff = std::chrono::milliseconds(text_int<long long>(s, "provider.backoff_ms", 0));
          }},
      SPATIAL_INT_KEY("provider.max_in_flight", provider.max_in_flight, int, 1),
      Key{"provider.timeout_ms",
          [](PipelineConfig& c, const toml::node& n) {
            c.provider.timeout = std::chrono::milliseconds(toml_int<long long>(n, "provider.timeout_ms", 1));
          },
          [](PipelineConfig& c, const std::string& s) {
            c.provider.timeout = std::chrono::milliseconds(text_int<long long>(s, "provider.timeout_ms", 1));
          }},
      SPATIAL_SAMPLING_KEY("sampling.temperature", temperature, toml_real(n, PATH_T), text_real(s, PATH_T)),
      SPATIAL_SAMPLING_KEY("sampling.top_p", top_p, toml_real(n, PATH_P), text_real(s, PATH_P)),
      SPATIAL_SAMPLING_KEY("sampling.max_tokens", max_tokens, toml_int<int>(n, PATH_M, 1), text_int<int>(s, PATH_M, 1)),
      SPATIAL_SAMPLING_KEY("sampling.frequency_penalty", frequency_penalty, toml_real(n, PATH_F),
                           text_real(s, PATH_F)),
      SPATIAL_SAMPLING_KEY("sampling.presence_penalty", presence_penalty, toml_real(n, PATH_R),
                           text_real(s, PATH_R)),
      SPATIAL_INT_KEY("canvas.width", provider.canvas.width, int, 1),
      SPATIAL_INT_KEY("canvas.height", provider.canvas.height, int, 1),
      SPATIAL_INT_KEY("canvas.max_box_dim", provider.canvas.max_box_dim, int, 1),
      SPATIAL_INT_KEY("dataset.records", dataset.records, std::size_t, 1),
      SPATIAL_INT_KEY("dataset.heldout", dataset.heldout, std::size_t, 0),
      SPATIAL_REAL_KEY("dataset.min_yield", dataset.min_yield),
      SPATIAL_INT_KEY("dataset.max_resamples", dataset.max_resamples, int, 0),
      SPATIAL_INT_KEY("dataset.min_pair_count", dataset.min_pair_count, std::uint64_t, 0),
      SPATIAL_STR_KEY("dataset.cooc", dataset.cooc_path),
      SPATIAL_REAL_KEY("eval.score_threshold", score_threshold),
      SPATIAL_REAL_KEY("energy.omega", energy.omega),
      SPATIAL_REAL_KEY("energy.eta", energy.eta),
      SPATIAL_REAL_KEY("energy.topk_fraction", energy.topk_fraction),
  };
  return table;
}

#undef SPATIAL_INT_KEY
#undef SPATIAL_REAL_KEY
#undef SPATIAL_STR_KEY
#undef SPATIAL_SAMPLING_KEY

std::string env_name(std::string_view path) {
  std::string name = "SPATIAL_SYNTH_";
  for (char ch : path) {
    name.push_back(ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  }
  return name;
}

void reject_unknown(const toml::table& table, const std::string& prefix) {
  for (const auto& [key, node] : table) {
    const std::string path = prefix.empty() ? std::string(key.str()) : prefix + "." + std::string(key.str());
    if (const auto* sub = node.as_table()) {
      reject_unknown(*sub, path);
      continue;
    }
    bool known = false;
    for (const auto& k : keys()) known = known || path == k.path;
    if (!known) throw Error(ErrorCode::SchemaError, "unknown config key '" + path + "'");
  }
}

}  // namespace

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

PipelineConfig load_config(const std::optional<std::string>& path, const EnvLookup& env) {
  PipelineConfig config;
  if (path) {
    toml::table table;
    try {
      table = toml::parse_file(*path);
    } catch (const toml::parse_error& e) {
      const auto& src = e.source();
      if (src.begin.line == 0) throw Error(ErrorCode::IoError, "cannot read config " + *path);
      throw Error(ErrorCode::SchemaError, *path + ":" + std::to_string(src.begin.line) + ": " +
                                              std::string(e.description()));
    }
    reject_unknown(table, "");
    for (const auto& k : keys()) {
      if (const toml::node* node = table.at_path(k.path).node()) k.from_toml(config, *node);
    }
  }
  for (const auto& k : keys()) {
    if (auto value = env(env_name(k.path))) k.from_text(config, *value);
  }
  return config;
}

void validate(const PipelineConfig& config) {
  validate_config(config.provider);
  if (config.dataset.heldout > config.dataset.records) {
    throw Error(ErrorCode::InvalidInput, "dataset.heldout exceeds dataset.records");
  }
  if (!(config.dataset.min_yield >= 0.0 && config.dataset.min_yield <= 1.0)) {
    throw Error(ErrorCode::InvalidInput, "dataset.min_yield must lie in [0, 1]");
  }
  for (const SamplingParams* p : {&config.caption_sampling, &config.layout_sampling}) {
    if (!(p->temperature >= 0.0) || !(p->top_p > 0.0 && p->top_p <= 1.0) || p->max_tokens <= 0) {
      throw Error(ErrorCode::InvalidInput, "sampling needs temperature >= 0, 0 < top_p <= 1, max_tokens > 0");
    }
  }
  if (!(config.score_threshold >= 0.0)) throw Error(ErrorCode::InvalidInput, "eval.score_threshold must be >= 0");
  config.energy.top_k(1);
}

std::string canonical_text(const PipelineConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "seed=" << c.seed << "\n"
      << "provider.mode=" << (c.provider.mode == ProviderMode::Deterministic ? "deterministic" : "external") << "\n"
      << "provider.model=" << c.provider.model << "\n"
      << "canvas=" << c.provider.canvas.width << "x" << c.provider.canvas.height << "/"
      << c.provider.canvas.max_box_dim << "\n"
      << "sampling=" << c.caption_sampling.temperature << "," << c.caption_sampling.top_p << ","
      << c.caption_sampling.max_tokens << "," << c.caption_sampling.frequency_penalty << ","
      << c.caption_sampling.presence_penalty << "\n"
      << "dataset.records=" << c.dataset.records << "\n"
      << "dataset.heldout=" << c.dataset.heldout << "\n"
      << "dataset.max_resamples=" << c.dataset.max_resamples << "\n"
      << "dataset.min_pair_count=" << c.dataset.min_pair_count << "\n";
  return out.str();
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace spatial::cli
