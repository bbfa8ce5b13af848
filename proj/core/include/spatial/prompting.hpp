#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "spatial/geometry.hpp"
#include "spatial/layout.hpp"

namespace spatial {

enum class PromptTask { Caption, Layout };

struct ChatMessage {
  std::string role;  // "system", "user" or "assistant"
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

/// Sampling parameters sent with every chat request.
struct SamplingParams {
  double temperature = 1.0;
  double top_p = 0.5;
  int max_tokens = 100;
  double frequency_penalty = 0.0;
  double presence_penalty = 0.0;
  std::vector<std::string> stop;

  friend bool operator==(const SamplingParams&, const SamplingParams&) = default;
};

SamplingParams default_caption_sampling();  // stop "."
SamplingParams default_layout_sampling();   // stop "\n\n"

struct ChatRequest {
  PromptTask task = PromptTask::Caption;
  std::string model = "gpt-3.5-turbo";
  std::string task_description;
  /// In-context demonstrations followed by the final user turn.
  std::vector<ChatMessage> messages;
  SamplingParams sampling;
  std::uint64_t seed = 0;

  const std::string& final_user_turn() const { return messages.back().content; }
};

/// Throws InvalidInput when a name is empty.
ChatRequest render_caption_prompt(std::string_view object_a, std::string_view object_b,
                                  const SamplingParams& sampling = default_caption_sampling());

/// Throws InvalidInput when the caption is empty.
ChatRequest render_layout_prompt(std::string_view caption,
                                 const SamplingParams& sampling = default_layout_sampling());

/// OpenAI-compatible chat-completions request body; `indent` >= 0 pretty-prints.
std::string request_to_json(const ChatRequest& request, int indent = -1);

enum class ProviderMode { External, Deterministic };

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff{500};
};

struct ProviderConfig {
  ProviderMode mode = ProviderMode::Deterministic;
  std::string endpoint_url;  // base URL or full .../chat/completions URL
  std::string model = "gpt-3.5-turbo";
  std::string api_key_env_var = "OPENAI_API_KEY";
  RetryPolicy retry;
  int max_in_flight = 4;
  std::chrono::milliseconds timeout{60000};
  CanvasSpec canvas;
};

/// Throws InvalidInput when the configuration is unusable.
void validate_config(const ProviderConfig& config);

/// Chat-completion client. External mode posts to an OpenAI-compatible
/// endpoint; deterministic mode synthesizes a well-formed answer from the
/// request seed. Safe to share between threads; at most `max_in_flight`
/// external requests run at once.
class ChatClient {
 public:
  explicit ChatClient(ProviderConfig config);
  ~ChatClient();
  ChatClient(const ChatClient&) = delete;
  ChatClient& operator=(const ChatClient&) = delete;

  /// Content of the first choice. Throws TransportError (after retries),
  /// AuthError, RateLimited (after retries, with retry_after_seconds) or
  /// EmptyResponse.
  std::string complete(const ChatRequest& request);

  const ProviderConfig& config() const { return config_; }

 private:
  std::string complete_external(const ChatRequest& request);

  struct Gate;
  ProviderConfig config_;
  std::unique_ptr<Gate> gate_;
};

std::string complete(const ChatRequest& request, const ProviderConfig& config);

/// Offline caption for an unordered object pair; the seed picks the
/// left/right assignment, adjectives and background.
std::string deterministic_caption(std::string_view object_a, std::string_view object_b,
                                  std::uint64_t seed);

/// Offline layout for a caption: left box x in [16, 64], right box x in
/// [272, 336], y in [64, 160], w and h in [140, 220] with widths capped so
/// the boxes never overlap or leave the canvas. Requires a canvas of at
/// least 512x512 with max_box_dim > 220 (InvalidInput otherwise).
Layout deterministic_layout(const CaptionSpec& spec, std::uint64_t seed,
                            const CanvasSpec& canvas = {});

}  // namespace spatial
