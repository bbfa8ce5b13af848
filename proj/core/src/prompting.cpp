#include "spatial/prompting.hpp"

#include <algorithm>
#include <array>

#include "json_util.hpp"
#include "prompt_fixtures.hpp"
#include "spatial/error.hpp"
#include "spatial/random.hpp"
#include "text_util.hpp"

namespace spatial {

using detail::trim;

SamplingParams default_caption_sampling() {
  SamplingParams params;
  params.stop = {"."};
  return params;
}

SamplingParams default_layout_sampling() {
  SamplingParams params;
  params.stop = {"\n\n"};
  return params;
}

namespace {

std::string fixture(std::string_view name) {
  return std::string(trim(detail::prompt_fixture(name)));
}

// Demonstrations are blank-line separated blocks; the first line of a block
// is the user turn and the remaining lines are the assistant answer.
std::vector<ChatMessage> demonstrations(std::string_view name) {
  std::vector<ChatMessage> messages;
  std::vector<std::string_view> block;
  auto flush = [&] {
    if (block.empty()) return;
    std::string answer;
    for (std::size_t i = 1; i < block.size(); ++i) {
      if (i > 1) answer += '\n';
      answer += block[i];
    }
    messages.push_back({"user", std::string(block.front())});
    messages.push_back({"assistant", answer});
    block.clear();
  };
  for (std::string_view line : detail::split_lines(detail::prompt_fixture(name))) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) {
      flush();
    } else {
      block.push_back(line);
    }
  }
  flush();
  return messages;
}

}  // namespace

ChatRequest render_caption_prompt(std::string_view object_a, std::string_view object_b,
                                  const SamplingParams& sampling) {
  if (trim(object_a).empty() || trim(object_b).empty()) {
    throw Error(ErrorCode::InvalidInput, "caption prompt needs two non-empty object names");
  }
  ChatRequest request;
  request.task = PromptTask::Caption;
  request.task_description = fixture("caption_task.txt");
  request.messages = demonstrations("caption_icl.txt");
  request.messages.push_back(
      {"user", "[Objects]: " + std::string(object_a) + " and " + std::string(object_b) + "."});
  request.sampling = sampling;
  return request;
}

ChatRequest render_layout_prompt(std::string_view caption, const SamplingParams& sampling) {
  if (trim(caption).empty()) throw Error(ErrorCode::InvalidInput, "layout prompt needs a caption");
  ChatRequest request;
  request.task = PromptTask::Layout;
  request.task_description = fixture("layout_task.txt");
  request.messages = demonstrations("layout_icl.txt");
  request.messages.push_back({"user", "[Caption]: " + std::string(caption)});
  request.sampling = sampling;
  return request;
}

std::string request_to_json(const ChatRequest& request, int indent) {
  using Json = nlohmann::ordered_json;
  Json messages = Json::array();
  messages.push_back({{"role", "system"}, {"content", "[Task Description]: " + request.task_description}});
  for (const auto& message : request.messages) {
    messages.push_back({{"role", message.role}, {"content", message.content}});
  }
  Json body;
  body["model"] = request.model;
  body["messages"] = std::move(messages);
  body["temperature"] = request.sampling.temperature;
  body["top_p"] = request.sampling.top_p;
  body["max_tokens"] = request.sampling.max_tokens;
  body["frequency_penalty"] = request.sampling.frequency_penalty;
  body["presence_penalty"] = request.sampling.presence_penalty;
  body["stop"] = request.sampling.stop;
  body["n"] = 1;
  body["seed"] = request.seed;
  return body.dump(indent);
}

void validate_config(const ProviderConfig& config) {
  if (config.mode == ProviderMode::External && trim(config.endpoint_url).empty()) {
    throw Error(ErrorCode::InvalidInput, "external provider mode requires an endpoint URL");
  }
  if (config.retry.max_attempts < 1) throw Error(ErrorCode::InvalidInput, "retry.max_attempts must be >= 1");
  if (config.max_in_flight < 1) throw Error(ErrorCode::InvalidInput, "max_in_flight must be >= 1");
}

namespace {

constexpr std::array<std::string_view, 12> kAdjectives = {
    "gray", "orange", "white", "black", "brown", "red",
    "blue", "green", "yellow", "small", "large", "old"};

constexpr std::array<std::string_view, 8> kBackgrounds = {
    "A realistic photo of a garden",
    "A realistic photo of a living room",
    "A realistic photograph of a scene",
    "A watercolor painting of a park",
    "An oil painting of a city street",
    "A realistic photo of a beach",
    "A realistic image of a kitchen",
    "A realistic photo of a backyard"};

std::string with_article(std::string_view adjective, std::string_view noun) {
  const bool vowel = std::string_view("aeiou").find(adjective.front()) != std::string_view::npos;
  return std::string(vowel ? "an " : "a ") + std::string(adjective) + " " + std::string(noun);
}

bool background_mentions(std::string_view background, std::string_view caption) {
  const std::string noun = head_noun(caption);
  const auto words = detail::words(background);
  return !noun.empty() && std::find(words.begin(), words.end(), noun) != words.end();
}

}  // namespace

std::string deterministic_caption(std::string_view object_a, std::string_view object_b,
                                  std::uint64_t seed) {
  Rng rng(seed);
  const bool a_on_left = uniform_int(rng, 0, 1) == 0;
  const auto adjective_a = kAdjectives[uniform_int(rng, 0, kAdjectives.size() - 1)];
  auto adjective_b = kAdjectives[uniform_int(rng, 0, kAdjectives.size() - 2)];
  if (adjective_b == adjective_a) adjective_b = kAdjectives.back();
  const std::string caption_a = with_article(adjective_a, trim(object_a));
  const std::string caption_b = with_article(adjective_b, trim(object_b));

  const auto start = static_cast<std::size_t>(uniform_int(rng, 0, kBackgrounds.size() - 1));
  std::string_view background = kBackgrounds[start];
  for (std::size_t i = 0; i < kBackgrounds.size(); ++i) {
    const auto candidate = kBackgrounds[(start + i) % kBackgrounds.size()];
    if (!background_mentions(candidate, caption_a) && !background_mentions(candidate, caption_b)) {
      background = candidate;
      break;
    }
  }

  CaptionSpec spec;
  spec.background = std::string(background);
  spec.left_object = a_on_left ? caption_a : caption_b;
  spec.right_object = a_on_left ? caption_b : caption_a;
  return render_caption(spec);
}

Layout deterministic_layout(const CaptionSpec& spec, std::uint64_t seed, const CanvasSpec& canvas) {
  if (canvas.width < 512 || canvas.height < 512 || canvas.max_box_dim <= 220) {
    throw Error(ErrorCode::InvalidInput,
                "deterministic layouts need a canvas of at least 512x512 with max_box_dim > 220");
  }
  Rng rng(seed);
  const auto left_x = uniform_int(rng, 16, 64);
  const auto right_x = uniform_int(rng, 272, 336);
  const auto left_y = uniform_int(rng, 64, 160);
  const auto right_y = uniform_int(rng, 64, 160);
  const auto left_h = uniform_int(rng, 140, 220);
  const auto right_h = uniform_int(rng, 140, 220);
  const auto left_w = uniform_int(rng, 140, std::min<std::int64_t>(220, right_x - left_x));
  const auto right_w = uniform_int(rng, 140, std::min<std::int64_t>(220, canvas.width - right_x));

  auto box = [](std::int64_t x, std::int64_t y, std::int64_t w, std::int64_t h) {
    return BBox{static_cast<double>(x), static_cast<double>(y), static_cast<double>(w),
                static_cast<double>(h)};
  };
  Layout layout;
  layout.canvas = canvas;
  layout.background_prompt = spec.background;
  layout.objects.push_back({spec.left_object, box(left_x, left_y, left_w, left_h)});
  layout.objects.push_back({spec.right_object, box(right_x, right_y, right_w, right_h)});
  return layout;
}

}  // namespace spatial
