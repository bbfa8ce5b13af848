#include <cstdlib>
#include <semaphore>
#include <thread>

#include "httplib.h"
#include "json_util.hpp"
#include "spatial/error.hpp"
#include "spatial/prompting.hpp"
#include "text_util.hpp"

namespace spatial {

using detail::trim;

struct ChatClient::Gate {
  explicit Gate(int slots) : semaphore(slots) {}
  std::counting_semaphore<1024> semaphore;
};

ChatClient::ChatClient(ProviderConfig config) : config_(std::move(config)) {
  validate_config(config_);
  gate_ = std::make_unique<Gate>(std::min(config_.max_in_flight, 1024));
}

ChatClient::~ChatClient() = default;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(std::string_view url) {
  url = trim(url);
  const std::size_t scheme_end = url.find("://");
  const std::size_t host_begin = scheme_end == std::string_view::npos ? 0 : scheme_end + 3;
  const std::size_t path_begin = url.find('/', host_begin);
  Endpoint endpoint;
  endpoint.origin = std::string(url.substr(0, path_begin));
  std::string path = path_begin == std::string_view::npos ? "" : std::string(url.substr(path_begin));
  if (!detail::ends_with(path, "/chat/completions")) {
    while (!path.empty() && path.back() == '/') path.pop_back();
    path += "/v1/chat/completions";
  }
  endpoint.path = path;
  return endpoint;
}

std::string deterministic_answer(const ChatRequest& request, const CanvasSpec& canvas) {
  std::string_view turn = request.messages.empty() ? std::string_view() : request.final_user_turn();
  if (request.task == PromptTask::Caption) {
    detail::strip_label(turn, "Objects");
    turn = trim(turn);
    if (!turn.empty() && turn.back() == '.') turn.remove_suffix(1);
    const std::size_t split = turn.find(" and ");
    if (split == std::string_view::npos) {
      throw Error(ErrorCode::InvalidInput, "caption request does not name two objects");
    }
    return deterministic_caption(trim(turn.substr(0, split)), trim(turn.substr(split + 5)),
                                 request.seed);
  }
  const CaptionSpec spec = parse_caption(turn);
  return render_layout(deterministic_layout(spec, request.seed, canvas));
}

std::optional<double> parse_retry_after(const httplib::Response& response) {
  if (!response.has_header("Retry-After")) return std::nullopt;
  const std::string value = response.get_header_value("Retry-After");
  char* end = nullptr;
  const double seconds = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || seconds < 0) return std::nullopt;
  return seconds;
}

}  // namespace

std::string ChatClient::complete(const ChatRequest& request) {
  if (request.messages.empty()) throw Error(ErrorCode::InvalidInput, "chat request has no messages");
  if (config_.mode == ProviderMode::Deterministic) return deterministic_answer(request, config_.canvas);
  gate_->semaphore.acquire();
  struct Release {
    Gate& gate;
    ~Release() { gate.semaphore.release(); }
  } release{*gate_};
  return complete_external(request);
}

std::string ChatClient::complete_external(const ChatRequest& request) {
  const Endpoint endpoint = split_endpoint(config_.endpoint_url);
  ChatRequest outgoing = request;
  if (!config_.model.empty()) outgoing.model = config_.model;
  const std::string body = request_to_json(outgoing);

  httplib::Headers headers;
  if (!config_.api_key_env_var.empty()) {
    if (const char* key = std::getenv(config_.api_key_env_var.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  const auto timeout_s = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto timeout_us =
      std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - timeout_s);

  std::string last_failure = "no attempt made";
  std::optional<double> retry_after;
  bool rate_limited = false;
  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    if (attempt > 1) {
      auto wait = config_.retry.backoff * (1 << std::min(attempt - 2, 10));
      if (rate_limited && retry_after) {
        wait = std::max(wait, std::chrono::milliseconds(static_cast<long long>(*retry_after * 1000)));
      }
      std::this_thread::sleep_for(wait);
    }

    httplib::Client client(endpoint.origin);
    client.set_connection_timeout(timeout_s.count(), timeout_us.count());
    client.set_read_timeout(timeout_s.count(), timeout_us.count());
    client.set_write_timeout(timeout_s.count(), timeout_us.count());
    const auto response = client.Post(endpoint.path, headers, body, "application/json");

    rate_limited = false;
    if (!response) {
      last_failure = "request to " + endpoint.origin + endpoint.path + " failed: " +
                     httplib::to_string(response.error());
      continue;
    }
    const int status = response->status;
    if (status == 401 || status == 403) {
      throw Error(ErrorCode::AuthError, "endpoint rejected credentials (HTTP " + std::to_string(status) + ")");
    }
    if (status == 429) {
      rate_limited = true;
      retry_after = parse_retry_after(*response);
      last_failure = "rate limited (HTTP 429)";
      continue;
    }
    if (status >= 500) {
      last_failure = "server error (HTTP " + std::to_string(status) + ")";
      continue;
    }
    if (status < 200 || status >= 300) {
      throw Error(ErrorCode::TransportError, "endpoint returned HTTP " + std::to_string(status) +
                                                 ": " + response->body.substr(0, 200));
    }

    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(response->body);
    } catch (const nlohmann::json::parse_error&) {
      throw Error(ErrorCode::EmptyResponse, "endpoint returned a non-JSON body");
    }
    if (!reply.is_object() || !reply.contains("choices") || !reply["choices"].is_array() ||
        reply["choices"].empty()) {
      throw Error(ErrorCode::EmptyResponse, "response has no choices");
    }
    const auto& choice = reply["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content") ||
        !choice["message"]["content"].is_string()) {
      throw Error(ErrorCode::EmptyResponse, "first choice has no message content");
    }
    std::string content = choice["message"]["content"].get<std::string>();
    if (trim(content).empty()) throw Error(ErrorCode::EmptyResponse, "first choice content is empty");
    return content;
  }

  if (rate_limited) {
    Error error(ErrorCode::RateLimited, last_failure + " after " +
                                            std::to_string(config_.retry.max_attempts) + " attempts");
    error.retry_after_seconds = retry_after;
    throw error;
  }
  throw Error(ErrorCode::TransportError,
              last_failure + " (after " + std::to_string(config_.retry.max_attempts) + " attempts)");
}

std::string complete(const ChatRequest& request, const ProviderConfig& config) {
  ChatClient client(config);
  return client.complete(request);
}

}  // namespace spatial
