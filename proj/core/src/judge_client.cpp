#include "sciret/judge_client.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "jsonl.hpp"

namespace sciret {

using detail::json;

namespace {

std::string lower_copy(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool looks_like_context_rejection(int status, const std::string& body) {
  if (status != 400 && status != 413 && status != 422) return false;
  const std::string low = lower_copy(body);
  return low.find("context") != std::string::npos ||
         low.find("too long") != std::string::npos ||
         low.find("maximum length") != std::string::npos;
}

void apply_env_overrides(EndpointConfig& config) {
  if (const char* url = std::getenv("SCIRET_JUDGE_URL")) config.url = url;
  if (const char* model = std::getenv("SCIRET_JUDGE_MODEL")) config.model = model;
  if (const char* token = std::getenv("SCIRET_JUDGE_TOKEN")) config.api_token = token;
}

// "[1] > [2] > ... > [n]" with `first` promoted to the front.
std::string render_permutation(std::size_t n, std::size_t first) {
  std::string out = "[" + std::to_string(first) + "]";
  for (std::size_t i = 1; i <= n; ++i) {
    if (i == first) continue;
    out += " > [" + std::to_string(i) + "]";
  }
  return out;
}

}  // namespace

void EndpointConfig::validate() const {
  if (url.empty()) throw InputError("endpoint url is required");
  if (model.empty()) throw InputError("endpoint model is required");
  if (timeout_ms < 1) throw InputError("endpoint timeout_ms must be >= 1");
  if (max_attempts < 1) throw InputError("endpoint max_attempts must be >= 1");
  if (retry_base_ms < 0) throw InputError("endpoint retry_base_ms must be >= 0");
}

EndpointConfig load_endpoint_config(const std::string& path) {
  std::ifstream in = detail::open_in(path);
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  const json obj = json::parse(text, nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) {
    throw InputError(path + ": invalid endpoint config JSON");
  }
  EndpointConfig config;
  if (auto it = obj.find("url"); it != obj.end()) config.url = it->get<std::string>();
  if (auto it = obj.find("model"); it != obj.end()) config.model = it->get<std::string>();
  if (auto it = obj.find("api_token"); it != obj.end()) {
    config.api_token = it->get<std::string>();
  }
  if (auto it = obj.find("timeout_ms"); it != obj.end()) {
    config.timeout_ms = it->get<int>();
  }
  if (auto it = obj.find("max_attempts"); it != obj.end()) {
    config.max_attempts = it->get<int>();
  }
  if (auto it = obj.find("retry_base_ms"); it != obj.end()) {
    config.retry_base_ms = it->get<int>();
  }
  apply_env_overrides(config);
  config.validate();
  return config;
}

EndpointConfig endpoint_config_from_env() {
  EndpointConfig config;
  apply_env_overrides(config);
  config.validate();
  return config;
}

HttpJudgeBackend::HttpJudgeBackend(EndpointConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::size_t scheme = config_.url.find("://");
  const std::size_t path_start =
      config_.url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) {
    base_url_ = config_.url;
    path_ = "/";
  } else {
    base_url_ = config_.url.substr(0, path_start);
    path_ = config_.url.substr(path_start);
  }
}

CallResult HttpJudgeBackend::complete(const JudgeCase&, const std::string& prompt) {
  calls_.fetch_add(1);
  json body;
  body["model"] = config_.model;
  body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = 0;
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!config_.api_token.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_token);
  }

  CallResult result;
  const auto started = std::chrono::steady_clock::now();
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    result.attempts = attempt;
    httplib::Client client(base_url_);
    client.set_connection_timeout(0, config_.timeout_ms * 1000);
    client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
    client.set_write_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);

    httplib::Result res = client.Post(path_, headers, payload, "application/json");
    const auto now = std::chrono::steady_clock::now();
    result.latency_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(now - started).count();

    if (!res) {
      result.error = "transport error: " + httplib::to_string(res.error());
    } else if (res->status == 200) {
      const json envelope = json::parse(res->body, nullptr, false);
      result.status = CallStatus::OK;
      if (!envelope.is_discarded() && envelope.contains("choices") &&
          envelope["choices"].is_array() && !envelope["choices"].empty() &&
          envelope["choices"][0].contains("message") &&
          envelope["choices"][0]["message"].contains("content") &&
          envelope["choices"][0]["message"]["content"].is_string()) {
        result.content = envelope["choices"][0]["message"]["content"].get<std::string>();
      } else {
        // Unreadable envelope: hand back nothing and let parsing fall back.
        result.error = "response envelope missing choices[0].message.content";
      }
      return result;
    } else if (looks_like_context_rejection(res->status, res->body)) {
      result.status = CallStatus::CONTEXT_FAIL;
      result.error = "endpoint rejected prompt for length (HTTP " +
                     std::to_string(res->status) + ")";
      return result;
    } else if (res->status == 429 || res->status >= 500) {
      result.error = "HTTP " + std::to_string(res->status) + " from endpoint";
    } else {
      result.status = CallStatus::FAILED;
      result.error = "permanent HTTP " + std::to_string(res->status) + " from endpoint";
      return result;
    }

    if (attempt < config_.max_attempts && config_.retry_base_ms > 0) {
      const auto backoff = config_.retry_base_ms * (1 << (attempt - 1));
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
    }
  }
  result.status = CallStatus::FAILED;
  result.error = "retries exhausted: " + result.error;
  return result;
}

StubJudgeBackend::StubJudgeBackend(Mode mode, Formulation formulation,
                                   std::string fixed_body)
    : mode_(mode), formulation_(formulation), fixed_body_(std::move(fixed_body)) {}

CallResult StubJudgeBackend::complete(const JudgeCase& judge_case, const std::string&) {
  calls_.fetch_add(1);
  CallResult result;
  result.latency_ms = 0;

  if (mode_ == Mode::FAIL_TRANSPORT) {
    result.status = CallStatus::FAILED;
    result.attempts = 3;
    result.error = "transport failure (stub)";
    return result;
  }

  result.status = CallStatus::OK;
  result.attempts = 1;
  if (mode_ == Mode::FIXED_BODY) {
    result.content = fixed_body_;
    return result;
  }

  std::size_t pick = 1;  // 1-based candidate index; 1 is the baseline
  if (mode_ == Mode::RETRIEVER_TOP) {
    for (std::size_t i = 0; i < judge_case.candidates.size(); ++i) {
      if (judge_case.candidates[i].retrieval_rank == 1) {
        pick = i + 1;
        break;
      }
    }
  }
  if (formulation_ == Formulation::LISTWISE) {
    result.content = render_permutation(judge_case.candidates.size(), pick);
  } else {
    result.content =
        "{\"selected_id\": \"" + judge_case.candidates[pick - 1].letter + "\"}";
  }
  return result;
}

std::unique_ptr<StubJudgeBackend> make_stub(std::string_view mode_name,
                                            Formulation formulation) {
  const std::string low = lower_copy(mode_name);
  if (low == "baseline") {
    return std::make_unique<StubJudgeBackend>(StubJudgeBackend::Mode::BASELINE,
                                              formulation);
  }
  if (low == "retriever-top" || low == "retriever_top") {
    return std::make_unique<StubJudgeBackend>(StubJudgeBackend::Mode::RETRIEVER_TOP,
                                              formulation);
  }
  if (low == "fail") {
    return std::make_unique<StubJudgeBackend>(StubJudgeBackend::Mode::FAIL_TRANSPORT,
                                              formulation);
  }
  throw InputError("unknown stub mode: " + std::string(mode_name) +
                   " (expected baseline, retriever-top, or fail)");
}

}  // namespace sciret
