#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sciret/judge.hpp"
#include "sciret/types.hpp"

namespace sciret {

enum class CallStatus {
  OK,            // got a response body to parse
  CONTEXT_FAIL,  // endpoint rejected the prompt for length; not retried
  FAILED,        // transport errors exhausted retries, or a permanent HTTP error
};

struct CallResult {
  CallStatus status = CallStatus::FAILED;
  std::string content;     // assistant message content when status == OK
  std::string error;       // human-readable failure description otherwise
  int attempts = 0;
  std::int64_t latency_ms = 0;
};

// Anything that can answer one judge prompt. Implementations must be safe to
// call from several threads at once.
class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual CallResult complete(const JudgeCase& judge_case, const std::string& prompt) = 0;
  virtual std::size_t calls() const = 0;
};

struct EndpointConfig {
  std::string url;        // e.g. http://localhost:8089/v1/chat/completions
  std::string model;      // model name passed through verbatim
  std::string api_token;  // sent as a bearer token when non-empty
  int timeout_ms = 30000;
  int max_attempts = 3;
  int retry_base_ms = 500;  // backoff doubles per attempt: base, 2x, 4x...

  void validate() const;
};

// JSON file: {"url": "...", "model": "...", "api_token": "...",
//             "timeout_ms": 30000, "max_attempts": 3, "retry_base_ms": 500}
// Environment overrides (applied after the file, and usable without one):
// SCIRET_JUDGE_URL, SCIRET_JUDGE_MODEL, SCIRET_JUDGE_TOKEN.
EndpointConfig load_endpoint_config(const std::string& path);
EndpointConfig endpoint_config_from_env();

// Chat-completion client. Sends
//   {"model": ..., "messages": [{"role": "user", "content": prompt}],
//    "temperature": 0}
// and reads choices[0].message.content back. Retries transport failures,
// 429 and 5xx with exponential backoff; a length rejection (400/413/422
// mentioning context) comes back as CONTEXT_FAIL immediately. A 200 whose
// envelope cannot be read yields OK with empty content, which downstream
// parsing turns into a baseline fallback.
class HttpJudgeBackend : public JudgeBackend {
 public:
  explicit HttpJudgeBackend(EndpointConfig config);
  CallResult complete(const JudgeCase& judge_case, const std::string& prompt) override;
  std::size_t calls() const override { return calls_.load(); }

 private:
  EndpointConfig config_;
  std::string base_url_;
  std::string path_;
  std::atomic<std::size_t> calls_{0};
};

// Deterministic in-process stand-in for tests and offline runs. Responses
// are well-formed for the given formulation; attempts and latency are pinned
// to 1 and 0 so transcripts stay byte-identical.
class StubJudgeBackend : public JudgeBackend {
 public:
  enum class Mode {
    BASELINE,       // always picks candidates[0]
    RETRIEVER_TOP,  // picks the candidate with retrieval rank 1
    FIXED_BODY,     // returns a caller-provided body verbatim
    FAIL_TRANSPORT, // always FAILED, as if retries were exhausted
  };

  StubJudgeBackend(Mode mode, Formulation formulation, std::string fixed_body = {});
  CallResult complete(const JudgeCase& judge_case, const std::string& prompt) override;
  std::size_t calls() const override { return calls_.load(); }

 private:
  Mode mode_;
  Formulation formulation_;
  std::string fixed_body_;
  std::atomic<std::size_t> calls_{0};
};

std::unique_ptr<StubJudgeBackend> make_stub(std::string_view mode_name,
                                            Formulation formulation);

}  // namespace sciret
