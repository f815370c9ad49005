#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>

namespace tagforge {

struct ChatRequest {
  std::string model;
  std::string user_message;  // always a single user turn, never concatenated context
};

struct ChatOutcome {
  bool ok = false;
  std::string content;  // assistant message text when ok
  std::string error;
  bool retryable = false;
  bool auth_failure = false;
};

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual ChatOutcome complete(const ChatRequest& request) = 0;
};

// POST {base_url}/v1/chat/completions with bearer auth. 401/403 is an auth
// failure (never retried); timeouts, 408/429 and 5xx are retryable. Requests
// carry no sampling parameters: the endpoint's defaults apply.
class HttpChatTransport : public ChatTransport {
 public:
  HttpChatTransport(std::string base_url, std::string api_key);
  ChatOutcome complete(const ChatRequest& request) override;

 private:
  std::string base_url_;
  std::string api_key_;
};

// Sliding-window rate limiter: at most `requests_per_minute` acquisitions in
// any 60-second window. Clock and sleeper are injectable so tests can drive
// simulated time.
class RateLimiter {
 public:
  using Clock = std::function<double()>;
  using Sleeper = std::function<void(double)>;

  explicit RateLimiter(int requests_per_minute, Clock now = {}, Sleeper sleep = {});

  // Blocks until a slot frees up, then records the request timestamp.
  void acquire();

 private:
  int rpm_;
  Clock now_;
  Sleeper sleep_;
  std::mutex mu_;
  std::deque<double> sent_;
};

struct RetryPolicy {
  int max_retries = 3;            // retries after the first attempt
  double initial_backoff_s = 1.0; // doubles each retry
  double max_backoff_s = 60.0;    // cap
};

// Transport + retry + rate limiting. A `validate` callback may throw
// ParseFailure to mark a syntactically delivered but unusable response;
// that counts as retryable like a transient transport failure.
class ChatClient {
 public:
  ChatClient(std::shared_ptr<ChatTransport> transport, RetryPolicy policy,
             std::shared_ptr<RateLimiter> limiter = nullptr,
             RateLimiter::Sleeper backoff_sleep = {});

  // Returns validated assistant text. Throws AuthError immediately on auth
  // failure and Error once retries are exhausted. Thread-safe.
  std::string complete(const ChatRequest& request,
                       const std::function<void(const std::string&)>& validate = {});

 private:
  std::shared_ptr<ChatTransport> transport_;
  RetryPolicy policy_;
  std::shared_ptr<RateLimiter> limiter_;
  RateLimiter::Sleeper backoff_sleep_;
};

}  // namespace tagforge
