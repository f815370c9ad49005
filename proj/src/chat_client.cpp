#include "tagforge/chat_client.hpp"

#include <chrono>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "tagforge/error.hpp"

namespace tagforge {

using ordered_json = nlohmann::ordered_json;

HttpChatTransport::HttpChatTransport(std::string base_url, std::string api_key)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)) {}

ChatOutcome HttpChatTransport::complete(const ChatRequest& request) {
  ChatOutcome outcome;
  ordered_json body;
  body["model"] = request.model;
  body["messages"] = ordered_json::array();
  ordered_json msg;
  msg["role"] = "user";
  msg["content"] = request.user_message;
  body["messages"].push_back(std::move(msg));

  httplib::Client client(base_url_);
  client.set_connection_timeout(10);
  client.set_read_timeout(300);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
  if (!res) {
    outcome.error = "transport error: " + httplib::to_string(res.error());
    outcome.retryable = true;
    return outcome;
  }
  if (res->status == 401 || res->status == 403) {
    outcome.error = "endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")";
    outcome.auth_failure = true;
    return outcome;
  }
  if (res->status != 200) {
    outcome.error = "HTTP " + std::to_string(res->status);
    outcome.retryable = res->status == 408 || res->status == 429 || res->status >= 500;
    return outcome;
  }
  ordered_json j = ordered_json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() ||
      j["choices"].empty() || !j["choices"][0].contains("message") ||
      !j["choices"][0]["message"].contains("content") ||
      !j["choices"][0]["message"]["content"].is_string()) {
    outcome.error = "malformed chat completion response";
    outcome.retryable = true;
    return outcome;
  }
  outcome.ok = true;
  outcome.content = j["choices"][0]["message"]["content"].get<std::string>();
  return outcome;
}

RateLimiter::RateLimiter(int requests_per_minute, Clock now, Sleeper sleep)
    : rpm_(requests_per_minute), now_(std::move(now)), sleep_(std::move(sleep)) {
  if (rpm_ < 1) throw ArgumentError("RateLimiter: requests_per_minute must be >= 1");
  if (!now_) {
    now_ = [] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
          .count();
    };
  }
  if (!sleep_) {
    sleep_ = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
  }
}

void RateLimiter::acquire() {
  std::unique_lock<std::mutex> lock(mu_);
  for (;;) {
    const double t = now_();
    while (!sent_.empty() && sent_.front() <= t - 60.0) sent_.pop_front();
    if (sent_.size() < static_cast<std::size_t>(rpm_)) {
      sent_.push_back(t);
      return;
    }
    const double wait = sent_.front() + 60.0 - t;
    lock.unlock();
    sleep_(wait > 0.0 ? wait : 0.0);
    lock.lock();
  }
}

ChatClient::ChatClient(std::shared_ptr<ChatTransport> transport, RetryPolicy policy,
                       std::shared_ptr<RateLimiter> limiter, RateLimiter::Sleeper backoff_sleep)
    : transport_(std::move(transport)),
      policy_(policy),
      limiter_(std::move(limiter)),
      backoff_sleep_(std::move(backoff_sleep)) {
  if (!backoff_sleep_) {
    backoff_sleep_ = [](double s) {
      std::this_thread::sleep_for(std::chrono::duration<double>(s));
    };
  }
}

std::string ChatClient::complete(const ChatRequest& request,
                                 const std::function<void(const std::string&)>& validate) {
  double backoff = policy_.initial_backoff_s;
  std::string last_error;
  for (int attempt = 0; attempt <= policy_.max_retries; ++attempt) {
    if (attempt > 0) {
      backoff_sleep_(backoff);
      backoff = std::min(backoff * 2.0, policy_.max_backoff_s);
    }
    if (limiter_) limiter_->acquire();
    const ChatOutcome outcome = transport_->complete(request);
    if (outcome.auth_failure) throw AuthError(outcome.error);
    if (!outcome.ok) {
      last_error = outcome.error;
      if (!outcome.retryable) throw Error("chat request failed: " + outcome.error);
      continue;
    }
    if (validate) {
      try {
        validate(outcome.content);
      } catch (const ParseFailure& e) {
        last_error = e.what();
        continue;  // unusable content is retryable
      }
    }
    return outcome.content;
  }
  throw Error("chat request failed after " + std::to_string(policy_.max_retries + 1) +
              " attempts: " + last_error);
}

}  // namespace tagforge
