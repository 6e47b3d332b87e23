// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

// Client for OpenAI-compatible /chat/completions and /embeddings endpoints.
//
// Retries cover the transient class only: transport failures, 408, 429 and
// 5xx. 401/403 raise kAuthFailure and any other 4xx raises kRequestRejected,
// both without retrying. Every HTTP attempt counts as one request.

#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dytopo/semantic.hpp"
#include "dytopo/usage.hpp"

namespace dytopo::llm {

inline constexpr const char* kApiKeyEnv = "DYTOPO_API_KEY";

struct HttpResponse {
    int status = 0;
    std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

/// Thrown by transports when no HTTP response was obtained (connect error, timeout).
class TransportFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class HttpTransport {
  public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const std::string& url, const HttpHeaders& headers, const std::string& body,
                              std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib backed transport (https when built with OpenSSL).
std::shared_ptr<HttpTransport> make_http_transport();

struct EndpointConfig {
    std::string base_url;
    std::string api_key;
    std::string model_name;
    double request_timeout_s = 120.0;
    int max_retries = 3;
    int retry_backoff_ms = 500;
    std::size_t max_concurrent = 4;

    /// Throws Error(kInvalidConfig, field).
    void validate() const;
};

/// Reads DYTOPO_API_KEY (or the named variable); empty when unset.
std::string api_key_from_env(const char* variable = kApiKeyEnv);

struct ChatRequest {
    std::string system_prompt;
    std::string user_content;
    double temperature = 0.3;
    int max_tokens = 4000;
    bool structured_output = true;
};

struct ChatResult {
    std::string text;
    UsageCounters usage;
};

/// ceil(chars / 4).
std::uint64_t estimate_tokens(std::size_t characters) noexcept;

class ChatClient {
  public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    ChatClient(EndpointConfig endpoint, std::shared_ptr<HttpTransport> transport, Sleeper sleeper = {});

    ChatResult chat_complete(const ChatRequest& request);

    /// One batched request; vectors come back l2-normalized in input order.
    std::vector<EmbeddingVector> embed_remote(const std::vector<std::string>& texts,
                                              UsageCounters* usage = nullptr);

    [[nodiscard]] const EndpointConfig& endpoint() const noexcept { return endpoint_; }

  private:
    HttpResponse post_with_retry(const std::string& path, const std::string& body, UsageCounters& usage);

    EndpointConfig endpoint_;
    std::shared_ptr<HttpTransport> transport_;
    Sleeper sleeper_;
    std::counting_semaphore<1024> in_flight_;
};

/// Embedder backed by ChatClient::embed_remote.
class RemoteEmbedder final : public semantic::Embedder {
  public:
    RemoteEmbedder(ChatClient& client, std::size_t dimension) : client_(client), dimension_(dimension) {}

    EmbeddingVector embed(std::string_view text) override;
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;
    [[nodiscard]] std::size_t dimension() const override { return dimension_; }
    [[nodiscard]] std::string identity() const override;

  private:
    ChatClient& client_;
    std::size_t dimension_;
};

}  // namespace dytopo::llm
