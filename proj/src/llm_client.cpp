// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "dytopo/llm_client.hpp"

#include <cstdlib>
#include <thread>

#include <json.hpp>

#include "dytopo/error.hpp"

namespace dytopo::llm {

using nlohmann::json;

namespace {

bool is_transient(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

std::string join_url(const std::string& base, const std::string& path) {
    if (!base.empty() && base.back() == '/') return base.substr(0, base.size() - 1) + path;
    return base + path;
}

json parse_body(const std::string& body) {
    try {
        return json::parse(body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kMalformedProviderResponse, std::string("invalid JSON: ") + e.what());
    }
}

// Holds one slot of the per-endpoint concurrency cap.
class SlotGuard {
  public:
    explicit SlotGuard(std::counting_semaphore<1024>& sem) : sem_(sem) { sem_.acquire(); }
    ~SlotGuard() { sem_.release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

  private:
    std::counting_semaphore<1024>& sem_;
};

}  // namespace

std::uint64_t estimate_tokens(std::size_t characters) noexcept { return (characters + 3) / 4; }

std::string api_key_from_env(const char* variable) {
    const char* v = std::getenv(variable);
    return v == nullptr ? std::string{} : std::string{v};
}

void EndpointConfig::validate() const {
    if (base_url.empty()) throw Error(ErrorCode::kInvalidConfig, "base_url");
    if (!(request_timeout_s > 0.0)) throw Error(ErrorCode::kInvalidConfig, "request_timeout");
    if (max_retries < 0) throw Error(ErrorCode::kInvalidConfig, "max_retries");
    if (retry_backoff_ms < 0) throw Error(ErrorCode::kInvalidConfig, "retry_backoff");
    if (max_concurrent < 1 || max_concurrent > 1024) throw Error(ErrorCode::kInvalidConfig, "max_concurrent");
}

ChatClient::ChatClient(EndpointConfig endpoint, std::shared_ptr<HttpTransport> transport, Sleeper sleeper)
    : endpoint_(std::move(endpoint)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      in_flight_(static_cast<std::ptrdiff_t>(endpoint_.max_concurrent)) {
    endpoint_.validate();
    if (!transport_) throw Error(ErrorCode::kInvalidConfig, "transport");
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

HttpResponse ChatClient::post_with_retry(const std::string& path, const std::string& body, UsageCounters& usage) {
    HttpHeaders headers{{"Content-Type", "application/json"}};
    if (!endpoint_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + endpoint_.api_key);
    const auto timeout = std::chrono::milliseconds(static_cast<long long>(endpoint_.request_timeout_s * 1000.0));
    const std::string url = join_url(endpoint_.base_url, path);

    std::string last_error;
    for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
        if (attempt > 0) sleeper_(std::chrono::milliseconds(endpoint_.retry_backoff_ms) * (1LL << (attempt - 1)));
        HttpResponse resp;
        ++usage.request_count;
        try {
            SlotGuard slot(in_flight_);
            resp = transport_->post(url, headers, body, timeout);
        } catch (const TransportFailure& e) {
            last_error = e.what();
            continue;
        }
        if (resp.status >= 200 && resp.status < 300) return resp;
        if (resp.status == 401 || resp.status == 403)
            throw Error(ErrorCode::kAuthFailure, "HTTP " + std::to_string(resp.status));
        if (!is_transient(resp.status))
            throw Error(ErrorCode::kRequestRejected, "HTTP " + std::to_string(resp.status) + ": " + resp.body);
        last_error = "HTTP " + std::to_string(resp.status);
    }
    throw Error(ErrorCode::kTransientExhausted,
                std::to_string(endpoint_.max_retries + 1) + " attempts, last: " + last_error);
}

ChatResult ChatClient::chat_complete(const ChatRequest& request) {
    json body = {
        {"model", endpoint_.model_name},
        {"messages",
         json::array({{{"role", "system"}, {"content", request.system_prompt}},
                      {{"role", "user"}, {"content", request.user_content}}})},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
    };
    if (request.structured_output) body["response_format"] = {{"type", "json_object"}};

    ChatResult result;
    const auto started = std::chrono::steady_clock::now();
    const HttpResponse resp = post_with_retry("/chat/completions", body.dump(), result.usage);
    result.usage.wall_time_ms = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count());

    const json doc = parse_body(resp.body);
    try {
        const json& content = doc.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw Error(ErrorCode::kMalformedProviderResponse, "content is not a string");
        result.text = content.get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kMalformedProviderResponse, std::string("no first choice: ") + e.what());
    }

    const auto usage = doc.find("usage");
    if (usage != doc.end() && usage->is_object() && usage->contains("prompt_tokens") &&
        usage->contains("completion_tokens")) {
        result.usage.prompt_tokens = usage->at("prompt_tokens").get<std::uint64_t>();
        result.usage.completion_tokens = usage->at("completion_tokens").get<std::uint64_t>();
    } else {
        result.usage.prompt_tokens =
            estimate_tokens(request.system_prompt.size() + request.user_content.size());
        result.usage.completion_tokens = estimate_tokens(result.text.size());
        result.usage.estimated = true;
    }
    return result;
}

std::vector<EmbeddingVector> ChatClient::embed_remote(const std::vector<std::string>& texts, UsageCounters* usage) {
    if (texts.empty()) throw Error(ErrorCode::kInvalidValue, "empty embedding batch");
    const json body = {{"model", endpoint_.model_name}, {"input", texts}};
    UsageCounters local;
    const HttpResponse resp = post_with_retry("/embeddings", body.dump(), local);
    if (usage != nullptr) *usage += local;

    const json doc = parse_body(resp.body);
    const auto data = doc.find("data");
    if (data == doc.end() || !data->is_array() || data->size() != texts.size())
        throw Error(ErrorCode::kMalformedProviderResponse, "embedding data missing or wrong length");

    std::vector<std::vector<double>> raw(texts.size());
    std::vector<bool> filled(texts.size(), false);
    for (std::size_t pos = 0; pos < data->size(); ++pos) {
        const json& item = (*data)[pos];
        std::size_t index = pos;
        if (item.contains("index")) index = item.at("index").get<std::size_t>();
        if (index >= texts.size() || filled[index])
            throw Error(ErrorCode::kMalformedProviderResponse, "bad embedding index");
        if (!item.contains("embedding") || !item.at("embedding").is_array())
            throw Error(ErrorCode::kMalformedProviderResponse, "embedding field missing");
        raw[index] = item.at("embedding").get<std::vector<double>>();
        filled[index] = true;
    }
    for (const auto& v : raw) {
        if (v.size() != raw.front().size())
            throw Error(ErrorCode::kDimensionInconsistent,
                        std::to_string(raw.front().size()) + " vs " + std::to_string(v.size()));
    }
    std::vector<EmbeddingVector> out;
    out.reserve(raw.size());
    for (auto& v : raw) out.push_back(EmbeddingVector::normalize(std::move(v)));
    return out;
}

EmbeddingVector RemoteEmbedder::embed(std::string_view text) {
    return embed_batch({std::string(text)}).front();
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(const std::vector<std::string>& texts) {
    auto out = client_.embed_remote(texts);
    for (const auto& v : out) {
        if (v.dimension() != dimension_)
            throw Error(ErrorCode::kDimensionMismatch,
                        "expected " + std::to_string(dimension_) + ", got " + std::to_string(v.dimension()));
    }
    return out;
}

std::string RemoteEmbedder::identity() const {
    return "remote/" + client_.endpoint().model_name + "/d=" + std::to_string(dimension_);
}

}  // namespace dytopo::llm
