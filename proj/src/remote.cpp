#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <thread>

#include "ccr/errors.hpp"
#include "ccr/reasoner.hpp"

namespace ccr {

void RemoteConfig::validate() const {
    if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0)
        throw ConfigError("base_url must start with http:// or https://");
    if (model.empty()) throw ConfigError("model must be set");
    if (max_tokens <= 0) throw ConfigError("max_tokens must be positive");
    if (!(timeout_s > 0)) throw ConfigError("timeout_s must be positive");
    if (max_retries < 0) throw ConfigError("max_retries must be nonnegative");
    if (replicates == 0) throw ConfigError("replicates must be positive");
}

nlohmann::json RemoteConfig::to_json() const {
    return {{"base_url", base_url},       {"model", model},           {"temperature", temperature},
            {"max_tokens", max_tokens},   {"api_key_env", api_key_env}, {"timeout_s", timeout_s},
            {"max_retries", max_retries}, {"retry_backoff_s", retry_backoff_s}, {"replicates", replicates},
            {"extraction_fallback", extraction_fallback}};
}

RemoteConfig RemoteConfig::from_json(const nlohmann::json& j) {
    RemoteConfig c;
    try {
        c.base_url = j.value("base_url", c.base_url);
        c.model = j.value("model", c.model);
        c.temperature = j.value("temperature", c.temperature);
        c.max_tokens = j.value("max_tokens", c.max_tokens);
        c.api_key_env = j.value("api_key_env", c.api_key_env);
        c.timeout_s = j.value("timeout_s", c.timeout_s);
        c.max_retries = j.value("max_retries", c.max_retries);
        c.retry_backoff_s = j.value("retry_backoff_s", c.retry_backoff_s);
        c.replicates = j.value("replicates", c.replicates);
        c.extraction_fallback = j.value("extraction_fallback", c.extraction_fallback);
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("bad endpoint config: ") + ex.what());
    }
    c.validate();
    return c;
}

RemoteReasoner::RemoteReasoner(RemoteConfig config) : config_(std::move(config)) { config_.validate(); }

namespace {

// "https://host:port/v1" -> ("https://host:port", "/v1")
std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://") + 3;
    const auto slash = url.find('/', scheme_end);
    if (slash == std::string::npos) return {url, ""};
    std::string path = url.substr(slash);
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {url.substr(0, slash), path};
}

bool retryable(int status) { return status == 408 || status == 429 || status >= 500; }

} // namespace

std::string RemoteReasoner::complete(const std::string& prompt, const std::string& query_id,
                                     std::optional<double> temperature) const {
    const auto [origin, prefix] = split_url(config_.base_url);
    httplib::Client client(origin);
    const auto secs = std::chrono::duration<double>(config_.timeout_s);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    const nlohmann::json body{{"model", config_.model},
                              {"messages", {{{"role", "user"}, {"content", prompt}}}},
                              {"temperature", temperature.value_or(config_.temperature)},
                              {"max_tokens", config_.max_tokens}};
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::duration<double>(config_.retry_backoff_s * (1 << (attempt - 1))));
        auto res = client.Post(prefix + "/chat/completions", headers, payload, "application/json");
        if (!res) {
            last_error = "connection failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            if (retryable(res->status)) continue;
            break;
        }
        try {
            const auto j = nlohmann::json::parse(res->body);
            const auto& content = j.at("choices").at(0).at("message").at("content");
            return content.is_string() ? content.get<std::string>() : std::string();
        } catch (const nlohmann::json::exception& ex) {
            last_error = std::string("malformed completion: ") + ex.what();
            break;
        }
    }
    throw TransportError(query_id, last_error);
}

RawResponse RemoteReasoner::answer(const QueryInstance& q, Which which, std::size_t replicate,
                                   std::uint64_t) const {
    RawResponse r;
    r.query_id = q.query_id;
    r.pair = q.pair;
    r.sample_id = q.sample_id;
    r.which = which;
    r.cause_value = which == Which::Factual ? q.cause_factual : q.do_value;
    r.replicate = replicate;
    const std::string& prompt = which == Which::Factual ? q.factual : q.counterfactual;
    const auto t0 = std::chrono::steady_clock::now();
    r.text = complete(prompt, q.query_id);
    r.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    ExtractionFallback fallback;
    if (config_.extraction_fallback)
        fallback = [this, &q](const std::string& p) { return complete(p, q.query_id, 0.0); };
    r.boolean = extract_boolean(prompt, r.text, fallback);
    return r;
}

} // namespace ccr
