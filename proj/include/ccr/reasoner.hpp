#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccr/graph.hpp"
#include "ccr/scm.hpp"
#include "ccr/task_gen.hpp"

namespace ccr {

enum class Which { Factual, Counterfactual };
enum class Verdict { True, False, Unknown };

const char* to_string(Which w) noexcept;
const char* to_string(Verdict v) noexcept;
Which parse_which(const std::string& s);
Verdict parse_verdict(const std::string& s);

struct RawResponse {
    std::string query_id;
    NodePair pair;
    std::size_t sample_id = 0;
    Which which = Which::Factual;
    bool cause_value = false; // value the cause takes in the world the question is about
    std::size_t replicate = 0;
    std::string text;
    Verdict boolean = Verdict::Unknown;
    double latency_ms = 0.0;

    nlohmann::json to_json() const;
    static RawResponse from_json(const nlohmann::json& j);
};

// ── extraction ────────────────────────────────────────────────────────────

// The fallback receives a full extraction prompt and returns the model reply.
using ExtractionFallback = std::function<std::string(const std::string& prompt)>;

std::string extraction_prompt(const std::string& question, const std::string& answer);

Verdict extract_boolean(const std::string& question, const std::string& answer,
                        const ExtractionFallback& fallback = nullptr);

// ── reasoners ─────────────────────────────────────────────────────────────

class Reasoner {
public:
    virtual ~Reasoner() = default;
    virtual std::string kind() const = 0;
    virtual std::size_t replicates() const = 0;
    virtual RawResponse answer(const QueryInstance& query, Which which, std::size_t replicate,
                               std::uint64_t seed) const = 0;
};

// Computes the true value from the query's exogenous draw.
class OracleReasoner : public Reasoner {
public:
    OracleReasoner(BoolScm scm, std::size_t replicates = 5);

    std::string kind() const override { return "oracle"; }
    std::size_t replicates() const override { return replicates_; }
    RawResponse answer(const QueryInstance& query, Which which, std::size_t replicate,
                       std::uint64_t seed) const override;

    bool true_answer(const QueryInstance& query, Which which) const;

private:
    BoolScm scm_;
    std::size_t replicates_;
};

// Answers from a structurally identical SCM with different leak parameters,
// using its own exogenous draws. Estimates are biased but compose.
class WrongModelReasoner : public Reasoner {
public:
    WrongModelReasoner(const BoolScm& task_scm, BoolScm alternate, std::size_t replicates = 5);

    std::string kind() const override { return "wrong-model"; }
    std::size_t replicates() const override { return replicates_; }
    RawResponse answer(const QueryInstance& query, Which which, std::size_t replicate,
                       std::uint64_t seed) const override;

    const BoolScm& alternate() const noexcept { return alt_; }

private:
    BoolScm alt_;
    std::size_t replicates_;
};

// Per-pair flip probabilities applied to oracle answers.
struct FlipRates {
    double true_to_false = 0.0;
    double false_to_true = 0.0;
};

class FlipPolicy {
public:
    FlipPolicy() = default;
    explicit FlipPolicy(FlipRates all) : default_(all) {}

    FlipPolicy& set(const NodePair& pair, FlipRates rates);
    FlipRates rates(const NodePair& pair) const;

    // Symmetric flip of rate(m) on each plan pair with m mediators.
    static FlipPolicy by_mediators(const Dag& dag, const std::vector<NodePair>& pairs,
                                   const std::function<double(std::size_t)>& rate);

    nlohmann::json to_json() const;

private:
    FlipRates default_;
    std::map<NodePair, FlipRates> per_pair_;
};

class NoisyReasoner : public Reasoner {
public:
    NoisyReasoner(BoolScm scm, FlipPolicy policy, std::size_t replicates = 5);

    std::string kind() const override { return "noisy"; }
    std::size_t replicates() const override { return oracle_.replicates(); }
    RawResponse answer(const QueryInstance& query, Which which, std::size_t replicate,
                       std::uint64_t seed) const override;

private:
    OracleReasoner oracle_;
    FlipPolicy policy_;
};

struct RemoteConfig {
    std::string base_url;  // e.g. https://api.openai.com/v1
    std::string model;
    double temperature = 1.0;
    int max_tokens = 512;
    std::string api_key_env = "OPENAI_API_KEY";
    double timeout_s = 60.0;
    int max_retries = 3;
    double retry_backoff_s = 1.0;
    std::size_t replicates = 5;
    bool extraction_fallback = false; // ask the model when the rules are inconclusive

    void validate() const; // ConfigError
    nlohmann::json to_json() const;
    static RemoteConfig from_json(const nlohmann::json& j);
};

// Chat-completion client. Sends the prompt as a single user message.
class RemoteReasoner : public Reasoner {
public:
    explicit RemoteReasoner(RemoteConfig config);

    std::string kind() const override { return "remote"; }
    std::size_t replicates() const override { return config_.replicates; }
    RawResponse answer(const QueryInstance& query, Which which, std::size_t replicate,
                       std::uint64_t seed) const override;

    // One completion. Throws TransportError after the retry budget.
    std::string complete(const std::string& prompt, const std::string& query_id,
                         std::optional<double> temperature = std::nullopt) const;

private:
    RemoteConfig config_;
};

// ── batch execution ───────────────────────────────────────────────────────

struct BatchOptions {
    std::size_t concurrency = 4;
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> store; // JSON-lines, appended as responses arrive
    bool resume = false;
};

struct BatchResult {
    std::vector<RawResponse> responses; // sorted by corpus order, which, replicate
    std::size_t reused = 0;             // loaded from an existing store
    std::size_t unknown = 0;
};

// Sorted-order key used by run_batch and the store.
std::string response_key(const std::string& query_id, Which which, std::size_t replicate);

// On transport failure the store keeps every completed response, a
// <store>.failures.json manifest lists the failed query ids, and the
// TransportError is rethrown.
BatchResult run_batch(const Reasoner& reasoner, const std::vector<QueryInstance>& queries,
                      const BatchOptions& options);

std::vector<RawResponse> load_responses(const std::filesystem::path& path);
void save_responses(const std::filesystem::path& path, const std::vector<RawResponse>& responses);

} // namespace ccr
