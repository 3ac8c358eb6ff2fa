#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccr/graph.hpp"
#include "ccr/scm.hpp"

namespace ccr {

enum class BccType { Cycle, Wheel };
enum class Theme { CandyParty, FlowerGarden };

const char* to_string(BccType t) noexcept;
const char* to_string(Theme t) noexcept;
BccType parse_bcc_type(const std::string& s);
Theme parse_theme(const std::string& s);

struct GenConfig {
    std::size_t n_bccs = 3;
    std::size_t nodes_per_bcc = 4;
    BccType bcc_type = BccType::Cycle;
    Theme theme = Theme::CandyParty;
    std::uint64_t seed = 0;

    void validate() const; // ConfigError
    nlohmann::json to_json() const;
    static GenConfig from_json(const nlohmann::json& j);
};

// Components are chained through shared cutpoints. A cycle block of k nodes
// is two directed arcs from its entry to its exit; a wheel block puts a hub
// inside a rim of k-1 nodes. Node ids are X, A, B, ... and the leaf is Y.
// Seed only affects arc orientation choices.
Dag gen_dag(const GenConfig& config);

struct TaskSpec {
    std::string task_id;
    Theme theme = Theme::CandyParty;
    BoolScm scm;
    std::vector<std::string> names;    // per node
    std::vector<std::string> pronouns; // "she" / "he"
    std::vector<int> thresholds;       // candy threshold, or favourite colour index
    Cct cct;
    QuantityPlan plan;

    const std::string& name_of(const std::string& node) const { return names.at(scm.dag().index(node)); }

    nlohmann::json to_json() const;
    static TaskSpec from_json(const nlohmann::json& j);
};

// Random names, thresholds T in 1..9 (noise_p = 0.1 T) and OR/AND mechanisms.
TaskSpec gen_task(const Dag& dag, Theme theme, std::uint64_t seed);

// Hand-built graphs used throughout the tests.
Dag candy_party_dag();  // X,A,B,C,D,E,F,Y with cutpoints C,D
Dag cactus_dag();       // A..M with cutpoints D,G,J

// Named fixtures:
//   candyparty-fig4  all OR, every threshold 7 (noise_p 0.7)
//   taxonomy         same graph, root leak 0.5, other leaks 0.02
std::vector<std::string> fixture_names();
TaskSpec fixture_task(const std::string& name);

// One exogenous draw and its surface (candy counts or flower colours).
struct SampleDraw {
    std::size_t sample_id = 0;
    Exogenous u;
    std::vector<int> surface;
};

SampleDraw draw_sample(const TaskSpec& task, std::uint64_t seed, std::size_t sample_id);

std::string render_context(const TaskSpec& task, const SampleDraw& sample);

struct QueryInstance {
    std::string task_id;
    std::string query_id; // "<task>:<cause>-><effect>:<sample>"
    std::size_t sample_id = 0;
    NodePair pair;
    bool do_value = true;
    bool cause_factual = false;
    Exogenous u;
    std::vector<int> surface;
    std::string factual;
    std::string counterfactual;

    nlohmann::json to_json() const;
    static QueryInstance from_json(const nlohmann::json& j);
};

// Domain error when the pair is not part of the task's quantity plan.
QueryInstance render_queries(const TaskSpec& task, const NodePair& pair, const SampleDraw& sample,
                             bool do_value);

struct Exemplar {
    std::string question;
    std::string answer;
};

// Two worked answers: one factual, one counterfactual.
std::vector<Exemplar> default_cot_exemplars();

// Returns prompt unchanged when exemplars is empty.
std::string wrap_cot(const std::string& prompt, std::span<const Exemplar> exemplars);

struct CorpusOptions {
    std::size_t n_samples = 1000;
    std::uint64_t seed = 0;
    bool cot = false;
    bool render_text = true; // off for in-memory simulations
};

// One query per (plan pair, sample). Each pair gets its own exogenous draws
// and asks the counterfactual opposite to the cause's factual value.
std::vector<QueryInstance> generate_corpus(const TaskSpec& task, const CorpusOptions& options);

std::uint64_t pair_seed(std::uint64_t seed, const NodePair& pair);

} // namespace ccr
