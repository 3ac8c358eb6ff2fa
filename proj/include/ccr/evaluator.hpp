#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccr/estimands.hpp"
#include "ccr/graph.hpp"
#include "ccr/reasoner.hpp"

namespace ccr {

struct EvalConfig {
    std::size_t n_exogenous_sets = 1000;
    std::size_t replicates = 5;
    std::size_t n_subsamples = 1000;
    double rae_threshold = 0.1;         // delta
    double validity_fraction = 0.90;
    double near_valid_fraction = 0.75;
    double max_unknown_rate = 0.05;
    double min_truth = 0.01;            // smaller truths are left out of classification
    std::uint64_t seed = 0;

    void validate() const; // ConfigError
    nlohmann::json to_json() const;
    static EvalConfig from_json(const nlohmann::json& j);
};

// ── estimates ─────────────────────────────────────────────────────────────

struct EstimateDistribution {
    NodePair pair;
    std::vector<double> pns;   // raw differences, one per round
    std::vector<double> p_do_x;
    std::vector<double> p_do_xprime;
    double unknown_rate = 0.0;
    std::size_t responses = 0;
};

// One round draws one replicate per (sample, question kind) and contrasts
// the answers given under cause = 1 with those under cause = 0.
EstimateDistribution subsample_pns(const std::vector<RawResponse>& responses, const NodePair& pair,
                                   const EvalConfig& config);

// Relative absolute error |reference - estimate| / reference.
double rae(double estimate, double reference);

// Internal form: both values are estimates, reference is the second one.
// Both zero gives 0; a zero reference otherwise gives +inf.
double rae_internal(double estimate, double reference_estimate);

// ── Algorithm 1 ───────────────────────────────────────────────────────────

struct QuantityRecord {
    NodePair pair;
    std::optional<double> truth;
    std::vector<double> estimates;
    std::vector<double> eta; // external RAE per round; empty without truth or below min_truth
    bool excluded = false;   // truth below min_truth
    std::optional<double> validity; // fraction of eta within delta
    PathStats stats{0, 0};
};

struct CompositionRecord {
    std::vector<NodePair> path;
    std::string id;
    std::vector<double> estimates; // product of the round's local estimates
    std::vector<double> epsilon;   // external, against the global truth
    std::vector<double> gamma;     // internal, against the round's direct global estimate
    std::optional<double> validity;
    double consistency = 0.0;
};

struct ErrorRecords {
    std::vector<QuantityRecord> quantities;     // plan order: global first
    std::vector<CompositionRecord> compositions; // path order
    std::size_t rounds = 0;
};

// truths may be empty, in which case only internal consistency is computed.
ErrorRecords run_algorithm1(const Cct& cct, const QuantityPlan& plan,
                            const std::map<NodePair, std::vector<double>>& estimates,
                            const std::map<NodePair, double>& truths, const Dag& dag,
                            const EvalConfig& config);

// ── taxonomy ──────────────────────────────────────────────────────────────

// Unvalidated: no ground truth was supplied, only consistency is known.
enum class Label { VC, NearVC, VI, NearVI, IC, II, Unvalidated };
const char* to_string(Label l) noexcept;
Label parse_label(const std::string& s);

struct TaxonomyLabel {
    Label label = Label::II;
    int validity_level = 0;    // 2 full, 1 near, 0 neither; -1 when no truths
    int consistency_level = 0;
    double min_validity = 0.0;
    double min_consistency = 0.0;

    nlohmann::json to_json() const;
    static TaxonomyLabel from_json(const nlohmann::json& j);
};

TaxonomyLabel classify(const ErrorRecords& records, const EvalConfig& config);

// ── mediation ─────────────────────────────────────────────────────────────

struct MediationRow {
    std::string axis; // "distance" or "mediators"
    std::size_t bucket = 0;
    double mean_rae = 0.0;
    double std_rae = 0.0;
    std::size_t pairs = 0;
    std::size_t estimates = 0;
};

std::vector<MediationRow> mediation_curve(const ErrorRecords& records);

// ── report ────────────────────────────────────────────────────────────────

struct EvalReport {
    std::string task_id;
    std::string reasoner;
    EvalConfig config;
    Cct cct;
    ErrorRecords records;
    TaxonomyLabel label;
    std::vector<MediationRow> mediation;
    double unknown_rate = 0.0;

    // Includes the raw per-round series so plots can be rebuilt from the file.
    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
    // Long-format raw estimate distributions: quantity,kind,round,estimate.
    std::string estimates_csv() const;
};

// Full pass from a response store: subsample every plan pair, then score.
EvalReport evaluate(const std::string& task_id, const std::string& reasoner, const Cct& cct,
                    const QuantityPlan& plan, const Dag& dag, const std::vector<RawResponse>& responses,
                    const std::map<NodePair, double>& truths, const EvalConfig& config);

struct Summary {
    double mean = 0.0, std = 0.0, median = 0.0, min = 0.0, max = 0.0;
};
Summary summarize(const std::vector<double>& values);

} // namespace ccr
