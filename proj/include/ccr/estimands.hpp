#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccr/graph.hpp"
#include "ccr/scm.hpp"

namespace ccr {

enum class EstimandKind { Pns, Pn, Ps, Ate };

const char* to_string(EstimandKind k) noexcept;
EstimandKind parse_estimand_kind(const std::string& s);

struct Provenance {
    bool exact = true;
    std::size_t n = 0;      // sampled only
    std::uint64_t seed = 0; // sampled only
};

struct PairEstimand {
    std::string cause;
    std::string effect;
    EstimandKind kind = EstimandKind::Pns;
    double value = 0.0;
    Provenance provenance;

    nlohmann::json to_json() const;
    static PairEstimand from_json(const nlohmann::json& j);
};

// Point value kept alongside the unclamped arithmetic.
struct Bounded {
    double value = 0.0; // clamped into [0,1]
    double raw = 0.0;
    bool clamped = false;
};

// ── point identification (monotone, exogenous cause) ─────────────────────

Bounded pns_point(double p_y_do_x, double p_y_do_xprime);
double ate_binary(double p_y_do_x, double p_y_do_xprime);
Bounded pn_point(double p_y, double p_y_do_xprime, double p_xy);
Bounded ps_point(double p_y_do_x, double p_y, double p_xprime_yprime);

// ── composition ─────────────────────────────────────────────────────────

double compose_product(std::span<const double> locals);

// Missing factor of a product. clamped flags a result outside [0,1]; value
// is then the raw quotient, not clamped.
Bounded deduce_local(double global_pns, std::span<const double> other_locals);

// PN and PS along X -> Y -> Z. These do not factor as plain products.
double compose_pn_chain(double pn_xy, double ps_xy, double pn_yz);
double compose_ps_chain(double ps_xy, double pn_xy, double ps_yz);

// ── exact values from a Boolean SCM ─────────────────────────────────────

struct InterventionalPair {
    double p_y_do_x = 0.0;      // P(effect | do(cause=1))
    double p_y_do_xprime = 0.0; // P(effect | do(cause=0))
};

// Interventional marginals of every node under do(cause=1) and do(cause=0).
struct CauseTable {
    std::string cause;
    std::vector<double> p_do_x;
    std::vector<double> p_do_xprime;

    InterventionalPair at(NodeIndex effect) const { return {p_do_x.at(effect), p_do_xprime.at(effect)}; }
};

CauseTable exact_cause_table(const BoolScm& scm, const std::string& cause);

struct PairTruth {
    NodePair pair;
    double p_y_do_x = 0.0;
    double p_y_do_xprime = 0.0;
    double pns = 0.0;
    double ate = 0.0;

    nlohmann::json to_json() const;
    static PairTruth from_json(const nlohmann::json& j);
};

// One exact record per pair, in the given order. Two enumerations per cause.
std::vector<PairTruth> exact_truths(const BoolScm& scm, const std::vector<NodePair>& pairs);

struct Probabilities {
    double pn = 0.0;
    double ps = 0.0;
    double pns = 0.0;
};

// PN/PS/PNS of a pair through the identification formulas on enumerated
// observational and interventional distributions.
Probabilities exact_probabilities(const BoolScm& scm, const NodePair& pair);

// Monte Carlo counterpart of exact_cause_table. Both arms reuse the same
// exogenous draws (common random numbers).
CauseTable sampled_cause_table(const BoolScm& scm, const std::string& cause, std::size_t n,
                               std::uint64_t seed);

// ── linear models ───────────────────────────────────────────────────────

// Sum over directed paths of the product of edge coefficients.
double linear_ate_paths(const LinearScm& scm, const std::string& cause, const std::string& effect);

// OLS coefficient of cause in effect ~ 1 + cause + adjustment.
double linear_ate_regress(const SampleBatch& samples, const std::string& cause,
                          const std::string& effect, const std::vector<std::string>& adjustment);

} // namespace ccr
