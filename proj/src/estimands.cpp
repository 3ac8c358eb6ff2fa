#include "ccr/estimands.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Dense>

#include "ccr/errors.hpp"

namespace ccr {

const char* to_string(EstimandKind k) noexcept {
    switch (k) {
    case EstimandKind::Pns: return "PNS";
    case EstimandKind::Pn: return "PN";
    case EstimandKind::Ps: return "PS";
    case EstimandKind::Ate: return "ATE";
    }
    return "?";
}

EstimandKind parse_estimand_kind(const std::string& s) {
    if (s == "PNS") return EstimandKind::Pns;
    if (s == "PN") return EstimandKind::Pn;
    if (s == "PS") return EstimandKind::Ps;
    if (s == "ATE") return EstimandKind::Ate;
    throw StructuralError("unknown estimand kind '" + s + "'");
}

nlohmann::json PairEstimand::to_json() const {
    nlohmann::json j{{"cause", cause},
                     {"effect", effect},
                     {"kind", to_string(kind)},
                     {"value", value},
                     {"provenance", provenance.exact ? "exact" : "sampled"}};
    if (!provenance.exact) {
        j["n"] = provenance.n;
        j["seed"] = provenance.seed;
    }
    return j;
}

PairEstimand PairEstimand::from_json(const nlohmann::json& j) {
    PairEstimand e;
    e.cause = j.at("cause").get<std::string>();
    e.effect = j.at("effect").get<std::string>();
    e.kind = parse_estimand_kind(j.at("kind").get<std::string>());
    e.value = j.at("value").get<double>();
    e.provenance.exact = j.at("provenance").get<std::string>() == "exact";
    e.provenance.n = j.value("n", std::size_t{0});
    e.provenance.seed = j.value("seed", std::uint64_t{0});
    return e;
}

// ── point identification ──────────────────────────────────────────────────

namespace {

void require_probability(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0))
        throw DomainError(std::string(name) + " must be a probability, got " + std::to_string(p));
}

Bounded bound(double raw) {
    Bounded b;
    b.raw = raw;
    b.value = std::clamp(raw, 0.0, 1.0);
    b.clamped = b.value != raw;
    return b;
}

} // namespace

Bounded pns_point(double p_y_do_x, double p_y_do_xprime) {
    require_probability(p_y_do_x, "P(y|do(x))");
    require_probability(p_y_do_xprime, "P(y|do(x'))");
    return bound(p_y_do_x - p_y_do_xprime);
}

double ate_binary(double p_y_do_x, double p_y_do_xprime) {
    require_probability(p_y_do_x, "P(y|do(x))");
    require_probability(p_y_do_xprime, "P(y|do(x'))");
    return p_y_do_x - p_y_do_xprime;
}

Bounded pn_point(double p_y, double p_y_do_xprime, double p_xy) {
    require_probability(p_y, "P(y)");
    require_probability(p_y_do_xprime, "P(y|do(x'))");
    require_probability(p_xy, "P(x,y)");
    if (p_xy == 0.0) throw UndefinedEstimandError("PN is undefined when P(x,y) = 0");
    return bound((p_y - p_y_do_xprime) / p_xy);
}

Bounded ps_point(double p_y_do_x, double p_y, double p_xprime_yprime) {
    require_probability(p_y_do_x, "P(y|do(x))");
    require_probability(p_y, "P(y)");
    require_probability(p_xprime_yprime, "P(x',y')");
    if (p_xprime_yprime == 0.0) throw UndefinedEstimandError("PS is undefined when P(x',y') = 0");
    return bound((p_y_do_x - p_y) / p_xprime_yprime);
}

// ── composition ───────────────────────────────────────────────────────────

double compose_product(std::span<const double> locals) {
    if (locals.empty()) throw DomainError("composition needs at least one local value");
    double prod = 1.0;
    for (double v : locals) {
        require_probability(v, "local PNS");
        prod *= v;
    }
    return prod;
}

Bounded deduce_local(double global_pns, std::span<const double> other_locals) {
    double denom = 1.0;
    for (double v : other_locals) denom *= v;
    if (denom == 0.0) throw UndefinedEstimandError("cannot deduce a local factor: known factors multiply to 0");
    Bounded b;
    b.raw = b.value = global_pns / denom;
    b.clamped = b.raw < 0.0 || b.raw > 1.0;
    return b;
}

namespace {

double reciprocal(double v, const char* name) {
    if (!(v > 0.0 && v <= 1.0))
        throw UndefinedEstimandError(std::string(name) + " must lie in (0,1]");
    return 1.0 / v;
}

} // namespace

double compose_pn_chain(double pn_xy, double ps_xy, double pn_yz) {
    const double a = reciprocal(pn_xy, "PN_XY");
    const double b = reciprocal(ps_xy, "PS_XY");
    const double c = reciprocal(pn_yz, "PN_YZ");
    return 1.0 / (a * c + (b - 1.0) * (c - 1.0));
}

double compose_ps_chain(double ps_xy, double pn_xy, double ps_yz) {
    const double a = reciprocal(ps_xy, "PS_XY");
    const double b = reciprocal(pn_xy, "PN_XY");
    const double c = reciprocal(ps_yz, "PS_YZ");
    return 1.0 / (a * c + (b - 1.0) * (c - 1.0));
}

// ── exact values ──────────────────────────────────────────────────────────

CauseTable exact_cause_table(const BoolScm& scm, const std::string& cause) {
    CauseTable t;
    t.cause = cause;
    t.p_do_x = enumerate_exact(scm, Intervention{}.set(cause, true)).marginals;
    t.p_do_xprime = enumerate_exact(scm, Intervention{}.set(cause, false)).marginals;
    return t;
}

nlohmann::json PairTruth::to_json() const {
    return {{"cause", pair.cause}, {"effect", pair.effect}, {"p_y_do_x", p_y_do_x},
            {"p_y_do_xprime", p_y_do_xprime}, {"pns", pns}, {"ate", ate}};
}

PairTruth PairTruth::from_json(const nlohmann::json& j) {
    PairTruth t;
    t.pair = {j.at("cause").get<std::string>(), j.at("effect").get<std::string>()};
    t.p_y_do_x = j.at("p_y_do_x").get<double>();
    t.p_y_do_xprime = j.at("p_y_do_xprime").get<double>();
    t.pns = j.at("pns").get<double>();
    t.ate = j.at("ate").get<double>();
    return t;
}

std::vector<PairTruth> exact_truths(const BoolScm& scm, const std::vector<NodePair>& pairs) {
    std::map<std::string, CauseTable> tables;
    std::vector<PairTruth> out;
    out.reserve(pairs.size());
    for (const auto& pair : pairs) {
        auto it = tables.find(pair.cause);
        if (it == tables.end()) it = tables.emplace(pair.cause, exact_cause_table(scm, pair.cause)).first;
        const auto p = it->second.at(scm.dag().index(pair.effect));
        PairTruth t;
        t.pair = pair;
        t.p_y_do_x = p.p_y_do_x;
        t.p_y_do_xprime = p.p_y_do_xprime;
        t.pns = pns_point(p.p_y_do_x, p.p_y_do_xprime).raw;
        t.ate = ate_binary(p.p_y_do_x, p.p_y_do_xprime);
        out.push_back(t);
    }
    return out;
}

Probabilities exact_probabilities(const BoolScm& scm, const NodePair& pair) {
    const auto obs = enumerate_exact(scm);
    const auto table = exact_cause_table(scm, pair.cause);
    const auto p = table.at(scm.dag().index(pair.effect));
    const double p_y = obs.probability(pair.effect);
    Probabilities out;
    out.pns = pns_point(p.p_y_do_x, p.p_y_do_xprime).value;
    out.pn = pn_point(p_y, p.p_y_do_xprime, obs.joint({{pair.cause, true}, {pair.effect, true}})).value;
    out.ps = ps_point(p.p_y_do_x, p_y, obs.joint({{pair.cause, false}, {pair.effect, false}})).value;
    return out;
}

CauseTable sampled_cause_table(const BoolScm& scm, const std::string& cause, std::size_t n,
                               std::uint64_t seed) {
    if (n == 0) throw DomainError("sample count must be positive");
    const std::size_t m = scm.dag().size();
    const std::uint64_t bit = std::uint64_t{1} << scm.dag().index(cause);
    std::vector<std::size_t> c1(m, 0), c0(m, 0);
    for (std::size_t s = 0; s < n; ++s) {
        const Exogenous u = draw_exogenous(scm, seed, s);
        const std::uint64_t s1 = scm.evaluate(u, bit, bit);
        const std::uint64_t s0 = scm.evaluate(u, bit, 0);
        for (std::size_t i = 0; i < m; ++i) {
            c1[i] += (s1 >> i) & 1U;
            c0[i] += (s0 >> i) & 1U;
        }
    }
    CauseTable t;
    t.cause = cause;
    t.p_do_x.resize(m);
    t.p_do_xprime.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        t.p_do_x[i] = static_cast<double>(c1[i]) / static_cast<double>(n);
        t.p_do_xprime[i] = static_cast<double>(c0[i]) / static_cast<double>(n);
    }
    return t;
}

// ── linear models ─────────────────────────────────────────────────────────

double linear_ate_paths(const LinearScm& scm, const std::string& cause, const std::string& effect) {
    const Dag& dag = scm.dag;
    const NodeIndex c = dag.index(cause);
    const NodeIndex e = dag.index(effect);
    if (c == e) throw DomainError("cause and effect must differ");
    // total[v] = sum over paths c ~> v of coefficient products
    std::vector<double> total(dag.size(), 0.0);
    total[c] = 1.0;
    for (NodeIndex v : dag.topological_order()) {
        if (v == c || dag.topo_rank(v) < dag.topo_rank(c)) continue;
        for (NodeIndex p : dag.parents(v)) total[v] += scm.coefficient(p, v) * total[p];
    }
    return total[e];
}

double linear_ate_regress(const SampleBatch& samples, const std::string& cause,
                          const std::string& effect, const std::vector<std::string>& adjustment) {
    if (samples.n < 100) throw DomainError("regression needs at least 100 samples");
    const std::size_t k = 2 + adjustment.size();
    Eigen::MatrixXd design(samples.n, k);
    Eigen::VectorXd y(samples.n);
    const auto& xc = samples.column(cause);
    const auto& yc = samples.column(effect);
    std::vector<const std::vector<double>*> adj;
    for (const auto& a : adjustment) adj.push_back(&samples.column(a));
    for (std::size_t s = 0; s < samples.n; ++s) {
        design(s, 0) = 1.0;
        design(s, 1) = xc[s];
        for (std::size_t j = 0; j < adj.size(); ++j) design(s, 2 + j) = (*adj[j])[s];
        y(s) = yc[s];
    }
    const Eigen::MatrixXd gram = design.transpose() * design;
    const Eigen::VectorXd rhs = design.transpose() * y;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    lu.setThreshold(1e-10);
    if (lu.rank() < static_cast<Eigen::Index>(k))
        throw NumericalError("singular design matrix in regression of '" + effect + "' on '" + cause + "'");
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success) throw NumericalError("normal equations could not be solved");
    const Eigen::VectorXd beta = ldlt.solve(rhs);
    return beta(1);
}

} // namespace ccr
