#include "ccr/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "ccr/errors.hpp"
#include "ccr/estimands.hpp"
#include "ccr/rng.hpp"

namespace ccr {

LinearScm cut_vertex_scm(bool edge_x5x6, double coefficient) {
    std::vector<std::pair<std::string, std::string>> edges{
        {"X1", "X2"}, {"X2", "X3"}, {"X1", "X5"}, {"X5", "X3"},
        {"X3", "X4"}, {"X4", "Y"},  {"X3", "X6"}, {"X6", "Y"}};
    if (edge_x5x6) edges.emplace_back("X5", "X6");
    Dag dag({"X1", "X2", "X5", "X3", "X4", "X6", "Y"}, edges, "X1", "Y");
    return LinearScm(std::move(dag), std::vector<double>(edges.size(), coefficient));
}

LinearScm linear_version(const Dag& dag, double coefficient) {
    return LinearScm(dag, std::vector<double>(dag.edges().size(), coefficient));
}

std::string to_csv(const std::vector<SimRow>& rows) {
    std::ostringstream os;
    os.precision(12);
    os << "n,seed,quantity,value,truth\n";
    for (const auto& r : rows) os << r.n << ',' << r.seed << ',' << r.quantity << ',' << r.value << ',' << r.truth << '\n';
    return os.str();
}

std::vector<SimRow> simulate_linear_ate(bool edge_x5x6, const std::vector<std::size_t>& sizes,
                                        std::uint64_t seed) {
    const LinearScm scm = cut_vertex_scm(edge_x5x6);
    const double t13 = linear_ate_paths(scm, "X1", "X3");
    const double t3y = linear_ate_paths(scm, "X3", "Y");
    const double t1y = linear_ate_paths(scm, "X1", "Y");
    const std::vector<std::string> adj3 = edge_x5x6 ? std::vector<std::string>{"X5"} : std::vector<std::string>{};
    std::vector<SimRow> rows;
    for (std::size_t n : sizes) {
        const auto batch = sample(scm, std::nullopt, n, rng::hash({seed, n}));
        const double a = linear_ate_regress(batch, "X1", "X3", {});
        const double b = linear_ate_regress(batch, "X3", "Y", adj3);
        const double g = linear_ate_regress(batch, "X1", "Y", {});
        rows.push_back({n, seed, "X1X3", a, t13});
        rows.push_back({n, seed, "X3Y", b, t3y});
        rows.push_back({n, seed, "X1X3*X3Y", a * b, t13 * t3y});
        rows.push_back({n, seed, "X1Y", g, t1y});
    }
    return rows;
}

namespace {

std::string pair_id(const NodePair& p) { return p.cause + p.effect; }

// Sampled PNS for every CCT pair.
std::map<NodePair, double> sampled_locals(const BoolScm& scm, const Cct& cct, std::size_t n, std::uint64_t seed) {
    std::map<NodePair, double> out;
    const Dag& dag = scm.dag();
    for (std::size_t i = 0; i + 1 < cct.size(); ++i) {
        const auto table = sampled_cause_table(scm, cct.chain[i], n, rng::hash({seed, i}));
        for (std::size_t j = i + 1; j < cct.size(); ++j) {
            const auto p = table.at(dag.index(cct.chain[j]));
            out[cct.pair(i, j)] = pns_point(p.p_y_do_x, p.p_y_do_xprime).raw;
        }
    }
    return out;
}

std::map<NodePair, double> exact_locals(const BoolScm& scm, const Cct& cct) {
    std::vector<NodePair> pairs;
    for (auto [i, j] : cct.edges) pairs.push_back(cct.pair(i, j));
    std::map<NodePair, double> out;
    for (const auto& t : exact_truths(scm, pairs)) out[t.pair] = t.pns;
    return out;
}

std::map<NodePair, double> regressed_locals(const LinearScm& scm, const Cct& cct, std::size_t n, std::uint64_t seed) {
    const auto batch = sample(scm, std::nullopt, n, seed);
    const Dag& dag = scm.dag;
    std::map<NodePair, double> out;
    for (auto [i, j] : cct.edges) {
        const NodePair p = cct.pair(i, j);
        std::vector<std::string> adj;
        for (NodeIndex q : dag.parents(dag.index(p.cause))) adj.push_back(dag.name(q));
        out[p] = linear_ate_regress(batch, p.cause, p.effect, adj);
    }
    return out;
}

std::map<NodePair, double> path_locals(const LinearScm& scm, const Cct& cct) {
    std::map<NodePair, double> out;
    for (auto [i, j] : cct.edges) {
        const NodePair p = cct.pair(i, j);
        out[p] = linear_ate_paths(scm, p.cause, p.effect);
    }
    return out;
}

std::vector<SimRow> inductive_rows(const Cct& cct, const std::map<NodePair, double>& est,
                                   const std::map<NodePair, double>& truth, std::size_t n, std::uint64_t seed) {
    std::vector<SimRow> rows;
    for (const auto& path : enumerate_paths(cct)) {
        const auto pairs = path_pairs(cct, path);
        double v = 1.0, t = 1.0;
        for (const auto& p : pairs) {
            v *= est.at(p);
            t *= truth.at(p);
        }
        rows.push_back({n, seed, pairs.size() == 1 ? pair_id(pairs[0]) : composition_id(pairs), v, t});
    }
    return rows;
}

std::vector<SimRow> deductive_rows(const Cct& cct, const std::map<NodePair, double>& est,
                                   const std::map<NodePair, double>& truth, std::size_t n, std::uint64_t seed) {
    std::vector<SimRow> rows;
    const NodePair global = cct.pair(0, cct.size() - 1);
    for (const auto& path : enumerate_paths(cct)) {
        const auto pairs = path_pairs(cct, path);
        if (pairs.size() < 2) continue;
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            std::vector<double> others;
            for (std::size_t m = 0; m < pairs.size(); ++m)
                if (m != k) others.push_back(est.at(pairs[m]));
            double v;
            try {
                v = deduce_local(est.at(global), others).raw;
            } catch (const UndefinedEstimandError&) {
                v = std::nan("");
            }
            rows.push_back({n, seed, composition_id(pairs) + "|" + pair_id(pairs[k]), v, truth.at(pairs[k])});
        }
    }
    return rows;
}

} // namespace

std::vector<SimRow> pns_inductive(const BoolScm& scm, const Cct& cct, std::size_t n, std::uint64_t seed) {
    return inductive_rows(cct, sampled_locals(scm, cct, n, seed), exact_locals(scm, cct), n, seed);
}

std::vector<SimRow> pns_deductive(const BoolScm& scm, const Cct& cct, std::size_t n, std::uint64_t seed) {
    return deductive_rows(cct, sampled_locals(scm, cct, n, seed), exact_locals(scm, cct), n, seed);
}

std::vector<SimRow> ate_inductive(const LinearScm& scm, const Cct& cct, std::size_t n, std::uint64_t seed) {
    return inductive_rows(cct, regressed_locals(scm, cct, n, seed), path_locals(scm, cct), n, seed);
}

std::vector<SimRow> ate_deductive(const LinearScm& scm, const Cct& cct, std::size_t n, std::uint64_t seed) {
    return deductive_rows(cct, regressed_locals(scm, cct, n, seed), path_locals(scm, cct), n, seed);
}

double max_composition_gap(const std::vector<SimRow>& rows, const std::vector<std::string>& ids) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& r : rows)
        if (std::find(ids.begin(), ids.end(), r.quantity) != ids.end()) {
            lo = std::min(lo, r.value);
            hi = std::max(hi, r.value);
        }
    if (lo > hi) throw DomainError("no composition rows matched");
    return hi - lo;
}

} // namespace ccr
