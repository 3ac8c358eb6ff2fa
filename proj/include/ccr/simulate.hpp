#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccr/graph.hpp"
#include "ccr/scm.hpp"

namespace ccr {

// X1 -> X2 -> X3 -> X4 -> Y, X1 -> X5 -> X3, X3 -> X6 -> Y, optionally X5 -> X6.
LinearScm cut_vertex_scm(bool edge_x5x6, double coefficient = 1.5);

// Same graph as dag with every edge weighted by coefficient.
LinearScm linear_version(const Dag& dag, double coefficient);

struct SimRow {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::string quantity; // pair "XC", composition "XC*CY", or "<path>|<target>" when deduced
    double value = 0.0;
    double truth = 0.0;
};

std::string to_csv(const std::vector<SimRow>& rows);

// Regression estimates of ATE(X1,X3), ATE(X3,Y), their product and ATE(X1,Y).
// (X3,Y) is adjusted for X5 when the extra edge is present.
std::vector<SimRow> simulate_linear_ate(bool edge_x5x6, const std::vector<std::size_t>& sizes,
                                        std::uint64_t seed);

// Sampled PNS for every CCT pair, then every root-to-leaf composition
// (the direct edge included). Both intervention arms share exogenous draws.
std::vector<SimRow> pns_inductive(const BoolScm& scm, const Cct& cct, std::size_t n, std::uint64_t seed);

// Each local on each composition path recovered from the sampled global
// and the path's other sampled locals.
std::vector<SimRow> pns_deductive(const BoolScm& scm, const Cct& cct, std::size_t n, std::uint64_t seed);

// Regression counterparts on a linear-Gaussian SCM, adjusting for the
// cause's parents.
std::vector<SimRow> ate_inductive(const LinearScm& scm, const Cct& cct, std::size_t n, std::uint64_t seed);
std::vector<SimRow> ate_deductive(const LinearScm& scm, const Cct& cct, std::size_t n, std::uint64_t seed);

// Largest pairwise difference among composition values in one batch of rows.
double max_composition_gap(const std::vector<SimRow>& rows, const std::vector<std::string>& ids);

} // namespace ccr
