#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ccr/graph.hpp"

namespace ccr {

// Structural function combining a node's parents before the exogenous leak.
// Or/And are monotone; Xor exists only to build non-monotone fixtures.
enum class Mechanism { Or, And, Xor };

const char* to_string(Mechanism m) noexcept;
Mechanism parse_mechanism(const std::string& s);

// do(.) assignments. Boolean models read values as 0/1.
class Intervention {
public:
    Intervention() = default;

    Intervention& set(std::string node, double value);
    Intervention& set(std::string node, bool value) { return set(std::move(node), value ? 1.0 : 0.0); }

    const std::vector<std::pair<std::string, double>>& assignments() const noexcept { return items_; }
    bool empty() const noexcept { return items_.empty(); }
    std::optional<double> value_of(const std::string& node) const;

    nlohmann::json to_json() const;

private:
    std::vector<std::pair<std::string, double>> items_;
};

// One joint draw of every exogenous bit of a BoolScm, as node-indexed masks.
struct Exogenous {
    std::uint64_t leak = 0;    // U_i
    std::uint64_t inhibit = 0; // W_i
};

// Boolean SCM with disjunctive leak:
//   v_i = (f_i(parents) AND NOT W_i) OR U_i,   U_i ~ Ber(noise_p_i), W_i ~ Ber(inhibit_p_i)
// Roots take v = U. inhibit_p defaults to 0, which gives the plain leaky model.
class BoolScm {
public:
    static constexpr std::size_t kMaxNodes = 64;

    BoolScm(Dag dag, std::vector<Mechanism> func, std::vector<double> noise_p,
            std::vector<double> inhibit_p = {});

    const Dag& dag() const noexcept { return dag_; }
    Mechanism mechanism(NodeIndex i) const { return func_.at(i); }
    double noise_p(NodeIndex i) const { return noise_.at(i); }
    double inhibit_p(NodeIndex i) const { return inhibit_.at(i); }
    const std::vector<double>& noise() const noexcept { return noise_; }
    const std::vector<double>& inhibit() const noexcept { return inhibit_; }
    const std::vector<Mechanism>& mechanisms() const noexcept { return func_; }

    // Same structure and mechanisms, different leak parameters.
    BoolScm with_noise(std::vector<double> noise_p) const;

    // Endogenous state as a node-indexed bit mask.
    std::uint64_t evaluate(const Exogenous& u, std::uint64_t do_mask = 0,
                           std::uint64_t do_values = 0) const;

    // Resolve a do(.) into (mask, values). Unknown nodes raise DomainError.
    std::pair<std::uint64_t, std::uint64_t> resolve(const Intervention& iv) const;

    nlohmann::json to_json() const;
    static BoolScm from_json(const nlohmann::json& j);

private:
    Dag dag_;
    std::vector<Mechanism> func_;
    std::vector<double> noise_;
    std::vector<double> inhibit_;
    std::vector<std::uint64_t> parent_mask_;
    std::vector<NodeIndex> order_;
};

struct LinearScm {
    Dag dag;
    std::vector<double> coef; // parallel to dag.edges()

    LinearScm(Dag d, std::vector<double> coefficients);
    double coefficient(NodeIndex parent, NodeIndex child) const;
};

struct SampleBatch {
    std::vector<std::string> nodes;
    std::vector<std::vector<double>> columns; // one per node, each of length n
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::optional<Intervention> intervention;

    const std::vector<double>& column(const std::string& node) const;
    double mean(const std::string& node) const;
    std::string to_csv() const;
};

// Ancestral sampling. Draws are keyed by (seed, node, sample index) so equal
// seeds under different interventions share exogenous noise.
SampleBatch sample(const BoolScm& scm, const std::optional<Intervention>& iv, std::size_t n,
                   std::uint64_t seed);
SampleBatch sample(const LinearScm& scm, const std::optional<Intervention>& iv, std::size_t n,
                   std::uint64_t seed);

// Exogenous draw for one sample index, matching sample(BoolScm, ...).
Exogenous draw_exogenous(const BoolScm& scm, std::uint64_t seed, std::uint64_t sample_index);

constexpr std::size_t kEnumerationLimit = 24;

// Calls visit(u, weight) for every assignment of the non-degenerate exogenous
// bits of nodes outside skip_mask. Bits with probability 0 or 1 are fixed.
// Raises ResourceError past kEnumerationLimit free bits.
void for_each_exogenous(const BoolScm& scm, std::uint64_t skip_mask,
                        const std::function<void(const Exogenous&, double)>& visit);

struct ExactDistribution {
    std::vector<std::string> nodes;
    std::vector<std::pair<std::uint64_t, double>> support; // sorted by state
    std::vector<double> marginals;                          // P(v_i = 1)
    std::size_t exogenous_bits = 0;

    double probability(const std::string& node) const;
    double total() const;
    // P(all listed nodes take the listed values).
    double joint(const std::vector<std::pair<std::string, bool>>& event) const;
};

ExactDistribution enumerate_exact(const BoolScm& scm, const std::optional<Intervention>& iv = std::nullopt);

// True iff no exogenous assignment has effect_{cause=1} false and effect_{cause=0} true.
bool check_monotonic(const BoolScm& scm, const std::string& cause, const std::string& effect);

} // namespace ccr
