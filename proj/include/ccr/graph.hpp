#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

namespace ccr {

using NodeIndex = std::size_t;

struct Edge {
    NodeIndex parent;
    NodeIndex child;

    friend bool operator==(const Edge&, const Edge&) = default;
};

// Cause-effect pair, by node id.
struct NodePair {
    std::string cause;
    std::string effect;

    friend bool operator==(const NodePair&, const NodePair&) = default;
    friend auto operator<=>(const NodePair&, const NodePair&) = default;
};

std::string to_string(const NodePair& pair); // "X->Y"

// Directed causal graph with a designated root (cause) and leaf (effect).
// Node ids are opaque; every algorithm iterates in declared node order so
// output is stable across runs. Cycles are representable so that the
// validator can report them; algorithms needing an order throw on them.
class Dag {
public:
    Dag(std::vector<std::string> nodes,
        const std::vector<std::pair<std::string, std::string>>& edges,
        std::string root, std::string leaf);

    std::size_t size() const noexcept { return names_.size(); }
    const std::vector<std::string>& nodes() const noexcept { return names_; }
    const std::string& name(NodeIndex i) const { return names_.at(i); }
    NodeIndex index(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.contains(name); }

    std::span<const Edge> edges() const noexcept { return edges_; }
    const std::vector<NodeIndex>& parents(NodeIndex i) const { return parents_.at(i); }
    const std::vector<NodeIndex>& children(NodeIndex i) const { return children_.at(i); }
    bool has_edge(NodeIndex parent, NodeIndex child) const;

    NodeIndex root() const noexcept { return root_; }
    NodeIndex leaf() const noexcept { return leaf_; }

    bool is_acyclic() const noexcept { return topo_.has_value(); }
    // Kahn order with ties broken by declared order. Throws on cycles.
    const std::vector<NodeIndex>& topological_order() const;
    // Position of each node in topological_order().
    std::size_t topo_rank(NodeIndex i) const;

    bool reaches(NodeIndex from, NodeIndex to) const;
    std::vector<bool> descendants(NodeIndex from) const; // includes `from`
    std::vector<bool> ancestors(NodeIndex to) const;     // includes `to`

    nlohmann::json to_json() const;
    static Dag from_json(const nlohmann::json& j);
    std::string to_dot() const;

    friend bool operator==(const Dag& a, const Dag& b) {
        return a.names_ == b.names_ && a.edges_ == b.edges_ && a.root_ == b.root_ &&
               a.leaf_ == b.leaf_;
    }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, NodeIndex> index_;
    std::vector<Edge> edges_;
    std::vector<std::vector<NodeIndex>> parents_;
    std::vector<std::vector<NodeIndex>> children_;
    NodeIndex root_ = 0;
    NodeIndex leaf_ = 0;
    std::optional<std::vector<NodeIndex>> topo_;
    std::vector<std::size_t> rank_;
};

enum class Assumption { Acyclic, A1SingleRoot, A2SingleLeaf, A3Cutpoint, A4NoConfounding };

const char* to_string(Assumption a) noexcept;

struct ValidationReport {
    struct Violation {
        Assumption assumption;
        std::vector<std::string> nodes; // offending nodes, may be empty
        std::string detail;
    };

    std::vector<Violation> violations;
    // Assumptions that cannot be checked from the graph and are taken on trust.
    std::vector<Assumption> assumed{Assumption::A4NoConfounding};

    bool ok() const noexcept { return violations.empty(); }
    bool violates(Assumption a) const noexcept;
    nlohmann::json to_json() const;
};

ValidationReport validate_assumptions(const Dag& dag);

// Throws PreconditionError listing the violations when A1-A3 fail.
void require_admissible(const Dag& dag);

struct BccDecomposition {
    struct Component {
        std::vector<Edge> edges;      // in dag edge order
        std::vector<NodeIndex> nodes; // in topological order
        NodeIndex root;               // unique in-degree-0 node within the component
        NodeIndex leaf;               // unique out-degree-0 node within the component
    };

    std::vector<Component> components; // ordered from the dag root to its leaf
    std::vector<NodeIndex> cutpoints;  // topological order
};

// Articulation-point search on the undirected skeleton.
BccDecomposition find_bccs(const Dag& dag);

// Articulation points of the undirected skeleton, in declared node order.
// Works on any graph; find_bccs additionally requires admissibility.
std::vector<NodeIndex> articulation_points(const Dag& dag);

// Commutative cut tree: a complete DAG over root, cutpoints and leaf.
struct Cct {
    std::vector<std::string> chain; // [X, S_1..S_k, Y]
    std::vector<std::pair<std::size_t, std::size_t>> edges; // (i, j), i < j, lexicographic

    std::size_t size() const noexcept { return chain.size(); }
    NodePair pair(std::size_t i, std::size_t j) const { return {chain.at(i), chain.at(j)}; }
    std::optional<std::size_t> position(const std::string& node) const;

    nlohmann::json to_json() const;
    static Cct from_chain(std::vector<std::string> chain);
    std::string to_dot() const;

    friend bool operator==(const Cct&, const Cct&) = default;
};

Cct build_cct(const Dag& dag);

// A root-to-leaf path through the CCT as strictly increasing chain indices.
using CctPath = std::vector<std::size_t>;

// All 2^(n-2) paths. Path k includes intermediate chain[i] iff bit (i-1) of k
// is set, so the direct edge comes first and the full chain last.
std::vector<CctPath> enumerate_paths(const Cct& cct);

std::vector<NodePair> path_pairs(const Cct& cct, const CctPath& path);

struct QuantityPlan {
    NodePair global;
    std::vector<NodePair> locals;                   // every other CCT edge
    std::vector<std::vector<NodePair>> compositions; // paths of length >= 2

    // Global first, then locals.
    std::vector<NodePair> all_pairs() const;
    bool contains(const NodePair& pair) const;

    nlohmann::json to_json() const;
    static QuantityPlan from_json(const nlohmann::json& j);
};

QuantityPlan quantity_plan(const Cct& cct);

std::string composition_id(const std::vector<NodePair>& path); // "XC*CY"

struct PathStats {
    std::size_t shortest_path_length; // hops
    std::size_t mediator_count;       // nodes strictly between on any directed path
};

PathStats path_stats(const Dag& dag, const NodePair& pair);

} // namespace ccr
