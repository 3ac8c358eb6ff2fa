#include "ccr/graph.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <set>
#include <sstream>

#include "ccr/errors.hpp"

namespace ccr {

std::string to_string(const NodePair& pair) { return pair.cause + "->" + pair.effect; }

const char* to_string(Assumption a) noexcept {
    switch (a) {
    case Assumption::Acyclic: return "acyclic";
    case Assumption::A1SingleRoot: return "A1";
    case Assumption::A2SingleLeaf: return "A2";
    case Assumption::A3Cutpoint: return "A3";
    case Assumption::A4NoConfounding: return "A4";
    }
    return "?";
}

// ---------------------------------------------------------------- Dag

Dag::Dag(std::vector<std::string> nodes,
         const std::vector<std::pair<std::string, std::string>>& edges,
         std::string root, std::string leaf)
    : names_(std::move(nodes)) {
    if (names_.empty()) throw StructuralError("graph has no nodes");
    for (NodeIndex i = 0; i < names_.size(); ++i) {
        if (names_[i].empty()) throw StructuralError("empty node id");
        if (!index_.emplace(names_[i], i).second)
            throw StructuralError("duplicate node id '" + names_[i] + "'");
    }
    parents_.resize(names_.size());
    children_.resize(names_.size());

    auto lookup = [this](const std::string& id, const char* role) {
        auto it = index_.find(id);
        if (it == index_.end())
            throw StructuralError(std::string(role) + " refers to unknown node '" + id + "'");
        return it->second;
    };

    std::set<std::pair<NodeIndex, NodeIndex>> seen;
    for (const auto& [p, c] : edges) {
        const NodeIndex pi = lookup(p, "edge");
        const NodeIndex ci = lookup(c, "edge");
        if (pi == ci) throw StructuralError("self-loop on '" + p + "'");
        if (!seen.emplace(pi, ci).second)
            throw StructuralError("duplicate edge " + p + "->" + c);
        edges_.push_back({pi, ci});
        parents_[ci].push_back(pi);
        children_[pi].push_back(ci);
    }
    for (auto& v : parents_) std::sort(v.begin(), v.end());
    for (auto& v : children_) std::sort(v.begin(), v.end());
    root_ = lookup(root, "root");
    leaf_ = lookup(leaf, "leaf");

    // Kahn's algorithm, always releasing the lowest declared index first.
    std::vector<std::size_t> indeg(names_.size());
    for (const auto& e : edges_) ++indeg[e.child];
    std::set<NodeIndex> ready;
    for (NodeIndex i = 0; i < names_.size(); ++i)
        if (indeg[i] == 0) ready.insert(i);
    std::vector<NodeIndex> order;
    while (!ready.empty()) {
        const NodeIndex n = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(n);
        for (NodeIndex c : children_[n])
            if (--indeg[c] == 0) ready.insert(c);
    }
    if (order.size() == names_.size()) {
        rank_.resize(names_.size());
        for (std::size_t r = 0; r < order.size(); ++r) rank_[order[r]] = r;
        topo_ = std::move(order);
    }
}

NodeIndex Dag::index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DomainError("unknown node '" + name + "'");
    return it->second;
}

bool Dag::has_edge(NodeIndex parent, NodeIndex child) const {
    const auto& c = children_.at(parent);
    return std::binary_search(c.begin(), c.end(), child);
}

const std::vector<NodeIndex>& Dag::topological_order() const {
    if (!topo_) throw PreconditionError("graph contains a directed cycle");
    return *topo_;
}

std::size_t Dag::topo_rank(NodeIndex i) const {
    if (!topo_) throw PreconditionError("graph contains a directed cycle");
    return rank_.at(i);
}

std::vector<bool> Dag::descendants(NodeIndex from) const {
    std::vector<bool> seen(size(), false);
    std::vector<NodeIndex> stack{from};
    seen[from] = true;
    while (!stack.empty()) {
        const NodeIndex n = stack.back();
        stack.pop_back();
        for (NodeIndex c : children_[n])
            if (!seen[c]) {
                seen[c] = true;
                stack.push_back(c);
            }
    }
    return seen;
}

std::vector<bool> Dag::ancestors(NodeIndex to) const {
    std::vector<bool> seen(size(), false);
    std::vector<NodeIndex> stack{to};
    seen[to] = true;
    while (!stack.empty()) {
        const NodeIndex n = stack.back();
        stack.pop_back();
        for (NodeIndex p : parents_[n])
            if (!seen[p]) {
                seen[p] = true;
                stack.push_back(p);
            }
    }
    return seen;
}

bool Dag::reaches(NodeIndex from, NodeIndex to) const { return descendants(from)[to]; }

nlohmann::json Dag::to_json() const {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : edges_) edges.push_back({names_[e.parent], names_[e.child]});
    return {{"nodes", names_}, {"edges", edges}, {"root", names_[root_]}, {"leaf", names_[leaf_]}};
}

Dag Dag::from_json(const nlohmann::json& j) {
    try {
        std::vector<std::pair<std::string, std::string>> edges;
        for (const auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2)
                throw StructuralError("edge must be a [parent, child] pair");
            edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
        }
        return Dag(j.at("nodes").get<std::vector<std::string>>(), edges,
                   j.at("root").get<std::string>(), j.at("leaf").get<std::string>());
    } catch (const nlohmann::json::exception& ex) {
        throw StructuralError(std::string("bad dag json: ") + ex.what());
    }
}

std::string Dag::to_dot() const {
    std::ostringstream os;
    os << "digraph G {\n  rankdir=LR;\n";
    for (const auto& n : names_) os << "  \"" << n << "\";\n";
    for (const auto& e : edges_)
        os << "  \"" << names_[e.parent] << "\" -> \"" << names_[e.child] << "\";\n";
    os << "}\n";
    return os.str();
}

// ---------------------------------------------------------------- BCCs

namespace {

struct Skeleton {
    // neighbour, edge index
    std::vector<std::vector<std::pair<NodeIndex, std::size_t>>> adj;
};

Skeleton skeleton(const Dag& dag) {
    Skeleton s;
    s.adj.resize(dag.size());
    const auto edges = dag.edges();
    for (std::size_t k = 0; k < edges.size(); ++k) {
        s.adj[edges[k].parent].emplace_back(edges[k].child, k);
        s.adj[edges[k].child].emplace_back(edges[k].parent, k);
    }
    for (auto& a : s.adj) std::sort(a.begin(), a.end());
    return s;
}

struct TarjanResult {
    std::vector<std::vector<std::size_t>> blocks; // edge indices
    std::vector<bool> is_cut;
};

// Hopcroft-Tarjan with an explicit edge stack, run from every unvisited node.
TarjanResult tarjan_bcc(const Dag& dag) {
    const Skeleton s = skeleton(dag);
    const std::size_t n = dag.size();
    std::vector<std::size_t> disc(n, 0), low(n, 0);
    std::size_t timer = 0;
    std::vector<std::size_t> edge_stack;
    TarjanResult out;
    out.is_cut.assign(n, false);

    std::function<void(NodeIndex, std::size_t)> dfs = [&](NodeIndex u, std::size_t via) {
        disc[u] = low[u] = ++timer;
        std::size_t child_count = 0;
        for (const auto& [v, e] : s.adj[u]) {
            if (e == via) continue;
            if (disc[v] == 0) {
                ++child_count;
                edge_stack.push_back(e);
                dfs(v, e);
                low[u] = std::min(low[u], low[v]);
                if (low[v] >= disc[u]) {
                    if (via != static_cast<std::size_t>(-1) || child_count > 1) out.is_cut[u] = true;
                    std::vector<std::size_t> block;
                    while (true) {
                        const std::size_t top = edge_stack.back();
                        edge_stack.pop_back();
                        block.push_back(top);
                        if (top == e) break;
                    }
                    std::sort(block.begin(), block.end());
                    out.blocks.push_back(std::move(block));
                }
            } else if (disc[v] < disc[u]) {
                edge_stack.push_back(e);
                low[u] = std::min(low[u], disc[v]);
            }
        }
        // A DFS root is a cutpoint iff it has more than one tree child.
        if (via == static_cast<std::size_t>(-1)) out.is_cut[u] = child_count > 1;
    };
    for (NodeIndex r = 0; r < n; ++r)
        if (disc[r] == 0) dfs(r, static_cast<std::size_t>(-1));
    return out;
}

} // namespace

std::vector<NodeIndex> articulation_points(const Dag& dag) {
    const auto res = tarjan_bcc(dag);
    std::vector<NodeIndex> cuts;
    for (NodeIndex i = 0; i < dag.size(); ++i)
        if (res.is_cut[i]) cuts.push_back(i);
    return cuts;
}

bool ValidationReport::violates(Assumption a) const noexcept {
    return std::any_of(violations.begin(), violations.end(),
                       [a](const Violation& v) { return v.assumption == a; });
}

nlohmann::json ValidationReport::to_json() const {
    nlohmann::json v = nlohmann::json::array();
    for (const auto& x : violations)
        v.push_back({{"assumption", to_string(x.assumption)}, {"nodes", x.nodes}, {"detail", x.detail}});
    nlohmann::json a = nlohmann::json::array();
    for (auto x : assumed) a.push_back(to_string(x));
    return {{"violations", v}, {"assumed", a}};
}

ValidationReport validate_assumptions(const Dag& dag) {
    ValidationReport report;
    if (!dag.is_acyclic()) {
        // Nodes left over by Kahn's algorithm lie on or behind a cycle.
        std::vector<std::size_t> indeg(dag.size());
        for (const auto& e : dag.edges()) ++indeg[e.child];
        std::deque<NodeIndex> q;
        std::vector<bool> done(dag.size(), false);
        for (NodeIndex i = 0; i < dag.size(); ++i)
            if (indeg[i] == 0) q.push_back(i);
        while (!q.empty()) {
            const NodeIndex n = q.front();
            q.pop_front();
            done[n] = true;
            for (NodeIndex c : dag.children(n))
                if (--indeg[c] == 0) q.push_back(c);
        }
        std::vector<std::string> cyc;
        for (NodeIndex i = 0; i < dag.size(); ++i)
            if (!done[i]) cyc.push_back(dag.name(i));
        report.violations.push_back({Assumption::Acyclic, cyc, "directed cycle"});
    }

    std::vector<std::string> roots, leaves;
    for (NodeIndex i = 0; i < dag.size(); ++i) {
        if (dag.parents(i).empty()) roots.push_back(dag.name(i));
        if (dag.children(i).empty()) leaves.push_back(dag.name(i));
    }
    if (roots.size() != 1 || roots.front() != dag.name(dag.root()))
        report.violations.push_back({Assumption::A1SingleRoot, roots,
                                     "expected exactly one root, '" + dag.name(dag.root()) + "'"});
    if (leaves.size() != 1 || leaves.front() != dag.name(dag.leaf()))
        report.violations.push_back({Assumption::A2SingleLeaf, leaves,
                                     "expected exactly one leaf, '" + dag.name(dag.leaf()) + "'"});
    if (articulation_points(dag).empty())
        report.violations.push_back({Assumption::A3Cutpoint, {}, "no cutpoint in the undirected skeleton"});
    return report;
}

void require_admissible(const Dag& dag) {
    const auto report = validate_assumptions(dag);
    if (report.ok()) return;
    std::string msg = "graph violates";
    for (const auto& v : report.violations) msg += std::string(" ") + to_string(v.assumption);
    throw PreconditionError(msg);
}

BccDecomposition find_bccs(const Dag& dag) {
    require_admissible(dag);
    const auto res = tarjan_bcc(dag);
    const auto edges = dag.edges();

    BccDecomposition out;
    for (const auto& block : res.blocks) {
        BccDecomposition::Component comp;
        std::vector<bool> in_comp(dag.size(), false);
        std::vector<std::size_t> indeg(dag.size(), 0), outdeg(dag.size(), 0);
        for (std::size_t k : block) {
            comp.edges.push_back(edges[k]);
            in_comp[edges[k].parent] = in_comp[edges[k].child] = true;
            ++outdeg[edges[k].parent];
            ++indeg[edges[k].child];
        }
        std::vector<NodeIndex> roots, leaves;
        for (NodeIndex v : dag.topological_order()) {
            if (!in_comp[v]) continue;
            comp.nodes.push_back(v);
            if (indeg[v] == 0) roots.push_back(v);
            if (outdeg[v] == 0) leaves.push_back(v);
        }
        if (roots.size() != 1 || leaves.size() != 1)
            throw PreconditionError("biconnected component without a unique root and leaf");
        comp.root = roots.front();
        comp.leaf = leaves.front();
        out.components.push_back(std::move(comp));
    }
    std::sort(out.components.begin(), out.components.end(), [&](const auto& a, const auto& b) {
        return dag.topo_rank(a.root) < dag.topo_rank(b.root);
    });
    for (NodeIndex v : dag.topological_order())
        if (res.is_cut[v]) out.cutpoints.push_back(v);
    return out;
}

// ---------------------------------------------------------------- CCT

std::optional<std::size_t> Cct::position(const std::string& node) const {
    auto it = std::find(chain.begin(), chain.end(), node);
    if (it == chain.end()) return std::nullopt;
    return static_cast<std::size_t>(it - chain.begin());
}

Cct Cct::from_chain(std::vector<std::string> chain) {
    if (chain.size() < 2) throw DomainError("a CCT needs at least a root and a leaf");
    Cct cct;
    cct.chain = std::move(chain);
    for (std::size_t i = 0; i < cct.chain.size(); ++i)
        for (std::size_t j = i + 1; j < cct.chain.size(); ++j) cct.edges.emplace_back(i, j);
    return cct;
}

nlohmann::json Cct::to_json() const {
    nlohmann::json e = nlohmann::json::array();
    for (auto [i, j] : edges) e.push_back({chain[i], chain[j]});
    return {{"chain", chain}, {"edges", e}};
}

std::string Cct::to_dot() const {
    std::ostringstream os;
    os << "digraph CCT {\n  rankdir=LR;\n";
    for (const auto& n : chain) os << "  \"" << n << "\";\n";
    for (auto [i, j] : edges) os << "  \"" << chain[i] << "\" -> \"" << chain[j] << "\";\n";
    os << "}\n";
    return os.str();
}

Cct build_cct(const Dag& dag) {
    const auto bccs = find_bccs(dag);
    std::vector<std::string> chain{dag.name(dag.root())};
    for (NodeIndex c : bccs.cutpoints) chain.push_back(dag.name(c));
    chain.push_back(dag.name(dag.leaf()));
    return Cct::from_chain(std::move(chain));
}

std::vector<CctPath> enumerate_paths(const Cct& cct) {
    const std::size_t n = cct.size();
    const std::size_t inner = n - 2;
    if (inner >= 63) throw ResourceError("too many cutpoints to enumerate paths");
    std::vector<CctPath> paths;
    paths.reserve(std::size_t{1} << inner);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << inner); ++mask) {
        CctPath p{0};
        for (std::size_t i = 0; i < inner; ++i)
            if (mask & (std::uint64_t{1} << i)) p.push_back(i + 1);
        p.push_back(n - 1);
        paths.push_back(std::move(p));
    }
    return paths;
}

std::vector<NodePair> path_pairs(const Cct& cct, const CctPath& path) {
    std::vector<NodePair> out;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) out.push_back(cct.pair(path[k], path[k + 1]));
    return out;
}

std::vector<NodePair> QuantityPlan::all_pairs() const {
    std::vector<NodePair> out{global};
    out.insert(out.end(), locals.begin(), locals.end());
    return out;
}

bool QuantityPlan::contains(const NodePair& pair) const {
    return pair == global || std::find(locals.begin(), locals.end(), pair) != locals.end();
}

nlohmann::json QuantityPlan::to_json() const {
    auto pj = [](const NodePair& p) { return nlohmann::json::array({p.cause, p.effect}); };
    nlohmann::json l = nlohmann::json::array(), c = nlohmann::json::array();
    for (const auto& p : locals) l.push_back(pj(p));
    for (const auto& path : compositions) {
        nlohmann::json jp = nlohmann::json::array();
        for (const auto& p : path) jp.push_back(pj(p));
        c.push_back(jp);
    }
    return {{"global", pj(global)}, {"locals", l}, {"compositions", c}};
}

QuantityPlan QuantityPlan::from_json(const nlohmann::json& j) {
    auto pj = [](const nlohmann::json& p) {
        return NodePair{p.at(0).get<std::string>(), p.at(1).get<std::string>()};
    };
    QuantityPlan plan;
    plan.global = pj(j.at("global"));
    for (const auto& p : j.at("locals")) plan.locals.push_back(pj(p));
    for (const auto& path : j.at("compositions")) {
        std::vector<NodePair> ps;
        for (const auto& p : path) ps.push_back(pj(p));
        plan.compositions.push_back(std::move(ps));
    }
    return plan;
}

QuantityPlan quantity_plan(const Cct& cct) {
    QuantityPlan plan;
    plan.global = cct.pair(0, cct.size() - 1);
    for (auto [i, j] : cct.edges)
        if (!(i == 0 && j == cct.size() - 1)) plan.locals.push_back(cct.pair(i, j));
    for (const auto& path : enumerate_paths(cct))
        if (path.size() > 2) plan.compositions.push_back(path_pairs(cct, path));
    return plan;
}

std::string composition_id(const std::vector<NodePair>& path) {
    std::string out;
    for (const auto& p : path) {
        if (!out.empty()) out += '*';
        out += to_string(p);
    }
    return out;
}

PathStats path_stats(const Dag& dag, const NodePair& pair) {
    const NodeIndex from = dag.index(pair.cause);
    const NodeIndex to = dag.index(pair.effect);
    const auto down = dag.descendants(from);
    if (from == to || !down[to])
        throw DomainError("no directed path " + to_string(pair));
    const auto up = dag.ancestors(to);

    std::vector<std::size_t> dist(dag.size(), static_cast<std::size_t>(-1));
    std::deque<NodeIndex> q{from};
    dist[from] = 0;
    while (!q.empty()) {
        const NodeIndex n = q.front();
        q.pop_front();
        for (NodeIndex c : dag.children(n))
            if (dist[c] == static_cast<std::size_t>(-1)) {
                dist[c] = dist[n] + 1;
                q.push_back(c);
            }
    }
    std::size_t mediators = 0;
    for (NodeIndex v = 0; v < dag.size(); ++v)
        if (v != from && v != to && down[v] && up[v]) ++mediators;
    return {dist[to], mediators};
}

} // namespace ccr
