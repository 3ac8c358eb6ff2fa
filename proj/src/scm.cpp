#include "ccr/scm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "ccr/errors.hpp"
#include "ccr/rng.hpp"

namespace ccr {

const char* to_string(Mechanism m) noexcept {
    switch (m) {
    case Mechanism::Or: return "OR";
    case Mechanism::And: return "AND";
    case Mechanism::Xor: return "XOR";
    }
    return "?";
}

Mechanism parse_mechanism(const std::string& s) {
    if (s == "OR") return Mechanism::Or;
    if (s == "AND") return Mechanism::And;
    if (s == "XOR") return Mechanism::Xor;
    throw StructuralError("unknown mechanism '" + s + "'");
}

// ---------------------------------------------------------------- Intervention

Intervention& Intervention::set(std::string node, double value) {
    for (auto& [n, v] : items_)
        if (n == node) {
            v = value;
            return *this;
        }
    items_.emplace_back(std::move(node), value);
    return *this;
}

std::optional<double> Intervention::value_of(const std::string& node) const {
    for (const auto& [n, v] : items_)
        if (n == node) return v;
    return std::nullopt;
}

nlohmann::json Intervention::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [n, v] : items_) j[n] = v;
    return j;
}

// ---------------------------------------------------------------- BoolScm

namespace {

void check_probability(double p, const std::string& what) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError(what + " must lie in [0,1]");
}

} // namespace

BoolScm::BoolScm(Dag dag, std::vector<Mechanism> func, std::vector<double> noise_p,
                 std::vector<double> inhibit_p)
    : dag_(std::move(dag)), func_(std::move(func)), noise_(std::move(noise_p)),
      inhibit_(std::move(inhibit_p)) {
    const std::size_t n = dag_.size();
    if (n > kMaxNodes) throw ResourceError("Boolean SCMs are limited to 64 nodes");
    if (inhibit_.empty()) inhibit_.assign(n, 0.0);
    if (func_.size() != n || noise_.size() != n || inhibit_.size() != n)
        throw StructuralError("SCM parameter vectors must have one entry per node");
    for (NodeIndex i = 0; i < n; ++i) {
        check_probability(noise_[i], "noise_p of '" + dag_.name(i) + "'");
        check_probability(inhibit_[i], "inhibit_p of '" + dag_.name(i) + "'");
    }
    order_ = dag_.topological_order();
    parent_mask_.assign(n, 0);
    for (const auto& e : dag_.edges()) parent_mask_[e.child] |= std::uint64_t{1} << e.parent;
}

BoolScm BoolScm::with_noise(std::vector<double> noise_p) const {
    return BoolScm(dag_, func_, std::move(noise_p), inhibit_);
}

std::uint64_t BoolScm::evaluate(const Exogenous& u, std::uint64_t do_mask,
                                std::uint64_t do_values) const {
    std::uint64_t state = 0;
    for (NodeIndex i : order_) {
        const std::uint64_t bit = std::uint64_t{1} << i;
        bool v;
        if (do_mask & bit) {
            v = (do_values & bit) != 0;
        } else if (parent_mask_[i] == 0) {
            v = (u.leak & bit) != 0;
        } else {
            const std::uint64_t pm = parent_mask_[i];
            const std::uint64_t on = state & pm;
            bool f = false;
            switch (func_[i]) {
            case Mechanism::Or: f = on != 0; break;
            case Mechanism::And: f = on == pm; break;
            case Mechanism::Xor: f = (std::popcount(on) & 1) != 0; break;
            }
            v = (f && !(u.inhibit & bit)) || (u.leak & bit);
        }
        if (v) state |= bit;
    }
    return state;
}

std::pair<std::uint64_t, std::uint64_t> BoolScm::resolve(const Intervention& iv) const {
    std::uint64_t mask = 0, values = 0;
    for (const auto& [node, value] : iv.assignments()) {
        const NodeIndex i = dag_.index(node);
        if (value != 0.0 && value != 1.0)
            throw DomainError("Boolean intervention on '" + node + "' must be 0 or 1");
        mask |= std::uint64_t{1} << i;
        if (value == 1.0) values |= std::uint64_t{1} << i;
    }
    return {mask, values};
}

nlohmann::json BoolScm::to_json() const {
    nlohmann::json func = nlohmann::json::object(), noise = nlohmann::json::object();
    for (NodeIndex i = 0; i < dag_.size(); ++i) {
        func[dag_.name(i)] = to_string(func_[i]);
        noise[dag_.name(i)] = noise_[i];
    }
    nlohmann::json j{{"dag", dag_.to_json()}, {"func", func}, {"noise_p", noise}};
    if (std::any_of(inhibit_.begin(), inhibit_.end(), [](double q) { return q != 0.0; })) {
        nlohmann::json inh = nlohmann::json::object();
        for (NodeIndex i = 0; i < dag_.size(); ++i) inh[dag_.name(i)] = inhibit_[i];
        j["inhibit_p"] = inh;
    }
    return j;
}

BoolScm BoolScm::from_json(const nlohmann::json& j) {
    Dag dag = Dag::from_json(j.at("dag"));
    const std::size_t n = dag.size();
    std::vector<Mechanism> func(n, Mechanism::Or);
    std::vector<double> noise(n), inhibit(n, 0.0);
    try {
        const auto& jf = j.value("func", nlohmann::json::object());
        for (auto it = jf.begin(); it != jf.end(); ++it)
            func[dag.index(it.key())] = parse_mechanism(it.value().get<std::string>());
        const auto& jn = j.at("noise_p");
        for (NodeIndex i = 0; i < n; ++i) {
            if (!jn.contains(dag.name(i)))
                throw StructuralError("noise_p missing for node '" + dag.name(i) + "'");
            noise[i] = jn.at(dag.name(i)).get<double>();
        }
        if (j.contains("inhibit_p")) {
            const auto& ji = j.at("inhibit_p");
            for (auto it = ji.begin(); it != ji.end(); ++it)
                inhibit[dag.index(it.key())] = it.value().get<double>();
        }
    } catch (const nlohmann::json::exception& ex) {
        throw StructuralError(std::string("bad scm json: ") + ex.what());
    } catch (const DomainError& ex) {
        throw StructuralError(ex.what());
    }
    return BoolScm(std::move(dag), std::move(func), std::move(noise), std::move(inhibit));
}

// ---------------------------------------------------------------- LinearScm

LinearScm::LinearScm(Dag d, std::vector<double> coefficients)
    : dag(std::move(d)), coef(std::move(coefficients)) {
    if (coef.size() != dag.edges().size())
        throw StructuralError("linear SCM needs one coefficient per edge");
    for (double c : coef)
        if (!std::isfinite(c)) throw DomainError("edge coefficients must be finite");
    (void)dag.topological_order();
}

double LinearScm::coefficient(NodeIndex parent, NodeIndex child) const {
    const auto edges = dag.edges();
    for (std::size_t k = 0; k < edges.size(); ++k)
        if (edges[k].parent == parent && edges[k].child == child) return coef[k];
    return 0.0;
}

// ---------------------------------------------------------------- sampling

const std::vector<double>& SampleBatch::column(const std::string& node) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i] == node) return columns[i];
    throw DomainError("sample batch has no column '" + node + "'");
}

double SampleBatch::mean(const std::string& node) const {
    const auto& c = column(node);
    double s = 0.0;
    for (double v : c) s += v;
    return c.empty() ? 0.0 : s / static_cast<double>(c.size());
}

std::string SampleBatch::to_csv() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < nodes.size(); ++i) os << (i ? "," : "") << nodes[i];
    os << '\n';
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t i = 0; i < nodes.size(); ++i) os << (i ? "," : "") << columns[i][s];
        os << '\n';
    }
    return os.str();
}

Exogenous draw_exogenous(const BoolScm& scm, std::uint64_t seed, std::uint64_t sample_index) {
    Exogenous u;
    for (NodeIndex i = 0; i < scm.dag().size(); ++i) {
        if (rng::bernoulli(scm.noise_p(i), {seed, i, sample_index, 0}))
            u.leak |= std::uint64_t{1} << i;
        if (scm.inhibit_p(i) > 0.0 && rng::bernoulli(scm.inhibit_p(i), {seed, i, sample_index, 1}))
            u.inhibit |= std::uint64_t{1} << i;
    }
    return u;
}

SampleBatch sample(const BoolScm& scm, const std::optional<Intervention>& iv, std::size_t n,
                   std::uint64_t seed) {
    if (n == 0) throw DomainError("sample count must be positive");
    const auto [mask, values] = iv ? scm.resolve(*iv) : std::pair<std::uint64_t, std::uint64_t>{0, 0};
    const std::size_t m = scm.dag().size();
    SampleBatch batch{scm.dag().nodes(), std::vector<std::vector<double>>(m, std::vector<double>(n)),
                      n, seed, iv};
    for (std::size_t s = 0; s < n; ++s) {
        const std::uint64_t state = scm.evaluate(draw_exogenous(scm, seed, s), mask, values);
        for (std::size_t i = 0; i < m; ++i) batch.columns[i][s] = (state >> i) & 1U;
    }
    return batch;
}

SampleBatch sample(const LinearScm& scm, const std::optional<Intervention>& iv, std::size_t n,
                   std::uint64_t seed) {
    if (n == 0) throw DomainError("sample count must be positive");
    const Dag& dag = scm.dag;
    std::vector<std::optional<double>> fixed(dag.size());
    if (iv)
        for (const auto& [node, value] : iv->assignments()) fixed[dag.index(node)] = value;

    // parent, coefficient lists per child
    std::vector<std::vector<std::pair<NodeIndex, double>>> in(dag.size());
    const auto edges = dag.edges();
    for (std::size_t k = 0; k < edges.size(); ++k) in[edges[k].child].emplace_back(edges[k].parent, scm.coef[k]);

    SampleBatch batch{dag.nodes(),
                      std::vector<std::vector<double>>(dag.size(), std::vector<double>(n)), n, seed, iv};
    for (std::size_t s = 0; s < n; ++s) {
        for (NodeIndex i : dag.topological_order()) {
            double v;
            if (fixed[i]) {
                v = *fixed[i];
            } else {
                v = rng::standard_normal(seed, i, s);
                for (const auto& [p, c] : in[i]) v += c * batch.columns[p][s];
            }
            batch.columns[i][s] = v;
        }
    }
    return batch;
}

// ---------------------------------------------------------------- enumeration

void for_each_exogenous(const BoolScm& scm, std::uint64_t skip_mask,
                        const std::function<void(const Exogenous&, double)>& visit) {
    struct FreeBit {
        bool inhibit;
        std::uint64_t bit;
        double p;
    };
    std::vector<FreeBit> free;
    Exogenous base;
    const Dag& dag = scm.dag();
    for (NodeIndex i = 0; i < dag.size(); ++i) {
        const std::uint64_t bit = std::uint64_t{1} << i;
        if (skip_mask & bit) continue;
        const double p = scm.noise_p(i);
        if (p >= 1.0) base.leak |= bit;
        else if (p > 0.0) free.push_back({false, bit, p});
        if (dag.parents(i).empty()) continue; // roots have no inhibitor
        const double q = scm.inhibit_p(i);
        if (q >= 1.0) base.inhibit |= bit;
        else if (q > 0.0) free.push_back({true, bit, q});
    }
    if (free.size() > kEnumerationLimit)
        throw ResourceError("exact enumeration needs " + std::to_string(free.size()) +
                            " exogenous bits (limit " + std::to_string(kEnumerationLimit) +
                            "); use sampled estimates instead");

    const std::uint64_t count = std::uint64_t{1} << free.size();
    for (std::uint64_t a = 0; a < count; ++a) {
        Exogenous u = base;
        double w = 1.0;
        for (std::size_t k = 0; k < free.size(); ++k) {
            const bool on = (a >> k) & 1U;
            w *= on ? free[k].p : 1.0 - free[k].p;
            if (on) (free[k].inhibit ? u.inhibit : u.leak) |= free[k].bit;
        }
        visit(u, w);
    }
}

double ExactDistribution::probability(const std::string& node) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i] == node) return marginals[i];
    throw DomainError("distribution has no node '" + node + "'");
}

double ExactDistribution::total() const {
    double t = 0.0;
    for (const auto& [s, p] : support) t += p;
    return t;
}

double ExactDistribution::joint(const std::vector<std::pair<std::string, bool>>& event) const {
    std::uint64_t mask = 0, want = 0;
    for (const auto& [node, value] : event) {
        auto it = std::find(nodes.begin(), nodes.end(), node);
        if (it == nodes.end()) throw DomainError("distribution has no node '" + node + "'");
        const std::uint64_t bit = std::uint64_t{1} << (it - nodes.begin());
        mask |= bit;
        if (value) want |= bit;
    }
    double p = 0.0;
    for (const auto& [s, w] : support)
        if ((s & mask) == want) p += w;
    return p;
}

ExactDistribution enumerate_exact(const BoolScm& scm, const std::optional<Intervention>& iv) {
    const auto [mask, values] = iv ? scm.resolve(*iv) : std::pair<std::uint64_t, std::uint64_t>{0, 0};
    const std::size_t n = scm.dag().size();
    std::unordered_map<std::uint64_t, double> acc;
    ExactDistribution out;
    out.nodes = scm.dag().nodes();
    out.marginals.assign(n, 0.0);
    for_each_exogenous(scm, mask, [&](const Exogenous& u, double w) {
        ++out.exogenous_bits;
        const std::uint64_t s = scm.evaluate(u, mask, values);
        acc[s] += w;
    });
    // exogenous_bits currently holds the assignment count; convert to bits.
    out.exogenous_bits = static_cast<std::size_t>(std::countr_zero(out.exogenous_bits));
    out.support.assign(acc.begin(), acc.end());
    std::sort(out.support.begin(), out.support.end());
    for (const auto& [s, w] : out.support)
        for (std::size_t i = 0; i < n; ++i)
            if ((s >> i) & 1U) out.marginals[i] += w;
    for (auto& m : out.marginals) m = std::clamp(m, 0.0, 1.0); // rounding in long weight products
    return out;
}

bool check_monotonic(const BoolScm& scm, const std::string& cause, const std::string& effect) {
    const Dag& dag = scm.dag();
    const NodeIndex c = dag.index(cause);
    const NodeIndex e = dag.index(effect);
    if (dag.topo_rank(c) >= dag.topo_rank(e))
        throw PreconditionError("cause '" + cause + "' does not precede effect '" + effect + "'");
    const std::uint64_t cbit = std::uint64_t{1} << c;
    const std::uint64_t ebit = std::uint64_t{1} << e;
    bool monotone = true;
    for_each_exogenous(scm, cbit, [&](const Exogenous& u, double) {
        if (!monotone) return;
        const bool y1 = scm.evaluate(u, cbit, cbit) & ebit;
        const bool y0 = scm.evaluate(u, cbit, 0) & ebit;
        if (y0 && !y1) monotone = false;
    });
    return monotone;
}

} // namespace ccr
