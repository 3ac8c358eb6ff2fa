#include <doctest.h>

#include <cmath>

#include "ccr/errors.hpp"
#include "ccr/rng.hpp"
#include "ccr/scm.hpp"
#include "ccr/task_gen.hpp"

using namespace ccr;

namespace {

BoolScm chain2(double px, double py) {
    Dag d({"X", "Y"}, {{"X", "Y"}}, "X", "Y");
    return BoolScm(d, {Mechanism::Or, Mechanism::Or}, {px, py});
}

// Independent evaluator: walks every (leak, inhibit) assignment with plain
// recursion over declared parents.
std::vector<double> brute_marginals(const BoolScm& scm, int do_node = -1, bool do_val = false) {
    const auto& d = scm.dag();
    const std::size_t n = d.size();
    std::vector<double> marg(n, 0.0);
    const std::size_t bits = 2 * n;
    for (std::uint64_t a = 0; a < (std::uint64_t{1} << bits); ++a) {
        double w = 1.0;
        std::vector<int> u(n), wi(n);
        for (std::size_t i = 0; i < n; ++i) {
            u[i] = (a >> i) & 1;
            wi[i] = (a >> (n + i)) & 1;
            w *= u[i] ? scm.noise_p(i) : 1 - scm.noise_p(i);
            const double q = d.parents(i).empty() ? 0.0 : scm.inhibit_p(i);
            w *= wi[i] ? q : 1 - q;
        }
        if (w == 0.0) continue;
        std::vector<int> v(n, -1);
        std::function<int(std::size_t)> val = [&](std::size_t i) -> int {
            if (v[i] >= 0) return v[i];
            if (static_cast<int>(i) == do_node) return v[i] = do_val;
            const auto& ps = d.parents(i);
            if (ps.empty()) return v[i] = u[i];
            int f = scm.mechanism(i) == Mechanism::And ? 1 : 0;
            for (auto p : ps) {
                if (scm.mechanism(i) == Mechanism::Or) f |= val(p);
                else if (scm.mechanism(i) == Mechanism::And) f &= val(p);
                else f ^= val(p);
            }
            return v[i] = (f && !wi[i]) || u[i];
        };
        for (std::size_t i = 0; i < n; ++i) marg[i] += w * val(i);
    }
    return marg;
}

BoolScm random_small(std::uint64_t seed) {
    Stream s(seed);
    Dag d({"X", "A", "B", "C", "Y"},
          {{"X", "A"}, {"X", "B"}, {"A", "C"}, {"B", "C"}, {"C", "Y"}, {"A", "Y"}}, "X", "Y");
    std::vector<Mechanism> f;
    std::vector<double> p, q;
    for (std::size_t i = 0; i < d.size(); ++i) {
        f.push_back(s.uniform() < 0.5 ? Mechanism::Or : Mechanism::And);
        p.push_back(0.05 + 0.9 * s.uniform());
        q.push_back(s.uniform() < 0.5 ? 0.0 : 0.3 * s.uniform());
    }
    return BoolScm(d, f, p, q);
}

} // namespace

TEST_CASE("two-node chain interventional probabilities") {
    auto scm = chain2(0.7, 0.7);
    auto dx = enumerate_exact(scm, Intervention().set("X", true));
    auto dxp = enumerate_exact(scm, Intervention().set("X", false));
    CHECK(dx.probability("Y") == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(dxp.probability("Y") == doctest::Approx(0.7).epsilon(1e-15));
    auto obs = enumerate_exact(scm);
    CHECK(obs.probability("Y") == doctest::Approx(0.91));
    CHECK(obs.joint({{"X", true}, {"Y", true}}) == doctest::Approx(0.7));
    CHECK(obs.joint({{"X", false}, {"Y", false}}) == doctest::Approx(0.09));
}

TEST_CASE("zero leak propagates an intervention to every descendant") {
    auto t = fixture_task("candyparty-fig4");
    auto scm = t.scm.with_noise(std::vector<double>(t.scm.dag().size(), 0.0));
    auto d = enumerate_exact(scm, Intervention().set("X", true));
    CHECK(d.support.size() == 1);
    for (const auto& n : scm.dag().nodes()) CHECK(d.probability(n) == 1.0);
}

TEST_CASE("enumeration matches an independent evaluator") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto scm = random_small(seed);
        auto exact = enumerate_exact(scm);
        CHECK(std::fabs(exact.total() - 1.0) <= 1e-12);
        auto brute = brute_marginals(scm);
        for (std::size_t i = 0; i < brute.size(); ++i) CHECK(exact.marginals[i] == doctest::Approx(brute[i]).epsilon(1e-12));
        auto ex_do = enumerate_exact(scm, Intervention().set("A", false));
        auto br_do = brute_marginals(scm, 1, false);
        for (std::size_t i = 0; i < br_do.size(); ++i) CHECK(ex_do.marginals[i] == doctest::Approx(br_do[i]).epsilon(1e-12));
    }
}

TEST_CASE("every full realization has positive mass when all leaks are interior") {
    auto t = fixture_task("candyparty-fig4");
    auto d = enumerate_exact(t.scm);
    // All-OR leaky graph: any state where each false node has only false parents is reachable.
    std::size_t feasible = 0;
    const auto& dag = t.scm.dag();
    for (std::uint64_t s = 0; s < (std::uint64_t{1} << dag.size()); ++s) {
        bool ok = true;
        for (std::size_t i = 0; i < dag.size(); ++i)
            if (!((s >> i) & 1))
                for (auto p : dag.parents(i))
                    if ((s >> p) & 1) ok = false;
        if (ok) ++feasible;
    }
    CHECK(d.support.size() == feasible);
    for (const auto& [state, p] : d.support) CHECK(p > 0.0);
}

TEST_CASE("monotonicity check") {
    auto t = fixture_task("candyparty-fig4");
    for (const auto& pair : t.plan.all_pairs()) CHECK(check_monotonic(t.scm, pair.cause, pair.effect));
    CHECK(check_monotonic(chain2(0.3, 0.7), "X", "Y"));
    Dag d({"X", "A", "Y"}, {{"X", "A"}, {"X", "Y"}, {"A", "Y"}}, "X", "Y");
    BoolScm xor_scm(d, {Mechanism::Or, Mechanism::Or, Mechanism::Xor}, {0.5, 0.5, 0.0});
    CHECK_FALSE(check_monotonic(xor_scm, "X", "Y"));
    for (std::uint64_t seed = 0; seed < 10; ++seed) CHECK(check_monotonic(random_small(seed), "X", "Y"));
}

TEST_CASE("sampling follows the interventions and is deterministic") {
    auto t = fixture_task("candyparty-fig4");
    auto b = sample(t.scm, Intervention().set("X", true), 1000, 7);
    for (double v : b.column("X")) CHECK(v == 1.0);
    auto b2 = sample(t.scm, Intervention().set("X", true), 1000, 7);
    CHECK(b.columns == b2.columns);
    CHECK_THROWS_AS(sample(t.scm, Intervention().set("Q", true), 10, 0), DomainError);
    CHECK(b.to_csv().substr(0, 16) == "X,A,B,C,D,E,F,Y\n");
}

TEST_CASE("sampled marginals converge to enumeration") {
    auto t = fixture_task("candyparty-fig4");
    auto exact = enumerate_exact(t.scm);
    auto b = sample(t.scm, std::nullopt, 1000000, 3);
    for (std::size_t i = 0; i < b.nodes.size(); ++i) CHECK(std::fabs(b.mean(b.nodes[i]) - exact.marginals[i]) < 0.005);

    auto ex = enumerate_exact(t.scm, Intervention().set("X", true));
    auto exp = enumerate_exact(t.scm, Intervention().set("X", false));
    auto sx = sample(t.scm, Intervention().set("X", true), 100000, 4);
    auto sxp = sample(t.scm, Intervention().set("X", false), 100000, 4);
    const double exact_pns = ex.probability("Y") - exp.probability("Y");
    const double sampled = sx.mean("Y") - sxp.mean("Y");
    // Shared draws: the contrast is a Bernoulli mean of the indicator of Y_x and not Y_x'.
    CHECK(std::fabs(sampled - exact_pns) < 4 * std::sqrt(exact_pns * (1 - exact_pns) / 1e5) + 1e-9);
}

TEST_CASE("intervening on a mediator screens off the cause") {
    Dag d({"X", "C", "Y"}, {{"X", "C"}, {"C", "Y"}}, "X", "Y");
    BoolScm scm(d, {Mechanism::Or, Mechanism::Or, Mechanism::Or}, {0.5, 0.2, 0.3});
    for (bool c : {false, true}) {
        auto b = sample(scm, Intervention().set("C", c), 1000000, 11);
        const auto& x = b.column("X");
        const auto& y = b.column("Y");
        double mx = b.mean("X"), my = b.mean("Y"), sxy = 0, sxx = 0, syy = 0;
        for (std::size_t i = 0; i < b.n; ++i) {
            sxy += (x[i] - mx) * (y[i] - my);
            sxx += (x[i] - mx) * (x[i] - mx);
            syy += (y[i] - my) * (y[i] - my);
        }
        const double r = syy > 0 ? sxy / std::sqrt(sxx * syy) : 0.0;
        CHECK(std::fabs(r) < 0.01);
    }
}

TEST_CASE("enumeration bound") {
    std::vector<std::string> nodes{"X"};
    std::vector<std::pair<std::string, std::string>> edges;
    for (int i = 1; i < 30; ++i) {
        nodes.push_back("V" + std::to_string(i));
        edges.emplace_back(nodes[i - 1], nodes[i]);
    }
    Dag d(nodes, edges, nodes.front(), nodes.back());
    BoolScm scm(d, std::vector<Mechanism>(d.size(), Mechanism::Or), std::vector<double>(d.size(), 0.5));
    CHECK_THROWS_AS(enumerate_exact(scm), ResourceError);
    auto degenerate = scm.with_noise(std::vector<double>(d.size(), 0.0));
    CHECK(enumerate_exact(degenerate).exogenous_bits == 0);
}

TEST_CASE("parameter validation and JSON") {
    Dag d({"X", "Y"}, {{"X", "Y"}}, "X", "Y");
    CHECK_THROWS_AS(BoolScm(d, {Mechanism::Or}, {0.5, 0.5}), StructuralError);
    CHECK_THROWS(BoolScm(d, {Mechanism::Or, Mechanism::Or}, {0.5, 1.5}));
    auto t = fixture_task("candyparty-fig4");
    auto j = t.scm.to_json();
    CHECK(j["func"]["C"] == "OR");
    CHECK(j["noise_p"]["A"] == 0.7);
    auto back = BoolScm::from_json(j);
    CHECK(back.dag() == t.scm.dag());
    CHECK(back.noise() == t.scm.noise());
    CHECK(back.mechanisms() == t.scm.mechanisms());
    CHECK(parse_mechanism("AND") == Mechanism::And);
}

TEST_CASE("linear sampling under intervention") {
    Dag d({"X", "Y"}, {{"X", "Y"}}, "X", "Y");
    LinearScm scm(d, {2.0});
    auto b1 = sample(scm, Intervention().set("X", 1.0), 20000, 5);
    auto b0 = sample(scm, Intervention().set("X", 0.0), 20000, 5);
    CHECK(b1.mean("Y") - b0.mean("Y") == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(scm.coefficient(0, 1) == 2.0);
}
