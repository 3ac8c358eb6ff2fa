#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "ccr/errors.hpp"
#include "ccr/estimands.hpp"
#include "ccr/evaluator.hpp"

using namespace ccr;

namespace {

struct Fixture {
    TaskSpec task;
    std::map<NodePair, double> truths;
};

Fixture load(const std::string& name) {
    Fixture f{fixture_task(name), {}};
    for (const auto& t : exact_truths(f.task.scm, f.task.plan.all_pairs())) f.truths[t.pair] = t.pns;
    return f;
}

std::vector<RawResponse> oracle_store(const TaskSpec& t, std::size_t n, std::size_t reps, std::uint64_t seed) {
    OracleReasoner o(t.scm, reps);
    BatchOptions opt;
    opt.seed = seed;
    return run_batch(o, generate_corpus(t, {n, seed, false, false}), opt).responses;
}

ErrorRecords synthetic(double validity, double consistency) {
    // One quantity and one composition with chosen fractions over 100 rounds.
    ErrorRecords r;
    r.rounds = 100;
    QuantityRecord q;
    q.pair = {"X", "Y"};
    q.truth = 0.5;
    q.validity = validity;
    r.quantities.push_back(q);
    CompositionRecord c;
    c.id = "X->C*C->Y";
    c.validity = validity;
    c.consistency = consistency;
    r.compositions.push_back(c);
    return r;
}

} // namespace

TEST_CASE("relative absolute error") {
    CHECK(rae(0.27, 0.30) == doctest::Approx(0.1));
    CHECK(rae(0.4, 0.4) == 0.0);
    CHECK_THROWS_AS(rae(0.1, 0.0), UndefinedEstimandError);
    CHECK(rae_internal(0.27, 0.30) == rae(0.27, 0.30));
    CHECK(rae_internal(0.0, 0.0) == 0.0);
    CHECK(rae_internal(0.1, 0.0) == std::numeric_limits<double>::infinity());
}

TEST_CASE("oracle subsampling centres on the exact value") {
    auto f = load("taxonomy");
    auto store = oracle_store(f.task, 1000, 5, 1);
    EvalConfig cfg;
    cfg.n_subsamples = 300;
    for (const auto& pair : f.task.plan.all_pairs()) {
        auto d = subsample_pns(store, pair, cfg);
        CHECK(d.pns.size() == 300);
        CHECK(d.unknown_rate == 0.0);
        auto s = summarize(d.pns);
        CHECK(s.std < 0.02);
        // Binomial std of a difference of proportions at n = 1000.
        const double truth = f.truths.at(pair);
        CHECK(std::fabs(s.mean - truth) <= 3 * std::sqrt(2 * 0.25 / 1000));
    }
}

TEST_CASE("a single replicate gives one repeated estimate") {
    auto f = load("taxonomy");
    auto store = oracle_store(f.task, 200, 1, 2);
    EvalConfig cfg;
    cfg.n_exogenous_sets = 200;
    cfg.replicates = 1;
    cfg.n_subsamples = 50;
    auto d = subsample_pns(store, {"X", "C"}, cfg);
    for (double v : d.pns) CHECK(v == d.pns.front());
}

TEST_CASE("too many unknown or missing answers") {
    auto f = load("taxonomy");
    auto store = oracle_store(f.task, 100, 2, 3);
    EvalConfig cfg;
    cfg.n_exogenous_sets = 100;
    cfg.replicates = 2;
    cfg.n_subsamples = 10;
    std::size_t marked = 0;
    for (auto& r : store)
        if (r.pair == NodePair{"X", "C"} && marked < 25) {
            r.boolean = Verdict::Unknown;
            ++marked;
        }
    // 25 of 400 is 6.25%.
    CHECK_THROWS_AS(subsample_pns(store, {"X", "C"}, cfg), DataQualityError);
    cfg.max_unknown_rate = 0.1;
    CHECK(subsample_pns(store, {"X", "C"}, cfg).unknown_rate == doctest::Approx(25.0 / 400));
    cfg.n_exogenous_sets = 200; // half the samples were never asked
    cfg.max_unknown_rate = 0.05;
    CHECK_THROWS_AS(subsample_pns(store, {"X", "D"}, cfg), DataQualityError);
}

TEST_CASE("exact inputs give zero error everywhere") {
    auto f = load("taxonomy");
    std::map<NodePair, std::vector<double>> est;
    for (const auto& [p, v] : f.truths) est[p] = std::vector<double>(20, v);
    EvalConfig cfg;
    cfg.n_subsamples = 20;
    auto rec = run_algorithm1(f.task.cct, f.task.plan, est, f.truths, f.task.scm.dag(), cfg);
    CHECK(rec.rounds == 20);
    CHECK(rec.quantities.size() == 6);
    CHECK(rec.compositions.size() == 3);
    for (const auto& q : rec.quantities) {
        CHECK_FALSE(q.excluded);
        for (double e : q.eta) CHECK(e == 0.0);
        CHECK(*q.validity == 1.0);
    }
    for (const auto& c : rec.compositions) {
        for (double e : c.epsilon) CHECK(e <= 1e-12);
        for (double g : c.gamma) CHECK(g <= 1e-12);
        CHECK(c.consistency == 1.0);
    }
    CHECK(classify(rec, cfg).label == Label::VC);
}

TEST_CASE("internal consistency without truths") {
    auto f = load("taxonomy");
    std::map<NodePair, std::vector<double>> est;
    for (const auto& [p, v] : f.truths) est[p] = std::vector<double>(10, v);
    EvalConfig cfg;
    auto rec = run_algorithm1(f.task.cct, f.task.plan, est, {}, f.task.scm.dag(), cfg);
    for (const auto& q : rec.quantities) CHECK(q.eta.empty());
    for (const auto& c : rec.compositions) {
        CHECK(c.epsilon.empty());
        CHECK(c.gamma.size() == 10);
    }
    auto label = classify(rec, cfg);
    CHECK(label.label == Label::Unvalidated);
    CHECK(label.consistency_level == 2);
}

TEST_CASE("missing quantity and smallest plan") {
    auto f = load("taxonomy");
    std::map<NodePair, std::vector<double>> est;
    for (const auto& [p, v] : f.truths) est[p] = {v};
    est.erase({"C", "D"});
    CHECK_THROWS_AS(run_algorithm1(f.task.cct, f.task.plan, est, f.truths, f.task.scm.dag(), {}), CoverageError);

    Dag d({"X", "C", "Y"}, {{"X", "C"}, {"C", "Y"}}, "X", "Y");
    auto cct = build_cct(d);
    auto plan = quantity_plan(cct);
    std::map<NodePair, std::vector<double>> e3{{{"X", "Y"}, {0.09, 0.1}}, {{"X", "C"}, {0.3, 0.3}}, {{"C", "Y"}, {0.3, 0.3}}};
    std::map<NodePair, double> t3{{{"X", "Y"}, 0.09}, {{"X", "C"}, 0.3}, {{"C", "Y"}, 0.3}};
    auto rec = run_algorithm1(cct, plan, e3, t3, d, {});
    REQUIRE(rec.compositions.size() == 1);
    CHECK(rec.compositions[0].epsilon.size() == 2);
    CHECK(rec.compositions[0].gamma.size() == 2);
    CHECK(rec.compositions[0].gamma[1] == doctest::Approx(0.1));
}

TEST_CASE("composition counts follow the chain length") {
    for (std::size_t n = 3; n <= 8; ++n) {
        std::vector<std::string> chain;
        for (std::size_t i = 0; i < n; ++i) chain.push_back("N" + std::to_string(i));
        std::vector<std::pair<std::string, std::string>> edges;
        for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(chain[i], chain[i + 1]);
        Dag d(chain, edges, chain.front(), chain.back());
        auto cct = build_cct(d);
        auto plan = quantity_plan(cct);
        std::map<NodePair, std::vector<double>> est;
        for (const auto& p : plan.all_pairs()) est[p] = {0.5};
        auto rec = run_algorithm1(cct, plan, est, {}, d, {});
        CHECK(rec.compositions.size() + 1 == (std::size_t{1} << (n - 2)));
    }
}

TEST_CASE("label mapping") {
    EvalConfig cfg;
    CHECK(classify(synthetic(0.95, 0.95), cfg).label == Label::VC);
    CHECK(classify(synthetic(0.8, 0.95), cfg).label == Label::NearVC);
    CHECK(classify(synthetic(0.95, 0.8), cfg).label == Label::NearVC);
    CHECK(classify(synthetic(0.95, 0.1), cfg).label == Label::VI);
    CHECK(classify(synthetic(0.8, 0.1), cfg).label == Label::NearVI);
    CHECK(classify(synthetic(0.1, 0.95), cfg).label == Label::IC);
    CHECK(classify(synthetic(0.1, 0.8), cfg).label == Label::IC);
    CHECK(classify(synthetic(0.1, 0.1), cfg).label == Label::II);
    for (auto l : {Label::VC, Label::NearVC, Label::VI, Label::NearVI, Label::IC, Label::II, Label::Unvalidated})
        CHECK(parse_label(to_string(l)) == l);
}

TEST_CASE("tightening the threshold never improves the label") {
    auto f = load("taxonomy");
    auto noise = f.task.scm.noise();
    for (std::size_t i = 1; i < noise.size(); ++i) noise[i] = 0.05;
    WrongModelReasoner wrong(f.task.scm, f.task.scm.with_noise(noise), 5);
    auto store = run_batch(wrong, generate_corpus(f.task, {1000, 4, false, false}), {}).responses;
    double prev_v = 2, prev_c = 2;
    int prev_vl = 3, prev_cl = 3;
    for (double delta : {1.0, 0.5, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01}) {
        EvalConfig cfg;
        cfg.n_subsamples = 200;
        cfg.rae_threshold = delta;
        auto rep = evaluate("t", "wrong", f.task.cct, f.task.plan, f.task.scm.dag(), store, f.truths, cfg);
        CHECK(rep.label.min_validity <= prev_v);
        CHECK(rep.label.min_consistency <= prev_c);
        CHECK(rep.label.validity_level <= prev_vl);
        CHECK(rep.label.consistency_level <= prev_cl);
        prev_v = rep.label.min_validity;
        prev_c = rep.label.min_consistency;
        prev_vl = rep.label.validity_level;
        prev_cl = rep.label.consistency_level;
    }
}

TEST_CASE("labels from ATE estimates equal labels from PNS estimates") {
    auto f = load("taxonomy");
    NoisyReasoner noisy(f.task.scm, FlipPolicy(FlipRates{0.05, 0.05}), 5);
    auto store = run_batch(noisy, generate_corpus(f.task, {1000, 6, false, false}), {}).responses;
    EvalConfig cfg;
    cfg.n_subsamples = 200;
    std::map<NodePair, std::vector<double>> pns, ate;
    std::map<NodePair, double> ate_truth;
    for (const auto& p : f.task.plan.all_pairs()) {
        auto d = subsample_pns(store, p, cfg);
        pns[p] = d.pns;
        for (std::size_t i = 0; i < d.pns.size(); ++i) ate[p].push_back(ate_binary(d.p_do_x[i], d.p_do_xprime[i]));
    }
    for (const auto& t : exact_truths(f.task.scm, f.task.plan.all_pairs())) ate_truth[t.pair] = t.ate;
    auto a = classify(run_algorithm1(f.task.cct, f.task.plan, pns, f.truths, f.task.scm.dag(), cfg), cfg);
    auto b = classify(run_algorithm1(f.task.cct, f.task.plan, ate, ate_truth, f.task.scm.dag(), cfg), cfg);
    CHECK(a.label == b.label);
    CHECK(a.min_validity == b.min_validity);
    CHECK(a.min_consistency == b.min_consistency);
}

TEST_CASE("oracle end to end and report serialisation") {
    auto f = load("taxonomy");
    auto store = oracle_store(f.task, 1000, 5, 8);
    EvalConfig cfg;
    auto rep = evaluate(f.task.task_id, "oracle", f.task.cct, f.task.plan, f.task.scm.dag(), store, f.truths, cfg);
    CHECK(rep.label.label == Label::VC);
    for (const auto& q : rep.records.quantities) CHECK(summarize(q.eta).median < 0.05);
    for (const auto& c : rep.records.compositions) {
        CHECK(summarize(c.epsilon).median < 0.05);
        CHECK(summarize(c.gamma).median < 0.05);
    }
    for (const auto& row : rep.mediation) CHECK(row.mean_rae < 0.05);
    auto back = EvalReport::from_json(rep.to_json());
    CHECK(back.to_json() == rep.to_json());
    const auto csv = rep.estimates_csv();
    const auto lines = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
    // header + quantities (estimate + eta) + compositions (estimate + epsilon + gamma)
    CHECK(lines == 1 + 6 * 1000 * 2 + 3 * 1000 * 3);
}

TEST_CASE("mediation buckets on the candy-party graph") {
    auto f = load("taxonomy");
    std::map<NodePair, std::vector<double>> est;
    for (const auto& [p, v] : f.truths) est[p] = {v * 1.1};
    auto rec = run_algorithm1(f.task.cct, f.task.plan, est, f.truths, f.task.scm.dag(), {});
    auto rows = mediation_curve(rec);
    std::set<std::size_t> dist, med;
    for (const auto& r : rows) {
        (r.axis == "distance" ? dist : med).insert(r.bucket);
        CHECK(r.mean_rae == doctest::Approx(0.1));
    }
    CHECK(dist == std::set<std::size_t>{1, 2, 3, 4});
    CHECK(med == std::set<std::size_t>{0, 2, 3, 6});
}

TEST_CASE("config validation and truths below the floor") {
    EvalConfig cfg;
    cfg.near_valid_fraction = 0.95;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    auto f = load("candyparty-fig4");
    std::map<NodePair, std::vector<double>> est;
    for (const auto& [p, v] : f.truths) est[p] = {v};
    auto rec = run_algorithm1(f.task.cct, f.task.plan, est, f.truths, f.task.scm.dag(), {});
    // PNS_XY is 0.3^7 here, far below the floor.
    CHECK(rec.quantities.front().excluded);
    CHECK(rec.quantities.front().eta.empty());
    CHECK(rec.compositions.front().epsilon.empty());
}
