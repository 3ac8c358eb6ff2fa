#include <doctest.h>

#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "ccr/errors.hpp"
#include "ccr/task_gen.hpp"

using namespace ccr;

namespace {

std::string golden(const std::string& name) {
    std::ifstream in(std::string(CCR_TEST_DATA) + "/golden/" + name);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// A draw with the given candy counts; a leak fires exactly when the count reaches 7.
SampleDraw counts(const TaskSpec& t, std::vector<int> c) {
    SampleDraw s;
    s.surface = c;
    for (std::size_t i = 0; i < c.size(); ++i)
        if (c[i] >= t.thresholds[i]) s.u.leak |= std::uint64_t{1} << i;
    return s;
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
    return n;
}

} // namespace

TEST_CASE("context prompt with every threshold at 7") {
    auto t = fixture_task("candyparty-fig4");
    auto s = counts(t, {4, 6, 5, 10, 1, 1, 4, 3});
    CHECK(render_context(t, s) == golden("context_all7.txt"));
    auto q = render_queries(t, {"X", "C"}, s, true);
    CHECK(q.factual == golden("factual_xinyu_celine.txt"));
    CHECK(q.counterfactual == golden("counterfactual_xinyu_celine.txt"));
}

TEST_CASE("published prompts reproduce byte for byte") {
    auto t = fixture_task("candyparty-fig4");
    CHECK(render_queries(t, {"X", "Y"}, counts(t, {6, 9, 7, 7, 5, 5, 4, 1}), false).factual ==
          golden("factual_xinyu_yasmin_a.txt"));
    CHECK(render_queries(t, {"X", "Y"}, counts(t, {10, 5, 8, 5, 4, 5, 2, 3}), false).counterfactual ==
          golden("counterfactual_not_xinyu_yasmin.txt"));
    CHECK(render_queries(t, {"X", "Y"}, counts(t, {6, 8, 6, 7, 2, 4, 3, 2}), true).factual ==
          golden("factual_xinyu_yasmin_b.txt"));
    CHECK(render_queries(t, {"D", "Y"}, counts(t, {1, 7, 8, 6, 8, 4, 10, 3}), false).counterfactual ==
          golden("counterfactual_not_daphne_yasmin.txt"));
}

TEST_CASE("worked-example wrapping") {
    auto wrapped = wrap_cot(golden("counterfactual_not_xinyu_yasmin.txt"), default_cot_exemplars());
    CHECK(wrapped == golden("cot_wrapped.txt"));
    CHECK(count_of(wrapped, "QUESTION:") == 3);
    CHECK(wrap_cot("plain", {}) == "plain");
    std::vector<Exemplar> one{default_cot_exemplars().front()};
    CHECK_THROWS(wrap_cot("plain", one));
}

TEST_CASE("rule sentences follow the parent set") {
    auto t = fixture_task("candyparty-fig4");
    auto ctx = render_context(t, counts(t, {1, 1, 1, 1, 1, 1, 1, 1}));
    CHECK(ctx.find("Ara will be happy if Xinyu is happy or if he gets at least 7 candies.") != std::string::npos);
    // Force an AND node and check the conjunctive surface form.
    auto mech = t.scm.mechanisms();
    mech[t.scm.dag().index("F")] = Mechanism::And;
    TaskSpec t2 = t;
    t2.scm = BoolScm(t.scm.dag(), mech, t.scm.noise());
    auto ctx2 = render_context(t2, counts(t2, {1, 1, 1, 1, 1, 1, 1, 1}));
    CHECK(ctx2.find("Fox will be happy if Daphne is happy and if Emma is happy, or if he gets at least 7 candies.") !=
          std::string::npos);
}

TEST_CASE("counterfactual differs from factual by one inserted sentence") {
    GenConfig g;
    for (std::uint64_t seed = 0; seed < 5; ++seed)
        for (auto theme : {Theme::CandyParty, Theme::FlowerGarden}) {
            g.seed = seed;
            auto t = gen_task(gen_dag(g), theme, seed);
            for (const auto& q : generate_corpus(t, {20, seed, false, true})) {
                const std::string effect = t.name_of(q.pair.effect), cause = t.name_of(q.pair.cause);
                const std::string ask = " Is " + effect + " happy? Be as concise as possible.";
                REQUIRE(q.factual.size() > ask.size());
                CHECK(q.factual.substr(q.factual.size() - ask.size()) == ask);
                const std::string ctx = q.factual.substr(0, q.factual.size() - ask.size());
                const std::string where =
                    theme == Theme::CandyParty ? "the candy distribution" : "the flowers in the garden";
                const std::string inserted = " Now, suppose that " + cause + " is " + (q.do_value ? "" : "not ") +
                                             "happy regardless of " + where + ".";
                CHECK(q.counterfactual ==
                      ctx + inserted + " With this assumption, is " + effect + " happy? Be as concise as possible.");
            }
        }
}

TEST_CASE("query rendering rejects pairs outside the plan") {
    auto t = fixture_task("candyparty-fig4");
    auto s = draw_sample(t, 0, 0);
    CHECK_THROWS_AS(render_queries(t, {"A", "C"}, s, true), DomainError);
    auto q = render_queries(t, {"D", "Y"}, s, false);
    CHECK(q.counterfactual.find("suppose that Daphne is not happy regardless of the candy distribution") !=
          std::string::npos);
    CHECK(q.query_id == "candyparty-fig4:D->Y:0");
}

TEST_CASE("generation is deterministic and seeds differ") {
    GenConfig g;
    g.seed = 42;
    auto a = gen_task(gen_dag(g), Theme::CandyParty, 42);
    auto b = gen_task(gen_dag(g), Theme::CandyParty, 42);
    CHECK(a.to_json() == b.to_json());
    auto c = gen_task(gen_dag(g), Theme::CandyParty, 43);
    CHECK(a.task_id != c.task_id);
    auto ca = generate_corpus(a, {50, 1, false, true});
    auto cb = generate_corpus(b, {50, 1, false, true});
    REQUIRE(ca.size() == cb.size());
    for (std::size_t i = 0; i < ca.size(); ++i) CHECK(ca[i].to_json() == cb[i].to_json());
}

TEST_CASE("thresholds stay in 1..9 over 1000 seeds") {
    Dag d = candy_party_dag();
    std::set<int> seen;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        auto t = gen_task(d, Theme::CandyParty, seed);
        for (std::size_t i = 0; i < d.size(); ++i) {
            CHECK(t.thresholds[i] >= 1);
            CHECK(t.thresholds[i] <= 9);
            CHECK(t.scm.noise_p(i) == doctest::Approx(0.1 * t.thresholds[i]));
            seen.insert(t.thresholds[i]);
        }
        std::set<std::string> names(t.names.begin(), t.names.end());
        CHECK(names.size() == d.size());
    }
    CHECK(seen.size() == 9);
}

TEST_CASE("generated tasks are monotone on every plan pair") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        GenConfig g;
        g.seed = seed;
        g.bcc_type = seed % 2 ? BccType::Wheel : BccType::Cycle;
        auto t = gen_task(gen_dag(g), Theme::CandyParty, seed);
        for (const auto& p : t.plan.all_pairs()) CHECK(check_monotonic(t.scm, p.cause, p.effect));
    }
}

TEST_CASE("contexts are distinct when thresholds or names differ") {
    Dag d = candy_party_dag();
    std::set<std::string> texts;
    std::size_t tasks = 0;
    std::set<std::string> keys;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        auto t = gen_task(d, Theme::CandyParty, seed);
        SampleDraw s;
        s.surface.assign(d.size(), 1);
        std::string key;
        for (std::size_t i = 0; i < d.size(); ++i)
            key += t.names[i] + ":" + std::to_string(t.thresholds[i]) + ":" + to_string(t.scm.mechanism(i)) + ";";
        if (!keys.insert(key).second) continue;
        ++tasks;
        texts.insert(render_context(t, s));
    }
    CHECK(texts.size() == tasks);
}

TEST_CASE("flower theme uses no numbers in its rules") {
    auto t = gen_task(candy_party_dag(), Theme::FlowerGarden, 3);
    auto ctx = render_context(t, draw_sample(t, 0, 0));
    CHECK(ctx.find("garden") != std::string::npos);
    CHECK_FALSE(std::regex_search(ctx, std::regex("[0-9]")));
    CHECK(ctx.find("candies") == std::string::npos);
}

TEST_CASE("corpus layout") {
    auto t = fixture_task("candyparty-fig4");
    auto corpus = generate_corpus(t, {100, 9, true, true});
    CHECK(corpus.size() == 6 * 100);
    std::set<std::string> ids;
    for (const auto& q : corpus) {
        ids.insert(q.query_id);
        CHECK(q.do_value == !q.cause_factual);
        CHECK(count_of(q.factual, "QUESTION:") == 3);
        CHECK(count_of(q.counterfactual, "QUESTION:") == 3);
        CHECK(q.factual.substr(q.factual.size() - 7) == "ANSWER:");
        auto back = QueryInstance::from_json(q.to_json());
        CHECK(back.factual == q.factual);
        CHECK(back.u.leak == q.u.leak);
    }
    CHECK(ids.size() == corpus.size());
    // Leak bits and candy counts agree.
    for (std::size_t i = 0; i < 50; ++i) {
        auto s = draw_sample(t, 3, i);
        for (std::size_t n = 0; n < t.scm.dag().size(); ++n)
            CHECK(((s.u.leak >> n) & 1) == (s.surface[n] >= t.thresholds[n] ? 1u : 0u));
    }
}

TEST_CASE("task JSON round trip and config validation") {
    auto t = fixture_task("taxonomy");
    auto back = TaskSpec::from_json(t.to_json());
    CHECK(back.to_json() == t.to_json());
    CHECK(t.names[0] == "Xinyu");
    CHECK(t.names[7] == "Yasmin");
    GenConfig g;
    g.nodes_per_bcc = 1;
    CHECK_THROWS_AS(g.validate(), ConfigError);
    CHECK(GenConfig::from_json(GenConfig{}.to_json()).n_bccs == 3);
    CHECK(parse_theme("flowergarden") == Theme::FlowerGarden);
}
