#include "ccr/task_gen.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <sstream>

#include "ccr/errors.hpp"
#include "ccr/rng.hpp"

namespace ccr {

const char* to_string(BccType t) noexcept { return t == BccType::Cycle ? "cycle" : "wheel"; }
const char* to_string(Theme t) noexcept { return t == Theme::CandyParty ? "CandyParty" : "FlowerGarden"; }

BccType parse_bcc_type(const std::string& s) {
    if (s == "cycle") return BccType::Cycle;
    if (s == "wheel") return BccType::Wheel;
    throw ConfigError("bcc type must be 'cycle' or 'wheel', got '" + s + "'");
}

Theme parse_theme(const std::string& s) {
    if (s == "CandyParty" || s == "candyparty") return Theme::CandyParty;
    if (s == "FlowerGarden" || s == "flowergarden") return Theme::FlowerGarden;
    throw ConfigError("theme must be 'CandyParty' or 'FlowerGarden', got '" + s + "'");
}

void GenConfig::validate() const {
    if (n_bccs < 1) throw ConfigError("n_bccs must be at least 1");
    if (nodes_per_bcc < 2) throw ConfigError("nodes_per_bcc must be at least 2");
    if (1 + n_bccs * (nodes_per_bcc - 1) > BoolScm::kMaxNodes)
        throw ConfigError("generated graph would exceed 64 nodes");
}

nlohmann::json GenConfig::to_json() const {
    return {{"n_bccs", n_bccs}, {"nodes_per_bcc", nodes_per_bcc}, {"bcc_type", to_string(bcc_type)},
            {"theme", to_string(theme)}, {"seed", seed}};
}

GenConfig GenConfig::from_json(const nlohmann::json& j) {
    GenConfig c;
    c.n_bccs = j.value("n_bccs", c.n_bccs);
    c.nodes_per_bcc = j.value("nodes_per_bcc", c.nodes_per_bcc);
    c.bcc_type = parse_bcc_type(j.value("bcc_type", std::string("cycle")));
    c.theme = parse_theme(j.value("theme", std::string("CandyParty")));
    c.seed = j.value("seed", c.seed);
    return c;
}

// ── gen_dag ───────────────────────────────────────────────────────────────

namespace {

std::string node_id(std::size_t i, std::size_t n) {
    if (i == 0) return "X";
    if (i == n - 1) return "Y";
    if (i <= 23) return std::string(1, static_cast<char>('A' + i - 1)); // A..W
    return "N" + std::to_string(i);
}

using LocalEdges = std::vector<std::pair<std::size_t, std::size_t>>;

// Local indices: 0 is the entry, k-1 the exit, the rest in topological order.
LocalEdges cycle_block(std::size_t k, Stream& rs) {
    if (k == 2) return {{0, 1}};
    const std::size_t inner = k - 2;
    const std::size_t a = static_cast<std::size_t>(rs.uniform_int((inner + 1) / 2, inner));
    LocalEdges e;
    std::size_t prev = 0;
    for (std::size_t i = 1; i <= a; ++i) {
        e.emplace_back(prev, i);
        prev = i;
    }
    e.emplace_back(prev, k - 1);
    prev = 0;
    for (std::size_t i = a + 1; i <= inner; ++i) {
        e.emplace_back(prev, i);
        prev = i;
    }
    e.emplace_back(prev, k - 1);
    return e;
}

LocalEdges wheel_block(std::size_t k, Stream& rs) {
    if (k < 4) return cycle_block(k, rs);
    const std::size_t rim = k - 1;
    const std::size_t m = static_cast<std::size_t>(rs.uniform_int(1, static_cast<std::int64_t>(rim) - 1));
    // position of each rim node and the hub in the block's topological order
    std::vector<std::size_t> pos(rim);
    std::size_t next = 0;
    pos[0] = next++;
    const std::size_t hub = next++;
    for (std::size_t r = 1; r < m; ++r) pos[r] = next++;
    for (std::size_t r = rim - 1; r > m; --r) pos[r] = next++;
    pos[m] = next++;
    auto edge = [](std::size_t a, std::size_t b) { return a < b ? std::pair{a, b} : std::pair{b, a}; };
    LocalEdges e;
    for (std::size_t r = 0; r < rim; ++r) {
        e.push_back(edge(pos[r], pos[(r + 1) % rim]));
        e.push_back(edge(hub, pos[r]));
    }
    std::sort(e.begin(), e.end());
    return e;
}

} // namespace

Dag gen_dag(const GenConfig& config) {
    config.validate();
    if (config.n_bccs == 1)
        throw PreconditionError("a single biconnected component has no cutpoint; use at least 2 components");
    Stream rs(rng::hash({config.seed, 0x646167ULL}));
    const std::size_t k = config.nodes_per_bcc;
    const std::size_t n = 1 + config.n_bccs * (k - 1);
    std::vector<std::string> nodes;
    for (std::size_t i = 0; i < n; ++i) nodes.push_back(node_id(i, n));
    std::vector<std::pair<std::string, std::string>> edges;
    for (std::size_t b = 0; b < config.n_bccs; ++b) {
        const std::size_t offset = b * (k - 1);
        const auto local = config.bcc_type == BccType::Cycle ? cycle_block(k, rs) : wheel_block(k, rs);
        for (auto [u, v] : local) edges.emplace_back(nodes[offset + u], nodes[offset + v]);
    }
    Dag dag(nodes, edges, nodes.front(), nodes.back());
    require_admissible(dag);
    return dag;
}

// ── fixtures ──────────────────────────────────────────────────────────────

Dag candy_party_dag() {
    return Dag({"X", "A", "B", "C", "D", "E", "F", "Y"},
               {{"X", "A"}, {"X", "B"}, {"X", "C"}, {"A", "C"}, {"B", "C"}, {"C", "D"},
                {"D", "E"}, {"D", "F"}, {"E", "F"}, {"E", "Y"}, {"F", "Y"}},
               "X", "Y");
}

Dag cactus_dag() {
    return Dag({"A", "B", "C", "D", "E", "F", "G", "H", "I", "J", "K", "L", "M"},
               {{"A", "B"}, {"A", "C"}, {"B", "D"}, {"C", "D"}, {"D", "E"}, {"D", "F"},
                {"E", "G"}, {"F", "G"}, {"G", "H"}, {"G", "I"}, {"H", "J"}, {"I", "J"},
                {"J", "K"}, {"J", "L"}, {"K", "M"}, {"L", "M"}},
               "A", "M");
}

namespace {

struct Person {
    const char* name;
    const char* pronoun;
};

constexpr std::array<Person, 32> kNamePool{{
    {"Xinyu", "she"}, {"Ara", "he"},    {"Becca", "she"},  {"Celine", "she"}, {"Daphne", "she"},
    {"Emma", "she"},  {"Fox", "he"},    {"Yasmin", "she"}, {"Bruno", "he"},   {"Chloe", "she"},
    {"Diego", "he"},  {"Elif", "she"},  {"Farid", "he"},   {"Gita", "she"},   {"Hugo", "he"},
    {"Ines", "she"},  {"Jonas", "he"},  {"Keiko", "she"},  {"Liam", "he"},    {"Mira", "she"},
    {"Noah", "he"},   {"Olga", "she"},  {"Pavel", "he"},   {"Quinn", "she"},  {"Rafael", "he"},
    {"Sana", "she"},  {"Tomas", "he"},  {"Uma", "she"},    {"Victor", "he"},  {"Wen", "she"},
    {"Kofi", "he"},   {"Zora", "she"},
}};

constexpr std::array<const char*, 8> kColours{"red", "blue", "yellow", "white", "purple", "orange", "pink", "green"};

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << v;
    return os.str();
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

TaskSpec assemble(std::string id, Theme theme, BoolScm scm, std::vector<std::string> names,
                  std::vector<std::string> pronouns, std::vector<int> thresholds) {
    Cct cct = build_cct(scm.dag());
    QuantityPlan plan = quantity_plan(cct);
    return TaskSpec{std::move(id),       theme,           std::move(scm),  std::move(names),
                    std::move(pronouns), std::move(thresholds), std::move(cct), std::move(plan)};
}

TaskSpec candy_fixture(const std::string& id, double root_leak, double leak) {
    Dag dag = candy_party_dag();
    const std::size_t n = dag.size();
    std::vector<double> noise(n, leak);
    noise[dag.root()] = root_leak;
    std::vector<std::string> names, pronouns;
    for (std::size_t i = 0; i < n; ++i) {
        names.emplace_back(kNamePool[i].name);
        pronouns.emplace_back(kNamePool[i].pronoun);
    }
    BoolScm scm(std::move(dag), std::vector<Mechanism>(n, Mechanism::Or), std::move(noise));
    return assemble(id, Theme::CandyParty, std::move(scm), std::move(names), std::move(pronouns),
                    std::vector<int>(n, 7));
}

} // namespace

std::vector<std::string> fixture_names() { return {"candyparty-fig4", "taxonomy"}; }

TaskSpec fixture_task(const std::string& name) {
    if (name == "candyparty-fig4") return candy_fixture(name, 0.7, 0.7);
    if (name == "taxonomy") return candy_fixture(name, 0.5, 0.02);
    throw ConfigError("unknown fixture '" + name + "'");
}

// ── gen_task ──────────────────────────────────────────────────────────────

TaskSpec gen_task(const Dag& dag, Theme theme, std::uint64_t seed) {
    require_admissible(dag);
    const std::size_t n = dag.size();
    Stream rs(rng::hash({seed, 0x7461736bULL}));

    std::vector<std::size_t> pool(kNamePool.size());
    std::iota(pool.begin(), pool.end(), 0);
    std::shuffle(pool.begin(), pool.end(), rs);
    std::vector<std::string> names(n), pronouns(n);
    std::size_t k = 0;
    for (NodeIndex i : dag.topological_order()) {
        const Person& p = kNamePool[pool[k % pool.size()]];
        names[i] = p.name;
        if (k >= pool.size()) names[i] += std::to_string(k / pool.size() + 1);
        pronouns[i] = p.pronoun;
        ++k;
    }

    std::vector<double> noise(n);
    std::vector<int> thresholds(n);
    std::vector<Mechanism> func(n, Mechanism::Or);
    for (NodeIndex i = 0; i < n; ++i) {
        int t = static_cast<int>(rs.uniform_int(1, 10));
        while (t == 10) t = static_cast<int>(rs.uniform_int(1, 10)); // leak of 1 breaks positivity
        noise[i] = 0.1 * t;
        thresholds[i] = theme == Theme::CandyParty ? t
                                                   : static_cast<int>(rs.uniform_int(0, kColours.size() - 1));
        if (!dag.parents(i).empty() && rs.uniform() < 0.5) func[i] = Mechanism::And;
    }
    BoolScm scm(dag, std::move(func), std::move(noise));
    const std::string id = std::string(theme == Theme::CandyParty ? "candy-" : "flower-") +
                           hex64(fnv1a(scm.to_json().dump()) ^ rng::mix64(seed));
    return assemble(id, theme, std::move(scm), std::move(names), std::move(pronouns), std::move(thresholds));
}

// ── TaskSpec JSON ─────────────────────────────────────────────────────────

nlohmann::json TaskSpec::to_json() const {
    nlohmann::json jn = nlohmann::json::object(), jp = nlohmann::json::object(), jt = nlohmann::json::object();
    const Dag& dag = scm.dag();
    for (NodeIndex i = 0; i < dag.size(); ++i) {
        jn[dag.name(i)] = names[i];
        jp[dag.name(i)] = pronouns[i];
        jt[dag.name(i)] = thresholds[i];
    }
    return {{"task_id", task_id}, {"theme", to_string(theme)}, {"scm", scm.to_json()}, {"names", jn},
            {"pronouns", jp},     {"thresholds", jt},          {"cct", cct.to_json()}, {"plan", plan.to_json()}};
}

TaskSpec TaskSpec::from_json(const nlohmann::json& j) {
    try {
        BoolScm scm = BoolScm::from_json(j.at("scm"));
        const Dag& dag = scm.dag();
        std::vector<std::string> names(dag.size()), pronouns(dag.size());
        std::vector<int> thresholds(dag.size());
        for (NodeIndex i = 0; i < dag.size(); ++i) {
            names[i] = j.at("names").at(dag.name(i)).get<std::string>();
            pronouns[i] = j.at("pronouns").at(dag.name(i)).get<std::string>();
            thresholds[i] = j.at("thresholds").at(dag.name(i)).get<int>();
        }
        TaskSpec t = assemble(j.at("task_id").get<std::string>(), parse_theme(j.at("theme").get<std::string>()),
                              std::move(scm), std::move(names), std::move(pronouns), std::move(thresholds));
        if (QuantityPlan::from_json(j.at("plan")).all_pairs() != t.plan.all_pairs())
            throw StructuralError("stored quantity plan does not match the graph");
        return t;
    } catch (const nlohmann::json::exception& ex) {
        throw StructuralError(std::string("bad task json: ") + ex.what());
    } catch (const ConfigError& ex) {
        throw StructuralError(ex.what());
    }
}

// ── sampling and rendering ────────────────────────────────────────────────

SampleDraw draw_sample(const TaskSpec& task, std::uint64_t seed, std::size_t sample_id) {
    SampleDraw d;
    d.sample_id = sample_id;
    d.u = draw_exogenous(task.scm, seed, sample_id);
    const std::size_t n = task.scm.dag().size();
    d.surface.resize(n);
    for (NodeIndex i = 0; i < n; ++i) {
        const bool on = (d.u.leak >> i) & 1U;
        const std::initializer_list<std::uint64_t> key{seed, i, sample_id, 0x73757266ULL};
        if (task.theme == Theme::CandyParty) {
            const int t = task.thresholds[i];
            d.surface[i] = on ? static_cast<int>(rng::uniform_int(t, std::max(t, 10), key))
                              : (t <= 1 ? 0 : static_cast<int>(rng::uniform_int(1, t - 1, key)));
        } else {
            const int fav = task.thresholds[i];
            if (on) {
                d.surface[i] = fav;
            } else {
                const int other = static_cast<int>(rng::uniform_int(0, kColours.size() - 2, key));
                d.surface[i] = other >= fav ? other + 1 : other;
            }
        }
    }
    return d;
}

namespace {

std::string join_names(const TaskSpec& task) {
    const auto& order = task.scm.dag().nodes();
    std::string s;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i) s += i + 1 == order.size() ? ", and " : ", ";
        s += task.names[i];
    }
    return s;
}

std::string own_condition(const TaskSpec& task, NodeIndex i) {
    const std::string& pron = task.pronouns[i];
    if (task.theme == Theme::CandyParty)
        return pron + " gets at least " + std::to_string(task.thresholds[i]) + " candies";
    return pron + " sees a " + std::string(kColours.at(task.thresholds[i])) + " flower";
}

std::string rule_sentence(const TaskSpec& task, NodeIndex i) {
    const Dag& dag = task.scm.dag();
    std::string s = task.names[i] + " will be happy if ";
    const auto& parents = dag.parents(i);
    if (parents.empty()) return s + own_condition(task, i) + ".";
    const bool conj = task.scm.mechanism(i) == Mechanism::And && parents.size() > 1;
    for (std::size_t k = 0; k < parents.size(); ++k) {
        if (k) s += conj ? " and if " : " or if ";
        s += task.names[parents[k]] + " is happy";
    }
    s += conj ? ", or if " : " or if ";
    return s + own_condition(task, i) + ".";
}

} // namespace

std::string render_context(const TaskSpec& task, const SampleDraw& sample) {
    const Dag& dag = task.scm.dag();
    std::string s = join_names(task);
    if (task.theme == Theme::CandyParty)
        s += " are going to a party, where the host is going to distribute candies.";
    else
        s += " are walking through a garden, where flowers of many colors are in bloom.";
    for (NodeIndex i = 0; i < dag.size(); ++i) s += " " + rule_sentence(task, i);
    s += task.theme == Theme::CandyParty ? " After distributing the candies, " : " In the garden, ";
    for (NodeIndex i = 0; i < dag.size(); ++i) {
        if (i) s += i + 1 == dag.size() ? ", and " : ", ";
        if (task.theme == Theme::CandyParty)
            s += task.names[i] + " gets " + std::to_string(sample.surface.at(i));
        else
            s += task.names[i] + " sees a " + std::string(kColours.at(sample.surface.at(i))) + " flower";
    }
    return s + ".";
}

QueryInstance render_queries(const TaskSpec& task, const NodePair& pair, const SampleDraw& sample,
                             bool do_value) {
    if (!task.plan.contains(pair))
        throw DomainError("pair " + to_string(pair) + " is not in the quantity plan");
    const Dag& dag = task.scm.dag();
    QueryInstance q;
    q.task_id = task.task_id;
    q.sample_id = sample.sample_id;
    q.query_id = task.task_id + ":" + to_string(pair) + ":" + std::to_string(sample.sample_id);
    q.pair = pair;
    q.do_value = do_value;
    q.u = sample.u;
    q.surface = sample.surface;
    q.cause_factual = (task.scm.evaluate(sample.u) >> dag.index(pair.cause)) & 1U;

    const std::string context = render_context(task, sample);
    const std::string& cause = task.name_of(pair.cause);
    const std::string& effect = task.name_of(pair.effect);
    q.factual = context + " Is " + effect + " happy? Be as concise as possible.";
    q.counterfactual = context + " Now, suppose that " + cause + (do_value ? " is happy" : " is not happy") +
                       (task.theme == Theme::CandyParty ? " regardless of the candy distribution."
                                                        : " regardless of the flowers in the garden.") +
                       " With this assumption, is " + effect + " happy? Be as concise as possible.";
    return q;
}

nlohmann::json QueryInstance::to_json() const {
    return {{"task_id", task_id},
            {"query_id", query_id},
            {"sample_id", sample_id},
            {"pair", {pair.cause, pair.effect}},
            {"do_value", do_value},
            {"cause_factual", cause_factual},
            {"exogenous", {{"leak", u.leak}, {"inhibit", u.inhibit}}},
            {"surface", surface},
            {"factual", factual},
            {"counterfactual", counterfactual}};
}

QueryInstance QueryInstance::from_json(const nlohmann::json& j) {
    try {
        QueryInstance q;
        q.task_id = j.at("task_id").get<std::string>();
        q.query_id = j.at("query_id").get<std::string>();
        q.sample_id = j.at("sample_id").get<std::size_t>();
        q.pair = {j.at("pair").at(0).get<std::string>(), j.at("pair").at(1).get<std::string>()};
        q.do_value = j.at("do_value").get<bool>();
        q.cause_factual = j.at("cause_factual").get<bool>();
        q.u.leak = j.at("exogenous").at("leak").get<std::uint64_t>();
        q.u.inhibit = j.at("exogenous").value("inhibit", std::uint64_t{0});
        q.surface = j.value("surface", std::vector<int>{});
        q.factual = j.at("factual").get<std::string>();
        q.counterfactual = j.at("counterfactual").get<std::string>();
        return q;
    } catch (const nlohmann::json::exception& ex) {
        throw StructuralError(std::string("bad query json: ") + ex.what());
    }
}

// ── CoT ───────────────────────────────────────────────────────────────────

std::vector<Exemplar> default_cot_exemplars() {
    const std::string context =
        "Xinyu, Ara, Becca, Celine, Daphne, Emma, Fox, and Yasmin are going to a party, where the host is "
        "going to distribute candies. Xinyu will be happy if she gets at least 3 candies. Ara will be happy "
        "if Xinyu is happy or if he gets at least 4 candies. Becca will be happy if Xinyu is happy or if she "
        "gets at least 10 candies. Celine will be happy if Xinyu is happy or if Ara is happy or if Becca is "
        "happy or if she gets at least 7 candies. Daphne will be happy if Celine is happy or if she gets at "
        "least 5 candies. Emma will be happy if Daphne is happy or if she gets at least 6 candies. Fox will "
        "be happy if Daphne is happy or if Emma is happy or if he gets at least 10 candies. Yasmin will be "
        "happy if Emma is happy or if Fox is happy or if she gets at least 1 candies. After distributing the "
        "candies, Xinyu gets 6, Ara gets 7, Becca gets 5, Celine gets 1, Daphne gets 3, Emma gets 4, Fox "
        "gets 9, and Yasmin gets 8.";
    return {
        {context + " Is Becca happy? Be as concise as possible.",
         "Since Xinyu gets 6 candies, which is more than 3, she is happy. In that case, Becca is happy no "
         "matter how many candies she got, because she will be happy if Xinyu is happy. Therefore, yes, "
         "Becca is happy!"},
        {context + " Now, suppose that Xinyu is not happy regardless of the candy distribution. Is Becca "
                   "happy? Be as concise as possible.",
         "Since Xinyu gets 6 candies, which is more than 3, she is happy. However, we are asked to assume "
         "Xinyu is not happy regardless. In that case, Becca is happy only if she gets at least 10 candies. "
         "Becca gets 5 candies, which is less than 10. Therefore, no, Becca is not happy!"},
    };
}

std::string wrap_cot(const std::string& prompt, std::span<const Exemplar> exemplars) {
    if (exemplars.empty()) return prompt;
    if (exemplars.size() != 2)
        throw PreconditionError("chain-of-thought wrapping takes exactly two exemplars");
    const auto counterfactual = [](const Exemplar& e) { return e.question.find("suppose that") != std::string::npos; };
    if (counterfactual(exemplars[0]) == counterfactual(exemplars[1]))
        throw PreconditionError("exemplars must be one factual and one counterfactual question");
    std::string s;
    for (const auto& e : exemplars) s += "QUESTION: " + e.question + "\n\nANSWER: " + e.answer + "\n\n";
    return s + "QUESTION: " + prompt + "\n\nANSWER:";
}

// ── corpus ────────────────────────────────────────────────────────────────

std::uint64_t pair_seed(std::uint64_t seed, const NodePair& pair) {
    return rng::hash({seed, fnv1a(to_string(pair))});
}

std::vector<QueryInstance> generate_corpus(const TaskSpec& task, const CorpusOptions& options) {
    if (options.n_samples == 0) throw ConfigError("corpus needs at least one sample");
    const auto exemplars = options.cot ? default_cot_exemplars() : std::vector<Exemplar>{};
    std::vector<QueryInstance> out;
    const auto pairs = task.plan.all_pairs();
    out.reserve(pairs.size() * options.n_samples);
    const Dag& dag = task.scm.dag();
    for (const auto& pair : pairs) {
        const std::uint64_t ps = pair_seed(options.seed, pair);
        const NodeIndex c = dag.index(pair.cause);
        for (std::size_t s = 0; s < options.n_samples; ++s) {
            const SampleDraw draw = draw_sample(task, ps, s);
            const bool x_f = (task.scm.evaluate(draw.u) >> c) & 1U;
            if (options.render_text) {
                QueryInstance q = render_queries(task, pair, draw, !x_f);
                if (options.cot) {
                    q.factual = wrap_cot(q.factual, exemplars);
                    q.counterfactual = wrap_cot(q.counterfactual, exemplars);
                }
                out.push_back(std::move(q));
            } else {
                QueryInstance q;
                q.task_id = task.task_id;
                q.sample_id = s;
                q.query_id = task.task_id + ":" + to_string(pair) + ":" + std::to_string(s);
                q.pair = pair;
                q.do_value = !x_f;
                q.cause_factual = x_f;
                q.u = draw.u;
                q.surface = draw.surface;
                out.push_back(std::move(q));
            }
        }
    }
    return out;
}

} // namespace ccr
