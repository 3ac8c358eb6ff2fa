#include "ccr/reasoner.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "ccr/errors.hpp"
#include "ccr/rng.hpp"

namespace ccr {

const char* to_string(Which w) noexcept { return w == Which::Factual ? "factual" : "counterfactual"; }

const char* to_string(Verdict v) noexcept {
    switch (v) {
    case Verdict::True: return "TRUE";
    case Verdict::False: return "FALSE";
    case Verdict::Unknown: return "UNKNOWN";
    }
    return "UNKNOWN";
}

Which parse_which(const std::string& s) {
    if (s == "factual") return Which::Factual;
    if (s == "counterfactual") return Which::Counterfactual;
    throw StructuralError("unknown question kind '" + s + "'");
}

Verdict parse_verdict(const std::string& s) {
    if (s == "TRUE") return Verdict::True;
    if (s == "FALSE") return Verdict::False;
    if (s == "UNKNOWN") return Verdict::Unknown;
    throw StructuralError("unknown boolean '" + s + "'");
}

nlohmann::json RawResponse::to_json() const {
    return {{"query_id", query_id},   {"pair", {pair.cause, pair.effect}}, {"sample_id", sample_id},
            {"which", to_string(which)}, {"cause_value", cause_value},     {"replicate", replicate},
            {"text", text},           {"boolean", to_string(boolean)},     {"latency_ms", latency_ms}};
}

RawResponse RawResponse::from_json(const nlohmann::json& j) {
    try {
        RawResponse r;
        r.query_id = j.at("query_id").get<std::string>();
        r.pair = {j.at("pair").at(0).get<std::string>(), j.at("pair").at(1).get<std::string>()};
        r.sample_id = j.at("sample_id").get<std::size_t>();
        r.which = parse_which(j.at("which").get<std::string>());
        r.cause_value = j.at("cause_value").get<bool>();
        r.replicate = j.at("replicate").get<std::size_t>();
        r.text = j.at("text").get<std::string>();
        r.boolean = parse_verdict(j.at("boolean").get<std::string>());
        r.latency_ms = j.value("latency_ms", 0.0);
        return r;
    } catch (const nlohmann::json::exception& ex) {
        throw StructuralError(std::string("bad response json: ") + ex.what());
    }
}

namespace {

RawResponse skeleton(const QueryInstance& q, Which which, std::size_t replicate) {
    RawResponse r;
    r.query_id = q.query_id;
    r.pair = q.pair;
    r.sample_id = q.sample_id;
    r.which = which;
    r.cause_value = which == Which::Factual ? q.cause_factual : q.do_value;
    r.replicate = replicate;
    return r;
}

void set_answer(RawResponse& r, bool value) {
    r.boolean = value ? Verdict::True : Verdict::False;
    r.text = value ? "Yes." : "No.";
}

} // namespace

// ── oracle ────────────────────────────────────────────────────────────────

OracleReasoner::OracleReasoner(BoolScm scm, std::size_t replicates)
    : scm_(std::move(scm)), replicates_(replicates) {
    if (replicates_ == 0) throw ConfigError("replicate count must be positive");
}

bool OracleReasoner::true_answer(const QueryInstance& q, Which which) const {
    const Dag& dag = scm_.dag();
    const std::uint64_t cbit = std::uint64_t{1} << dag.index(q.pair.cause);
    const NodeIndex e = dag.index(q.pair.effect);
    const std::uint64_t state = which == Which::Factual ? scm_.evaluate(q.u)
                                                        : scm_.evaluate(q.u, cbit, q.do_value ? cbit : 0);
    return (state >> e) & 1U;
}

RawResponse OracleReasoner::answer(const QueryInstance& q, Which which, std::size_t replicate,
                                   std::uint64_t) const {
    RawResponse r = skeleton(q, which, replicate);
    set_answer(r, true_answer(q, which));
    return r;
}

// ── wrong model ───────────────────────────────────────────────────────────

WrongModelReasoner::WrongModelReasoner(const BoolScm& task_scm, BoolScm alternate, std::size_t replicates)
    : alt_(std::move(alternate)), replicates_(replicates) {
    if (!(alt_.dag() == task_scm.dag()))
        throw ConfigError("the alternate model must share the task graph");
    if (replicates_ == 0) throw ConfigError("replicate count must be positive");
}

RawResponse WrongModelReasoner::answer(const QueryInstance& q, Which which, std::size_t replicate,
                                       std::uint64_t seed) const {
    RawResponse r = skeleton(q, which, replicate);
    const Dag& dag = alt_.dag();
    const std::uint64_t cbit = std::uint64_t{1} << dag.index(q.pair.cause);
    const Exogenous u = draw_exogenous(alt_, rng::hash({pair_seed(seed, q.pair), replicate, 0x77726f6eULL}), q.sample_id);
    const std::uint64_t state = alt_.evaluate(u, cbit, r.cause_value ? cbit : 0);
    set_answer(r, (state >> dag.index(q.pair.effect)) & 1U);
    return r;
}

// ── noisy ─────────────────────────────────────────────────────────────────

FlipPolicy& FlipPolicy::set(const NodePair& pair, FlipRates rates) {
    for (double p : {rates.true_to_false, rates.false_to_true})
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("flip probabilities must lie in [0,1]");
    per_pair_[pair] = rates;
    return *this;
}

FlipRates FlipPolicy::rates(const NodePair& pair) const {
    auto it = per_pair_.find(pair);
    return it == per_pair_.end() ? default_ : it->second;
}

FlipPolicy FlipPolicy::by_mediators(const Dag& dag, const std::vector<NodePair>& pairs,
                                    const std::function<double(std::size_t)>& rate) {
    FlipPolicy p;
    for (const auto& pair : pairs) {
        const double f = rate(path_stats(dag, pair).mediator_count);
        p.set(pair, {f, f});
    }
    return p;
}

nlohmann::json FlipPolicy::to_json() const {
    nlohmann::json pp = nlohmann::json::array();
    for (const auto& [pair, r] : per_pair_)
        pp.push_back({{"pair", {pair.cause, pair.effect}}, {"true_to_false", r.true_to_false},
                      {"false_to_true", r.false_to_true}});
    return {{"default", {{"true_to_false", default_.true_to_false}, {"false_to_true", default_.false_to_true}}},
            {"pairs", pp}};
}

NoisyReasoner::NoisyReasoner(BoolScm scm, FlipPolicy policy, std::size_t replicates)
    : oracle_(std::move(scm), replicates), policy_(std::move(policy)) {}

RawResponse NoisyReasoner::answer(const QueryInstance& q, Which which, std::size_t replicate,
                                  std::uint64_t seed) const {
    RawResponse r = skeleton(q, which, replicate);
    bool v = oracle_.true_answer(q, which);
    const FlipRates f = policy_.rates(q.pair);
    const double p = v ? f.true_to_false : f.false_to_true;
    if (rng::bernoulli(p, {pair_seed(seed, q.pair), q.sample_id, static_cast<std::uint64_t>(which), replicate,
                           0x666c6970ULL}))
        v = !v;
    set_answer(r, v);
    return r;
}

// ── batch ─────────────────────────────────────────────────────────────────

std::string response_key(const std::string& query_id, Which which, std::size_t replicate) {
    return query_id + "|" + to_string(which) + "|" + std::to_string(replicate);
}

std::vector<RawResponse> load_responses(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw StructuralError("cannot open response store " + path.string());
    std::vector<RawResponse> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(RawResponse::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error&) {
            // a torn final line from an interrupted append is dropped
            if (in.peek() == std::char_traits<char>::eof()) break;
            throw StructuralError(path.string() + ":" + std::to_string(lineno) + ": malformed JSON");
        }
    }
    return out;
}

void save_responses(const std::filesystem::path& path, const std::vector<RawResponse>& responses) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw StructuralError("cannot write " + tmp);
        for (const auto& r : responses) out << r.to_json().dump() << '\n';
    }
    std::filesystem::rename(tmp, path);
}

BatchResult run_batch(const Reasoner& reasoner, const std::vector<QueryInstance>& queries,
                      const BatchOptions& options) {
    const std::size_t reps = reasoner.replicates();
    std::unordered_map<std::string, std::size_t> order;
    for (std::size_t i = 0; i < queries.size(); ++i)
        if (!order.emplace(queries[i].query_id, i).second)
            throw StructuralError("duplicate query id " + queries[i].query_id);

    BatchResult result;
    std::unordered_set<std::string> done;
    if (options.store && options.resume && std::filesystem::exists(*options.store)) {
        for (auto& r : load_responses(*options.store)) {
            if (!order.contains(r.query_id) || r.replicate >= reps) continue;
            if (done.insert(response_key(r.query_id, r.which, r.replicate)).second) {
                result.responses.push_back(std::move(r));
                ++result.reused;
            }
        }
    }

    struct Job {
        std::size_t query;
        Which which;
        std::size_t replicate;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < queries.size(); ++i)
        for (Which w : {Which::Factual, Which::Counterfactual})
            for (std::size_t r = 0; r < reps; ++r)
                if (!done.contains(response_key(queries[i].query_id, w, r))) jobs.push_back({i, w, r});

    std::ofstream sink;
    if (options.store) {
        if (auto dir = options.store->parent_path(); !dir.empty()) std::filesystem::create_directories(dir);
        // resume keeps what is there; a fresh run starts from the loaded set
        sink.open(*options.store, std::ios::trunc);
        for (const auto& r : result.responses) sink << r.to_json().dump() << '\n';
        sink.flush();
    }

    std::mutex mu;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::vector<std::pair<std::string, std::string>> failures;
    auto worker = [&] {
        while (!stop.load()) {
            const std::size_t k = next.fetch_add(1);
            if (k >= jobs.size()) return;
            const Job& job = jobs[k];
            try {
                RawResponse r = reasoner.answer(queries[job.query], job.which, job.replicate, options.seed);
                std::lock_guard lock(mu);
                if (sink.is_open()) sink << r.to_json().dump() << '\n' << std::flush;
                result.responses.push_back(std::move(r));
            } catch (const TransportError& ex) {
                std::lock_guard lock(mu);
                failures.emplace_back(ex.query_id(), ex.what());
                stop = true;
            }
        }
    };
    const std::size_t threads = std::max<std::size_t>(1, std::min(options.concurrency, jobs.size()));
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t + 1 < threads; ++t) pool.emplace_back(worker);
        worker();
    }
    sink.close();

    if (!failures.empty()) {
        if (options.store) {
            nlohmann::json f = nlohmann::json::array();
            for (const auto& [id, what] : failures) f.push_back({{"query_id", id}, {"error", what}});
            std::ofstream(options.store->string() + ".failures.json") << f.dump(2) << '\n';
        }
        throw TransportError(failures.front().first,
                             "batch interrupted after " + std::to_string(result.responses.size()) +
                                 " responses: " + failures.front().second);
    }

    std::sort(result.responses.begin(), result.responses.end(), [&](const RawResponse& a, const RawResponse& b) {
        const auto ka = std::tuple(order.at(a.query_id), a.which, a.replicate);
        const auto kb = std::tuple(order.at(b.query_id), b.which, b.replicate);
        return ka < kb;
    });
    for (const auto& r : result.responses)
        if (r.boolean == Verdict::Unknown) ++result.unknown;
    if (options.store) {
        save_responses(*options.store, result.responses);
        std::filesystem::remove(options.store->string() + ".failures.json");
    }
    return result;
}

} // namespace ccr
