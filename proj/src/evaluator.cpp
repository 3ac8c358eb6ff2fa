#include "ccr/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ccr/errors.hpp"
#include "ccr/rng.hpp"
#include "ccr/task_gen.hpp"

namespace ccr {

void EvalConfig::validate() const {
    if (n_exogenous_sets == 0 || replicates == 0 || n_subsamples == 0)
        throw ConfigError("sample, replicate and subsample counts must be positive");
    if (!(rae_threshold > 0)) throw ConfigError("rae_threshold must be positive");
    for (double f : {validity_fraction, near_valid_fraction})
        if (!(f > 0 && f <= 1)) throw ConfigError("threshold fractions must lie in (0,1]");
    if (near_valid_fraction > validity_fraction)
        throw ConfigError("near_valid_fraction cannot exceed validity_fraction");
    if (!(max_unknown_rate >= 0 && max_unknown_rate <= 1)) throw ConfigError("max_unknown_rate must lie in [0,1]");
}

nlohmann::json EvalConfig::to_json() const {
    return {{"n_exogenous_sets", n_exogenous_sets}, {"replicates", replicates},
            {"n_subsamples", n_subsamples},         {"rae_threshold", rae_threshold},
            {"validity_fraction", validity_fraction}, {"near_valid_fraction", near_valid_fraction},
            {"max_unknown_rate", max_unknown_rate}, {"min_truth", min_truth},
            {"seed", seed}};
}

EvalConfig EvalConfig::from_json(const nlohmann::json& j) {
    EvalConfig c;
    try {
        c.n_exogenous_sets = j.value("n_exogenous_sets", c.n_exogenous_sets);
        c.replicates = j.value("replicates", c.replicates);
        c.n_subsamples = j.value("n_subsamples", c.n_subsamples);
        c.rae_threshold = j.value("rae_threshold", c.rae_threshold);
        c.validity_fraction = j.value("validity_fraction", c.validity_fraction);
        c.near_valid_fraction = j.value("near_valid_fraction", c.near_valid_fraction);
        c.max_unknown_rate = j.value("max_unknown_rate", c.max_unknown_rate);
        c.min_truth = j.value("min_truth", c.min_truth);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("bad eval config: ") + ex.what());
    }
    c.validate();
    return c;
}

// ── subsampling ───────────────────────────────────────────────────────────

EstimateDistribution subsample_pns(const std::vector<RawResponse>& responses, const NodePair& pair,
                                   const EvalConfig& config) {
    config.validate();
    const std::size_t n = config.n_exogenous_sets;
    const std::size_t reps = config.replicates;
    // slot[(s*2 + which)*reps + r]: -1 missing, 0 false, 1 true, 2 unknown
    std::vector<std::int8_t> slot(n * 2 * reps, -1);
    std::vector<std::int8_t> arm(n * 2, -1);
    for (const auto& r : responses) {
        if (r.pair != pair || r.sample_id >= n || r.replicate >= reps) continue;
        const std::size_t base = r.sample_id * 2 + (r.which == Which::Factual ? 0 : 1);
        if (arm[base] >= 0 && arm[base] != static_cast<std::int8_t>(r.cause_value))
            throw DataQualityError("responses for " + r.query_id + " disagree on the cause value");
        arm[base] = static_cast<std::int8_t>(r.cause_value);
        slot[base * reps + r.replicate] =
            r.boolean == Verdict::True ? 1 : r.boolean == Verdict::False ? 0 : 2;
    }
    std::size_t bad = 0, unknown = 0;
    for (auto v : slot) {
        if (v < 0) ++bad;
        if (v == 2) ++unknown, ++bad;
    }
    EstimateDistribution out;
    out.pair = pair;
    out.responses = slot.size() - (bad - unknown);
    out.unknown_rate = static_cast<double>(bad) / static_cast<double>(slot.size());
    if (out.unknown_rate > config.max_unknown_rate)
        throw DataQualityError("pair " + to_string(pair) + ": " + std::to_string(bad) + " of " +
                               std::to_string(slot.size()) + " responses are missing or UNKNOWN");

    const std::uint64_t ps = pair_seed(config.seed, pair);
    std::vector<std::uint8_t> present;
    out.pns.reserve(config.n_subsamples);
    for (std::size_t round = 0; round < config.n_subsamples; ++round) {
        const std::uint64_t rs = rng::hash({ps, round});
        std::size_t hit[2] = {0, 0}, cnt[2] = {0, 0};
        for (std::size_t b = 0; b < n * 2; ++b) {
            if (arm[b] < 0) continue;
            present.clear();
            for (std::size_t r = 0; r < reps; ++r)
                if (slot[b * reps + r] >= 0) present.push_back(static_cast<std::uint8_t>(r));
            if (present.empty()) continue;
            const std::size_t pick =
                present.size() == 1 ? 0
                                    : static_cast<std::size_t>(rng::uniform_int(0, static_cast<std::int64_t>(present.size()) - 1, {rs, b}));
            const auto v = slot[b * reps + present[pick]];
            if (v == 2) continue;
            ++cnt[arm[b]];
            hit[arm[b]] += static_cast<std::size_t>(v);
        }
        if (cnt[0] == 0 || cnt[1] == 0)
            throw DataQualityError("pair " + to_string(pair) + " has no answers for one intervention arm");
        const double p1 = static_cast<double>(hit[1]) / static_cast<double>(cnt[1]);
        const double p0 = static_cast<double>(hit[0]) / static_cast<double>(cnt[0]);
        out.p_do_x.push_back(p1);
        out.p_do_xprime.push_back(p0);
        out.pns.push_back(pns_point(p1, p0).raw);
    }
    return out;
}

double rae(double estimate, double reference) {
    if (reference == 0.0) throw UndefinedEstimandError("RAE is undefined for a zero reference; report AE instead");
    return std::abs(reference - estimate) / std::abs(reference);
}

double rae_internal(double estimate, double reference_estimate) {
    if (reference_estimate == 0.0)
        return estimate == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::abs(reference_estimate - estimate) / std::abs(reference_estimate);
}

// ── Algorithm 1 ───────────────────────────────────────────────────────────

namespace {

double fraction_within(const std::vector<double>& errors, double delta) {
    if (errors.empty()) return 0.0;
    const auto ok = std::count_if(errors.begin(), errors.end(), [&](double e) { return e <= delta; });
    return static_cast<double>(ok) / static_cast<double>(errors.size());
}

} // namespace

ErrorRecords run_algorithm1(const Cct& cct, const QuantityPlan& plan,
                            const std::map<NodePair, std::vector<double>>& estimates,
                            const std::map<NodePair, double>& truths, const Dag& dag,
                            const EvalConfig& config) {
    config.validate();
    (void)cct;
    ErrorRecords out;
    std::vector<NodePair> missing;
    for (const auto& pair : plan.all_pairs())
        if (!estimates.contains(pair)) missing.push_back(pair);
    if (!missing.empty()) {
        std::string list;
        for (const auto& p : missing) list += (list.empty() ? "" : ", ") + to_string(p);
        throw CoverageError("no estimates for " + list);
    }
    out.rounds = estimates.at(plan.global).size();
    for (const auto& [pair, est] : estimates)
        if (plan.contains(pair) && est.size() != out.rounds)
            throw CoverageError("estimate series for " + to_string(pair) + " has a different round count");

    const double delta = config.rae_threshold;
    for (const auto& pair : plan.all_pairs()) {
        QuantityRecord q;
        q.pair = pair;
        q.estimates = estimates.at(pair);
        q.stats = path_stats(dag, pair);
        if (auto it = truths.find(pair); it != truths.end()) {
            q.truth = it->second;
            q.excluded = it->second < config.min_truth;
            if (!q.excluded) {
                q.eta.reserve(q.estimates.size());
                for (double e : q.estimates) q.eta.push_back(rae(e, it->second));
                q.validity = fraction_within(q.eta, delta);
            }
        }
        out.quantities.push_back(std::move(q));
    }

    const auto& direct = estimates.at(plan.global);
    const auto global_truth = truths.find(plan.global);
    const bool external = global_truth != truths.end() && global_truth->second >= config.min_truth;
    for (const auto& path : plan.compositions) {
        CompositionRecord c;
        c.path = path;
        c.id = composition_id(path);
        c.estimates.assign(out.rounds, 1.0);
        for (const auto& pair : path) {
            const auto& e = estimates.at(pair);
            for (std::size_t r = 0; r < out.rounds; ++r) c.estimates[r] *= e[r];
        }
        for (std::size_t r = 0; r < out.rounds; ++r) {
            if (external) c.epsilon.push_back(rae(c.estimates[r], global_truth->second));
            c.gamma.push_back(rae_internal(c.estimates[r], direct[r]));
        }
        if (external) c.validity = fraction_within(c.epsilon, delta);
        c.consistency = fraction_within(c.gamma, delta);
        out.compositions.push_back(std::move(c));
    }
    return out;
}

// ── taxonomy ──────────────────────────────────────────────────────────────

const char* to_string(Label l) noexcept {
    switch (l) {
    case Label::VC: return "VC";
    case Label::NearVC: return "near-VC";
    case Label::VI: return "VI";
    case Label::NearVI: return "near-VI";
    case Label::IC: return "IC";
    case Label::II: return "II";
    case Label::Unvalidated: return "unvalidated";
    }
    return "?";
}

Label parse_label(const std::string& s) {
    for (Label l : {Label::VC, Label::NearVC, Label::VI, Label::NearVI, Label::IC, Label::II, Label::Unvalidated})
        if (s == to_string(l)) return l;
    throw StructuralError("unknown label '" + s + "'");
}

nlohmann::json TaxonomyLabel::to_json() const {
    return {{"label", to_string(label)},
            {"validity_level", validity_level},
            {"consistency_level", consistency_level},
            {"min_validity", min_validity},
            {"min_consistency", min_consistency}};
}

TaxonomyLabel TaxonomyLabel::from_json(const nlohmann::json& j) {
    TaxonomyLabel t;
    t.label = parse_label(j.at("label").get<std::string>());
    t.validity_level = j.at("validity_level").get<int>();
    t.consistency_level = j.at("consistency_level").get<int>();
    t.min_validity = j.at("min_validity").get<double>();
    t.min_consistency = j.at("min_consistency").get<double>();
    return t;
}

TaxonomyLabel classify(const ErrorRecords& records, const EvalConfig& config) {
    auto level = [&](double f) { return f >= config.validity_fraction ? 2 : f >= config.near_valid_fraction ? 1 : 0; };
    TaxonomyLabel t;
    bool any_truth = false;
    t.min_validity = 1.0;
    for (const auto& q : records.quantities)
        if (q.validity) {
            any_truth = true;
            t.min_validity = std::min(t.min_validity, *q.validity);
        }
    for (const auto& c : records.compositions)
        if (c.validity) {
            any_truth = true;
            t.min_validity = std::min(t.min_validity, *c.validity);
        }
    t.min_consistency = 1.0;
    for (const auto& c : records.compositions) t.min_consistency = std::min(t.min_consistency, c.consistency);
    t.consistency_level = level(t.min_consistency);

    if (!any_truth) {
        t.validity_level = -1;
        t.min_validity = 0.0;
        t.label = Label::Unvalidated;
        return t;
    }
    t.validity_level = level(t.min_validity);
    const int v = t.validity_level, c = t.consistency_level;
    if (v == 2 && c == 2) t.label = Label::VC;
    else if (v >= 1 && c >= 1) t.label = Label::NearVC;
    else if (v == 2) t.label = Label::VI;
    else if (v == 1) t.label = Label::NearVI;
    else if (c >= 1) t.label = Label::IC;
    else t.label = Label::II;
    return t;
}

// ── mediation ─────────────────────────────────────────────────────────────

Summary summarize(const std::vector<double>& values) {
    Summary s;
    if (values.empty()) return s;
    std::vector<double> v(values);
    std::sort(v.begin(), v.end());
    s.min = v.front();
    s.max = v.back();
    const std::size_t n = v.size();
    s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    return s;
}

std::vector<MediationRow> mediation_curve(const ErrorRecords& records) {
    std::vector<MediationRow> out;
    for (const char* axis : {"distance", "mediators"}) {
        std::map<std::size_t, std::pair<std::vector<double>, std::size_t>> buckets;
        for (const auto& q : records.quantities) {
            if (q.eta.empty()) continue;
            const std::size_t b = std::string(axis) == "distance" ? q.stats.shortest_path_length : q.stats.mediator_count;
            auto& [vals, pairs] = buckets[b];
            vals.insert(vals.end(), q.eta.begin(), q.eta.end());
            ++pairs;
        }
        for (const auto& [b, data] : buckets) {
            const Summary s = summarize(data.first);
            out.push_back({axis, b, s.mean, s.std, data.second, data.first.size()});
        }
    }
    return out;
}

// ── report ────────────────────────────────────────────────────────────────

namespace {

nlohmann::json summary_json(const std::vector<double>& v) {
    if (v.empty()) return nullptr;
    const Summary s = summarize(v);
    auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
    return {{"mean", num(s.mean)}, {"std", num(s.std)}, {"median", num(s.median)},
            {"min", num(s.min)},   {"max", num(s.max)}, {"n", v.size()}};
}

nlohmann::json series(const std::vector<double>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) a.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
    return a;
}

std::vector<double> read_series(const nlohmann::json& j) {
    std::vector<double> v;
    for (const auto& x : j) v.push_back(x.is_null() ? std::numeric_limits<double>::infinity() : x.get<double>());
    return v;
}

template <class T>
nlohmann::json opt(const std::optional<T>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> read_opt(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

} // namespace

nlohmann::json EvalReport::to_json() const {
    nlohmann::json qs = nlohmann::json::array(), cs = nlohmann::json::array(), med = nlohmann::json::array();
    for (const auto& q : records.quantities)
        qs.push_back({{"cause", q.pair.cause},
                      {"effect", q.pair.effect},
                      {"truth", opt(q.truth)},
                      {"excluded", q.excluded},
                      {"validity", opt(q.validity)},
                      {"shortest_path_length", q.stats.shortest_path_length},
                      {"mediator_count", q.stats.mediator_count},
                      {"estimate_summary", summary_json(q.estimates)},
                      {"eta_summary", summary_json(q.eta)},
                      {"estimates", series(q.estimates)},
                      {"eta", series(q.eta)}});
    for (const auto& c : records.compositions) {
        nlohmann::json path = nlohmann::json::array();
        for (const auto& p : c.path) path.push_back({p.cause, p.effect});
        cs.push_back({{"id", c.id},
                      {"path", path},
                      {"validity", opt(c.validity)},
                      {"consistency", c.consistency},
                      {"estimate_summary", summary_json(c.estimates)},
                      {"epsilon_summary", summary_json(c.epsilon)},
                      {"gamma_summary", summary_json(c.gamma)},
                      {"estimates", series(c.estimates)},
                      {"epsilon", series(c.epsilon)},
                      {"gamma", series(c.gamma)}});
    }
    for (const auto& m : mediation)
        med.push_back({{"axis", m.axis}, {"bucket", m.bucket}, {"mean_rae", m.mean_rae},
                       {"std_rae", m.std_rae}, {"pairs", m.pairs}, {"estimates", m.estimates}});
    return {{"task_id", task_id},   {"reasoner", reasoner},     {"config", config.to_json()},
            {"cct", cct.to_json()}, {"label", label.to_json()}, {"unknown_rate", unknown_rate},
            {"rounds", records.rounds}, {"quantities", qs},     {"compositions", cs},
            {"mediation", med}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
    try {
        EvalReport r;
        r.task_id = j.at("task_id").get<std::string>();
        r.reasoner = j.at("reasoner").get<std::string>();
        r.config = EvalConfig::from_json(j.at("config"));
        r.cct = Cct::from_chain(j.at("cct").at("chain").get<std::vector<std::string>>());
        r.label = TaxonomyLabel::from_json(j.at("label"));
        r.unknown_rate = j.at("unknown_rate").get<double>();
        r.records.rounds = j.at("rounds").get<std::size_t>();
        for (const auto& jq : j.at("quantities")) {
            QuantityRecord q;
            q.pair = {jq.at("cause").get<std::string>(), jq.at("effect").get<std::string>()};
            q.truth = read_opt(jq, "truth");
            q.excluded = jq.at("excluded").get<bool>();
            q.validity = read_opt(jq, "validity");
            q.stats = {jq.at("shortest_path_length").get<std::size_t>(), jq.at("mediator_count").get<std::size_t>()};
            q.estimates = read_series(jq.at("estimates"));
            q.eta = read_series(jq.at("eta"));
            r.records.quantities.push_back(std::move(q));
        }
        for (const auto& jc : j.at("compositions")) {
            CompositionRecord c;
            c.id = jc.at("id").get<std::string>();
            for (const auto& p : jc.at("path")) c.path.push_back({p.at(0).get<std::string>(), p.at(1).get<std::string>()});
            c.validity = read_opt(jc, "validity");
            c.consistency = jc.at("consistency").get<double>();
            c.estimates = read_series(jc.at("estimates"));
            c.epsilon = read_series(jc.at("epsilon"));
            c.gamma = read_series(jc.at("gamma"));
            r.records.compositions.push_back(std::move(c));
        }
        for (const auto& jm : j.at("mediation"))
            r.mediation.push_back({jm.at("axis").get<std::string>(), jm.at("bucket").get<std::size_t>(),
                                   jm.at("mean_rae").get<double>(), jm.at("std_rae").get<double>(),
                                   jm.at("pairs").get<std::size_t>(), jm.at("estimates").get<std::size_t>()});
        return r;
    } catch (const nlohmann::json::exception& ex) {
        throw StructuralError(std::string("bad report json: ") + ex.what());
    }
}

std::string EvalReport::estimates_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "quantity,kind,round,value\n";
    auto emit = [&](const std::string& id, const char* kind, const std::vector<double>& v) {
        for (std::size_t r = 0; r < v.size(); ++r) os << id << ',' << kind << ',' << r << ',' << v[r] << '\n';
    };
    for (const auto& q : records.quantities) {
        const std::string id = q.pair.cause + q.pair.effect;
        emit(id, "estimate", q.estimates);
        emit(id, "eta", q.eta);
    }
    for (const auto& c : records.compositions) {
        emit(c.id, "estimate", c.estimates);
        emit(c.id, "epsilon", c.epsilon);
        emit(c.id, "gamma", c.gamma);
    }
    return os.str();
}

EvalReport evaluate(const std::string& task_id, const std::string& reasoner, const Cct& cct,
                    const QuantityPlan& plan, const Dag& dag, const std::vector<RawResponse>& responses,
                    const std::map<NodePair, double>& truths, const EvalConfig& config) {
    EvalReport report;
    report.task_id = task_id;
    report.reasoner = reasoner;
    report.config = config;
    report.cct = cct;
    std::map<NodePair, std::vector<double>> estimates;
    double unknown = 0.0;
    for (const auto& pair : plan.all_pairs()) {
        auto d = subsample_pns(responses, pair, config);
        unknown += d.unknown_rate;
        estimates.emplace(pair, std::move(d.pns));
    }
    report.unknown_rate = unknown / static_cast<double>(plan.all_pairs().size());
    report.records = run_algorithm1(cct, plan, estimates, truths, dag, config);
    report.label = classify(report.records, config);
    report.mediation = mediation_curve(report.records);
    return report;
}

} // namespace ccr
