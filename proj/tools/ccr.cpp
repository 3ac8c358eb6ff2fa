#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ccr/errors.hpp"
#include "ccr/estimands.hpp"
#include "ccr/evaluator.hpp"
#include "ccr/reasoner.hpp"
#include "ccr/report.hpp"
#include "ccr/simulate.hpp"
#include "ccr/task_gen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// JSON config file: nested objects map onto subcommands, leaves onto options
// named by their long flag without dashes.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App*, bool, bool, std::string) const override {
        throw CLI::ConversionError("writing JSON config is not supported");
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& ex) {
            throw CLI::ConversionError(std::string("config file: ") + ex.what());
        }
        std::vector<CLI::ConfigItem> items;
        flatten(j, {}, items);
        return items;
    }

private:
    static std::string scalar(const json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        return v.dump();
    }

    static void flatten(const json& j, std::vector<std::string> parents, std::vector<CLI::ConfigItem>& out) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it.value().is_object()) {
                auto p = parents;
                p.push_back(it.key());
                flatten(it.value(), p, out);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = it.key();
            if (it.value().is_array())
                for (const auto& v : it.value()) item.inputs.push_back(scalar(v));
            else
                item.inputs.push_back(scalar(it.value()));
            out.push_back(std::move(item));
        }
    }
};

json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ccr::StructuralError("cannot open " + p.string());
    try {
        return json::parse(in);
    } catch (const json::exception& ex) {
        throw ccr::StructuralError(p.string() + ": " + ex.what());
    }
}

void write_text(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw ccr::StructuralError("cannot write " + p.string());
    out << text;
}

std::vector<ccr::QueryInstance> read_corpus(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ccr::StructuralError("cannot open " + p.string());
    std::vector<ccr::QueryInstance> out;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) {
            try {
                out.push_back(ccr::QueryInstance::from_json(json::parse(line)));
            } catch (const json::exception& ex) {
                throw ccr::StructuralError(p.string() + ": " + ex.what());
            }
        }
    return out;
}

std::map<ccr::NodePair, double> read_truths(const fs::path& p) {
    std::map<ccr::NodePair, double> out;
    const json doc = read_json(p);
    for (const auto& t : doc.at("pairs")) {
        const auto pt = ccr::PairTruth::from_json(t);
        out[pt.pair] = pt.pns;
    }
    return out;
}

// ── generate ──────────────────────────────────────────────────────────────

struct GenerateArgs {
    std::size_t bccs = 3;
    std::size_t nodes_per_bcc = 4;
    std::string bcc_type = "cycle";
    std::string theme = "CandyParty";
    std::uint64_t seed = 0;
    std::string fixture;
    std::size_t samples = 1000;
    bool cot = false;
    std::string out_root = "runs";
};

void cmd_generate(const GenerateArgs& a) {
    ccr::TaskSpec task = [&] {
        if (!a.fixture.empty()) return ccr::fixture_task(a.fixture);
        ccr::GenConfig g;
        g.n_bccs = a.bccs;
        g.nodes_per_bcc = a.nodes_per_bcc;
        g.bcc_type = ccr::parse_bcc_type(a.bcc_type);
        g.theme = ccr::parse_theme(a.theme);
        g.seed = a.seed;
        return ccr::gen_task(ccr::gen_dag(g), g.theme, a.seed);
    }();
    const fs::path dir = fs::path(a.out_root) / task.task_id;
    fs::create_directories(dir);
    write_text(dir / "task.json", task.to_json().dump(2) + "\n");
    std::ostringstream corpus;
    for (const auto& q : ccr::generate_corpus(task, {a.samples, a.seed, a.cot, true})) corpus << q.to_json().dump() << '\n';
    write_text(dir / "corpus.jsonl", corpus.str());

    ccr::RunManifest m(dir / "manifest.json");
    m.set_task(task.task_id);
    m.record("generate",
             {{"bccs", a.bccs}, {"nodes_per_bcc", a.nodes_per_bcc}, {"bcc_type", a.bcc_type}, {"theme", a.theme},
              {"seed", a.seed}, {"fixture", a.fixture}, {"samples", a.samples}, {"cot", a.cot}},
             {}, {dir / "task.json", dir / "corpus.jsonl"});
    m.save();
    std::cout << json{{"task_id", task.task_id}, {"dir", dir.string()}}.dump() << '\n';
}

// ── truth ─────────────────────────────────────────────────────────────────

void cmd_truth(const fs::path& dir) {
    ccr::RunManifest m(dir / "manifest.json");
    m.require_unchanged({dir / "task.json"});
    const auto task = ccr::TaskSpec::from_json(read_json(dir / "task.json"));
    json pairs = json::array();
    for (const auto& t : ccr::exact_truths(task.scm, task.plan.all_pairs())) pairs.push_back(t.to_json());
    json doc{{"task_id", task.task_id}, {"method", "exact enumeration"}, {"pairs", pairs}};
    write_text(dir / "truths.json", doc.dump(2) + "\n");
    m.record("truth", json::object(), {dir / "task.json"}, {dir / "truths.json"});
    m.save();
}

// ── run ───────────────────────────────────────────────────────────────────

struct RunArgs {
    std::string dir;
    std::string reasoner = "oracle";
    std::size_t replicates = 5;
    std::size_t concurrency = 4;
    std::uint64_t seed = 0;
    bool resume = false;
    double wrong_leak = 0.1;
    double flip = 0.15;
    std::size_t min_mediators = 2;
    double flip_per_mediator = 0.0;
    std::string endpoint;
    std::string model;
    std::string endpoint_config;
    double temperature = 1.0;
    int max_tokens = 512;
    std::string api_key_env = "OPENAI_API_KEY";
    bool extraction_fallback = false;
};

void cmd_run(const RunArgs& a) {
    const fs::path dir = a.dir;
    ccr::RunManifest m(dir / "manifest.json");
    m.require_unchanged({dir / "task.json", dir / "corpus.jsonl"});
    const auto task = ccr::TaskSpec::from_json(read_json(dir / "task.json"));
    const auto corpus = read_corpus(dir / "corpus.jsonl");

    std::unique_ptr<ccr::Reasoner> r;
    json rc{{"reasoner", a.reasoner}, {"seed", a.seed}};
    if (a.reasoner == "oracle") {
        r = std::make_unique<ccr::OracleReasoner>(task.scm, a.replicates);
    } else if (a.reasoner == "wrong-model") {
        std::vector<double> noise = task.scm.noise();
        for (ccr::NodeIndex i = 0; i < noise.size(); ++i)
            if (!task.scm.dag().parents(i).empty()) noise[i] = a.wrong_leak;
        r = std::make_unique<ccr::WrongModelReasoner>(task.scm, task.scm.with_noise(noise), a.replicates);
        rc["wrong_leak"] = a.wrong_leak;
    } else if (a.reasoner == "noisy") {
        const double flip = a.flip, per = a.flip_per_mediator;
        const std::size_t min_m = a.min_mediators;
        auto policy = ccr::FlipPolicy::by_mediators(task.scm.dag(), task.plan.all_pairs(), [=](std::size_t med) {
            return per > 0 ? std::min(1.0, per * static_cast<double>(med)) : (med >= min_m ? flip : 0.0);
        });
        rc["flip_policy"] = policy.to_json();
        r = std::make_unique<ccr::NoisyReasoner>(task.scm, std::move(policy), a.replicates);
    } else if (a.reasoner == "remote") {
        ccr::RemoteConfig cfg;
        if (!a.endpoint_config.empty()) cfg = ccr::RemoteConfig::from_json(read_json(a.endpoint_config));
        if (!a.endpoint.empty()) cfg.base_url = a.endpoint;
        if (!a.model.empty()) cfg.model = a.model;
        cfg.temperature = a.temperature;
        cfg.max_tokens = a.max_tokens;
        cfg.api_key_env = a.api_key_env;
        cfg.replicates = a.replicates;
        cfg.extraction_fallback = a.extraction_fallback;
        rc["endpoint"] = cfg.to_json();
        r = std::make_unique<ccr::RemoteReasoner>(cfg);
    } else {
        throw ccr::ConfigError("unknown reasoner '" + a.reasoner + "'");
    }
    if (a.resume) { // stored answers must come from the same reasoner
        std::string last;
        for (const auto& e : m.json()["entries"])
            if (e["step"].get<std::string>().rfind("run", 0) == 0) last = e["config"].value("reasoner", "");
        if (!last.empty() && last != a.reasoner)
            throw ccr::ConfigError("cannot resume: stored responses come from reasoner '" + last + "'");
    }
    ccr::BatchOptions opt;
    opt.concurrency = a.concurrency;
    opt.seed = a.seed;
    opt.store = dir / "responses.jsonl";
    opt.resume = a.resume;
    const auto result = ccr::run_batch(*r, corpus, opt);
    rc["replicates"] = a.replicates;
    m.record(a.resume ? "run (resumed)" : "run", rc, {dir / "task.json", dir / "corpus.jsonl"},
             {dir / "responses.jsonl"});
    m.save();
    std::cout << json{{"responses", result.responses.size()}, {"reused", result.reused}, {"unknown", result.unknown}}.dump()
              << '\n';
}

// ── evaluate ──────────────────────────────────────────────────────────────

struct EvaluateArgs {
    std::string dir;
    std::size_t exogenous_sets = 0; // 0: infer from responses
    std::size_t replicates = 0;
    std::size_t subsamples = 1000;
    double delta = 0.1;
    double valid = 0.9;
    double near_valid = 0.75;
    double max_unknown = 0.05;
    std::uint64_t seed = 0;
    bool no_truth = false;
};

void cmd_evaluate(const EvaluateArgs& a) {
    const fs::path dir = a.dir;
    ccr::RunManifest m(dir / "manifest.json");
    std::vector<fs::path> inputs{dir / "task.json", dir / "responses.jsonl"};
    if (!a.no_truth) inputs.push_back(dir / "truths.json");
    m.require_unchanged(inputs);
    const auto task = ccr::TaskSpec::from_json(read_json(dir / "task.json"));
    const auto responses = ccr::load_responses(dir / "responses.jsonl");
    const auto truths = a.no_truth ? std::map<ccr::NodePair, double>{} : read_truths(dir / "truths.json");

    ccr::EvalConfig cfg;
    std::size_t max_sample = 0, max_rep = 0;
    for (const auto& r : responses) {
        max_sample = std::max(max_sample, r.sample_id + 1);
        max_rep = std::max(max_rep, r.replicate + 1);
    }
    cfg.n_exogenous_sets = a.exogenous_sets ? a.exogenous_sets : max_sample;
    cfg.replicates = a.replicates ? a.replicates : max_rep;
    cfg.n_subsamples = a.subsamples;
    cfg.rae_threshold = a.delta;
    cfg.validity_fraction = a.valid;
    cfg.near_valid_fraction = a.near_valid;
    cfg.max_unknown_rate = a.max_unknown;
    cfg.seed = a.seed;
    cfg.validate();

    std::string reasoner = "unknown";
    for (const auto& e : m.json()["entries"])
        if (e["step"].get<std::string>().rfind("run", 0) == 0) reasoner = e["config"].value("reasoner", reasoner);

    const auto report = ccr::evaluate(task.task_id, reasoner, task.cct, task.plan, task.scm.dag(), responses, truths, cfg);
    write_text(dir / "report.json", report.to_json().dump(2) + "\n");
    write_text(dir / "estimates.csv", report.estimates_csv());
    const auto plots = ccr::export_plot_data(report);
    plots.write(dir / "plots");
    m.record("evaluate", cfg.to_json(), inputs,
             {dir / "report.json", dir / "estimates.csv", dir / "plots" / "quadrant.csv",
              dir / "plots" / "validity.csv", dir / "plots" / "mediation.csv", dir / "plots" / "schema.json"});
    m.save();
    std::cout << json{{"label", ccr::to_string(report.label.label)},
                      {"min_validity", report.label.min_validity},
                      {"min_consistency", report.label.min_consistency}}
                     .dump()
              << '\n';
}

// ── viz ───────────────────────────────────────────────────────────────────

void cmd_viz(const fs::path& dir, const std::vector<std::string>& colors) {
    ccr::RunManifest m(dir / "manifest.json");
    m.require_unchanged({dir / "report.json"});
    const auto report = ccr::EvalReport::from_json(read_json(dir / "report.json"));
    ccr::DotStyle style;
    if (!colors.empty()) style.path_colors = colors;
    write_text(dir / "cct.dot", ccr::export_cct_dot(report, style));
    m.record("viz", {{"path_colors", style.path_colors}}, {dir / "report.json"}, {dir / "cct.dot"});
    m.save();
}

// ── simulate ──────────────────────────────────────────────────────────────

struct SimArgs {
    std::vector<std::size_t> sizes{100, 1000, 10000, 100000};
    std::vector<std::uint64_t> seeds{0};
    std::string out;
    std::string fixture = "candyparty-fig4";
    double coefficient = 1.5;
    bool edge_x5x6 = false;
};

void emit(const SimArgs& a, const std::vector<ccr::SimRow>& rows) {
    const std::string csv = ccr::to_csv(rows);
    if (a.out.empty()) std::cout << csv;
    else write_text(a.out, csv);
}

void cmd_simulate(const std::string& kind, const SimArgs& a) {
    std::vector<ccr::SimRow> rows;
    if (kind == "linear-ate") {
        for (auto s : a.seeds) {
            auto r = ccr::simulate_linear_ate(a.edge_x5x6, a.sizes, s);
            rows.insert(rows.end(), r.begin(), r.end());
        }
        emit(a, rows);
        return;
    }
    auto task = ccr::fixture_task(a.fixture);
    ccr::BoolScm scm = task.scm;
    if (kind == "pns-deductive") // deductive runs use conjunctive mechanisms
        scm = ccr::BoolScm(scm.dag(), std::vector<ccr::Mechanism>(scm.dag().size(), ccr::Mechanism::And), scm.noise());
    const auto linear = ccr::linear_version(scm.dag(), a.coefficient);
    for (auto n : a.sizes)
        for (auto s : a.seeds) {
            std::vector<ccr::SimRow> r;
            if (kind == "pns-inductive") r = ccr::pns_inductive(scm, task.cct, n, s);
            else if (kind == "pns-deductive") r = ccr::pns_deductive(scm, task.cct, n, s);
            else if (kind == "ate-inductive") r = ccr::ate_inductive(linear, task.cct, n, s);
            else if (kind == "ate-deductive") r = ccr::ate_deductive(linear, task.cct, n, s);
            rows.insert(rows.end(), r.begin(), r.end());
        }
    emit(a, rows);
}

int exit_code(ccr::ErrorKind k) {
    switch (k) {
    case ccr::ErrorKind::Transport: return 3;
    case ccr::ErrorKind::DataQuality: return 4;
    default: return 2;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compositional causal reasoning: task generation, scoring and reports"};
    app.config_formatter(std::make_shared<JsonConfig>());
    app.set_config("--config", "", "JSON file mirroring the command-line flags; flags take precedence");
    app.require_subcommand(1);

    GenerateArgs ga;
    auto* gen = app.add_subcommand("generate", "Generate a task and its prompt corpus");
    gen->add_option("--bccs", ga.bccs, "Number of biconnected components")->capture_default_str();
    gen->add_option("--nodes-per-bcc", ga.nodes_per_bcc, "Nodes per component")->capture_default_str();
    gen->add_option("--bcc-type", ga.bcc_type, "cycle or wheel")->capture_default_str();
    gen->add_option("--theme", ga.theme, "CandyParty or FlowerGarden")->capture_default_str();
    gen->add_option("--seed", ga.seed, "Random seed")->capture_default_str();
    gen->add_option("--fixture", ga.fixture, "Named fixture (candyparty-fig4, taxonomy)");
    gen->add_option("--samples", ga.samples, "Exogenous draws per pair")->capture_default_str();
    gen->add_flag("--cot", ga.cot, "Wrap prompts with the two worked exemplars");
    gen->add_option("--out-root", ga.out_root, "Parent directory of run directories")->capture_default_str();

    std::string truth_dir;
    auto* truth = app.add_subcommand("truth", "Exact estimands for the quantity plan");
    truth->add_option("--dir", truth_dir, "Run directory")->required();

    RunArgs ra;
    auto* run = app.add_subcommand("run", "Collect reasoner answers for the corpus");
    run->add_option("--dir", ra.dir, "Run directory")->required();
    run->add_option("--reasoner", ra.reasoner, "oracle, wrong-model, noisy or remote")->capture_default_str();
    run->add_option("--replicates", ra.replicates, "Answers per question")->capture_default_str();
    run->add_option("--concurrency", ra.concurrency, "Requests in flight")->capture_default_str();
    run->add_option("--seed", ra.seed, "Random seed")->capture_default_str();
    run->add_flag("--resume", ra.resume, "Keep stored responses and fetch only the missing ones");
    run->add_option("--wrong-leak", ra.wrong_leak, "wrong-model: leak used for every non-root node")->capture_default_str();
    run->add_option("--flip", ra.flip, "noisy: flip probability on long-range pairs")->capture_default_str();
    run->add_option("--min-mediators", ra.min_mediators, "noisy: mediators needed before flipping")->capture_default_str();
    run->add_option("--flip-per-mediator", ra.flip_per_mediator, "noisy: flip = value x mediators (overrides --flip)");
    run->add_option("--endpoint", ra.endpoint, "remote: base URL, e.g. https://api.openai.com/v1");
    run->add_option("--model", ra.model, "remote: model name");
    run->add_option("--endpoint-config", ra.endpoint_config, "remote: JSON endpoint config");
    run->add_option("--temperature", ra.temperature, "remote: sampling temperature")->capture_default_str();
    run->add_option("--max-tokens", ra.max_tokens, "remote: completion budget")->capture_default_str();
    run->add_option("--api-key-env", ra.api_key_env, "remote: environment variable holding the key")->capture_default_str();
    run->add_flag("--extraction-fallback", ra.extraction_fallback, "remote: ask the model when rules are inconclusive");

    EvaluateArgs ea;
    auto* eval = app.add_subcommand("evaluate", "Score responses and classify the reasoner");
    eval->add_option("--dir", ea.dir, "Run directory")->required();
    eval->add_option("--exogenous-sets", ea.exogenous_sets, "Samples per pair (default: inferred)");
    eval->add_option("--replicates", ea.replicates, "Replicates per question (default: inferred)");
    eval->add_option("--subsamples", ea.subsamples, "Subsampling rounds")->capture_default_str();
    eval->add_option("--delta", ea.delta, "RAE threshold")->capture_default_str();
    eval->add_option("--valid", ea.valid, "Fraction of rounds needed for validity")->capture_default_str();
    eval->add_option("--near-valid", ea.near_valid, "Fraction for near-validity")->capture_default_str();
    eval->add_option("--max-unknown", ea.max_unknown, "Tolerated UNKNOWN/missing rate")->capture_default_str();
    eval->add_option("--seed", ea.seed, "Subsampling seed")->capture_default_str();
    eval->add_flag("--no-truth", ea.no_truth, "Internal consistency only");

    std::string viz_dir;
    std::vector<std::string> colors;
    auto* viz = app.add_subcommand("viz", "Render the CCT with validity styling as DOT");
    viz->add_option("--dir", viz_dir, "Run directory")->required();
    viz->add_option("--path-colors", colors, "Overlay colours for valid paths");

    SimArgs sa;
    auto* sim = app.add_subcommand("simulate", "Finite-sample convergence simulations");
    sim->require_subcommand(1);
    std::string sim_kind;
    for (const char* k : {"linear-ate", "pns-inductive", "pns-deductive", "ate-inductive", "ate-deductive"}) {
        auto* s = sim->add_subcommand(k, std::string("Simulation: ") + k);
        s->add_option("--sizes", sa.sizes, "Sample sizes")->delimiter(',')->capture_default_str();
        s->add_option("--seeds", sa.seeds, "Seeds")->delimiter(',')->capture_default_str();
        s->add_option("--out", sa.out, "CSV path (default: stdout)");
        if (std::string(k) == "linear-ate") s->add_flag("--edge-x5x6", sa.edge_x5x6, "Add the X5 -> X6 edge");
        else s->add_option("--fixture", sa.fixture, "Fixture graph")->capture_default_str();
        if (std::string(k).rfind("ate-", 0) == 0)
            s->add_option("--coefficient", sa.coefficient, "Edge coefficient")->capture_default_str();
        s->callback([&sim_kind, k] { sim_kind = k; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
        return 2;
    }

    try {
        if (*gen) cmd_generate(ga);
        else if (*truth) cmd_truth(truth_dir);
        else if (*run) cmd_run(ra);
        else if (*eval) cmd_evaluate(ea);
        else if (*viz) cmd_viz(viz_dir, colors);
        else if (*sim) cmd_simulate(sim_kind, sa);
    } catch (const ccr::TransportError& e) {
        std::cerr << json{{"error", ccr::to_string(e.kind())}, {"message", e.what()}, {"query_id", e.query_id()}}.dump()
                  << '\n';
        return 3;
    } catch (const ccr::Error& e) {
        std::cerr << json{{"error", ccr::to_string(e.kind())}, {"message", e.what()}}.dump() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
    return 0;
}
