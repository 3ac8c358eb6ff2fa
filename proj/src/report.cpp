#include "ccr/report.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "ccr/errors.hpp"

namespace ccr {

// ── DOT ───────────────────────────────────────────────────────────────────

namespace {

bool is_valid(const std::optional<double>& fraction, double needed) { return fraction && *fraction >= needed; }

std::string quote(const std::string& s) { return "\"" + s + "\""; }

} // namespace

std::string export_cct_dot(const EvalReport& report, const DotStyle& style) {
    const Cct& cct = report.cct;
    const double needed = report.config.validity_fraction;
    std::map<NodePair, bool> edge_ok;
    for (const auto& q : report.records.quantities) edge_ok[q.pair] = is_valid(q.validity, needed);

    // every root-to-leaf path with its validity; the direct path uses the global quantity
    struct Path {
        std::vector<NodePair> pairs;
        bool ok;
    };
    std::vector<Path> paths;
    for (const auto& p : enumerate_paths(cct)) {
        auto pairs = path_pairs(cct, p);
        bool ok;
        if (pairs.size() == 1) {
            ok = edge_ok[pairs[0]];
        } else {
            const auto id = composition_id(pairs);
            ok = false;
            for (const auto& c : report.records.compositions)
                if (c.id == id) ok = is_valid(c.validity, needed);
        }
        paths.push_back({std::move(pairs), ok});
    }

    std::ostringstream os;
    os << "digraph CCT {\n  rankdir=LR;\n  node [shape=circle, style=filled, fontcolor=white];\n";
    for (const auto& n : cct.chain) {
        bool all_ok = true;
        for (const auto& p : paths) {
            bool through = false;
            for (const auto& e : p.pairs) through = through || e.cause == n || e.effect == n;
            if (through && !p.ok) all_ok = false;
        }
        const auto& c = all_ok ? style.valid_color : style.invalid_color;
        os << "  " << quote(n) << " [fillcolor=" << quote(c) << ", color=" << quote(c) << "];\n";
    }
    for (auto [i, j] : cct.edges) {
        const NodePair p = cct.pair(i, j);
        const auto& c = edge_ok[p] ? style.valid_color : style.invalid_color;
        os << "  " << quote(p.cause) << " -> " << quote(p.effect) << " [color=" << quote(c) << ", penwidth=2];\n";
    }
    std::size_t k = 0;
    for (const auto& p : paths) {
        if (!p.ok) continue;
        const std::string& c = style.path_colors.empty() ? style.valid_color
                                                         : style.path_colors[k % style.path_colors.size()];
        std::string label;
        for (const auto& e : p.pairs) label += (label.empty() ? "" : "*") + e.cause + e.effect;
        for (const auto& e : p.pairs)
            os << "  " << quote(e.cause) << " -> " << quote(e.effect) << " [color=" << quote(c)
               << ", style=dashed, constraint=false, tooltip=" << quote(label) << "];\n";
        ++k;
    }
    os << "}\n";
    return os.str();
}

// ── plot data ─────────────────────────────────────────────────────────────

PlotBundle export_plot_data(const EvalReport& report) {
    PlotBundle b;
    auto num = [](double x) {
        std::ostringstream s;
        s.precision(12);
        if (std::isfinite(x)) s << x;
        else s << "inf";
        return s.str();
    };
    {
        std::ostringstream os;
        os << "composition,round,internal_rae,external_rae\n";
        for (const auto& c : report.records.compositions)
            for (std::size_t r = 0; r < c.gamma.size(); ++r)
                os << c.id << ',' << r << ',' << num(c.gamma[r]) << ','
                   << (r < c.epsilon.size() ? num(c.epsilon[r]) : std::string()) << '\n';
        b.quadrant_csv = os.str();
    }
    {
        std::ostringstream os;
        os << "quantity,kind,validity,consistency,threshold\n";
        for (const auto& q : report.records.quantities)
            os << q.pair.cause << q.pair.effect << ",pair," << (q.validity ? num(*q.validity) : std::string()) << ",,"
               << num(report.config.validity_fraction) << '\n';
        for (const auto& c : report.records.compositions)
            os << c.id << ",composition," << (c.validity ? num(*c.validity) : std::string()) << ','
               << num(c.consistency) << ',' << num(report.config.validity_fraction) << '\n';
        b.validity_csv = os.str();
    }
    {
        std::ostringstream os;
        os << "axis,bucket,mean_rae,std_rae,pairs,estimates\n";
        for (const auto& m : report.mediation)
            os << m.axis << ',' << m.bucket << ',' << num(m.mean_rae) << ',' << num(m.std_rae) << ',' << m.pairs
               << ',' << m.estimates << '\n';
        b.mediation_csv = os.str();
    }
    b.schema = {
        {"thresholds",
         {{"rae", report.config.rae_threshold},
          {"validity_fraction", report.config.validity_fraction},
          {"near_valid_fraction", report.config.near_valid_fraction}}},
        {"files",
         {{"quadrant.csv",
           {{"composition", "composition id, locals joined by *"},
            {"round", "subsample round"},
            {"internal_rae", "RAE against the same round's direct global estimate"},
            {"external_rae", "RAE against the exact global value; empty without ground truth"}}},
          {"validity.csv",
           {{"quantity", "pair (cause+effect) or composition id"},
            {"kind", "pair or composition"},
            {"validity", "fraction of rounds with external RAE within the threshold"},
            {"consistency", "fraction of rounds with internal RAE within the threshold (compositions only)"},
            {"threshold", "fraction needed to count as valid"}}},
          {"mediation.csv",
           {{"axis", "distance (shortest hops) or mediators (nodes on any directed path)"},
            {"bucket", "axis value"},
            {"mean_rae", "mean external RAE over all estimates in the bucket"},
            {"std_rae", "sample standard deviation of those RAEs"},
            {"pairs", "pairs in the bucket"},
            {"estimates", "estimates in the bucket"}}}}}};
    return b;
}

void PlotBundle::write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "quadrant.csv") << quadrant_csv;
    std::ofstream(dir / "validity.csv") << validity_csv;
    std::ofstream(dir / "mediation.csv") << mediation_csv;
    std::ofstream(dir / "schema.json") << schema.dump(2) << '\n';
}

// ── manifest ──────────────────────────────────────────────────────────────

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StructuralError("cannot read " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw NumericalError("sha256 initialisation failed");
    }
    char buf[1 << 15];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

RunManifest::RunManifest(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) {
        std::ifstream in(path_);
        try {
            doc_ = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& ex) {
            throw StructuralError("bad manifest " + path_.string() + ": " + ex.what());
        }
    } else {
        doc_ = {{"task_id", nullptr}, {"entries", nlohmann::json::array()}};
    }
}

void RunManifest::set_task(const std::string& task_id) {
    if (!doc_["task_id"].is_null() && doc_["task_id"] != task_id)
        throw StructuralError("manifest belongs to task " + doc_["task_id"].get<std::string>());
    doc_["task_id"] = task_id;
}

std::string RunManifest::key(const std::filesystem::path& p) const {
    const auto base = path_.parent_path();
    std::error_code ec;
    auto rel = std::filesystem::relative(p, base.empty() ? "." : base, ec);
    return (ec || rel.empty() ? p : rel).generic_string();
}

void RunManifest::record(const std::string& step, const nlohmann::json& config,
                         const std::vector<std::filesystem::path>& inputs,
                         const std::vector<std::filesystem::path>& outputs) {
    nlohmann::json in = nlohmann::json::object(), out = nlohmann::json::object();
    for (const auto& p : inputs) in[key(p)] = sha256_file(p);
    for (const auto& p : outputs) out[key(p)] = sha256_file(p);
    doc_["entries"].push_back({{"step", step}, {"timestamp", utc_timestamp()}, {"config", config},
                               {"inputs", in}, {"outputs", out}});
}

std::vector<std::string> RunManifest::verify() const {
    std::map<std::string, std::string> latest;
    for (const auto& e : doc_["entries"])
        for (auto it = e["outputs"].begin(); it != e["outputs"].end(); ++it) latest[it.key()] = it.value();
    const auto base = path_.parent_path();
    std::vector<std::string> bad;
    for (const auto& [name, hash] : latest) {
        const auto file = base / name;
        if (!std::filesystem::exists(file) || sha256_file(file) != hash) bad.push_back(name);
    }
    return bad;
}

void RunManifest::require_unchanged(const std::vector<std::filesystem::path>& files) const {
    const auto bad = verify();
    for (const auto& f : files) {
        const auto k = key(f);
        if (std::find(bad.begin(), bad.end(), k) != bad.end())
            throw StructuralError(k + " was modified after it was recorded in the manifest");
    }
}

void RunManifest::save() const {
    const auto tmp = path_.string() + ".tmp";
    std::ofstream(tmp) << doc_.dump(2) << '\n';
    std::filesystem::rename(tmp, path_);
}

} // namespace ccr
