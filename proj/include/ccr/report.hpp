#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccr/evaluator.hpp"

namespace ccr {

// ── DOT ───────────────────────────────────────────────────────────────────

struct DotStyle {
    std::string valid_color = "black";
    std::string invalid_color = "gray70";
    // One overlay colour per valid path, cycled.
    std::vector<std::string> path_colors{"#e6194b", "#3cb44b", "#4363d8", "#f58231",
                                         "#911eb4", "#42d4f4", "#f032e6", "#9a6324"};
};

// Valid quantities as black edges, invalid as gray. Each externally valid
// path gets a coloured overlay; nodes are black when every path through
// them is valid.
std::string export_cct_dot(const EvalReport& report, const DotStyle& style = {});

// ── plot data ─────────────────────────────────────────────────────────────

struct PlotBundle {
    std::string quadrant_csv;  // composition,round,internal_rae,external_rae
    std::string validity_csv;  // quantity,kind,validity,consistency,threshold
    std::string mediation_csv; // axis,bucket,mean_rae,std_rae,pairs,estimates
    nlohmann::json schema;

    void write(const std::filesystem::path& dir) const;
};

PlotBundle export_plot_data(const EvalReport& report);

// ── manifest ──────────────────────────────────────────────────────────────

std::string sha256_file(const std::filesystem::path& path);
std::string utc_timestamp();

// Append-only run log. Each artifact write appends an entry; verify()
// compares the latest hash of every artifact against the file on disk.
class RunManifest {
public:
    explicit RunManifest(std::filesystem::path path);

    const std::filesystem::path& path() const noexcept { return path_; }
    const nlohmann::json& json() const noexcept { return doc_; }

    void set_task(const std::string& task_id);
    void record(const std::string& step, const nlohmann::json& config,
                const std::vector<std::filesystem::path>& inputs,
                const std::vector<std::filesystem::path>& outputs);

    // Names of artifacts whose content no longer matches the recorded hash.
    std::vector<std::string> verify() const;
    // Throws StructuralError when any of the given files was edited since it was recorded.
    void require_unchanged(const std::vector<std::filesystem::path>& files) const;

    void save() const;

private:
    std::filesystem::path path_;
    nlohmann::json doc_;

    std::string key(const std::filesystem::path& p) const;
};

} // namespace ccr
