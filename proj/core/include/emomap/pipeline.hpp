#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emomap/corpus.hpp"
#include "emomap/embedding.hpp"
#include "emomap/lexicon.hpp"
#include "emomap/mapping.hpp"
#include "emomap/stats.hpp"

namespace emomap {

/// Directory holding the shipped atlases, lexicon and valence map.
/// EMOMAP_DATA_DIR in the environment overrides the built-in location.
std::filesystem::path default_data_dir();

/// "atlas18" / "atlas25" resolve to shipped files; anything else is a path.
std::filesystem::path resolve_atlas_path(const std::string& choice);

struct DatasetSpec {
    std::filesystem::path path;
    CorpusFormat format = CorpusFormat::csv;
    CorpusSchema schema;
};

enum class ProviderKind { offline, remote };

struct PipelineConfig {
    std::vector<DatasetSpec> datasets;
    ProviderKind provider = ProviderKind::offline;
    RemoteConfig remote;
    std::size_t max_parallel = 4;
    std::uint64_t seed = 42;
    std::size_t chunk_limit = kDefaultChunkLimit;
    std::size_t batch_size = kDefaultBatchSize;
    int restarts = 10;
    std::string atlas;  // "atlas18", "atlas25" or a path; required
    std::optional<std::filesystem::path> lexicon;      // shipped default when empty
    std::optional<std::filesystem::path> valence_map;  // shipped default when empty
    ModifierMode modifier_mode = ModifierMode::flat;
    bool rescale_to_atlas = false;
    double alpha = 0.05;
    std::optional<std::filesystem::path> cache;  // <output>/embeddings.cache when empty
    std::filesystem::path output;

    /// Throws ConfigError on any violated invariant (positive seed,
    /// chunk_limit and batch_size <= 2000, existing atlas file, at least one
    /// dataset, output set).
    void validate() const;

    nlohmann::json to_json() const;
};

/// Parses the JSON config format documented in docs/config.md. Relative
/// paths are resolved against `base_dir`. Throws ConfigError.
PipelineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

struct AnalyzeSummary {
    std::filesystem::path output;
    std::size_t documents = 0;
    std::size_t skipped_records = 0;
    std::size_t chunks = 0;
    std::size_t clusters = 0;
    EmbedStats embed;
};

/// Runs chunk -> embed -> reduce + score -> cluster -> map -> stats and
/// writes every artifact into config.output (see docs/outputs.md). A stage
/// failure is rethrown as StageError after a manifest marked "failed" is
/// written. `transport` overrides the HTTP client for the remote provider.
AnalyzeSummary run_analyze(const PipelineConfig& config, std::shared_ptr<HttpTransport> transport = nullptr);

struct CompareConfig {
    std::filesystem::path run_a;
    std::optional<std::filesystem::path> run_b;  // same run as A when empty
    std::optional<std::string> group_a;          // all groups pooled when empty
    std::optional<std::string> group_b;
    double alpha = 0.05;
    PValueMethod method = PValueMethod::automatic;
    std::filesystem::path output;
};

struct CompareSummary {
    std::vector<RegionComparison> rows;
    std::string label_a;
    std::string label_b;
    std::filesystem::path output;
};

/// Loads region stats from analyze output(s), runs the per-region
/// Mann-Whitney comparison and writes comparison.csv/.json,
/// system_comparison.csv and activation_counts.csv. Throws ValidationError on
/// an atlas mismatch between the two runs.
CompareSummary run_compare(const CompareConfig& config);

/// Reads region_stats.json of an analyze run.
std::vector<RegionGroupStats> load_region_stats(const std::filesystem::path& run_dir);

/// "superior_temporal_left" -> "Superior Temporal Left".
std::string display_region_name(const std::string& canonical);

/// Writes the per-region comparison table (Region, means, U, p, Significant, ...).
void write_comparison_csv(std::ostream& out, const std::vector<RegionComparison>& rows, const std::string& label_a,
                          const std::string& label_b);

/// Checks every known artifact present in `dir` against its schema.
/// Returns the list of problems (empty when valid).
std::vector<std::string> validate_outputs(const std::filesystem::path& dir);

}  // namespace emomap
