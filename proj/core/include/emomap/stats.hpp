#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emomap/atlas.hpp"
#include "emomap/corpus.hpp"
#include "emomap/mapping.hpp"

namespace emomap {

/// Activation count and intensity summary of one (region, group) cell.
struct RegionGroupStats {
    std::string region;
    std::string group;
    std::size_t activation_count = 0;
    std::optional<double> mean_intensity;  // over chunks; empty when count == 0
    /// One value per contributing document: the mean intensity of that
    /// document's chunks in this region, in first-appearance order.
    std::vector<double> intensity_samples;
    std::vector<std::string> sample_docs;
};

/// Builds the full region x group grid. `regions` fixes the row order
/// (typically atlas order); `groups` fixes group order and defaults to
/// first appearance in `chunks`. Throws ValidationError when the three
/// inputs are not aligned by chunk reference or a label names a region
/// outside `regions`.
std::vector<RegionGroupStats> aggregate_regions(const std::vector<LabeledChunk>& labeled,
                                                const std::vector<double>& intensities,
                                                const std::vector<TextChunk>& chunks,
                                                const std::vector<std::string>& regions,
                                                std::vector<std::string> groups = {});

struct SystemTotal {
    BrainSystem system;
    std::string group;
    std::size_t activation_count = 0;
};

/// Activation totals per (system, group), systems in canonical order.
/// Throws ValidationError for a region missing from the atlas.
std::vector<SystemTotal> system_rollup(const std::vector<RegionGroupStats>& stats, const Atlas& atlas);

enum class PValueMethod { automatic, exact, normal };

/// Largest C(n_a + n_b, n_a) for which the automatic method enumerates.
inline constexpr std::size_t kExactEnumerationLimit = 10000;
/// Largest n_a + n_b for which the automatic method enumerates.
inline constexpr std::size_t kExactTotalLimit = 12;

struct MannWhitneyResult {
    double u_statistic = 0.0;  // U of the first sample
    double p_value = 1.0;      // two-sided, in (0, 1]
    bool significant = false;  // p_value < alpha
    bool exact = false;
    std::size_t n_a = 0;
    std::size_t n_b = 0;
};

/// Two-sided Mann-Whitney U test with midranks for ties.
///
/// U_a = R_a - n_a(n_a + 1)/2. The exact p-value enumerates every
/// assignment of the pooled (tied) ranks to the first sample and counts
/// those at least as far from n_a n_b / 2 as the observed U. The normal
/// approximation uses the tie-corrected variance and a 0.5 continuity
/// correction. Throws ValidationError for an empty sample.
MannWhitneyResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b, double alpha = 0.05,
                                 PValueMethod method = PValueMethod::automatic);

std::size_t binomial(std::size_t n, std::size_t k);

/// One row of a between-group comparison table.
struct RegionComparison {
    std::string region;
    std::optional<double> mean_a;
    std::optional<double> mean_b;
    std::size_t count_a = 0;
    std::size_t count_b = 0;
    /// Empty when either group has no samples in the region.
    std::optional<MannWhitneyResult> test;
    std::optional<double> p_bonferroni;

    bool significant() const { return test && test->significant; }
};

/// Per-region comparison of two groups' intensity samples, in the row
/// order of `stats`. The Bonferroni column multiplies by the number of
/// tested regions. Throws ValidationError when a group is absent.
std::vector<RegionComparison> compare_groups(const std::vector<RegionGroupStats>& stats, const std::string& group_a,
                                             const std::string& group_b, double alpha = 0.05,
                                             PValueMethod method = PValueMethod::automatic);

/// Same, for two independently produced stats tables over one region set.
std::vector<RegionComparison> compare_groups(const std::vector<RegionGroupStats>& stats_a,
                                             const std::vector<RegionGroupStats>& stats_b, double alpha = 0.05,
                                             PValueMethod method = PValueMethod::automatic);

enum class Valence { positive, negative, ambiguous, neutral, unmapped };

std::string_view to_string(Valence v);
Valence parse_valence(std::string_view s);

using ValenceMap = std::map<std::string, Valence, std::less<>>;

/// Reads a `label,valence` CSV. Throws ParseError on unknown valences.
ValenceMap load_valence_map(const std::string& path);

struct EmotionIntensityReport {
    std::string label;
    double mean_intensity = 0.0;
    std::size_t chunk_count = 0;
    Valence valence = Valence::unmapped;
};

/// Mean chunk intensity per emotion label, sorted by mean descending
/// (ties alphabetical). Unlabelled chunks are ignored; labels absent from
/// the valence map are reported as unmapped.
std::vector<EmotionIntensityReport> emotion_report(const std::vector<TextChunk>& chunks,
                                                   const std::vector<double>& intensities, const ValenceMap& valence);

struct ValenceSummary {
    Valence valence;
    double mean_intensity = 0.0;
    std::size_t chunk_count = 0;
};

/// Chunk-weighted mean intensity per valence class.
std::vector<ValenceSummary> valence_summary(const std::vector<TextChunk>& chunks, const std::vector<double>& intensities,
                                            const ValenceMap& valence);

}  // namespace emomap
