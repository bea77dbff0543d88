#include "emomap/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "emomap/csv.hpp"
#include "emomap/error.hpp"
#include "emomap/text.hpp"

namespace emomap {

namespace {

// Combinations enumerated when the caller forces the exact method.
constexpr std::size_t kForcedExactLimit = 50'000'000;

struct PooledRanks {
    std::vector<std::int64_t> doubled;  // 2 x midrank, indexed like the pooled sample
    double tie_term = 0.0;              // sum of t^3 - t over tie groups
};

PooledRanks rank_pooled(const std::vector<double>& pooled) {
    const std::size_t n = pooled.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return pooled[x] < pooled[y]; });
    PooledRanks out;
    out.doubled.resize(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
        // 1-based positions i+1 .. j+1 share the midrank (i + j + 2) / 2
        const auto dbl = static_cast<std::int64_t>(i + j + 2);
        for (std::size_t m = i; m <= j; ++m) out.doubled[order[m]] = dbl;
        const double t = static_cast<double>(j - i + 1);
        out.tie_term += t * t * t - t;
        i = j + 1;
    }
    return out;
}

double exact_p(const std::vector<std::int64_t>& doubled, std::size_t n_a, std::size_t n_b, std::int64_t observed_2u) {
    const std::size_t n = n_a + n_b;
    const auto center = static_cast<std::int64_t>(n_a * n_b);  // 2 x E[U]
    const std::int64_t dev_obs = std::llabs(observed_2u - center);
    const auto offset = static_cast<std::int64_t>(n_a * (n_a + 1));

    std::vector<std::size_t> idx(n_a);
    std::iota(idx.begin(), idx.end(), 0);
    std::uint64_t total = 0;
    std::uint64_t extreme = 0;
    while (true) {
        std::int64_t r2 = 0;
        for (auto k : idx) r2 += doubled[k];
        ++total;
        if (std::llabs(r2 - offset - center) >= dev_obs) ++extreme;

        // next combination in lexicographic order
        std::size_t pos = n_a;
        while (pos > 0 && idx[pos - 1] == n - n_a + (pos - 1)) --pos;
        if (pos == 0) break;
        ++idx[pos - 1];
        for (std::size_t k = pos; k < n_a; ++k) idx[k] = idx[k - 1] + 1;
    }
    return static_cast<double>(extreme) / static_cast<double>(total);
}

double normal_p(double u, std::size_t n_a, std::size_t n_b, double tie_term) {
    const double na = static_cast<double>(n_a);
    const double nb = static_cast<double>(n_b);
    const double n = na + nb;
    const double mean = na * nb / 2.0;
    double var = na * nb / 12.0 * (n + 1.0);
    if (n > 1.0) var -= na * nb / 12.0 * tie_term / (n * (n - 1.0));
    if (var <= 0.0) return 1.0;
    const double z = std::max(0.0, std::abs(u - mean) - 0.5) / std::sqrt(var);
    return std::erfc(z / std::sqrt(2.0));
}

}  // namespace

std::vector<RegionGroupStats> aggregate_regions(const std::vector<LabeledChunk>& labeled,
                                                const std::vector<double>& intensities,
                                                const std::vector<TextChunk>& chunks,
                                                const std::vector<std::string>& regions,
                                                std::vector<std::string> groups) {
    if (labeled.size() != intensities.size() || labeled.size() != chunks.size()) {
        throw ValidationError("aggregate_regions: misaligned inputs (" + std::to_string(labeled.size()) + " labels, " +
                              std::to_string(intensities.size()) + " intensities, " + std::to_string(chunks.size()) +
                              " chunks)");
    }
    if (groups.empty()) {
        for (const auto& c : chunks) {
            if (std::find(groups.begin(), groups.end(), c.group) == groups.end()) groups.push_back(c.group);
        }
    }
    std::unordered_map<std::string, std::size_t> region_idx, group_idx;
    for (std::size_t r = 0; r < regions.size(); ++r) region_idx.emplace(regions[r], r);
    for (std::size_t g = 0; g < groups.size(); ++g) group_idx.emplace(groups[g], g);

    struct DocAcc {
        double sum = 0.0;
        std::size_t n = 0;
    };
    struct Cell {
        double sum = 0.0;
        std::size_t count = 0;
        std::vector<std::string> docs;
        std::unordered_map<std::string, DocAcc> per_doc;
    };
    std::vector<Cell> cells(regions.size() * groups.size());

    for (std::size_t i = 0; i < labeled.size(); ++i) {
        const auto& ref = labeled[i].chunk_ref;
        if (ref.doc_id != chunks[i].doc_id || ref.chunk_index != chunks[i].chunk_index) {
            throw ValidationError("aggregate_regions: chunk " + std::to_string(i) + " is misaligned (" + ref.doc_id +
                                  "#" + std::to_string(ref.chunk_index) + " vs " + chunks[i].doc_id + "#" +
                                  std::to_string(chunks[i].chunk_index) + ")");
        }
        auto r = region_idx.find(labeled[i].region);
        if (r == region_idx.end()) throw ValidationError("aggregate_regions: unknown region '" + labeled[i].region + "'");
        auto g = group_idx.find(chunks[i].group);
        if (g == group_idx.end()) continue;  // group not requested
        auto& cell = cells[r->second * groups.size() + g->second];
        cell.sum += intensities[i];
        ++cell.count;
        auto [it, fresh] = cell.per_doc.try_emplace(ref.doc_id);
        if (fresh) cell.docs.push_back(ref.doc_id);
        it->second.sum += intensities[i];
        ++it->second.n;
    }

    std::vector<RegionGroupStats> out;
    out.reserve(cells.size());
    for (std::size_t r = 0; r < regions.size(); ++r) {
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const auto& cell = cells[r * groups.size() + g];
            RegionGroupStats s;
            s.region = regions[r];
            s.group = groups[g];
            s.activation_count = cell.count;
            if (cell.count > 0) s.mean_intensity = cell.sum / static_cast<double>(cell.count);
            for (const auto& d : cell.docs) {
                const auto& acc = cell.per_doc.at(d);
                s.intensity_samples.push_back(acc.sum / static_cast<double>(acc.n));
                s.sample_docs.push_back(d);
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::vector<SystemTotal> system_rollup(const std::vector<RegionGroupStats>& stats, const Atlas& atlas) {
    std::vector<std::string> groups;
    for (const auto& s : stats) {
        if (std::find(groups.begin(), groups.end(), s.group) == groups.end()) groups.push_back(s.group);
    }
    std::vector<SystemTotal> out;
    for (auto sys : kAllSystems) {
        for (const auto& g : groups) out.push_back({sys, g, 0});
    }
    for (const auto& s : stats) {
        const auto sys = system_of(s.region, atlas);
        for (auto& t : out) {
            if (t.system == sys && t.group == s.group) t.activation_count += s.activation_count;
        }
    }
    return out;
}

std::size_t binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    constexpr auto kMax = std::numeric_limits<std::size_t>::max();
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) {
        const std::size_t g = std::gcd(r, i);
        const std::size_t factor = (n - k + i) / (i / g);
        r /= g;
        if (r > kMax / factor) return kMax;
        r *= factor;
    }
    return r;
}

MannWhitneyResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b, double alpha,
                                 PValueMethod method) {
    if (a.empty() || b.empty()) throw ValidationError("mann_whitney_u: both samples must be nonempty");
    for (double x : a) {
        if (!std::isfinite(x)) throw ValidationError("mann_whitney_u: non-finite value in first sample");
    }
    for (double x : b) {
        if (!std::isfinite(x)) throw ValidationError("mann_whitney_u: non-finite value in second sample");
    }
    MannWhitneyResult res;
    res.n_a = a.size();
    res.n_b = b.size();

    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = rank_pooled(pooled);
    std::int64_t r2 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) r2 += ranks.doubled[i];
    const auto u2 = r2 - static_cast<std::int64_t>(res.n_a * (res.n_a + 1));
    res.u_statistic = static_cast<double>(u2) / 2.0;

    const std::size_t combos = binomial(res.n_a + res.n_b, res.n_a);
    bool exact = false;
    switch (method) {
        case PValueMethod::automatic:
            exact = res.n_a + res.n_b <= kExactTotalLimit && combos <= kExactEnumerationLimit;
            break;
        case PValueMethod::exact:
            if (combos > kForcedExactLimit) {
                throw ValidationError("mann_whitney_u: exact enumeration of " + std::to_string(combos) +
                                      " assignments is too large");
            }
            exact = true;
            break;
        case PValueMethod::normal: exact = false; break;
    }
    res.exact = exact;
    double p = exact ? exact_p(ranks.doubled, res.n_a, res.n_b, u2)
                     : normal_p(res.u_statistic, res.n_a, res.n_b, ranks.tie_term);
    p = std::clamp(p, std::numeric_limits<double>::min(), 1.0);
    res.p_value = p;
    res.significant = p < alpha;
    return res;
}

namespace {

std::vector<RegionComparison> compare_cells(const std::vector<std::string>& regions,
                                            const std::vector<const RegionGroupStats*>& cells_a,
                                            const std::vector<const RegionGroupStats*>& cells_b, double alpha,
                                            PValueMethod method) {
    std::vector<RegionComparison> out;
    std::size_t tested = 0;
    for (std::size_t r = 0; r < regions.size(); ++r) {
        RegionComparison row;
        row.region = regions[r];
        const auto* a = cells_a[r];
        const auto* b = cells_b[r];
        if (a) {
            row.mean_a = a->mean_intensity;
            row.count_a = a->activation_count;
        }
        if (b) {
            row.mean_b = b->mean_intensity;
            row.count_b = b->activation_count;
        }
        if (a && b && !a->intensity_samples.empty() && !b->intensity_samples.empty()) {
            row.test = mann_whitney_u(a->intensity_samples, b->intensity_samples, alpha, method);
            ++tested;
        }
        out.push_back(std::move(row));
    }
    for (auto& row : out) {
        if (row.test) row.p_bonferroni = std::min(1.0, row.test->p_value * static_cast<double>(tested));
    }
    return out;
}

std::vector<std::string> region_order(const std::vector<RegionGroupStats>& stats) {
    std::vector<std::string> regions;
    for (const auto& s : stats) {
        if (regions.empty() || regions.back() != s.region) {
            if (std::find(regions.begin(), regions.end(), s.region) == regions.end()) regions.push_back(s.region);
        }
    }
    return regions;
}

const RegionGroupStats* find_cell(const std::vector<RegionGroupStats>& stats, const std::string& region,
                                  const std::string* group) {
    for (const auto& s : stats) {
        if (s.region == region && (group == nullptr || s.group == *group)) return &s;
    }
    return nullptr;
}

}  // namespace

std::vector<RegionComparison> compare_groups(const std::vector<RegionGroupStats>& stats, const std::string& group_a,
                                             const std::string& group_b, double alpha, PValueMethod method) {
    bool has_a = false, has_b = false;
    for (const auto& s : stats) {
        has_a = has_a || s.group == group_a;
        has_b = has_b || s.group == group_b;
    }
    if (!has_a) throw ValidationError("compare_groups: group '" + group_a + "' not present");
    if (!has_b) throw ValidationError("compare_groups: group '" + group_b + "' not present");
    const auto regions = region_order(stats);
    std::vector<const RegionGroupStats*> ca, cb;
    for (const auto& r : regions) {
        ca.push_back(find_cell(stats, r, &group_a));
        cb.push_back(find_cell(stats, r, &group_b));
    }
    return compare_cells(regions, ca, cb, alpha, method);
}

std::vector<RegionComparison> compare_groups(const std::vector<RegionGroupStats>& stats_a,
                                             const std::vector<RegionGroupStats>& stats_b, double alpha,
                                             PValueMethod method) {
    if (stats_a.empty() || stats_b.empty()) throw ValidationError("compare_groups: empty stats table");
    auto regions = region_order(stats_a);
    for (const auto& r : region_order(stats_b)) {
        if (std::find(regions.begin(), regions.end(), r) == regions.end()) regions.push_back(r);
    }
    std::vector<const RegionGroupStats*> ca, cb;
    for (const auto& r : regions) {
        ca.push_back(find_cell(stats_a, r, nullptr));
        cb.push_back(find_cell(stats_b, r, nullptr));
    }
    return compare_cells(regions, ca, cb, alpha, method);
}

std::string_view to_string(Valence v) {
    switch (v) {
        case Valence::positive: return "positive";
        case Valence::negative: return "negative";
        case Valence::ambiguous: return "ambiguous";
        case Valence::neutral: return "neutral";
        case Valence::unmapped: return "unmapped";
    }
    return "";
}

Valence parse_valence(std::string_view s) {
    if (s == "positive") return Valence::positive;
    if (s == "negative") return Valence::negative;
    if (s == "ambiguous") return Valence::ambiguous;
    if (s == "neutral") return Valence::neutral;
    throw ParseError("unknown valence '" + std::string(s) + "'");
}

ValenceMap load_valence_map(const std::string& path) {
    const auto records = csv::read_file(path);
    if (records.empty()) return {};
    const auto& header = records.front().fields;
    if (header.size() != 2 || text::trim(header[0]) != "label" || text::trim(header[1]) != "valence") {
        throw ParseError("'" + path + "': expected header label,valence");
    }
    ValenceMap out;
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& rec = records[i];
        const std::string where = path + ":" + std::to_string(rec.line);
        if (rec.malformed || rec.fields.size() != 2) throw ParseError(where + ": expected 2 fields");
        try {
            out[std::string(text::trim(rec.fields[0]))] = parse_valence(text::trim(rec.fields[1]));
        } catch (const ParseError& e) {
            throw ParseError(where + ": " + e.what());
        }
    }
    return out;
}

std::vector<EmotionIntensityReport> emotion_report(const std::vector<TextChunk>& chunks,
                                                   const std::vector<double>& intensities, const ValenceMap& valence) {
    if (chunks.size() != intensities.size()) throw ValidationError("emotion_report: misaligned inputs");
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (!chunks[i].label) continue;
        auto& a = acc[*chunks[i].label];
        a.first += intensities[i];
        ++a.second;
    }
    std::vector<EmotionIntensityReport> out;
    for (const auto& [label, a] : acc) {
        EmotionIntensityReport r;
        r.label = label;
        r.mean_intensity = a.first / static_cast<double>(a.second);
        r.chunk_count = a.second;
        if (auto it = valence.find(label); it != valence.end()) r.valence = it->second;
        out.push_back(std::move(r));
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
        if (x.mean_intensity != y.mean_intensity) return x.mean_intensity > y.mean_intensity;
        return x.label < y.label;
    });
    return out;
}

std::vector<ValenceSummary> valence_summary(const std::vector<TextChunk>& chunks, const std::vector<double>& intensities,
                                            const ValenceMap& valence) {
    if (chunks.size() != intensities.size()) throw ValidationError("valence_summary: misaligned inputs");
    constexpr Valence kOrder[] = {Valence::positive, Valence::negative, Valence::ambiguous, Valence::neutral,
                                  Valence::unmapped};
    std::vector<ValenceSummary> out;
    for (auto v : kOrder) out.push_back({v, 0.0, 0});
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (!chunks[i].label) continue;
        auto it = valence.find(*chunks[i].label);
        const Valence v = it == valence.end() ? Valence::unmapped : it->second;
        auto& s = out[static_cast<std::size_t>(v)];
        s.mean_intensity += intensities[i];
        ++s.chunk_count;
    }
    std::vector<ValenceSummary> present;
    for (auto& s : out) {
        if (s.chunk_count == 0) continue;
        s.mean_intensity /= static_cast<double>(s.chunk_count);
        present.push_back(s);
    }
    return present;
}

}  // namespace emomap
