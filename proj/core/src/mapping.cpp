#include "emomap/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "emomap/error.hpp"

namespace emomap {

namespace {

std::vector<Point3> rescale(const std::vector<Point3>& centers, const Atlas& atlas) {
    std::vector<Point3> out = centers;
    const auto coords = atlas.coordinates();
    for (int a = 0; a < 3; ++a) {
        double cmin = centers[0][a], cmax = centers[0][a];
        for (const auto& c : centers) {
            cmin = std::min(cmin, c[a]);
            cmax = std::max(cmax, c[a]);
        }
        double amin = coords[0][a], amax = coords[0][a];
        for (const auto& c : coords) {
            amin = std::min(amin, c[a]);
            amax = std::max(amax, c[a]);
        }
        for (auto& c : out) {
            c[a] = cmax > cmin ? amin + (c[a] - cmin) / (cmax - cmin) * (amax - amin) : 0.5 * (amin + amax);
        }
    }
    return out;
}

}  // namespace

RegionAssignment assign_regions(const std::vector<Point3>& centers, const Atlas& atlas, const MappingOptions& opts) {
    if (centers.size() > atlas.size()) {
        throw ValidationError("assign_regions: " + std::to_string(centers.size()) + " clusters but only " +
                              std::to_string(atlas.size()) + " regions");
    }
    RegionAssignment out;
    if (centers.empty()) return out;

    const auto points = opts.rescale_to_atlas ? rescale(centers, atlas) : centers;
    const auto coords = atlas.coordinates();
    std::vector<bool> used(coords.size(), false);
    std::vector<std::size_t> order(coords.size());
    std::vector<double> dist(coords.size());

    for (const auto& center : points) {
        for (std::size_t r = 0; r < coords.size(); ++r) dist[r] = std::sqrt(squared_distance(center, coords[r]));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
        for (auto r : order) {
            if (!used[r]) {
                used[r] = true;
                out.cluster_to_region.push_back(r);
                out.distances.push_back(dist[r]);
                break;
            }
        }
    }
    return out;
}

std::vector<LabeledChunk> label_chunks(const ClusterModel& model, const RegionAssignment& assignment,
                                       const std::vector<TextChunk>& chunks, const Atlas& atlas) {
    if (model.labels.size() != chunks.size()) {
        throw ValidationError("label_chunks: " + std::to_string(model.labels.size()) + " labels for " +
                              std::to_string(chunks.size()) + " chunks");
    }
    std::vector<LabeledChunk> out;
    out.reserve(chunks.size());
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        const auto c = static_cast<std::size_t>(model.labels[i]);
        if (c >= assignment.cluster_to_region.size()) {
            throw ValidationError("label_chunks: cluster " + std::to_string(c) + " has no region");
        }
        out.push_back({{chunks[i].doc_id, chunks[i].chunk_index}, atlas[assignment.cluster_to_region[c]].name});
    }
    return out;
}

}  // namespace emomap
