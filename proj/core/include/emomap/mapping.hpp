#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "emomap/atlas.hpp"
#include "emomap/clustering.hpp"
#include "emomap/corpus.hpp"
#include "emomap/embedding.hpp"

namespace emomap {

struct RegionAssignment {
    /// cluster id -> region index (injective).
    std::vector<std::size_t> cluster_to_region;
    /// Euclidean distance between each cluster center and its region.
    std::vector<double> distances;
};

struct MappingOptions {
    /// Affinely rescale each center axis from the centers' range onto the
    /// atlas coordinate range before measuring distances. Off by default:
    /// projected coordinates and millimetre coordinates are compared as is.
    bool rescale_to_atlas = false;
};

/// Greedy unique matching: clusters in ascending id each take the nearest
/// region not claimed yet (distance ties -> lowest region index).
/// Throws ValidationError when there are more centers than regions.
RegionAssignment assign_regions(const std::vector<Point3>& centers, const Atlas& atlas,
                                const MappingOptions& opts = {});

struct LabeledChunk {
    ChunkRef chunk_ref;
    std::string region;
};

/// Region name for every chunk via its cluster label.
/// Throws ValidationError when model.labels and chunks differ in length.
std::vector<LabeledChunk> label_chunks(const ClusterModel& model, const RegionAssignment& assignment,
                                       const std::vector<TextChunk>& chunks, const Atlas& atlas);

}  // namespace emomap
