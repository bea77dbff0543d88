#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emomap/reduction.hpp"

namespace emomap {

enum class Hemisphere { left, right, midline, bilateral };
enum class BrainSystem { limbic, cortical, subcortical, brainstem };

std::string_view to_string(Hemisphere h);
std::string_view to_string(BrainSystem s);
Hemisphere parse_hemisphere(std::string_view s);
BrainSystem parse_system(std::string_view s);

inline constexpr BrainSystem kAllSystems[] = {BrainSystem::limbic, BrainSystem::cortical, BrainSystem::subcortical,
                                              BrainSystem::brainstem};

/// Coordinates beyond this magnitude (mm) are rejected as implausible.
inline constexpr double kMniBound = 100.0;

struct BrainRegion {
    std::string name;  // canonical: lowercase, underscores
    Point3 mni{};      // millimetres
    Hemisphere hemisphere = Hemisphere::midline;
    BrainSystem system = BrainSystem::cortical;
    std::string provenance;
};

/// Ordered set of regions. Order is significant: greedy region assignment
/// breaks distance ties by region index.
class Atlas {
public:
    Atlas(std::string name, std::vector<BrainRegion> regions);

    const std::string& name() const { return name_; }
    const std::vector<BrainRegion>& regions() const { return regions_; }
    std::size_t size() const { return regions_.size(); }
    const BrainRegion& operator[](std::size_t i) const { return regions_[i]; }

    std::optional<std::size_t> find(std::string_view name) const;
    /// Throws ValidationError for an unknown name.
    const BrainRegion& at(std::string_view name) const;

    std::vector<Point3> coordinates() const;

private:
    std::string name_;
    std::vector<BrainRegion> regions_;
};

/// "Superior Temporal Left" -> "superior_temporal_left".
std::string normalize_region_name(std::string_view display);

/// Reads an atlas CSV with header `name,x,y,z,hemisphere,system,provenance`.
/// The atlas name defaults to the file stem. Throws ParseError on malformed
/// rows or coordinates and ValidationError on duplicate names or coordinates
/// outside +-kMniBound.
Atlas load_atlas(const std::string& path, std::optional<std::string> name = std::nullopt);

void save_atlas(const Atlas& atlas, const std::string& path);

/// System category of a named region. Throws ValidationError when unknown.
BrainSystem system_of(std::string_view region_name, const Atlas& atlas);

}  // namespace emomap
