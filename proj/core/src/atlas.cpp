#include "emomap/atlas.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "emomap/csv.hpp"
#include "emomap/error.hpp"
#include "emomap/text.hpp"

namespace emomap {

namespace {

const char* const kHeader[] = {"name", "x", "y", "z", "hemisphere", "system", "provenance"};

double parse_coordinate(std::string_view raw, const std::string& where) {
    const auto s = text::trim(raw);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ParseError(where + ": malformed coordinate '" + std::string(raw) + "'");
    }
    return v;
}

std::string format_coordinate(double v) {
    if (v == std::floor(v) && std::abs(v) < 1e9) return std::to_string(static_cast<long long>(v));
    std::ostringstream ss;
    ss.imbue(std::locale::classic());
    ss.precision(17);
    ss << v;
    return ss.str();
}

}  // namespace

std::string_view to_string(Hemisphere h) {
    switch (h) {
        case Hemisphere::left: return "left";
        case Hemisphere::right: return "right";
        case Hemisphere::midline: return "midline";
        case Hemisphere::bilateral: return "bilateral";
    }
    return "";
}

std::string_view to_string(BrainSystem s) {
    switch (s) {
        case BrainSystem::limbic: return "limbic";
        case BrainSystem::cortical: return "cortical";
        case BrainSystem::subcortical: return "subcortical";
        case BrainSystem::brainstem: return "brainstem";
    }
    return "";
}

Hemisphere parse_hemisphere(std::string_view s) {
    if (s == "left") return Hemisphere::left;
    if (s == "right") return Hemisphere::right;
    if (s == "midline") return Hemisphere::midline;
    if (s == "bilateral") return Hemisphere::bilateral;
    throw ParseError("unknown hemisphere '" + std::string(s) + "'");
}

BrainSystem parse_system(std::string_view s) {
    if (s == "limbic") return BrainSystem::limbic;
    if (s == "cortical") return BrainSystem::cortical;
    if (s == "subcortical") return BrainSystem::subcortical;
    if (s == "brainstem") return BrainSystem::brainstem;
    throw ParseError("unknown brain system '" + std::string(s) + "'");
}

Atlas::Atlas(std::string name, std::vector<BrainRegion> regions) : name_(std::move(name)), regions_(std::move(regions)) {
    if (regions_.empty()) throw ValidationError("atlas '" + name_ + "' has no regions");
    std::set<std::string, std::less<>> seen;
    for (const auto& r : regions_) {
        if (r.name.empty()) throw ValidationError("atlas '" + name_ + "': empty region name");
        if (!seen.insert(r.name).second) {
            throw ValidationError("atlas '" + name_ + "': duplicate region '" + r.name + "'");
        }
        for (double c : r.mni) {
            if (!std::isfinite(c) || std::abs(c) > kMniBound) {
                throw ValidationError("atlas '" + name_ + "': region '" + r.name + "' coordinate " +
                                      format_coordinate(c) + " outside +-100 mm");
            }
        }
    }
}

std::optional<std::size_t> Atlas::find(std::string_view name) const {
    for (std::size_t i = 0; i < regions_.size(); ++i) {
        if (regions_[i].name == name) return i;
    }
    return std::nullopt;
}

const BrainRegion& Atlas::at(std::string_view name) const {
    auto idx = find(name);
    if (!idx) throw ValidationError("unknown region '" + std::string(name) + "' in atlas '" + name_ + "'");
    return regions_[*idx];
}

std::vector<Point3> Atlas::coordinates() const {
    std::vector<Point3> out;
    out.reserve(regions_.size());
    for (const auto& r : regions_) out.push_back(r.mni);
    return out;
}

std::string normalize_region_name(std::string_view display) {
    std::string out;
    bool pending_sep = false;
    for (char ch : text::trim(display)) {
        if (ch == ' ' || ch == '-' || ch == '_' || ch == '\t') {
            pending_sep = !out.empty();
            continue;
        }
        if (pending_sep) out.push_back('_');
        pending_sep = false;
        out.push_back((ch >= 'A' && ch <= 'Z') ? static_cast<char>(ch - 'A' + 'a') : ch);
    }
    return out;
}

Atlas load_atlas(const std::string& path, std::optional<std::string> name) {
    const auto records = csv::read_file(path);
    if (records.empty()) throw ParseError("'" + path + "': empty atlas file");
    const auto& header = records.front().fields;
    if (header.size() != std::size(kHeader)) {
        throw ParseError("'" + path + "': expected header name,x,y,z,hemisphere,system,provenance");
    }
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (text::trim(header[i]) != kHeader[i]) {
            throw ParseError("'" + path + "': expected header name,x,y,z,hemisphere,system,provenance");
        }
    }
    std::vector<BrainRegion> regions;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        const std::string where = path + ":" + std::to_string(rec.line);
        if (rec.malformed) throw ParseError(where + ": " + rec.problem);
        if (rec.fields.size() != header.size()) {
            throw ParseError(where + ": expected " + std::to_string(header.size()) + " fields");
        }
        BrainRegion region;
        region.name = normalize_region_name(rec.fields[0]);
        if (region.name.empty()) throw ParseError(where + ": empty region name");
        for (int a = 0; a < 3; ++a) region.mni[a] = parse_coordinate(rec.fields[1 + a], where);
        try {
            region.hemisphere = parse_hemisphere(text::trim(rec.fields[4]));
            region.system = parse_system(text::trim(rec.fields[5]));
        } catch (const ParseError& e) {
            throw ParseError(where + ": " + e.what());
        }
        region.provenance = rec.fields[6];
        regions.push_back(std::move(region));
    }
    return Atlas(name.value_or(std::filesystem::path(path).stem().string()), std::move(regions));
}

void save_atlas(const Atlas& atlas, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write atlas '" + path + "'");
    csv::write_row(out, {kHeader, kHeader + std::size(kHeader)});
    for (const auto& r : atlas.regions()) {
        csv::write_row(out, {r.name, format_coordinate(r.mni[0]), format_coordinate(r.mni[1]),
                             format_coordinate(r.mni[2]), std::string(to_string(r.hemisphere)),
                             std::string(to_string(r.system)), r.provenance});
    }
    if (!out) throw IoError("write failure on '" + path + "'");
}

BrainSystem system_of(std::string_view region_name, const Atlas& atlas) { return atlas.at(region_name).system; }

}  // namespace emomap
