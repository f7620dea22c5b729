#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "occluflow/common.hpp"

namespace occluflow {

using RegionId = int;

struct Rect {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    bool contains(double px, double py) const {
        return px >= x && px <= x + w && py >= y && py <= y + h;
    }
    double cx() const { return x + 0.5 * w; }
    double cy() const { return y + 0.5 * h; }
};

struct OcclusionMask {
    std::string name;
    std::set<RegionId> occluded;
};

// A face partition: region ids 1..n with normalized rectangles plus an
// adjacency graph. Immutable after construction; all queries are const.
class FacialLayout {
public:
    // Validates everything: contiguous ids starting at 1, rectangles inside
    // the unit square and pairwise non-overlapping, adjacency symmetric,
    // irreflexive, over known ids, and connected.
    FacialLayout(std::map<RegionId, Rect> regions,
                 std::set<std::pair<RegionId, RegionId>> edges);

    static FacialLayout from_file(const std::string& path);
    static FacialLayout from_text(const std::string& text);

    int region_count() const { return static_cast<int>(rects_.size()); }
    std::size_t edge_count() const { return edge_count_; }
    const std::vector<RegionId>& region_ids() const { return ids_; }
    bool contains(RegionId r) const {
        return r >= 1 && r <= region_count();
    }

    const Rect& rect(RegionId r) const;
    const std::set<RegionId>& neighbors(RegionId r) const;
    std::set<RegionId> visible_regions(const OcclusionMask& mask) const;
    std::optional<RegionId> region_of_pixel(double x, double y) const;

    // neighbor sets as bitmasks (bit r-1 set), used by the enumerator
    std::uint32_t neighbor_bits(RegionId r) const;

    void validate_mask(const OcclusionMask& mask) const;

private:
    std::vector<Rect> rects_;                 // index = id - 1
    std::vector<std::set<RegionId>> nbrs_;    // index = id - 1
    std::vector<std::uint32_t> nbr_bits_;
    std::vector<RegionId> ids_;
    std::size_t edge_count_ = 0;
};

// Mask file: one record per line, `name: id,id,...`.
std::vector<OcclusionMask> load_masks(const std::string& path);
std::vector<OcclusionMask> parse_masks(const std::string& text);

}  // namespace occluflow
