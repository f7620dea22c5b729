#pragma once

#include <map>
#include <set>
#include <vector>

#include "occluflow/region_graph.hpp"

namespace occluflow {

// A connected set of regions, kept in canonical ascending order so equality
// is structural.
struct Configuration {
    std::vector<RegionId> regions;

    int size() const { return static_cast<int>(regions.size()); }
    bool operator==(const Configuration& o) const { return regions == o.regions; }
    bool operator<(const Configuration& o) const {
        if (regions.size() != o.regions.size()) return regions.size() < o.regions.size();
        return regions < o.regions;
    }
    std::uint32_t bits() const {
        std::uint32_t b = 0;
        for (RegionId r : regions) b |= 1u << (r - 1);
        return b;
    }
};

struct ConfigurationCatalog {
    std::map<int, std::vector<Configuration>> by_size;
    std::size_t total = 0;

    std::size_t count(int size) const {
        auto it = by_size.find(size);
        return it == by_size.end() ? 0 : it->second.size();
    }
    // flat view in canonical (size, lexicographic) order
    std::vector<Configuration> all() const {
        std::vector<Configuration> out;
        out.reserve(total);
        for (const auto& [size, configs] : by_size)
            out.insert(out.end(), configs.begin(), configs.end());
        return out;
    }
};

// true iff the subgraph induced on `regions` is connected; singletons are
// connected, the empty set is a domain error.
bool is_connected(const FacialLayout& layout, const std::set<RegionId>& regions);

// All connected region sets of size 1..max_size within restrict_to,
// enumerated via grow-from-anchor so each set is emitted exactly once.
// Output order is canonical: by size, then lexicographic region ids.
ConfigurationCatalog enumerate_configurations(const FacialLayout& layout, int max_size,
                                              const std::set<RegionId>& restrict_to);

inline ConfigurationCatalog enumerate_configurations(const FacialLayout& layout, int max_size) {
    std::set<RegionId> all(layout.region_ids().begin(), layout.region_ids().end());
    return enumerate_configurations(layout, max_size, all);
}

}  // namespace occluflow
