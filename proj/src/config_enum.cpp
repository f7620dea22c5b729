#include "occluflow/config_enum.hpp"

#include <algorithm>
#include <bit>

namespace occluflow {

namespace {

using u32 = std::uint32_t;

struct Enumerator {
    std::vector<u32> adj;  // adjacency restricted to the allowed vertex set
    int max_size;
    std::vector<std::vector<u32>> found;  // per size (1-based)

    void run(const std::vector<int>& vertices) {
        for (int anchor : vertices) {
            // only vertices with a higher index may extend an anchored set,
            // so every connected set is found once, from its minimum vertex
            u32 above = ~((anchor + 1 >= 32) ? 0xffffffffu : ((1u << (anchor + 1)) - 1));
            extend(1u << anchor, adj[anchor] & above, 0u, 1, above);
        }
    }

    void extend(u32 set, u32 ext, u32 forbidden, int size, u32 above) {
        found[size].push_back(set);
        if (size == max_size) return;
        u32 remaining = ext;
        u32 banned = 0;
        while (remaining) {
            u32 bit = remaining & (~remaining + 1);
            int v = std::countr_zero(remaining);
            remaining &= ~bit;
            // vertices tried earlier at this level stay forbidden below it
            u32 fb = forbidden | banned;
            u32 next_ext = (remaining | (adj[v] & above & ~set)) & ~fb & ~bit;
            extend(set | bit, next_ext, fb | bit, size + 1, above);
            banned |= bit;
        }
    }
};

}  // namespace

bool is_connected(const FacialLayout& layout, const std::set<RegionId>& regions) {
    if (regions.empty()) throw ValidationError("is_connected: empty region set");
    u32 subset = 0;
    for (RegionId r : regions) {
        if (!layout.contains(r))
            throw ValidationError("is_connected: unknown region id " + std::to_string(r));
        subset |= 1u << (r - 1);
    }
    u32 start = subset & (~subset + 1);
    u32 seen = start, frontier = start;
    while (frontier) {
        u32 next = 0;
        u32 f = frontier;
        while (f) {
            int v = std::countr_zero(f);
            f &= f - 1;
            next |= layout.neighbor_bits(v + 1) & subset & ~seen;
        }
        seen |= next;
        frontier = next;
    }
    return seen == subset;
}

ConfigurationCatalog enumerate_configurations(const FacialLayout& layout, int max_size,
                                              const std::set<RegionId>& restrict_to) {
    if (restrict_to.empty()) throw ValidationError("enumerate: empty region restriction");
    if (max_size < 1 || max_size > layout.region_count())
        throw ValidationError("enumerate: max_size out of range");

    u32 allowed_bits = 0;
    std::vector<int> vertices;
    for (RegionId r : restrict_to) {
        if (!layout.contains(r))
            throw ValidationError("enumerate: unknown region id " + std::to_string(r));
        allowed_bits |= 1u << (r - 1);
        vertices.push_back(r - 1);
    }

    Enumerator e;
    e.max_size = max_size;
    e.found.resize(max_size + 1);
    e.adj.resize(layout.region_count());
    for (RegionId r : layout.region_ids())
        e.adj[r - 1] = layout.neighbor_bits(r) & allowed_bits;
    e.run(vertices);

    ConfigurationCatalog catalog;
    for (int size = 1; size <= max_size; ++size) {
        auto& masks = e.found[size];
        std::vector<Configuration> configs;
        configs.reserve(masks.size());
        for (u32 m : masks) {
            Configuration c;
            c.regions.reserve(size);
            while (m) {
                c.regions.push_back(std::countr_zero(m) + 1);
                m &= m - 1;
            }
            configs.push_back(std::move(c));
        }
        std::sort(configs.begin(), configs.end());
        catalog.total += configs.size();
        if (!configs.empty()) catalog.by_size.emplace(size, std::move(configs));
    }
    return catalog;
}

}  // namespace occluflow
