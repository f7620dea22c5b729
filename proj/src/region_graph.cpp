#include "occluflow/region_graph.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace occluflow {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream iss(line);
    std::vector<std::string> out;
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

bool is_comment_or_blank(const std::string& line) {
    for (char c : line) {
        if (c == '#') return true;
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

double parse_coord(const std::string& tok, const std::string& what) {
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        throw ValidationError("layout: bad " + what + " value '" + tok + "'");
    }
    if (pos != tok.size() || !std::isfinite(v))
        throw ValidationError("layout: bad " + what + " value '" + tok + "'");
    return v;
}

int parse_id(const std::string& tok, const std::string& ctx) {
    std::size_t pos = 0;
    long v;
    try {
        v = std::stol(tok, &pos);
    } catch (const std::exception&) {
        throw ValidationError(ctx + ": bad region id '" + tok + "'");
    }
    if (pos != tok.size() || v < 1 || v > 1000)
        throw ValidationError(ctx + ": bad region id '" + tok + "'");
    return static_cast<int>(v);
}

}  // namespace

FacialLayout::FacialLayout(std::map<RegionId, Rect> regions,
                           std::set<std::pair<RegionId, RegionId>> edges) {
    if (regions.empty()) throw ValidationError("layout: no regions");
    const int n = static_cast<int>(regions.size());
    if (n > 32) throw ValidationError("layout: more than 32 regions unsupported");

    int expect = 1;
    for (const auto& [id, rect] : regions) {
        if (id != expect)
            throw ValidationError("layout: region ids must be contiguous from 1, missing id " +
                                  std::to_string(expect));
        ++expect;
        if (rect.w <= 0.0 || rect.h <= 0.0)
            throw ValidationError("layout: region " + std::to_string(id) + " has empty rectangle");
        const double eps = 1e-9;
        if (rect.x < -eps || rect.y < -eps || rect.x + rect.w > 1.0 + eps ||
            rect.y + rect.h > 1.0 + eps)
            throw ValidationError("layout: region " + std::to_string(id) +
                                  " rectangle leaves the unit square");
        rects_.push_back(rect);
        ids_.push_back(id);
    }

    // pairwise non-overlap (shared boundaries allowed)
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
            const Rect& ra = rects_[a];
            const Rect& rb = rects_[b];
            const double ox = std::min(ra.x + ra.w, rb.x + rb.w) - std::max(ra.x, rb.x);
            const double oy = std::min(ra.y + ra.h, rb.y + rb.h) - std::max(ra.y, rb.y);
            if (ox > 1e-9 && oy > 1e-9)
                throw ValidationError("layout: regions " + std::to_string(a + 1) + " and " +
                                      std::to_string(b + 1) + " overlap");
        }
    }

    nbrs_.assign(n, {});
    nbr_bits_.assign(n, 0);
    for (const auto& [a, b] : edges) {
        if (a == b)
            throw ValidationError("layout: self edge on region " + std::to_string(a));
        if (a < 1 || a > n || b < 1 || b > n)
            throw ValidationError("layout: edge references unknown region");
        nbrs_[a - 1].insert(b);
        nbrs_[b - 1].insert(a);
        nbr_bits_[a - 1] |= 1u << (b - 1);
        nbr_bits_[b - 1] |= 1u << (a - 1);
    }
    edge_count_ = 0;
    for (int i = 0; i < n; ++i) edge_count_ += nbrs_[i].size();
    edge_count_ /= 2;

    // connectivity over all regions
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int reached = 1;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (RegionId v : nbrs_[u]) {
            if (!seen[v - 1]) {
                seen[v - 1] = 1;
                ++reached;
                stack.push_back(v - 1);
            }
        }
    }
    if (reached != n) throw ValidationError("layout: adjacency graph is not connected");
}

FacialLayout FacialLayout::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("layout: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

FacialLayout FacialLayout::from_text(const std::string& text) {
    std::map<RegionId, Rect> regions;
    std::set<std::pair<RegionId, RegionId>> edges;
    std::istringstream in(text);
    std::string line;
    bool in_edges = false;
    while (std::getline(in, line)) {
        if (is_comment_or_blank(line)) continue;
        auto toks = split_ws(line);
        if (toks.size() == 1 && toks[0] == "edges") {
            if (in_edges) throw ValidationError("layout: duplicate edges section");
            in_edges = true;
            continue;
        }
        if (!in_edges) {
            if (toks.size() != 5)
                throw ValidationError("layout: region record needs 'id x y w h', got '" + line + "'");
            int id = parse_id(toks[0], "layout");
            Rect r{parse_coord(toks[1], "x"), parse_coord(toks[2], "y"),
                   parse_coord(toks[3], "w"), parse_coord(toks[4], "h")};
            if (!regions.emplace(id, r).second)
                throw ValidationError("layout: duplicate region id " + std::to_string(id));
        } else {
            if (toks.size() != 2)
                throw ValidationError("layout: edge record needs 'id id', got '" + line + "'");
            int a = parse_id(toks[0], "layout");
            int b = parse_id(toks[1], "layout");
            auto e = std::minmax(a, b);
            if (!edges.emplace(e.first, e.second).second)
                throw ValidationError("layout: duplicate edge " + std::to_string(a) + " " +
                                      std::to_string(b));
        }
    }
    if (!in_edges) throw ValidationError("layout: missing edges section");
    return FacialLayout(std::move(regions), std::move(edges));
}

const Rect& FacialLayout::rect(RegionId r) const {
    if (!contains(r))
        throw ValidationError("unknown region id " + std::to_string(r));
    return rects_[r - 1];
}

const std::set<RegionId>& FacialLayout::neighbors(RegionId r) const {
    if (!contains(r))
        throw ValidationError("unknown region id " + std::to_string(r));
    return nbrs_[r - 1];
}

std::uint32_t FacialLayout::neighbor_bits(RegionId r) const {
    if (!contains(r))
        throw ValidationError("unknown region id " + std::to_string(r));
    return nbr_bits_[r - 1];
}

void FacialLayout::validate_mask(const OcclusionMask& mask) const {
    for (RegionId r : mask.occluded) {
        if (!contains(r))
            throw ValidationError("mask '" + mask.name + "' references unknown region " +
                                  std::to_string(r));
    }
    if (static_cast<int>(mask.occluded.size()) >= region_count())
        throw ValidationError("mask '" + mask.name + "' leaves no visible region");
}

std::set<RegionId> FacialLayout::visible_regions(const OcclusionMask& mask) const {
    validate_mask(mask);
    std::set<RegionId> out;
    for (RegionId r : ids_) {
        if (!mask.occluded.count(r)) out.insert(r);
    }
    return out;
}

std::optional<RegionId> FacialLayout::region_of_pixel(double x, double y) const {
    if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0))
        throw ValidationError("region_of_pixel: coordinates outside [0,1]");
    // ids ascending, so the boundary tie-break toward the lowest index is the
    // first hit
    for (RegionId r : ids_) {
        if (rects_[r - 1].contains(x, y)) return r;
    }
    return std::nullopt;
}

std::vector<OcclusionMask> parse_masks(const std::string& text) {
    std::vector<OcclusionMask> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (is_comment_or_blank(line)) continue;
        auto colon = line.find(':');
        if (colon == std::string::npos)
            throw ValidationError("mask file: expected 'name: id,id,...', got '" + line + "'");
        std::string name = line.substr(0, colon);
        // trim
        while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back())))
            name.pop_back();
        std::size_t start = 0;
        while (start < name.size() && std::isspace(static_cast<unsigned char>(name[start])))
            ++start;
        name = name.substr(start);
        if (name.empty()) throw ValidationError("mask file: empty mask name");
        for (const auto& m : out) {
            if (m.name == name)
                throw ValidationError("mask file: duplicate mask name '" + name + "'");
        }
        OcclusionMask mask;
        mask.name = name;
        std::string rest = line.substr(colon + 1);
        std::string tok;
        std::istringstream ids(rest);
        while (std::getline(ids, tok, ',')) {
            auto t = split_ws(tok);
            if (t.empty()) throw ValidationError("mask '" + name + "': empty id");
            if (t.size() != 1) throw ValidationError("mask '" + name + "': bad id '" + tok + "'");
            int id = parse_id(t[0], "mask '" + name + "'");
            if (!mask.occluded.insert(id).second)
                throw ValidationError("mask '" + name + "': duplicate region " + std::to_string(id));
        }
        if (mask.occluded.empty())
            throw ValidationError("mask '" + name + "': no occluded regions");
        out.push_back(std::move(mask));
    }
    return out;
}

std::vector<OcclusionMask> load_masks(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("mask file: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_masks(buf.str());
}

}  // namespace occluflow
