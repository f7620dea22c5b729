#include "occluflow/lmp_features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <sstream>

namespace occluflow {

void DirectionHistogram::add(const DirectionHistogram& o) {
    if (bins.size() != o.bins.size())
        throw ValidationError("histogram add: bin counts differ");
    for (std::size_t i = 0; i < bins.size(); ++i) bins[i] += o.bins[i];
}

int direction_bin(double fdx, double fdy, int bins) {
    double deg = std::atan2(fdy, fdx) * 180.0 / M_PI;
    if (deg < 0.0) deg += 360.0;
    int b = static_cast<int>(deg / (360.0 / bins));
    return b >= bins ? 0 : b;
}

PixelRect region_pixel_rect(const Rect& r, int width, int height) {
    int x0 = static_cast<int>(std::lround(r.x * width));
    int x1 = static_cast<int>(std::lround((r.x + r.w) * width));
    int y0 = static_cast<int>(std::lround(r.y * height));
    int y1 = static_cast<int>(std::lround((r.y + r.h) * height));
    x0 = std::clamp(x0, 0, width);
    x1 = std::clamp(x1, 0, width);
    y0 = std::clamp(y0, 0, height);
    y1 = std::clamp(y1, 0, height);
    return {x0, y0, x1 - x0, y1 - y0};
}

DirectionHistogram patch_histogram(const MotionField& field, const PixelRect& patch,
                                   double min_magnitude, int bins) {
    if (bins < 1) throw ValidationError("patch_histogram: bins must be >= 1");
    if (patch.w <= 0 || patch.h <= 0) throw ValidationError("patch_histogram: empty patch");
    if (patch.x < 0 || patch.y < 0 || patch.x + patch.w > field.width ||
        patch.y + patch.h > field.height)
        throw ValidationError("patch_histogram: patch outside field bounds");

    DirectionHistogram hist(bins);
    for (int y = patch.y; y < patch.y + patch.h; ++y) {
        for (int x = patch.x; x < patch.x + patch.w; ++x) {
            const double fx = field.dx(x, y);
            const double fy = field.dy(x, y);
            if (std::hypot(fx, fy) < min_magnitude) continue;
            hist.bins[direction_bin(fx, fy, bins)] += 1.0;
        }
    }
    return hist;
}

bool coherent(const DirectionHistogram& a, const DirectionHistogram& b, double tau) {
    if (a.bins.size() != b.bins.size())
        throw ValidationError("coherent: histograms have different bin counts");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.bins.size(); ++i) {
        dot += a.bins[i] * b.bins[i];
        na += a.bins[i] * a.bins[i];
        nb += b.bins[i] * b.bins[i];
    }
    if (na == 0.0 && nb == 0.0) return true;
    if (na == 0.0 || nb == 0.0) return tau <= 0.0;
    return dot / std::sqrt(na * nb) >= tau;
}

DirectionHistogram region_md(const MotionField& field, const FacialLayout& layout,
                             RegionId region, const FeatureParams& params) {
    const PixelRect rr = region_pixel_rect(layout.rect(region), field.width, field.height);
    if (rr.w <= 0 || rr.h <= 0)
        throw ValidationError("region_md: region " + std::to_string(region) +
                              " maps to an empty pixel rectangle");
    const int p = params.patch_size;
    const int nx = rr.w / p;
    const int ny = rr.h / p;
    if (nx < 1 || ny < 1)
        throw ValidationError("region_md: region " + std::to_string(region) +
                              " smaller than one patch");

    std::vector<DirectionHistogram> hists(static_cast<std::size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            hists[static_cast<std::size_t>(j) * nx + i] = patch_histogram(
                field, {rr.x + i * p, rr.y + j * p, p, p}, params.min_magnitude, params.bins);

    // seed = patch nearest the region centroid, ties toward top-left
    const double ccx = rr.x + rr.w / 2.0;
    const double ccy = rr.y + rr.h / 2.0;
    int seed = 0;
    double best = 1e300;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const double px = rr.x + (i + 0.5) * p;
            const double py = rr.y + (j + 0.5) * p;
            const double d = (px - ccx) * (px - ccx) + (py - ccy) * (py - ccy);
            if (d < best) {
                best = d;
                seed = j * nx + i;
            }
        }
    }

    const DirectionHistogram& seed_hist = hists[seed];
    DirectionHistogram sum(params.bins);
    if (seed_hist.is_zero()) return sum;

    std::vector<char> visited(hists.size(), 0);
    std::vector<char> admitted(hists.size(), 0);
    std::deque<int> queue{seed};
    visited[seed] = 1;
    admitted[seed] = 1;
    while (!queue.empty()) {
        const int cur = queue.front();
        queue.pop_front();
        const int ci = cur % nx;
        const int cj = cur / nx;
        const int di[4] = {0, -1, 1, 0};
        const int dj[4] = {-1, 0, 0, 1};
        for (int k = 0; k < 4; ++k) {
            const int nxt_i = ci + di[k];
            const int nxt_j = cj + dj[k];
            if (nxt_i < 0 || nxt_i >= nx || nxt_j < 0 || nxt_j >= ny) continue;
            const int nxt = nxt_j * nx + nxt_i;
            if (visited[nxt]) continue;
            visited[nxt] = 1;
            if (coherent(hists[nxt], seed_hist, params.tau)) {
                admitted[nxt] = 1;
                queue.push_back(nxt);
            }
        }
    }
    for (std::size_t i = 0; i < hists.size(); ++i)
        if (admitted[i]) sum.add(hists[i]);
    return sum;
}

GmdVector sequence_gmd(const MotionSequence& seq, const FacialLayout& layout,
                       const FeatureParams& params) {
    if (seq.fields.empty()) throw ValidationError("sequence_gmd: empty sequence");
    const int w = seq.fields[0].width;
    const int h = seq.fields[0].height;
    for (const auto& f : seq.fields) {
        if (f.width != w || f.height != h)
            throw ValidationError("sequence_gmd: frame dimensions differ");
    }
    GmdVector gmd;
    gmd.bins = params.bins;
    gmd.values.assign(static_cast<std::size_t>(layout.region_count()) * params.bins, 0.0);
    for (RegionId r : layout.region_ids()) {
        DirectionHistogram stmd(params.bins);
        for (const auto& f : seq.fields) stmd.add(region_md(f, layout, r, params));
        std::copy(stmd.bins.begin(), stmd.bins.end(),
                  gmd.values.begin() + static_cast<std::size_t>(r - 1) * params.bins);
    }
    return gmd;
}

MotionSequence apply_occlusion(const MotionSequence& seq, const FacialLayout& layout,
                               const OcclusionMask& mask, double noise_sigma,
                               std::uint64_t seed) {
    layout.validate_mask(mask);
    MotionSequence out = seq;
    Rng rng(seed);
    for (auto& field : out.fields) {
        for (RegionId r : mask.occluded) {
            const PixelRect rr = region_pixel_rect(layout.rect(r), field.width, field.height);
            for (int y = rr.y; y < rr.y + rr.h; ++y) {
                for (int x = rr.x; x < rr.x + rr.w; ++x) {
                    if (noise_sigma == 0.0) {
                        field.set(x, y, 0.0f, 0.0f);
                    } else {
                        field.set(x, y, static_cast<float>(rng.normal() * noise_sigma),
                                  static_cast<float>(rng.normal() * noise_sigma));
                    }
                }
            }
        }
    }
    return out;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw ValidationError("mfb: truncated header (" + what + ")");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

constexpr char kMagic[4] = {'M', 'F', 'S', 'Q'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void write_mfb(const MotionSequence& seq, const std::string& path) {
    if (seq.fields.empty()) throw ValidationError("mfb: refusing to write empty sequence");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StageError("mfb: cannot open " + path + " for writing");
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(seq.fields[0].width));
    put_u32(out, static_cast<std::uint32_t>(seq.fields[0].height));
    put_u32(out, static_cast<std::uint32_t>(seq.fields.size()));
    for (const auto& f : seq.fields) {
        if (f.width != seq.fields[0].width || f.height != seq.fields[0].height)
            throw ValidationError("mfb: frame dimensions differ");
        for (float v : f.flow) put_f32(out, v);
    }
    if (!out) throw StageError("mfb: write failed for " + path);
}

MotionSequence read_mfb(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("mfb: cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw ValidationError("mfb: bad magic in " + path);
    if (get_u32(in, "version") != kVersion)
        throw ValidationError("mfb: unsupported version in " + path);
    const std::uint32_t w = get_u32(in, "width");
    const std::uint32_t h = get_u32(in, "height");
    const std::uint32_t frames = get_u32(in, "frames");
    if (w == 0 || h == 0 || frames == 0 || w > 65536 || h > 65536)
        throw ValidationError("mfb: bad dimensions in " + path);
    MotionSequence seq;
    seq.fields.reserve(frames);
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * 8);
    for (std::uint32_t t = 0; t < frames; ++t) {
        MotionField f(static_cast<int>(w), static_cast<int>(h));
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
            throw ValidationError("mfb: truncated frame data in " + path);
        for (std::size_t i = 0; i < f.flow.size(); ++i) {
            std::uint32_t bits = static_cast<std::uint32_t>(buf[4 * i]) |
                                 (static_cast<std::uint32_t>(buf[4 * i + 1]) << 8) |
                                 (static_cast<std::uint32_t>(buf[4 * i + 2]) << 16) |
                                 (static_cast<std::uint32_t>(buf[4 * i + 3]) << 24);
            float v;
            std::memcpy(&v, &bits, 4);
            if (!std::isfinite(v))
                throw ValidationError("mfb: non-finite flow value in " + path);
            f.flow[i] = v;
        }
        seq.fields.push_back(std::move(f));
    }
    char extra;
    if (in.read(&extra, 1)) throw ValidationError("mfb: trailing bytes in " + path);
    return seq;
}

void GmdTable::append(std::string id, std::string label, std::vector<double> row) {
    if (!rows.empty() && row.size() != rows[0].size())
        throw ValidationError("gmd table: row width mismatch");
    ids.push_back(std::move(id));
    labels.push_back(std::move(label));
    rows.push_back(std::move(row));
}

void write_gmd_csv(const GmdTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw StageError("gmd csv: cannot open " + path + " for writing");
    out << "sequence_id,label";
    for (std::size_t i = 0; i < table.dim(); ++i) out << ",v" << (i + 1);
    out << "\n";
    char buf[64];
    for (std::size_t r = 0; r < table.size(); ++r) {
        out << table.ids[r] << ',' << table.labels[r];
        for (double v : table.rows[r]) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << ',' << buf;
        }
        out << "\n";
    }
    if (!out) throw StageError("gmd csv: write failed for " + path);
}

GmdTable read_gmd_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("gmd csv: cannot open " + path);
    GmdTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(line);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (first && cells.size() >= 2 && cells[0] == "sequence_id") {
            first = false;
            continue;  // header
        }
        first = false;
        if (cells.size() < 3)
            throw ValidationError("gmd csv: row with fewer than 3 columns in " + path);
        std::vector<double> row;
        row.reserve(cells.size() - 2);
        for (std::size_t i = 2; i < cells.size(); ++i) {
            try {
                std::size_t pos = 0;
                row.push_back(std::stod(cells[i], &pos));
                if (pos != cells[i].size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ValidationError("gmd csv: bad value '" + cells[i] + "' in " + path);
            }
            if (!std::isfinite(row.back()))
                throw ValidationError("gmd csv: non-finite value in " + path);
        }
        table.append(cells[0], cells[1], std::move(row));
    }
    return table;
}

}  // namespace occluflow
