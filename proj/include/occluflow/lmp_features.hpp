#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "occluflow/region_graph.hpp"

namespace occluflow {

// Dense per-frame motion field; flow is interleaved (dx, dy) in pixels/frame,
// row-major.
struct MotionField {
    int width = 0;
    int height = 0;
    std::vector<float> flow;  // 2 * width * height floats

    MotionField() = default;
    MotionField(int w, int h) : width(w), height(h), flow(2u * w * h, 0.0f) {}

    float dx(int x, int y) const { return flow[2u * (static_cast<std::size_t>(y) * width + x)]; }
    float dy(int x, int y) const { return flow[2u * (static_cast<std::size_t>(y) * width + x) + 1]; }
    void set(int x, int y, float fx, float fy) {
        auto i = 2u * (static_cast<std::size_t>(y) * width + x);
        flow[i] = fx;
        flow[i + 1] = fy;
    }
};

struct MotionSequence {
    std::vector<MotionField> fields;
    std::string label;
    std::string sequence_id;
};

// Direction histogram over B equal angular bins; bin b covers
// [b*360/B, (b+1)*360/B) degrees, y axis pointing down. Bin values are
// occurrence counts of flow vectors above the magnitude gate.
struct DirectionHistogram {
    std::vector<double> bins;

    DirectionHistogram() = default;
    explicit DirectionHistogram(int b) : bins(b, 0.0) {}

    int bin_count() const { return static_cast<int>(bins.size()); }
    bool is_zero() const {
        for (double v : bins)
            if (v != 0.0) return false;
        return true;
    }
    void add(const DirectionHistogram& o);
};

// Concatenation of per-region space-time histograms, region 1 first; region k
// occupies slots [(k-1)*B, k*B).
struct GmdVector {
    std::vector<double> values;
    int bins = 0;
};

struct FeatureParams {
    int bins = 12;
    int patch_size = 8;          // LMR side in pixels
    double tau = 0.7;            // coherence threshold (cosine similarity)
    double min_magnitude = 0.5;  // pixels/frame magnitude gate
};

struct PixelRect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
};

int direction_bin(double fdx, double fdy, int bins);

// Maps a normalized rectangle onto a half-open pixel range. Adjacent regions
// that share a boundary get disjoint pixel ranges, so occlusion and feature
// extraction always agree on pixel ownership.
PixelRect region_pixel_rect(const Rect& r, int width, int height);

DirectionHistogram patch_histogram(const MotionField& field, const PixelRect& patch,
                                   double min_magnitude, int bins);

// cosine similarity >= tau; two all-zero histograms count as coherent
bool coherent(const DirectionHistogram& a, const DirectionHistogram& b, double tau);

// Tiles the region into patch_size x patch_size LMRs (partial border patches
// dropped), then grows a coherent set outward from the patch nearest the
// region centroid: breadth-first over patch neighbors, admitting a patch iff
// its histogram is coherent with the seed's. Returns the sum over the
// admitted set.
DirectionHistogram region_md(const MotionField& field, const FacialLayout& layout,
                             RegionId region, const FeatureParams& params);

// Per region: element-wise sum of region_md over all frames; regions
// concatenated in ascending id order.
GmdVector sequence_gmd(const MotionSequence& seq, const FacialLayout& layout,
                       const FeatureParams& params);

// Replaces flow inside occluded regions by zero-mean isotropic noise with the
// given sigma (sigma 0 zeroes exactly); visible pixels are untouched.
MotionSequence apply_occlusion(const MotionSequence& seq, const FacialLayout& layout,
                               const OcclusionMask& mask, double noise_sigma,
                               std::uint64_t seed);

// Binary motion-field sequence file (.mfb), little-endian:
// magic "MFSQ", u32 version, u32 width, u32 height, u32 frames, then
// frames * height * width float32 pairs (dx, dy).
void write_mfb(const MotionSequence& seq, const std::string& path);
MotionSequence read_mfb(const std::string& path);

// Feature table: one GMD row per sequence, stored as CSV
// `sequence_id,label,v1..vN`.
struct GmdTable {
    std::vector<std::string> ids;
    std::vector<std::string> labels;
    std::vector<std::vector<double>> rows;

    std::size_t size() const { return rows.size(); }
    std::size_t dim() const { return rows.empty() ? 0 : rows[0].size(); }
    void append(std::string id, std::string label, std::vector<double> row);
};

void write_gmd_csv(const GmdTable& table, const std::string& path);
GmdTable read_gmd_csv(const std::string& path);

}  // namespace occluflow
