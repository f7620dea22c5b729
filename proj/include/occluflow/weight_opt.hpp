#pragma once

#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "occluflow/classifier_core.hpp"
#include "occluflow/config_enum.hpp"

namespace occluflow {

struct ConfigurationScore {
    Configuration config;
    double res = 0.0;    // classification accuracy in [0,1]
    double omega = 0.0;  // exp((res - mean_i)/std_i) / exp(i)
};

// mean/std of res per configuration size, computed over the exact set of
// configurations being transferred (i.e. after occlusion filtering)
struct SizeStats {
    std::map<int, std::pair<double, double>> by_size;

    bool has(int size) const { return by_size.count(size) != 0; }
};

SizeStats compute_size_stats(const std::vector<ConfigurationScore>& scores);

// omega(C) = exp((res - mean_i)/std_i) / exp(i); std_i = 0 maps the z-term
// to 0, so all-equal results reduce to pure size moderation
double score_configuration(double res, int size, const SizeStats& stats);

struct WeightMap {
    std::string expression;
    std::string occlusion;  // mask name or "none"
    std::map<RegionId, double> weights;
    std::map<RegionId, int> apparitions;
    std::set<RegionId> occluded;
};

// Adds each configuration's omega to its member regions (canonical catalog
// order), then normalizes by apparition count. Occluded regions keep weight
// exactly 0; a scored configuration touching the mask is a protocol error.
WeightMap transfer_weights(const std::vector<ConfigurationScore>& scores,
                           const OcclusionMask& mask, const FacialLayout& layout);

// descending weight, ties toward the lower region id, occluded regions last
std::vector<RegionId> rank_regions(const WeightMap& wm);

struct FacialFramework {
    std::string expression;
    std::string occlusion;
    std::vector<RegionId> regions;  // descending weight order
};

FacialFramework select_framework(const WeightMap& wm, int n);

struct ScoringParams {
    SvmHyper hyper;
    int cv_folds = 10;
    std::uint64_t seed = 0;
    int bins = 12;
};

// res values can be reused across occlusion masks (visible-region features
// do not change under occlusion), keyed by the configuration's region bits
using ResCache = std::unordered_map<std::uint32_t, double>;

// res per configuration: stratified k-fold CV accuracy of the binary model
// on the subset features projected onto the configuration
std::vector<ConfigurationScore> score_catalog(const std::vector<Configuration>& configs,
                                              const LabeledSet& data,
                                              const std::string& positive,
                                              const ScoringParams& params,
                                              ResCache* cache = nullptr);

// end-to-end weight map for one expression and one mask
WeightMap compute_weight_map(const FacialLayout& layout, int max_size, const LabeledSet& data,
                             const std::string& expression, const OcclusionMask& mask,
                             const ScoringParams& params, ResCache* cache = nullptr);

// CV accuracy of the top-n framework for every n in [1, visible count]
std::vector<double> sweep_framework_sizes(const WeightMap& wm, const LabeledSet& data,
                                          const ScoringParams& params);

// weight map CSV: expression,occlusion,region,weight,apparitions
void write_weight_maps(const std::vector<WeightMap>& maps, const std::string& path);
std::vector<WeightMap> read_weight_maps(const std::string& path);

}  // namespace occluflow
