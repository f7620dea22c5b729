#pragma once

#include <map>
#include <string>
#include <vector>

#include "occluflow/fusion_stack.hpp"

namespace occluflow {

struct ExperimentPlan {
    std::string layout_path;
    std::string masks_file;              // optional when mask_names empty
    std::vector<std::string> mask_names;
    std::string synth_spec_path;         // exactly one of synth_spec_path /
    std::string gmd_csv;                 // gmd_csv must be set
    int max_size = 4;
    int n_best = 6;
    int cv_folds = 10;
    int runs = 10;
    double split_fraction = 0.4;
    SvmHyper hyper;
    FeatureParams features;
    std::uint64_t master_seed = 20240801;
    std::string out_dir;  // empty -> no artifacts written
    bool emit_models = true;
    bool emit_sweep = true;  // framework-size curves and the best-n column

    void validate() const;
};

ExperimentPlan parse_plan(const std::string& text);
ExperimentPlan load_plan(const std::string& path);

struct MaskSummary {
    std::string mask;  // "none" or a mask name
    std::vector<double> fused_fixed_runs;
    std::vector<double> fused_bestn_runs;  // empty when sweep disabled
    std::vector<double> baseline_runs;
    // per expression: binary CV accuracy of the fixed framework, per run
    std::map<std::string, std::vector<double>> binary_cv_runs;
    // per expression: mean accuracy per framework size, averaged over runs
    std::map<std::string, std::vector<double>> curves;
    // per expression: mean region weights over runs (for heatmaps)
    std::map<std::string, WeightMap> mean_weights;
    // confusion matrix of the fixed stack summed over runs and folds,
    // indexed [truth][predicted] in canonical class order
    std::vector<std::vector<std::size_t>> confusion;

    double fused_fixed_mean() const;
    double fused_bestn_mean() const;
    double baseline_mean() const;
};

struct ResultsReport {
    std::vector<std::string> classes;
    std::vector<MaskSummary> masks;  // "none" first, then plan order
    std::map<int, std::size_t> catalog_sizes;

    const MaskSummary& for_mask(const std::string& name) const;
};

// Full protocol per mask (plus "none"): enumerate, score, weights, select,
// fuse, evaluate; averaged over the plan's seeded runs. Writes report,
// curves, heatmaps, weight maps, splits, scores and stack bundles under
// out_dir unless it is empty.
ResultsReport run_plan(const ExperimentPlan& plan);

// Stack trained on unoccluded data with the full region set, evaluated on
// occluded test sequences; the non-adapted reference column.
std::map<std::string, double> baseline_unadapted(const ExperimentPlan& plan);

// 5x5 graymap (min-max scaled; regions that were never scored render 0)
// plus the raw CSV; writes path + ".pgm" and path + ".csv".
void emit_heatmap(const WeightMap& wm, const FacialLayout& layout, const std::string& path);

}  // namespace occluflow
