#pragma once

#include <string>
#include <vector>

#include "occluflow/classifier_core.hpp"
#include "occluflow/synth_gen.hpp"
#include "occluflow/weight_opt.hpp"

namespace occluflow {

struct SplitIndices {
    std::vector<std::size_t> first_stage;
    std::vector<std::size_t> second_stage;
};

// Stratified, disjoint, seed-deterministic split; the first stage takes
// floor(fraction * m) rows of every class.
SplitIndices split_dataset(const LabeledSet& data, double fraction, std::uint64_t seed);

LabeledSet subset_rows(const LabeledSet& data, const std::vector<std::size_t>& idx);

struct ExpressionSubset {
    std::string expression;
    LabeledSet rows;  // labels: expression vs "rest"
    std::uint64_t seed;
};

// One balanced binary subset per class: all positives, plus an equal number
// of negatives taken evenly from the other classes (floor(m / (k-1)) each,
// remainder round-robin in ascending class order).
std::vector<ExpressionSubset> build_expression_subsets(const LabeledSet& first_stage,
                                                       std::uint64_t seed);

// Two-layer architecture: six frozen per-expression binary models on their
// occlusion-specific frameworks, probability concatenation, and a fusion
// classifier over all expressions.
struct FusionStack {
    std::string occlusion;
    std::vector<std::string> expressions;     // canonical ascending order
    std::vector<FacialFramework> frameworks;  // parallel to expressions
    std::vector<TrainedModel> binary_models;  // parallel to expressions
    MulticlassModel fusion;
    FeatureParams feature_params;
    SvmHyper hyper;
    std::uint64_t seed = 0;

    // [p1, 1-p1, ..., p6, 1-p6]
    std::vector<double> probability_vector(const std::vector<double>& gmd) const;
    std::pair<std::string, std::vector<double>> predict_gmd(const std::vector<double>& gmd) const;
    std::pair<std::string, std::vector<double>> predict(const MotionSequence& seq,
                                                        const FacialLayout& layout) const;
};

// Binary layer trained on first-stage expression subsets (features projected
// onto each framework), then frozen; the fusion model is trained on the
// second stage's concatenated probability vectors.
FusionStack train_stack(const LabeledSet& first_stage, const LabeledSet& second_stage,
                        const std::vector<FacialFramework>& frameworks,
                        const FeatureParams& features, const SvmHyper& hyper,
                        std::uint64_t seed);

// Bundle directory: per-expression binary models and framework CSVs, the
// fusion model, and a flat key=value manifest.
void save_stack(const FusionStack& stack, const std::string& dir);
FusionStack load_stack(const std::string& dir);

}  // namespace occluflow
