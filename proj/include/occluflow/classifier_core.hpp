#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "occluflow/config_enum.hpp"
#include "occluflow/lmp_features.hpp"

namespace occluflow {

struct SvmHyper {
    double c = 1.0;
    double gamma = 0.0;  // 0 -> 1 / (dims * feature variance), fitted on the data
};

struct LabeledSet {
    std::vector<std::vector<double>> features;
    std::vector<std::string> labels;
    std::vector<std::string> ids;  // sequence ids; empty strings allowed

    std::size_t size() const { return features.size(); }
    void append(std::vector<double> x, std::string label, std::string id = {});
    void validate() const;
};

LabeledSet labeled_set_from_table(const GmdTable& table);

// RBF-kernel max-margin binary model with sigmoid probability calibration.
// Inputs are projected onto selected_dims (when present), standardized, then
// kernelized against the stored support vectors.
struct TrainedModel {
    std::uint32_t input_dim = 0;
    std::vector<std::uint32_t> selected_dims;  // empty = identity
    std::vector<double> mean;                  // per used dim
    std::vector<double> stdev;                 // per used dim, constant dims -> 1
    std::vector<std::vector<double>> support_vectors;  // standardized
    std::vector<double> coef;                  // alpha_i * y_i
    double bias = 0.0;
    double gamma = 0.0;
    double c = 1.0;
    double platt_a = -1.0;  // pated = 1 / (1 + exp(a * f + b))
    double platt_b = 0.0;
    bool cap_hit = false;  // SMO stopped at the iteration cap

    std::size_t used_dim() const {
        return selected_dims.empty() ? input_dim : selected_dims.size();
    }
    double decision_value(const std::vector<double>& x) const;
    // (p_class, p_rest); the second value is the exact complement
    std::pair<double, double> predict_proba(const std::vector<double>& x) const;
    int predict_sign(const std::vector<double>& x) const;
};

// Trains label==positive vs rest. Rows are re-ordered internally by
// (sequence id, label, features), so the result does not depend on the
// caller's row order. `calibrate` controls whether the Platt sigmoid is
// fitted (3-fold internal split); plain accuracy work can skip it.
TrainedModel train_binary(const LabeledSet& data, const std::string& positive,
                          const SvmHyper& hyper, std::uint64_t seed, bool calibrate = true);

// Same, with the model restricted to the given input dimensions.
TrainedModel train_binary_projected(const LabeledSet& data, const std::string& positive,
                                    const std::vector<std::uint32_t>& dims,
                                    const SvmHyper& hyper, std::uint64_t seed,
                                    bool calibrate = true);

struct CvResult {
    double mean = 0.0;
    std::vector<double> per_fold;
};

// Stratified k-fold CV accuracy of the binary model. Fold assignment is
// derived from (label, sequence id) and the seed, never from row order.
CvResult cross_validate(const LabeledSet& data, const std::string& positive, int k,
                        const SvmHyper& hyper, std::uint64_t seed,
                        const std::vector<std::uint32_t>& dims = {});

// fold index per row, stratified by label
std::vector<int> stratified_folds(const LabeledSet& data, int k, std::uint64_t seed);

// slots of the GMD vector that belong to the configuration's regions
std::vector<std::uint32_t> configuration_slots(const Configuration& config, int bins);
std::vector<double> project(const std::vector<double>& x, const Configuration& config, int bins);

// One-vs-rest stack of calibrated binary models over a fixed class list.
struct MulticlassModel {
    std::vector<std::string> classes;  // ascending
    std::vector<TrainedModel> models;  // parallel to classes

    // calibrated one-vs-rest scores normalized to sum exactly 1
    std::vector<double> predict_proba(const std::vector<double>& x) const;
    std::string predict(const std::vector<double>& x) const;
};

MulticlassModel train_multiclass(const LabeledSet& data, const SvmHyper& hyper,
                                 std::uint64_t seed);

void write_model(const TrainedModel& model, const std::string& path);
TrainedModel read_model(const std::string& path);
void write_model(const TrainedModel& model, std::ostream& out);
TrainedModel read_model(std::istream& in, const std::string& context);

void write_multiclass(const MulticlassModel& model, const std::string& path);
MulticlassModel read_multiclass(const std::string& path);

}  // namespace occluflow
