#pragma once

#include <string>
#include <vector>

#include "occluflow/lmp_features.hpp"
#include "occluflow/region_graph.hpp"

namespace occluflow {

inline const std::vector<std::string>& expression_classes() {
    static const std::vector<std::string> classes = {"anger",     "disgust", "fear",
                                                     "happiness", "sadness", "surprise"};
    return classes;
}

// Motion recipe for one expression class: flow starts at the epicenter
// regions and decays along the adjacency graph, ramping from a neutral first
// frame to the apex.
struct ExpressionArchetype {
    std::string label;
    std::vector<RegionId> epicenters;    // ascending, unique
    std::vector<double> directions_deg;  // one base direction per epicenter
    double amplitude = 6.0;              // pixels/frame at the apex
    double decay = 1.5;                  // exp(-decay * graph distance)
    double direction_jitter = 10.0;      // degrees std, per region per sequence
    double amplitude_jitter = 0.25;      // relative uniform half-range per sequence
    int frames = 16;
};

struct SynthDatasetSpec {
    std::vector<ExpressionArchetype> archetypes;
    int sequences_per_class = 60;
    std::uint64_t rng_seed = 20240801;
    int image_width = 120;
    int image_height = 120;
};

// unweighted shortest-path distance from the epicenter set; -1 if unreachable
std::vector<int> graph_distances(const FacialLayout& layout,
                                 const std::vector<RegionId>& sources);

inline std::uint64_t sequence_seed(const SynthDatasetSpec& spec, std::size_t class_index,
                                   int sequence_index) {
    return derive_seed(spec.rng_seed, class_index, static_cast<std::uint64_t>(sequence_index));
}

MotionSequence generate_sequence(const ExpressionArchetype& arch, const FacialLayout& layout,
                                 int width, int height, std::uint64_t seed);

// sequences_per_class per archetype, labels in canonical class order,
// per-sequence seeds derived from the spec seed; byte-identical across runs
std::vector<MotionSequence> generate_dataset(const SynthDatasetSpec& spec,
                                             const FacialLayout& layout);

void validate_spec(const SynthDatasetSpec& spec, const FacialLayout& layout);

// spec file: global `key = value` lines, then one [label] section per class
// with epicenters/directions and optional per-class overrides
SynthDatasetSpec parse_synth_spec(const std::string& text);
SynthDatasetSpec load_synth_spec(const std::string& path);

}  // namespace occluflow
