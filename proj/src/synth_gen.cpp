#include "occluflow/synth_gen.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>

namespace occluflow {

std::vector<int> graph_distances(const FacialLayout& layout,
                                 const std::vector<RegionId>& sources) {
    std::vector<int> dist(layout.region_count() + 1, -1);
    std::deque<RegionId> queue;
    for (RegionId s : sources) {
        if (!layout.contains(s))
            throw ValidationError("graph_distances: unknown region " + std::to_string(s));
        if (dist[s] == -1) {
            dist[s] = 0;
            queue.push_back(s);
        }
    }
    while (!queue.empty()) {
        RegionId u = queue.front();
        queue.pop_front();
        for (RegionId v : layout.neighbors(u)) {
            if (dist[v] == -1) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    return dist;
}

namespace {

void validate_archetype(const ExpressionArchetype& arch, const FacialLayout& layout) {
    if (arch.label.empty()) throw ValidationError("archetype: empty label");
    if (arch.epicenters.empty())
        throw ValidationError("archetype '" + arch.label + "': no epicenters");
    if (arch.directions_deg.size() != arch.epicenters.size())
        throw ValidationError("archetype '" + arch.label +
                              "': need one direction per epicenter");
    for (std::size_t i = 0; i + 1 < arch.epicenters.size(); ++i)
        if (arch.epicenters[i] >= arch.epicenters[i + 1])
            throw ValidationError("archetype '" + arch.label +
                                  "': epicenters must be ascending and unique");
    for (RegionId e : arch.epicenters)
        if (!layout.contains(e))
            throw ValidationError("archetype '" + arch.label + "': epicenter " +
                                  std::to_string(e) + " not in layout");
    if (!(arch.amplitude > 0.0))
        throw ValidationError("archetype '" + arch.label + "': amplitude must be > 0");
    if (arch.decay < 0.0)
        throw ValidationError("archetype '" + arch.label + "': decay must be >= 0");
    if (arch.frames < 1)
        throw ValidationError("archetype '" + arch.label + "': frames must be >= 1");
}

}  // namespace

MotionSequence generate_sequence(const ExpressionArchetype& arch, const FacialLayout& layout,
                                 int width, int height, std::uint64_t seed) {
    validate_archetype(arch, layout);
    if (width < 1 || height < 1)
        throw ValidationError("generate_sequence: bad image size");

    Rng rng(seed);
    const double amp_scale =
        1.0 + arch.amplitude_jitter * (2.0 * rng.next_double() - 1.0);
    std::vector<double> jitter(layout.region_count() + 1, 0.0);
    for (RegionId r : layout.region_ids()) jitter[r] = rng.normal() * arch.direction_jitter;

    // distance and nearest epicenter (ties toward the lower epicenter id)
    std::vector<int> dist(layout.region_count() + 1, -1);
    std::vector<double> base_dir(layout.region_count() + 1, 0.0);
    for (std::size_t e = 0; e < arch.epicenters.size(); ++e) {
        auto d = graph_distances(layout, {arch.epicenters[e]});
        for (RegionId r : layout.region_ids()) {
            if (d[r] >= 0 && (dist[r] == -1 || d[r] < dist[r])) {
                dist[r] = d[r];
                base_dir[r] = arch.directions_deg[e];
            }
        }
    }

    MotionSequence seq;
    seq.label = arch.label;
    seq.fields.reserve(arch.frames);
    for (int t = 0; t < arch.frames; ++t) {
        const double ramp = arch.frames == 1 ? 1.0 : static_cast<double>(t) / (arch.frames - 1);
        MotionField field(width, height);
        for (RegionId r : layout.region_ids()) {
            if (dist[r] < 0) continue;
            const double mag =
                arch.amplitude * amp_scale * std::exp(-arch.decay * dist[r]) * ramp;
            if (mag == 0.0) continue;
            const double theta = (base_dir[r] + jitter[r]) * M_PI / 180.0;
            const float fx = static_cast<float>(mag * std::cos(theta));
            const float fy = static_cast<float>(mag * std::sin(theta));
            const PixelRect rr = region_pixel_rect(layout.rect(r), width, height);
            for (int y = rr.y; y < rr.y + rr.h; ++y)
                for (int x = rr.x; x < rr.x + rr.w; ++x) field.set(x, y, fx, fy);
        }
        seq.fields.push_back(std::move(field));
    }
    return seq;
}

void validate_spec(const SynthDatasetSpec& spec, const FacialLayout& layout) {
    if (spec.sequences_per_class < 1)
        throw ValidationError("dataset spec: sequences_per_class must be >= 1");
    if (spec.image_width < 1 || spec.image_height < 1)
        throw ValidationError("dataset spec: bad image size");
    const auto& classes = expression_classes();
    if (spec.archetypes.size() != classes.size())
        throw ValidationError("dataset spec: expected " + std::to_string(classes.size()) +
                              " archetypes, got " + std::to_string(spec.archetypes.size()));
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (spec.archetypes[i].label != classes[i])
            throw ValidationError("dataset spec: archetype " + std::to_string(i) +
                                  " must be '" + classes[i] + "'");
        validate_archetype(spec.archetypes[i], layout);
    }
}

std::vector<MotionSequence> generate_dataset(const SynthDatasetSpec& spec,
                                             const FacialLayout& layout) {
    validate_spec(spec, layout);
    struct Job {
        const ExpressionArchetype* arch;
        std::uint64_t seed;
        std::string id;
    };
    std::vector<Job> jobs;
    for (std::size_t c = 0; c < spec.archetypes.size(); ++c) {
        for (int i = 0; i < spec.sequences_per_class; ++i) {
            char id[64];
            std::snprintf(id, sizeof id, "%s_%03d", spec.archetypes[c].label.c_str(), i);
            jobs.push_back({&spec.archetypes[c], sequence_seed(spec, c, i), id});
        }
    }
    std::vector<MotionSequence> out(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t j) {
        out[j] = generate_sequence(*jobs[j].arch, layout, spec.image_width, spec.image_height,
                                   jobs[j].seed);
        out[j].sequence_id = jobs[j].id;
    });
    return out;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double parse_number(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size() || !std::isfinite(x)) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ValidationError("synth spec: bad value '" + v + "' for " + key);
    }
}

std::vector<double> parse_number_list(const std::string& v, const std::string& key) {
    std::vector<double> out;
    std::istringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(parse_number(trim(tok), key));
    if (out.empty()) throw ValidationError("synth spec: empty list for " + key);
    return out;
}

}  // namespace

SynthDatasetSpec parse_synth_spec(const std::string& text) {
    SynthDatasetSpec spec;
    ExpressionArchetype defaults;  // global values collected before sections
    std::map<std::string, ExpressionArchetype> sections;
    std::vector<std::string> order;

    std::istringstream in(text);
    std::string line;
    std::string current;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ValidationError("synth spec: bad section header '" + line + "'");
            current = trim(line.substr(1, line.size() - 2));
            if (current.empty()) throw ValidationError("synth spec: empty section name");
            if (sections.count(current))
                throw ValidationError("synth spec: duplicate section '" + current + "'");
            ExpressionArchetype arch = defaults;
            arch.label = current;
            arch.epicenters.clear();
            arch.directions_deg.clear();
            sections.emplace(current, std::move(arch));
            order.push_back(current);
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("synth spec: expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (current.empty()) {
            if (key == "image_width")
                spec.image_width = static_cast<int>(parse_number(value, key));
            else if (key == "image_height")
                spec.image_height = static_cast<int>(parse_number(value, key));
            else if (key == "frames")
                defaults.frames = static_cast<int>(parse_number(value, key));
            else if (key == "sequences_per_class")
                spec.sequences_per_class = static_cast<int>(parse_number(value, key));
            else if (key == "rng_seed")
                spec.rng_seed = static_cast<std::uint64_t>(parse_number(value, key));
            else if (key == "amplitude")
                defaults.amplitude = parse_number(value, key);
            else if (key == "decay")
                defaults.decay = parse_number(value, key);
            else if (key == "direction_jitter")
                defaults.direction_jitter = parse_number(value, key);
            else if (key == "amplitude_jitter")
                defaults.amplitude_jitter = parse_number(value, key);
            else
                throw ValidationError("synth spec: unknown global key '" + key + "'");
        } else {
            ExpressionArchetype& arch = sections.at(current);
            if (key == "epicenters") {
                for (double v : parse_number_list(value, key))
                    arch.epicenters.push_back(static_cast<RegionId>(v));
            } else if (key == "directions") {
                arch.directions_deg = parse_number_list(value, key);
            } else if (key == "amplitude")
                arch.amplitude = parse_number(value, key);
            else if (key == "decay")
                arch.decay = parse_number(value, key);
            else if (key == "direction_jitter")
                arch.direction_jitter = parse_number(value, key);
            else if (key == "amplitude_jitter")
                arch.amplitude_jitter = parse_number(value, key);
            else if (key == "frames")
                arch.frames = static_cast<int>(parse_number(value, key));
            else
                throw ValidationError("synth spec: unknown key '" + key + "' in [" + current + "]");
        }
    }
    std::sort(order.begin(), order.end());
    for (const auto& label : order) spec.archetypes.push_back(sections.at(label));
    return spec;
}

SynthDatasetSpec load_synth_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("synth spec: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_synth_spec(buf.str());
}

}  // namespace occluflow
