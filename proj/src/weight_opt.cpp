#include "occluflow/weight_opt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace occluflow {

SizeStats compute_size_stats(const std::vector<ConfigurationScore>& scores) {
    std::map<int, std::vector<double>> res_by_size;
    for (const auto& s : scores) res_by_size[s.config.size()].push_back(s.res);
    SizeStats stats;
    for (const auto& [size, values] : res_by_size) {
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= values.size();
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        var /= values.size();
        stats.by_size[size] = {mean, std::sqrt(var)};
    }
    return stats;
}

double score_configuration(double res, int size, const SizeStats& stats) {
    auto it = stats.by_size.find(size);
    if (it == stats.by_size.end())
        throw ValidationError("score_configuration: no stats for size " + std::to_string(size));
    const auto [mean, stdev] = it->second;
    const double z = stdev > 0.0 ? (res - mean) / stdev : 0.0;
    return std::exp(z) / std::exp(static_cast<double>(size));
}

WeightMap transfer_weights(const std::vector<ConfigurationScore>& scores,
                           const OcclusionMask& mask, const FacialLayout& layout) {
    layout.validate_mask(mask);
    WeightMap wm;
    wm.occlusion = mask.name.empty() ? "none" : mask.name;
    wm.occluded = mask.occluded;
    for (RegionId r : layout.region_ids()) {
        wm.weights[r] = 0.0;
        wm.apparitions[r] = 0;
    }

    std::vector<const ConfigurationScore*> ordered;
    ordered.reserve(scores.size());
    for (const auto& s : scores) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(),
              [](const ConfigurationScore* a, const ConfigurationScore* b) {
                  return a->config < b->config;
              });

    for (const auto* s : ordered) {
        for (RegionId r : s->config.regions) {
            if (!layout.contains(r))
                throw ValidationError("transfer_weights: unknown region " + std::to_string(r));
            if (mask.occluded.count(r))
                throw ValidationError("transfer_weights: scored configuration touches occluded region " +
                                      std::to_string(r));
        }
        for (RegionId r : s->config.regions) {
            wm.weights[r] += s->omega;
            wm.apparitions[r] += 1;
        }
    }
    for (RegionId r : layout.region_ids()) {
        if (wm.apparitions[r] > 0) wm.weights[r] /= wm.apparitions[r];
    }
    return wm;
}

std::vector<RegionId> rank_regions(const WeightMap& wm) {
    std::vector<RegionId> ids;
    ids.reserve(wm.weights.size());
    for (const auto& [r, w] : wm.weights) ids.push_back(r);
    std::sort(ids.begin(), ids.end(), [&](RegionId a, RegionId b) {
        const bool occ_a = wm.occluded.count(a) != 0;
        const bool occ_b = wm.occluded.count(b) != 0;
        if (occ_a != occ_b) return occ_b;
        const double wa = wm.weights.at(a);
        const double wb = wm.weights.at(b);
        if (wa != wb) return wa > wb;
        return a < b;
    });
    return ids;
}

FacialFramework select_framework(const WeightMap& wm, int n) {
    const std::size_t visible = wm.weights.size() - wm.occluded.size();
    if (n < 1 || static_cast<std::size_t>(n) > visible)
        throw ValidationError("select_framework: n=" + std::to_string(n) + " exceeds the " +
                              std::to_string(visible) + " visible regions");
    const auto ranked = rank_regions(wm);
    FacialFramework fw;
    fw.expression = wm.expression;
    fw.occlusion = wm.occlusion;
    fw.regions.assign(ranked.begin(), ranked.begin() + n);
    return fw;
}

std::vector<ConfigurationScore> score_catalog(const std::vector<Configuration>& configs,
                                              const LabeledSet& data,
                                              const std::string& positive,
                                              const ScoringParams& params, ResCache* cache) {
    std::vector<ConfigurationScore> out(configs.size());
    std::vector<std::size_t> missing;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        out[i].config = configs[i];
        if (cache) {
            auto it = cache->find(configs[i].bits());
            if (it != cache->end()) {
                out[i].res = it->second;
                continue;
            }
        }
        missing.push_back(i);
    }
    parallel_for(missing.size(), [&](std::size_t m) {
        const std::size_t i = missing[m];
        const auto dims = configuration_slots(configs[i], params.bins);
        out[i].res =
            cross_validate(data, positive, params.cv_folds, params.hyper, params.seed, dims).mean;
    });
    if (cache) {
        for (std::size_t i : missing) cache->emplace(configs[i].bits(), out[i].res);
    }
    return out;
}

WeightMap compute_weight_map(const FacialLayout& layout, int max_size, const LabeledSet& data,
                             const std::string& expression, const OcclusionMask& mask,
                             const ScoringParams& params, ResCache* cache) {
    const auto visible = layout.visible_regions(mask);
    const auto catalog = enumerate_configurations(layout, max_size, visible);
    auto scores = score_catalog(catalog.all(), data, expression, params, cache);
    const auto stats = compute_size_stats(scores);
    for (auto& s : scores) s.omega = score_configuration(s.res, s.config.size(), stats);
    WeightMap wm = transfer_weights(scores, mask, layout);
    wm.expression = expression;
    return wm;
}

std::vector<double> sweep_framework_sizes(const WeightMap& wm, const LabeledSet& data,
                                          const ScoringParams& params) {
    const std::size_t visible = wm.weights.size() - wm.occluded.size();
    std::vector<double> acc(visible, 0.0);
    parallel_for(visible, [&](std::size_t i) {
        const auto fw = select_framework(wm, static_cast<int>(i + 1));
        Configuration cfg;
        cfg.regions = fw.regions;
        std::sort(cfg.regions.begin(), cfg.regions.end());
        const auto dims = configuration_slots(cfg, params.bins);
        acc[i] = cross_validate(data, wm.expression, params.cv_folds, params.hyper, params.seed,
                                dims)
                     .mean;
    });
    return acc;
}

void write_weight_maps(const std::vector<WeightMap>& maps, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw StageError("weights: cannot open " + path + " for writing");
    out << "expression,occlusion,region,weight,apparitions\n";
    char buf[64];
    for (const auto& wm : maps) {
        for (const auto& [r, w] : wm.weights) {
            std::snprintf(buf, sizeof buf, "%.17g", w);
            out << wm.expression << ',' << wm.occlusion << ',' << r << ',' << buf << ','
                << wm.apparitions.at(r) << "\n";
        }
    }
    if (!out) throw StageError("weights: write failed for " + path);
}

std::vector<WeightMap> read_weight_maps(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("weights: cannot open " + path);
    std::vector<WeightMap> maps;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("expression,", 0) == 0) continue;
        }
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(line);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 5)
            throw ValidationError("weights: bad row '" + line + "' in " + path);
        WeightMap* wm = nullptr;
        for (auto& m : maps) {
            if (m.expression == cells[0] && m.occlusion == cells[1]) {
                wm = &m;
                break;
            }
        }
        if (!wm) {
            maps.emplace_back();
            wm = &maps.back();
            wm->expression = cells[0];
            wm->occlusion = cells[1];
        }
        try {
            const int region = std::stoi(cells[2]);
            wm->weights[region] = std::stod(cells[3]);
            wm->apparitions[region] = std::stoi(cells[4]);
        } catch (const std::exception&) {
            throw ValidationError("weights: bad row '" + line + "' in " + path);
        }
    }
    // regions never scored under a named occlusion are the occluded ones
    for (auto& wm : maps) {
        if (wm.occlusion == "none") continue;
        for (const auto& [r, count] : wm.apparitions) {
            if (count == 0 && wm.weights.at(r) == 0.0) wm.occluded.insert(r);
        }
    }
    return maps;
}

}  // namespace occluflow
