#include "occluflow/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

namespace occluflow {

namespace fs = std::filesystem;

namespace {

std::string trim_copy(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::string fmt(double v, const char* format = "%.17g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ValidationError&) {
        throw;
    } catch (const StageError& e) {
        throw StageError("stage " + name + ": " + e.what());
    } catch (const std::exception& e) {
        throw StageError("stage " + name + ": " + e.what());
    }
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / v.size();
}

}  // namespace

double MaskSummary::fused_fixed_mean() const { return mean_of(fused_fixed_runs); }
double MaskSummary::fused_bestn_mean() const { return mean_of(fused_bestn_runs); }
double MaskSummary::baseline_mean() const { return mean_of(baseline_runs); }

const MaskSummary& ResultsReport::for_mask(const std::string& name) const {
    for (const auto& m : masks)
        if (m.mask == name) return m;
    throw ValidationError("report: no mask '" + name + "'");
}

void ExperimentPlan::validate() const {
    if (layout_path.empty()) throw ValidationError("plan: layout is required");
    const bool has_synth = !synth_spec_path.empty();
    const bool has_csv = !gmd_csv.empty();
    if (has_synth == has_csv)
        throw ValidationError("plan: exactly one of synth_spec / gmd_csv is required");
    if (!mask_names.empty() && masks_file.empty())
        throw ValidationError("plan: masks need a masks_file");
    std::set<std::string> unique(mask_names.begin(), mask_names.end());
    if (unique.size() != mask_names.size())
        throw ValidationError("plan: duplicate mask names");
    if (max_size < 1) throw ValidationError("plan: max_size must be >= 1");
    if (n_best < 1) throw ValidationError("plan: n_best must be >= 1");
    if (cv_folds < 2) throw ValidationError("plan: cv_folds must be >= 2");
    if (runs < 1) throw ValidationError("plan: runs must be >= 1");
    if (!(split_fraction > 0.0 && split_fraction < 1.0))
        throw ValidationError("plan: split_fraction must be in (0,1)");
    if (!(hyper.c > 0.0)) throw ValidationError("plan: svm_c must be > 0");
    if (hyper.gamma < 0.0) throw ValidationError("plan: svm_gamma must be >= 0");
}

ExperimentPlan parse_plan(const std::string& text) {
    ExperimentPlan plan;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim_copy(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("plan: expected 'key = value', got '" + line + "'");
        const std::string key = trim_copy(line.substr(0, eq));
        const std::string value = trim_copy(line.substr(eq + 1));
        try {
            if (key == "layout")
                plan.layout_path = value;
            else if (key == "masks_file")
                plan.masks_file = value;
            else if (key == "masks") {
                std::istringstream ss(value);
                std::string tok;
                while (std::getline(ss, tok, ',')) {
                    tok = trim_copy(tok);
                    if (!tok.empty()) plan.mask_names.push_back(tok);
                }
            } else if (key == "synth_spec")
                plan.synth_spec_path = value;
            else if (key == "gmd_csv")
                plan.gmd_csv = value;
            else if (key == "max_size")
                plan.max_size = std::stoi(value);
            else if (key == "n_best")
                plan.n_best = std::stoi(value);
            else if (key == "cv_folds")
                plan.cv_folds = std::stoi(value);
            else if (key == "runs")
                plan.runs = std::stoi(value);
            else if (key == "split_fraction")
                plan.split_fraction = std::stod(value);
            else if (key == "svm_c")
                plan.hyper.c = std::stod(value);
            else if (key == "svm_gamma")
                plan.hyper.gamma = value == "auto" ? 0.0 : std::stod(value);
            else if (key == "bins")
                plan.features.bins = std::stoi(value);
            else if (key == "patch_size")
                plan.features.patch_size = std::stoi(value);
            else if (key == "tau")
                plan.features.tau = std::stod(value);
            else if (key == "min_magnitude")
                plan.features.min_magnitude = std::stod(value);
            else if (key == "master_seed")
                plan.master_seed = std::stoull(value);
            else if (key == "out_dir")
                plan.out_dir = value;
            else if (key == "emit_models")
                plan.emit_models = value == "1" || value == "true";
            else if (key == "emit_sweep")
                plan.emit_sweep = value == "1" || value == "true";
            else
                throw ValidationError("plan: unknown key '" + key + "'");
        } catch (const ValidationError&) {
            throw;
        } catch (const std::exception&) {
            throw ValidationError("plan: bad value '" + value + "' for " + key);
        }
    }
    plan.validate();
    return plan;
}

ExperimentPlan load_plan(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("plan: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_plan(buf.str());
}

void emit_heatmap(const WeightMap& wm, const FacialLayout& layout, const std::string& path) {
    if (layout.region_count() != 25)
        throw ValidationError("heatmap: needs the 25-region layout");
    // rows by vertical center, columns by horizontal center
    std::vector<RegionId> ids = layout.region_ids();
    std::sort(ids.begin(), ids.end(), [&](RegionId a, RegionId b) {
        const Rect& ra = layout.rect(a);
        const Rect& rb = layout.rect(b);
        if (ra.cy() != rb.cy()) return ra.cy() < rb.cy();
        return ra.cx() < rb.cx();
    });

    double min_w = 0.0, max_w = 0.0;
    bool any = false;
    for (const auto& [r, w] : wm.weights) {
        if (wm.apparitions.at(r) == 0) continue;
        if (!any) {
            min_w = max_w = w;
            any = true;
        } else {
            min_w = std::min(min_w, w);
            max_w = std::max(max_w, w);
        }
    }

    auto gray = [&](RegionId r) -> int {
        auto it = wm.weights.find(r);
        if (it == wm.weights.end()) throw ValidationError("heatmap: weight map misses region");
        if (wm.apparitions.at(r) == 0) return 0;
        if (!any || max_w == min_w) return 128;
        return static_cast<int>(std::lround(255.0 * (it->second - min_w) / (max_w - min_w)));
    };

    std::ofstream pgm(path + ".pgm");
    if (!pgm) throw StageError("heatmap: cannot open " + path + ".pgm");
    pgm << "P2\n# " << wm.expression << " / " << wm.occlusion << "\n5 5\n255\n";
    for (int row = 0; row < 5; ++row) {
        for (int col = 0; col < 5; ++col)
            pgm << (col ? " " : "") << gray(ids[row * 5 + col]);
        pgm << "\n";
    }

    std::ofstream csv(path + ".csv");
    if (!csv) throw StageError("heatmap: cannot open " + path + ".csv");
    csv << "region,row,col,weight,apparitions,gray\n";
    for (int row = 0; row < 5; ++row) {
        for (int col = 0; col < 5; ++col) {
            const RegionId r = ids[row * 5 + col];
            csv << r << ',' << row << ',' << col << ',' << fmt(wm.weights.at(r)) << ','
                << wm.apparitions.at(r) << ',' << gray(r) << "\n";
        }
    }
}

// ---- plan engine ----------------------------------------------------------

namespace {

struct EngineOptions {
    bool adapted = true;
    bool baseline = true;
};

struct MaskEntry {
    std::string name;  // "none" or mask name
    std::optional<OcclusionMask> mask;
};

struct Prepared {
    std::optional<FacialLayout> layout;
    std::vector<MaskEntry> mask_entries;
    GmdTable table;
    std::vector<GmdTable> occluded;  // parallel to mask_entries
};

Prepared prepare(const ExperimentPlan& plan) {
    Prepared p;
    p.layout.emplace(stage("load layout", [&] { return FacialLayout::from_file(plan.layout_path); }));

    p.mask_entries.push_back({"none", std::nullopt});
    if (!plan.mask_names.empty()) {
        auto masks = stage("load masks", [&] { return load_masks(plan.masks_file); });
        for (const auto& name : plan.mask_names) {
            auto it = std::find_if(masks.begin(), masks.end(),
                                   [&](const OcclusionMask& m) { return m.name == name; });
            if (it == masks.end())
                throw ValidationError("plan: mask '" + name + "' not found in " + plan.masks_file);
            p.layout->validate_mask(*it);
            p.mask_entries.push_back({name, *it});
        }
    }

    if (!plan.synth_spec_path.empty()) {
        p.table = stage("generate dataset", [&] {
            const auto spec = load_synth_spec(plan.synth_spec_path);
            const auto sequences = generate_dataset(spec, *p.layout);
            GmdTable table;
            std::vector<std::vector<double>> rows(sequences.size());
            parallel_for(sequences.size(), [&](std::size_t i) {
                rows[i] = sequence_gmd(sequences[i], *p.layout, plan.features).values;
            });
            for (std::size_t i = 0; i < sequences.size(); ++i)
                table.append(sequences[i].sequence_id, sequences[i].label, std::move(rows[i]));
            return table;
        });
    } else {
        p.table = stage("load features", [&] { return read_gmd_csv(plan.gmd_csv); });
    }
    const std::size_t expect =
        static_cast<std::size_t>(p.layout->region_count()) * plan.features.bins;
    if (p.table.dim() != expect)
        throw ValidationError("plan: feature dim " + std::to_string(p.table.dim()) +
                              " does not match regions*bins = " + std::to_string(expect));

    // occluded views: zeroing the occluded slots equals re-extracting features
    // from a sigma-0 occluded sequence (checked by the feature-law tests)
    for (const auto& entry : p.mask_entries) {
        GmdTable t = p.table;
        if (entry.mask) {
            for (auto& row : t.rows) {
                for (RegionId r : entry.mask->occluded) {
                    for (int b = 0; b < plan.features.bins; ++b)
                        row[static_cast<std::size_t>(r - 1) * plan.features.bins + b] = 0.0;
                }
            }
        }
        p.occluded.push_back(std::move(t));
    }
    return p;
}

struct FoldEval {
    double accuracy = 0.0;
    std::vector<std::vector<std::size_t>> confusion;  // [truth][pred]
};

// fusion-layer k-fold CV: fusion models are refit per fold on the training
// side's probability vectors, tested on the (possibly occluded) test side
FoldEval eval_fused_cv(const LabeledSet& prob_train, const std::vector<std::vector<double>>& prob_test,
                       const std::vector<std::string>& classes, const std::vector<int>& folds,
                       int k, const SvmHyper& hyper, std::uint64_t seed) {
    FoldEval out;
    out.confusion.assign(classes.size(), std::vector<std::size_t>(classes.size(), 0));
    std::vector<std::vector<std::vector<std::size_t>>> slot(
        k, std::vector<std::vector<std::size_t>>(classes.size(),
                                                 std::vector<std::size_t>(classes.size(), 0)));
    parallel_for(static_cast<std::size_t>(k), [&](std::size_t f) {
        LabeledSet train;
        std::vector<std::size_t> test;
        for (std::size_t i = 0; i < prob_train.size(); ++i) {
            if (folds[i] == static_cast<int>(f))
                test.push_back(i);
            else
                train.append(prob_train.features[i], prob_train.labels[i], prob_train.ids[i]);
        }
        const auto model = train_multiclass(train, hyper, derive_seed(seed, f));
        for (std::size_t i : test) {
            const std::string pred = model.predict(prob_test[i]);
            const auto t = std::find(classes.begin(), classes.end(), prob_train.labels[i]);
            const auto q = std::find(classes.begin(), classes.end(), pred);
            slot[f][t - classes.begin()][q - classes.begin()] += 1;
        }
    });
    std::size_t correct = 0, total = 0;
    for (int f = 0; f < k; ++f)
        for (std::size_t a = 0; a < classes.size(); ++a)
            for (std::size_t b = 0; b < classes.size(); ++b) out.confusion[a][b] += slot[f][a][b];
    for (std::size_t a = 0; a < classes.size(); ++a)
        for (std::size_t b = 0; b < classes.size(); ++b) {
            total += out.confusion[a][b];
            if (a == b) correct += out.confusion[a][b];
        }
    out.accuracy = total ? static_cast<double>(correct) / total : 0.0;
    return out;
}

void write_confusion(const std::vector<std::vector<std::size_t>>& confusion,
                     const std::vector<std::string>& classes, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw StageError("report: cannot open " + path);
    out << "truth\\pred";
    for (const auto& c : classes) out << ',' << c;
    out << "\n";
    for (std::size_t a = 0; a < classes.size(); ++a) {
        out << classes[a];
        for (std::size_t b = 0; b < classes.size(); ++b) out << ',' << confusion[a][b];
        out << "\n";
    }
}

ResultsReport run_engine(const ExperimentPlan& plan, const EngineOptions& options) {
    plan.validate();
    Prepared prep = prepare(plan);
    const FacialLayout& layout = *prep.layout;
    const LabeledSet data = labeled_set_from_table(prep.table);

    ResultsReport report;
    {
        std::set<std::string> classes(data.labels.begin(), data.labels.end());
        report.classes.assign(classes.begin(), classes.end());
    }

    const auto catalog = stage("enumerate", [&] {
        return enumerate_configurations(layout, plan.max_size);
    });
    for (const auto& [size, configs] : catalog.by_size)
        report.catalog_sizes[size] = configs.size();
    const auto all_configs = catalog.all();

    const bool writing = !plan.out_dir.empty();
    if (writing) {
        std::error_code ec;
        fs::create_directories(plan.out_dir, ec);
        if (ec) throw StageError("report: cannot create " + plan.out_dir);
    }

    report.masks.resize(prep.mask_entries.size());
    for (std::size_t m = 0; m < prep.mask_entries.size(); ++m)
        report.masks[m].mask = prep.mask_entries[m].name;

    std::vector<RegionId> all_regions = layout.region_ids();

    for (int run = 0; run < plan.runs; ++run) {
        const std::uint64_t run_seed = derive_seed(plan.master_seed, 100 + run);
        const std::string run_dir =
            writing ? plan.out_dir + "/runs/run_" + (run < 10 ? "0" : "") + std::to_string(run)
                    : "";
        if (writing) fs::create_directories(run_dir);

        const auto split = stage("split", [&] {
            return split_dataset(data, plan.split_fraction, derive_seed(run_seed, 1));
        });
        const LabeledSet first = subset_rows(data, split.first_stage);
        const LabeledSet second = subset_rows(data, split.second_stage);
        if (writing) {
            std::ofstream out(run_dir + "/splits.csv");
            out << "sequence_id,label,stage\n";
            for (std::size_t i : split.first_stage)
                out << data.ids[i] << ',' << data.labels[i] << ",first\n";
            for (std::size_t i : split.second_stage)
                out << data.ids[i] << ',' << data.labels[i] << ",second\n";
        }

        const auto subsets = stage("expression subsets", [&] {
            return build_expression_subsets(first, derive_seed(run_seed, 2));
        });

        // score the full catalog once per expression; occlusion contexts
        // reuse these via the visible-configuration filter
        std::vector<std::vector<ConfigurationScore>> full_scores(subsets.size());
        stage("score configurations", [&] {
            for (std::size_t e = 0; e < subsets.size(); ++e) {
                ScoringParams params{plan.hyper, plan.cv_folds, derive_seed(run_seed, 3, e),
                                     plan.features.bins};
                full_scores[e] = score_catalog(all_configs, subsets[e].rows,
                                               subsets[e].expression, params, nullptr);
            }
            return 0;
        });
        if (writing) {
            for (std::size_t e = 0; e < subsets.size(); ++e) {
                std::ofstream out(run_dir + "/scores_" + subsets[e].expression + ".csv");
                out << "regions,size,res\n";
                for (const auto& s : full_scores[e]) {
                    for (std::size_t i = 0; i < s.config.regions.size(); ++i)
                        out << (i ? ";" : "") << s.config.regions[i];
                    out << ',' << s.config.size() << ',' << fmt(s.res) << "\n";
                }
            }
        }

        // shared fusion folds, so mask/baseline comparisons are paired
        const auto folds = stratified_folds(second, plan.cv_folds, derive_seed(run_seed, 4));

        // baseline: full 25-region frameworks trained on unoccluded data
        std::optional<FusionStack> baseline_stack;
        LabeledSet baseline_prob_train;
        if (options.baseline) {
            stage("baseline stack", [&] {
                std::vector<FacialFramework> frameworks;
                for (const auto& subset : subsets)
                    frameworks.push_back({subset.expression, "none", all_regions});
                baseline_stack.emplace(train_stack(first, second, frameworks, plan.features,
                                                   plan.hyper, derive_seed(run_seed, 7)));
                for (std::size_t i = 0; i < second.size(); ++i)
                    baseline_prob_train.append(
                        baseline_stack->probability_vector(second.features[i]), second.labels[i],
                        second.ids[i]);
                return 0;
            });
            if (writing && plan.emit_models)
                save_stack(*baseline_stack, run_dir + "/baseline_stack");
        }

        for (std::size_t m = 0; m < prep.mask_entries.size(); ++m) {
            const auto& entry = prep.mask_entries[m];
            MaskSummary& summary = report.masks[m];
            OcclusionMask mask = entry.mask ? *entry.mask : OcclusionMask{"none", {}};

            const std::string mask_dir = writing ? run_dir + "/" + entry.name : "";
            if (writing) fs::create_directories(mask_dir);

            // occluded second-stage rows (test side of the fusion CV)
            std::vector<std::vector<double>> test_rows;
            test_rows.reserve(split.second_stage.size());
            for (std::size_t i : split.second_stage)
                test_rows.push_back(prep.occluded[m].rows[i]);

            if (options.adapted) {
                const std::uint32_t visible_bits = [&] {
                    std::uint32_t bits = 0;
                    for (RegionId r : layout.visible_regions(mask)) bits |= 1u << (r - 1);
                    return bits;
                }();

                std::vector<FacialFramework> fixed_frameworks, best_frameworks;
                std::vector<WeightMap> weight_maps;
                stage("weights " + entry.name, [&] {
                    for (std::size_t e = 0; e < subsets.size(); ++e) {
                        std::vector<ConfigurationScore> filtered;
                        for (const auto& s : full_scores[e])
                            if ((s.config.bits() & ~visible_bits) == 0) filtered.push_back(s);
                        const auto stats = compute_size_stats(filtered);
                        for (auto& s : filtered)
                            s.omega = score_configuration(s.res, s.config.size(), stats);
                        WeightMap wm = transfer_weights(filtered, mask, layout);
                        wm.expression = subsets[e].expression;
                        if (!entry.mask) wm.occlusion = "none";

                        fixed_frameworks.push_back(select_framework(wm, plan.n_best));
                        if (plan.emit_sweep) {
                            ScoringParams params{plan.hyper, plan.cv_folds,
                                                 derive_seed(run_seed, 3, e),
                                                 plan.features.bins};
                            const auto curve = sweep_framework_sizes(wm, subsets[e].rows, params);
                            auto& acc = summary.curves[wm.expression];
                            if (acc.empty()) acc.assign(curve.size(), 0.0);
                            for (std::size_t i = 0; i < curve.size(); ++i)
                                acc[i] += curve[i] / plan.runs;
                            std::size_t best_n = 1;
                            for (std::size_t i = 1; i < curve.size(); ++i)
                                if (curve[i] > curve[best_n - 1]) best_n = i + 1;
                            best_frameworks.push_back(
                                select_framework(wm, static_cast<int>(best_n)));
                            summary.binary_cv_runs[wm.expression].push_back(
                                curve[std::min<std::size_t>(plan.n_best, curve.size()) - 1]);
                        } else {
                            Configuration cfg;
                            cfg.regions = fixed_frameworks.back().regions;
                            std::sort(cfg.regions.begin(), cfg.regions.end());
                            const auto acc =
                                cross_validate(subsets[e].rows, subsets[e].expression,
                                               plan.cv_folds, plan.hyper,
                                               derive_seed(run_seed, 3, e),
                                               configuration_slots(cfg, plan.features.bins));
                            summary.binary_cv_runs[wm.expression].push_back(acc.mean);
                        }
                        // mean weights over runs (apparitions are run-invariant)
                        auto [it, inserted] =
                            summary.mean_weights.emplace(wm.expression, wm);
                        if (inserted) {
                            for (auto& [r, w] : it->second.weights) w /= plan.runs;
                        } else {
                            for (auto& [r, w] : it->second.weights)
                                w += wm.weights.at(r) / plan.runs;
                        }
                        weight_maps.push_back(std::move(wm));
                    }
                    return 0;
                });
                if (writing) write_weight_maps(weight_maps, mask_dir + "/weights.csv");

                const auto eval_adapted = [&](const std::vector<FacialFramework>& frameworks,
                                              std::uint64_t seed_tag) {
                    FusionStack stack =
                        train_stack(first, second, frameworks, plan.features, plan.hyper,
                                    derive_seed(run_seed, seed_tag, m));
                    LabeledSet prob_train;
                    for (std::size_t i = 0; i < second.size(); ++i)
                        prob_train.append(stack.probability_vector(second.features[i]),
                                          second.labels[i], second.ids[i]);
                    std::vector<std::vector<double>> prob_test;
                    prob_test.reserve(test_rows.size());
                    for (const auto& row : test_rows)
                        prob_test.push_back(stack.probability_vector(row));
                    const auto eval =
                        eval_fused_cv(prob_train, prob_test, report.classes, folds,
                                      plan.cv_folds, plan.hyper, derive_seed(run_seed, 6, m));
                    return std::make_pair(std::move(stack), eval);
                };

                stage("fuse " + entry.name, [&] {
                    auto [fixed_stack, fixed_eval] = eval_adapted(fixed_frameworks, 8);
                    summary.fused_fixed_runs.push_back(fixed_eval.accuracy);
                    if (summary.confusion.empty())
                        summary.confusion.assign(report.classes.size(),
                                                 std::vector<std::size_t>(report.classes.size(), 0));
                    for (std::size_t a = 0; a < report.classes.size(); ++a)
                        for (std::size_t b = 0; b < report.classes.size(); ++b)
                            summary.confusion[a][b] += fixed_eval.confusion[a][b];
                    if (writing) {
                        write_confusion(fixed_eval.confusion, report.classes,
                                        mask_dir + "/confusion_fixed.csv");
                        if (plan.emit_models) save_stack(fixed_stack, mask_dir + "/stack_fixed");
                    }
                    if (plan.emit_sweep) {
                        auto [best_stack, best_eval] = eval_adapted(best_frameworks, 9);
                        summary.fused_bestn_runs.push_back(best_eval.accuracy);
                        if (writing && plan.emit_models)
                            save_stack(best_stack, mask_dir + "/stack_bestn");
                    }
                    return 0;
                });
            }

            if (options.baseline) {
                stage("baseline " + entry.name, [&] {
                    std::vector<std::vector<double>> prob_test;
                    prob_test.reserve(test_rows.size());
                    for (const auto& row : test_rows)
                        prob_test.push_back(baseline_stack->probability_vector(row));
                    const auto eval =
                        eval_fused_cv(baseline_prob_train, prob_test, report.classes, folds,
                                      plan.cv_folds, plan.hyper, derive_seed(run_seed, 6, m));
                    summary.baseline_runs.push_back(eval.accuracy);
                    if (writing)
                        write_confusion(eval.confusion, report.classes,
                                        mask_dir + "/confusion_baseline.csv");
                    return 0;
                });
            }
        }
    }

    if (writing) {
        stage("report", [&] {
            // curves and heatmaps
            if (options.adapted) {
                fs::create_directories(plan.out_dir + "/curves");
                fs::create_directories(plan.out_dir + "/heatmaps");
                for (const auto& summary : report.masks) {
                    for (const auto& [expr, curve] : summary.curves) {
                        std::ofstream out(plan.out_dir + "/curves/" + summary.mask + "_" + expr +
                                          ".csv");
                        out << "n,accuracy\n";
                        for (std::size_t i = 0; i < curve.size(); ++i)
                            out << (i + 1) << ',' << fmt(curve[i]) << "\n";
                    }
                    for (const auto& [expr, wm] : summary.mean_weights)
                        emit_heatmap(wm, layout,
                                     plan.out_dir + "/heatmaps/" + summary.mask + "_" + expr);
                }
            }

            std::ofstream csv(plan.out_dir + "/report.csv");
            csv << "mask,run,fused_fixed,fused_bestn,baseline";
            for (const auto& c : report.classes) csv << ",cv_" << c;
            csv << "\n";
            for (const auto& summary : report.masks) {
                for (int run = 0; run < plan.runs; ++run) {
                    csv << summary.mask << ',' << run;
                    const auto cell = [&](const std::vector<double>& v) {
                        csv << ',';
                        if (static_cast<std::size_t>(run) < v.size()) csv << fmt(v[run]);
                    };
                    cell(summary.fused_fixed_runs);
                    cell(summary.fused_bestn_runs);
                    cell(summary.baseline_runs);
                    for (const auto& c : report.classes) {
                        csv << ',';
                        auto it = summary.binary_cv_runs.find(c);
                        if (it != summary.binary_cv_runs.end() &&
                            static_cast<std::size_t>(run) < it->second.size())
                            csv << fmt(it->second[run]);
                    }
                    csv << "\n";
                }
            }

            std::ofstream txt(plan.out_dir + "/report.txt");
            txt << "occluflow experiment report\n";
            txt << "layout: " << plan.layout_path << " (" << layout.region_count()
                << " regions, " << layout.edge_count() << " edges)\n";
            txt << "dataset: "
                << (plan.synth_spec_path.empty() ? plan.gmd_csv : plan.synth_spec_path) << " ("
                << data.size() << " sequences, " << report.classes.size() << " classes)\n";
            txt << "configurations (max_size " << plan.max_size << "):";
            for (const auto& [size, count] : report.catalog_sizes)
                txt << " " << size << ":" << count;
            txt << " total:" << catalog.total << "\n";
            txt << "runs: " << plan.runs << ", cv_folds: " << plan.cv_folds
                << ", n_best: " << plan.n_best << ", C: " << fmt(plan.hyper.c, "%.6g")
                << ", gamma: "
                << (plan.hyper.gamma > 0 ? fmt(plan.hyper.gamma, "%.6g") : std::string("auto"))
                << ", master_seed: " << plan.master_seed << "\n\n";
            txt << "mean fused accuracy over runs\n";
            txt << "mask        fixed" << plan.n_best << "   best-n   baseline-"
                << layout.region_count() << "\n";
            for (const auto& summary : report.masks) {
                txt << summary.mask;
                for (std::size_t pad = summary.mask.size(); pad < 12; ++pad) txt << ' ';
                txt << fmt(summary.fused_fixed_mean(), "%.6f") << ' ';
                if (!summary.fused_bestn_runs.empty())
                    txt << fmt(summary.fused_bestn_mean(), "%.6f") << ' ';
                else
                    txt << "-        ";
                if (!summary.baseline_runs.empty())
                    txt << fmt(summary.baseline_mean(), "%.6f");
                else
                    txt << "-";
                txt << "\n";
            }
            txt << "\nper-expression binary cv (fixed frameworks), mean over runs\n";
            txt << "mask";
            for (const auto& c : report.classes) txt << ' ' << c;
            txt << "\n";
            for (const auto& summary : report.masks) {
                if (summary.binary_cv_runs.empty()) continue;
                txt << summary.mask;
                for (const auto& c : report.classes) {
                    auto it = summary.binary_cv_runs.find(c);
                    txt << ' '
                        << (it == summary.binary_cv_runs.end() ? std::string("-")
                                                               : fmt(mean_of(it->second), "%.6f"));
                }
                txt << "\n";
            }
            return 0;
        });
    }
    return report;
}

}  // namespace

ResultsReport run_plan(const ExperimentPlan& plan) {
    EngineOptions options;
    return run_engine(plan, options);
}

std::map<std::string, double> baseline_unadapted(const ExperimentPlan& plan) {
    EngineOptions options;
    options.adapted = false;
    ExperimentPlan quiet = plan;
    quiet.out_dir.clear();
    const auto report = run_engine(quiet, options);
    std::map<std::string, double> out;
    for (const auto& summary : report.masks) out[summary.mask] = summary.baseline_mean();
    return out;
}

}  // namespace occluflow
