// occluflow command line: enumerate | features | synth | weights | train |
// cv | fuse-train | predict | run-plan | heatmap
//
// exit codes: 0 success, 2 validation error, 3 stage failure

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "occluflow/eval.hpp"

namespace fs = std::filesystem;
using namespace occluflow;

namespace {

OcclusionMask resolve_mask(const std::string& masks_file, const std::string& name) {
    if (name.empty() || name == "none") return OcclusionMask{"none", {}};
    if (masks_file.empty())
        throw ValidationError("mask '" + name + "' requested without --masks-file");
    for (auto& m : load_masks(masks_file))
        if (m.name == name) return m;
    throw ValidationError("mask '" + name + "' not found in " + masks_file);
}

std::vector<std::uint32_t> parse_region_dims(const std::string& csv, int bins) {
    if (csv.empty()) return {};
    Configuration cfg;
    std::istringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) cfg.regions.push_back(std::stoi(tok));
    std::sort(cfg.regions.begin(), cfg.regions.end());
    return configuration_slots(cfg, bins);
}

int run(int argc, char** argv) {
    CLI::App app{"occlusion-robust facial expression analysis from motion fields"};
    app.require_subcommand(1);

    FeatureParams feat;
    SvmHyper hyper;
    std::uint64_t seed = 20240801;

    auto add_feature_flags = [&](CLI::App* cmd) {
        cmd->add_option("--bins", feat.bins, "direction histogram bins");
        cmd->add_option("--patch-size", feat.patch_size, "LMR patch side in pixels");
        cmd->add_option("--tau", feat.tau, "coherence threshold");
        cmd->add_option("--min-magnitude", feat.min_magnitude, "flow magnitude gate");
    };
    auto add_hyper_flags = [&](CLI::App* cmd) {
        cmd->add_option("--c", hyper.c, "SVM soft-margin C");
        cmd->add_option("--gamma", hyper.gamma, "RBF gamma (0 = auto)");
        cmd->add_option("--seed", seed, "random seed");
    };

    // enumerate
    std::string layout_path, masks_file, mask_name, out_path;
    int max_size = 8;
    auto* cmd_enum = app.add_subcommand("enumerate", "count connected region configurations");
    cmd_enum->add_option("--layout", layout_path, "layout file")->required();
    cmd_enum->add_option("--max-size", max_size, "largest configuration size");
    cmd_enum->add_option("--mask", mask_name, "restrict to regions visible under this mask");
    cmd_enum->add_option("--masks-file", masks_file, "mask definitions");
    cmd_enum->add_option("--out", out_path, "write the catalog (one configuration per line)");
    cmd_enum->callback([&] {
        const auto layout = FacialLayout::from_file(layout_path);
        const auto mask = resolve_mask(masks_file, mask_name);
        const auto visible = layout.visible_regions(mask);
        const auto catalog = enumerate_configurations(layout, max_size, visible);
        for (const auto& [size, configs] : catalog.by_size)
            std::cout << "size " << size << ": " << configs.size() << "\n";
        std::cout << "total: " << catalog.total << "\n";
        if (!out_path.empty()) {
            std::ofstream out(out_path);
            if (!out) throw StageError("cannot open " + out_path);
            for (const auto& c : catalog.all()) {
                for (std::size_t i = 0; i < c.regions.size(); ++i)
                    out << (i ? "," : "") << c.regions[i];
                out << "\n";
            }
        }
    });

    // features
    std::string in_path, id_override, label_override;
    auto* cmd_feat = app.add_subcommand("features", "motion sequences to GMD feature rows");
    cmd_feat->add_option("--layout", layout_path, "layout file")->required();
    cmd_feat->add_option("--in", in_path, ".mfb file or directory with manifest.csv")->required();
    cmd_feat->add_option("--out", out_path, "output CSV")->required();
    cmd_feat->add_option("--id", id_override, "sequence id (single-file mode)");
    cmd_feat->add_option("--label", label_override, "label (single-file mode)");
    add_feature_flags(cmd_feat);
    cmd_feat->callback([&] {
        const auto layout = FacialLayout::from_file(layout_path);
        GmdTable table;
        if (fs::is_directory(in_path)) {
            std::ifstream manifest(in_path + "/manifest.csv");
            if (!manifest)
                throw ValidationError("features: missing manifest.csv in " + in_path);
            struct Entry {
                std::string id, label;
            };
            std::vector<Entry> entries;
            std::string line;
            bool first = true;
            while (std::getline(manifest, line)) {
                if (line.empty()) continue;
                if (first && line.rfind("sequence_id,", 0) == 0) {
                    first = false;
                    continue;
                }
                first = false;
                std::istringstream ss(line);
                Entry e;
                std::getline(ss, e.id, ',');
                std::getline(ss, e.label, ',');
                entries.push_back(e);
            }
            std::vector<std::vector<double>> rows(entries.size());
            parallel_for(entries.size(), [&](std::size_t i) {
                const auto seq = read_mfb(in_path + "/" + entries[i].id + ".mfb");
                rows[i] = sequence_gmd(seq, layout, feat).values;
            });
            for (std::size_t i = 0; i < entries.size(); ++i)
                table.append(entries[i].id, entries[i].label, std::move(rows[i]));
        } else {
            const auto seq = read_mfb(in_path);
            const std::string id =
                id_override.empty() ? fs::path(in_path).stem().string() : id_override;
            table.append(id, label_override, sequence_gmd(seq, layout, feat).values);
        }
        write_gmd_csv(table, out_path);
        std::cout << "wrote " << table.size() << " rows x " << table.dim() << " dims to "
                  << out_path << "\n";
    });

    // synth
    std::string spec_path;
    auto* cmd_synth = app.add_subcommand("synth", "generate a labeled synthetic dataset");
    cmd_synth->add_option("--spec", spec_path, "dataset spec file")->required();
    cmd_synth->add_option("--layout", layout_path, "layout file")->required();
    cmd_synth->add_option("--out", out_path, "output directory")->required();
    cmd_synth->callback([&] {
        const auto layout = FacialLayout::from_file(layout_path);
        const auto spec = load_synth_spec(spec_path);
        const auto sequences = generate_dataset(spec, layout);
        fs::create_directories(out_path);
        std::ofstream manifest(out_path + "/manifest.csv");
        if (!manifest) throw StageError("cannot open manifest in " + out_path);
        manifest << "sequence_id,label,seed\n";
        std::size_t i = 0;
        for (std::size_t c = 0; c < spec.archetypes.size(); ++c) {
            for (int k = 0; k < spec.sequences_per_class; ++k, ++i) {
                write_mfb(sequences[i], out_path + "/" + sequences[i].sequence_id + ".mfb");
                manifest << sequences[i].sequence_id << ',' << sequences[i].label << ','
                         << sequence_seed(spec, c, k) << "\n";
            }
        }
        std::cout << "wrote " << sequences.size() << " sequences to " << out_path << "\n";
    });

    // weights
    std::string features_path, expr;
    int cv_folds = 10, top_n = 6;
    std::string heatmap_prefix;
    auto* cmd_weights = app.add_subcommand("weights", "region weights for one expression");
    cmd_weights->add_option("--features", features_path, "GMD CSV")->required();
    cmd_weights->add_option("--layout", layout_path, "layout file")->required();
    cmd_weights->add_option("--expr", expr, "expression class")->required();
    cmd_weights->add_option("--mask", mask_name, "occlusion mask name");
    cmd_weights->add_option("--masks-file", masks_file, "mask definitions");
    cmd_weights->add_option("--max-size", max_size, "largest configuration size");
    cmd_weights->add_option("--k", cv_folds, "CV folds per configuration");
    cmd_weights->add_option("--out", out_path, "weight map CSV");
    cmd_weights->add_option("--heatmap", heatmap_prefix, "write heatmap PGM/CSV with this prefix");
    cmd_weights->add_option("--n", top_n, "print the n best regions");
    add_hyper_flags(cmd_weights);
    cmd_weights->add_option("--bins", feat.bins, "direction histogram bins");
    cmd_weights->callback([&] {
        const auto layout = FacialLayout::from_file(layout_path);
        const auto mask = resolve_mask(masks_file, mask_name);
        const auto data = labeled_set_from_table(read_gmd_csv(features_path));
        const auto subsets = build_expression_subsets(data, seed);
        const ExpressionSubset* subset = nullptr;
        for (const auto& s : subsets)
            if (s.expression == expr) subset = &s;
        if (!subset) throw ValidationError("expression '" + expr + "' not in " + features_path);
        ScoringParams params{hyper, cv_folds, seed, feat.bins};
        WeightMap wm = compute_weight_map(layout, max_size, subset->rows, expr, mask, params);
        const auto ranked = rank_regions(wm);
        std::cout << "top regions for " << expr << " under " << wm.occlusion << ":";
        for (int i = 0; i < top_n && i < static_cast<int>(ranked.size()); ++i)
            std::cout << " " << ranked[i];
        std::cout << "\n";
        if (!out_path.empty()) write_weight_maps({wm}, out_path);
        if (!heatmap_prefix.empty()) emit_heatmap(wm, layout, heatmap_prefix);
    });

    // train
    std::string positive, regions_csv, model_path;
    auto* cmd_train = app.add_subcommand("train", "train a binary expression model");
    cmd_train->add_option("--features", features_path, "GMD CSV")->required();
    cmd_train->add_option("--positive", positive, "positive class label")->required();
    cmd_train->add_option("--out", model_path, "model file")->required();
    cmd_train->add_option("--regions", regions_csv, "restrict to these regions (comma ids)");
    cmd_train->add_option("--bins", feat.bins, "direction histogram bins");
    add_hyper_flags(cmd_train);
    cmd_train->callback([&] {
        const auto data = labeled_set_from_table(read_gmd_csv(features_path));
        const auto dims = parse_region_dims(regions_csv, feat.bins);
        const auto model = train_binary_projected(data, positive, dims, hyper, seed, true);
        write_model(model, model_path);
        std::cout << "model: " << model.support_vectors.size() << " support vectors, gamma "
                  << model.gamma << (model.cap_hit ? " (iteration cap hit)" : "") << "\n";
    });

    // cv
    auto* cmd_cv = app.add_subcommand("cv", "k-fold cross-validated accuracy");
    cmd_cv->add_option("--features", features_path, "GMD CSV")->required();
    cmd_cv->add_option("--positive", positive, "positive class label")->required();
    cmd_cv->add_option("--k", cv_folds, "folds");
    cmd_cv->add_option("--regions", regions_csv, "restrict to these regions (comma ids)");
    cmd_cv->add_option("--bins", feat.bins, "direction histogram bins");
    add_hyper_flags(cmd_cv);
    cmd_cv->callback([&] {
        const auto data = labeled_set_from_table(read_gmd_csv(features_path));
        const auto dims = parse_region_dims(regions_csv, feat.bins);
        const auto result = cross_validate(data, positive, cv_folds, hyper, seed, dims);
        std::cout << "mean accuracy: " << result.mean << "\nfolds:";
        for (double v : result.per_fold) std::cout << " " << v;
        std::cout << "\n";
    });

    // fuse-train
    int n_best = 6;
    double split_fraction = 0.4;
    auto* cmd_fuse = app.add_subcommand("fuse-train", "train the two-layer stack for one mask");
    cmd_fuse->add_option("--features", features_path, "GMD CSV")->required();
    cmd_fuse->add_option("--layout", layout_path, "layout file")->required();
    cmd_fuse->add_option("--out", out_path, "stack bundle directory")->required();
    cmd_fuse->add_option("--mask", mask_name, "occlusion mask name");
    cmd_fuse->add_option("--masks-file", masks_file, "mask definitions");
    cmd_fuse->add_option("--max-size", max_size, "largest configuration size");
    cmd_fuse->add_option("--n-best", n_best, "framework size");
    cmd_fuse->add_option("--k", cv_folds, "CV folds for configuration scoring");
    cmd_fuse->add_option("--split", split_fraction, "first-stage fraction");
    add_feature_flags(cmd_fuse);
    add_hyper_flags(cmd_fuse);
    cmd_fuse->callback([&] {
        const auto layout = FacialLayout::from_file(layout_path);
        const auto mask = resolve_mask(masks_file, mask_name);
        const auto data = labeled_set_from_table(read_gmd_csv(features_path));
        const auto split = split_dataset(data, split_fraction, derive_seed(seed, 1));
        const auto first = subset_rows(data, split.first_stage);
        const auto second = subset_rows(data, split.second_stage);
        const auto subsets = build_expression_subsets(first, derive_seed(seed, 2));
        std::vector<FacialFramework> frameworks;
        for (std::size_t e = 0; e < subsets.size(); ++e) {
            ScoringParams params{hyper, cv_folds, derive_seed(seed, 3, e), feat.bins};
            WeightMap wm = compute_weight_map(layout, max_size, subsets[e].rows,
                                              subsets[e].expression, mask, params);
            frameworks.push_back(select_framework(wm, n_best));
            std::cout << subsets[e].expression << " framework:";
            for (RegionId r : frameworks.back().regions) std::cout << " " << r;
            std::cout << "\n";
        }
        const auto stack =
            train_stack(first, second, frameworks, feat, hyper, derive_seed(seed, 5));
        save_stack(stack, out_path);
        std::cout << "stack saved to " << out_path << "\n";
    });

    // predict
    std::string stack_dir;
    auto* cmd_pred = app.add_subcommand("predict", "classify one motion sequence");
    cmd_pred->add_option("--stack", stack_dir, "stack bundle directory")->required();
    cmd_pred->add_option("--layout", layout_path, "layout file")->required();
    cmd_pred->add_option("--in", in_path, ".mfb sequence")->required();
    cmd_pred->callback([&] {
        const auto layout = FacialLayout::from_file(layout_path);
        const auto stack = load_stack(stack_dir);
        const auto seq = read_mfb(in_path);
        const auto [label, probs] = stack.predict(seq, layout);
        std::cout << label << "\n";
        for (std::size_t c = 0; c < probs.size(); ++c)
            std::cout << stack.fusion.classes[c] << " " << probs[c] << "\n";
    });

    // run-plan
    std::string plan_path;
    auto* cmd_plan = app.add_subcommand("run-plan", "execute a full experiment plan");
    cmd_plan->add_option("--plan", plan_path, "plan file")->required();
    cmd_plan->callback([&] {
        const auto plan = load_plan(plan_path);
        const auto report = run_plan(plan);
        for (const auto& summary : report.masks) {
            std::cout << summary.mask << ": fused " << summary.fused_fixed_mean();
            if (!summary.fused_bestn_runs.empty())
                std::cout << " best-n " << summary.fused_bestn_mean();
            if (!summary.baseline_runs.empty())
                std::cout << " baseline " << summary.baseline_mean();
            std::cout << "\n";
        }
        if (!plan.out_dir.empty()) std::cout << "artifacts in " << plan.out_dir << "\n";
    });

    // heatmap
    std::string weights_path, occlusion = "none";
    auto* cmd_heat = app.add_subcommand("heatmap", "render a weight map as a 5x5 graymap");
    cmd_heat->add_option("--weights", weights_path, "weight map CSV")->required();
    cmd_heat->add_option("--layout", layout_path, "layout file")->required();
    cmd_heat->add_option("--expr", expr, "expression class")->required();
    cmd_heat->add_option("--occlusion", occlusion, "occlusion name in the CSV");
    cmd_heat->add_option("--out", out_path, "output prefix (.pgm/.csv appended)")->required();
    cmd_heat->callback([&] {
        const auto layout = FacialLayout::from_file(layout_path);
        for (const auto& wm : read_weight_maps(weights_path)) {
            if (wm.expression == expr && wm.occlusion == occlusion) {
                emit_heatmap(wm, layout, out_path);
                std::cout << "wrote " << out_path << ".pgm\n";
                return;
            }
        }
        throw ValidationError("no map for " + expr + "/" + occlusion + " in " + weights_path);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // help/version exit clean, usage errors are validation
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
