#include "occluflow/fusion_stack.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace occluflow {

namespace {

// class -> row indices, rows in canonical (id, label, features) order
std::map<std::string, std::vector<std::size_t>> rows_by_class(const LabeledSet& data) {
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (data.ids[a] != data.ids[b]) return data.ids[a] < data.ids[b];
        if (data.labels[a] != data.labels[b]) return data.labels[a] < data.labels[b];
        return data.features[a] < data.features[b];
    });
    std::map<std::string, std::vector<std::size_t>> out;
    for (std::size_t i : idx) out[data.labels[i]].push_back(i);
    return out;
}

}  // namespace

SplitIndices split_dataset(const LabeledSet& data, double fraction, std::uint64_t seed) {
    data.validate();
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ValidationError("split_dataset: fraction must be in (0,1)");
    auto by_class = rows_by_class(data);
    SplitIndices out;
    std::size_t class_index = 0;
    for (auto& [label, idx] : by_class) {
        if (idx.size() < 5)
            throw ValidationError("split_dataset: class '" + label + "' has fewer than 5 rows");
        Rng rng(derive_seed(seed, class_index++));
        rng.shuffle(idx);
        const std::size_t take = static_cast<std::size_t>(fraction * idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < take ? out.first_stage : out.second_stage).push_back(idx[i]);
    }
    std::sort(out.first_stage.begin(), out.first_stage.end());
    std::sort(out.second_stage.begin(), out.second_stage.end());
    return out;
}

LabeledSet subset_rows(const LabeledSet& data, const std::vector<std::size_t>& idx) {
    LabeledSet out;
    for (std::size_t i : idx) out.append(data.features[i], data.labels[i], data.ids[i]);
    return out;
}

std::vector<ExpressionSubset> build_expression_subsets(const LabeledSet& first_stage,
                                                       std::uint64_t seed) {
    first_stage.validate();
    auto by_class = rows_by_class(first_stage);
    if (by_class.size() < 2)
        throw ValidationError("expression subsets: need at least two classes");

    std::vector<std::string> classes;
    for (const auto& [label, idx] : by_class) classes.push_back(label);

    std::vector<ExpressionSubset> out;
    for (std::size_t e = 0; e < classes.size(); ++e) {
        const std::string& expr = classes[e];
        const auto& positives = by_class.at(expr);
        const std::size_t m = positives.size();
        const std::size_t others = classes.size() - 1;

        ExpressionSubset subset;
        subset.expression = expr;
        subset.seed = derive_seed(seed, e);
        for (std::size_t i : positives)
            subset.rows.append(first_stage.features[i], expr, first_stage.ids[i]);

        const std::size_t base = m / others;
        const std::size_t remainder = m - base * others;
        std::size_t other_index = 0;
        for (const auto& label : classes) {
            if (label == expr) continue;
            const std::size_t quota = base + (other_index < remainder ? 1 : 0);
            auto pool = by_class.at(label);
            if (pool.size() < quota)
                throw ValidationError("expression subsets: class '" + label + "' has " +
                                      std::to_string(pool.size()) + " rows, needs " +
                                      std::to_string(quota) + " for '" + expr + "'");
            Rng rng(derive_seed(subset.seed, other_index));
            rng.shuffle(pool);
            for (std::size_t i = 0; i < quota; ++i)
                subset.rows.append(first_stage.features[pool[i]], "rest",
                                   first_stage.ids[pool[i]]);
            ++other_index;
        }
        out.push_back(std::move(subset));
    }
    return out;
}

std::vector<double> FusionStack::probability_vector(const std::vector<double>& gmd) const {
    std::vector<double> out;
    out.reserve(2 * binary_models.size());
    for (const auto& model : binary_models) {
        const auto [p, rest] = model.predict_proba(gmd);
        out.push_back(p);
        out.push_back(rest);
    }
    return out;
}

std::pair<std::string, std::vector<double>> FusionStack::predict_gmd(
    const std::vector<double>& gmd) const {
    const auto vec = probability_vector(gmd);
    auto probs = fusion.predict_proba(vec);
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.size(); ++c)
        if (probs[c] > probs[best]) best = c;
    return {fusion.classes[best], probs};
}

std::pair<std::string, std::vector<double>> FusionStack::predict(
    const MotionSequence& seq, const FacialLayout& layout) const {
    const GmdVector gmd = sequence_gmd(seq, layout, feature_params);
    return predict_gmd(gmd.values);
}

FusionStack train_stack(const LabeledSet& first_stage, const LabeledSet& second_stage,
                        const std::vector<FacialFramework>& frameworks,
                        const FeatureParams& features, const SvmHyper& hyper,
                        std::uint64_t seed) {
    if (frameworks.empty()) throw ValidationError("train_stack: no frameworks");
    for (const auto& fw : frameworks) {
        if (fw.occlusion != frameworks[0].occlusion)
            throw ValidationError("train_stack: frameworks mix occlusions '" +
                                  frameworks[0].occlusion + "' and '" + fw.occlusion + "'");
    }

    FusionStack stack;
    stack.occlusion = frameworks[0].occlusion;
    stack.feature_params = features;
    stack.hyper = hyper;
    stack.seed = seed;

    auto subsets = build_expression_subsets(first_stage, derive_seed(seed, 0x5b5));
    if (subsets.size() != frameworks.size())
        throw ValidationError("train_stack: framework count does not match class count");

    stack.binary_models.resize(subsets.size());
    for (std::size_t e = 0; e < subsets.size(); ++e) {
        const auto& subset = subsets[e];
        const FacialFramework* fw = nullptr;
        for (const auto& candidate : frameworks) {
            if (candidate.expression == subset.expression) {
                fw = &candidate;
                break;
            }
        }
        if (!fw)
            throw ValidationError("train_stack: no framework for expression '" +
                                  subset.expression + "'");
        stack.expressions.push_back(subset.expression);
        stack.frameworks.push_back(*fw);
        Configuration cfg;
        cfg.regions = fw->regions;
        std::sort(cfg.regions.begin(), cfg.regions.end());
        const auto dims = configuration_slots(cfg, features.bins);
        stack.binary_models[e] = train_binary_projected(
            subset.rows, subset.expression, dims, hyper, derive_seed(seed, 1, e), true);
    }

    // frozen first layer: second-stage rows become 12-dim probability vectors
    LabeledSet fusion_rows;
    for (std::size_t i = 0; i < second_stage.size(); ++i)
        fusion_rows.append(stack.probability_vector(second_stage.features[i]),
                           second_stage.labels[i], second_stage.ids[i]);
    stack.fusion = train_multiclass(fusion_rows, hyper, derive_seed(seed, 2));
    return stack;
}

namespace {

std::string trim_copy(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

void save_stack(const FusionStack& stack, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw StageError("stack: cannot create directory " + dir);

    char buf[64];
    std::ofstream manifest(dir + "/manifest.txt");
    if (!manifest) throw StageError("stack: cannot write manifest in " + dir);
    manifest << "occlusion = " << stack.occlusion << "\n";
    manifest << "seed = " << stack.seed << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", stack.hyper.c);
    manifest << "svm_c = " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", stack.hyper.gamma);
    manifest << "svm_gamma = " << buf << "\n";
    manifest << "bins = " << stack.feature_params.bins << "\n";
    manifest << "patch_size = " << stack.feature_params.patch_size << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", stack.feature_params.tau);
    manifest << "tau = " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", stack.feature_params.min_magnitude);
    manifest << "min_magnitude = " << buf << "\n";
    manifest << "expressions = ";
    for (std::size_t e = 0; e < stack.expressions.size(); ++e)
        manifest << (e ? "," : "") << stack.expressions[e];
    manifest << "\n";

    for (std::size_t e = 0; e < stack.expressions.size(); ++e) {
        const auto& expr = stack.expressions[e];
        write_model(stack.binary_models[e], dir + "/binary_" + expr + ".osvm");
        std::ofstream fw(dir + "/framework_" + expr + ".csv");
        if (!fw) throw StageError("stack: cannot write framework csv in " + dir);
        fw << "expression,occlusion,rank,region\n";
        for (std::size_t i = 0; i < stack.frameworks[e].regions.size(); ++i)
            fw << expr << ',' << stack.frameworks[e].occlusion << ',' << (i + 1) << ','
               << stack.frameworks[e].regions[i] << "\n";
    }
    write_multiclass(stack.fusion, dir + "/fusion.omc");
}

FusionStack load_stack(const std::string& dir) {
    std::ifstream manifest(dir + "/manifest.txt");
    if (!manifest) throw ValidationError("stack: cannot open " + dir + "/manifest.txt");
    FusionStack stack;
    std::string line;
    std::vector<std::string> expressions;
    while (std::getline(manifest, line)) {
        line = trim_copy(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("stack manifest: bad line '" + line + "'");
        const std::string key = trim_copy(line.substr(0, eq));
        const std::string value = trim_copy(line.substr(eq + 1));
        try {
            if (key == "occlusion")
                stack.occlusion = value;
            else if (key == "seed")
                stack.seed = std::stoull(value);
            else if (key == "svm_c")
                stack.hyper.c = std::stod(value);
            else if (key == "svm_gamma")
                stack.hyper.gamma = std::stod(value);
            else if (key == "bins")
                stack.feature_params.bins = std::stoi(value);
            else if (key == "patch_size")
                stack.feature_params.patch_size = std::stoi(value);
            else if (key == "tau")
                stack.feature_params.tau = std::stod(value);
            else if (key == "min_magnitude")
                stack.feature_params.min_magnitude = std::stod(value);
            else if (key == "expressions") {
                std::istringstream ss(value);
                std::string tok;
                while (std::getline(ss, tok, ',')) expressions.push_back(trim_copy(tok));
            } else {
                throw ValidationError("stack manifest: unknown key '" + key + "'");
            }
        } catch (const ValidationError&) {
            throw;
        } catch (const std::exception&) {
            throw ValidationError("stack manifest: bad value for '" + key + "'");
        }
    }
    if (expressions.empty()) throw ValidationError("stack manifest: no expressions");

    for (const auto& expr : expressions) {
        stack.expressions.push_back(expr);
        stack.binary_models.push_back(read_model(dir + "/binary_" + expr + ".osvm"));
        std::ifstream fw(dir + "/framework_" + expr + ".csv");
        if (!fw) throw ValidationError("stack: missing framework csv for " + expr);
        FacialFramework framework;
        framework.expression = expr;
        framework.occlusion = stack.occlusion;
        bool first = true;
        while (std::getline(fw, line)) {
            if (line.empty()) continue;
            if (first) {
                first = false;
                if (line.rfind("expression,", 0) == 0) continue;
            }
            std::vector<std::string> cells;
            std::string cell;
            std::istringstream ss(line);
            while (std::getline(ss, cell, ',')) cells.push_back(cell);
            if (cells.size() != 4)
                throw ValidationError("stack: bad framework row '" + line + "'");
            framework.regions.push_back(std::stoi(cells[3]));
        }
        stack.frameworks.push_back(std::move(framework));
    }
    stack.fusion = read_multiclass(dir + "/fusion.omc");
    return stack;
}

}  // namespace occluflow
