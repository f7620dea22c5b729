#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "occluflow/eval.hpp"

namespace py = pybind11;
using namespace occluflow;

namespace {

FeatureParams make_params(int bins, int patch_size, double tau, double min_magnitude) {
    FeatureParams p;
    p.bins = bins;
    p.patch_size = patch_size;
    p.tau = tau;
    p.min_magnitude = min_magnitude;
    return p;
}

// flow array of shape (frames, height, width, 2) -> MotionSequence
MotionSequence sequence_from_array(py::array_t<float, py::array::c_style | py::array::forcecast> flow) {
    const auto buf = flow.request();
    if (buf.ndim != 4 || buf.shape[3] != 2)
        throw ValidationError("flow array must have shape (frames, height, width, 2)");
    MotionSequence seq;
    const auto* data = static_cast<const float*>(buf.ptr);
    const int frames = static_cast<int>(buf.shape[0]);
    const int h = static_cast<int>(buf.shape[1]);
    const int w = static_cast<int>(buf.shape[2]);
    for (int t = 0; t < frames; ++t) {
        MotionField field(w, h);
        std::copy(data + static_cast<std::size_t>(t) * h * w * 2,
                  data + static_cast<std::size_t>(t + 1) * h * w * 2, field.flow.begin());
        seq.fields.push_back(std::move(field));
    }
    return seq;
}

py::array_t<float> sequence_to_array(const MotionSequence& seq) {
    const int frames = static_cast<int>(seq.fields.size());
    const int h = seq.fields.empty() ? 0 : seq.fields[0].height;
    const int w = seq.fields.empty() ? 0 : seq.fields[0].width;
    py::array_t<float> out({frames, h, w, 2});
    auto buf = out.mutable_unchecked<4>();
    for (int t = 0; t < frames; ++t) {
        const auto& f = seq.fields[t];
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                buf(t, y, x, 0) = f.dx(x, y);
                buf(t, y, x, 1) = f.dy(x, y);
            }
    }
    return out;
}

LabeledSet set_from_numpy(py::array_t<double, py::array::c_style | py::array::forcecast> x,
                          const std::vector<std::string>& labels,
                          const std::vector<std::string>& ids) {
    const auto buf = x.request();
    if (buf.ndim != 2) throw ValidationError("feature matrix must be 2-D");
    const auto rows = static_cast<std::size_t>(buf.shape[0]);
    const auto dim = static_cast<std::size_t>(buf.shape[1]);
    if (labels.size() != rows) throw ValidationError("labels length must match rows");
    if (!ids.empty() && ids.size() != rows) throw ValidationError("ids length must match rows");
    const auto* data = static_cast<const double*>(buf.ptr);
    LabeledSet out;
    for (std::size_t i = 0; i < rows; ++i)
        out.append(std::vector<double>(data + i * dim, data + (i + 1) * dim), labels[i],
                   ids.empty() ? std::string() : ids[i]);
    out.validate();
    return out;
}

OcclusionMask mask_from_ids(const std::vector<int>& occluded, const std::string& name) {
    OcclusionMask mask;
    mask.name = name.empty() ? (occluded.empty() ? "none" : "custom") : name;
    mask.occluded.insert(occluded.begin(), occluded.end());
    return mask;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "occlusion-robust facial expression analysis from motion fields";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<StageError>(m, "StageError", PyExc_RuntimeError);

    py::class_<FacialLayout>(m, "Layout")
        .def_static("load", &FacialLayout::from_file, py::arg("path"))
        .def_static("parse", &FacialLayout::from_text, py::arg("text"))
        .def_property_readonly("region_count", &FacialLayout::region_count)
        .def_property_readonly("edge_count", &FacialLayout::edge_count)
        .def("neighbors",
             [](const FacialLayout& self, RegionId r) {
                 const auto& n = self.neighbors(r);
                 return std::vector<RegionId>(n.begin(), n.end());
             },
             py::arg("region"))
        .def("visible_regions",
             [](const FacialLayout& self, const std::vector<int>& occluded) {
                 const auto v = self.visible_regions(mask_from_ids(occluded, "query"));
                 return std::vector<RegionId>(v.begin(), v.end());
             },
             py::arg("occluded"))
        .def("region_of_pixel",
             [](const FacialLayout& self, double x, double y) -> py::object {
                 const auto r = self.region_of_pixel(x, y);
                 if (!r) return py::none();
                 return py::int_(*r);
             },
             py::arg("x"), py::arg("y"));

    m.def("load_masks", [](const std::string& path) {
        std::vector<std::pair<std::string, std::vector<int>>> out;
        for (const auto& mask : load_masks(path))
            out.emplace_back(mask.name,
                             std::vector<int>(mask.occluded.begin(), mask.occluded.end()));
        return out;
    });

    m.def(
        "is_connected",
        [](const FacialLayout& layout, const std::vector<int>& regions) {
            return is_connected(layout, std::set<RegionId>(regions.begin(), regions.end()));
        },
        py::arg("layout"), py::arg("regions"));

    m.def(
        "enumerate_configurations",
        [](const FacialLayout& layout, int max_size, const std::vector<int>& restrict_to) {
            std::set<RegionId> allowed(restrict_to.begin(), restrict_to.end());
            if (restrict_to.empty())
                allowed.insert(layout.region_ids().begin(), layout.region_ids().end());
            const auto catalog = enumerate_configurations(layout, max_size, allowed);
            std::map<int, std::vector<std::vector<RegionId>>> out;
            for (const auto& [size, configs] : catalog.by_size) {
                auto& dst = out[size];
                for (const auto& c : configs) dst.push_back(c.regions);
            }
            return out;
        },
        py::arg("layout"), py::arg("max_size"), py::arg("restrict_to") = std::vector<int>());

    m.def(
        "graph_distances",
        [](const FacialLayout& layout, const std::vector<int>& sources) {
            return graph_distances(layout, std::vector<RegionId>(sources.begin(), sources.end()));
        },
        py::arg("layout"), py::arg("sources"));

    m.def(
        "sequence_gmd",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> flow,
           const FacialLayout& layout, int bins, int patch_size, double tau,
           double min_magnitude) {
            const auto seq = sequence_from_array(std::move(flow));
            const auto gmd =
                sequence_gmd(seq, layout, make_params(bins, patch_size, tau, min_magnitude));
            return py::array_t<double>(static_cast<py::ssize_t>(gmd.values.size()),
                                       gmd.values.data());
        },
        py::arg("flow"), py::arg("layout"), py::arg("bins") = 12, py::arg("patch_size") = 8,
        py::arg("tau") = 0.7, py::arg("min_magnitude") = 0.5);

    m.def(
        "apply_occlusion",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> flow,
           const FacialLayout& layout, const std::vector<int>& occluded, double sigma,
           std::uint64_t seed) {
            const auto seq = sequence_from_array(std::move(flow));
            return sequence_to_array(
                apply_occlusion(seq, layout, mask_from_ids(occluded, "custom"), sigma, seed));
        },
        py::arg("flow"), py::arg("layout"), py::arg("occluded"), py::arg("sigma") = 0.0,
        py::arg("seed") = 0);

    m.def(
        "synth_gmd",
        [](const std::string& spec_path, const FacialLayout& layout, int bins, int patch_size,
           double tau, double min_magnitude) {
            const auto spec = load_synth_spec(spec_path);
            const auto sequences = generate_dataset(spec, layout);
            const auto params = make_params(bins, patch_size, tau, min_magnitude);
            std::vector<std::string> ids, labels;
            const std::size_t dim =
                static_cast<std::size_t>(layout.region_count()) * params.bins;
            py::array_t<double> x({sequences.size(), dim});
            auto buf = x.mutable_unchecked<2>();
            std::vector<std::vector<double>> rows(sequences.size());
            parallel_for(sequences.size(), [&](std::size_t i) {
                rows[i] = sequence_gmd(sequences[i], layout, params).values;
            });
            for (std::size_t i = 0; i < sequences.size(); ++i) {
                ids.push_back(sequences[i].sequence_id);
                labels.push_back(sequences[i].label);
                for (std::size_t j = 0; j < dim; ++j) buf(i, j) = rows[i][j];
            }
            return py::make_tuple(ids, labels, x);
        },
        py::arg("spec_path"), py::arg("layout"), py::arg("bins") = 12, py::arg("patch_size") = 8,
        py::arg("tau") = 0.7, py::arg("min_magnitude") = 0.5);

    py::class_<TrainedModel>(m, "Model")
        .def("decision_value", &TrainedModel::decision_value, py::arg("x"))
        .def("predict_proba", &TrainedModel::predict_proba, py::arg("x"))
        .def("save", [](const TrainedModel& self, const std::string& path) { write_model(self, path); })
        .def_static("load", [](const std::string& path) { return read_model(path); })
        .def_property_readonly("gamma", [](const TrainedModel& self) { return self.gamma; })
        .def_property_readonly("support_vector_count",
                               [](const TrainedModel& self) { return self.support_vectors.size(); });

    m.def(
        "train_binary",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> x,
           const std::vector<std::string>& labels, const std::string& positive, double c,
           double gamma, std::uint64_t seed, const std::vector<std::string>& ids) {
            return train_binary(set_from_numpy(std::move(x), labels, ids), positive,
                                SvmHyper{c, gamma}, seed, true);
        },
        py::arg("x"), py::arg("labels"), py::arg("positive"), py::arg("c") = 1.0,
        py::arg("gamma") = 0.0, py::arg("seed") = 0,
        py::arg("ids") = std::vector<std::string>());

    m.def(
        "cross_validate",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> x,
           const std::vector<std::string>& labels, const std::string& positive, int k, double c,
           double gamma, std::uint64_t seed, const std::vector<std::string>& ids) {
            const auto result = cross_validate(set_from_numpy(std::move(x), labels, ids), positive,
                                               k, SvmHyper{c, gamma}, seed);
            return py::make_tuple(result.mean, result.per_fold);
        },
        py::arg("x"), py::arg("labels"), py::arg("positive"), py::arg("k") = 10,
        py::arg("c") = 1.0, py::arg("gamma") = 0.0, py::arg("seed") = 0,
        py::arg("ids") = std::vector<std::string>());

    m.def(
        "weight_map",
        [](const FacialLayout& layout, int max_size,
           py::array_t<double, py::array::c_style | py::array::forcecast> x,
           const std::vector<std::string>& labels, const std::string& expression,
           const std::vector<int>& occluded, int k, double c, double gamma, std::uint64_t seed,
           int bins, const std::vector<std::string>& ids) {
            const auto data = set_from_numpy(std::move(x), labels, ids);
            const auto subsets = build_expression_subsets(data, seed);
            const ExpressionSubset* subset = nullptr;
            for (const auto& s : subsets)
                if (s.expression == expression) subset = &s;
            if (!subset) throw ValidationError("expression '" + expression + "' not present");
            ScoringParams params{SvmHyper{c, gamma}, k, seed, bins};
            const auto wm = compute_weight_map(layout, max_size, subset->rows, expression,
                                               mask_from_ids(occluded, "custom"), params);
            return py::make_tuple(wm.weights, wm.apparitions, rank_regions(wm));
        },
        py::arg("layout"), py::arg("max_size"), py::arg("x"), py::arg("labels"),
        py::arg("expression"), py::arg("occluded") = std::vector<int>(), py::arg("k") = 10,
        py::arg("c") = 1.0, py::arg("gamma") = 0.0, py::arg("seed") = 0, py::arg("bins") = 12,
        py::arg("ids") = std::vector<std::string>());

    py::class_<FusionStack>(m, "Stack")
        .def_static("load", &load_stack, py::arg("dir"))
        .def("save", [](const FusionStack& self, const std::string& dir) { save_stack(self, dir); })
        .def_property_readonly("occlusion", [](const FusionStack& self) { return self.occlusion; })
        .def_property_readonly("expressions",
                               [](const FusionStack& self) { return self.expressions; })
        .def("predict",
             [](const FusionStack& self,
                py::array_t<float, py::array::c_style | py::array::forcecast> flow,
                const FacialLayout& layout) {
                 const auto seq = sequence_from_array(std::move(flow));
                 const auto [label, probs] = self.predict(seq, layout);
                 return py::make_tuple(label, probs);
             },
             py::arg("flow"), py::arg("layout"))
        .def("predict_gmd",
             [](const FusionStack& self, const std::vector<double>& gmd) {
                 const auto [label, probs] = self.predict_gmd(gmd);
                 return py::make_tuple(label, probs);
             },
             py::arg("gmd"));

    m.def("run_plan", [](const std::string& plan_path) {
        const auto report = run_plan(load_plan(plan_path));
        py::dict out;
        for (const auto& summary : report.masks) {
            py::dict entry;
            entry["fused_fixed"] = summary.fused_fixed_mean();
            entry["fused_fixed_runs"] = summary.fused_fixed_runs;
            if (!summary.fused_bestn_runs.empty())
                entry["fused_bestn"] = summary.fused_bestn_mean();
            if (!summary.baseline_runs.empty()) {
                entry["baseline"] = summary.baseline_mean();
                entry["baseline_runs"] = summary.baseline_runs;
            }
            out[py::str(summary.mask)] = entry;
        }
        return out;
    });
}
