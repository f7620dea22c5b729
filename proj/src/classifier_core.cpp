#include "occluflow/classifier_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace occluflow {

void LabeledSet::append(std::vector<double> x, std::string label, std::string id) {
    if (!features.empty() && x.size() != features[0].size())
        throw ValidationError("labeled set: feature length mismatch");
    features.push_back(std::move(x));
    labels.push_back(std::move(label));
    ids.push_back(std::move(id));
}

void LabeledSet::validate() const {
    if (features.empty()) throw ValidationError("labeled set: empty");
    const std::size_t d = features[0].size();
    for (const auto& row : features) {
        if (row.size() != d) throw ValidationError("labeled set: feature length mismatch");
        for (double v : row)
            if (!std::isfinite(v)) throw ValidationError("labeled set: non-finite feature value");
    }
}

LabeledSet labeled_set_from_table(const GmdTable& table) {
    LabeledSet out;
    for (std::size_t i = 0; i < table.size(); ++i)
        out.append(table.rows[i], table.labels[i], table.ids[i]);
    out.validate();
    return out;
}

namespace {

// canonical row order: (id, label, features); makes training independent of
// the caller's row order
std::vector<std::size_t> canonical_order(const LabeledSet& data) {
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (data.ids[a] != data.ids[b]) return data.ids[a] < data.ids[b];
        if (data.labels[a] != data.labels[b]) return data.labels[a] < data.labels[b];
        return data.features[a] < data.features[b];
    });
    return idx;
}

struct SmoProblem {
    std::vector<std::vector<double>> x;  // standardized rows
    std::vector<int> y;                  // +1 / -1
    double c = 1.0;
    double gamma = 1.0;
};

struct SmoSolution {
    std::vector<double> alpha;
    double bias = 0.0;
    bool cap_hit = false;
};

double rbf(const std::vector<double>& a, const std::vector<double>& b, double gamma) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        d2 += d * d;
    }
    return std::exp(-gamma * d2);
}

// Sequential pairwise optimization of the soft-margin dual: pick the maximal
// KKT-violating pair, take the analytic step, repeat until the violation gap
// drops below tol or the iteration cap (10 * rows) is reached.
SmoSolution smo_solve(const SmoProblem& prob, double tol = 1e-3) {
    const std::size_t n = prob.y.size();
    std::vector<std::vector<double>> kernel(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        kernel[i][i] = 1.0;
        for (std::size_t j = i + 1; j < n; ++j)
            kernel[i][j] = kernel[j][i] = rbf(prob.x[i], prob.x[j], prob.gamma);
    }

    SmoSolution sol;
    sol.alpha.assign(n, 0.0);
    std::vector<double> grad(n, -1.0);  // gradient of 1/2 a'Qa - e'a at a = 0
    const double c = prob.c;
    const std::size_t max_iter = 10 * n;

    std::size_t iter = 0;
    for (; iter < max_iter; ++iter) {
        // maximal violating pair
        double up_best = -std::numeric_limits<double>::infinity();
        double low_best = std::numeric_limits<double>::infinity();
        std::size_t i = n, j = n;
        for (std::size_t k = 0; k < n; ++k) {
            const double v = -prob.y[k] * grad[k];
            const bool in_up = prob.y[k] > 0 ? sol.alpha[k] < c : sol.alpha[k] > 0;
            const bool in_low = prob.y[k] > 0 ? sol.alpha[k] > 0 : sol.alpha[k] < c;
            if (in_up && v > up_best) {
                up_best = v;
                i = k;
            }
            if (in_low && v < low_best) {
                low_best = v;
                j = k;
            }
        }
        if (i == n || j == n || up_best - low_best <= tol) break;

        double quad = kernel[i][i] + kernel[j][j] - 2.0 * kernel[i][j];
        if (quad <= 1e-12) quad = 1e-12;
        double step = (up_best - low_best) / quad;
        const double room_i = prob.y[i] > 0 ? c - sol.alpha[i] : sol.alpha[i];
        const double room_j = prob.y[j] > 0 ? sol.alpha[j] : c - sol.alpha[j];
        step = std::min(step, std::min(room_i, room_j));
        if (step <= 0.0) break;

        sol.alpha[i] += prob.y[i] * step;
        sol.alpha[j] -= prob.y[j] * step;
        for (std::size_t k = 0; k < n; ++k)
            grad[k] += prob.y[k] * step * (kernel[k][i] - kernel[k][j]);
    }
    sol.cap_hit = iter >= max_iter;

    // bias from the final violation bounds
    double up_best = -std::numeric_limits<double>::infinity();
    double low_best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        const double v = -prob.y[k] * grad[k];
        const bool in_up = prob.y[k] > 0 ? sol.alpha[k] < c : sol.alpha[k] > 0;
        const bool in_low = prob.y[k] > 0 ? sol.alpha[k] > 0 : sol.alpha[k] < c;
        if (in_up && v > up_best) up_best = v;
        if (in_low && v < low_best) low_best = v;
    }
    if (std::isfinite(up_best) && std::isfinite(low_best))
        sol.bias = (up_best + low_best) / 2.0;
    return sol;
}

// Sigmoid fit on (decision value, label) pairs: Newton iterations with
// backtracking on the regularized cross-entropy, the standard robust recipe
// for probability calibration of margin classifiers.
std::pair<double, double> fit_sigmoid(const std::vector<double>& deci,
                                      const std::vector<int>& label) {
    const std::size_t n = deci.size();
    double prior1 = 0.0, prior0 = 0.0;
    for (int y : label) (y > 0 ? prior1 : prior0) += 1.0;
    if (n == 0 || prior1 == 0.0 || prior0 == 0.0) return {-1.0, 0.0};

    const double hi = (prior1 + 1.0) / (prior1 + 2.0);
    const double lo = 1.0 / (prior0 + 2.0);
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = label[i] > 0 ? hi : lo;

    double a = 0.0;
    double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
    auto objective = [&](double pa, double pb) {
        double obj = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double f = pa * deci[i] + pb;
            if (f >= 0)
                obj += t[i] * f + std::log1p(std::exp(-f));
            else
                obj += (t[i] - 1.0) * f + std::log1p(std::exp(f));
        }
        return obj;
    };
    double fval = objective(a, b);
    const double min_step = 1e-10;
    const double sigma = 1e-12;

    for (int it = 0; it < 100; ++it) {
        double h11 = sigma, h22 = sigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double f = a * deci[i] + b;
            double p, q;
            if (f >= 0) {
                p = std::exp(-f) / (1.0 + std::exp(-f));
                q = 1.0 / (1.0 + std::exp(-f));
            } else {
                p = 1.0 / (1.0 + std::exp(f));
                q = std::exp(f) / (1.0 + std::exp(f));
            }
            const double d2 = p * q;
            h11 += deci[i] * deci[i] * d2;
            h22 += d2;
            h21 += deci[i] * d2;
            const double d1 = t[i] - p;
            g1 += deci[i] * d1;
            g2 += d1;
        }
        if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;

        const double det = h11 * h22 - h21 * h21;
        const double da = -(h22 * g1 - h21 * g2) / det;
        const double db = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * da + g2 * db;
        double step = 1.0;
        bool moved = false;
        while (step >= min_step) {
            const double na = a + step * da;
            const double nb = b + step * db;
            const double nf = objective(na, nb);
            if (nf < fval + 1e-4 * step * gd) {
                a = na;
                b = nb;
                fval = nf;
                moved = true;
                break;
            }
            step /= 2.0;
        }
        if (!moved) break;
    }
    return {a, b};
}

std::vector<std::uint32_t> validate_dims(const std::vector<std::uint32_t>& dims,
                                         std::size_t input_dim) {
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (dims[i] >= input_dim) throw ValidationError("projection dim out of range");
        if (i > 0 && dims[i] <= dims[i - 1])
            throw ValidationError("projection dims must be ascending and unique");
    }
    return dims;
}

}  // namespace

double TrainedModel::decision_value(const std::vector<double>& x) const {
    if (x.size() != input_dim)
        throw ValidationError("predict: feature length " + std::to_string(x.size()) +
                              " does not match model input dim " + std::to_string(input_dim));
    std::vector<double> z(used_dim());
    if (selected_dims.empty()) {
        z = x;
    } else {
        for (std::size_t i = 0; i < selected_dims.size(); ++i) z[i] = x[selected_dims[i]];
    }
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (z[i] - mean[i]) / stdev[i];
    double f = bias;
    for (std::size_t s = 0; s < support_vectors.size(); ++s)
        f += coef[s] * rbf(support_vectors[s], z, gamma);
    return f;
}

std::pair<double, double> TrainedModel::predict_proba(const std::vector<double>& x) const {
    const double f = decision_value(x);
    const double fab = platt_a * f + platt_b;
    double p;
    if (fab >= 0)
        p = std::exp(-fab) / (1.0 + std::exp(-fab));
    else
        p = 1.0 / (1.0 + std::exp(fab));
    return {p, 1.0 - p};
}

int TrainedModel::predict_sign(const std::vector<double>& x) const {
    return decision_value(x) >= 0.0 ? 1 : -1;
}

namespace {

TrainedModel train_rows(const std::vector<std::vector<double>>& rows, const std::vector<int>& y,
                        std::size_t input_dim, const std::vector<std::uint32_t>& dims,
                        const SvmHyper& hyper, std::uint64_t seed, bool calibrate) {
    const std::size_t n = rows.size();
    const std::size_t d = rows[0].size();

    TrainedModel model;
    model.input_dim = static_cast<std::uint32_t>(input_dim);
    model.selected_dims = dims;
    model.c = hyper.c;

    // per-dimension standardization; constant dimensions keep scale 1
    model.mean.assign(d, 0.0);
    model.stdev.assign(d, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
        double m = 0.0;
        for (const auto& r : rows) m += r[j];
        m /= n;
        double v = 0.0;
        for (const auto& r : rows) v += (r[j] - m) * (r[j] - m);
        v /= n;
        model.mean[j] = m;
        if (v > 0.0) model.stdev[j] = std::sqrt(v);
    }
    std::vector<std::vector<double>> z(n, std::vector<double>(d));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) z[i][j] = (rows[i][j] - model.mean[j]) / model.stdev[j];

    if (hyper.gamma > 0.0) {
        model.gamma = hyper.gamma;
    } else {
        // 1 / (dims * variance) on the standardized matrix
        double m = 0.0;
        for (const auto& r : z)
            for (double v : r) m += v;
        m /= (n * d);
        double var = 0.0;
        for (const auto& r : z)
            for (double v : r) var += (v - m) * (v - m);
        var /= (n * d);
        model.gamma = var > 1e-12 ? 1.0 / (d * var) : 1.0 / d;
    }

    SmoProblem prob{z, y, hyper.c, model.gamma};
    SmoSolution sol = smo_solve(prob);
    model.bias = sol.bias;
    model.cap_hit = sol.cap_hit;
    for (std::size_t i = 0; i < n; ++i) {
        if (sol.alpha[i] > 1e-12) {
            model.support_vectors.push_back(z[i]);
            model.coef.push_back(sol.alpha[i] * y[i]);
        }
    }

    if (!calibrate) return model;

    // sigmoid calibration on 3-fold held-out decision values
    std::vector<double> deci;
    std::vector<int> dlab;
    std::size_t pos = 0;
    for (int v : y) pos += v > 0;
    const std::size_t neg = n - pos;
    if (pos >= 3 && neg >= 3) {
        // stratified 3 folds over the canonical (already sorted) order
        std::vector<std::size_t> pos_idx, neg_idx;
        for (std::size_t i = 0; i < n; ++i) (y[i] > 0 ? pos_idx : neg_idx).push_back(i);
        Rng rng(derive_seed(seed, 0x706c6174));
        rng.shuffle(pos_idx);
        rng.shuffle(neg_idx);
        std::vector<int> fold(n, 0);
        for (std::size_t i = 0; i < pos_idx.size(); ++i) fold[pos_idx[i]] = static_cast<int>(i % 3);
        for (std::size_t i = 0; i < neg_idx.size(); ++i) fold[neg_idx[i]] = static_cast<int>(i % 3);
        for (int f = 0; f < 3; ++f) {
            SmoProblem sub;
            sub.c = hyper.c;
            sub.gamma = model.gamma;
            std::vector<std::size_t> test;
            for (std::size_t i = 0; i < n; ++i) {
                if (fold[i] == f) {
                    test.push_back(i);
                } else {
                    sub.x.push_back(z[i]);
                    sub.y.push_back(y[i]);
                }
            }
            bool has_pos = false, has_neg = false;
            for (int v : sub.y) (v > 0 ? has_pos : has_neg) = true;
            if (!has_pos || !has_neg || test.empty()) continue;
            SmoSolution s = smo_solve(sub);
            for (std::size_t i : test) {
                double f_val = s.bias;
                for (std::size_t k = 0; k < sub.x.size(); ++k) {
                    if (s.alpha[k] > 1e-12)
                        f_val += s.alpha[k] * sub.y[k] * rbf(sub.x[k], z[i], model.gamma);
                }
                deci.push_back(f_val);
                dlab.push_back(y[i]);
            }
        }
    }
    if (deci.empty()) {
        // tiny sets: calibrate on the training decision values directly
        for (std::size_t i = 0; i < n; ++i) {
            double f_val = model.bias;
            for (std::size_t s = 0; s < model.support_vectors.size(); ++s)
                f_val += model.coef[s] * rbf(model.support_vectors[s], z[i], model.gamma);
            deci.push_back(f_val);
            dlab.push_back(y[i]);
        }
    }
    auto [a, b] = fit_sigmoid(deci, dlab);
    model.platt_a = a;
    model.platt_b = b;
    return model;
}

}  // namespace

TrainedModel train_binary_projected(const LabeledSet& data, const std::string& positive,
                                    const std::vector<std::uint32_t>& dims,
                                    const SvmHyper& hyper, std::uint64_t seed, bool calibrate) {
    data.validate();
    if (!(hyper.c > 0.0)) throw ValidationError("train: C must be > 0");
    if (hyper.gamma < 0.0) throw ValidationError("train: gamma must be >= 0");
    validate_dims(dims, data.features[0].size());

    const auto order = canonical_order(data);
    std::vector<std::vector<double>> rows;
    std::vector<int> y;
    rows.reserve(data.size());
    bool has_pos = false, has_neg = false;
    for (std::size_t i : order) {
        if (dims.empty()) {
            rows.push_back(data.features[i]);
        } else {
            std::vector<double> r(dims.size());
            for (std::size_t j = 0; j < dims.size(); ++j) r[j] = data.features[i][dims[j]];
            rows.push_back(std::move(r));
        }
        const int label = data.labels[i] == positive ? 1 : -1;
        (label > 0 ? has_pos : has_neg) = true;
        y.push_back(label);
    }
    if (!has_pos || !has_neg)
        throw ValidationError("train: need both classes present (positive '" + positive + "')");
    return train_rows(rows, y, data.features[0].size(), dims, hyper, seed, calibrate);
}

TrainedModel train_binary(const LabeledSet& data, const std::string& positive,
                          const SvmHyper& hyper, std::uint64_t seed, bool calibrate) {
    return train_binary_projected(data, positive, {}, hyper, seed, calibrate);
}

std::vector<int> stratified_folds(const LabeledSet& data, int k, std::uint64_t seed) {
    if (k < 2) throw ValidationError("folds: k must be >= 2");
    std::map<std::string, std::vector<std::size_t>> by_label;
    const auto order = canonical_order(data);
    for (std::size_t i : order) by_label[data.labels[i]].push_back(i);

    std::vector<int> fold(data.size(), -1);
    std::size_t label_index = 0;
    for (auto& [label, idx] : by_label) {
        if (static_cast<int>(idx.size()) < k)
            throw ValidationError("folds: class '" + label + "' has fewer rows than k");
        Rng rng(derive_seed(seed, label_index++));
        rng.shuffle(idx);
        for (std::size_t i = 0; i < idx.size(); ++i)
            fold[idx[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    }
    return fold;
}

CvResult cross_validate(const LabeledSet& data, const std::string& positive, int k,
                        const SvmHyper& hyper, std::uint64_t seed,
                        const std::vector<std::uint32_t>& dims) {
    data.validate();
    const auto fold = stratified_folds(data, k, seed);
    CvResult result;
    result.per_fold.resize(k, 0.0);
    for (int f = 0; f < k; ++f) {
        LabeledSet train_set;
        std::vector<std::size_t> test;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (fold[i] == f)
                test.push_back(i);
            else
                train_set.append(data.features[i], data.labels[i], data.ids[i]);
        }
        TrainedModel model = train_binary_projected(train_set, positive, dims, hyper,
                                                    derive_seed(seed, 0xcf, f), false);
        std::size_t correct = 0;
        for (std::size_t i : test) {
            const int truth = data.labels[i] == positive ? 1 : -1;
            if (model.predict_sign(data.features[i]) == truth) ++correct;
        }
        result.per_fold[f] = test.empty() ? 0.0 : static_cast<double>(correct) / test.size();
    }
    for (double v : result.per_fold) result.mean += v;
    result.mean /= k;
    return result;
}

std::vector<std::uint32_t> configuration_slots(const Configuration& config, int bins) {
    std::vector<std::uint32_t> out;
    out.reserve(config.regions.size() * bins);
    for (RegionId r : config.regions)
        for (int b = 0; b < bins; ++b)
            out.push_back(static_cast<std::uint32_t>((r - 1) * bins + b));
    return out;
}

std::vector<double> project(const std::vector<double>& x, const Configuration& config, int bins) {
    auto slots = configuration_slots(config, bins);
    std::vector<double> out(slots.size());
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i] >= x.size()) throw ValidationError("project: slot out of range");
        out[i] = x[slots[i]];
    }
    return out;
}

std::vector<double> MulticlassModel::predict_proba(const std::vector<double>& x) const {
    std::vector<double> p(classes.size());
    double total = 0.0;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        p[c] = models[c].predict_proba(x).first;
        total += p[c];
    }
    if (total <= 0.0) {
        std::fill(p.begin(), p.end(), 1.0 / classes.size());
        return p;
    }
    for (double& v : p) v /= total;
    return p;
}

std::string MulticlassModel::predict(const std::vector<double>& x) const {
    const auto p = predict_proba(x);
    std::size_t best = 0;
    for (std::size_t c = 1; c < p.size(); ++c)
        if (p[c] > p[best]) best = c;
    return classes[best];
}

MulticlassModel train_multiclass(const LabeledSet& data, const SvmHyper& hyper,
                                 std::uint64_t seed) {
    data.validate();
    MulticlassModel out;
    std::map<std::string, int> seen;
    for (const auto& label : data.labels) seen[label] += 1;
    if (seen.size() < 2) throw ValidationError("train_multiclass: need at least two classes");
    for (const auto& [label, count] : seen) out.classes.push_back(label);
    out.models.reserve(out.classes.size());
    for (std::size_t c = 0; c < out.classes.size(); ++c)
        out.models.push_back(train_binary(data, out.classes[c], hyper, derive_seed(seed, c)));
    return out;
}

// ---- model file I/O -------------------------------------------------------

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& ctx) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw ValidationError(ctx + ": truncated");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& in, const std::string& ctx) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw ValidationError(ctx + ": truncated");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

constexpr char kSvmMagic[4] = {'O', 'F', 'S', 'V'};
constexpr char kMcMagic[4] = {'O', 'F', 'M', 'C'};

}  // namespace

void write_model(const TrainedModel& model, std::ostream& out) {
    out.write(kSvmMagic, 4);
    put_u32(out, 1);
    put_u32(out, model.input_dim);
    put_u32(out, static_cast<std::uint32_t>(model.selected_dims.size()));
    put_u32(out, static_cast<std::uint32_t>(model.support_vectors.size()));
    put_u32(out, model.cap_hit ? 1u : 0u);
    put_f64(out, model.c);
    put_f64(out, model.gamma);
    put_f64(out, model.bias);
    put_f64(out, model.platt_a);
    put_f64(out, model.platt_b);
    for (std::uint32_t d : model.selected_dims) put_u32(out, d);
    for (double v : model.mean) put_f64(out, v);
    for (double v : model.stdev) put_f64(out, v);
    for (double v : model.coef) put_f64(out, v);
    for (const auto& sv : model.support_vectors)
        for (double v : sv) put_f64(out, v);
}

TrainedModel read_model(std::istream& in, const std::string& ctx) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kSvmMagic, 4) != 0)
        throw ValidationError(ctx + ": bad model magic");
    if (get_u32(in, ctx) != 1) throw ValidationError(ctx + ": unsupported model version");
    TrainedModel m;
    m.input_dim = get_u32(in, ctx);
    const std::uint32_t n_sel = get_u32(in, ctx);
    const std::uint32_t n_sv = get_u32(in, ctx);
    m.cap_hit = get_u32(in, ctx) != 0;
    m.c = get_f64(in, ctx);
    m.gamma = get_f64(in, ctx);
    m.bias = get_f64(in, ctx);
    m.platt_a = get_f64(in, ctx);
    m.platt_b = get_f64(in, ctx);
    m.selected_dims.resize(n_sel);
    for (auto& d : m.selected_dims) d = get_u32(in, ctx);
    const std::size_t d = n_sel ? n_sel : m.input_dim;
    if (d == 0 || d > (1u << 24) || n_sv > (1u << 24))
        throw ValidationError(ctx + ": implausible model header");
    m.mean.resize(d);
    for (auto& v : m.mean) v = get_f64(in, ctx);
    m.stdev.resize(d);
    for (auto& v : m.stdev) v = get_f64(in, ctx);
    m.coef.resize(n_sv);
    for (auto& v : m.coef) v = get_f64(in, ctx);
    m.support_vectors.assign(n_sv, std::vector<double>(d));
    for (auto& sv : m.support_vectors)
        for (auto& v : sv) v = get_f64(in, ctx);
    return m;
}

void write_model(const TrainedModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StageError("model: cannot open " + path + " for writing");
    write_model(model, out);
    if (!out) throw StageError("model: write failed for " + path);
}

TrainedModel read_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("model: cannot open " + path);
    TrainedModel m = read_model(in, path);
    char extra;
    if (in.read(&extra, 1)) throw ValidationError(path + ": trailing bytes");
    return m;
}

void write_multiclass(const MulticlassModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StageError("model: cannot open " + path + " for writing");
    out.write(kMcMagic, 4);
    put_u32(out, 1);
    put_u32(out, static_cast<std::uint32_t>(model.classes.size()));
    for (std::size_t c = 0; c < model.classes.size(); ++c) {
        put_u32(out, static_cast<std::uint32_t>(model.classes[c].size()));
        out.write(model.classes[c].data(),
                  static_cast<std::streamsize>(model.classes[c].size()));
        write_model(model.models[c], out);
    }
    if (!out) throw StageError("model: write failed for " + path);
}

MulticlassModel read_multiclass(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("model: cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMcMagic, 4) != 0)
        throw ValidationError(path + ": bad multiclass magic");
    if (get_u32(in, path) != 1) throw ValidationError(path + ": unsupported version");
    const std::uint32_t n = get_u32(in, path);
    if (n == 0 || n > 64) throw ValidationError(path + ": implausible class count");
    MulticlassModel m;
    for (std::uint32_t c = 0; c < n; ++c) {
        const std::uint32_t len = get_u32(in, path);
        if (len > 256) throw ValidationError(path + ": implausible class name");
        std::string name(len, '\0');
        if (!in.read(name.data(), len)) throw ValidationError(path + ": truncated");
        m.classes.push_back(std::move(name));
        m.models.push_back(read_model(in, path));
    }
    char extra;
    if (in.read(&extra, 1)) throw ValidationError(path + ": trailing bytes");
    return m;
}

}  // namespace occluflow
