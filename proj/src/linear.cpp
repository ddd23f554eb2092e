#include "fame/linear.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fame/binio.hpp"

namespace fame {

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// log(1 + exp(-m)) without overflow.
double logistic_loss(double m) { return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)); }

double squared_hinge_loss(double m) {
    const double v = std::max(0.0, 1.0 - m);
    return v * v;
}

struct LossFns {
    double (*value)(double);
    double (*d1)(double);  // d loss / d margin
    double (*d2)(double);  // generalized second derivative
};

const LossFns kLogistic = {
    logistic_loss,
    [](double m) { return -1.0 / (1.0 + std::exp(m)); },
    [](double m) {
        const double s = sigmoid(m);
        return s * (1.0 - s);
    },
};

const LossFns kSquaredHinge = {
    squared_hinge_loss,
    [](double m) { return m < 1.0 ? -2.0 * (1.0 - m) : 0.0; },
    [](double m) { return m < 1.0 ? 2.0 : 0.0; },
};

constexpr double kHessianFloor = 1e-10;
constexpr double kArmijoSigma = 0.25;
constexpr int kMaxBacktracks = 30;

// Coordinate-descent state over a dense column-accessed design matrix.
// Column scales fold a unit max-abs standardization into the Newton steps;
// the penalty is rescaled per coordinate so the solved objective is exactly
// loss(X w + b) + lambda * ||w||_1 in the original feature space.
class CdState {
public:
    CdState(const FeatureMatrix& X, const std::vector<int>& y, double lambda, const LossFns& fns)
        : X_(X), y_(y), lambda_(lambda), fns_(fns), n_(X.n), d_(X.dim) {
        w_.assign(static_cast<size_t>(d_), 0.0);
        margins_.assign(static_cast<size_t>(n_), 0.0);
        scale_.assign(static_cast<size_t>(d_), 0.0);
        for (int64_t i = 0; i < n_; ++i) {
            auto row = X_.row(i);
            for (int64_t j = 0; j < d_; ++j)
                scale_[static_cast<size_t>(j)] = std::max(scale_[static_cast<size_t>(j)], std::abs(static_cast<double>(row[j])));
        }
    }

    double objective() const {
        double obj = 0;
        for (int64_t i = 0; i < n_; ++i) obj += fns_.value(margins_[static_cast<size_t>(i)]);
        for (double wj : w_) obj += lambda_ * std::abs(wj);
        return obj;
    }

    double training_accuracy() const {
        int64_t good = 0;
        for (int64_t i = 0; i < n_; ++i)
            if (margins_[static_cast<size_t>(i)] >= 0) ++good;  // margin >= 0 means correctly classified
        return static_cast<double>(good) / static_cast<double>(n_);
    }

    // Gradient of the smooth part w.r.t. w_j in the original space.
    double gradient(int64_t j) const {
        double g = 0;
        for (int64_t i = 0; i < n_; ++i)
            g += fns_.d1(margins_[static_cast<size_t>(i)]) * y_[static_cast<size_t>(i)] *
                 static_cast<double>(X_.row(i)[j]);
        return g;
    }

    // One Newton step with backtracking on coordinate j. Returns the
    // stationarity violation observed at entry (original space).
    double coordinate_step(int64_t j) {
        const double s = scale_[static_cast<size_t>(j)];
        if (s == 0) return 0;

        double g = 0, h = 0;
        for (int64_t i = 0; i < n_; ++i) {
            const double xij = static_cast<double>(X_.row(i)[j]);
            const double m = margins_[static_cast<size_t>(i)];
            g += fns_.d1(m) * y_[static_cast<size_t>(i)] * xij;
            h += fns_.d2(m) * xij * xij;
        }
        const double wj = w_[static_cast<size_t>(j)];
        const double viol = wj != 0 ? std::abs(g + lambda_ * (wj > 0 ? 1.0 : -1.0)) : std::max(0.0, std::abs(g) - lambda_);

        // Scaled coordinate: w' = w*s, x' = x/s, penalty lambda' = lambda/s.
        const double gs = g / s;
        double hs = h / (s * s);
        hs = std::max(hs, kHessianFloor);
        const double ls = lambda_ / s;
        const double ws = wj * s;
        const double target = ws - gs / hs;
        double u = 0;
        if (target > ls / hs)
            u = target - ls / hs;
        else if (target < -ls / hs)
            u = target + ls / hs;
        const double delta = u - ws;
        if (std::abs(delta) < 1e-14 * std::max(1.0, std::abs(ws))) return viol;

        const double dir_deriv = gs * delta + ls * (std::abs(ws + delta) - std::abs(ws));
        double t = 1.0;
        for (int bt = 0; bt < kMaxBacktracks; ++bt) {
            const double step = t * delta / s;  // change of w_j in the original space
            double new_loss = 0;
            for (int64_t i = 0; i < n_; ++i)
                new_loss += fns_.value(margins_[static_cast<size_t>(i)] +
                                       y_[static_cast<size_t>(i)] * static_cast<double>(X_.row(i)[j]) * step);
            double old_loss = 0;
            for (int64_t i = 0; i < n_; ++i) old_loss += fns_.value(margins_[static_cast<size_t>(i)]);
            const double penalty_change = ls * (std::abs(ws + t * delta) - std::abs(ws));
            if (new_loss - old_loss + penalty_change <= kArmijoSigma * t * dir_deriv) {
                for (int64_t i = 0; i < n_; ++i)
                    margins_[static_cast<size_t>(i)] +=
                        y_[static_cast<size_t>(i)] * static_cast<double>(X_.row(i)[j]) * step;
                w_[static_cast<size_t>(j)] += step;
                if (t == 1.0 && u == 0) w_[static_cast<size_t>(j)] = 0;  // soft threshold lands exactly on zero
                return viol;
            }
            t *= 0.5;
        }
        return viol;
    }

    double bias_step() {
        double g = 0, h = 0;
        for (int64_t i = 0; i < n_; ++i) {
            g += fns_.d1(margins_[static_cast<size_t>(i)]) * y_[static_cast<size_t>(i)];
            h += fns_.d2(margins_[static_cast<size_t>(i)]);
        }
        const double viol = std::abs(g);
        h = std::max(h, kHessianFloor);
        const double delta = -g / h;
        if (std::abs(delta) < 1e-15 * std::max(1.0, std::abs(bias_))) return viol;
        double t = 1.0;
        for (int bt = 0; bt < kMaxBacktracks; ++bt) {
            double new_loss = 0, old_loss = 0;
            for (int64_t i = 0; i < n_; ++i) {
                const double m = margins_[static_cast<size_t>(i)];
                old_loss += fns_.value(m);
                new_loss += fns_.value(m + y_[static_cast<size_t>(i)] * t * delta);
            }
            if (new_loss - old_loss <= kArmijoSigma * t * g * delta) {
                for (int64_t i = 0; i < n_; ++i) margins_[static_cast<size_t>(i)] += y_[static_cast<size_t>(i)] * t * delta;
                bias_ += t * delta;
                return viol;
            }
            t *= 0.5;
        }
        return viol;
    }

    void refresh_margins() {
        for (int64_t i = 0; i < n_; ++i) {
            auto row = X_.row(i);
            double dot = bias_;
            for (int64_t j = 0; j < d_; ++j) dot += w_[static_cast<size_t>(j)] * static_cast<double>(row[j]);
            margins_[static_cast<size_t>(i)] = y_[static_cast<size_t>(i)] * dot;
        }
    }

    double scale(int64_t j) const { return scale_[static_cast<size_t>(j)]; }
    double weight(int64_t j) const { return w_[static_cast<size_t>(j)]; }
    double bias() const { return bias_; }
    int64_t dim() const { return d_; }

    SparseLinearModel extract(Loss loss) const {
        SparseLinearModel m;
        m.dim = d_;
        m.bias = bias_;
        m.lambda = lambda_;
        m.loss = loss;
        for (int64_t j = 0; j < d_; ++j)
            if (std::abs(w_[static_cast<size_t>(j)]) > 1e-12)
                m.weights.emplace_back(static_cast<uint32_t>(j), w_[static_cast<size_t>(j)]);
        return m;
    }

private:
    const FeatureMatrix& X_;
    const std::vector<int>& y_;
    double lambda_;
    const LossFns& fns_;
    int64_t n_, d_;
    std::vector<double> w_;
    std::vector<double> margins_;
    std::vector<double> scale_;
    double bias_ = 0;
};

void validate_training_input(const FeatureMatrix& X, const std::vector<int>& y, double lambda) {
    if (X.n < 2) throw ArgumentError("train: need at least 2 instances");
    if (static_cast<int64_t>(y.size()) != X.n) throw DimensionError("train: label count does not match instance count");
    if (lambda < 0) throw ArgumentError("train: lambda must be >= 0");
    bool pos = false, neg = false;
    for (int v : y) {
        if (v == 1)
            pos = true;
        else if (v == -1)
            neg = true;
        else
            throw ArgumentError("train: labels must be +1 or -1");
    }
    if (!pos || !neg) throw ArgumentError("train: both classes must be present");
    for (float v : X.values)
        if (!std::isfinite(v)) throw NumericError("train: non-finite feature values");
}

}  // namespace

double decision(const SparseLinearModel& m, std::span<const float> x) {
    if (static_cast<int64_t>(x.size()) != m.dim)
        throw DimensionError("decision: input dimension " + std::to_string(x.size()) + " != model dimension " +
                             std::to_string(m.dim));
    double acc = m.bias;
    for (const auto& [idx, w] : m.weights) acc += w * static_cast<double>(x[idx]);
    return acc;
}

double probability(const SparseLinearModel& m, std::span<const float> x) { return sigmoid(decision(m, x)); }

std::pair<SparseLinearModel, TrainReport> train_l1lr(const FeatureMatrix& X, const std::vector<int>& y, double lambda,
                                                     double tol, int max_sweeps) {
    validate_training_input(X, y, lambda);
    CdState st(X, y, lambda, kLogistic);

    TrainReport report;
    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        if (sweep > 0 && sweep % 32 == 0) st.refresh_margins();
        double max_viol = st.bias_step();
        for (int64_t j = 0; j < X.dim; ++j) max_viol = std::max(max_viol, st.coordinate_step(j));
        if (max_viol <= tol) {
            ++sweep;
            break;
        }
    }
    SparseLinearModel model = st.extract(Loss::logistic);
    report.iterations = sweep;
    report.final_objective = st.objective();
    report.training_accuracy = st.training_accuracy();
    report.active_features = static_cast<int>(model.weights.size());
    return {std::move(model), report};
}

std::pair<SparseLinearModel, TrainReport> train_grafting_svm(const FeatureMatrix& X, const std::vector<int>& y,
                                                             double lambda, double tol) {
    validate_training_input(X, y, lambda);
    CdState st(X, y, lambda, kSquaredHinge);

    TrainReport report;
    constexpr int kMaxInnerSweeps = 200;
    constexpr int kBiasOnlyIters = 100;

    for (int i = 0; i < kBiasOnlyIters; ++i)
        if (st.bias_step() <= tol) break;

    std::vector<int64_t> active;
    std::vector<uint8_t> is_active(static_cast<size_t>(X.dim), 0);
    int total_sweeps = 0;

    for (int64_t additions = 0; additions <= X.dim; ++additions) {
        // Largest-gradient inactive feature; ties go to the lowest index.
        int64_t best = -1;
        double best_mag = 0;
        for (int64_t j = 0; j < X.dim; ++j) {
            if (is_active[static_cast<size_t>(j)] || st.scale(j) == 0) continue;
            const double mag = std::abs(st.gradient(j));
            if (mag > best_mag) {
                best_mag = mag;
                best = j;
            }
        }
        if (best < 0 || best_mag <= lambda + tol) break;
        active.push_back(best);
        is_active[static_cast<size_t>(best)] = 1;

        for (int s = 0; s < kMaxInnerSweeps; ++s) {
            ++total_sweeps;
            double max_viol = st.bias_step();
            for (int64_t j : active) max_viol = std::max(max_viol, st.coordinate_step(j));
            if (max_viol <= tol) break;
        }
    }

    SparseLinearModel model = st.extract(Loss::squared_hinge);
    report.iterations = total_sweeps;
    report.final_objective = st.objective();
    report.training_accuracy = st.training_accuracy();
    report.active_features = static_cast<int>(model.weights.size());
    return {std::move(model), report};
}

OvaModel train_ova(const FeatureMatrix& X, double lambda, double tol, Loss loss, std::vector<int32_t> classes) {
    if (classes.empty()) {
        std::set<int32_t> uniq;
        for (int32_t l : X.labels)
            if (l >= 0) uniq.insert(l);
        classes.assign(uniq.begin(), uniq.end());
    } else {
        std::sort(classes.begin(), classes.end());
    }
    if (classes.size() < 2) throw ArgumentError("train_ova: need at least 2 classes");

    OvaModel ova;
    ova.classes = classes;
    for (int32_t c : classes) {
        std::vector<int> y(static_cast<size_t>(X.n));
        int64_t count = 0;
        for (int64_t i = 0; i < X.n; ++i) {
            const bool is_c = X.labels[static_cast<size_t>(i)] == c;
            y[static_cast<size_t>(i)] = is_c ? 1 : -1;
            if (is_c) ++count;
        }
        if (count == 0) throw ArgumentError("train_ova: class " + std::to_string(c) + " has zero instances");
        auto [model, report] = loss == Loss::squared_hinge ? train_grafting_svm(X, y, lambda, tol)
                                                           : train_l1lr(X, y, lambda, tol);
        ova.members.push_back(std::move(model));
    }
    return ova;
}

int32_t predict(const OvaModel& m, std::span<const float> x) {
    if (m.members.empty()) throw ArgumentError("predict: empty model");
    int32_t best_class = m.classes[0];
    double best = decision(m.members[0], x);
    for (size_t i = 1; i < m.members.size(); ++i) {
        const double d = decision(m.members[i], x);
        if (d > best) {
            best = d;
            best_class = m.classes[i];
        }
    }
    return best_class;
}

double l1_objective(const FeatureMatrix& X, const std::vector<int>& y, const SparseLinearModel& m) {
    double obj = 0;
    for (int64_t i = 0; i < X.n; ++i) {
        const double margin = y[static_cast<size_t>(i)] * decision(m, X.row(i));
        obj += m.loss == Loss::logistic ? logistic_loss(margin) : squared_hinge_loss(margin);
    }
    for (const auto& [idx, w] : m.weights) obj += m.lambda * std::abs(w);
    return obj;
}

std::vector<uint8_t> serialize_model(const SparseLinearModel& m) {
    ByteWriter w;
    w.magic("FAMEMDL1");
    w.u32(static_cast<uint32_t>(m.dim));
    w.u32(static_cast<uint32_t>(m.weights.size()));
    w.u8(static_cast<uint8_t>(m.loss));
    w.f64(m.lambda);
    w.f64(m.bias);
    for (const auto& [idx, val] : m.weights) {
        w.u32(idx);
        w.f32(static_cast<float>(val));
    }
    return w.data();
}

namespace {

SparseLinearModel read_model(ByteReader& r, const std::string& origin) {
    r.expect_magic("FAMEMDL1");
    SparseLinearModel m;
    m.dim = r.u32();
    const uint32_t nnz = r.u32();
    const uint8_t tag = r.u8();
    if (tag > 1) throw ParseError(origin + ": unknown loss tag " + std::to_string(tag));
    m.loss = static_cast<Loss>(tag);
    m.lambda = r.f64();
    m.bias = r.f64();
    m.weights.reserve(nnz);
    for (uint32_t i = 0; i < nnz; ++i) {
        const uint32_t idx = r.u32();
        const float val = r.f32();
        if (idx >= m.dim) throw ParseError(origin + ": weight index " + std::to_string(idx) + " out of range");
        m.weights.emplace_back(idx, static_cast<double>(val));
    }
    return m;
}

}  // namespace

SparseLinearModel deserialize_model(std::span<const uint8_t> bytes, const std::string& origin) {
    ByteReader r(bytes, origin);
    SparseLinearModel m = read_model(r, origin);
    r.expect_end();
    return m;
}

void save_model(const SparseLinearModel& m, const std::filesystem::path& path) {
    write_file(path, serialize_model(m));
}

SparseLinearModel load_model(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    return deserialize_model(bytes, path.filename().string());
}

std::vector<uint8_t> serialize_ova(const OvaModel& m) {
    ByteWriter w;
    w.magic("FAMEOVA1");
    w.u32(static_cast<uint32_t>(m.classes.size()));
    for (size_t i = 0; i < m.classes.size(); ++i) {
        w.i32(m.classes[i]);
        auto member = serialize_model(m.members[i]);
        w.bytes(member);
    }
    return w.data();
}

OvaModel deserialize_ova(std::span<const uint8_t> bytes, const std::string& origin) {
    ByteReader r(bytes, origin);
    r.expect_magic("FAMEOVA1");
    OvaModel m;
    const uint32_t count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        m.classes.push_back(r.i32());
        m.members.push_back(read_model(r, origin));
    }
    r.expect_end();
    return m;
}

void save_ova(const OvaModel& m, const std::filesystem::path& path) { write_file(path, serialize_ova(m)); }

OvaModel load_ova(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    return deserialize_ova(bytes, path.filename().string());
}

}  // namespace fame
