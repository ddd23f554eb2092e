#include "fame/codebook.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "fame/binio.hpp"

namespace fame {

PatchMatrix sample_patches(std::span<const GrayImage> images, int rf_w, int rf_h, int64_t count, uint64_t seed) {
    if (images.empty()) throw ArgumentError("sample_patches: no images");
    if (count < 1) throw ArgumentError("sample_patches: count must be >= 1");
    if (rf_w < 1 || rf_h < 1) throw ArgumentError("sample_patches: receptive field must be positive");

    // Enumerate every valid top-left placement across the corpus so the draw
    // is uniform over placements, not over images.
    std::vector<int64_t> cumulative(images.size());
    int64_t total = 0;
    for (size_t i = 0; i < images.size(); ++i) {
        const auto& img = images[i];
        if (img.width < rf_w || img.height < rf_h)
            throw DimensionError("sample_patches: image " + std::to_string(i) + " (" + std::to_string(img.width) +
                                 "x" + std::to_string(img.height) + ") smaller than receptive field");
        total += static_cast<int64_t>(img.width - rf_w + 1) * (img.height - rf_h + 1);
        cumulative[i] = total;
    }

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int64_t> pick(0, total - 1);

    PatchMatrix out;
    out.n = count;
    out.d = static_cast<int64_t>(rf_w) * rf_h;
    out.values.resize(static_cast<size_t>(out.n * out.d));
    for (int64_t p = 0; p < count; ++p) {
        const int64_t idx = pick(rng);
        const size_t img_idx = static_cast<size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), idx) - cumulative.begin());
        const auto& img = images[img_idx];
        const int64_t local = idx - (img_idx == 0 ? 0 : cumulative[img_idx - 1]);
        const int placements_x = img.width - rf_w + 1;
        const int x0 = static_cast<int>(local % placements_x);
        const int y0 = static_cast<int>(local / placements_x);
        auto row = out.row(p);
        for (int y = 0; y < rf_h; ++y)
            for (int x = 0; x < rf_w; ++x) row[static_cast<size_t>(y) * rf_w + x] = img.at(x0 + x, y0 + y);
    }
    return out;
}

void contrast_normalize(std::span<double> patch, double eps) {
    const size_t d = patch.size();
    if (d < 2) throw ArgumentError("contrast_normalize: patch dimension must be >= 2");
    double mean = 0;
    for (double v : patch) mean += v;
    mean /= static_cast<double>(d);
    double var = 0;
    for (double v : patch) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double denom = std::sqrt(var + eps);
    for (double& v : patch) v = (v - mean) / denom;
}

namespace {

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> as_eigen(
    const PatchMatrix& p) {
    return {p.values.data(), p.n, p.d};
}

}  // namespace

WhiteningTransform fit_zca(const PatchMatrix& patches, double epsilon) {
    if (patches.n < 2) throw ArgumentError("fit_zca: need at least 2 patches");
    if (epsilon < 0) throw ArgumentError("fit_zca: epsilon must be >= 0");
    auto X = as_eigen(patches);
    if (!X.allFinite()) throw NumericError("fit_zca: non-finite patch values");

    WhiteningTransform t;
    t.epsilon = epsilon;
    t.mean = X.colwise().mean();
    Eigen::MatrixXd centered = X.rowwise() - t.mean.transpose();
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(patches.n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericError("fit_zca: eigendecomposition failed");
    Eigen::VectorXd inv_sqrt = (eig.eigenvalues().cwiseMax(0.0).array() + epsilon).rsqrt();
    if (!inv_sqrt.allFinite()) throw NumericError("fit_zca: singular covariance with epsilon 0");
    t.matrix = eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
    return t;
}

PatchMatrix apply_zca(const WhiteningTransform& t, const PatchMatrix& patches) {
    if (patches.d != t.mean.size())
        throw DimensionError("apply_zca: patch dimension " + std::to_string(patches.d) + " != transform dimension " +
                             std::to_string(t.mean.size()));
    PatchMatrix out;
    out.n = patches.n;
    out.d = patches.d;
    out.values.resize(patches.values.size());
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> Y(out.values.data(), out.n,
                                                                                         out.d);
    Y = (as_eigen(patches).rowwise() - t.mean.transpose()) * t.matrix.transpose();
    return out;
}

namespace {

double sq_dist(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) { return (a - b).squaredNorm(); }

}  // namespace

KMeansResult kmeans(const PatchMatrix& patches, int64_t k, int max_iters, uint64_t seed) {
    if (k < 1) throw ArgumentError("kmeans: k must be >= 1");
    if (patches.n < k)
        throw ArgumentError("kmeans: " + std::to_string(patches.n) + " points < k=" + std::to_string(k));
    auto X = as_eigen(patches);
    const int64_t n = patches.n;

    std::mt19937_64 rng(seed);
    KMeansResult res;
    res.centroids.resize(k, patches.d);

    // k-means++ style seeding: first center uniform, then D^2-weighted.
    {
        std::uniform_int_distribution<int64_t> first(0, n - 1);
        res.centroids.row(0) = X.row(first(rng));
        Eigen::VectorXd d2(n);
        for (int64_t i = 0; i < n; ++i) d2[i] = sq_dist(X.row(i), res.centroids.row(0));
        for (int64_t c = 1; c < k; ++c) {
            const double total = d2.sum();
            int64_t chosen = -1;
            if (total > 0) {
                std::uniform_real_distribution<double> u(0.0, total);
                double target = u(rng);
                for (int64_t i = 0; i < n; ++i) {
                    target -= d2[i];
                    if (target <= 0) {
                        chosen = i;
                        break;
                    }
                }
                if (chosen < 0) chosen = n - 1;
            } else {
                // All points coincide with chosen centers; take the lowest index.
                chosen = 0;
            }
            res.centroids.row(c) = X.row(chosen);
            for (int64_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(X.row(i), res.centroids.row(c)));
        }
    }

    res.assignments.assign(static_cast<size_t>(n), -1);
    std::vector<double> dist_to_own(static_cast<size_t>(n), 0.0);
    res.counts.assign(static_cast<size_t>(k), 0);

    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        std::fill(res.counts.begin(), res.counts.end(), 0);
        for (int64_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq_dist(X.row(i), res.centroids.row(0));
            for (int64_t c = 1; c < k; ++c) {
                const double d = sq_dist(X.row(i), res.centroids.row(c));
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(c);
                }
            }
            if (res.assignments[i] != best) {
                res.assignments[i] = best;
                changed = true;
            }
            dist_to_own[i] = best_d;
            ++res.counts[best];
        }

        // Re-seed empty clusters to the farthest point (never stealing the
        // sole member of another cluster).
        for (int64_t c = 0; c < k; ++c) {
            if (res.counts[c] != 0) continue;
            int64_t far_idx = -1;
            double far_d = -1;
            for (int64_t i = 0; i < n; ++i) {
                if (res.counts[res.assignments[i]] <= 1) continue;
                if (dist_to_own[i] > far_d) {
                    far_d = dist_to_own[i];
                    far_idx = i;
                }
            }
            if (far_idx < 0) throw NumericError("kmeans: cannot re-seed empty cluster");
            --res.counts[res.assignments[far_idx]];
            res.assignments[far_idx] = static_cast<int>(c);
            ++res.counts[c];
            res.centroids.row(c) = X.row(far_idx);
            dist_to_own[far_idx] = 0;
            changed = true;
        }

        // Update step.
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, patches.d);
        for (int64_t i = 0; i < n; ++i) sums.row(res.assignments[i]) += X.row(i);
        for (int64_t c = 0; c < k; ++c) res.centroids.row(c) = sums.row(c) / static_cast<double>(res.counts[c]);

        double sse = 0;
        for (int64_t i = 0; i < n; ++i) sse += sq_dist(X.row(i), res.centroids.row(res.assignments[i]));
        res.sse_history.push_back(sse);
        res.iterations = iter + 1;
        if (!changed) break;
    }
    return res;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw ArgumentError("percentile: empty input");
    std::sort(values.begin(), values.end());
    const double rank = q / 100.0 * static_cast<double>(values.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(rank));
    const size_t hi = static_cast<size_t>(std::ceil(rank));
    const double frac = rank - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

std::vector<uint8_t> flag_outlier_centroids(std::span<const int64_t> assignment_counts, bool flag_low) {
    if (assignment_counts.size() < 2) throw ArgumentError("flag_outlier_centroids: need at least 2 centroids");
    std::vector<double> counts(assignment_counts.begin(), assignment_counts.end());
    const double upper = percentile(counts, 99.0);
    const double lower = flag_low ? percentile(counts, 1.0) : -std::numeric_limits<double>::infinity();
    std::vector<uint8_t> mask(assignment_counts.size(), 0);
    for (size_t i = 0; i < assignment_counts.size(); ++i) {
        const double c = static_cast<double>(assignment_counts[i]);
        if (c > upper || c < lower) mask[i] = 1;
    }
    return mask;
}

Eigen::VectorXd triangular_encode(const Eigen::VectorXd& patch, const Codebook& cb) {
    if (patch.size() != cb.d())
        throw DimensionError("triangular_encode: patch dimension " + std::to_string(patch.size()) +
                             " != codebook dimension " + std::to_string(cb.d()));
    const int64_t k = cb.k();
    Eigen::VectorXd z(k);
    for (int64_t c = 0; c < k; ++c) z[c] = (cb.centroids.row(c).transpose() - patch).norm();
    const double mu = z.mean();
    Eigen::VectorXd a = (mu - z.array()).cwiseMax(0.0);
    for (int64_t c = 0; c < k; ++c)
        if (cb.outlier_mask[static_cast<size_t>(c)]) a[c] = 0.0;
    return a;
}

Eigen::VectorXd pool_image(const GrayImage& img, const Codebook& cb) {
    if (img.width < cb.rf_w || img.height < cb.rf_h)
        throw DimensionError("pool_image: image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                             " smaller than receptive field " + std::to_string(cb.rf_w) + "x" +
                             std::to_string(cb.rf_h));
    const int64_t k = cb.k();

    // Valid-center area bounds are stride-independent; its midpoint is the
    // image center (W-1)/2, (H-1)/2.
    const double cmin_x = (cb.rf_w - 1) / 2.0;
    const double cmin_y = (cb.rf_h - 1) / 2.0;
    const double mx = (img.width - 1) / 2.0;
    const double my = (img.height - 1) / 2.0;
    const double hx = (img.width - cb.rf_w) / 2.0;  // half extent of the valid-center area
    const double hy = (img.height - cb.rf_h) / 2.0;

    Eigen::MatrixXd region_sum = Eigen::MatrixXd::Zero(5, k);
    std::array<int64_t, 5> region_count = {0, 0, 0, 0, 0};

    Eigen::VectorXd patch(cb.d());
    std::vector<double> raw(static_cast<size_t>(cb.d()));
    for (int y0 = 0; y0 + cb.rf_h <= img.height; y0 += cb.stride) {
        for (int x0 = 0; x0 + cb.rf_w <= img.width; x0 += cb.stride) {
            for (int y = 0; y < cb.rf_h; ++y)
                for (int x = 0; x < cb.rf_w; ++x)
                    raw[static_cast<size_t>(y) * cb.rf_w + x] = img.at(x0 + x, y0 + y);
            if (cb.contrast_normalize) contrast_normalize(raw);
            for (int64_t i = 0; i < cb.d(); ++i) patch[i] = raw[static_cast<size_t>(i)];
            patch = cb.whitening.matrix * (patch - cb.whitening.mean);
            const Eigen::VectorXd act = triangular_encode(patch, cb);

            const double cx = x0 + cmin_x;
            const double cy = y0 + cmin_y;
            // Quadrants partition the valid-center area; midline ties go to
            // the left/top half. Order: TL, TR, BL, BR, then center.
            const int quadrant = (cy <= my ? 0 : 2) + (cx <= mx ? 0 : 1);
            region_sum.row(quadrant) += act.transpose();
            ++region_count[static_cast<size_t>(quadrant)];
            if (std::abs(cx - mx) <= hx / 2.0 && std::abs(cy - my) <= hy / 2.0) {
                region_sum.row(4) += act.transpose();
                ++region_count[4];
            }
        }
    }

    Eigen::VectorXd out = Eigen::VectorXd::Zero(5 * k);
    for (int r = 0; r < 5; ++r)
        if (region_count[static_cast<size_t>(r)] > 0)
            out.segment(r * k, k) = region_sum.row(r).transpose() / static_cast<double>(region_count[static_cast<size_t>(r)]);
    return out;
}

std::vector<float> extract_features(const GrayImage& raw, const GrayImage& lbp_gray, const Codebook& cb_raw,
                                    const Codebook& cb_lbp) {
    if (cb_raw.channel != Channel::raw || cb_lbp.channel != Channel::lbp)
        throw ArgumentError("extract_features: codebook channels do not match inputs");
    const Eigen::VectorXd a = pool_image(raw, cb_raw);
    const Eigen::VectorXd b = pool_image(lbp_gray, cb_lbp);
    std::vector<float> out(static_cast<size_t>(a.size() + b.size()));
    for (int64_t i = 0; i < a.size(); ++i) out[static_cast<size_t>(i)] = static_cast<float>(a[i]);
    for (int64_t i = 0; i < b.size(); ++i) out[static_cast<size_t>(a.size() + i)] = static_cast<float>(b[i]);
    return out;
}

std::vector<uint8_t> serialize_codebook(const Codebook& cb) {
    ByteWriter w;
    w.magic("FAMECB01");
    w.u8(static_cast<uint8_t>(cb.channel));
    w.u32(static_cast<uint32_t>(cb.k()));
    w.u32(static_cast<uint32_t>(cb.d()));
    w.u32(static_cast<uint32_t>(cb.rf_w));
    w.u32(static_cast<uint32_t>(cb.rf_h));
    w.u32(static_cast<uint32_t>(cb.stride));
    w.f64(cb.whitening.epsilon);
    for (int64_t i = 0; i < cb.d(); ++i) w.f32(static_cast<float>(cb.whitening.mean[i]));
    for (int64_t r = 0; r < cb.d(); ++r)
        for (int64_t c = 0; c < cb.d(); ++c) w.f32(static_cast<float>(cb.whitening.matrix(r, c)));
    for (int64_t r = 0; r < cb.k(); ++r)
        for (int64_t c = 0; c < cb.d(); ++c) w.f32(static_cast<float>(cb.centroids(r, c)));
    w.bytes(cb.outlier_mask);
    return w.data();
}

Codebook deserialize_codebook(std::span<const uint8_t> bytes, const std::string& origin) {
    ByteReader r(bytes, origin);
    r.expect_magic("FAMECB01");
    Codebook cb;
    const uint8_t tag = r.u8();
    if (tag > 1) throw ParseError(origin + ": unknown channel tag " + std::to_string(tag));
    cb.channel = static_cast<Channel>(tag);
    const uint32_t k = r.u32();
    const uint32_t d = r.u32();
    cb.rf_w = static_cast<int>(r.u32());
    cb.rf_h = static_cast<int>(r.u32());
    cb.stride = static_cast<int>(r.u32());
    cb.whitening.epsilon = r.f64();
    cb.whitening.mean.resize(d);
    for (uint32_t i = 0; i < d; ++i) cb.whitening.mean[i] = r.f32();
    cb.whitening.matrix.resize(d, d);
    for (uint32_t i = 0; i < d; ++i)
        for (uint32_t j = 0; j < d; ++j) cb.whitening.matrix(i, j) = r.f32();
    cb.centroids.resize(k, d);
    for (uint32_t i = 0; i < k; ++i)
        for (uint32_t j = 0; j < d; ++j) cb.centroids(i, j) = r.f32();
    auto mask = r.bytes(k);
    cb.outlier_mask.assign(mask.begin(), mask.end());
    r.expect_end();
    cb.contrast_normalize = cb.channel == Channel::raw;
    return cb;
}

void save_codebook(const Codebook& cb, const std::filesystem::path& path) {
    write_file(path, serialize_codebook(cb));
}

Codebook load_codebook(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    return deserialize_codebook(bytes, path.filename().string());
}

}  // namespace fame
