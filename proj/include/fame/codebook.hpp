#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fame/error.hpp"
#include "fame/features.hpp"
#include "fame/image.hpp"

namespace fame {

// Random receptive-field patches, one per row.
struct PatchMatrix {
    int64_t n = 0;
    int64_t d = 0;
    std::vector<double> values;  // row-major n x d

    std::span<double> row(int64_t i) { return {values.data() + i * d, static_cast<size_t>(d)}; }
    std::span<const double> row(int64_t i) const { return {values.data() + i * d, static_cast<size_t>(d)}; }
};

// ZCA transform E diag((lambda+eps)^-1/2) E^T plus the column mean.
struct WhiteningTransform {
    Eigen::VectorXd mean;
    Eigen::MatrixXd matrix;
    double epsilon = 0;
};

enum class Channel : uint8_t { raw = 0, lbp = 1 };

struct Codebook {
    Eigen::MatrixXd centroids;          // K x d
    std::vector<uint8_t> outlier_mask;  // K entries, 1 = outlier centroid
    int rf_w = 0;
    int rf_h = 0;
    int stride = 1;
    Channel channel = Channel::raw;
    WhiteningTransform whitening;
    bool contrast_normalize = true;  // true iff channel == raw

    int64_t k() const { return centroids.rows(); }
    int64_t d() const { return centroids.cols(); }
};

// Default contrast-normalization stabilizer: 10 on [0,255]-scaled patches.
inline constexpr double kContrastEpsilon = 10.0 / (255.0 * 255.0);

// Uniform seeded draws over all valid (image, top-left) placements.
PatchMatrix sample_patches(std::span<const GrayImage> images, int rf_w, int rf_h, int64_t count, uint64_t seed);

// (x - mean) / sqrt(var + eps) with population variance.
void contrast_normalize(std::span<double> patch, double eps = kContrastEpsilon);

WhiteningTransform fit_zca(const PatchMatrix& patches, double epsilon);
PatchMatrix apply_zca(const WhiteningTransform& t, const PatchMatrix& patches);

struct KMeansResult {
    Eigen::MatrixXd centroids;  // K x d
    std::vector<int> assignments;
    std::vector<int64_t> counts;
    std::vector<double> sse_history;  // within-cluster SSE after each Lloyd iteration
    int iterations = 0;
};

// Lloyd's algorithm with distance-weighted (k-means++ style) seeding. Empty
// clusters are re-seeded to the farthest point. Deterministic for fixed seed.
KMeansResult kmeans(const PatchMatrix& patches, int64_t k, int max_iters, uint64_t seed);

// Linear-interpolation percentile of the values (q in [0,100]).
double percentile(std::vector<double> values, double q);

// Flags centroids whose assignment count exceeds the 99th-percentile upper
// whisker; with flag_low also those below the 1st-percentile lower whisker.
std::vector<uint8_t> flag_outlier_centroids(std::span<const int64_t> assignment_counts, bool flag_low = false);

// Triangular activation of a preprocessed patch: a_k = max(0, mean_z - z_k)
// with z_k the Euclidean distance to centroid k; masked centroids emit 0.
Eigen::VectorXd triangular_encode(const Eigen::VectorXd& patch, const Codebook& cb);

// Dense receptive-field sweep pooled onto four quadrants plus a half-sized
// center grid; placements contribute to the regions containing their center.
Eigen::VectorXd pool_image(const GrayImage& img, const Codebook& cb);

// [pool(raw), pool(lbp)] as f32; length 5*K_raw + 5*K_lbp (= 2*5*K).
std::vector<float> extract_features(const GrayImage& raw, const GrayImage& lbp_gray, const Codebook& cb_raw,
                                    const Codebook& cb_lbp);

// Container format "FAMECB01".
std::vector<uint8_t> serialize_codebook(const Codebook& cb);
Codebook deserialize_codebook(std::span<const uint8_t> bytes, const std::string& origin = "codebook");
void save_codebook(const Codebook& cb, const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);

}  // namespace fame
