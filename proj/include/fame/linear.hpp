#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "fame/error.hpp"
#include "fame/features.hpp"

namespace fame {

enum class Loss : uint8_t { logistic = 0, squared_hinge = 1 };

// L1-regularized linear classifier with a sparse weight list.
struct SparseLinearModel {
    int64_t dim = 0;
    std::vector<std::pair<uint32_t, double>> weights;  // (index, value), ascending index, values non-zero
    double bias = 0;
    double lambda = 0;
    Loss loss = Loss::logistic;
};

struct TrainReport {
    double final_objective = 0;
    int iterations = 0;  // coordinate sweeps
    double training_accuracy = 0;
    int active_features = 0;
};

struct OvaModel {
    std::vector<int32_t> classes;  // ascending
    std::vector<SparseLinearModel> members;
};

double decision(const SparseLinearModel& m, std::span<const float> x);
double probability(const SparseLinearModel& m, std::span<const float> x);

// L1 logistic regression via cyclic coordinate-wise Newton steps with
// backtracking (Gauss-Seidel order); bias unpenalized. Converges when the
// worst violation of the L1 stationarity conditions drops to tol.
std::pair<SparseLinearModel, TrainReport> train_l1lr(const FeatureMatrix& X, const std::vector<int>& y, double lambda,
                                                     double tol = 1e-5, int max_sweeps = 200);

// L1 squared-hinge SVM grown by grafting: repeatedly activate the inactive
// feature with the largest gradient magnitude while it exceeds lambda + tol,
// re-optimizing the active set between additions.
std::pair<SparseLinearModel, TrainReport> train_grafting_svm(const FeatureMatrix& X, const std::vector<int>& y,
                                                             double lambda, double tol = 1e-5);

// One-vs-all: one binary model per class (ascending class id), label -1 rows
// act as permanent negatives. classes may pin an explicit class list.
OvaModel train_ova(const FeatureMatrix& X, double lambda, double tol = 1e-5, Loss loss = Loss::squared_hinge,
                   std::vector<int32_t> classes = {});

// Argmax of member decisions; ties break to the lowest class id.
int32_t predict(const OvaModel& m, std::span<const float> x);

// Objective values for a candidate model on (X, y); used by reports.
double l1_objective(const FeatureMatrix& X, const std::vector<int>& y, const SparseLinearModel& m);

// Container formats "FAMEMDL1" / "FAMEOVA1".
std::vector<uint8_t> serialize_model(const SparseLinearModel& m);
SparseLinearModel deserialize_model(std::span<const uint8_t> bytes, const std::string& origin = "model");
void save_model(const SparseLinearModel& m, const std::filesystem::path& path);
SparseLinearModel load_model(const std::filesystem::path& path);

std::vector<uint8_t> serialize_ova(const OvaModel& m);
OvaModel deserialize_ova(std::span<const uint8_t> bytes, const std::string& origin = "ova");
void save_ova(const OvaModel& m, const std::filesystem::path& path);
OvaModel load_ova(const std::filesystem::path& path);

}  // namespace fame
