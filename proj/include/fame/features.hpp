#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fame/error.hpp"

namespace fame {

// Row-major instance x dimension table with integer class labels.
// Label -1 means unlabeled/negative.
struct FeatureMatrix {
    int64_t n = 0;
    int64_t dim = 0;
    std::vector<float> values;
    std::vector<int32_t> labels;

    std::span<const float> row(int64_t i) const {
        return std::span<const float>(values.data() + i * dim, static_cast<size_t>(dim));
    }
    void append_row(std::span<const float> v, int32_t label) {
        if (dim == 0) dim = static_cast<int64_t>(v.size());
        if (static_cast<int64_t>(v.size()) != dim)
            throw DimensionError("feature row length " + std::to_string(v.size()) + " != dim " + std::to_string(dim));
        values.insert(values.end(), v.begin(), v.end());
        labels.push_back(label);
        ++n;
    }
};

// Container format "FAMEMTX1": n and dim as u32 LE, labels as n i32 LE,
// values as n*dim f32 LE row-major.
std::vector<uint8_t> serialize_features(const FeatureMatrix& m);
FeatureMatrix deserialize_features(std::span<const uint8_t> bytes, const std::string& origin = "features");
void save_features(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix load_features(const std::filesystem::path& path);

}  // namespace fame
