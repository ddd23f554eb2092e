#include "fame/features.hpp"

#include "fame/binio.hpp"

namespace fame {

std::vector<uint8_t> serialize_features(const FeatureMatrix& m) {
    ByteWriter w;
    w.magic("FAMEMTX1");
    w.u32(static_cast<uint32_t>(m.n));
    w.u32(static_cast<uint32_t>(m.dim));
    for (int32_t l : m.labels) w.i32(l);
    for (float v : m.values) w.f32(v);
    return w.data();
}

FeatureMatrix deserialize_features(std::span<const uint8_t> bytes, const std::string& origin) {
    ByteReader r(bytes, origin);
    r.expect_magic("FAMEMTX1");
    FeatureMatrix m;
    m.n = r.u32();
    m.dim = r.u32();
    m.labels.resize(static_cast<size_t>(m.n));
    for (auto& l : m.labels) l = r.i32();
    m.values.resize(static_cast<size_t>(m.n * m.dim));
    for (auto& v : m.values) v = r.f32();
    r.expect_end();
    return m;
}

void save_features(const FeatureMatrix& m, const std::filesystem::path& path) {
    write_file(path, serialize_features(m));
}

FeatureMatrix load_features(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    return deserialize_features(bytes, path.filename().string());
}

}  // namespace fame
