#include "fame/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fame {

namespace {

bool is_pgm_space(uint8_t c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

// Skips whitespace and '#' comment lines; advances pos.
void skip_pgm_space(std::span<const uint8_t> b, size_t& pos) {
    while (pos < b.size()) {
        if (is_pgm_space(b[pos])) {
            ++pos;
        } else if (b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
        } else {
            return;
        }
    }
}

long parse_pgm_int(std::span<const uint8_t> b, size_t& pos, const char* what) {
    skip_pgm_space(b, pos);
    if (pos >= b.size() || b[pos] < '0' || b[pos] > '9')
        throw ParseError(std::string("pgm: expected ") + what + " at byte offset " + std::to_string(pos));
    long v = 0;
    while (pos < b.size() && b[pos] >= '0' && b[pos] <= '9') {
        v = v * 10 + (b[pos] - '0');
        if (v > 1'000'000'000) throw ParseError(std::string("pgm: ") + what + " overflows at byte offset " + std::to_string(pos));
        ++pos;
    }
    return v;
}

}  // namespace

GrayImage load_pgm(std::span<const uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2'))
        throw ParseError("pgm: bad magic at byte offset 0, want P5 or P2");
    const bool binary = bytes[1] == '5';
    size_t pos = 2;

    const long width = parse_pgm_int(bytes, pos, "width");
    const long height = parse_pgm_int(bytes, pos, "height");
    const long maxval = parse_pgm_int(bytes, pos, "maxval");
    if (width < 1 || height < 1)
        throw ParseError("pgm: non-positive dimensions at byte offset " + std::to_string(pos));
    if (maxval < 1 || maxval > 65535)
        throw ParseError("pgm: maxval " + std::to_string(maxval) + " out of [1,65535] at byte offset " +
                         std::to_string(pos));

    GrayImage img;
    img.width = static_cast<int>(width);
    img.height = static_cast<int>(height);
    const size_t count = static_cast<size_t>(width) * static_cast<size_t>(height);
    img.pixels.resize(count);
    const float scale = 1.0f / static_cast<float>(maxval);

    if (binary) {
        // Exactly one whitespace byte separates the header from the payload.
        if (pos >= bytes.size() || !is_pgm_space(bytes[pos]))
            throw ParseError("pgm: missing payload separator at byte offset " + std::to_string(pos));
        ++pos;
        const int bpp = maxval > 255 ? 2 : 1;
        for (size_t i = 0; i < count; ++i) {
            if (pos + bpp > bytes.size())
                throw ParseError("pgm: payload truncated at byte offset " + std::to_string(bytes.size()) +
                                 ", sample " + std::to_string(i) + " of " + std::to_string(count));
            long v = bytes[pos];
            if (bpp == 2) v = (v << 8) | bytes[pos + 1];  // 16-bit samples are big-endian
            pos += bpp;
            img.pixels[i] = static_cast<float>(v) * scale;
        }
    } else {
        for (size_t i = 0; i < count; ++i) {
            long v = parse_pgm_int(bytes, pos, "pixel");
            if (v > maxval)
                throw ParseError("pgm: pixel exceeds maxval at byte offset " + std::to_string(pos));
            img.pixels[i] = static_cast<float>(v) * scale;
        }
    }
    return img;
}

namespace {

float sample_bilinear(const GrayImage& img, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
    const int x0 = static_cast<int>(x);
    const int y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, img.width - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = img.at(x0, y0) * (1.0 - fx) + img.at(x1, y0) * fx;
    const double bot = img.at(x0, y1) * (1.0 - fx) + img.at(x1, y1) * fx;
    return static_cast<float>(top * (1.0 - fy) + bot * fy);
}

}  // namespace

GrayImage resize_bilinear(const GrayImage& img, int target_height) {
    if (target_height < 1) throw ArgumentError("resize: target_height must be >= 1");
    const int target_width =
        std::max(1, static_cast<int>(std::lround(static_cast<double>(img.width) * target_height / img.height)));
    if (target_width == img.width && target_height == img.height) return img;

    GrayImage out;
    out.width = target_width;
    out.height = target_height;
    out.pixels.resize(static_cast<size_t>(target_width) * target_height);
    const double sx = static_cast<double>(img.width) / target_width;
    const double sy = static_cast<double>(img.height) / target_height;
    for (int y = 0; y < target_height; ++y) {
        const double src_y = (y + 0.5) * sy - 0.5;
        for (int x = 0; x < target_width; ++x) {
            const double src_x = (x + 0.5) * sx - 0.5;
            out.at(x, y) = sample_bilinear(img, src_x, src_y);
        }
    }
    return out;
}

GrayImage hflip(const GrayImage& img) {
    GrayImage out = img;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) out.at(img.width - 1 - x, y) = img.at(x, y);
    return out;
}

uint32_t lbp_code(float center, std::span<const float> neighbors) {
    const int p = static_cast<int>(neighbors.size());
    uint32_t word = 0;
    for (int i = 0; i < p; ++i)
        if (neighbors[i] >= center) word |= 1u << i;
    // Minimum over cyclic rotations of the P-bit word.
    uint32_t best = word;
    uint32_t cur = word;
    const uint32_t mask = p == 32 ? 0xffffffffu : ((1u << p) - 1);
    for (int k = 1; k < p; ++k) {
        cur = ((cur >> 1) | (cur << (p - 1))) & mask;
        best = std::min(best, cur);
    }
    return best;
}

LbpImage lbp_encode(const GrayImage& img, int neighbors, double radius) {
    if (neighbors < 4 || neighbors > 30) throw ArgumentError("lbp: neighbor count must be in [4,30]");
    if (radius < 1.0) throw ArgumentError("lbp: radius must be >= 1");
    if (img.width <= 2 * radius + 1 || img.height <= 2 * radius + 1)
        throw DimensionError("lbp: image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                             " too small for radius " + std::to_string(radius));

    LbpImage out;
    out.width = img.width;
    out.height = img.height;
    out.neighbors = neighbors;
    out.radius = radius;
    out.codes.assign(static_cast<size_t>(img.width) * img.height, 0);

    const int border = static_cast<int>(std::ceil(radius));
    std::vector<double> dx(neighbors), dy(neighbors);
    for (int p = 0; p < neighbors; ++p) {
        const double angle = 2.0 * M_PI * p / neighbors;
        dx[p] = radius * std::cos(angle);
        dy[p] = radius * std::sin(angle);
    }
    std::vector<float> samples(neighbors);
    for (int y = border; y < img.height - border; ++y) {
        for (int x = border; x < img.width - border; ++x) {
            for (int p = 0; p < neighbors; ++p)
                samples[p] = sample_bilinear(img, x + dx[p], y + dy[p]);
            out.codes[static_cast<size_t>(y) * img.width + x] = lbp_code(img.at(x, y), samples);
        }
    }
    return out;
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Half-sample symmetric reflection: -1 -> 0, -2 -> 1, n -> n-1. Conserves
// total mass under a normalized kernel.
int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

}  // namespace

GrayImage lbp_to_gray(const LbpImage& lbp, double sigma) {
    if (sigma <= 0) throw ArgumentError("lbp_to_gray: sigma must be > 0");
    const double scale = 1.0 / (std::pow(2.0, lbp.neighbors) - 1.0);
    const auto kernel = gaussian_kernel(sigma);
    const int radius = static_cast<int>(kernel.size() / 2);

    std::vector<double> scaled(lbp.codes.size());
    for (size_t i = 0; i < lbp.codes.size(); ++i) scaled[i] = lbp.codes[i] * scale;

    // Separable convolution: horizontal then vertical.
    std::vector<double> tmp(scaled.size());
    for (int y = 0; y < lbp.height; ++y) {
        for (int x = 0; x < lbp.width; ++x) {
            double acc = 0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * scaled[static_cast<size_t>(y) * lbp.width + reflect_index(x + k, lbp.width)];
            tmp[static_cast<size_t>(y) * lbp.width + x] = acc;
        }
    }
    GrayImage out;
    out.width = lbp.width;
    out.height = lbp.height;
    out.pixels.resize(scaled.size());
    for (int y = 0; y < lbp.height; ++y) {
        for (int x = 0; x < lbp.width; ++x) {
            double acc = 0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * tmp[static_cast<size_t>(reflect_index(y + k, lbp.height)) * lbp.width + x];
            out.pixels[static_cast<size_t>(y) * lbp.width + x] = static_cast<float>(acc);
        }
    }
    return out;
}

}  // namespace fame
