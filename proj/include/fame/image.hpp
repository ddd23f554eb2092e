#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fame/error.hpp"

namespace fame {

// Grayscale raster, intensities in [0,1], row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;

    float at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
    float& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
};

// Per-pixel rotation-minimized local binary pattern codes. Border pixels of
// width ceil(radius) carry code 0 (no valid neighborhood).
struct LbpImage {
    int width = 0;
    int height = 0;
    int neighbors = 0;   // P
    double radius = 0;   // R
    std::vector<uint32_t> codes;

    uint32_t at(int x, int y) const { return codes[static_cast<size_t>(y) * width + x]; }
};

// Parses binary (P5) or ASCII (P2) PGM. Pixels are divided by maxval.
// Throws ParseError naming the byte offset on malformed input.
GrayImage load_pgm(std::span<const uint8_t> bytes);

// Bilinear resize with half-pixel-center alignment. Width is scaled to
// preserve aspect ratio: round(width * target_height / height), min 1.
GrayImage resize_bilinear(const GrayImage& img, int target_height);

GrayImage hflip(const GrayImage& img);

// Rotation-minimized code for one sampled neighborhood: bit p is set iff
// neighbors[p] >= center, and the P-bit word is reduced to the minimum over
// all cyclic rotations.
uint32_t lbp_code(float center, std::span<const float> neighbors);

// P neighbors sampled on the radius-R circle by bilinear interpolation,
// angle 2*pi*p/P from the +x axis with y pointing down.
LbpImage lbp_encode(const GrayImage& img, int neighbors, double radius);

// Codes scaled by 1/(2^P - 1) into [0,1], then smoothed with a truncated
// Gaussian (radius ceil(3*sigma), kernel normalized, reflect padding).
GrayImage lbp_to_gray(const LbpImage& lbp, double sigma);

}  // namespace fame
