#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mirrorfield/vec.hpp"

namespace mirrorfield {

// Linear RGB, row-major from the top-left pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<Vec3> pixels;

  Image() = default;
  Image(int w, int h, const Vec3& fill = {});

  Vec3& at(int u, int v) { return pixels[static_cast<std::size_t>(v) * width + u]; }
  const Vec3& at(int u, int v) const { return pixels[static_cast<std::size_t>(v) * width + u]; }
};

double srgb_encode(double linear);
double srgb_decode(double encoded);
// sRGB-encoded, clamped, rounded to 8 bits.
std::uint8_t to_srgb8(double linear);

// Values in [0, 1] after an 8-bit sRGB round trip, still sRGB encoded. This
// is the representation the metrics are computed on.
Image srgb8_view(const Image& linear);

// By extension: .png (8-bit sRGB) or .pfm (float32, linear).
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& image);

// -10 log10(MSE) over all channels; +infinity for identical images.
double psnr(const Image& a, const Image& b);
// The same over the pixels where mask is nonzero; NaN for an empty mask.
double psnr_masked(const Image& a, const Image& b, std::span<const std::uint8_t> mask);
// Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03, range 1) per
// channel over valid windows, averaged.
double ssim(const Image& a, const Image& b);

}  // namespace mirrorfield
