#pragma once

#include <vector>

#include "forgeguard/imaging/image.hpp"
#include "forgeguard/simd/kernels.hpp"

namespace forgeguard::imaging {

struct PyramidLevel {
  double scale = 1.0;
  ImageBuffer image;
};

inline constexpr double kPyramidFactor = 0.709;
inline constexpr int kPyramidMinSize = 12;

// Bilinear resampling with half-pixel centers and edge clamping. Output
// intensities are rounded half away from zero.
ImageBuffer resample(const ImageBuffer& image, int target_width, int target_height);
ImageBuffer resample(const ImageBuffer& image, int target_width, int target_height,
                     const simd::KernelTable& kernels);

// Scale schedule shared by build_pyramid: factor^k for every k with both
// floor(width * scale) and floor(height * scale) >= min_size.
std::vector<double> pyramid_scales(int width, int height, double factor = kPyramidFactor,
                                   int min_size = kPyramidMinSize);

// Levels with scale factor^k (k = 0, 1, ...) while both floor(dim * scale)
// stay >= min_size. An image already below min_size yields no levels.
std::vector<PyramidLevel> build_pyramid(const ImageBuffer& image, double factor = kPyramidFactor,
                                        int min_size = kPyramidMinSize);

// Crops the box after rounding its edges to the nearest pixel and clipping to
// the image. Throws Error(kDegenerateCrop) if nothing is left.
ImageBuffer crop(const ImageBuffer& image, const Box& box);

// Crop followed by resample to size x size; pixels outside the image are
// zero, so boxes hanging off the border keep their aspect.
ImageBuffer crop_square_patch(const ImageBuffer& image, const Box& box, int size);

ImageBuffer to_grayscale(const ImageBuffer& image);
ImageBuffer to_rgb(const ImageBuffer& image);

}  // namespace forgeguard::imaging
