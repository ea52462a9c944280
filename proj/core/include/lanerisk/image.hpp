#pragma once

#include <cstdint>
#include <vector>

#include "lanerisk/tensor.hpp"

namespace lanerisk {

/// 8-bit RGB raster, row-major.
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> px;  // height * width * 3

    Image() = default;
    Image(std::size_t h, std::size_t w) : height(h), width(w), px(h * w * 3, 0) {}

    std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) {
        return px[(y * width + x) * 3 + c];
    }
    std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
        return px[(y * width + x) * 3 + c];
    }
};

/// Image as a [H x W x 3] tensor of raw channel values in 0..255.
Tensor image_to_tensor(const Image& img);

/// Bilinear resampling with half-pixel centers: a destination pixel
/// (yd, xd) samples the source at ((yd+0.5)*H/H' - 0.5, ...), clamped.
Tensor bilinear_resize(const Tensor& img, std::size_t out_h, std::size_t out_w);

}  // namespace lanerisk
