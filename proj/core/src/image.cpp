#include "lanerisk/image.hpp"

#include <algorithm>
#include <cmath>

namespace lanerisk {

Tensor image_to_tensor(const Image& img) {
    Tensor t({img.height, img.width, 3});
    for (std::size_t i = 0; i < img.px.size(); ++i) t[i] = static_cast<double>(img.px[i]);
    return t;
}

Tensor bilinear_resize(const Tensor& img, std::size_t out_h, std::size_t out_w) {
    if (img.rank() != 3) {
        throw DimensionError("bilinear_resize expects [HxWxC], got " + shape_str(img.shape()));
    }
    const std::size_t H = img.extent(0), W = img.extent(1), C = img.extent(2);
    Tensor out({out_h, out_w, C});
    const double sy = static_cast<double>(H) / static_cast<double>(out_h);
    const double sx = static_cast<double>(W) / static_cast<double>(out_w);
    for (std::size_t yd = 0; yd < out_h; ++yd) {
        double fy = (static_cast<double>(yd) + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(H - 1));
        const std::size_t y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, H - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t xd = 0; xd < out_w; ++xd) {
            double fx = (static_cast<double>(xd) + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(W - 1));
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, W - 1);
            const double wx = fx - static_cast<double>(x0);
            for (std::size_t c = 0; c < C; ++c) {
                const double v00 = img.at({y0, x0, c});
                const double v01 = img.at({y0, x1, c});
                const double v10 = img.at({y1, x0, c});
                const double v11 = img.at({y1, x1, c});
                out.at({yd, xd, c}) = (1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) +
                                      wy * ((1.0 - wx) * v10 + wx * v11);
            }
        }
    }
    return out;
}

}  // namespace lanerisk
