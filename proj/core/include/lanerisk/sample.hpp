#pragma once

#include <string>

#include "lanerisk/tensor.hpp"

namespace lanerisk {

/// Model-ready input: x is [T x H x W x C] (raw/masked modes) or [T x d]
/// (features mode); y is the one-hot risk label, (1,0) safe / (0,1) risky.
struct Sample {
    Tensor x;
    Tensor y;
    std::string clip_id;

    bool risky() const { return y[1] > 0.5; }
};

}  // namespace lanerisk
