#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cognisnn/tensor.hpp"

namespace cognisnn {

// one encoded presentation: frames [T,C,H,W] plus class label
struct Sample {
    Tensor frames;
    uint32_t label = 0;
};

struct EncodedDataset {
    std::vector<Sample> samples;
    uint32_t classes = 0;
    std::string encoding;  // "rate" | "repeat"
    bool binary = false;   // rate encoding yields strictly binary frames
};

// train/test split of one task
struct TaskData {
    EncodedDataset train;
    EncodedDataset test;
    uint32_t classes = 0;
};

}  // namespace cognisnn
