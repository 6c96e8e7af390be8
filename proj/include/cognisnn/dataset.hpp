#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cognisnn/data.hpp"

namespace cognisnn {

// ---------------------------------------------------------------------------
// IDX files (magic, dims, big-endian extents, raw bytes)
// ---------------------------------------------------------------------------

struct IdxArray {
    std::vector<std::size_t> dims;
    std::vector<uint8_t> bytes;
};

IdxArray load_idx(const std::string& path);
void write_idx(const std::string& path, const IdxArray& array);

// images normalized to [0,1], one [1,H,W] tensor per item
std::vector<Tensor> load_idx_images(const std::string& path);
std::vector<uint32_t> load_idx_labels(const std::string& path);
void write_idx_images(const std::string& path, const std::vector<Tensor>& images);
void write_idx_labels(const std::string& path, const std::vector<uint32_t>& labels);

// ---------------------------------------------------------------------------
// synthetic pattern tasks
// ---------------------------------------------------------------------------

struct SynthSpec {
    std::string family = "gratings";  // gratings | textures
    uint32_t classes = 3;
    uint32_t image_size = 12;
    uint32_t train_per_class = 500;
    uint32_t test_per_class = 100;
    double noise = 0.05;
    uint64_t seed = 1;
    double orientation_offset_deg = 0.0;  // gratings only
};

// exact per-class counts, deterministic in the seed
std::vector<Tensor> synth_images(const SynthSpec& spec, uint32_t per_class, uint64_t seed,
                                 std::vector<uint32_t>* labels);

TaskData make_synth_task(const SynthSpec& spec, uint32_t time_steps,
                         const std::string& encoding);

struct SynthPair {
    TaskData old_task;
    TaskData new_task;
};

// two tasks at a controlled similarity level: "near" shares the pattern
// family with shifted classes, "far" draws from a disjoint family
SynthPair synth_tasks(const SynthSpec& spec, bool near, uint32_t time_steps,
                      const std::string& encoding);

// ---------------------------------------------------------------------------
// encoding
// ---------------------------------------------------------------------------

// rate: Bernoulli(pixel) per step, seeded; repeat: the frame copied T times
EncodedDataset encode(const std::vector<Tensor>& images,
                      const std::vector<uint32_t>& labels, uint32_t classes, uint32_t T,
                      const std::string& mode, uint64_t seed = 0);

}  // namespace cognisnn
