#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cognisnn/continual.hpp"
#include "cognisnn/dataset.hpp"
#include "cognisnn/network.hpp"
#include "cognisnn/topology.hpp"
#include "cognisnn/training.hpp"

namespace cognisnn {

struct TopologySpec {
    std::string generator = "er";  // er | ws | chain | file
    uint32_t nodes = 7;
    double edge_prob = 0.4;
    uint32_t ws_k = 4;
    double ws_rewire = 0.75;
    uint64_t seed = 0;
    std::string file;

    DagTopology build() const;
};

struct DatasetSpec {
    std::string type = "synth";  // synth | synth_pair | idx
    SynthSpec synth;
    std::string pair = "near";  // synth_pair: near | far
    std::string encoding = "repeat";
    std::string idx_train_images, idx_train_labels;
    std::string idx_test_images, idx_test_labels;
    uint32_t idx_classes = 10;
};

struct EnergySpec {
    double e_mac_pj = 4.6;
    double e_sop_pj = 0.9;
    uint32_t samples = 8;
    std::string checkpoint;
};

struct GradcheckSpec {
    uint32_t samples = 200;
    double tolerance = 1e-4;
};

// Flat sectioned key-value experiment configuration. Unknown sections or keys
// are config errors; a run is fully determined by (config, data).
struct ExperimentConfig {
    uint64_t seed = 0;  // master seed, see resolve_seeds()
    TopologySpec topology;
    ModelConfig model;
    TrainConfig train;
    LwfConfig lwf;
    std::string lwf_method = "critical_path";  // critical_path | vanilla
    std::string lwf_similarity = "auto";
    std::string continual_old_checkpoint;
    DatasetSpec dataset;
    EnergySpec energy;
    GradcheckSpec gradcheck;
    std::string eval_checkpoint;

    static ExperimentConfig parse(const std::string& text);
    // byte-stable resolved form (all keys explicit) used for hashing and reruns
    std::string canonical_text() const;

    // master-seed override: per-section seeds not set explicitly derive from it
    void apply_seed_override(uint64_t master);
};

}  // namespace cognisnn
