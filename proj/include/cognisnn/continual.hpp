#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cognisnn/data.hpp"
#include "cognisnn/network.hpp"
#include "cognisnn/topology.hpp"
#include "cognisnn/training.hpp"

namespace cognisnn {

struct LwfConfig {
    double lambda = 1.0;        // old-task loss weight
    double temperature = 2.0;   // distillation temperature
    uint32_t epochs = 4;
    double similarity_threshold = 50.0;
    uint32_t k_paths = 1;
    std::size_t path_cap = 1000000;
    std::size_t fid_max_samples = 2048;

    void validate() const {
        if (lambda < 0.0) throw ConfigError("lwf: lambda must be >= 0");
        if (temperature <= 0.0) throw ConfigError("lwf: temperature must be > 0");
    }
};

enum class SimilarityMode { automatic, similar, dissimilar };
SimilarityMode parse_similarity(const std::string& name);

// old-task logits of the frozen pre-trained model on every new-task sample,
// computed once before training; the hash pins the cache against mutation
struct SoftTargetCache {
    std::vector<Tensor> logits;
    std::string hash;

    void verify() const;
    static std::string hash_of(const std::vector<Tensor>& logits);
};

SoftTargetCache compute_soft_targets(Model& old_model, const EncodedDataset& new_train,
                                     uint32_t old_task, uint32_t batch_size);

// balance of new-task cross-entropy and temperature-scaled distillation;
// the regularizer is realized as optimizer weight decay, not added here
double lwf_loss(const Tensor& new_logits, const std::vector<uint32_t>& new_labels,
                const Tensor& old_logits, const Tensor& soft_targets,
                const LwfConfig& cfg);
Var op_lwf_loss(Tape& t, Var new_logits, const std::vector<uint32_t>& new_labels,
                Var old_logits, const Tensor& soft_targets, const LwfConfig& cfg);

// Frechet distance between Gaussian fits of two feature sets (rows = samples).
// Requires at least d+1 samples per side for a d-dimensional feature space.
double task_similarity(const std::vector<Tensor>& features_a,
                       const std::vector<Tensor>& features_b);

// time-averaged sink features (classifier input) of up to max_samples items
std::vector<Tensor> extract_features(Model& model, const EncodedDataset& data,
                                     std::size_t max_samples, uint32_t batch_size);

// parameters tied to the selected critical paths: both triplets of every
// on-path node plus the raw gains of the path's edges
std::set<std::string> critical_parameter_paths(const DagTopology& topo,
                                               const PathRanking& ranking, std::size_t k,
                                               bool similar);

struct ContinualEpoch {
    uint32_t epoch = 0;
    double new_train_loss = 0.0;
    double new_test_acc = 0.0;
    double old_test_acc = 0.0;
};

struct ContinualResult {
    Model model;  // retrained copy with both heads
    std::vector<ContinualEpoch> history;
    double old_acc_before = 0.0;  // benchmark
    double old_acc_after = 0.0;
    double new_acc_after = 0.0;
    bool similar_branch = true;
    std::optional<double> fid;              // set when the auto gate ran
    std::set<std::string> trainable_paths;  // audit: complement was frozen
};

struct ContinualSetup {
    uint32_t old_task = 0;
    uint32_t new_task = 1;
    uint32_t new_classes = 0;
    SimilarityMode similarity = SimilarityMode::automatic;
};

ContinualResult critical_path_lwf(const Model& old_model, const TaskData& old_data,
                                  const TaskData& new_data, const ContinualSetup& setup,
                                  const LwfConfig& lwf, const TrainConfig& train);

// same workflow with nothing frozen (every shared parameter and both heads train)
ContinualResult vanilla_lwf(const Model& old_model, const TaskData& old_data,
                            const TaskData& new_data, const ContinualSetup& setup,
                            const LwfConfig& lwf, const TrainConfig& train);

}  // namespace cognisnn
