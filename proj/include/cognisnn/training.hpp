#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cognisnn/data.hpp"
#include "cognisnn/network.hpp"

namespace cognisnn {

enum class OptimizerKind { sgd, adam };

OptimizerKind parse_optimizer(const std::string& name);

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::adam;
    double lr = 1e-3;
    double momentum = 0.9;  // sgd only
    double weight_decay = 1e-4;
    uint32_t epochs = 10;
    uint32_t batch_size = 16;
    uint64_t seed = 0;
    bool smooth_mode = false;
    double clip_norm = 10.0;  // global-norm safety net, 0 disables

    void validate() const {
        if (lr <= 0.0) throw ConfigError("train: learning rate must be > 0");
        if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    }
};

// parameter paths excluded from optimizer updates
using FreezeMask = std::set<std::string>;

struct OptimizerState {
    std::map<std::string, Tensor> m;  // adam first moment / sgd velocity
    std::map<std::string, Tensor> v;  // adam second moment
    uint64_t step = 0;
};

// softmax cross-entropy on raw logits [K] or [B,K]; labels checked in range
double cross_entropy_loss(const Tensor& logits, const std::vector<uint32_t>& labels);
inline double cross_entropy_loss(const Tensor& logits, uint32_t label) {
    return cross_entropy_loss(logits, std::vector<uint32_t>{label});
}

struct StepMetrics {
    double loss = 0.0;
    uint32_t correct = 0;
    double spike_rate = 0.0;
};

// one forward/backward/update over a batch; frozen paths stay untouched
StepMetrics train_step(Model& model, const std::vector<const Tensor*>& frames,
                       const std::vector<uint32_t>& labels, uint32_t task,
                       const TrainConfig& cfg, const FreezeMask& mask,
                       OptimizerState& opt);

// global-norm clip then optimizer update over the given gradient map
void apply_gradients(Model& model, std::map<std::string, Tensor>& grads,
                     const TrainConfig& cfg, OptimizerState& opt);

// triplets whose every learnable parameter is masked; their BN runs in eval
// mode during training so frozen nodes keep their function pinned
std::set<std::string> frozen_bn_prefixes(const Model& model, const FreezeMask& mask);

struct EpochMetrics {
    uint32_t epoch = 0;
    std::string split;
    double loss = 0.0;
    double accuracy = 0.0;
    double spike_rate = 0.0;
};

std::string metrics_line(const EpochMetrics& m);

struct EvalMetrics {
    double loss = 0.0;
    double accuracy = 0.0;
    double spike_rate = 0.0;
};

EvalMetrics evaluate(Model& model, const EncodedDataset& data, uint32_t task,
                     uint32_t batch_size);

struct FitResult {
    std::vector<EpochMetrics> history;
};

// seeded epoch loop over shuffled batches; test metrics per epoch when given
FitResult fit(Model& model, const EncodedDataset& train, const EncodedDataset* test,
              uint32_t task, const TrainConfig& cfg, const FreezeMask& mask = {});

struct GradCheckGroup {
    std::string path;
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

struct GradCheckReport {
    std::vector<GradCheckGroup> groups;
    double max_rel_err = 0.0;
    std::size_t total_checked = 0;
};

// central finite differences against tape gradients in smooth mode; relative
// error uses max(|a|,|b|,1e-3) in the denominator so FD noise on near-zero
// gradients does not dominate
GradCheckReport gradient_check(Model& model, const Sample& sample, uint32_t task,
                               std::size_t min_params, double fd_step = 1e-4,
                               uint64_t seed = 0);

double relative_error(double a, double b);

}  // namespace cognisnn
