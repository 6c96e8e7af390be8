#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cognisnn/neuron.hpp"
#include "cognisnn/ops.hpp"
#include "cognisnn/tape.hpp"
#include "cognisnn/topology.hpp"

namespace cognisnn {

enum class SkipGate { or_gate, add_gate, and_gate, iand_gate, no_gate };

SkipGate parse_gate(const std::string& name);
std::string gate_name(SkipGate g);

inline constexpr uint32_t kNoTask = 0xffffffffu;

struct ModelConfig {
    uint32_t channels = 32;  // feature width shared by every ResNode
    SkipGate gate = SkipGate::or_gate;
    uint32_t time_steps = 4;
    NeuronConfig neuron;
    uint32_t eta = 1;    // standard-pool dimension threshold
    uint32_t kappa = 2;  // standard-pool kernel
    uint32_t input_channels = 1;
    uint32_t image_size = 16;  // stem spatial dim, square inputs
    double bn_eps = 1e-5;
    double bn_momentum = 0.1;

    void validate() const;
};

// Time-major spike volume [T,C,H,W]; `binary` asserts every element is 0 or 1.
struct SpikeTensor {
    Tensor values;
    bool binary = false;

    void check() const {
        if (binary && !values.all_binary())
            throw InternalError("spike tensor flagged binary has non-binary values");
    }
};

struct Parameter {
    Tensor value;
    bool learnable = true;
};

// All learnable values addressable by stable string paths; freeze masks and
// checkpoints reference these paths only.
class ParamStore {
public:
    void add(const std::string& path, Tensor value, bool learnable = true);
    bool has(const std::string& path) const;
    Tensor& at(const std::string& path);
    const Tensor& at(const std::string& path) const;
    bool is_learnable(const std::string& path) const;
    std::vector<std::string> paths() const;
    std::vector<std::string> learnable_paths() const;
    const std::map<std::string, Parameter>& items() const { return items_; }
    std::map<std::string, Parameter>& items_mut() { return items_; }

private:
    std::map<std::string, Parameter> items_;
};

// spatial dims and per-edge pooling kernels implied by the topology
struct DimPlan {
    std::vector<uint32_t> node_dim;  // spatial dim at each node's input/output
    std::map<Edge, std::pair<uint32_t, uint32_t>> edge_pools;  // (sp, tp) kernels
};

DimPlan plan_dims(const DagTopology& topo, uint32_t stem_dim, uint32_t eta,
                  uint32_t kappa);

// standard pooling: downsample by kappa once the spatial dim reaches eta;
// guarded so a map is never pooled below 1x1 or through a non-dividing kernel
uint32_t standard_pool_dim(uint32_t d, uint32_t eta, uint32_t kappa);
Tensor standard_pool(const Tensor& o, uint32_t eta, uint32_t kappa);
// tailored pooling: align to target_dim with kernel D/target_dim
Tensor tailored_pool(const Tensor& o, uint32_t target_dim);

// classification of tensor contents for the energy accounting
enum class ValueForm { binary, integer, real };
ValueForm combine_gate_form(SkipGate gate, ValueForm a, ValueForm b);

// one predecessor's contribution to a node input: sigmoid(gain) scaling after
// the standard/tailored pooling chain
struct AggregateTerm {
    Var output;           // predecessor output [B,C,H,W]
    Var gain;             // raw edge weight, single element
    uint32_t sp_kernel = 1;
    uint32_t tp_kernel = 1;
};

// weighted predecessor aggregation; the result is real-valued, not spike-form
Var op_aggregate_inputs(Tape& t, const std::vector<AggregateTerm>& terms);

struct OpCounter {
    double sop = 0.0;  // spike-driven accumulates
    double mac = 0.0;  // dense multiply-accumulates
};

struct NodeStats {
    double value_sum = 0.0;  // summed output magnitude (spike count for binary)
    double elements = 0.0;   // elements emitted across T and batch

    double rate() const { return elements > 0 ? value_sum / elements : 0.0; }
};

struct ForwardStats {
    std::vector<NodeStats> node;
    OpCounter ops;
    // populated when collect_values is set
    std::vector<std::vector<Tensor>> node_outputs;  // [node][t] -> [B,C,H,W]
    std::vector<std::vector<Tensor>> node_o1;
    std::vector<Tensor> stem_outputs;

    double mean_rate() const {
        if (node.empty()) return 0.0;
        double s = 0.0;
        for (auto& n : node) s += n.rate();
        return s / double(node.size());
    }
};

struct ForwardOptions {
    bool train_bn = false;
    bool smooth = false;
    bool collect_stats = false;
    bool collect_values = false;
    const std::vector<uint32_t>* topo_order = nullptr;  // override for tests
    const std::set<std::string>* eval_bn_prefixes = nullptr;  // triplets pinned to eval BN
};

struct ForwardResult {
    Var features;                      // [B, channels] classifier input
    std::map<uint32_t, Var> logits;    // one entry per requested task head
    Var logits_single;                 // single-task convenience, else invalid
    std::map<std::string, Var> param_vars;
    std::vector<std::vector<Var>> node_output_vars;  // [node][t], on the tape
    ForwardStats stats;
};

class Model {
public:
    ModelConfig config;
    DagTopology topology;
    ParamStore params;
    std::map<std::string, BnRunning> bn_running;  // keyed by triplet prefix + ".bn"
    std::map<uint32_t, uint32_t> heads;           // task id -> class count

    static Model build(DagTopology topo, ModelConfig cfg, uint64_t seed);

    void add_head(uint32_t task, uint32_t classes);
    bool has_head(uint32_t task) const { return heads.count(task) != 0; }

    // frames: one [T,Cin,H,W] tensor per batch item
    ForwardResult forward(Tape& tape, const std::vector<const Tensor*>& frames,
                          uint32_t task, const ForwardOptions& opt);
    // shared features feeding several task heads in one pass
    ForwardResult forward_multi(Tape& tape, const std::vector<const Tensor*>& frames,
                                const std::vector<uint32_t>& tasks,
                                const ForwardOptions& opt);

    // firing rates and synaptic-operation counts over one inference pass
    ForwardStats statistics(const std::vector<const Tensor*>& frames);

    // triplet parameter prefixes: "stem", "node<i>.t1", "node<i>.t2"
    std::vector<std::string> triplet_prefixes() const;
};

}  // namespace cognisnn
