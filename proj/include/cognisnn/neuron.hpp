#pragma once

#include "cognisnn/tape.hpp"
#include "cognisnn/tensor.hpp"

namespace cognisnn {

enum class SurrogateKind { arctan, rectangular };

struct NeuronConfig {
    double v_threshold = 1.0;
    double tau = 2.0;  // leak time constant, > 1
    SurrogateKind surrogate = SurrogateKind::arctan;
    double surrogate_width = 2.0;

    void validate() const {
        if (v_threshold <= 0.0) throw InvalidArgument("neuron: v_threshold must be > 0");
        if (tau <= 1.0) throw InvalidArgument("neuron: tau must be > 1");
        if (surrogate_width <= 0.0)
            throw InvalidArgument("neuron: surrogate_width must be > 0");
    }
};

// Membrane potential after the previous discharge; zeroed at the start of
// every sample presentation.
struct NeuronState {
    Tensor membrane;

    static NeuronState zeros(std::vector<std::size_t> shape) {
        return NeuronState{Tensor::zeros(std::move(shape))};
    }
};

// derivative of the surrogate at h - v_threshold
double surrogate_grad(double x, const NeuronConfig& cfg);
// smooth replacement for the Heaviside step (integral of the surrogate)
double surrogate_smooth(double x, const NeuronConfig& cfg);

// charging: H[t] = V[t-1] + (C[t] - V[t-1]) / tau
Tensor charge(const NeuronState& state, const Tensor& input_current,
              const NeuronConfig& cfg);
// discharge: S = 1 where h >= v_threshold (smooth mode substitutes the
// differentiable surrogate)
Tensor fire(const Tensor& h, const NeuronConfig& cfg, bool smooth = false);
// soft reset: V[t] = H[t] - v_threshold * S[t]
Tensor soft_reset(const Tensor& h, const Tensor& s, const NeuronConfig& cfg);

struct StepResult {
    Tensor spikes;
    NeuronState state;
};
StepResult step(const NeuronState& state, const Tensor& input_current,
                const NeuronConfig& cfg, bool smooth = false);

// Tape ops for training. Forward matches the raw kernels; backward uses the
// surrogate derivative in place of the Heaviside's zero-a.e. derivative.
Var op_fire(Tape& t, Var h, const NeuronConfig& cfg, bool smooth);
Var op_charge(Tape& t, Var prev_membrane, Var input_current, const NeuronConfig& cfg);
Var op_soft_reset(Tape& t, Var h, Var s, const NeuronConfig& cfg);

}  // namespace cognisnn
