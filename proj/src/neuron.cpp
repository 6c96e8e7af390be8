#include "cognisnn/neuron.hpp"

#include <cmath>

#include "cognisnn/ops.hpp"

namespace cognisnn {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double surrogate_grad(double x, const NeuronConfig& cfg) {
    double a = cfg.surrogate_width;
    if (cfg.surrogate == SurrogateKind::arctan) {
        double u = kPi / 2.0 * a * x;
        return a / (2.0 * (1.0 + u * u));
    }
    return std::abs(x) <= a ? 1.0 / (2.0 * a) : 0.0;
}

double surrogate_smooth(double x, const NeuronConfig& cfg) {
    double a = cfg.surrogate_width;
    if (cfg.surrogate == SurrogateKind::arctan)
        return 0.5 + std::atan(kPi / 2.0 * a * x) / kPi;
    if (x < -a) return 0.0;
    if (x > a) return 1.0;
    return (x + a) / (2.0 * a);
}

Tensor charge(const NeuronState& state, const Tensor& input_current,
              const NeuronConfig& cfg) {
    cfg.validate();
    if (!state.membrane.same_shape(input_current))
        throw DimensionError("charge: membrane/current shape mismatch");
    Tensor h = Tensor::zeros(input_current.shape);
    double inv_tau = 1.0 / cfg.tau;
    for (std::size_t i = 0; i < h.size(); ++i) {
        double v = state.membrane.data[i];
        h.data[i] = v + (input_current.data[i] - v) * inv_tau;
    }
    return h;
}

Tensor fire(const Tensor& h, const NeuronConfig& cfg, bool smooth) {
    cfg.validate();
    Tensor s = Tensor::zeros(h.shape);
    if (smooth) {
        for (std::size_t i = 0; i < s.size(); ++i)
            s.data[i] = surrogate_smooth(h.data[i] - cfg.v_threshold, cfg);
    } else {
        for (std::size_t i = 0; i < s.size(); ++i)
            s.data[i] = h.data[i] >= cfg.v_threshold ? 1.0 : 0.0;
    }
    return s;
}

Tensor soft_reset(const Tensor& h, const Tensor& s, const NeuronConfig& cfg) {
    if (!h.same_shape(s)) throw DimensionError("soft_reset: shape mismatch");
    Tensor v = Tensor::zeros(h.shape);
    for (std::size_t i = 0; i < v.size(); ++i)
        v.data[i] = h.data[i] - cfg.v_threshold * s.data[i];
    return v;
}

StepResult step(const NeuronState& state, const Tensor& input_current,
                const NeuronConfig& cfg, bool smooth) {
    Tensor h = charge(state, input_current, cfg);
    Tensor s = fire(h, cfg, smooth);
    Tensor v = soft_reset(h, s, cfg);
    return StepResult{std::move(s), NeuronState{std::move(v)}};
}

Var op_fire(Tape& t, Var h, const NeuronConfig& cfg, bool smooth) {
    Tensor out = fire(t.value(h), cfg, smooth);
    int hi = h.index;
    return t.push(std::move(out), {hi},
                  [hi, cfg](Tape& tp, int self) {
                      const Tensor& g = tp.node(self).grad;
                      const Tensor& hv = tp.node(hi).value;
                      Tensor dh = Tensor::zeros(hv.shape);
                      for (std::size_t i = 0; i < dh.size(); ++i)
                          dh.data[i] =
                              g.data[i] * surrogate_grad(hv.data[i] - cfg.v_threshold, cfg);
                      tp.accumulate(hi, dh);
                  },
                  "fire");
}

Var op_charge(Tape& t, Var prev_membrane, Var input_current, const NeuronConfig& cfg) {
    double inv_tau = 1.0 / cfg.tau;
    return op_lincomb(t, prev_membrane, input_current, 1.0 - inv_tau, inv_tau);
}

Var op_soft_reset(Tape& t, Var h, Var s, const NeuronConfig& cfg) {
    return op_lincomb(t, h, s, 1.0, -cfg.v_threshold);
}

}  // namespace cognisnn
