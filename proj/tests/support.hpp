#pragma once

// shared test helpers: independent oracles, FD machinery, model fixtures

#include <atomic>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "cognisnn/network.hpp"
#include "cognisnn/ops.hpp"
#include "cognisnn/tape.hpp"
#include "cognisnn/tensor.hpp"
#include "cognisnn/topology.hpp"

namespace testsupport {

using namespace cognisnn;

inline Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                            double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) v = dist(rng);
    return t;
}

inline Tensor random_binary(std::vector<std::size_t> shape, std::mt19937_64& rng,
                            double p = 0.5) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) v = dist(rng) < p ? 1.0 : 0.0;
    return t;
}

// six-nested-loop convolution, written from the output-window definition
inline Tensor naive_conv2d(const Tensor& x, const Tensor& k, std::size_t stride,
                           std::size_t pad) {
    bool grouped = x.rank() == 4;
    std::size_t g = grouped ? x.shape[0] : 1;
    std::size_t cin = grouped ? x.shape[1] : x.shape[0];
    std::size_t h = grouped ? x.shape[2] : x.shape[1];
    std::size_t w = grouped ? x.shape[3] : x.shape[2];
    std::size_t cout = k.shape[0], kh = k.shape[2], kw = k.shape[3];
    std::size_t ho = (h + 2 * pad - kh) / stride + 1;
    std::size_t wo = (w + 2 * pad - kw) / stride + 1;
    Tensor y = Tensor::zeros(grouped ? std::vector<std::size_t>{g, cout, ho, wo}
                                     : std::vector<std::size_t>{cout, ho, wo});
    for (std::size_t gi = 0; gi < g; ++gi)
        for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t oy = 0; oy < ho; ++oy)
                for (std::size_t ox = 0; ox < wo; ++ox) {
                    double s = 0.0;
                    for (std::size_t ci = 0; ci < cin; ++ci)
                        for (std::size_t ky = 0; ky < kh; ++ky)
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                long iy = long(oy * stride + ky) - long(pad);
                                long ix = long(ox * stride + kx) - long(pad);
                                if (iy < 0 || iy >= long(h) || ix < 0 || ix >= long(w))
                                    continue;
                                double xv =
                                    x.data[((gi * cin + ci) * h + std::size_t(iy)) * w +
                                           std::size_t(ix)];
                                double kv =
                                    k.data[((co * cin + ci) * kh + ky) * kw + kx];
                                s += xv * kv;
                            }
                    y.data[((gi * cout + co) * ho + oy) * wo + ox] = s;
                }
    return y;
}

inline Tensor naive_avg_pool(const Tensor& x, std::size_t k) {
    bool grouped = x.rank() == 4;
    std::size_t g = grouped ? x.shape[0] : 1;
    std::size_t c = grouped ? x.shape[1] : x.shape[0];
    std::size_t h = grouped ? x.shape[2] : x.shape[1];
    std::size_t w = grouped ? x.shape[3] : x.shape[2];
    std::size_t ho = h / k, wo = w / k;
    Tensor y = Tensor::zeros(grouped ? std::vector<std::size_t>{g, c, ho, wo}
                                     : std::vector<std::size_t>{c, ho, wo});
    for (std::size_t gc = 0; gc < g * c; ++gc)
        for (std::size_t oy = 0; oy < ho; ++oy)
            for (std::size_t ox = 0; ox < wo; ++ox) {
                double s = 0.0;
                for (std::size_t a = 0; a < k; ++a)
                    for (std::size_t b = 0; b < k; ++b)
                        s += x.data[gc * h * w + (oy * k + a) * w + ox * k + b];
                y.data[gc * ho * wo + oy * wo + ox] = s / double(k * k);
            }
    return y;
}

inline Tensor naive_matvec(const Tensor& x, const Tensor& w, const Tensor& b) {
    std::size_t dout = w.shape[0], din = w.shape[1];
    Tensor y = Tensor::zeros({dout});
    for (std::size_t o = 0; o < dout; ++o) {
        double s = b.data[o];
        for (std::size_t i = 0; i < din; ++i) s += w.data[o * din + i] * x.data[i];
        y.data[o] = s;
    }
    return y;
}

inline double rel_err(double a, double b) {
    double denom = std::max({std::abs(a), std::abs(b), 1e-3});
    return std::abs(a - b) / denom;
}

// FD check of a scalar-valued tape program against its recorded gradients;
// rebuilds the program for every probe so inputs stay the single source
struct FdProbe {
    std::vector<Tensor> inputs;
    std::function<Var(Tape&, const std::vector<Var>&)> build;
    double h = 1e-4;

    double max_rel_err() {
        Tape tape;
        std::vector<Var> leaves;
        for (auto& t : inputs) leaves.push_back(tape.leaf(t));
        Var root = build(tape, leaves);
        tape.backward(root);
        std::vector<Tensor> grads;
        for (auto v : leaves) grads.push_back(tape.grad(v));

        auto eval = [&]() {
            Tape t2;
            std::vector<Var> l2;
            for (auto& t : inputs) l2.push_back(t2.leaf(t));
            return t2.value(build(t2, l2)).data[0];
        };
        double worst = 0.0;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            for (std::size_t j = 0; j < inputs[i].size(); ++j) {
                double orig = inputs[i].data[j];
                inputs[i].data[j] = orig + h;
                double lp = eval();
                inputs[i].data[j] = orig - h;
                double lm = eval();
                inputs[i].data[j] = orig;
                double fd = (lp - lm) / (2.0 * h);
                worst = std::max(worst, rel_err(fd, grads[i].data[j]));
            }
        }
        return worst;
    }
};

inline ModelConfig small_config(uint32_t channels = 4, uint32_t T = 2,
                                uint32_t image = 8, uint32_t eta = 1) {
    ModelConfig cfg;
    cfg.channels = channels;
    cfg.time_steps = T;
    cfg.image_size = image;
    cfg.input_channels = 1;
    cfg.eta = eta;
    return cfg;
}

inline std::vector<Tensor> random_frames(const ModelConfig& cfg, std::size_t batch,
                                         std::mt19937_64& rng, bool binary = true) {
    std::vector<Tensor> out;
    for (std::size_t b = 0; b < batch; ++b) {
        std::vector<std::size_t> shape{cfg.time_steps, cfg.input_channels,
                                       cfg.image_size, cfg.image_size};
        out.push_back(binary ? random_binary(shape, rng)
                             : random_tensor(shape, rng, 0.0, 1.0));
    }
    return out;
}

inline std::vector<const Tensor*> frame_ptrs(const std::vector<Tensor>& frames) {
    std::vector<const Tensor*> out;
    for (auto& f : frames) out.push_back(&f);
    return out;
}

// conv kernel passing only the matched channel's center pixel, scaled by w
inline void set_center_only(Model& model, const std::string& prefix, double w) {
    Tensor& k = model.params.at(prefix + ".conv.weight");
    std::fill(k.data.begin(), k.data.end(), 0.0);
    std::size_t cout = k.shape[0], cin = k.shape[1], kh = k.shape[2], kw = k.shape[3];
    for (std::size_t c = 0; c < std::min(cout, cin); ++c)
        k.data[((c * cin + c) * kh + kh / 2) * kw + kw / 2] = w;
}

inline void zero_bn_affine(Model& model, const std::string& prefix) {
    Tensor& g = model.params.at(prefix + ".bn.gamma");
    Tensor& b = model.params.at(prefix + ".bn.beta");
    std::fill(g.data.begin(), g.data.end(), 0.0);
    std::fill(b.data.begin(), b.data.end(), 0.0);
}

// identity configuration: triplet1 relays spikes unchanged (eval-mode BN with
// unit running stats), triplet2 silenced per the zero-affine trick
inline void configure_identity_node(Model& model, uint32_t node, double center_w) {
    std::string n = "node" + std::to_string(node);
    set_center_only(model, n + ".t1", center_w);
    zero_bn_affine(model, n + ".t2");
}

inline std::string temp_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    auto dir = std::filesystem::temp_directory_path() /
               ("cognisnn_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace testsupport
