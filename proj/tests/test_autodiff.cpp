#include <doctest.h>

#include <random>

#include "cognisnn/neuron.hpp"
#include "cognisnn/ops.hpp"
#include "support.hpp"

using namespace cognisnn;
using namespace testsupport;

TEST_CASE("backward: gradient of a sum is all ones") {
    Tape t;
    Var x = t.leaf(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
    Var s = op_sum_all(t, x);
    t.backward(s);
    Tensor g = t.grad(x);
    for (double v : g.data) CHECK(v == 1.0);
}

TEST_CASE("backward: product rule on scalars") {
    Tape t;
    Var x = t.leaf(Tensor::scalar(2.0));
    Var y = t.leaf(Tensor::scalar(3.0));
    Var p = op_mul(t, x, y);
    t.backward(p);
    CHECK(t.grad(x).data[0] == 3.0);
    CHECK(t.grad(y).data[0] == 2.0);
}

TEST_CASE("backward: root must be scalar; repeat runs are bit-identical") {
    Tape t;
    std::mt19937_64 rng(1);
    Var x = t.leaf(random_tensor({3, 3}, rng));
    Var y = op_mul(t, x, x);
    CHECK_THROWS_AS(t.backward(y), InvalidArgument);
    Var s = op_mean_all(t, y);
    t.backward(s);
    Tensor g1 = t.grad(x);
    t.backward(s);
    Tensor g2 = t.grad(x);
    CHECK(g1.data == g2.data);
}

TEST_CASE("fd: elementwise and reduction ops") {
    std::mt19937_64 rng(2);
    FdProbe probe;
    probe.inputs = {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)};
    probe.build = [](Tape& t, const std::vector<Var>& in) {
        Var a = op_add(t, in[0], in[1]);
        Var b = op_mul(t, a, in[0]);
        Var c = op_sub(t, b, in[1]);
        Var d = op_affine(t, c, 0.7, -0.1);
        Var e = op_lincomb(t, d, in[1], 1.3, -0.4);
        Var f = op_sigmoid(t, e);
        return op_mean_all(t, f);
    };
    CHECK(probe.max_rel_err() < 1e-6);
}

TEST_CASE("fd: conv2d") {
    std::mt19937_64 rng(3);
    FdProbe probe;
    probe.inputs = {random_tensor({1, 2, 4, 4}, rng), random_tensor({3, 2, 3, 3}, rng)};
    probe.build = [](Tape& t, const std::vector<Var>& in) {
        Var y = op_conv2d(t, in[0], in[1], 1, 1);
        Var z = op_sigmoid(t, y);
        return op_mean_all(t, z);
    };
    CHECK(probe.max_rel_err() < 1e-4);
}

TEST_CASE("fd: batch norm train and eval modes") {
    std::mt19937_64 rng(4);
    BnRunning running{Tensor({2}, {0.2, -0.1}), Tensor({2}, {1.4, 0.7}), 0.1};
    FdProbe probe;
    probe.inputs = {random_tensor({5, 2, 2, 2}, rng), random_tensor({2}, rng, 0.5, 1.5),
                    random_tensor({2}, rng)};
    probe.build = [&](Tape& t, const std::vector<Var>& in) {
        Var y = op_batch_norm_train(t, in[0], in[1], in[2], nullptr, 1e-5);
        return op_mean_all(t, op_sigmoid(t, y));
    };
    CHECK(probe.max_rel_err() < 1e-4);
    probe.build = [&](Tape& t, const std::vector<Var>& in) {
        Var y = op_batch_norm_eval(t, in[0], in[1], in[2], running, 1e-5);
        return op_mean_all(t, op_sigmoid(t, y));
    };
    CHECK(probe.max_rel_err() < 1e-4);
}

TEST_CASE("fd: pooling, linear, concat/slice, scale") {
    std::mt19937_64 rng(5);
    FdProbe probe;
    probe.inputs = {random_tensor({1, 2, 4, 4}, rng), random_tensor({1, 2, 4, 4}, rng),
                    Tensor::scalar(0.3)};
    probe.build = [](Tape& t, const std::vector<Var>& in) {
        Var cat = op_concat0(t, {in[0], in[1]});
        Var pooled = op_avg_pool(t, cat, 2);
        Var part = op_slice0(t, pooled, 1, 1);
        Var scaled = op_scale_by(t, op_sigmoid(t, in[2]), part);
        Var gp = op_global_avg_pool(t, scaled);
        return op_sum_all(t, gp);
    };
    CHECK(probe.max_rel_err() < 1e-6);

    FdProbe lin;
    lin.inputs = {random_tensor({3, 4}, rng), random_tensor({2, 4}, rng),
                  random_tensor({2}, rng)};
    lin.build = [](Tape& t, const std::vector<Var>& in) {
        Var y = op_linear(t, in[0], in[1], in[2]);
        return op_mean_all(t, op_sigmoid(t, y));
    };
    CHECK(lin.max_rel_err() < 1e-6);
}

TEST_CASE("fd: softmax cross entropy and distillation") {
    std::mt19937_64 rng(6);
    std::vector<uint32_t> labels{1, 0, 2};
    FdProbe ce;
    ce.inputs = {random_tensor({3, 3}, rng)};
    ce.build = [&](Tape& t, const std::vector<Var>& in) {
        return op_softmax_cross_entropy(t, in[0], labels);
    };
    CHECK(ce.max_rel_err() < 1e-6);

    Tensor teacher = random_tensor({3, 3}, rng);
    FdProbe dist;
    dist.inputs = {random_tensor({3, 3}, rng)};
    dist.build = [&](Tape& t, const std::vector<Var>& in) {
        return op_distill_cross_entropy(t, in[0], teacher, 2.0);
    };
    CHECK(dist.max_rel_err() < 1e-6);
}

TEST_CASE("fd: smooth fire through the surrogate") {
    std::mt19937_64 rng(7);
    NeuronConfig cfg;
    FdProbe probe;
    probe.inputs = {random_tensor({2, 3}, rng, -0.5, 2.0)};
    probe.build = [&](Tape& t, const std::vector<Var>& in) {
        Var s = op_fire(t, in[0], cfg, true);
        return op_mean_all(t, s);
    };
    CHECK(probe.max_rel_err() < 1e-4);
}

TEST_CASE("fd: full ConvBNSN triplet in smooth mode") {
    std::mt19937_64 rng(8);
    NeuronConfig ncfg;
    FdProbe probe;
    probe.inputs = {random_tensor({2, 2, 4, 4}, rng), random_tensor({2, 2, 3, 3}, rng),
                    random_tensor({2}, rng, 0.5, 1.5), random_tensor({2}, rng)};
    probe.build = [&](Tape& t, const std::vector<Var>& in) {
        Var conv = op_conv2d(t, in[0], in[1], 1, 1);
        Var bn = op_batch_norm_train(t, conv, in[2], in[3], nullptr, 1e-5);
        Var zero = t.leaf(Tensor::zeros(t.value(bn).shape));
        Var h = op_charge(t, zero, bn, ncfg);
        Var s = op_fire(t, h, ncfg, true);
        Var v = op_soft_reset(t, h, s, ncfg);
        Var probe_out = op_lincomb(t, s, v, 1.0, 0.25);
        return op_mean_all(t, probe_out);
    };
    CHECK(probe.max_rel_err() < 1e-4);
}

TEST_CASE("fd: 100 random small op chains stay within 1e-4") {
    std::mt19937_64 rng(9);
    NeuronConfig ncfg;
    for (int it = 0; it < 100; ++it) {
        std::size_t c = 1 + rng() % 2;
        std::size_t hw = 2 + 2 * (rng() % 2);
        FdProbe probe;
        probe.inputs = {random_tensor({2, c, hw, hw}, rng),
                        random_tensor({c, c, 3, 3}, rng, -0.6, 0.6),
                        random_tensor({c}, rng, 0.5, 1.5), random_tensor({c}, rng)};
        uint64_t plan = rng();
        probe.build = [&, plan](Tape& t, const std::vector<Var>& in) {
            Var x = in[0];
            if (plan & 1) x = op_conv2d(t, x, in[1], 1, 1);
            if (plan & 2) x = op_batch_norm_train(t, x, in[2], in[3], nullptr, 1e-5);
            if (plan & 4) {
                Var zero = t.leaf(Tensor::zeros(t.value(x).shape));
                Var h = op_charge(t, zero, x, ncfg);
                x = op_fire(t, h, ncfg, true);
            }
            if ((plan & 8) && t.value(x).shape[2] % 2 == 0) x = op_avg_pool(t, x, 2);
            Var other = op_affine(t, x, -0.5, 0.1);
            Var gate = op_sub(t, op_add(t, x, other), op_mul(t, x, other));
            return op_mean_all(t, gate);
        };
        REQUIRE(probe.max_rel_err() < 1e-4);
    }
}
