#include <doctest.h>

#include <random>

#include "cognisnn/ops.hpp"
#include "support.hpp"

using namespace cognisnn;
using namespace testsupport;

TEST_CASE("tensor shape/data agreement is enforced") {
    CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), DimensionError);
    Tensor t = Tensor::zeros({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.all_finite());
}

TEST_CASE("conv2d: all-ones 3x3 window sums to 9") {
    Tensor x = Tensor::full({1, 3, 3}, 1.0);
    Tensor k = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor y = conv2d(x, k, 1, 0);
    REQUIRE(y.shape == std::vector<std::size_t>{1, 1, 1});
    CHECK(y.data[0] == doctest::Approx(9.0).epsilon(1e-15));
}

TEST_CASE("conv2d: 1x1 unit kernel is the identity") {
    std::mt19937_64 rng(7);
    Tensor x = random_tensor({1, 4, 5}, rng);
    Tensor k({1, 1, 1, 1}, {1.0});
    Tensor y = conv2d(x, k, 1, 0);
    CHECK(y.data == x.data);
}

TEST_CASE("conv2d: kernel channel mismatch raises a dimension error") {
    Tensor x = Tensor::zeros({2, 4, 4});
    Tensor k = Tensor::zeros({3, 5, 3, 3});
    CHECK_THROWS_AS(conv2d(x, k, 1, 1), DimensionError);
}

TEST_CASE("conv2d matches the six-loop oracle") {
    std::mt19937_64 rng(42);
    Tensor x = random_tensor({2, 5, 5}, rng);
    Tensor k = random_tensor({3, 2, 3, 3}, rng);
    Tensor got = conv2d(x, k, 1, 0);
    Tensor want = naive_conv2d(x, k, 1, 0);
    REQUIRE(got.shape == want.shape);
    for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
}

TEST_CASE("conv2d oracle agreement across 100 random shapes") {
    std::mt19937_64 rng(123);
    int done = 0;
    while (done < 100) {
        std::size_t cin = 1 + rng() % 3, cout = 1 + rng() % 3;
        std::size_t h = 3 + rng() % 6, w = 3 + rng() % 6;
        std::size_t k = 1 + 2 * (rng() % 2);  // 1 or 3
        std::size_t stride = 1 + rng() % 2;
        std::size_t pad = rng() % 2;
        if (h + 2 * pad < k || w + 2 * pad < k) continue;
        std::size_t g = 1 + rng() % 2;
        Tensor x = random_tensor({g, cin, h, w}, rng);
        Tensor ker = random_tensor({cout, cin, k, k}, rng);
        Tensor got = conv2d(x, ker, stride, pad);
        Tensor want = naive_conv2d(x, ker, stride, pad);
        REQUIRE(got.shape == want.shape);
        for (std::size_t i = 0; i < got.size(); ++i)
            REQUIRE(std::abs(got.data[i] - want.data[i]) <=
                    1e-12 * std::max(1.0, std::abs(want.data[i])));
        ++done;
    }
}

TEST_CASE("batch_norm: zero affine parameters silence the output") {
    std::mt19937_64 rng(5);
    Tensor x = random_tensor({4, 3, 2, 2}, rng, -5.0, 5.0);
    BnStats st = batch_norm_stats(x);
    Tensor y = batch_norm_apply(x, st.mean, st.var, Tensor::zeros({3}),
                                Tensor::zeros({3}), 1e-5);
    for (double v : y.data) CHECK(v == 0.0);
}

TEST_CASE("batch_norm: normalized input is a fixed point as eps -> 0") {
    // per-channel batch with exact zero mean and unit biased variance
    Tensor x = Tensor::zeros({4, 2});
    for (std::size_t c = 0; c < 2; ++c) {
        x.data[0 * 2 + c] = 1.0;
        x.data[1 * 2 + c] = -1.0;
        x.data[2 * 2 + c] = 1.0;
        x.data[3 * 2 + c] = -1.0;
    }
    BnStats st = batch_norm_stats(x);
    Tensor y = batch_norm_apply(x, st.mean, st.var, Tensor::full({2}, 1.0),
                                Tensor::zeros({2}), 1e-12);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(y.data[i] == doctest::Approx(x.data[i]).epsilon(1e-6));
}

TEST_CASE("batch_norm: train-mode output statistics match gamma/beta") {
    std::mt19937_64 rng(11);
    Tensor x = random_tensor({16, 3, 4, 4}, rng, -2.0, 3.0);
    Tensor gamma({3}, {0.5, 1.5, 2.0});
    Tensor beta({3}, {-1.0, 0.25, 2.0});
    BnStats st = batch_norm_stats(x);
    Tensor y = batch_norm_apply(x, st.mean, st.var, gamma, beta, 1e-9);
    BnStats out = batch_norm_stats(y);
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(out.mean.data[c] == doctest::Approx(beta.data[c]).epsilon(1e-5));
        CHECK(out.var.data[c] ==
              doctest::Approx(gamma.data[c] * gamma.data[c]).epsilon(1e-5));
    }
}

TEST_CASE("batch_norm: zero-size batch in train mode is invalid") {
    Tensor x = Tensor::zeros({0, 3});
    CHECK_THROWS_AS(batch_norm_stats(x), InvalidArgument);
}

TEST_CASE("avg_pool: kernel 1 is the identity") {
    std::mt19937_64 rng(3);
    Tensor x = random_tensor({2, 4, 4}, rng);
    Tensor y = avg_pool(x, 1);
    CHECK(y.data == x.data);
}

TEST_CASE("avg_pool: 2x2 window mean") {
    Tensor x({1, 2, 2}, {0.0, 1.0, 1.0, 1.0});
    Tensor y = avg_pool(x, 2);
    REQUIRE(y.shape == std::vector<std::size_t>{1, 1, 1});
    CHECK(y.data[0] == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("avg_pool: non-divisible extent raises a dimension error") {
    Tensor x = Tensor::zeros({1, 5, 5});
    CHECK_THROWS_AS(avg_pool(x, 2), DimensionError);
}

TEST_CASE("avg_pool matches the windowed-mean oracle") {
    std::mt19937_64 rng(99);
    Tensor x = random_tensor({4, 8, 8}, rng);
    Tensor got = avg_pool(x, 2);
    Tensor want = naive_avg_pool(x, 2);
    for (std::size_t i = 0; i < got.size(); ++i)
        REQUIRE(std::abs(got.data[i] - want.data[i]) <= 1e-12);
    for (int it = 0; it < 100; ++it) {
        std::size_t k = 1 + rng() % 3;
        std::size_t hw = k * (1 + rng() % 4);
        Tensor a = random_tensor({1 + rng() % 3, hw, hw}, rng);
        Tensor g2 = avg_pool(a, k);
        Tensor w2 = naive_avg_pool(a, k);
        for (std::size_t i = 0; i < g2.size(); ++i)
            REQUIRE(std::abs(g2.data[i] - w2.data[i]) <= 1e-12);
    }
}

TEST_CASE("linear: identity weight returns the input") {
    Tensor x({3}, {1.0, -2.0, 0.5});
    Tensor w = Tensor::zeros({3, 3});
    for (int i = 0; i < 3; ++i) w.data[i * 3 + i] = 1.0;
    Tensor y = linear(x, w, Tensor::zeros({3}));
    CHECK(y.data == x.data);
}

TEST_CASE("linear: zero weight returns the bias") {
    Tensor x({4}, {1.0, 2.0, 3.0, 4.0});
    Tensor b({2}, {5.0, -7.0});
    Tensor y = linear(x, Tensor::zeros({2, 4}), b);
    CHECK(y.data == b.data);
}

TEST_CASE("linear matches the dot-product oracle") {
    std::mt19937_64 rng(17);
    for (int it = 0; it < 100; ++it) {
        std::size_t din = 1 + rng() % 6, dout = 1 + rng() % 6;
        Tensor x = random_tensor({din}, rng);
        Tensor w = random_tensor({dout, din}, rng);
        Tensor b = random_tensor({dout}, rng);
        Tensor got = linear(x, w, b);
        Tensor want = naive_matvec(x, w, b);
        for (std::size_t i = 0; i < got.size(); ++i)
            REQUIRE(std::abs(got.data[i] - want.data[i]) <= 1e-12);
    }
    Tensor x = Tensor::zeros({3});
    CHECK_THROWS_AS(linear(x, Tensor::zeros({2, 4}), Tensor::zeros({2})),
                    DimensionError);
}
