#include "noisemod/error.hpp"
#include "noisemod/noise.hpp"
#include "noisemod/rng.hpp"
#include "noisemod/tensor.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace noisemod;

namespace {

Tensor random_tensor(const std::vector<std::size_t>& shape, RngStream& rng, double lo = -1.0,
                     double hi = 1.0) {
    Tensor t(shape);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

} // namespace

TEST_CASE("elementwise basics") {
    const Tensor a = Tensor::from({3}, {1, 2, 3});
    const Tensor b = Tensor::from({3}, {2, 2, 2});
    CHECK(mul(a, b).data == std::vector<double>{2, 4, 6});

    const Tensor s = sign(Tensor::from({3}, {-0.5, 0.0, 3.0}));
    CHECK(s.data == std::vector<double>{-1, 0, 1});

    const Tensor x = Tensor::from({2, 2}, {0.5, -1.5, 2.0, 0.0});
    CHECK(add(x, 0.0).data == x.data);
}

TEST_CASE("elementwise errors") {
    const Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    const Tensor b = Tensor::from({4}, {1, 2, 3, 4});
    CHECK_THROWS_WITH_AS(mul(a, b), "mul: shape mismatch [2,3] vs [4]", ShapeError);

    const Tensor num = Tensor::from({2}, {1.0, 1.0});
    const Tensor z = Tensor::from({2}, {1.0, 0.0});
    CHECK_THROWS_AS(div(num, z), NumericError);
}

TEST_CASE("mul commutes") {
    RngStream rng(7);
    for (int i = 0; i < 20; ++i) {
        const Tensor a = random_tensor({4, 5}, rng);
        const Tensor b = random_tensor({4, 5}, rng);
        CHECK(mul(a, b).data == mul(b, a).data);
    }
}

TEST_CASE("matmul hand cases") {
    const Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    const Tensor b = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(matmul(eye, b).data == b.data);

    const Tensor r = matmul(Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 1}, {3, 4}));
    CHECK(r.shape == std::vector<std::size_t>{1, 1});
    CHECK(r.data[0] == doctest::Approx(11.0).epsilon(1e-15));

    CHECK_THROWS_AS(matmul(b, b), ShapeError);
}

TEST_CASE("matmul matches the naive triple-loop oracle") {
    RngStream rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 1 + static_cast<std::size_t>(rng.uniform() * 6);
        const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform() * 6);
        const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 6);
        const Tensor a = random_tensor({m, k}, rng);
        const Tensor b = random_tensor({k, n}, rng);
        const Tensor got = matmul(a, b);
        const Tensor want = oracle::naive_matmul(a, b);
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(oracle::close(got.data[i], want.data[i]));
    }
}

TEST_CASE("conv2d hand cases") {
    RngStream rng(3);
    const Tensor x = random_tensor({1, 4, 4}, rng);

    const Tensor identity = Tensor::from({1, 1, 1, 1}, {1.0});
    CHECK(conv2d(x, identity, 1, 0).data == x.data);

    const Tensor ones_in({1, 3, 3}, 1.0);
    const Tensor ones_k({1, 1, 3, 3}, 1.0);
    const Tensor out = conv2d(ones_in, ones_k, 1, 0);
    CHECK(out.shape == std::vector<std::size_t>{1, 1, 1});
    CHECK(out.data[0] == doctest::Approx(9.0));

    CHECK_THROWS_AS(conv2d(ones_in, Tensor({1, 1, 5, 5}, 1.0), 1, 0), ShapeError);
}

TEST_CASE("conv2d matches the naive loop oracle") {
    RngStream rng(13);
    // The fixed case named in the contract, then random shapes, strides
    // and paddings.
    {
        const Tensor x = random_tensor({2, 8, 8}, rng);
        const Tensor k = random_tensor({3, 2, 3, 3}, rng);
        const Tensor got = conv2d(x, k, 1, 0);
        const Tensor want = oracle::naive_conv2d(x, k, 1, 0);
        REQUIRE(got.shape == want.shape);
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(oracle::close(got.data[i], want.data[i]));
    }
    // Kernel larger than the unpadded input: some taps miss the input
    // entirely and must contribute nothing.
    {
        const Tensor x = random_tensor({1, 1, 1}, rng);
        const Tensor k = random_tensor({1, 1, 3, 3}, rng);
        const Tensor got = conv2d(x, k, 2, 1);
        const Tensor want = oracle::naive_conv2d(x, k, 2, 1);
        REQUIRE(got.shape == want.shape);
        CHECK(oracle::close(got.data[0], want.data[0]));
    }
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t ci = 1 + static_cast<std::size_t>(rng.uniform() * 3);
        const std::size_t co = 1 + static_cast<std::size_t>(rng.uniform() * 3);
        const std::size_t ksz = 1 + 2 * static_cast<std::size_t>(rng.uniform() * 2); // 1 or 3
        const std::size_t h = ksz + static_cast<std::size_t>(rng.uniform() * 6);
        const std::size_t w = ksz + static_cast<std::size_t>(rng.uniform() * 6);
        const std::size_t stride = 1 + static_cast<std::size_t>(rng.uniform() * 2);
        const std::size_t pad = static_cast<std::size_t>(rng.uniform() * 2);
        const Tensor x = random_tensor({ci, h, w}, rng);
        const Tensor k = random_tensor({co, ci, ksz, ksz}, rng);
        const Tensor got = conv2d(x, k, stride, pad);
        const Tensor want = oracle::naive_conv2d(x, k, stride, pad);
        REQUIRE(got.shape == want.shape);
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(oracle::close(got.data[i], want.data[i]));
    }
}

TEST_CASE("reductions") {
    CHECK(sum(Tensor::from({3}, {1, 2, 3})) == doctest::Approx(6.0));
    CHECK(mean(Tensor({4, 5}, 2.5)) == doctest::Approx(2.5));
    CHECK(argmax(Tensor::from({3}, {0.1, 0.9, 0.9})) == 1); // lowest-index tie-break

    const Tensor m = Tensor::from({2, 3}, {1, 5, 3, 4, 2, 6});
    const Tensor rows = reduce(ReduceOp::Sum, m, {1});
    CHECK(rows.shape == std::vector<std::size_t>{2});
    CHECK(rows.data == std::vector<double>{9, 12});
    const Tensor cols_max = reduce(ReduceOp::Max, m, {0});
    CHECK(cols_max.data == std::vector<double>{4, 5, 6});
    const Tensor am = reduce(ReduceOp::Argmax, m, {1});
    CHECK(am.data == std::vector<double>{1, 2});
    const Tensor total = reduce(ReduceOp::Mean, m, {0, 1});
    CHECK(total.is_scalar());
    CHECK(total.data[0] == doctest::Approx(3.5));

    CHECK_THROWS_AS(reduce(ReduceOp::Sum, m, {2}), ShapeError);
    Tensor moved = Tensor::from({2}, {1, 2});
    const Tensor sink = std::move(moved);
    CHECK_THROWS_AS(sum(moved), ShapeError); // moved-from == empty
    CHECK_THROWS_AS(Tensor({0, 3}), ShapeError);
}

TEST_CASE("sampling: determinism and support") {
    const auto gauss = NoiseDistribution::standard(NoiseKind::Gaussian);

    RngStream a(42), b(42);
    const Tensor s1 = sample(gauss, {17, 3}, a);
    const Tensor s2 = sample(gauss, {17, 3}, b);
    CHECK(s1.data == s2.data); // bitwise

    RngStream rng(0);
    const Tensor u = sample(NoiseDistribution::standard(NoiseKind::Uniform), {10000}, rng);
    for (double v : u.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    for (NoiseKind kind : {NoiseKind::Rayleigh, NoiseKind::Exponential, NoiseKind::Gamma}) {
        const Tensor s = sample(NoiseDistribution::standard(kind), {5000}, rng);
        for (double v : s.data) CHECK(v >= 0.0);
        CHECK(s.all_finite());
    }
    const Tensor lap = sample(NoiseDistribution::standard(NoiseKind::Laplace), {5000}, rng);
    CHECK(lap.all_finite());
}

TEST_CASE("sampling: gamma(shape=1) is the exponential") {
    RngStream a(5), b(5);
    const Tensor g = sample(NoiseDistribution::standard(NoiseKind::Gamma), {1000}, a);
    const Tensor e = sample(NoiseDistribution::standard(NoiseKind::Exponential), {1000}, b);
    CHECK(g.data == e.data);
}

TEST_CASE("sampling: law of large numbers for the standard Gaussian") {
    RngStream rng(123);
    const std::size_t n = 1000000;
    const Tensor s = sample(NoiseDistribution::standard(NoiseKind::Gaussian), {n}, rng);
    double m = 0.0;
    for (double v : s.data) m += v;
    m /= static_cast<double>(n);
    double var = 0.0;
    for (double v : s.data) var += (v - m) * (v - m);
    var /= static_cast<double>(n);
    CHECK(std::fabs(m) < 0.01);
    CHECK(std::fabs(var - 1.0) < 0.02);
}

TEST_CASE("sampling: invalid parameters are rejected") {
    CHECK_THROWS_AS(NoiseDistribution::make(NoiseKind::Exponential, 0.0, 0.0), ConfigError);
    CHECK_THROWS_AS(NoiseDistribution::make(NoiseKind::Gaussian, 0.0, -1.0), ConfigError);
}

TEST_CASE("rng: derived streams differ, equal seeds agree") {
    RngStream root(9);
    RngStream c1 = root.derive({1, 7});
    RngStream c2 = root.derive({1, 8});
    RngStream c3 = RngStream(9).derive({1, 7});
    CHECK(c1.next_u64() != c2.next_u64());
    RngStream c1b = root.derive({1, 7});
    CHECK(c1b.next_u64() == c3.next_u64());
    for (int i = 0; i < 1000; ++i) {
        const double u = c1.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double o = c2.uniform_open();
        CHECK(o > 0.0);
        CHECK(o < 1.0);
    }
}
