#include "noisemod/autodiff.hpp"
#include "noisemod/error.hpp"
#include "noisemod/rng.hpp"

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

// Plain-loop two-hidden-layer MLP forward, no tape anywhere.
double reference_mlp_loss(const Tensor& w1, const Tensor& b1, const Tensor& w2,
                          const Tensor& b2, const Tensor& w3, const Tensor& b3,
                          const Tensor& x, int label) {
    auto layer = [](const Tensor& w, const Tensor& b, const std::vector<double>& in,
                    bool relu) {
        const std::size_t m = w.shape[0], k = w.shape[1];
        std::vector<double> out(m);
        for (std::size_t i = 0; i < m; ++i) {
            double acc = b.data[i];
            for (std::size_t j = 0; j < k; ++j) acc += w.data[i * k + j] * in[j];
            out[i] = relu && acc < 0.0 ? 0.0 : acc;
        }
        return out;
    };
    std::vector<double> h = layer(w1, b1, x.data, true);
    h = layer(w2, b2, h, true);
    h = layer(w3, b3, h, false);
    double mx = h[0];
    for (double v : h) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : h) z += std::exp(v - mx);
    return std::log(z) + mx - h[static_cast<std::size_t>(label)];
}

struct MlpParams {
    Tensor w1, b1, w2, b2, w3, b3;
};

MlpParams random_mlp(RngStream& rng, std::size_t in, std::size_t hidden, std::size_t out) {
    return {random_tensor({hidden, in}, rng),  random_tensor({hidden}, rng),
            random_tensor({hidden, hidden}, rng), random_tensor({hidden}, rng),
            random_tensor({out, hidden}, rng), random_tensor({out}, rng)};
}

Tape::NodeId mlp_loss_graph(Tape& tape, const MlpParams& p, Tape::NodeId x, int label) {
    auto leaf = [&](const Tensor& t, const char* id) { return tape.leaf(t, id, true); };
    Tape::NodeId h = tape.relu(tape.dense(leaf(p.w1, "w1"), x, leaf(p.b1, "b1")));
    h = tape.relu(tape.dense(leaf(p.w2, "w2"), h, leaf(p.b2, "b2")));
    h = tape.dense(leaf(p.w3, "w3"), h, leaf(p.b3, "b3"));
    return tape.softmax_cross_entropy(h, label);
}

} // namespace

TEST_CASE("forward values") {
    Tape tape;
    const Tape::NodeId x = tape.input_leaf(Tensor::from({3}, {1, 2, 3}));
    const Tape::NodeId s = tape.sum_all(x);
    CHECK(tape.value(s).data[0] == doctest::Approx(6.0));

    Tape tape2;
    const Tape::NodeId y = tape2.input_leaf(Tensor::from({2}, {1, 2}));
    const Tape::NodeId s2 = tape2.sum_all(tape2.mul(y, y));
    CHECK(tape2.value(s2).data[0] == doctest::Approx(5.0));
}

TEST_CASE("forward matches a duplicate non-tape implementation") {
    RngStream rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const MlpParams p = random_mlp(rng, 6, 8, 4);
        const Tensor x = random_tensor({6}, rng);
        const int label = static_cast<int>(rng.uniform() * 4);

        Tape tape;
        const Tape::NodeId loss = mlp_loss_graph(tape, p, tape.input_leaf(x), label);
        const double want = reference_mlp_loss(p.w1, p.b1, p.w2, p.b2, p.w3, p.b3, x, label);
        CHECK(oracle::close(tape.value(loss).data[0], want));
    }
}

TEST_CASE("backward basics") {
    Tape tape;
    const Tape::NodeId x = tape.input_leaf(Tensor::from({3}, {5, -2, 0.5}));
    const Tape::NodeId loss = tape.sum_all(x);
    GradientBundle g = tape.backward(loss);
    REQUIRE(g.input.has_value());
    CHECK(g.input->data == std::vector<double>{1, 1, 1});

    Tape tape2;
    const Tape::NodeId y = tape2.input_leaf(Tensor::from({2}, {1, 2}));
    const Tape::NodeId loss2 = tape2.sum_all(tape2.mul(y, y));
    GradientBundle g2 = tape2.backward(loss2);
    CHECK(g2.input->data == std::vector<double>{2, 4});
}

TEST_CASE("backward errors") {
    Tape tape;
    const Tape::NodeId x = tape.input_leaf(Tensor::from({2}, {1, 2}));
    CHECK_THROWS_AS(tape.backward(x), Error); // non-scalar loss
    CHECK_THROWS_AS(tape.grad(x), Error);     // before a successful backward

    Tape empty;
    CHECK_THROWS_AS(empty.backward(0), Error);
}

TEST_CASE("mlp input-gradients match finite differences on 100 inputs") {
    RngStream rng(31);
    const MlpParams p = random_mlp(rng, 6, 8, 4);
    for (int trial = 0; trial < 100; ++trial) {
        const Tensor x = random_tensor({6}, rng);
        const int label = static_cast<int>(rng.uniform() * 4);

        Tape tape;
        const Tape::NodeId xin = tape.input_leaf(x);
        const Tape::NodeId loss = mlp_loss_graph(tape, p, xin, label);
        GradientBundle g = tape.backward(loss);

        const Tensor fd = oracle::finite_difference_grad(
            [&](const Tensor& probe) {
                Tape t2;
                return t2.value(mlp_loss_graph(t2, p, t2.input_leaf(probe), label)).data[0];
            },
            x);
        CHECK(oracle::max_grad_error(*g.input, fd) < 1e-6);
    }
}

TEST_CASE("parameter gradients of a conv stack match finite differences") {
    RngStream rng(37);
    const Tensor x = random_tensor({2, 6, 6}, rng);
    const Tensor k1 = random_tensor({3, 2, 3, 3}, rng, -0.5, 0.5);
    const Tensor cb1 = random_tensor({3}, rng, -0.2, 0.2);
    const Tensor k2 = random_tensor({4, 3, 3, 3}, rng, -0.5, 0.5);
    const Tensor cb2 = random_tensor({4}, rng, -0.2, 0.2);
    const Tensor w = random_tensor({3, 4}, rng);
    const Tensor b = random_tensor({3}, rng);
    const int label = 1;

    auto loss_with = [&](const Tensor& k1v, const Tensor& cb1v, const Tensor& k2v,
                         const Tensor& cb2v, const Tensor& wv, const Tensor& bv,
                         const Tensor& xv, Tape& tape) {
        const Tape::NodeId xin = tape.input_leaf(xv);
        Tape::NodeId h = tape.normalize(xin, {0.1, -0.2}, {0.9, 1.1});
        h = tape.relu(tape.conv(tape.leaf(k1v, "k1", true), h, tape.leaf(cb1v, "cb1", true), 1, 1));
        h = tape.avg_pool2(h);
        h = tape.relu(tape.conv(tape.leaf(k2v, "k2", true), h, tape.leaf(cb2v, "cb2", true), 2, 1));
        h = tape.global_avg_pool(h);
        h = tape.dense(tape.leaf(wv, "w", true), h, tape.leaf(bv, "b", true));
        return tape.softmax_cross_entropy(h, label);
    };

    Tape tape;
    GradientBundle g = tape.backward(loss_with(k1, cb1, k2, cb2, w, b, x, tape));

    struct Slot {
        const char* name;
        const Tensor* value;
    };
    const Slot slots[] = {{"k1", &k1}, {"cb1", &cb1}, {"k2", &k2},
                          {"cb2", &cb2}, {"w", &w},   {"b", &b}};
    for (const Slot& slot : slots) {
        const Tensor fd = oracle::finite_difference_grad(
            [&](const Tensor& probe) {
                Tape t2;
                const Tensor& k1v = slot.name == std::string("k1") ? probe : k1;
                const Tensor& cb1v = slot.name == std::string("cb1") ? probe : cb1;
                const Tensor& k2v = slot.name == std::string("k2") ? probe : k2;
                const Tensor& cb2v = slot.name == std::string("cb2") ? probe : cb2;
                const Tensor& wv = slot.name == std::string("w") ? probe : w;
                const Tensor& bv = slot.name == std::string("b") ? probe : b;
                return t2.value(loss_with(k1v, cb1v, k2v, cb2v, wv, bv, x, t2)).data[0];
            },
            *slot.value);
        CHECK(oracle::max_grad_error(g.params.at(slot.name), fd) < 1e-6);
    }

    const Tensor fd_x = oracle::finite_difference_grad(
        [&](const Tensor& probe) {
            Tape t2;
            return t2.value(loss_with(k1, cb1, k2, cb2, w, b, probe, t2)).data[0];
        },
        x);
    CHECK(oracle::max_grad_error(*g.input, fd_x) < 1e-6);
}

TEST_CASE("softmax cross entropy values and gradient") {
    Tape tape;
    const Tape::NodeId logits = tape.input_leaf(Tensor({10}, 1.7));
    const Tape::NodeId loss = tape.softmax_cross_entropy(logits, 3);
    CHECK(tape.value(loss).data[0] == doctest::Approx(std::log(10.0)).epsilon(1e-12));

    Tape stable;
    const Tape::NodeId big = stable.input_leaf(Tensor::from({2}, {1000.0, 0.0}));
    const Tape::NodeId big_loss = stable.softmax_cross_entropy(big, 0);
    CHECK(stable.value(big_loss).data[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::isfinite(stable.value(big_loss).data[0]));

    // gradient = softmax - onehot, against both closed form and fd
    const Tensor l3 = Tensor::from({3}, {1, 2, 3});
    Tape g3;
    const Tape::NodeId lin = g3.input_leaf(l3);
    GradientBundle g = g3.backward(g3.softmax_cross_entropy(lin, 0));
    double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    CHECK(oracle::close((*g.input).data[0], std::exp(1.0) / z - 1.0));
    CHECK(oracle::close((*g.input).data[1], std::exp(2.0) / z));
    CHECK(oracle::close((*g.input).data[2], std::exp(3.0) / z));

    const Tensor fd = oracle::finite_difference_grad(
        [&](const Tensor& probe) {
            Tape t2;
            return t2.value(t2.softmax_cross_entropy(t2.input_leaf(probe), 0)).data[0];
        },
        l3);
    CHECK(oracle::max_grad_error(*g.input, fd) < 1e-6);

    Tape bad;
    const Tape::NodeId lb = bad.input_leaf(l3);
    CHECK_THROWS_AS(bad.softmax_cross_entropy(lb, 3), Error);
    CHECK_THROWS_AS(bad.softmax_cross_entropy(lb, -1), Error);
}

TEST_CASE("gradients are linear in the loss") {
    RngStream rng(41);
    const Tensor x = random_tensor({5}, rng);
    const double a = 2.25, b = -0.75;

    auto grads = [&](double sa, double sb) {
        Tape tape;
        const Tape::NodeId xin = tape.input_leaf(x);
        const Tape::NodeId l1 = tape.sum_all(tape.mul(xin, xin));
        const Tape::NodeId l2 = tape.mean_all(xin);
        const Tape::NodeId loss = tape.add(tape.scale(l1, sa), tape.scale(l2, sb));
        return *tape.backward(loss).input;
    };

    const Tensor combined = grads(a, b);
    const Tensor g1 = grads(1.0, 0.0);
    const Tensor g2 = grads(0.0, 1.0);
    for (std::size_t i = 0; i < combined.size(); ++i)
        CHECK(oracle::close(combined.data[i], a * g1.data[i] + b * g2.data[i]));
}

TEST_CASE("forward+backward is bitwise reproducible") {
    RngStream rng(51);
    const MlpParams p = random_mlp(rng, 6, 8, 4);
    const Tensor x = random_tensor({6}, rng);

    auto run = [&]() {
        Tape tape;
        const Tape::NodeId loss = mlp_loss_graph(tape, p, tape.input_leaf(x), 2);
        GradientBundle g = tape.backward(loss);
        return std::pair(tape.value(loss).data[0], g);
    };
    const auto [loss1, g1] = run();
    const auto [loss2, g2] = run();
    CHECK(loss1 == loss2);
    CHECK(g1.input->data == g2.input->data);
    for (const auto& [name, grad] : g1.params) CHECK(grad.data == g2.params.at(name).data);
}

TEST_CASE("backward pass counter") {
    Tape::reset_backward_pass_count();
    const std::uint64_t before = Tape::backward_pass_count();
    Tape tape;
    const Tape::NodeId x = tape.input_leaf(Tensor::from({2}, {1, 2}));
    tape.backward(tape.sum_all(x));
    Tape tape2;
    const Tape::NodeId y = tape2.input_leaf(Tensor::from({2}, {3, 4}));
    tape2.backward(tape2.sum_all(y));
    CHECK(Tape::backward_pass_count() - before == 2);
}
