#include "noisemod/modulation.hpp"

#include "noisemod/error.hpp"

namespace noisemod {

namespace {
constexpr double kDegenerateC0 = 1e-12;
constexpr int kMaxResamples = 16;
} // namespace

Carrier carrier_from_noise(double beta, Tensor delta) {
    if (!(beta >= 0.0 && beta <= 1.0))
        throw ConfigError("carrier: beta must lie in [0,1], got " + std::to_string(beta));

    Carrier carrier;
    carrier.beta = beta;
    carrier.c = Tensor(delta.shape);
    const double w = 1.0 - beta;
    for (std::size_t i = 0; i < carrier.c.size(); ++i)
        carrier.c.data[i] = beta + w * delta.data[i];
    carrier.delta = std::move(delta);

    double c0 = 0.0;
    for (double v : carrier.c.data) c0 += v * v;
    if (c0 < kDegenerateC0)
        throw NumericError("carrier: degenerate (C0 < 1e-12)");

    carrier.C0 = c0;
    carrier.lambda = c0 / static_cast<double>(carrier.c.size());
    carrier.residual = Tensor(carrier.c.shape);
    for (std::size_t i = 0; i < carrier.c.size(); ++i) {
        const double ci = carrier.c.data[i];
        carrier.residual.data[i] = ci * ci - carrier.lambda;
    }
    return carrier;
}

Carrier make_carrier(double beta, const NoiseDistribution& dist,
                     const std::vector<std::size_t>& shape, RngStream& rng) {
    if (!(beta >= 0.0 && beta <= 1.0))
        throw ConfigError("make_carrier: beta must lie in [0,1], got " + std::to_string(beta));

    for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
        try {
            return carrier_from_noise(beta, sample(dist, shape, rng));
        } catch (const NumericError&) {
            continue; // carrier must be nonzero; resample
        }
    }
    throw NumericError("make_carrier: degenerate carrier (C0 < 1e-12) after " +
                       std::to_string(kMaxResamples) + " resamples");
}

ModulationStages modulate_stages(const Tensor& x, const Carrier& carrier) {
    if (!x.same_shape(carrier.c))
        throw ShapeError("modulate: input " + x.shape_str() + " vs carrier " +
                         carrier.c.shape_str());
    ModulationStages stages;
    stages.modulated = mul(x, carrier.c);
    stages.demodulated = mul(stages.modulated, carrier.c);
    stages.rescaled = scale(stages.demodulated,
                            static_cast<double>(carrier.n()) / carrier.C0);
    return stages;
}

Tensor modulate(const Tensor& x, const Carrier& carrier) {
    return modulate_stages(x, carrier).rescaled;
}

ConstantComponent constant_component(const Tensor& c_squared) {
    if (c_squared.data.empty()) throw ShapeError("constant_component: empty tensor");
    double c0 = 0.0;
    for (double v : c_squared.data) c0 += v;
    return {c0, c0 / static_cast<double>(c_squared.size())};
}

Tensor multiplicative_approx(const Tensor& x, double alpha, const Tensor& noise) {
    if (alpha < 0.0)
        throw ConfigError("multiplicative_approx: alpha must be nonnegative");
    if (!x.same_shape(noise))
        throw ShapeError("multiplicative_approx: input " + x.shape_str() + " vs noise " +
                         noise.shape_str());
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i)
        out.data[i] = x.data[i] * (1.0 + alpha * noise.data[i]);
    return out;
}

Tensor multiplicative_approx(const Tensor& x, double alpha, const NoiseDistribution& dist,
                             RngStream& rng) {
    return multiplicative_approx(x, alpha, sample(dist, x.shape, rng));
}

} // namespace noisemod
