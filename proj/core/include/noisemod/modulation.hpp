#pragma once

#include "noisemod/noise.hpp"
#include "noisemod/rng.hpp"
#include "noisemod/tensor.hpp"

namespace noisemod {

/// Sampled noise carrier c = beta + (1-beta)*delta together with its
/// derived quantities: constant component C0 = sum(c_n^2) of the squared
/// carrier, its per-element share lambda = C0/N, and the zero-mean
/// residual of the squared carrier. beta = 1 gives the all-ones carrier
/// and the training transform becomes the identity.
struct Carrier {
    double beta = 1.0;
    Tensor delta;    // raw noise
    Tensor c;        // beta + (1-beta)*delta
    double C0 = 0.0; // sum of c^2, always positive
    double lambda = 0.0;
    Tensor residual; // c^2 - lambda, sums to zero

    std::size_t n() const { return c.size(); }
};

/// Assemble a carrier from explicit noise; throws NumericError when the
/// carrier is degenerate (C0 < 1e-12).
Carrier carrier_from_noise(double beta, Tensor delta);

/// Sample a carrier. Degenerate carriers (C0 < 1e-12) are resampled a
/// bounded number of times, then rejected.
Carrier make_carrier(double beta, const NoiseDistribution& dist,
                     const std::vector<std::size_t>& shape, RngStream& rng);

/// The full training transform x * (N * c^2 / C0), computed as the
/// modulate -> demodulate -> rescale pipeline (bitwise identical to
/// modulate_stages().rescaled).
Tensor modulate(const Tensor& x, const Carrier& carrier);

struct ModulationStages {
    Tensor modulated;   // x * c
    Tensor demodulated; // x * c^2
    Tensor rescaled;    // x * c^2 * (N / C0)
};

ModulationStages modulate_stages(const Tensor& x, const Carrier& carrier);

/// Constant DFT component of a squared carrier: C0 = sum of entries,
/// lambda = C0 / N.
struct ConstantComponent {
    double C0;
    double lambda;
};

ConstantComponent constant_component(const Tensor& c_squared);

/// Multiplicative-noise baseline x * (1 + alpha * delta'), delta' ~ dist.
Tensor multiplicative_approx(const Tensor& x, double alpha, const NoiseDistribution& dist,
                             RngStream& rng);
Tensor multiplicative_approx(const Tensor& x, double alpha, const Tensor& noise);

} // namespace noisemod
