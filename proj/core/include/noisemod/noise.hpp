#pragma once

#include "noisemod/rng.hpp"
#include "noisemod/tensor.hpp"

#include <string>

namespace noisemod {

enum class NoiseKind { Gaussian, Uniform, Laplace, Gamma, Exponential, Rayleigh };

/// Noise distribution with fixed parameters: Gaussian(0,1), Uniform[0,1],
/// Laplace(0,1), Gamma(shape=1, scale=1), Exponential(scale=1),
/// Rayleigh(scale=1). Parameters are immutable after construction.
class NoiseDistribution {
public:
    static NoiseDistribution standard(NoiseKind kind);
    /// Explicit parameters; rejects nonpositive scales.
    static NoiseDistribution make(NoiseKind kind, double location, double scale);

    NoiseKind kind() const { return kind_; }
    double location() const { return location_; }
    double scale() const { return scale_; }

    /// One variate. Closed-form transforms only: Box-Muller for Gaussian,
    /// inverse CDF for Laplace/Exponential/Rayleigh; Gamma with shape=1 is
    /// the Exponential.
    double draw(RngStream& rng) const;

private:
    NoiseDistribution(NoiseKind kind, double location, double scale);

    NoiseKind kind_;
    double location_;
    double scale_;
};

/// i.i.d. samples of the given shape; deterministic given the stream state.
Tensor sample(const NoiseDistribution& dist, const std::vector<std::size_t>& shape,
              RngStream& rng);

NoiseKind parse_noise_kind(const std::string& name);
std::string to_string(NoiseKind kind);

} // namespace noisemod
