#include "noisemod/noise.hpp"

#include "noisemod/error.hpp"

#include <cmath>
#include <numbers>

namespace noisemod {

NoiseDistribution::NoiseDistribution(NoiseKind kind, double location, double scale)
    : kind_(kind), location_(location), scale_(scale) {
    if (scale <= 0.0)
        throw ConfigError("NoiseDistribution: scale must be positive, got " +
                          std::to_string(scale));
}

NoiseDistribution NoiseDistribution::make(NoiseKind kind, double location, double scale) {
    return {kind, location, scale};
}

NoiseDistribution NoiseDistribution::standard(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::Gaussian: return {kind, 0.0, 1.0};
        case NoiseKind::Uniform: return {kind, 0.0, 1.0}; // support [0,1]
        case NoiseKind::Laplace: return {kind, 0.0, 1.0};
        case NoiseKind::Gamma: return {kind, 0.0, 1.0}; // shape 1, scale 1
        case NoiseKind::Exponential: return {kind, 0.0, 1.0};
        case NoiseKind::Rayleigh: return {kind, 0.0, 1.0};
    }
    throw ConfigError("NoiseDistribution: unknown kind");
}

double NoiseDistribution::draw(RngStream& rng) const {
    switch (kind_) {
        case NoiseKind::Gaussian: {
            const double u1 = rng.uniform_open();
            const double u2 = rng.uniform();
            return location_ +
                   scale_ * std::sqrt(-2.0 * std::log(u1)) *
                       std::cos(2.0 * std::numbers::pi * u2);
        }
        case NoiseKind::Uniform: return rng.uniform();
        case NoiseKind::Laplace: {
            const double t = rng.uniform_open() - 0.5; // (-0.5, 0.5)
            const double s = t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0);
            return location_ - scale_ * s * std::log(1.0 - 2.0 * std::fabs(t));
        }
        case NoiseKind::Gamma: // shape=1 reduces to Exponential(scale)
        case NoiseKind::Exponential: return -scale_ * std::log(1.0 - rng.uniform());
        case NoiseKind::Rayleigh:
            return scale_ * std::sqrt(-2.0 * std::log(1.0 - rng.uniform()));
    }
    throw ConfigError("NoiseDistribution: unknown kind");
}

Tensor sample(const NoiseDistribution& dist, const std::vector<std::size_t>& shape,
              RngStream& rng) {
    Tensor out(shape);
    for (double& v : out.data) v = dist.draw(rng);
    return out;
}

NoiseKind parse_noise_kind(const std::string& name) {
    if (name == "gaussian") return NoiseKind::Gaussian;
    if (name == "uniform") return NoiseKind::Uniform;
    if (name == "laplace") return NoiseKind::Laplace;
    if (name == "gamma") return NoiseKind::Gamma;
    if (name == "exponential") return NoiseKind::Exponential;
    if (name == "rayleigh") return NoiseKind::Rayleigh;
    throw ConfigError("unknown noise kind: " + name);
}

std::string to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::Gaussian: return "gaussian";
        case NoiseKind::Uniform: return "uniform";
        case NoiseKind::Laplace: return "laplace";
        case NoiseKind::Gamma: return "gamma";
        case NoiseKind::Exponential: return "exponential";
        case NoiseKind::Rayleigh: return "rayleigh";
    }
    return "?";
}

} // namespace noisemod
