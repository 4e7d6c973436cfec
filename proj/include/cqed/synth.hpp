#pragma once

// Seeded synthetic data for tests and demos. Uniform variates come from
// std::mt19937_64 (bit-exact across standard libraries) and normal variates
// from the Box-Muller transform written out here, because the output of
// std::normal_distribution is implementation-defined. Generated counts are
// clipped at zero since a counting channel never reports negative values.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "cqed/core.hpp"
#include "cqed/trace.hpp"
#include "cqed/units.hpp"

namespace cqed::synth {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (spare_) {
            const double v = *spare_;
            spare_.reset();
            return v;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double rad = std::sqrt(-2.0 * std::log(u1));
        spare_ = rad * std::sin(units::two_pi * u2);
        return rad * std::cos(units::two_pi * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    std::uint64_t raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> x(n);
    if (n == 1) {
        x[0] = lo;
        return x;
    }
    for (std::size_t i = 0; i < n; ++i) x[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return x;
}

/// Adds N(0, sd) noise to every sample and clips at zero.
inline void add_noise(std::vector<double>& y, double sd, Rng& rng) {
    if (sd <= 0.0) return;
    for (auto& v : y) v = std::max(0.0, v + sd * rng.normal());
}

template <class F>
SampledTrace sample(F&& f, std::vector<double> x, TraceKind kind, const char* unit) {
    SampledTrace tr;
    tr.kind = kind;
    tr.unit = unit;
    tr.y.reserve(x.size());
    for (double xi : x) tr.y.push_back(f(xi));
    tr.x = std::move(x);
    return tr;
}

// ---------------------------------------------------------------------------
// Model curves shared with the fit models
// ---------------------------------------------------------------------------

/// Lorentzian of peak height `amplitude` plus a linear background referenced
/// to `x_ref`.
inline double lorentzian_linear(double x, double center, double fwhm, double amplitude, double slope, double offset,
                                double x_ref) {
    const double h = 0.5 * fwhm;
    const double dx = x - center;
    return amplitude * h * h / (dx * dx + h * h) + slope * (x - x_ref) + offset;
}

/// exp(x^2) erfc(x), accurate for large positive x where the direct product
/// under/overflows.
inline double erfcx(double x) {
    if (x < 20.0) return std::exp(x * x) * std::erfc(x);
    const double inv2 = 1.0 / (x * x);
    // asymptotic series, truncation error below 1e-12 relative for x >= 20
    const double series = 1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2 * inv2 * inv2 +
                          6.5625 * inv2 * inv2 * inv2 * inv2;
    return series / (x * std::sqrt(units::pi));
}

/// Single exponential A exp(-(t - t0)/tau) for t >= t0 (zero before),
/// convolved with a normalised Gaussian of width sigma, plus background.
/// sigma = 0 gives the bare exponential.
inline double exp_decay(double t, double tau, double amplitude, double background, double t0, double sigma) {
    const double dt = t - t0;
    if (sigma <= 0.0) return (dt >= 0.0 ? amplitude * std::exp(-dt / tau) : 0.0) + background;
    const double u = dt / sigma;
    const double z = (sigma / tau - u) / std::sqrt(2.0);
    double shape;
    if (z < 0.0) {
        // exponent sigma^2/(2 tau^2) - dt/tau stays moderate here
        shape = 0.5 * std::exp(0.5 * (sigma / tau) * (sigma / tau) - dt / tau) * std::erfc(z);
    } else {
        shape = 0.5 * std::exp(-0.5 * u * u) * erfcx(z);
    }
    return amplitude * shape + background;
}

/// Bare-cavity-normalised transmission scale (kappa/2)^2 |gamma/2 - i delta|^2 / |D|^2.
inline double transmission_shape(double omega, double g, double kappa, double gamma, double omega_c, double omega_a) {
    const complex emitter(0.5 * gamma, -(omega - omega_a));
    const complex den = cqed::detail::full_denominator(g, kappa, gamma, omega - omega_a, omega - omega_c);
    return 0.25 * kappa * kappa * std::norm(emitter) / std::norm(den);
}

// ---------------------------------------------------------------------------
// Trace generators
// ---------------------------------------------------------------------------

struct LorentzianSpec {
    double center = 619.5;  ///< nm
    double fwhm = 0.062;    ///< nm
    double amplitude = 1000.0;
    double slope = 0.0;  ///< counts per nm
    double offset = 50.0;
    double span = 1.0;   ///< total window width in nm
    std::size_t n = 501;
    double noise_sd = 0.0;
};

inline SampledTrace lorentzian_spectrum(const LorentzianSpec& s, Rng& rng) {
    const double lo = s.center - 0.5 * s.span, hi = s.center + 0.5 * s.span;
    const double x_ref = 0.5 * (lo + hi);
    auto tr = sample(
        [&](double x) { return lorentzian_linear(x, s.center, s.fwhm, s.amplitude, s.slope, s.offset, x_ref); },
        linspace(lo, hi, s.n), TraceKind::spectrum, "nm");
    add_noise(tr.y, s.noise_sd, rng);
    return tr;
}

struct DecaySpec {
    double tau = 2.0;  ///< ns
    double amplitude = 1000.0;
    double background = 5.0;
    double t0 = 1.0;     ///< ns, excitation time
    double sigma = 0.0;  ///< Gaussian IRF width, ns
    double bin = 0.016;  ///< ns
    std::size_t n = 1000;
    double noise_sd = 0.0;
};

inline SampledTrace decay_histogram(const DecaySpec& s, Rng& rng) {
    std::vector<double> t(s.n);
    for (std::size_t i = 0; i < s.n; ++i) t[i] = s.bin * static_cast<double>(i);
    auto tr = sample([&](double x) { return exp_decay(x, s.tau, s.amplitude, s.background, s.t0, s.sigma); },
                     std::move(t), TraceKind::histogram, "ns");
    add_noise(tr.y, s.noise_sd, rng);
    return tr;
}

/// Transmission laser scan of `p` in GHz; `scale` is the bare-cavity peak.
inline SampledTrace transmission_scan(const CqedParams& p, double scale, double lo, double hi, std::size_t n,
                                      double noise_sd, Rng& rng) {
    auto tr = sample(
        [&](double w) { return scale * transmission_shape(w, p.g, p.kappa, p.gamma(), p.omega_c, p.omega_a); },
        linspace(lo, hi, n), TraceKind::scan, "GHz");
    add_noise(tr.y, noise_sd, rng);
    return tr;
}

/// Reflection scan A R(omega - omega_c) + c of a bare cavity.
inline SampledTrace reflection_scan(double kappa_e_over_kappa, double kappa, double amplitude, double background,
                                    double omega_c, double lo, double hi, std::size_t n, double noise_sd, Rng& rng) {
    auto tr = sample(
        [&](double w) {
            return amplitude * bare_cavity_reflectivity(w - omega_c, kappa, kappa_e_over_kappa * kappa) + background;
        },
        linspace(lo, hi, n), TraceKind::scan, "GHz");
    add_noise(tr.y, noise_sd, rng);
    return tr;
}

/// (x, y) pairs with multiplicative Gaussian noise of relative size `rel_sd`.
struct PointSeries {
    std::vector<double> x;
    std::vector<double> y;
};

template <class F>
PointSeries points(F&& f, const std::vector<double>& x, double rel_sd, Rng& rng) {
    PointSeries out;
    out.x = x;
    for (double xi : x) {
        const double v = f(xi);
        out.y.push_back(rel_sd > 0.0 ? v * (1.0 + rel_sd * rng.normal()) : v);
    }
    return out;
}

}  // namespace cqed::synth
