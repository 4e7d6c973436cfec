#pragma once

// Cavity-modified optical Bloch equations for the emitter coherence and
// inversion after adiabatic elimination of the cavity field. Time is in ns and
// all stored rates are ordinary frequencies, so the right-hand side carries a
// factor 2*pi.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "cqed/core.hpp"

namespace cqed::bloch {

struct BlochState {
    complex sigma_ge{0.0, 0.0};
    double sigma_z = -1.0;

    static BlochState ground() { return {}; }
    static BlochState excited() { return {{0.0, 0.0}, 1.0}; }

    /// Excited-state population (1 + sigma_z) / 2.
    double excited_population() const { return 0.5 * (1.0 + sigma_z); }

    /// Amount by which the state leaves the Bloch ball, 0 for physical states.
    double physicality_violation() const {
        const double z_excess = std::max(0.0, std::abs(sigma_z) - 1.0);
        const double coh_excess = std::max(0.0, std::norm(sigma_ge) - 0.25 * (1.0 - sigma_z * sigma_z));
        return std::max(z_excess, coh_excess);
    }
};

/// Coherent drive through the input port.
struct DriveSpec {
    complex Y{0.0, 0.0};  ///< 4 g sqrt(kappa_in) <a_in> / (kappa gamma0)
    double delta = 0.0;    ///< laser-emitter detuning omega - omega_a
    double delta_c = 0.0;  ///< laser-cavity detuning omega - omega_c

    /// Drive with the laser at `omega` for the frequencies stored in `p`.
    static DriveSpec at(double omega, const CqedParams& p, complex Y) {
        return {Y, omega - p.omega_a, omega - p.omega_c};
    }

    /// Y for a given input amplitude.
    static complex drive_from_input(complex a_in, const CqedParams& p) {
        return 4.0 * p.g * std::sqrt(p.input_rate()) * a_in / (p.kappa * p.gamma0);
    }

    static complex input_from_drive(complex Y, const CqedParams& p) {
        return Y * p.kappa * p.gamma0 / (4.0 * p.g * std::sqrt(p.input_rate()));
    }

    /// Drive whose cavity-filtered amplitude Y / (1 + 2i(omega_c - omega)/kappa)
    /// seen by the emitter equals `emitter_drive`.
    static DriveSpec with_emitter_drive(complex emitter_drive, double delta, double delta_c, const CqedParams& p) {
        return {emitter_drive * complex(1.0, -2.0 * delta_c / p.kappa), delta, delta_c};
    }

    bool weak() const { return std::abs(Y) <= 0.1; }
};

struct Diagnostics {
    bool weak_drive = true;            ///< |Y| <= 0.1
    double kappa_over_gamma0 = 0.0;    ///< adiabatic-elimination figure of merit
    bool large_kappa_warning = false;  ///< kappa/gamma0 < 10
};

inline Diagnostics diagnose(const DriveSpec& drive, const CqedParams& p) {
    Diagnostics d;
    d.weak_drive = drive.weak();
    d.kappa_over_gamma0 = p.gamma0 > 0.0 ? p.kappa / p.gamma0 : INFINITY;
    d.large_kappa_warning = d.kappa_over_gamma0 < 10.0;
    return d;
}

namespace detail {

/// Coefficients of the linear system d(sigma)/dt = A sigma + B sigma_z,
/// d(sigma_z)/dt = -Gamma (1 + sigma_z) + i gamma0 (Yc sigma^* - Yc^* sigma),
/// with all rates already multiplied by 2 pi.
struct Coefficients {
    complex A;
    complex B;
    complex Yc;
    double Gamma = 0.0;
    double g0 = 0.0;
};

inline Coefficients coefficients(const DriveSpec& drive, const CqedParams& p) {
    if (!(p.kappa > 0.0) || !(p.gamma0 > 0.0)) throw DomainError("bloch: kappa and gamma0 must be > 0");
    const double C = 4.0 * p.g * p.g / (p.kappa * p.gamma0);
    const double g0 = units::angular(p.gamma0);
    // rotating-frame detunings: omega_a - omega and omega_c - omega
    const double em = -drive.delta;
    const double cav = -drive.delta_c;
    const complex cavity_factor(1.0, 2.0 * cav / p.kappa);
    Coefficients k;
    k.A = -0.5 * g0 * (complex(1.0, 2.0 * em / p.gamma0) + C / cavity_factor);
    k.Yc = drive.Y / cavity_factor;
    k.B = complex(0.0, -0.5 * g0) * k.Yc;
    const double x = 2.0 * cav / p.kappa;
    k.Gamma = g0 * (1.0 + C / (1.0 + x * x));
    k.g0 = g0;
    return k;
}

inline BlochState apply(const Coefficients& k, const BlochState& s) {
    BlochState d;
    d.sigma_ge = k.A * s.sigma_ge + k.B * s.sigma_z;
    const complex cross = k.Yc * std::conj(s.sigma_ge) - std::conj(k.Yc) * s.sigma_ge;
    d.sigma_z = -k.Gamma * (1.0 + s.sigma_z) + (complex(0.0, k.g0) * cross).real();
    return d;
}

}  // namespace detail

/// Time derivative [1/ns] of the Bloch state.
inline BlochState bloch_derivatives(const BlochState& state, const DriveSpec& drive, const CqedParams& p) {
    return detail::apply(detail::coefficients(drive, p), state);
}

struct TrajectoryPoint {
    double t = 0.0;
    BlochState state;
};

struct Trajectory {
    std::vector<TrajectoryPoint> points;
    Diagnostics diagnostics;
    /// Number of samples leaving the Bloch ball by more than 1e-6.
    std::size_t physicality_violations = 0;
    std::optional<double> first_violation_t;

    const BlochState& final_state() const { return points.back().state; }
};

/// Largest angular rate of the problem; integrate() requires dt times this to
/// stay below 0.1.
inline double fastest_rate(const DriveSpec& drive, const CqedParams& p) {
    const double C = 4.0 * p.g * p.g / (p.kappa * p.gamma0);
    return units::angular(std::max({p.gamma0 * (1.0 + C), std::abs(drive.delta), std::abs(drive.delta_c)}));
}

/// Fixed-step classical Runge-Kutta integration from t = 0 to t_end.
/// `record_every` thins the stored series; the final state is always kept.
inline Trajectory integrate(const BlochState& state0, const DriveSpec& drive, const CqedParams& p, double t_end,
                            double dt, std::size_t record_every = 1) {
    if (!(dt > 0.0) || !(t_end >= 0.0)) throw ConfigError("integrate: need dt > 0 and t_end >= 0");
    const auto k = detail::coefficients(drive, p);
    const double stiffness = dt * fastest_rate(drive, p);
    if (stiffness > 0.1 + 1e-12)
        throw ConfigError("integrate: step too coarse, dt * max rate = " + std::to_string(stiffness) + " > 0.1");
    if (state0.physicality_violation() > 1e-6) throw DomainError("integrate: initial state outside the Bloch ball");
    if (record_every == 0) record_every = 1;

    Trajectory tr;
    tr.diagnostics = diagnose(drive, p);
    const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
    tr.points.reserve(steps / record_every + 2);
    tr.points.push_back({0.0, state0});

    auto axpy = [](const BlochState& s, double h, const BlochState& d) {
        return BlochState{s.sigma_ge + h * d.sigma_ge, s.sigma_z + h * d.sigma_z};
    };

    BlochState s = state0;
    for (std::size_t n = 1; n <= steps; ++n) {
        const auto k1 = detail::apply(k, s);
        const auto k2 = detail::apply(k, axpy(s, 0.5 * dt, k1));
        const auto k3 = detail::apply(k, axpy(s, 0.5 * dt, k2));
        const auto k4 = detail::apply(k, axpy(s, dt, k3));
        s.sigma_ge += dt / 6.0 * (k1.sigma_ge + 2.0 * k2.sigma_ge + 2.0 * k3.sigma_ge + k4.sigma_ge);
        s.sigma_z += dt / 6.0 * (k1.sigma_z + 2.0 * k2.sigma_z + 2.0 * k3.sigma_z + k4.sigma_z);
        const double t = static_cast<double>(n) * dt;
        if (s.physicality_violation() > 1e-6) {
            ++tr.physicality_violations;
            if (!tr.first_violation_t) tr.first_violation_t = t;
        }
        if (n % record_every == 0 || n == steps) tr.points.push_back({t, s});
    }
    return tr;
}

/// Stationary point of the Bloch equations, solved as a 3x3 real linear system
/// in (Re sigma_ge, Im sigma_ge, sigma_z).
inline BlochState steady_state(const DriveSpec& drive, const CqedParams& p) {
    p.validate();
    const auto k = detail::coefficients(drive, p);
    const double ar = k.A.real(), ai = k.A.imag();
    const double br = k.B.real(), bi = k.B.imag();
    const double yr = k.Yc.real(), yi = k.Yc.imag();

    // d(sigma_z)/dt = -Gamma - Gamma z - 2 g0 (yi x - yr y) with sigma = x + i y
    Eigen::Matrix3d M;
    M << ar, -ai, br,
         ai, ar, bi,
         -2.0 * k.g0 * yi, 2.0 * k.g0 * yr, -k.Gamma;
    const Eigen::Vector3d rhs(0.0, 0.0, k.Gamma);
    Eigen::FullPivLU<Eigen::Matrix3d> lu(M);
    if (!lu.isInvertible()) throw NumericError("steady_state: singular Bloch system");
    const Eigen::Vector3d sol = lu.solve(rhs);
    if (!sol.allFinite()) throw NumericError("steady_state: non-finite solution");
    return {{sol(0), sol(1)}, sol(2)};
}

}  // namespace cqed::bloch
