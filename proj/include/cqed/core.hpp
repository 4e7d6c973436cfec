#pragma once

// Analytic response of a single two-level emitter coupled to a single-sided
// cavity: input-output amplitudes, Purcell algebra, cooperativities and beta
// factors. Everything here is a pure function of its arguments.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>

#include "cqed/errors.hpp"
#include "cqed/search.hpp"
#include "cqed/units.hpp"

namespace cqed {

using complex = std::complex<double>;

/// Rate set of the coupled emitter-cavity system. All entries are ordinary
/// frequencies in GHz.
struct CqedParams {
    double g = 0.0;          ///< emitter-cavity coupling
    double kappa = 0.0;      ///< total cavity decay
    double kappa_e = 0.0;    ///< decay into the waveguide (output port)
    std::optional<double> kappa_in;  ///< input-port decay; defaults to kappa_e
    double gamma0 = 0.0;     ///< natural (radiative) emitter linewidth
    double gamma_dep = 0.0;  ///< pure dephasing
    double omega_c = 0.0;    ///< cavity frequency
    double omega_a = 0.0;    ///< emitter frequency

    /// Off-resonant emitter linewidth including dephasing.
    double gamma() const { return gamma0 + gamma_dep; }
    double kappa_i() const { return kappa - kappa_e; }
    double input_rate() const { return kappa_in.value_or(kappa_e); }
    /// Cavity-emitter detuning omega_c - omega_a.
    double delta_ce() const { return omega_c - omega_a; }

    void validate() const {
        auto finite_nonneg = [](double v, const char* name) {
            if (!std::isfinite(v) || v < 0.0)
                throw DomainError(std::string("CqedParams: ") + name + " must be finite and >= 0");
        };
        finite_nonneg(g, "g");
        finite_nonneg(kappa, "kappa");
        finite_nonneg(kappa_e, "kappa_e");
        finite_nonneg(gamma0, "gamma0");
        finite_nonneg(gamma_dep, "gamma_dep");
        finite_nonneg(input_rate(), "kappa_in");
        if (!std::isfinite(omega_c) || !std::isfinite(omega_a))
            throw DomainError("CqedParams: frequencies must be finite");
        if (kappa_e > kappa) throw DomainError("CqedParams: kappa_e exceeds kappa");
        if (input_rate() > kappa) throw DomainError("CqedParams: kappa_in exceeds kappa");
    }
};

/// Laser-referenced detunings. delta_c == delta - delta_ce holds by construction.
struct Detuning {
    double delta = 0.0;     ///< omega - omega_a
    double delta_c = 0.0;   ///< omega - omega_c
    double delta_ce = 0.0;  ///< omega_c - omega_a

    static Detuning at(double omega, const CqedParams& p) {
        return {omega - p.omega_a, omega - p.omega_c, p.omega_c - p.omega_a};
    }
};

struct ResponseAmplitudes {
    complex r, t, s;
    double R = 0.0, T = 0.0, S = 0.0;
};

struct Cooperativities {
    double C = 0.0;
    double C_coh = 0.0;
};

struct BetaFactors {
    double beta = 0.0;
    double beta_e = 0.0;
};

struct WeakSteadyState {
    complex a;
    complex sigma_ge;
};

// ---------------------------------------------------------------------------
// Purcell algebra
// ---------------------------------------------------------------------------

/// Lorentzian spectral mismatch f = 1 / (1 + 4 delta_ce^2 / kappa^2).
inline double spectral_mismatch(double delta_ce, double kappa) {
    if (!(kappa > 0.0)) throw DomainError("spectral_mismatch: kappa must be > 0");
    if (std::isinf(delta_ce)) return 0.0;
    const double x = 2.0 * delta_ce / kappa;
    return 1.0 / (1.0 + x * x);
}

/// C = 4g^2/(kappa gamma0) and C_coh = 4g^2/(kappa gamma).
inline Cooperativities cooperativities(const CqedParams& p) {
    if (!(p.kappa > 0.0)) throw DomainError("cooperativities: kappa must be > 0");
    if (!(p.gamma0 > 0.0)) throw DomainError("cooperativities: gamma0 must be > 0");
    if (p.gamma_dep < 0.0) throw DomainError("cooperativities: gamma_dep must be >= 0");
    const double num = 4.0 * p.g * p.g;
    return {num / (p.kappa * p.gamma0), num / (p.kappa * p.gamma())};
}

inline double cooperativity(double g, double kappa, double gamma) {
    if (!(kappa > 0.0) || !(gamma > 0.0)) throw DomainError("cooperativity: kappa and gamma must be > 0");
    return 4.0 * g * g / (kappa * gamma);
}

/// Inverse of cooperativity(): g = sqrt(C kappa gamma) / 2.
inline double coupling_from_cooperativity(double C, double kappa, double gamma) {
    if (C < 0.0 || kappa < 0.0 || gamma < 0.0) throw DomainError("coupling_from_cooperativity: negative input");
    return 0.5 * std::sqrt(C * kappa * gamma);
}

/// Purcell-reduced lifetime tau0 / (C f + 1).
inline double purcell_lifetime(double tau0, double C, double delta_ce, double kappa) {
    if (!(tau0 > 0.0)) throw DomainError("purcell_lifetime: tau0 must be > 0");
    if (C < 0.0) throw DomainError("purcell_lifetime: C must be >= 0");
    return tau0 / (C * spectral_mismatch(delta_ce, kappa) + 1.0);
}

/// base * (coop f + 1). With (gamma0, C) this is the Purcell-enhanced decay
/// rate; with (gamma, C_coh) it is the broadened linewidth gamma'.
inline double enhanced_rate(double base_rate, double coop, double delta_ce, double kappa) {
    if (base_rate < 0.0) throw DomainError("enhanced_rate: base rate must be >= 0");
    if (coop < 0.0) throw DomainError("enhanced_rate: cooperativity must be >= 0");
    return base_rate * (coop * spectral_mismatch(delta_ce, kappa) + 1.0);
}

inline BetaFactors beta_factors(double C, double kappa_e, double kappa) {
    if (C < 0.0) throw DomainError("beta_factors: C must be >= 0");
    if (!(kappa > 0.0) || kappa_e < 0.0 || kappa_e > kappa)
        throw DomainError("beta_factors: need 0 <= kappa_e <= kappa, kappa > 0");
    const double beta = C / (C + 1.0);
    return {beta, kappa_e / kappa * beta};
}

/// F_p = 3/(4 pi^2) Q / V, with V in units of (lambda/n)^3.
inline double purcell_factor(double Q, double v_norm) {
    if (!(Q > 0.0) || !(v_norm > 0.0)) throw DomainError("purcell_factor: Q and V must be > 0");
    return 3.0 / (4.0 * units::pi * units::pi) * Q / v_norm;
}

/// C = F_p beta0 u^2 zeta.
inline double cooperativity_from_geometry(double purcell, double beta0, double u_sq, double zeta) {
    if (purcell < 0.0) throw DomainError("cooperativity_from_geometry: F_p must be >= 0");
    if (beta0 < 0.0 || beta0 > 1.0) throw DomainError("cooperativity_from_geometry: beta0 outside [0,1]");
    if (u_sq < 0.0 || u_sq > 1.0) throw DomainError("cooperativity_from_geometry: u^2 outside [0,1]");
    if (zeta < 0.0 || zeta > 1.0) throw DomainError("cooperativity_from_geometry: zeta outside [0,1]");
    return purcell * beta0 * u_sq * zeta;
}

/// Placement factor u^2 zeta that produces cooperativity C for a given cavity.
inline double placement_factor_for(double C, double purcell, double beta0) {
    if (!(purcell > 0.0) || !(beta0 > 0.0)) throw DomainError("placement_factor_for: F_p and beta0 must be > 0");
    return C / (purcell * beta0);
}

/// beta0 = quantum efficiency * Debye-Waller factor * branching ratio.
inline double beta_zero(double eta_q, double eta_dw, double eta_br) { return eta_q * eta_dw * eta_br; }

/// gamma0 = 1/(2 pi tau0): lifetime [ns] to natural linewidth [GHz].
inline double linewidth_from_lifetime(double tau0_ns) {
    if (!(tau0_ns > 0.0)) throw DomainError("linewidth_from_lifetime: tau0 must be > 0");
    return 1.0 / (units::two_pi * tau0_ns);
}

inline double lifetime_from_linewidth(double gamma0_ghz) {
    if (!(gamma0_ghz > 0.0)) throw DomainError("lifetime_from_linewidth: gamma0 must be > 0");
    return 1.0 / (units::two_pi * gamma0_ghz);
}

/// Q = nu_c / kappa with nu_c = c / lambda_c.
inline double quality_factor_from_kappa(double lambda_nm, double kappa_ghz) {
    if (!(lambda_nm > 0.0) || !(kappa_ghz > 0.0)) throw DomainError("quality_factor_from_kappa: inputs must be > 0");
    return units::frequency_from_wavelength(lambda_nm) / kappa_ghz;
}

/// Q = lambda_c / FWHM.
inline double quality_factor_from_width(double lambda_nm, double fwhm_nm) {
    if (!(lambda_nm > 0.0) || !(fwhm_nm > 0.0)) throw DomainError("quality_factor_from_width: inputs must be > 0");
    return lambda_nm / fwhm_nm;
}

inline double kappa_from_quality_factor(double lambda_nm, double Q) {
    if (!(lambda_nm > 0.0) || !(Q > 0.0)) throw DomainError("kappa_from_quality_factor: inputs must be > 0");
    return units::frequency_from_wavelength(lambda_nm) / Q;
}

// ---------------------------------------------------------------------------
// Input-output amplitudes
// ---------------------------------------------------------------------------
//
// Complex amplitudes are written in the frame rotating at the laser frequency
// with the usual detunings (omega_c - omega) and (omega_a - omega); in terms of
// the laser-referenced Detuning this is (-delta_c) and (-delta). Intensities are
// insensitive to that choice.

namespace detail {

/// (kappa/2 - i delta_c)(gamma/2 - i delta) + g^2
inline complex full_denominator(double g, double kappa, double gamma, double delta, double delta_c) {
    return complex(0.5 * kappa, -delta_c) * complex(0.5 * gamma, -delta) + g * g;
}

}  // namespace detail

/// Reflection, transmission and scattering amplitudes at laser frequency
/// `omega`. The emitter denominator uses gamma = gamma0 + gamma_dep; the
/// scattering numerator keeps the radiative gamma0.
inline ResponseAmplitudes response_amplitudes(double omega, const CqedParams& p) {
    p.validate();
    const auto d = Detuning::at(omega, p);
    const double gamma = p.gamma();
    const complex den = detail::full_denominator(p.g, p.kappa, gamma, d.delta, d.delta_c);
    if (std::abs(den) == 0.0) throw DomainError("response_amplitudes: degenerate denominator");
    const complex emitter(0.5 * gamma, -d.delta);
    const double k_in = p.input_rate();
    const double k_out = p.kappa_e;

    ResponseAmplitudes out;
    out.r = 1.0 - k_in * emitter / den;
    out.t = -std::sqrt(k_in * k_out) * emitter / den;
    out.s = complex(0.0, 1.0) * p.g * std::sqrt(k_in * p.gamma0) / den;
    out.R = std::norm(out.r);
    out.T = std::norm(out.t);
    out.S = std::norm(out.s);
    return out;
}

/// Transmission of the same cavity with the emitter removed.
inline double bare_transmission(double omega, const CqedParams& p) {
    CqedParams bare = p;
    bare.g = 0.0;
    return response_amplitudes(omega, bare).T;
}

/// Transmission dip contrast 1 - T(omega_a) / T_bare(omega_a).
inline double transmission_dip_contrast(const CqedParams& p) {
    const double tb = bare_transmission(p.omega_a, p);
    if (tb == 0.0) throw DomainError("transmission_dip_contrast: bare transmission vanishes");
    return 1.0 - response_amplitudes(p.omega_a, p).T / tb;
}

/// Bare-cavity reflectivity |1 - kappa_e / (kappa/2 + i delta_c)|^2.
inline double bare_cavity_reflectivity(double delta_c, double kappa, double kappa_e) {
    if (!(kappa > 0.0)) throw DomainError("bare_cavity_reflectivity: kappa must be > 0");
    if (kappa_e < 0.0 || kappa_e > kappa) throw DomainError("bare_cavity_reflectivity: need 0 <= kappa_e <= kappa");
    if (std::isinf(delta_c)) return 1.0;
    return std::norm(1.0 - kappa_e / complex(0.5 * kappa, delta_c));
}

/// Weak-excitation steady state of the cavity field and emitter coherence for
/// input amplitude a_in. Uses the radiative linewidth gamma0 (no dephasing).
inline WeakSteadyState steady_state_weak(double omega, const CqedParams& p, complex a_in) {
    p.validate();
    const auto d = Detuning::at(omega, p);
    const complex den = detail::full_denominator(p.g, p.kappa, p.gamma0, d.delta, d.delta_c);
    if (std::abs(den) == 0.0) throw DomainError("steady_state_weak: degenerate denominator");
    const complex emitter(0.5 * p.gamma0, -d.delta);
    const double sk = std::sqrt(p.input_rate());
    WeakSteadyState s;
    s.a = -sk * a_in * emitter / den;
    s.sigma_ge = complex(0.0, 1.0) * p.g * sk * a_in / den;
    return s;
}

// ---------------------------------------------------------------------------
// Emitter scattering
// ---------------------------------------------------------------------------

/// Approximate emitter-minus-laser detuning (omega_a - omega) of the brightest
/// scattering: g^2 delta_ce / (delta_ce^2 + kappa^2/4). The peak therefore
/// sits at laser detuning omega - omega_a = -scattering_peak_detuning(...).
inline double scattering_peak_detuning(double g, double kappa, double delta_ce) {
    if (!(kappa > 0.0)) throw DomainError("scattering_peak_detuning: kappa must be > 0");
    if (std::isinf(delta_ce)) return 0.0;
    return g * g * delta_ce / (delta_ce * delta_ce + 0.25 * kappa * kappa);
}

/// Scattering intensity S as a function of the laser-emitter detuning
/// (omega - omega_a) for a cavity sitting at delta_ce above the emitter.
inline double scattering_intensity(double laser_detuning, double delta_ce, const CqedParams& p) {
    CqedParams q = p;
    q.omega_a = 0.0;
    q.omega_c = delta_ce;
    return response_amplitudes(laser_detuning, q).S;
}

struct ScatteringPeak {
    double value = 0.0;           ///< max over laser detuning of S
    double laser_detuning = 0.0;  ///< omega - omega_a at the maximum
};

/// Peak scattering intensity at a given cavity-emitter detuning, found by a
/// coarse grid over the full response, a fine grid around the expected
/// emitter line, and golden-section refinement.
inline ScatteringPeak scattering_peak_envelope(double delta_ce, const CqedParams& p) {
    p.validate();
    if (!(p.kappa > 0.0) || !(p.gamma() > 0.0))
        throw DomainError("scattering_peak_envelope: kappa and gamma must be > 0");
    if (p.g == 0.0 || p.gamma0 == 0.0 || p.input_rate() == 0.0) return {0.0, 0.0};

    auto S = [&](double x) { return scattering_intensity(x, delta_ce, p); };
    const double gamma = p.gamma();
    const double c_coh = cooperativity(p.g, p.kappa, gamma);
    const double width = gamma * (1.0 + c_coh * spectral_mismatch(delta_ce, p.kappa));
    const double center = -scattering_peak_detuning(p.g, p.kappa, delta_ce);

    const double wide = std::abs(delta_ce) + p.kappa + 4.0 * p.g + 10.0 * gamma;
    const double narrow = 20.0 * width;
    constexpr std::size_t n_wide = 2001, n_narrow = 801;

    double best_x = 0.0, best_v = -1.0, best_step = 0.0;
    auto scan = [&](double lo, double hi, std::size_t n) {
        const double step = (hi - lo) / static_cast<double>(n - 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = lo + step * static_cast<double>(i);
            const double v = S(x);
            if (!std::isfinite(v))
                throw NumericError("scattering_peak_envelope: non-finite S at laser detuning " + std::to_string(x));
            if (v > best_v) {
                best_v = v;
                best_x = x;
                best_step = step;
            }
        }
    };
    scan(-wide, wide, n_wide);
    scan(center - narrow, center + narrow, n_narrow);

    auto refined = search::golden_minimize([&](double x) { return -S(x); }, best_x - best_step, best_x + best_step,
                                           1e-9 * std::max(1.0, width));
    if (-refined.value >= best_v) return {-refined.value, refined.x};
    return {best_v, best_x};
}

}  // namespace cqed
