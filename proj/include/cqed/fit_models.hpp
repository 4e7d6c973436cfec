#pragma once

// Fit models for cavity spectra, lifetime histograms, detuning series, laser
// transmission scans and cavity reflection. Each takes an optional map of
// starting values that overrides the automatic initial guess.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cqed/core.hpp"
#include "cqed/least_squares.hpp"
#include "cqed/synth.hpp"
#include "cqed/trace.hpp"
#include "cqed/units.hpp"

namespace cqed::fit {

struct FitControl {
    Weighting weighting = Weighting::unweighted;
    FitOptions solver;
    std::map<std::string, double> initial;  ///< overrides for the automatic guess
};

namespace detail {

inline void apply_overrides(std::vector<ParamSpec>& specs, const std::map<std::string, double>& initial) {
    for (const auto& [name, value] : initial) {
        auto it = std::find_if(specs.begin(), specs.end(), [&](const ParamSpec& s) { return s.name == name; });
        if (it == specs.end()) throw UsageError("fit: unknown parameter '" + name + "' in initial values");
        it->value = value;
    }
    for (auto& s : specs) s.value = std::clamp(s.value, s.lo, s.hi);
}

/// Centred moving average over `width` samples. The window shrinks
/// symmetrically at the edges so straight lines pass through unchanged.
inline std::vector<double> moving_average(const std::vector<double>& y, std::size_t width = 5) {
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const std::size_t half = std::min({width / 2, i, y.size() - 1 - i});
        const std::size_t a = i - half;
        const std::size_t b = i + half;
        double s = 0.0;
        for (std::size_t k = a; k <= b; ++k) s += y[k];
        out[i] = s / static_cast<double>(b - a + 1);
    }
    return out;
}

/// Straight line through the outer `frac` of samples on each side, plus the
/// standard deviation of the raw samples about it.
struct EdgeLine {
    double slope = 0.0, offset = 0.0, x_ref = 0.0, sd = 0.0;
    double at(double x) const { return offset + slope * (x - x_ref); }
};

inline EdgeLine edge_line(const std::vector<double>& x, const std::vector<double>& y, double frac = 0.1) {
    const std::size_t n = x.size();
    const std::size_t k = std::max<std::size_t>(2, static_cast<std::size_t>(frac * static_cast<double>(n)));
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < std::min(k, n); ++i) idx.push_back(i);
    for (std::size_t i = n > k ? n - k : 0; i < n; ++i)
        if (idx.empty() || i > idx.back()) idx.push_back(i);
    EdgeLine e;
    e.x_ref = 0.5 * (x.front() + x.back());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto i : idx) {
        const double u = x[i] - e.x_ref;
        sx += u;
        sy += y[i];
        sxx += u * u;
        sxy += u * y[i];
    }
    const double m = static_cast<double>(idx.size());
    const double det = m * sxx - sx * sx;
    e.slope = det > 0 ? (m * sxy - sx * sy) / det : 0.0;
    e.offset = (sy - e.slope * sx) / m;
    double ss = 0;
    for (auto i : idx) ss += std::pow(y[i] - e.at(x[i]), 2);
    e.sd = idx.size() > 2 ? std::sqrt(ss / (m - 2.0)) : 0.0;
    return e;
}

/// Full width at half of the extremum of `dev` at index `peak`, by linear
/// interpolation of the crossings. Falls back to the window width when a
/// crossing is missing.
inline double half_width(const std::vector<double>& x, const std::vector<double>& dev, std::size_t peak) {
    const double half = 0.5 * dev[peak];
    auto crosses = [&](std::size_t i) { return std::abs(dev[i]) <= std::abs(half); };
    double left = x.front(), right = x.back();
    for (std::size_t i = peak; i > 0; --i) {
        if (crosses(i - 1)) {
            const double f = (dev[i] - half) / (dev[i] - dev[i - 1]);
            left = x[i] - f * (x[i] - x[i - 1]);
            break;
        }
    }
    for (std::size_t i = peak; i + 1 < x.size(); ++i) {
        if (crosses(i + 1)) {
            const double f = (dev[i] - half) / (dev[i] - dev[i + 1]);
            right = x[i] + f * (x[i + 1] - x[i]);
            break;
        }
    }
    const double spacing = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
    return std::max(right - left, spacing);
}

inline std::size_t argmax_abs(const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (std::abs(v[i]) > std::abs(v[best])) best = i;
    return best;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Cavity spectrum: Lorentzian on a linear background
// ---------------------------------------------------------------------------

struct LorentzianOptions {
    double resolution_nm = 0.021;  ///< spectrometer resolution; narrower lines give a Q lower bound
    FitControl control;
};

/// Parameters lambda_c [nm], fwhm [nm], amplitude (signed peak height), slope
/// [counts/nm, about the window centre], offset. Derived: Q = lambda_c / fwhm.
/// A "QLowerBound" warning marks fits whose FWHM is at or below the resolution.
inline FitResult fit_lorentzian_linear(const SampledTrace& tr, const LorentzianOptions& opt = {}) {
    tr.validate();
    if (tr.size() < 6) throw InsufficientData("fit_lorentzian_linear: need at least 6 samples");
    const auto& x = tr.x;
    const auto smooth = detail::moving_average(tr.y, 5);
    const auto bg = detail::edge_line(x, tr.y);
    std::vector<double> dev(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) dev[i] = smooth[i] - bg.at(x[i]);
    const std::size_t peak = detail::argmax_abs(dev);
    // the floor keeps exact flat data (sd ~ rounding) from passing
    const double y_scale = std::abs(*std::max_element(tr.y.begin(), tr.y.end(),
                                                      [](double a, double b) { return std::abs(a) < std::abs(b); }));
    if (!(std::abs(dev[peak]) > std::max(3.0 * bg.sd, 1e-9 * y_scale)))
        throw NoPeak("fit_lorentzian_linear: no peak above 3 sigma of the background (deviation " +
                     std::to_string(dev[peak]) + ", sigma " + std::to_string(bg.sd) + ")");
    const double span = x.back() - x.front();
    const double fwhm0 = detail::half_width(x, dev, peak);

    std::vector<ParamSpec> specs{
        {"lambda_c", x[peak], x.front(), x.back(), false, fwhm0, true},
        {"fwhm", fwhm0, 1e-9 * span, 10.0 * span, false, fwhm0},
        {"amplitude", dev[peak], -unbounded, unbounded, false, std::abs(dev[peak])},
        {"slope", bg.slope, -unbounded, unbounded, false, std::abs(dev[peak]) / span},
        {"offset", bg.offset, -unbounded, unbounded, false, std::abs(dev[peak])},
    };
    detail::apply_overrides(specs, opt.control.initial);
    const double x_ref = bg.x_ref;
    auto model = [x_ref](double xi, const Eigen::VectorXd& p) {
        return synth::lorentzian_linear(xi, p(0), p(1), p(2), p(3), p(4), x_ref);
    };
    auto fr = fit_curve(tr, model, specs, opt.control.weighting, opt.control.solver);
    fr.derived["Q"] = propagate(fr, [](const Eigen::VectorXd& p) { return p(0) / p(1); });
    if (fr["fwhm"] <= opt.resolution_nm) fr.warn("QLowerBound");
    return fr;
}

inline bool q_lower_bound(const FitResult& fr) { return fr.has_warning("QLowerBound"); }

// ---------------------------------------------------------------------------
// Lifetime histogram
// ---------------------------------------------------------------------------

struct DecayOptions {
    std::optional<double> irf_sigma;  ///< Gaussian IRF width [ns]; enables the convolved model
    FitControl control;
};

/// Fits samples with t >= t_start. Without an IRF the model is
/// amplitude exp(-(t - t_start)/tau) + background. With an IRF it is the
/// exponential starting at a free onset t0, convolved with the Gaussian, so
/// t_start may then lie before the rise.
inline FitResult fit_exponential_decay(const SampledTrace& tr, double t_start, const DecayOptions& opt = {}) {
    tr.validate();
    const auto cut = tr.from(t_start);
    if (cut.size() < 5)
        throw InsufficientData("fit_exponential_decay: " + std::to_string(cut.size()) + " bins after t_start (need 5)");
    const auto& t = cut.x;
    const auto& y = cut.y;
    const std::size_t n = t.size();
    const std::size_t tail = std::max<std::size_t>(2, n / 10);
    double bg = 0.0;
    for (std::size_t i = n - tail; i < n; ++i) bg += y[i];
    bg /= static_cast<double>(tail);
    const auto smooth = detail::moving_average(y, 5);
    const std::size_t peak =
        static_cast<std::size_t>(std::max_element(smooth.begin(), smooth.end()) - smooth.begin());
    const double height = std::max(smooth[peak] - bg, 1e-12);
    // area under the background-subtracted decay divided by its height
    double area = 0.0;
    for (std::size_t i = peak; i + 1 < n; ++i)
        area += 0.5 * (std::max(0.0, y[i] - bg) + std::max(0.0, y[i + 1] - bg)) * (t[i + 1] - t[i]);
    const double window = t.back() - t.front();
    double tau0 = std::clamp(area / height, 1e-3 * window, window);

    const double counts = std::max(height, 1.0);
    std::vector<ParamSpec> specs{
        {"tau", tau0, 1e-6 * window, 100.0 * window, false, tau0},
        {"amplitude", height, 0.0, unbounded, false, counts},
        {"background", bg, -unbounded, unbounded, false, counts},
    };
    if (opt.irf_sigma) {
        const double s = *opt.irf_sigma;
        if (!(s > 0.0)) throw DomainError("fit_exponential_decay: irf_sigma must be > 0");
        // the convolved curve peaks roughly one IRF width after the onset
        specs.push_back({"t0", t[peak] - s, t.front() - 10.0 * s - window, t.back(), false, s, true});
        specs[1].value = height * 1.5;
        auto model = [s](double ti, const Eigen::VectorXd& p) { return synth::exp_decay(ti, p(0), p(1), p(2), p(3), s); };
        detail::apply_overrides(specs, opt.control.initial);
        auto fr = fit_curve(cut, model, specs, opt.control.weighting, opt.control.solver);
        return fr;
    }
    specs[1].value = std::max(y.front() - bg, 1e-12);
    const double t_ref = t.front();
    auto model = [t_ref](double ti, const Eigen::VectorXd& p) { return synth::exp_decay(ti, p(0), p(1), p(2), t_ref, 0.0); };
    detail::apply_overrides(specs, opt.control.initial);
    return fit_curve(cut, model, specs, opt.control.weighting, opt.control.solver);
}

// ---------------------------------------------------------------------------
// Detuning series
// ---------------------------------------------------------------------------

struct SeriesOptions {
    std::set<std::size_t> exclude;  ///< indices dropped before fitting
    double kappa_stderr = 0.0;      ///< uncertainty of the supplied kappa, for derived quantities
    FitControl control;
};

namespace detail {

struct Kept {
    std::vector<double> x, y;
};

inline Kept keep(const std::vector<double>& x, const std::vector<double>& y, const std::set<std::size_t>& exclude,
                 const char* who) {
    if (x.size() != y.size()) throw DataError(std::string(who) + ": detuning and value series differ in length");
    Kept k;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (exclude.count(i)) continue;
        if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
            throw DataError(std::string(who) + ": non-finite point", static_cast<long>(i + 1));
        k.x.push_back(x[i]);
        k.y.push_back(y[i]);
    }
    if (k.x.size() < 4)
        throw InsufficientData(std::string(who) + ": " + std::to_string(k.x.size()) + " points after exclusion (need 4)");
    return k;
}

}  // namespace detail

/// tau(delta_ce) = tau0 / (C f(delta_ce) + 1) with kappa held fixed. The
/// supplied kappa is echoed as a derived quantity for report assembly.
inline FitResult fit_lifetime_vs_detuning(const std::vector<double>& delta_ce, const std::vector<double>& tau,
                                          double kappa, const SeriesOptions& opt = {}) {
    if (!(kappa > 0.0)) throw DomainError("fit_lifetime_vs_detuning: kappa must be > 0");
    const auto k = detail::keep(delta_ce, tau, opt.exclude, "fit_lifetime_vs_detuning");
    // slowest point approximates tau0; the fastest then fixes C
    const auto [mn, mx] = std::minmax_element(k.y.begin(), k.y.end());
    const double tau0 = *mx;
    const double f_min = spectral_mismatch(k.x[static_cast<std::size_t>(mn - k.y.begin())], kappa);
    const double c0 = std::max(0.0, (tau0 / std::max(*mn, 1e-300) - 1.0) / f_min);
    std::vector<ParamSpec> specs{
        {"tau0", tau0, 1e-12, unbounded, false, tau0},
        {"C", c0, 0.0, unbounded, false, std::max(c0, 1.0)},
    };
    detail::apply_overrides(specs, opt.control.initial);
    auto model = [kappa](double d, const Eigen::VectorXd& p) {
        return p(0) / (p(1) * spectral_mismatch(d, kappa) + 1.0);
    };
    auto fr = fit_points(k.x, k.y, {}, model, specs, opt.control.solver);
    fr.derived["kappa"] = {kappa, opt.kappa_stderr};
    return fr;
}

/// gamma'(delta_ce) = gamma (C_coh f(delta_ce) + 1) with kappa held fixed.
/// Derived: g = sqrt(C_coh kappa gamma) / 2.
inline FitResult fit_linewidth_vs_detuning(const std::vector<double>& delta_ce, const std::vector<double>& gamma_prime,
                                           double kappa, const SeriesOptions& opt = {}) {
    if (!(kappa > 0.0)) throw DomainError("fit_linewidth_vs_detuning: kappa must be > 0");
    const auto k = detail::keep(delta_ce, gamma_prime, opt.exclude, "fit_linewidth_vs_detuning");
    const auto [mn, mx] = std::minmax_element(k.y.begin(), k.y.end());
    const double gamma0 = std::max(*mn, 1e-300);
    const double f_max = spectral_mismatch(k.x[static_cast<std::size_t>(mx - k.y.begin())], kappa);
    const double c0 = std::max(0.0, (*mx / gamma0 - 1.0) / f_max);
    std::vector<ParamSpec> specs{
        {"gamma", gamma0, 1e-12, unbounded, false, gamma0},
        {"C_coh", c0, 0.0, unbounded, false, std::max(c0, 1.0)},
    };
    detail::apply_overrides(specs, opt.control.initial);
    auto model = [kappa](double d, const Eigen::VectorXd& p) {
        return p(0) * (p(1) * spectral_mismatch(d, kappa) + 1.0);
    };
    auto fr = fit_points(k.x, k.y, {}, model, specs, opt.control.solver);
    auto g = propagate(fr, [kappa](const Eigen::VectorXd& p) { return coupling_from_cooperativity(p(1), kappa, p(0)); });
    // kappa enters independently of the fit: dg/dkappa = g / (2 kappa)
    g.stderr = std::hypot(g.stderr, g.value / (2.0 * kappa) * opt.kappa_stderr);
    fr.derived["g"] = g;
    fr.derived["kappa"] = {kappa, opt.kappa_stderr};
    return fr;
}

// ---------------------------------------------------------------------------
// Transmission laser scan
// ---------------------------------------------------------------------------

struct TransmissionOptions {
    std::set<std::string> fixed;  ///< subset of {g, kappa, gamma, omega_c, omega_a, scale}
    bool bare = false;            ///< empty cavity: g = 0, emitter parameters frozen
    double lambda_nm = 619.0;     ///< cavity wavelength for the derived Q
    FitControl control;
};

/// Model scale (kappa/2)^2 |gamma/2 - i delta|^2 / |D|^2 on a GHz axis, which
/// peaks at `scale` for the bare cavity. Derived quantities: Q, and for the
/// full model C_coh and the double-resonance dip contrast 1 - (1/(1+C_coh))^2.
inline FitResult fit_transmission_spectrum(const SampledTrace& tr, const TransmissionOptions& opt = {}) {
    tr.validate();
    const auto& x = tr.x;
    const std::size_t n = x.size();
    if (n < 8) throw InsufficientData("fit_transmission_spectrum: need at least 8 samples");
    const double spacing = (x.back() - x.front()) / static_cast<double>(n - 1);
    const double span = x.back() - x.front();

    // cavity envelope: moments of the scan seed a bare-cavity pre-fit, which a
    // narrow emitter dip barely perturbs
    const auto smooth = detail::moving_average(tr.y, 5);
    double area = 0.0, first = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double h = x[i + 1] - x[i];
        area += 0.5 * (tr.y[i] + tr.y[i + 1]) * h;
        first += 0.5 * (x[i] * tr.y[i] + x[i + 1] * tr.y[i + 1]) * h;
    }
    const double scale_guess = std::max(*std::max_element(smooth.begin(), smooth.end()), 1e-12);
    double omega_c0 = area > 0.0 ? first / area : 0.5 * (x.front() + x.back());
    double kappa0 = std::clamp(2.0 * area / (units::pi * scale_guess), 2.0 * spacing, span);
    double scale0 = scale_guess;
    {
        std::vector<ParamSpec> pre{
            {"kappa", kappa0, 1e-6 * span, 100.0 * span, false, kappa0},
            {"omega_c", omega_c0, x.front() - span, x.back() + span, false, kappa0, true},
            {"scale", scale0, 0.0, unbounded, false, scale0},
        };
        auto bare_model = [](double w, const Eigen::VectorXd& p) {
            return p(2) * synth::transmission_shape(w, 0.0, p(0), 1.0, p(1), 0.0);
        };
        const auto pf = fit_curve(tr, bare_model, pre, opt.control.weighting, opt.control.solver);
        kappa0 = pf.params[0];
        omega_c0 = pf.params[1];
        scale0 = pf.params[2];
    }

    double omega_a0 = omega_c0, gamma0 = 4.0 * spacing, g0 = 0.0;
    if (!opt.bare) {
        // emitter dip in the ratio to the bare Lorentzian envelope
        std::vector<double> ratio(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double env = scale0 * synth::transmission_shape(x[i], 0.0, kappa0, 1.0, omega_c0, 0.0);
            ratio[i] = tr.y[i] / std::max(env, 1e-12 * scale0);
        }
        const auto rs = detail::moving_average(ratio, 3);
        // only look where the cavity transmits, away from noisy tails
        std::size_t dip = n;
        for (std::size_t i = 0; i < n; ++i) {
            const double env = synth::transmission_shape(x[i], 0.0, kappa0, 1.0, omega_c0, 0.0);
            if (env < 0.2) continue;
            if (dip == n || rs[i] < rs[dip]) dip = i;
        }
        if (dip == n) dip = static_cast<std::size_t>(std::min_element(rs.begin(), rs.end()) - rs.begin());
        omega_a0 = x[dip];
        std::vector<double> depth(n);
        for (std::size_t i = 0; i < n; ++i) depth[i] = 1.0 - rs[i];
        const double width = detail::half_width(x, depth, dip);
        const double cf = 1.0 / std::sqrt(std::clamp(rs[dip], 1e-4, 1.0)) - 1.0;
        gamma0 = std::max(width / (1.0 + cf), 0.5 * spacing);
        const double c_coh = cf / spectral_mismatch(omega_c0 - omega_a0, kappa0);
        g0 = std::max(coupling_from_cooperativity(c_coh, kappa0, gamma0), 1e-3 * kappa0);
    }

    std::vector<ParamSpec> specs{
        {"g", g0, 0.0, unbounded, false, std::max(g0, 0.01 * kappa0)},
        {"kappa", kappa0, 1e-6 * span, 100.0 * span, false, kappa0},
        {"gamma", gamma0, 0.5 * spacing, 10.0 * span, false, gamma0},
        {"omega_c", omega_c0, x.front() - span, x.back() + span, false, kappa0, true},
        {"omega_a", omega_a0, x.front() - span, x.back() + span, false, gamma0, true},
        {"scale", scale0, 0.0, unbounded, false, scale0},
    };
    if (opt.bare) {
        specs[0].value = 0.0;
        specs[0].fixed = specs[2].fixed = specs[4].fixed = true;
        specs[2].value = 1.0;
        specs[4].value = 0.0;
    }
    for (const auto& name : opt.fixed) {
        auto it = std::find_if(specs.begin(), specs.end(), [&](const ParamSpec& s) { return s.name == name; });
        if (it == specs.end()) throw UsageError("fit_transmission_spectrum: cannot fix unknown parameter '" + name + "'");
        it->fixed = true;
    }
    detail::apply_overrides(specs, opt.control.initial);
    auto model = [](double w, const Eigen::VectorXd& p) {
        return p(5) * synth::transmission_shape(w, p(0), p(1), p(2), p(3), p(4));
    };
    auto fr = fit_curve(tr, model, specs, opt.control.weighting, opt.control.solver);

    const double nu = units::frequency_from_wavelength(opt.lambda_nm);
    fr.derived["Q"] = propagate(fr, [nu](const Eigen::VectorXd& p) { return nu / p(1); });
    if (!opt.bare) {
        fr.derived["C_coh"] = propagate(fr, [](const Eigen::VectorXd& p) { return cooperativity(p(0), p(1), p(2)); });
        fr.derived["dip_contrast"] = propagate(fr, [](const Eigen::VectorXd& p) {
            const double c = cooperativity(p(0), p(1), p(2));
            return 1.0 - 1.0 / ((1.0 + c) * (1.0 + c));
        });
        const double dce = fr["omega_c"] - fr["omega_a"];
        const double dip_width = fr["gamma"] * (1.0 + fr.derived["C_coh"].value * spectral_mismatch(dce, fr["kappa"]));
        if (dip_width < 3.0 * spacing) fr.warn("UnderResolved:gamma");
    }
    return fr;
}

// ---------------------------------------------------------------------------
// Cavity reflection
// ---------------------------------------------------------------------------

struct ReflectionOptions {
    FitControl control;
};

/// R'(omega) = A |1 - 2 eta / (1 + 2i (omega - omega_c)/kappa)|^2 + c with
/// eta = kappa_e/kappa and the background c fixed. |r|^2 is unchanged under
/// eta -> 1 - eta, so eta is bounded to [0, 0.5] (undercoupled branch); an
/// "AmbiguousBranch" warning marks a fit that ends on eta = 0.5.
/// Parameters: kappa_e_over_kappa, kappa, amplitude_A, omega_c.
inline FitResult fit_reflection(const SampledTrace& tr, double background_c, const ReflectionOptions& opt = {}) {
    tr.validate();
    const auto& x = tr.x;
    const std::size_t n = x.size();
    if (n < 6) throw InsufficientData("fit_reflection: need at least 6 samples");
    const double span = x.back() - x.front();
    const double spacing = span / static_cast<double>(n - 1);
    const auto smooth = detail::moving_average(tr.y, 5);
    const auto edge = detail::edge_line(x, tr.y);
    const double a0 = std::max(edge.offset - background_c, 1e-12);
    std::size_t dip = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (smooth[i] < smooth[dip]) dip = i;
    const double r_min = std::clamp((smooth[dip] - background_c) / a0, 0.0, 1.0);
    const double eta0 = std::clamp(0.5 * (1.0 - std::sqrt(r_min)), 1e-3, 0.499);
    std::vector<double> depth(n);
    for (std::size_t i = 0; i < n; ++i) depth[i] = a0 + background_c - smooth[i];
    const double kappa0 = r_min < 0.999 ? detail::half_width(x, depth, dip) : 0.2 * span;

    std::vector<ParamSpec> specs{
        {"kappa_e_over_kappa", eta0, 0.0, 0.5, false, 0.1},
        {"kappa", std::max(kappa0, 2.0 * spacing), 1e-6 * span, 100.0 * span, false, kappa0},
        {"amplitude_A", a0, 0.0, unbounded, false, a0},
        {"omega_c", x[dip], x.front() - span, x.back() + span, false, kappa0, true},
    };
    auto initial = opt.control.initial;
    // a start on the overcoupled branch maps to its undercoupled twin
    if (auto it = initial.find("kappa_e_over_kappa"); it != initial.end() && it->second > 0.5)
        it->second = 1.0 - it->second;
    detail::apply_overrides(specs, initial);
    auto model = [background_c](double w, const Eigen::VectorXd& p) {
        const complex r = 1.0 - 2.0 * p(0) / complex(1.0, 2.0 * (w - p(3)) / p(1));
        return p(2) * std::norm(r) + background_c;
    };
    auto fr = fit_curve(tr, model, specs, opt.control.weighting, opt.control.solver);
    if (fr["kappa_e_over_kappa"] >= 0.5 - 1e-6) fr.warn("AmbiguousBranch");
    fr.derived["kappa_e"] = propagate(fr, [](const Eigen::VectorXd& p) { return p(0) * p(1); });
    return fr;
}

/// Sum of squared residuals of the reflection model at given parameters;
/// exposes the eta <-> 1 - eta symmetry for testing.
inline double reflection_objective(const SampledTrace& tr, double background_c, double eta, double kappa,
                                   double amplitude, double omega_c) {
    double s = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const complex r = 1.0 - 2.0 * eta / complex(1.0, 2.0 * (tr.x[i] - omega_c) / kappa);
        s += std::pow(tr.y[i] - (amplitude * std::norm(r) + background_c), 2);
    }
    return s;
}

}  // namespace cqed::fit
