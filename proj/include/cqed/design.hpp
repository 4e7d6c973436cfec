#pragma once

// Photonic-crystal cavity geometry, emitter placement maps on externally
// supplied field data, and the external-beta / reflection-dip explorations.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cqed/contour.hpp"
#include "cqed/core.hpp"
#include "cqed/errors.hpp"
#include "cqed/search.hpp"

namespace cqed::design {

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

struct CavityDesign {
    double a = 206.0;      ///< mirror lattice constant, nm
    double r = 71.0;       ///< hole radius, nm
    double w_wg = 275.0;   ///< beam width, nm
    double t_h = 230.0;    ///< membrane thickness, nm
    double d = 0.1;        ///< fractional lattice deviation at the centre
    double eta = 1.05;     ///< slope-well exponent
    int N = 7;             ///< defect cells per side
    int M_s = 13;          ///< strong mirror cells
    int M_w = 3;           ///< weak mirror cells
    int L = 7;             ///< taper cells
    double r_min_wg = 25.0;  ///< last taper hole radius, nm
    double scaling = 100.0;  ///< percent, relative to the nominal design

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!std::isfinite(v) || !(v > 0.0))
                throw DomainError(std::string("CavityDesign: ") + name + " must be finite and > 0");
        };
        positive(a, "a");
        positive(r, "r");
        positive(w_wg, "w_wg");
        positive(t_h, "t_h");
        positive(eta, "eta");
        positive(r_min_wg, "r_min_wg");
        positive(scaling, "scaling");
        if (!(d >= 0.0 && d < 1.0)) throw DomainError("CavityDesign: d must lie in [0, 1)");
        if (N < 1) throw DomainError("CavityDesign: N must be >= 1");
        if (M_s < 0) throw DomainError("CavityDesign: M_s must be >= 0");
        if (M_w < 1 || M_w > 6) throw DomainError("CavityDesign: M_w must lie in [1, 6]");
        if (L < 0) throw DomainError("CavityDesign: L must be >= 0");
    }
};

enum class Region { strong, defect, weak, taper };

inline const char* to_string(Region r) {
    switch (r) {
        case Region::strong: return "strong";
        case Region::defect: return "defect";
        case Region::weak: return "weak";
        case Region::taper: return "taper";
    }
    return "?";
}

struct Hole {
    double center_nm = 0.0;
    double radius_nm = 0.0;
    double lattice_nm = 0.0;  ///< width of the cell holding this hole
    Region region = Region::strong;
};

struct Lattice {
    std::vector<double> a_i;  ///< defect lattice constants, i = 0..N
    std::vector<Hole> holes;  ///< strong mirror, defect, weak mirror, taper; centre cell at x = 0
};

/// Piecewise power law mapping x in [0,1] to y in [0,1] with y(0.5) = 0.5.
inline double slope_well(double x, double eta) {
    if (x <= 0.5) return 0.5 * std::pow(2.0 * x, eta);
    return 1.0 - 0.5 * std::pow(2.0 * (1.0 - x), eta);
}

/// a_i = a (1 - d (2 y^3 - 3 y^2 + 1)) with y = slope_well(i/N).
inline std::vector<double> defect_constants(const CavityDesign& c) {
    c.validate();
    std::vector<double> out(static_cast<std::size_t>(c.N) + 1);
    for (int i = 0; i <= c.N; ++i) {
        const double y = slope_well(static_cast<double>(i) / c.N, c.eta);
        out[static_cast<std::size_t>(i)] = c.a * (1.0 - c.d * (2.0 * y * y * y - 3.0 * y * y + 1.0));
    }
    // the cubic is exact at the ends; pin them against rounding
    out.front() = c.a * (1.0 - c.d);
    out.back() = c.a;
    return out;
}

/// Full hole sequence. Each hole sits at the centre of a cell whose width is
/// its lattice constant. The defect reads a_N..a_1, a_0, a_1..a_N so both
/// halves share the centre cell; the strong mirror lies at negative x.
inline Lattice defect_lattice(const CavityDesign& c) {
    Lattice out;
    out.a_i = defect_constants(c);
    struct Cell {
        double width, radius;
        Region region;
    };
    std::vector<Cell> cells;
    for (int k = 0; k < c.M_s; ++k) cells.push_back({c.a, c.r, Region::strong});
    for (int i = c.N; i >= 1; --i) cells.push_back({out.a_i[static_cast<std::size_t>(i)], c.r, Region::defect});
    const std::size_t centre = cells.size();
    cells.push_back({out.a_i[0], c.r, Region::defect});
    for (int i = 1; i <= c.N; ++i) cells.push_back({out.a_i[static_cast<std::size_t>(i)], c.r, Region::defect});
    for (int k = 0; k < c.M_w; ++k) cells.push_back({c.a, c.r, Region::weak});
    for (int k = 1; k <= c.L; ++k) {
        const double radius = c.r - (c.r - c.r_min_wg) * static_cast<double>(k) / c.L;
        cells.push_back({c.a, radius, Region::taper});
    }

    std::vector<double> centers(cells.size());
    double edge = 0.0;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        centers[k] = edge + 0.5 * cells[k].width;
        edge += cells[k].width;
    }
    const double shift = centers[centre];
    for (std::size_t k = 0; k < cells.size(); ++k)
        out.holes.push_back({centers[k] - shift, cells[k].radius, cells[k].width, cells[k].region});
    return out;
}

/// Multiplies a, r and w_wg by percent/100. Thickness is set by the wafer
/// and stays fixed.
inline CavityDesign scale_design(const CavityDesign& c, double percent) {
    if (!std::isfinite(percent) || percent < 90.0 || percent > 115.0)
        throw DomainError("scale_design: scaling must lie in [90, 115] percent, got " + std::to_string(percent));
    c.validate();
    const double f = percent / 100.0;
    CavityDesign out = c;
    out.a *= f;
    out.r *= f;
    out.w_wg *= f;
    out.scaling *= f;
    return out;
}

// ---------------------------------------------------------------------------
// Emitter placement
// ---------------------------------------------------------------------------

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& u, const Vec3& v) { return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]; }
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

/// Tolerance on |v| - 1 for vectors read back from 9-digit text files.
inline constexpr double unit_tol = 1e-6;

inline void require_unit(const Vec3& v, const char* what) {
    const double n = norm(v);
    if (!std::isfinite(n) || std::abs(n - 1.0) > unit_tol)
        throw DomainError(std::string(what) + " must be a unit vector (norm " + std::to_string(n) + ")");
}

struct DipoleOrientation {
    std::string label;
    Vec3 unit_vector{};

    static DipoleOrientation transversal() {
        const double s = std::sqrt(3.0);
        return {"transversal", {0.0, std::sqrt(2.0) / s, 1.0 / s}};
    }
    static DipoleOrientation axial() {
        const double s = std::sqrt(3.0);
        return {"axial", {std::sqrt(2.0) / s, 0.0, 1.0 / s}};
    }
    static DipoleOrientation hundred() {
        const double s = 1.0 / std::sqrt(3.0);
        return {"hundred", {s, s, s}};
    }
    static DipoleOrientation from_label(const std::string& name) {
        if (name == "transversal") return transversal();
        if (name == "axial") return axial();
        if (name == "hundred") return hundred();
        throw UsageError("unknown dipole orientation '" + name + "' (expected transversal, axial or hundred)");
    }
};

/// zeta = |d . E|^2 for unit dipole and field directions.
inline double polarization_mismatch(const Vec3& dipole, const Vec3& e_hat) {
    require_unit(dipole, "polarization_mismatch: dipole");
    require_unit(e_hat, "polarization_mismatch: field direction");
    const double p = dot(dipole, e_hat);
    return std::min(1.0, p * p);
}
inline double polarization_mismatch(const DipoleOrientation& dipole, const Vec3& e_hat) {
    return polarization_mismatch(dipole.unit_vector, e_hat);
}

struct FieldSample {
    Vec3 position{};  ///< nm
    double u_sq = 0.0;
    Vec3 e_hat{};

    void validate() const {
        if (!(u_sq >= 0.0 && u_sq <= 1.0)) throw DomainError("FieldSample: u_sq must lie in [0, 1]");
        require_unit(e_hat, "FieldSample: e_hat");
    }
};

struct CooperativityMap {
    std::vector<double> C;  ///< one value per input sample
    std::size_t argmax = 0;
    double max = 0.0;
};

/// C(x) = F_p beta0 zeta(x) u^2(x) with F_p = 3/(4 pi^2) Q/V.
inline CooperativityMap cooperativity_map(const std::vector<FieldSample>& samples, double Q, double v_norm,
                                          double beta0, const DipoleOrientation& dipole) {
    if (samples.empty()) throw DomainError("cooperativity_map: empty field grid");
    const double fp = purcell_factor(Q, v_norm);
    CooperativityMap out;
    out.C.reserve(samples.size());
    for (std::size_t k = 0; k < samples.size(); ++k) {
        samples[k].validate();
        const double zeta = polarization_mismatch(dipole, samples[k].e_hat);
        const double c = cooperativity_from_geometry(fp, beta0, samples[k].u_sq, zeta);
        out.C.push_back(c);
        if (k == 0 || c > out.max) {
            out.max = c;
            out.argmax = k;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// External beta factor
// ---------------------------------------------------------------------------

struct ContourSet {
    std::string quantity;  ///< "beta_e" or "tau"
    double level = 0.0;
    std::vector<contour::Polyline> lines;  ///< x = kappa_e, y = kappa_i
};

struct BetaMap {
    std::vector<double> kappa_e;  ///< columns, GHz
    std::vector<double> kappa_i;  ///< rows, GHz
    std::vector<double> C;        ///< row-major [i_row * kappa_e.size() + j_col]
    std::vector<double> beta_e;
    std::vector<double> tau;      ///< ns
    std::vector<ContourSet> contours;

    std::size_t index(std::size_t row, std::size_t col) const { return row * kappa_e.size() + col; }
};

inline BetaMap external_beta_map(const std::vector<double>& kappa_e_grid, const std::vector<double>& kappa_i_grid,
                                 double g, double gamma0, double tau0, const std::vector<double>& beta_levels = {},
                                 const std::vector<double>& tau_levels = {}) {
    if (kappa_e_grid.empty() || kappa_i_grid.empty()) throw DomainError("external_beta_map: empty grid");
    auto check_grid = [](const std::vector<double>& v, const char* name) {
        for (std::size_t k = 0; k < v.size(); ++k) {
            if (!std::isfinite(v[k]) || v[k] < 0.0)
                throw DomainError(std::string("external_beta_map: ") + name + " must be finite and >= 0");
            if (k > 0 && !(v[k] > v[k - 1]))
                throw DomainError(std::string("external_beta_map: ") + name + " must be strictly increasing");
        }
    };
    check_grid(kappa_e_grid, "kappa_e grid");
    check_grid(kappa_i_grid, "kappa_i grid");
    if (!(g >= 0.0) || !(gamma0 > 0.0) || !(tau0 > 0.0))
        throw DomainError("external_beta_map: need g >= 0, gamma0 > 0, tau0 > 0");

    BetaMap m;
    m.kappa_e = kappa_e_grid;
    m.kappa_i = kappa_i_grid;
    const std::size_t n = kappa_e_grid.size() * kappa_i_grid.size();
    m.C.resize(n);
    m.beta_e.resize(n);
    m.tau.resize(n);
    for (std::size_t i = 0; i < kappa_i_grid.size(); ++i) {
        for (std::size_t j = 0; j < kappa_e_grid.size(); ++j) {
            const double kappa = kappa_e_grid[j] + kappa_i_grid[i];
            if (!(kappa > 0.0)) throw DomainError("external_beta_map: kappa_e + kappa_i must be > 0");
            const double C = cooperativity(g, kappa, gamma0);
            const auto k = m.index(i, j);
            m.C[k] = C;
            m.beta_e[k] = beta_factors(C, kappa_e_grid[j], kappa).beta_e;
            m.tau[k] = tau0 / (C + 1.0);
        }
    }
    for (double level : beta_levels) m.contours.push_back({"beta_e", level, contour::iso_lines(m.kappa_e, m.kappa_i, m.beta_e, level)});
    for (double level : tau_levels) m.contours.push_back({"tau", level, contour::iso_lines(m.kappa_e, m.kappa_i, m.tau, level)});
    return m;
}

struct OptimalCoupling {
    double kappa_e_star = 0.0;  ///< GHz
    double beta_e_star = 0.0;
    double beta_e_numeric = 0.0;  ///< bounded golden-section cross-check
};

/// beta_e as a function of kappa_e at fixed kappa_i:
/// kappa_e K / ((kappa_e + kappa_i)(kappa_e + kappa_i + K)), K = 4 g^2 / gamma0.
inline double external_beta(double kappa_e, double kappa_i, double g, double gamma0) {
    const double K = 4.0 * g * g / gamma0;
    const double kappa = kappa_e + kappa_i;
    if (!(kappa > 0.0)) return 0.0;
    return kappa_e * K / (kappa * (kappa + K));
}

/// kappa_e* = sqrt(kappa_i (kappa_i + 4 g^2/gamma0)) maximises beta_e.
inline OptimalCoupling optimal_kappa_e(double kappa_i, double g, double gamma0) {
    if (!(kappa_i > 0.0) || !(g > 0.0) || !(gamma0 > 0.0) || !std::isfinite(kappa_i) || !std::isfinite(g) ||
        !std::isfinite(gamma0))
        throw DomainError("optimal_kappa_e: inputs must be finite and > 0");
    const double K = 4.0 * g * g / gamma0;
    OptimalCoupling out;
    out.kappa_e_star = std::sqrt(kappa_i * (kappa_i + K));
    out.beta_e_star = external_beta(out.kappa_e_star, kappa_i, g, gamma0);
    const double hi = 4.0 * out.kappa_e_star + kappa_i;
    const auto num = search::golden_minimize([&](double ke) { return -external_beta(ke, kappa_i, g, gamma0); }, 0.0,
                                             hi, 1e-9 * hi);
    out.beta_e_numeric = -num.value;
    return out;
}

// ---------------------------------------------------------------------------
// Reflection dip search
// ---------------------------------------------------------------------------

struct EnvelopePoint {
    double delta_ce = 0.0;  ///< omega_c - omega_a, GHz
    double peak = 0.0;      ///< local maximum of R near the emitter line
    double peak_omega = 0.0;
    double dip = 0.0;       ///< local minimum of R near the emitter line
    double dip_omega = 0.0;
};

struct DipSearch {
    double min_reflection = 0.0;
    double at_delta_ce = 0.0;
    double at_omega = 0.0;  ///< laser frequency of the minimum, same frame as omega_c
    std::vector<EnvelopePoint> envelope;
};

namespace detail {

struct ReflectionAtDetuning {
    CqedParams q;
    double emitter_center = 0.0;
    double emitter_width = 0.0;

    ReflectionAtDetuning(const CqedParams& p, double delta_ce) : q(p) {
        q.omega_a = p.omega_c - delta_ce;
        emitter_width = q.gamma() * (1.0 + cooperativity(q.g, q.kappa, q.gamma()) * spectral_mismatch(delta_ce, q.kappa));
        emitter_center = q.omega_a - scattering_peak_detuning(q.g, q.kappa, delta_ce);
    }

    double operator()(double omega) const { return response_amplitudes(omega, q).R; }
};

/// Scan `n` points on [lo, hi], then refine the best cell by golden section.
template <class F>
search::ScalarOptimum scan_refine(F&& f, double lo, double hi, std::size_t n, bool maximize, double tol) {
    const double sgn = maximize ? -1.0 : 1.0;
    auto obj = [&](double x) {
        const double v = f(x);
        if (!std::isfinite(v)) throw NumericError("dip_search: reflection not finite at omega " + std::to_string(x));
        return sgn * v;
    };
    auto r = search::grid_golden_minimize(obj, lo, hi, n, tol);
    r.value *= sgn;
    return r;
}

}  // namespace detail

/// Per-detuning emitter peak and dip of R(omega), as drawn in the envelope plot.
inline EnvelopePoint reflection_envelope(const CqedParams& p, double delta_ce) {
    const detail::ReflectionAtDetuning R(p, delta_ce);
    const double half = 20.0 * R.emitter_width + std::abs(R.emitter_center - R.q.omega_a);
    const double tol = 1e-9 * std::max(1.0, R.emitter_width);
    const auto hi = detail::scan_refine(R, R.emitter_center - half, R.emitter_center + half, 801, true, tol);
    const auto lo = detail::scan_refine(R, R.emitter_center - half, R.emitter_center + half, 801, false, tol);
    return {delta_ce, hi.value, hi.x, lo.value, lo.x};
}

/// Minimum of min_omega R(omega) over delta_ce in [lo, hi]; the emitter sits
/// at omega_c - delta_ce. The inner search combines a wide grid covering the
/// cavity dip with a fine grid around the dressed emitter line.
inline DipSearch dip_search(const CqedParams& p, double delta_ce_lo, double delta_ce_hi, std::size_t n_outer = 801) {
    p.validate();
    if (!(p.kappa > 0.0) || !(p.gamma() > 0.0)) throw DomainError("dip_search: kappa and gamma must be > 0");
    if (!std::isfinite(delta_ce_lo) || !std::isfinite(delta_ce_hi) || !(delta_ce_lo <= delta_ce_hi))
        throw DomainError("dip_search: invalid detuning interval");
    if (n_outer < 3) n_outer = 3;

    auto inner = [&](double delta_ce) {
        const detail::ReflectionAtDetuning R(p, delta_ce);
        const double left = std::min(p.omega_c, R.q.omega_a) - 3.0 * p.kappa;
        const double right = std::max(p.omega_c, R.q.omega_a) + 3.0 * p.kappa;
        const double tol_wide = 1e-9 * std::max(1.0, p.kappa);
        auto best = detail::scan_refine(R, left, right, 2001, false, tol_wide);
        const double half = 20.0 * R.emitter_width + std::abs(R.emitter_center - R.q.omega_a);
        const auto fine = detail::scan_refine(R, R.emitter_center - half, R.emitter_center + half, 801, false,
                                              1e-9 * std::max(1.0, R.emitter_width));
        if (fine.value < best.value) best = fine;
        const double at_cavity = R(p.omega_c);
        if (at_cavity < best.value) best = {p.omega_c, at_cavity, 0};
        return best;
    };

    DipSearch out;
    const double step = (delta_ce_hi - delta_ce_lo) / static_cast<double>(n_outer - 1);
    std::size_t best_k = 0;
    double best_val = INFINITY, best_omega = p.omega_c;
    for (std::size_t k = 0; k < n_outer; ++k) {
        const double dce = delta_ce_lo + step * static_cast<double>(k);
        const auto r = inner(dce);
        if (r.value < best_val) {
            best_val = r.value;
            best_omega = r.x;
            best_k = k;
        }
        out.envelope.push_back(reflection_envelope(p, dce));
    }
    out.min_reflection = best_val;
    out.at_delta_ce = delta_ce_lo + step * static_cast<double>(best_k);
    out.at_omega = best_omega;
    if (step > 0.0) {
        const double a = delta_ce_lo + step * static_cast<double>(best_k == 0 ? 0 : best_k - 1);
        const double b = delta_ce_lo + step * static_cast<double>(std::min(best_k + 1, n_outer - 1));
        const auto refined = search::golden_minimize([&](double dce) { return inner(dce).value; }, a, b,
                                                     1e-9 * std::max(1.0, p.kappa));
        if (refined.value < out.min_reflection) {
            out.min_reflection = refined.value;
            out.at_delta_ce = refined.x;
            out.at_omega = inner(refined.x).x;
        }
    }
    if (!std::isfinite(out.min_reflection)) throw NumericError("dip_search: search did not produce a finite minimum");
    return out;
}

}  // namespace cqed::design
