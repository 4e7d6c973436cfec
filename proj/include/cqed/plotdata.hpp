#pragma once

// Curve data for the figure views: model overlays sampled at 1001
// points, histograms, maps and contour/envelope polylines. Parameters default
// to the values quoted for the two characterised cavities and can be
// overridden key by key from a JSON object.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cqed/core.hpp"
#include "cqed/design.hpp"
#include "cqed/errors.hpp"
#include "cqed/io.hpp"
#include "cqed/pipeline.hpp"
#include "cqed/synth.hpp"

namespace cqed::plot {

using io::json;

struct Table {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
};

struct PlotData {
    std::string view;
    std::vector<Table> tables;
    json extra = json::object();  ///< contour polylines and parameters used
};

inline const std::vector<std::string>& views() {
    static const std::vector<std::string> v{"fig2c", "fig3c", "fig4b", "fig4c", "fig4d",
                                            "fig4e", "fig5a", "fig5b", "fig5c", "fig14"};
    return v;
}

inline constexpr std::size_t curve_points = 1001;

namespace detail {


inline CqedParams cavity(double g, double kappa, double kappa_e, double gamma0, double gamma) {
    CqedParams p;
    p.g = g;
    p.kappa = kappa;
    p.kappa_e = kappa_e;
    p.gamma0 = gamma0;
    p.gamma_dep = std::max(0.0, gamma - gamma0);
    return p;
}

}  // namespace detail

/// `fleet` supplies measured statistics for fig2c; without it a seeded
/// synthetic batch is generated.
inline PlotData emit_plotdata(const std::string& view, const json& config = json::object(),
                              const pipeline::FleetStatistics* fleet = nullptr, std::uint64_t seed = 1) {
    io::Config cfg(config, "plot configuration");
    PlotData out;
    out.view = view;
    const std::size_t n = curve_points;

    if (view == "fig2c") {
        pipeline::FleetStatistics st;
        pipeline::FleetOptions fo;
        fo.q_bin_width = cfg.num("q_bin_width", fo.q_bin_width);
        if (fleet) {
            st = *fleet;
        } else {
            synth::Rng rng(seed);
            auto f = pipeline::synthetic_fleet(pipeline::FleetSpec{}, rng);
            pipeline::batch_fit(f.records);
            st = pipeline::fleet_statistics(f.records, fo);
        }
        Table t{"histogram", {"q_lo", "q_hi", "count"}, {{}, {}, {}}};
        for (const auto& b : st.histogram) {
            t.columns[0].push_back(b.lo);
            t.columns[1].push_back(b.hi);
            t.columns[2].push_back(static_cast<double>(b.count));
        }
        out.tables.push_back(std::move(t));
        out.extra["q_mean"] = io::num(st.q_mean);
        out.extra["q_std"] = io::num(st.q_std);
        out.extra["censored"] = st.censored;
    } else if (view == "fig3c") {
        const double tau0 = cfg.num("tau0", 6.5), C = cfg.num("C", 20.6), kappa = cfg.num("kappa", 28.6);
        const double span = cfg.num("span", 100.0);
        const auto x = synth::linspace(-span, span, n);
        std::vector<double> tau;
        for (double d : x) tau.push_back(purcell_lifetime(tau0, C, d, kappa));
        out.tables.push_back({"lifetime", {"delta_ce_GHz", "tau_ns"}, {x, tau}});
    } else if (view == "fig4b" || view == "fig4c") {
        const bool bare = view == "fig4c";
        const double g = bare ? 0.0 : cfg.num("g", 1.94);
        const double kappa = cfg.num("kappa", 19.0), gamma = cfg.num("gamma", 0.0975);
        const double span = cfg.num("span", bare ? 60.0 : 1.5);
        const auto x = synth::linspace(-span, span, n);
        std::vector<double> t, tb;
        for (double w : x) {
            t.push_back(synth::transmission_shape(w, g, kappa, gamma, 0.0, 0.0));
            tb.push_back(synth::transmission_shape(w, 0.0, kappa, gamma, 0.0, 0.0));
        }
        if (bare)
            out.tables.push_back({"transmission", {"detuning_GHz", "T_rel"}, {x, t}});
        else
            out.tables.push_back({"transmission", {"detuning_GHz", "T_rel", "T_bare_rel"}, {x, t, tb}});
        if (!bare) out.extra["dip_contrast"] = io::num(1.0 - t[n / 2] / tb[n / 2]);
    } else if (view == "fig4d") {
        const double g = cfg.num("g", 1.94), kappa = cfg.num("kappa", 19.0), gamma = cfg.num("gamma", 0.0975);
        const auto detunings = cfg.list("delta_ce", {0.0, 5.0, 12.0, 20.0});
        const double span = cfg.num("span", 40.0);
        const auto x = synth::linspace(-span, span, n);
        Table t{"transmission", {"laser_cavity_detuning_GHz"}, {x}};
        for (double d : detunings) {
            std::vector<double> col;
            for (double w : x) col.push_back(synth::transmission_shape(w, g, kappa, gamma, 0.0, -d));
            t.header.push_back("T_rel_delta_" + io::fmt(d));
            t.columns.push_back(std::move(col));
        }
        out.tables.push_back(std::move(t));
    } else if (view == "fig4e") {
        const double gamma = cfg.num("gamma", 0.0975), C_coh = cfg.num("C_coh", 8.13), kappa = cfg.num("kappa", 19.0);
        const double span = cfg.num("span", 60.0);
        const auto x = synth::linspace(-span, span, n);
        std::vector<double> gp;
        for (double d : x) gp.push_back(enhanced_rate(gamma, C_coh, d, kappa));
        out.tables.push_back({"linewidth", {"delta_ce_GHz", "gamma_prime_GHz"}, {x, gp}});
    } else if (view == "fig5a") {
        const double Q = cfg.num("Q", 25400.0), V = cfg.num("V_norm", 0.45), beta0 = cfg.num("beta0", 0.3648);
        const auto couplings = cfg.list("kappa_e_over_kappa", {0.21, 0.31});
        const double fp = purcell_factor(Q, V);
        const auto x = synth::linspace(0.0, 1.0, n);
        Table t{"beta_e", {"u2_zeta", "C"}, {x, {}}};
        for (double u : x) t.columns[1].push_back(cooperativity_from_geometry(fp, beta0, u, 1.0));
        for (double eta : couplings) {
            if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("fig5a: kappa_e_over_kappa must lie in [0, 1]");
            std::vector<double> col;
            for (double C : t.columns[1]) col.push_back(eta * C / (C + 1.0));
            t.header.push_back("beta_e_" + io::fmt(eta));
            t.columns.push_back(std::move(col));
        }
        out.tables.push_back(std::move(t));
        out.extra["purcell_factor"] = io::num(fp);
    } else if (view == "fig5b") {
        const double g = cfg.num("g", 1.94), gamma0 = cfg.num("gamma0", 0.0245), tau0 = cfg.num("tau0", 6.5);
        const double ke_max = cfg.num("kappa_e_max", 1200.0), ki_max = cfg.num("kappa_i_max", 1200.0);
        const std::size_t m = cfg.count("grid_points", 121, 2);
        const auto ke = synth::linspace(0.0, ke_max, m);
        const auto ki = synth::linspace(ki_max / static_cast<double>(m), ki_max, m);
        const auto map = design::external_beta_map(ke, ki, g, gamma0, tau0, cfg.list("beta_levels", {0.2, 0.5, 0.8}),
                                                   cfg.list("tau_levels", {0.5, 2.0, 4.0}));
        Table t{"grid", {"kappa_e_GHz", "kappa_i_GHz", "C", "beta_e", "tau_ns"}, {{}, {}, {}, {}, {}}};
        for (std::size_t i = 0; i < ki.size(); ++i)
            for (std::size_t j = 0; j < ke.size(); ++j) {
                const auto k = map.index(i, j);
                t.columns[0].push_back(ke[j]);
                t.columns[1].push_back(ki[i]);
                t.columns[2].push_back(map.C[k]);
                t.columns[3].push_back(map.beta_e[k]);
                t.columns[4].push_back(map.tau[k]);
            }
        out.tables.push_back(std::move(t));
        out.extra["contours"] = io::to_json(map.contours);
    } else if (view == "fig5c") {
        const double kappa = cfg.num("kappa", 50.0);
        const auto p = detail::cavity(cfg.num("g", 0.99), kappa, cfg.num("kappa_e_over_kappa", 0.31) * kappa,
                                      cfg.num("gamma0", 0.018), cfg.num("gamma", 0.052));
        const auto detunings = cfg.list("delta_ce", {0.0, 10.0, 20.0, 30.0});
        const double span = cfg.num("span", 75.0);
        const std::size_t m = cfg.count("envelope_points", 301, 2);
        const auto x = synth::linspace(-span, span, n);
        Table t{"reflection", {"laser_cavity_detuning_GHz"}, {x}};
        for (double d : detunings) {
            CqedParams q = p;
            q.omega_a = -d;
            std::vector<double> col;
            for (double w : x) col.push_back(response_amplitudes(w, q).R);
            t.header.push_back("R_delta_" + io::fmt(d));
            t.columns.push_back(std::move(col));
        }
        out.tables.push_back(std::move(t));
        Table e{"envelope", {"delta_ce_GHz", "peak_detuning_GHz", "peak_R", "dip_detuning_GHz", "dip_R"},
                {{}, {}, {}, {}, {}}};
        for (double d : synth::linspace(-span, span, m)) {
            const auto pt = design::reflection_envelope(p, d);
            e.columns[0].push_back(d);
            e.columns[1].push_back(pt.peak_omega);
            e.columns[2].push_back(pt.peak);
            e.columns[3].push_back(pt.dip_omega);
            e.columns[4].push_back(pt.dip);
        }
        out.tables.push_back(std::move(e));
    } else if (view == "fig14") {
        CqedParams p = detail::cavity(cfg.num("g", 1.94), cfg.num("kappa", 18.7), 0.0, cfg.num("gamma0", 0.02437),
                                      cfg.num("gamma", 0.02437));
        p.kappa_in = cfg.num("kappa_in", p.kappa / 2.0);
        const double dspan = cfg.num("detuning_span", 0.5), cspan = cfg.num("delta_ce_span", 60.0);
        const std::size_t nd = cfg.count("detuning_points", 201, 2), nc = cfg.count("delta_ce_points", 121, 2);
        const auto dx = synth::linspace(-dspan, dspan, nd);
        const auto cx = synth::linspace(-cspan, cspan, nc);
        Table grid{"grid", {"delta_ce_GHz", "laser_detuning_GHz", "S"}, {{}, {}, {}}};
        Table ridge{"ridge", {"delta_ce_GHz", "argmax_laser_detuning_GHz", "analytic_laser_detuning_GHz", "S_max"},
                    {{}, {}, {}, {}}};
        for (double c : cx) {
            for (double d : dx) {
                grid.columns[0].push_back(c);
                grid.columns[1].push_back(d);
                grid.columns[2].push_back(scattering_intensity(d, c, p));
            }
            const auto peak = scattering_peak_envelope(c, p);
            ridge.columns[0].push_back(c);
            ridge.columns[1].push_back(peak.laser_detuning);
            ridge.columns[2].push_back(-scattering_peak_detuning(p.g, p.kappa, c));
            ridge.columns[3].push_back(peak.value);
        }
        out.tables.push_back(std::move(grid));
        out.tables.push_back(std::move(ridge));
    } else {
        std::string list;
        for (const auto& v : views()) list += (list.empty() ? "" : ", ") + v;
        throw UsageError("unknown view '" + view + "' (available: " + list + ")");
    }
    cfg.finish("view " + view);
    out.extra["parameters"] = cfg.raw();
    return out;
}

inline json to_json(const PlotData& pd) {
    json tables = json::object();
    for (const auto& t : pd.tables) {
        json cols = json::object();
        for (std::size_t k = 0; k < t.header.size(); ++k) cols[t.header[k]] = io::num_array(t.columns[k]);
        tables[t.name] = cols;
    }
    json j = {{"view", pd.view}, {"tables", tables}};
    for (const auto& [key, v] : pd.extra.items()) j[key] = v;
    return j;
}

}  // namespace cqed::plot
