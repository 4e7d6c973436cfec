// cqedtool: command-line front end of the cavity-QED toolkit.
//
//   cqedtool [--input F] [--output F] [--config F.json] [--seed N] [--format csv|json] VERB SUB
//
// Exit codes: 0 success, 2 usage or configuration, 3 data, 4 numeric failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "cqed/cqed.hpp"

using namespace cqed;
using io::json;

namespace {

struct Globals {
    std::string input;
    std::string output = "-";
    std::string config;
    std::uint64_t seed = 1;
    std::string format;  // empty: the command's natural format
};

enum class Format { csv, json };

class Run {
public:
    Run(const Globals& g, std::string context)
        : g_(g), context_(std::move(context)), cfg_(g.config.empty() ? json::object() : io::read_json_file(g.config),
                      g.config.empty() ? "configuration" : g.config) {}

    io::Config& cfg() { return cfg_; }
    std::uint64_t seed() const { return g_.seed; }

    const std::string& input(const std::string& what) const {
        if (g_.input.empty()) throw UsageError("--input is required (" + what + ")");
        return g_.input;
    }
    bool has_input() const { return !g_.input.empty(); }

    Format format(Format natural) const {
        if (g_.format.empty()) return natural;
        return g_.format == "csv" ? Format::csv : Format::json;
    }

    /// Configuration keys are checked before the first byte is written.
    std::ostream& out() {
        if (!checked_) {
            cfg_.finish(context_);
            checked_ = true;
        }
        if (g_.output == "-") return std::cout;
        if (!file_) file_ = std::make_unique<std::ofstream>(io::open_output(g_.output));
        return *file_;
    }

    /// For commands whose configuration is validated elsewhere.
    void config_checked() { checked_ = true; }

    void finish() {
        out().flush();
        if (!out()) throw UsageError("failed writing output '" + g_.output + "'");
    }

private:
    Globals g_;
    std::string context_;
    io::Config cfg_;
    bool checked_ = false;
    std::unique_ptr<std::ofstream> file_;
};

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fit::FitControl fit_control(io::Config& c) {
    fit::FitControl fc;
    const auto w = c.str("weighting", "unweighted");
    if (w == "unweighted")
        fc.weighting = fit::Weighting::unweighted;
    else if (w == "poisson")
        fc.weighting = fit::Weighting::poisson;
    else if (w == "trace")
        fc.weighting = fit::Weighting::trace;
    else
        throw ConfigError("weighting must be unweighted, poisson or trace (got '" + w + "')");
    fc.initial = c.numbers("initial");
    fc.solver.max_iter = static_cast<int>(c.count("max_iter", static_cast<std::size_t>(fc.solver.max_iter), 1));
    return fc;
}

std::set<std::size_t> exclusions(io::Config& c) {
    std::set<std::size_t> out;
    for (double v : c.list("exclude", {})) {
        if (!(v >= 0.0) || v != std::floor(v)) throw ConfigError("exclude must list zero-based row indices");
        out.insert(static_cast<std::size_t>(v));
    }
    return out;
}

design::CavityDesign design_from_config(io::Config& c) {
    design::CavityDesign d;
    d.a = c.num("a_nm", d.a);
    d.r = c.num("r_nm", d.r);
    d.w_wg = c.num("w_wg_nm", d.w_wg);
    d.t_h = c.num("t_h_nm", d.t_h);
    d.d = c.num("d", d.d);
    d.eta = c.num("eta", d.eta);
    d.N = static_cast<int>(c.count("N", static_cast<std::size_t>(d.N)));
    d.M_s = static_cast<int>(c.count("M_s", static_cast<std::size_t>(d.M_s)));
    d.M_w = static_cast<int>(c.count("M_w", static_cast<std::size_t>(d.M_w)));
    d.L = static_cast<int>(c.count("L", static_cast<std::size_t>(d.L)));
    d.r_min_wg = c.num("r_min_wg_nm", d.r_min_wg);
    d.scaling = c.num("scaling_percent", d.scaling);
    d.validate();
    return d;
}

CqedParams cavity_from_config(io::Config& c, double g, double kappa, double kappa_e_over_kappa, double gamma0,
                              double gamma) {
    CqedParams p;
    p.g = c.num("g", g);
    p.kappa = c.num("kappa", kappa);
    p.kappa_e = c.num("kappa_e_over_kappa", kappa_e_over_kappa) * p.kappa;
    p.gamma0 = c.num("gamma0", gamma0);
    p.gamma_dep = c.num("gamma", std::max(gamma, p.gamma0)) - p.gamma0;
    if (p.gamma_dep < 0.0) throw ConfigError("gamma must be >= gamma0");
    p.validate();
    return p;
}

void write_table_csv(std::ostream& out, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& cols) {
    io::write_csv(out, header, cols);
}

void write_fit(Run& run, const fit::FitResult& fr) {
    if (run.format(Format::json) == Format::json) {
        io::write_json(run.out(), io::to_json(fr));
        return;
    }
    auto& out = run.out();
    out << "name,kind,value,stderr\n";
    for (std::size_t i = 0; i < fr.size(); ++i)
        out << fr.names[i] << ',' << (fr.fixed[i] ? "fixed" : "parameter") << ',' << io::fmt(fr.params[i]) << ','
            << io::fmt(fr.stderr[i]) << '\n';
    for (const auto& [name, e] : fr.derived)
        out << name << ",derived," << io::fmt(e.value) << ',' << io::fmt(e.stderr) << '\n';
}

void report_warnings(const fit::FitResult& fr) {
    for (const auto& w : fr.warnings) std::cerr << "warning: " << w << '\n';
    if (!fr.converged) std::cerr << "warning: fit did not converge\n";
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

void simulate_spectrum(Run& run) {
    auto& c = run.cfg();
    synth::Rng rng(run.seed());
    const auto kind = c.str("kind", "lorentzian");
    SampledTrace tr;
    if (kind == "lorentzian") {
        synth::LorentzianSpec s;
        s.center = c.num("center_nm", s.center);
        s.fwhm = c.num("fwhm_nm", s.fwhm);
        s.amplitude = c.num("amplitude", s.amplitude);
        s.slope = c.num("slope", s.slope);
        s.offset = c.num("offset", s.offset);
        s.span = c.num("span_nm", s.span);
        s.n = c.count("points", s.n, 2);
        s.noise_sd = c.num("noise_sd", s.noise_sd);
        tr = synth::lorentzian_spectrum(s, rng);
    } else if (kind == "decay") {
        synth::DecaySpec s;
        s.tau = c.num("tau_ns", s.tau);
        s.amplitude = c.num("amplitude", s.amplitude);
        s.background = c.num("background", s.background);
        s.t0 = c.num("t0_ns", s.t0);
        s.sigma = c.num("sigma_ns", s.sigma);
        s.bin = c.num("bin_ns", s.bin);
        s.n = c.count("points", s.n, 2);
        s.noise_sd = c.num("noise_sd", s.noise_sd);
        tr = synth::decay_histogram(s, rng);
    } else if (kind == "transmission") {
        CqedParams p = cavity_from_config(run.cfg(), 1.94, 19.0, 0.5, 0.0245, 0.0975);
        p.omega_c = c.num("omega_c", 0.0);
        p.omega_a = c.num("omega_a", 0.0);
        const double scale = c.num("scale", 1000.0);
        tr = synth::transmission_scan(p, scale, c.num("lo", -40.0), c.num("hi", 40.0), c.count("points", 2001, 2),
                                      c.num("noise_sd", 0.0), rng);
    } else if (kind == "reflection") {
        tr = synth::reflection_scan(c.num("kappa_e_over_kappa", 0.21), c.num("kappa", 19.0), c.num("amplitude", 1000.0),
                                    c.num("background", 21.9), c.num("omega_c", 0.0), c.num("lo", -60.0),
                                    c.num("hi", 60.0), c.count("points", 1201, 2), c.num("noise_sd", 0.0), rng);
    } else {
        throw ConfigError("kind must be lorentzian, decay, transmission or reflection (got '" + kind + "')");
    }
    if (run.format(Format::csv) == Format::csv) {
        io::write_trace(run.out(), tr);
    } else {
        io::write_json(run.out(), {{"kind", to_string(tr.kind)}, {"unit", tr.unit}, {"x", io::num_array(tr.x)},
                                   {"counts", io::num_array(tr.y)}});
    }
    run.finish();
}

void simulate_bloch(Run& run) {
    auto& c = run.cfg();
    CqedParams p = cavity_from_config(c, 1.94, 19.0, 0.5, 0.0245, 0.0245);
    const complex Y(c.num("Y_re", 0.0), c.num("Y_im", 0.0));
    const bloch::DriveSpec drive{Y, c.num("delta", 0.0), c.num("delta_c", 0.0)};
    const auto initial = c.str("initial", "excited");
    bloch::BlochState s0;
    if (initial == "excited")
        s0 = bloch::BlochState::excited();
    else if (initial == "ground")
        s0 = bloch::BlochState::ground();
    else
        throw ConfigError("initial must be excited or ground (got '" + initial + "')");
    const double t_end = c.num("t_end_ns", 10.0);
    const double dt = c.num("dt_ns", 0.05 / bloch::fastest_rate(drive, p));
    const auto every = c.count("record_every", 1, 1);
    const auto tr = bloch::integrate(s0, drive, p, t_end, dt, every);
    if (tr.physicality_violations > 0)
        std::cerr << "warning: " << tr.physicality_violations << " steps left the Bloch ball, first at t = "
                  << io::fmt(*tr.first_violation_t) << " ns\n";
    if (!tr.diagnostics.weak_drive) std::cerr << "warning: |Y| > 0.1, outside the weak-drive regime\n";
    if (tr.diagnostics.large_kappa_warning)
        std::cerr << "warning: kappa/gamma0 = " << io::fmt(tr.diagnostics.kappa_over_gamma0)
                  << " is small for adiabatic elimination\n";

    std::vector<std::vector<double>> cols(4);
    for (const auto& pt : tr.points) {
        cols[0].push_back(pt.t);
        cols[1].push_back(pt.state.sigma_ge.real());
        cols[2].push_back(pt.state.sigma_ge.imag());
        cols[3].push_back(pt.state.sigma_z);
    }
    const std::vector<std::string> header{"t_ns", "re_sigma_ge", "im_sigma_ge", "sigma_z"};
    if (run.format(Format::csv) == Format::csv) {
        write_table_csv(run.out(), header, cols);
    } else {
        json j = json::object();
        for (std::size_t k = 0; k < header.size(); ++k) j[header[k]] = io::num_array(cols[k]);
        j["physicality_violations"] = tr.physicality_violations;
        j["weak_drive"] = tr.diagnostics.weak_drive;
        j["kappa_over_gamma0"] = io::num(tr.diagnostics.kappa_over_gamma0);
        io::write_json(run.out(), j);
    }
    run.finish();
}

void simulate_views(Run& run, const std::string& view) {
    std::optional<pipeline::FleetStatistics> fleet;
    if (run.has_input()) {
        if (view != "fig2c") throw UsageError("--input is only read by view fig2c (a device manifest)");
        auto records = pipeline::load_manifest(run.input("manifest"));
        pipeline::batch_fit(records);
        fleet = pipeline::fleet_statistics(records);
    }
    const auto pd = plot::emit_plotdata(view, run.cfg().raw(), fleet ? &*fleet : nullptr, run.seed());
    run.config_checked();
    if (run.format(Format::json) == Format::json) {
        io::write_json(run.out(), plot::to_json(pd));
    } else {
        auto& out = run.out();
        bool first = true;
        for (const auto& t : pd.tables) {
            if (!first) out << '\n';
            first = false;
            out << "# table: " << t.name << '\n';
            write_table_csv(out, t.header, t.columns);
        }
    }
    run.finish();
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

std::vector<double> series_column(const io::CsvTable& t, const std::string& name) {
    if (!t.has(name)) throw SchemaError(t.source + ": missing column '" + name + "'");
    return t.values(name);
}

void run_fit(Run& run, const std::string& model) {
    auto& c = run.cfg();
    fit::FitResult fr;
    if (model == "lorentzian") {
        fit::LorentzianOptions opt;
        opt.resolution_nm = c.num("resolution_nm", opt.resolution_nm);
        opt.control = fit_control(c);
        fr = fit::fit_lorentzian_linear(io::read_trace_file(run.input("spectrum CSV")), opt);
    } else if (model == "lifetime") {
        const auto tr = io::read_trace_file(run.input("decay histogram CSV"));
        fit::DecayOptions opt;
        if (auto s = c.opt_num("irf_sigma_ns")) opt.irf_sigma = *s;
        const double t_start = c.num("t_start_ns", tr.x.front());
        opt.control = fit_control(c);
        fr = fit::fit_exponential_decay(tr, t_start, opt);
    } else if (model == "lifetime-vs-detuning" || model == "linewidth-vs-detuning") {
        const bool lifetime = model == "lifetime-vs-detuning";
        const auto t = io::read_csv_file(run.input("detuning series CSV"));
        fit::SeriesOptions opt;
        const double kappa = c.required("kappa");
        opt.kappa_stderr = c.num("kappa_stderr", 0.0);
        opt.exclude = exclusions(c);
        opt.control = fit_control(c);
        const auto x = series_column(t, "delta_ce_GHz");
        if (lifetime)
            fr = fit::fit_lifetime_vs_detuning(x, series_column(t, "tau_ns"), kappa, opt);
        else
            fr = fit::fit_linewidth_vs_detuning(x, series_column(t, "gamma_prime_GHz"), kappa, opt);
    } else if (model == "transmission") {
        fit::TransmissionOptions opt;
        opt.bare = c.flag("bare", false);
        for (const auto& f : c.strings("fixed")) opt.fixed.insert(f);
        opt.lambda_nm = c.num("lambda_nm", opt.lambda_nm);
        opt.control = fit_control(c);
        fr = fit::fit_transmission_spectrum(io::read_trace_file(run.input("transmission scan CSV")), opt);
    } else if (model == "reflection") {
        fit::ReflectionOptions opt;
        const double bg = c.required("background_c");
        opt.control = fit_control(c);
        fr = fit::fit_reflection(io::read_trace_file(run.input("reflection scan CSV")), bg, opt);
    } else {
        throw UsageError("unknown fit model '" + model + "'");
    }
    report_warnings(fr);
    write_fit(run, fr);
    run.finish();
}

// ---------------------------------------------------------------------------
// design
// ---------------------------------------------------------------------------

void write_lattice(Run& run, const design::CavityDesign& d) {
    const auto lat = design::defect_lattice(d);
    if (run.format(Format::json) == Format::json) {
        io::write_json(run.out(), io::to_json(d, lat));
        return;
    }
    auto& out = run.out();
    out << "index,center_nm,radius_nm,lattice_nm,region\n";
    for (std::size_t i = 0; i < lat.holes.size(); ++i) {
        const auto& h = lat.holes[i];
        out << i << ',' << io::fmt(h.center_nm) << ',' << io::fmt(h.radius_nm) << ',' << io::fmt(h.lattice_nm) << ','
            << design::to_string(h.region) << '\n';
    }
}

void design_lattice(Run& run) {
    write_lattice(run, design_from_config(run.cfg()));
    run.finish();
}

void design_scale(Run& run) {
    auto& c = run.cfg();
    const double percent = c.required("percent");
    write_lattice(run, design::scale_design(design_from_config(c), percent));
    run.finish();
}

void design_beta_map(Run& run) {
    auto& c = run.cfg();
    const double g = c.num("g", 1.94), gamma0 = c.num("gamma0", 0.0245), tau0 = c.num("tau0", 6.5);
    const double ke_max = c.num("kappa_e_max", 1200.0), ki_max = c.num("kappa_i_max", 1200.0);
    const auto m = c.count("grid_points", 121, 2);
    const auto ke = synth::linspace(0.0, ke_max, m);
    const auto ki = synth::linspace(ki_max / static_cast<double>(m), ki_max, m);
    const auto map = design::external_beta_map(ke, ki, g, gamma0, tau0, c.list("beta_levels", {0.2, 0.5, 0.8}),
                                               c.list("tau_levels", {0.5, 2.0, 4.0}));
    if (run.format(Format::json) == Format::json) {
        json j{{"kappa_e", io::num_array(map.kappa_e)}, {"kappa_i", io::num_array(map.kappa_i)},
               {"C", io::num_array(map.C)},             {"beta_e", io::num_array(map.beta_e)},
               {"tau_ns", io::num_array(map.tau)},      {"contours", io::to_json(map.contours)}};
        if (auto k = c.opt_num("kappa_i")) {
            const auto opt = design::optimal_kappa_e(*k, g, gamma0);
            j["optimal"] = {{"kappa_i", io::num(*k)},
                            {"kappa_e_star", io::num(opt.kappa_e_star)},
                            {"beta_e_star", io::num(opt.beta_e_star)}};
        }
        io::write_json(run.out(), j);
    } else {
        c.opt_num("kappa_i");
        std::vector<std::vector<double>> cols(5);
        for (std::size_t i = 0; i < ki.size(); ++i)
            for (std::size_t j = 0; j < ke.size(); ++j) {
                const auto k = map.index(i, j);
                cols[0].push_back(ke[j]);
                cols[1].push_back(ki[i]);
                cols[2].push_back(map.C[k]);
                cols[3].push_back(map.beta_e[k]);
                cols[4].push_back(map.tau[k]);
            }
        write_table_csv(run.out(), {"kappa_e_GHz", "kappa_i_GHz", "C", "beta_e", "tau_ns"}, cols);
    }
    run.finish();
}

void design_dip_search(Run& run) {
    auto& c = run.cfg();
    const auto p = cavity_from_config(c, 0.99, 50.0, 0.31, 0.018, 0.052);
    const auto res = design::dip_search(p, c.num("delta_ce_lo", -75.0), c.num("delta_ce_hi", 75.0),
                                        c.count("n_outer", 801, 2));
    std::vector<std::vector<double>> cols(5);
    for (const auto& e : res.envelope) {
        cols[0].push_back(e.delta_ce);
        cols[1].push_back(e.peak_omega);
        cols[2].push_back(e.peak);
        cols[3].push_back(e.dip_omega);
        cols[4].push_back(e.dip);
    }
    const std::vector<std::string> header{"delta_ce_GHz", "peak_omega_GHz", "peak_R", "dip_omega_GHz", "dip_R"};
    if (run.format(Format::json) == Format::json) {
        json env = json::object();
        for (std::size_t k = 0; k < header.size(); ++k) env[header[k]] = io::num_array(cols[k]);
        io::write_json(run.out(), {{"min_reflection", io::num(res.min_reflection)},
                                   {"at_delta_ce_GHz", io::num(res.at_delta_ce)},
                                   {"at_omega_GHz", io::num(res.at_omega)},
                                   {"bare_reflection_min", io::num(bare_cavity_reflectivity(0.0, p.kappa, p.kappa_e))},
                                   {"envelope", env}});
    } else {
        write_table_csv(run.out(), header, cols);
    }
    run.finish();
}

void design_cooperativity(Run& run) {
    auto& c = run.cfg();
    const auto samples = io::read_field_file(run.input("field sample CSV"));
    const auto dipole = design::DipoleOrientation::from_label(c.str("dipole", "transversal"));
    const auto map = design::cooperativity_map(samples, c.num("Q", 25400.0), c.num("V_norm", 0.45),
                                               c.num("beta0", beta_zero(0.8, 0.57, 0.8)), dipole);
    if (run.format(Format::json) == Format::json) {
        io::write_json(run.out(), {{"dipole", dipole.label},
                                   {"C", io::num_array(map.C)},
                                   {"argmax", map.argmax},
                                   {"max", io::num(map.max)}});
    } else {
        std::vector<std::vector<double>> cols(4);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            cols[0].push_back(samples[i].position[0]);
            cols[1].push_back(samples[i].position[1]);
            cols[2].push_back(samples[i].position[2]);
            cols[3].push_back(map.C[i]);
        }
        write_table_csv(run.out(), {"x_nm", "y_nm", "z_nm", "C"}, cols);
    }
    run.finish();
}

// ---------------------------------------------------------------------------
// stats and report
// ---------------------------------------------------------------------------

void run_stats(Run& run) {
    auto& c = run.cfg();
    auto records = pipeline::load_manifest(run.input("device manifest JSON"));
    pipeline::BatchOptions bo;
    pipeline::FleetOptions fo;
    fo.resolution_nm = c.num("resolution_nm", fo.resolution_nm);
    fo.max_relative_q_error = c.num("max_relative_q_error", fo.max_relative_q_error);
    fo.q_bin_width = c.num("q_bin_width", fo.q_bin_width);
    bo.lorentzian.resolution_nm = fo.resolution_nm;
    bo.threads = static_cast<unsigned>(c.count("threads", 0));
    const bool with_devices = c.flag("devices", false);
    pipeline::batch_fit(records, bo);
    for (const auto& r : records)
        if (!r.error.empty()) std::cerr << "warning: " << r.key() << ": " << r.error << '\n';
    const auto st = pipeline::fleet_statistics(records, fo);
    if (run.format(Format::json) == Format::json) {
        json j = pipeline::to_json(st);
        if (with_devices) {
            json devs = json::array();
            for (const auto& r : records) devs.push_back(pipeline::to_json(r));
            j["devices"] = devs;
        }
        io::write_json(run.out(), j);
    } else {
        std::vector<std::vector<double>> cols(3);
        for (const auto& b : st.histogram) {
            cols[0].push_back(b.lo);
            cols[1].push_back(b.hi);
            cols[2].push_back(static_cast<double>(b.count));
        }
        write_table_csv(run.out(), {"q_lo", "q_hi", "count"}, cols);
    }
    run.finish();
}

void run_report(Run& run) {
    auto& c = run.cfg();
    const auto path = run.input("JSON object of named fit results");
    const auto j = io::read_json_file(path);
    if (!j.is_object()) throw SchemaError(path + ": expected an object of named fit results");
    std::map<std::string, fit::FitResult> fits;
    for (const auto& [name, v] : j.items()) fits[name] = io::fit_result_from_json(v, path + ": " + name);
    pipeline::ReportConstants k;
    k.V_norm = c.num("V_norm", k.V_norm);
    k.eta_Q = c.num("eta_Q", k.eta_Q);
    k.eta_DW = c.num("eta_DW", k.eta_DW);
    k.eta_BR = c.num("eta_BR", k.eta_BR);
    k.lambda_nm = c.num("lambda_nm", k.lambda_nm);
    if (c.has("M_w")) k.M_w = static_cast<int>(c.count("M_w", 0));
    const auto rep = pipeline::assemble_report(pipeline::inputs_from_fits(fits), k);
    for (const auto& name : rep.order)
        if (!rep[name].present) std::cerr << "note: row " << name << " absent (" << rep[name].source << ")\n";
    if (run.format(Format::json) == Format::json) {
        io::write_json(run.out(), pipeline::to_json(rep));
    } else {
        auto& out = run.out();
        out << "row,value,stderr,source\n";
        for (const auto& name : rep.order) {
            const auto& r = rep[name];
            out << name << ',' << io::fmt(r.value) << ',' << io::fmt(r.stderr) << ",\"" << r.source << "\"\n";
        }
    }
    run.finish();
}

int exit_code(ExitCode c) { return static_cast<int>(c); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cavity-QED modelling, fitting and device design toolkit"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--input,-i", g.input, "Input file (trace CSV, manifest or fit JSON)");
    app.add_option("--output,-o", g.output, "Output file, - for stdout")->capture_default_str();
    app.add_option("--config,-c", g.config, "JSON parameter file");
    app.add_option("--seed", g.seed, "Seed for synthetic noise")->capture_default_str();
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json"}));

    std::function<void(Run&)> action;
    std::string context;
    auto sub = [&](CLI::App* parent, const std::string& name, const std::string& help, std::function<void(Run&)> fn) {
        auto* s = parent->add_subcommand(name, help);
        s->fallthrough();
        const std::string where = parent == &app ? name : parent->get_name() + " " + name;
        s->callback([&action, &context, fn, where] {
            action = fn;
            context = where;
        });
        return s;
    };

    auto* simulate = app.add_subcommand("simulate", "Synthetic traces, Bloch trajectories and figure data");
    simulate->require_subcommand(1)->fallthrough();
    sub(simulate, "spectrum", "Synthetic trace (config kind: lorentzian, decay, transmission, reflection)",
        simulate_spectrum);
    sub(simulate, "bloch", "Integrate the adiabatically eliminated Bloch equations", simulate_bloch);
    std::string view;
    auto* views = sub(simulate, "fig-views", "Curve data behind the figures", [&view](Run& r) { simulate_views(r, view); });
    views->add_option("--view", view, "View name")->required()->check(CLI::IsMember(plot::views()));

    auto* fit_cmd = app.add_subcommand("fit", "Fit a model to measured data");
    fit_cmd->require_subcommand(1)->fallthrough();
    for (const char* m : {"lorentzian", "lifetime", "lifetime-vs-detuning", "linewidth-vs-detuning", "transmission",
                          "reflection"}) {
        const std::string model = m;
        sub(fit_cmd, model, "Fit the " + model + " model", [model](Run& r) { run_fit(r, model); });
    }

    auto* design_cmd = app.add_subcommand("design", "Photonic crystal cavity design");
    design_cmd->require_subcommand(1)->fallthrough();
    sub(design_cmd, "lattice", "Hole layout of the defect cavity", design_lattice);
    sub(design_cmd, "beta-map", "External beta and lifetime over (kappa_e, kappa_i)", design_beta_map);
    sub(design_cmd, "dip-search", "Lowest reachable reflection over emitter detuning", design_dip_search);
    sub(design_cmd, "scale", "Scale a design by a percentage (config key percent)", design_scale);
    sub(design_cmd, "cooperativity", "Cooperativity over simulated field samples", design_cooperativity);

    sub(&app, "stats", "Batch-fit a device manifest and summarise the fleet", run_stats);
    sub(&app, "report", "Assemble the parameter table from named fit results", run_report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_code(ExitCode::usage);
    }

    try {
        Run run(g, context);
        action(run);
        return exit_code(ExitCode::success);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.exit_code());
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(ExitCode::data);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(ExitCode::numeric);
    }
}
