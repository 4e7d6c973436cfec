#pragma once

// Device registry, batch resonance fitting, fleet statistics, bright/dark
// classification and assembly of the full C-QED parameter report with
// first-order error propagation.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cqed/core.hpp"
#include "cqed/errors.hpp"
#include "cqed/fit_models.hpp"
#include "cqed/io.hpp"
#include "cqed/synth.hpp"
#include "cqed/units.hpp"

namespace cqed::pipeline {

using fit::FitResult;
using io::json;

// ---------------------------------------------------------------------------
// Device records
// ---------------------------------------------------------------------------

/// Device screening categories. The exclusion flags are set by the operator in the
/// manifest; q_censored is computed from the resonance fit.
struct DeviceFlags {
    bool visually_broken = false;
    bool no_resonance = false;
    bool not_in_reflection = false;
    bool spectrometer_range = false;
    bool spectrometer_resolution = false;
    bool q_censored = false;
};

struct DeviceRecord {
    std::string sample_id, array_id, device_id;
    double scaling = 100.0;  ///< percent
    int m_w = 0;
    std::optional<double> dose;  ///< e-beam dose, uC/cm^2
    std::map<std::string, std::string> trace_paths;
    std::map<std::string, SampledTrace> traces;
    std::map<std::string, FitResult> fits;  ///< "resonance" holds the fundamental-mode fit
    DeviceFlags flags;
    std::string error;  ///< fit failure message, empty on success

    std::string key() const { return sample_id + "/" + array_id + "/" + device_id; }
    bool has_resonance() const { return !flags.visually_broken && !flags.no_resonance; }
    /// Resonance present and not excluded from Q reporting by an operator flag.
    bool q_eligible() const {
        return has_resonance() && !flags.not_in_reflection && !flags.spectrometer_range &&
               !flags.spectrometer_resolution;
    }
};

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw SchemaError(where + ": field '" + key + "' has the wrong type");
    }
}

inline std::string id_string(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw SchemaError(where + ": missing field '" + key + "'");
    const auto& v = j.at(key);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw SchemaError(where + ": field '" + key + "' must be a string or integer");
}

}  // namespace detail

/// Manifest: JSON array of {sample_id, array_id, device_id, scaling, m_w,
/// dose, trace_paths{...}, flags{...}}. Relative trace paths are resolved
/// against `base_dir`.
inline std::vector<DeviceRecord> records_from_manifest(const json& j, const std::string& base_dir = "",
                                                       const std::string& source = "manifest") {
    if (!j.is_array()) throw SchemaError(source + ": manifest must be a JSON array");
    std::vector<DeviceRecord> out;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& e = j[i];
        const std::string where = source + " entry " + std::to_string(i + 1);
        if (!e.is_object()) throw SchemaError(where + ": expected an object");
        DeviceRecord r;
        r.sample_id = detail::id_string(e, "sample_id", where);
        r.array_id = detail::id_string(e, "array_id", where);
        r.device_id = detail::id_string(e, "device_id", where);
        r.scaling = detail::get_or<double>(e, "scaling", 100.0, where);
        r.m_w = detail::get_or<int>(e, "m_w", 0, where);
        if (e.contains("dose") && !e.at("dose").is_null()) r.dose = detail::get_or<double>(e, "dose", 0.0, where);
        if (e.contains("trace_paths")) {
            const auto& tp = e.at("trace_paths");
            if (!tp.is_object()) throw SchemaError(where + ": trace_paths must be an object");
            for (const auto& [name, path] : tp.items()) {
                if (!path.is_string()) throw SchemaError(where + ": trace path '" + name + "' must be a string");
                std::filesystem::path p(path.get<std::string>());
                if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
                r.trace_paths[name] = p.string();
            }
        }
        if (e.contains("flags")) {
            const auto& f = e.at("flags");
            if (!f.is_object()) throw SchemaError(where + ": flags must be an object");
            static const std::set<std::string> known{"visually_broken", "no_resonance", "not_in_reflection",
                                                     "spectrometer_range", "spectrometer_resolution", "q_censored"};
            for (const auto& [name, v] : f.items())
                if (!known.count(name)) throw SchemaError(where + ": unknown flag '" + name + "'");
            r.flags.visually_broken = detail::get_or<bool>(f, "visually_broken", false, where);
            r.flags.no_resonance = detail::get_or<bool>(f, "no_resonance", false, where);
            r.flags.not_in_reflection = detail::get_or<bool>(f, "not_in_reflection", false, where);
            r.flags.spectrometer_range = detail::get_or<bool>(f, "spectrometer_range", false, where);
            r.flags.spectrometer_resolution = detail::get_or<bool>(f, "spectrometer_resolution", false, where);
        }
        if (!seen.insert(r.key()).second) throw SchemaError(where + ": duplicate device " + r.key());
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<DeviceRecord> load_manifest(const std::string& path) {
    const auto j = io::read_json_file(path);
    return records_from_manifest(j, std::filesystem::path(path).parent_path().string(), path);
}

inline json to_json(const DeviceRecord& r) {
    json j;
    j["sample_id"] = r.sample_id;
    j["array_id"] = r.array_id;
    j["device_id"] = r.device_id;
    j["scaling"] = io::num(r.scaling);
    j["m_w"] = r.m_w;
    j["dose"] = r.dose ? io::num(*r.dose) : json(nullptr);
    json tp = json::object();
    for (const auto& [k, v] : r.trace_paths) tp[k] = v;
    j["trace_paths"] = tp;
    j["flags"] = {{"visually_broken", r.flags.visually_broken},
                  {"no_resonance", r.flags.no_resonance},
                  {"not_in_reflection", r.flags.not_in_reflection},
                  {"spectrometer_range", r.flags.spectrometer_range},
                  {"spectrometer_resolution", r.flags.spectrometer_resolution},
                  {"q_censored", r.flags.q_censored}};
    json fits = json::object();
    for (const auto& [k, v] : r.fits) fits[k] = io::to_json(v);
    j["fits"] = fits;
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

// ---------------------------------------------------------------------------
// Batch fitting
// ---------------------------------------------------------------------------

struct BatchOptions {
    fit::LorentzianOptions lorentzian;
    unsigned threads = 0;  ///< 0 picks hardware concurrency
};

/// Fits the "resonance" trace of every Q-eligible device, loading it from its
/// path first when needed. Devices are processed concurrently, each task
/// touching only its own record, so the result does not depend on thread
/// count. Fit failures are recorded per device instead of aborting the batch.
/// Returns the number of successful fits.
inline std::size_t batch_fit(std::vector<DeviceRecord>& records, const BatchOptions& opt = {}) {
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.q_eligible() && (r.traces.count("resonance") || r.trace_paths.count("resonance"))) todo.push_back(i);
    }
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> ok{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < todo.size(); k = next++) {
            auto& r = records[todo[k]];
            r.fits.erase("resonance");
            r.error.clear();
            try {
                if (!r.traces.count("resonance")) r.traces["resonance"] = io::read_trace_file(r.trace_paths.at("resonance"));
                auto fr = fit::fit_lorentzian_linear(r.traces.at("resonance"), opt.lorentzian);
                r.flags.q_censored = fit::q_lower_bound(fr);
                r.fits["resonance"] = std::move(fr);
                ++ok;
            } catch (const Error& e) {
                r.error = e.what();
            }
        }
    };
    unsigned n = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
    n = static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(todo.size(), 1)));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return ok;
}

// ---------------------------------------------------------------------------
// Fleet statistics
// ---------------------------------------------------------------------------

struct FleetOptions {
    double resolution_nm = 0.021;
    double max_relative_q_error = 0.2;  ///< larger fit errors go to the "fit error" row
    double q_bin_width = 2000.0;
};

struct HistogramBin {
    double lo = 0.0, hi = 0.0;
    std::size_t count = 0;
};

struct GroupMean {
    double key = 0.0;  ///< scaling percent or dose
    double mean_lambda_nm = 0.0;
    std::size_t count = 0;
};

struct FleetStatistics {
    std::size_t investigated = 0, with_resonance = 0, visually_broken = 0, no_resonance = 0;
    std::size_t q_measured = 0, not_in_reflection = 0, spectrometer_range = 0, spectrometer_resolution = 0;
    std::size_t fit_error = 0;  ///< failed fits and fits with relative Q error above the threshold
    std::size_t unfitted = 0;   ///< eligible devices without a resonance fit or trace
    std::size_t censored = 0;   ///< Q values at the resolution limit (lower bounds)
    double yield = 0.0;         ///< with_resonance / investigated
    std::size_t q_count = 0;    ///< uncensored Q values entering the mean
    double q_mean = NAN, q_std = NAN;  ///< sample standard deviation
    std::vector<HistogramBin> histogram;
    std::vector<GroupMean> per_scaling;
    std::vector<GroupMean> per_dose;
    /// Resonance shift of each dose relative to the lowest dose, averaged over
    /// the scalings both doses share, so an uneven scaling mix cancels.
    std::vector<GroupMean> dose_offsets;
    std::size_t undosed = 0;  ///< resonances without a dose entry

    std::string yield_text() const {
        const double pct = 100.0 * yield;
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.1f%% (~%.0f%%)", pct, 5.0 * std::round(pct / 5.0));
        return buf;
    }
};

namespace detail {

/// Order-independent mean: values are sorted before summation.
inline double sorted_mean(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline std::vector<GroupMean> group_means(std::map<double, std::vector<double>> groups) {
    std::vector<GroupMean> out;
    for (auto& [key, v] : groups) out.push_back({key, sorted_mean(v), v.size()});
    return out;
}

}  // namespace detail

inline FleetStatistics fleet_statistics(const std::vector<DeviceRecord>& records, const FleetOptions& opt = {}) {
    if (records.empty()) throw DomainError("fleet_statistics: empty batch");
    if (!(opt.resolution_nm >= 0.0)) throw DomainError("fleet_statistics: resolution must be >= 0");
    if (!(opt.q_bin_width > 0.0)) throw DomainError("fleet_statistics: histogram bin width must be > 0");
    FleetStatistics s;
    std::vector<double> q_values;
    std::map<double, std::vector<double>> by_scaling, by_dose;
    std::map<std::pair<double, double>, std::vector<double>> by_dose_scaling;
    for (const auto& r : records) {
        ++s.investigated;
        if (r.flags.visually_broken) {
            ++s.visually_broken;
            continue;
        }
        if (r.flags.no_resonance) {
            ++s.no_resonance;
            continue;
        }
        ++s.with_resonance;
        if (r.flags.not_in_reflection) {
            ++s.not_in_reflection;
            continue;
        }
        if (r.flags.spectrometer_range) {
            ++s.spectrometer_range;
            continue;
        }
        if (r.flags.spectrometer_resolution) {
            ++s.spectrometer_resolution;
            continue;
        }
        const auto it = r.fits.find("resonance");
        if (it == r.fits.end()) {
            if (r.error.empty())
                ++s.unfitted;
            else
                ++s.fit_error;
            continue;
        }
        const auto& fr = it->second;
        const auto q = fr.estimate("Q");
        if (!fr.converged || !std::isfinite(q.value) || !(q.stderr <= opt.max_relative_q_error * q.value)) {
            ++s.fit_error;
            continue;
        }
        ++s.q_measured;
        const double lambda = fr["lambda_c"];
        by_scaling[r.scaling].push_back(lambda);
        if (r.dose) {
            by_dose[*r.dose].push_back(lambda);
            by_dose_scaling[{*r.dose, r.scaling}].push_back(lambda);
        } else
            ++s.undosed;
        if (fr["fwhm"] <= opt.resolution_nm) {
            ++s.censored;
            continue;
        }
        q_values.push_back(q.value);
    }
    s.yield = static_cast<double>(s.with_resonance) / static_cast<double>(s.investigated);
    s.q_count = q_values.size();
    if (!q_values.empty()) {
        std::sort(q_values.begin(), q_values.end());
        s.q_mean = detail::sorted_mean(q_values);
        double ss = 0.0;
        for (double q : q_values) ss += (q - s.q_mean) * (q - s.q_mean);
        s.q_std = q_values.size() > 1 ? std::sqrt(ss / static_cast<double>(q_values.size() - 1)) : 0.0;
        const double w = opt.q_bin_width;
        const double first = std::floor(q_values.front() / w) * w;
        const auto nbins = static_cast<std::size_t>(std::floor((q_values.back() - first) / w)) + 1;
        for (std::size_t b = 0; b < nbins; ++b)
            s.histogram.push_back({first + w * static_cast<double>(b), first + w * static_cast<double>(b + 1), 0});
        for (double q : q_values) {
            auto b = static_cast<std::size_t>(std::floor((q - first) / w));
            ++s.histogram[std::min(b, nbins - 1)].count;
        }
    }
    s.per_scaling = detail::group_means(std::move(by_scaling));
    s.per_dose = detail::group_means(std::move(by_dose));
    if (!s.per_dose.empty()) {
        const double ref = s.per_dose.front().key;
        for (const auto& d : s.per_dose) {
            std::vector<double> diffs;
            for (const auto& m : s.per_scaling) {
                const auto a = by_dose_scaling.find({d.key, m.key});
                const auto b = by_dose_scaling.find({ref, m.key});
                if (a == by_dose_scaling.end() || b == by_dose_scaling.end()) continue;
                diffs.push_back(detail::sorted_mean(a->second) - detail::sorted_mean(b->second));
            }
            if (!diffs.empty()) s.dose_offsets.push_back({d.key, detail::sorted_mean(diffs), diffs.size()});
        }
    }
    return s;
}

inline json to_json(const FleetStatistics& s) {
    json j;
    j["counts"] = {{"investigated", s.investigated},
                   {"with_resonance", s.with_resonance},
                   {"visually_broken", s.visually_broken},
                   {"no_resonance", s.no_resonance},
                   {"q_measured", s.q_measured},
                   {"not_in_reflection", s.not_in_reflection},
                   {"spectrometer_range", s.spectrometer_range},
                   {"spectrometer_resolution", s.spectrometer_resolution},
                   {"fit_error", s.fit_error},
                   {"unfitted", s.unfitted},
                   {"censored", s.censored}};
    j["yield"] = io::num(s.yield);
    j["yield_text"] = s.yield_text();
    j["q"] = {{"count", s.q_count}, {"mean", io::num(s.q_mean)}, {"std", io::num(s.q_std)}};
    json hist = json::array();
    for (const auto& b : s.histogram) hist.push_back({{"lo", io::num(b.lo)}, {"hi", io::num(b.hi)}, {"count", b.count}});
    j["q_histogram"] = hist;
    auto groups = [](const std::vector<GroupMean>& g, const char* key) {
        json a = json::array();
        for (const auto& m : g)
            a.push_back({{key, io::num(m.key)}, {"mean_lambda_nm", io::num(m.mean_lambda_nm)}, {"count", m.count}});
        return a;
    };
    j["per_scaling"] = groups(s.per_scaling, "scaling");
    j["per_dose"] = groups(s.per_dose, "dose");
    json offsets = json::array();
    for (const auto& m : s.dose_offsets)
        offsets.push_back({{"dose", io::num(m.key)}, {"offset_nm", io::num(m.mean_lambda_nm)}, {"shared_scalings", m.count}});
    j["dose_offsets"] = offsets;
    j["undosed"] = s.undosed;
    return j;
}

// ---------------------------------------------------------------------------
// Bright / dark state from the phonon-sideband channel
// ---------------------------------------------------------------------------

struct ThresholdRule {
    double factor = 3.0;  ///< bright iff max >= factor * median
};

struct BrightDark {
    bool bright = false;
    bool low_confidence = false;
    double peak = 0.0;
    double threshold = 0.0;
};

inline BrightDark classify_bright_dark(const SampledTrace& psb, const ThresholdRule& rule = {}) {
    psb.validate();
    if (psb.size() == 0) throw InsufficientData("classify_bright_dark: empty trace");
    if (!(rule.factor > 0.0)) throw DomainError("classify_bright_dark: threshold factor must be > 0");
    std::vector<double> y = psb.y;
    std::sort(y.begin(), y.end());
    const std::size_t n = y.size();
    const double median = n % 2 ? y[n / 2] : 0.5 * (y[n / 2 - 1] + y[n / 2]);
    BrightDark out;
    out.peak = y.back();
    out.threshold = rule.factor * median;
    if (out.peak == 0.0) {
        out.low_confidence = true;
        return out;
    }
    out.bright = out.peak >= out.threshold;
    out.low_confidence = median == 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Parameter report
// ---------------------------------------------------------------------------

struct ReportRow {
    double value = NAN;
    double stderr = NAN;
    std::string source;
    std::string group;  ///< fit that produced the value; empty for constants and derived rows
    bool present = false;
};

struct ReportConstants {
    double V_norm = 0.45;  ///< mode volume in (lambda/n)^3
    double eta_Q = 0.8;
    double eta_DW = 0.57;
    double eta_BR = 0.8;
    double lambda_nm = 619.0;
    std::optional<int> M_w;
};

/// Measured inputs with covariances between entries of the same fit.
struct ReportInputs {
    std::map<std::string, ReportRow> rows;
    std::map<std::pair<std::string, std::string>, double> covariance;

    void set(const std::string& name, double value, double stderr, const std::string& source,
             const std::string& group = "") {
        rows[name] = {value, stderr, source, group, true};
    }
    double cov(const std::string& a, const std::string& b) const {
        if (a == b) {
            const double s = rows.at(a).stderr;
            return std::isfinite(s) ? s * s : 0.0;
        }
        const auto& ra = rows.at(a);
        const auto& rb = rows.at(b);
        if (ra.group.empty() || ra.group != rb.group) return 0.0;
        auto it = covariance.find({a, b});
        if (it == covariance.end()) it = covariance.find({b, a});
        return it == covariance.end() ? 0.0 : it->second;
    }
};

/// Pulls the report inputs out of named fits:
///   transmission_bare      -> kappa
///   lifetime_vs_detuning   -> tau0, C, kappa_prime (the kappa it was run with)
///   linewidth_vs_detuning  -> gamma, C_coh
///   reflection             -> kappa_e_over_kappa
/// A full "transmission" fit supplies kappa, gamma and C_coh when the
/// dedicated fits are absent.
inline ReportInputs inputs_from_fits(const std::map<std::string, FitResult>& fits) {
    ReportInputs in;
    auto take_param = [&](const std::string& fit_name, const FitResult& fr, const std::string& param,
                          const std::string& row) {
        in.set(row, fr[param], fr.error(param), fit_name + ":" + param, fit_name);
    };
    auto pair_cov = [&](const FitResult& fr, const std::string& pa, const std::string& ra, const std::string& pb,
                        const std::string& rb) { in.covariance[{ra, rb}] = fr.cov(fr.index(pa), fr.index(pb)); };

    if (auto it = fits.find("transmission_bare"); it != fits.end()) take_param(it->first, it->second, "kappa", "kappa");
    if (auto it = fits.find("lifetime_vs_detuning"); it != fits.end()) {
        const auto& fr = it->second;
        take_param(it->first, fr, "tau0", "tau0");
        take_param(it->first, fr, "C", "C");
        pair_cov(fr, "tau0", "tau0", "C", "C");
        if (fr.derived.count("kappa")) {
            const auto k = fr.derived.at("kappa");
            in.set("kappa_prime", k.value, k.stderr, it->first + ":kappa");
        }
    }
    if (auto it = fits.find("linewidth_vs_detuning"); it != fits.end()) {
        const auto& fr = it->second;
        take_param(it->first, fr, "gamma", "gamma");
        take_param(it->first, fr, "C_coh", "C_coh");
        pair_cov(fr, "gamma", "gamma", "C_coh", "C_coh");
    }
    if (auto it = fits.find("reflection"); it != fits.end())
        take_param(it->first, it->second, "kappa_e_over_kappa", "kappa_e_over_kappa");
    if (auto it = fits.find("transmission"); it != fits.end()) {
        const auto& fr = it->second;
        if (!in.rows.count("kappa")) take_param(it->first, fr, "kappa", "kappa");
        if (!in.rows.count("gamma") && !in.rows.count("C_coh") && fr.derived.count("C_coh")) {
            take_param(it->first, fr, "gamma", "gamma");
            const auto c = fr.derived.at("C_coh");
            in.set("C_coh", c.value, c.stderr, it->first + ":C_coh", it->first);
        }
    }
    return in;
}

struct CqedReport {
    std::vector<std::string> order;
    std::map<std::string, ReportRow> rows;

    const ReportRow& operator[](const std::string& name) const {
        auto it = rows.find(name);
        if (it == rows.end()) throw DomainError("report has no row '" + name + "'");
        return it->second;
    }
};

namespace detail {

struct DerivedRow {
    const char* name;
    std::vector<const char*> inputs;
    const char* formula;
    std::function<double(const std::vector<double>&)> f;
};

inline const std::vector<DerivedRow>& derived_rows() {
    static const std::vector<DerivedRow> rows{
        {"kappa_e", {"kappa_e_over_kappa", "kappa"}, "kappa_e/kappa * kappa", [](const auto& v) { return v[0] * v[1]; }},
        {"Q", {"lambda_nm", "kappa"}, "(c/lambda)/kappa",
         [](const auto& v) { return units::frequency_from_wavelength(v[0]) / v[1]; }},
        {"F_p", {"Q", "V_norm"}, "3/(4 pi^2) Q/V", [](const auto& v) { return 3.0 / (4.0 * units::pi * units::pi) * v[0] / v[1]; }},
        {"gamma0", {"tau0"}, "1/(2 pi tau0)", [](const auto& v) { return 1.0 / (units::two_pi * v[0]); }},
        {"beta0", {"eta_Q", "eta_DW", "eta_BR"}, "eta_Q eta_DW eta_BR", [](const auto& v) { return v[0] * v[1] * v[2]; }},
        {"g", {"C_coh", "kappa", "gamma"}, "sqrt(C_coh kappa gamma)/2",
         [](const auto& v) { return 0.5 * std::sqrt(v[0] * v[1] * v[2]); }},
        {"g_prime", {"C", "kappa_prime", "tau0"}, "sqrt(C kappa' gamma0)/2",
         [](const auto& v) { return 0.5 * std::sqrt(v[0] * v[1] / (units::two_pi * v[2])); }},
        {"beta", {"C"}, "C/(C+1)", [](const auto& v) { return v[0] / (v[0] + 1.0); }},
        {"beta_e", {"kappa_e_over_kappa", "C"}, "kappa_e/kappa * C/(C+1)",
         [](const auto& v) { return v[0] * v[1] / (v[1] + 1.0); }},
    };
    return rows;
}

}  // namespace detail

/// Table order of the report rows.
inline const std::vector<std::string>& report_order() {
    static const std::vector<std::string> order{
        "kappa", "kappa_prime", "kappa_e", "kappa_e_over_kappa", "M_w", "Q", "V_norm", "F_p", "tau0", "gamma0",
        "gamma", "eta_Q", "eta_DW", "eta_BR", "beta0", "C", "C_coh", "g", "g_prime", "beta", "beta_e", "lambda_nm"};
    return order;
}

/// Every derived row is evaluated from stored rows and carries a first-order
/// error: grad^T Sigma grad, with Sigma built from the measured inputs (full
/// covariance inside one fit, diagonal across fits). Chained rows (F_p from
/// Q) are expanded back to measured inputs so correlations are not lost.
/// Rows whose inputs are missing stay in the report marked absent.
inline CqedReport assemble_report(const ReportInputs& measured, const ReportConstants& k = {}) {
    ReportInputs in = measured;
    in.set("V_norm", k.V_norm, 0.0, "constant");
    in.set("eta_Q", k.eta_Q, 0.0, "constant");
    in.set("eta_DW", k.eta_DW, 0.0, "constant");
    in.set("eta_BR", k.eta_BR, 0.0, "constant");
    in.set("lambda_nm", k.lambda_nm, 0.0, "constant");
    if (k.M_w) in.set("M_w", *k.M_w, 0.0, "design");

    CqedReport rep;
    rep.order = report_order();
    for (const auto& [name, row] : in.rows) rep.rows[name] = row;

    // value of a row as a function of the measured inputs
    using Leaf = std::map<std::string, double>;
    std::function<std::optional<double>(const std::string&, const Leaf&)> eval =
        [&](const std::string& name, const Leaf& leaf) -> std::optional<double> {
        if (auto it = leaf.find(name); it != leaf.end()) return it->second;
        for (const auto& d : detail::derived_rows()) {
            if (name != d.name) continue;
            std::vector<double> v;
            for (const char* inp : d.inputs) {
                auto x = eval(inp, leaf);
                if (!x) return std::nullopt;
                v.push_back(*x);
            }
            return d.f(v);
        }
        return std::nullopt;
    };
    Leaf leaf;
    for (const auto& [name, row] : in.rows)
        if (row.present) leaf[name] = row.value;

    std::vector<std::string> leaves;
    for (const auto& [name, v] : leaf) leaves.push_back(name);

    for (const auto& d : detail::derived_rows()) {
        ReportRow row;
        row.source = d.formula;
        const auto value = eval(d.name, leaf);
        if (!value) {
            row.source = std::string("absent: needs ") + d.formula;
            rep.rows[d.name] = row;
            continue;
        }
        std::vector<double> grad(leaves.size(), 0.0);
        for (std::size_t i = 0; i < leaves.size(); ++i) {
            const double x = leaf[leaves[i]];
            const double h = 1e-6 * std::max(std::abs(x), 1e-12);
            Leaf up = leaf, dn = leaf;
            up[leaves[i]] = x + h;
            dn[leaves[i]] = x - h;
            const double fu = *eval(d.name, up), fd = *eval(d.name, dn);
            grad[i] = (fu - fd) / (2.0 * h);
        }
        double var = 0.0;
        for (std::size_t i = 0; i < leaves.size(); ++i)
            for (std::size_t j = 0; j < leaves.size(); ++j)
                if (grad[i] != 0.0 && grad[j] != 0.0) var += grad[i] * grad[j] * in.cov(leaves[i], leaves[j]);
        row.value = *value;
        row.stderr = std::sqrt(std::max(var, 0.0));
        row.present = true;
        rep.rows[d.name] = row;
    }
    for (const auto& name : rep.order)
        if (!rep.rows.count(name)) rep.rows[name] = {NAN, NAN, "absent: not measured", "", false};
    return rep;
}

/// Largest relative mismatch between a derived row and its formula evaluated
/// on the report's own stored rows.
inline double report_closure_residual(const CqedReport& rep) {
    double worst = 0.0;
    for (const auto& d : detail::derived_rows()) {
        const auto& row = rep[d.name];
        if (!row.present) continue;
        std::vector<double> v;
        for (const char* inp : d.inputs) v.push_back(rep[inp].value);
        const double again = d.f(v);
        worst = std::max(worst, std::abs(again - row.value) / std::max(std::abs(row.value), 1e-300));
    }
    return worst;
}

inline json to_json(const CqedReport& rep) {
    json rows = json::object();
    for (const auto& name : rep.order) {
        const auto& r = rep[name];
        rows[name] = {{"value", io::num(r.value)}, {"stderr", io::num(r.stderr)}, {"source", r.source}};
    }
    return {{"rows", rows}};
}

// ---------------------------------------------------------------------------
// Synthetic fleet
// ---------------------------------------------------------------------------

/// Generator for a fabrication batch with the screening counts of the first
/// sample (232 investigated, 200 with a resonance). Devices cycle through
/// `scalings`; consecutive blocks of one full scaling sweep alternate
/// between the two doses, so both doses see the same scaling mix.
struct FleetSpec {
    std::string sample_id = "S1";
    std::size_t investigated = 232;
    std::size_t visually_broken = 22;
    std::size_t no_resonance = 10;
    std::size_t not_in_reflection = 27;
    std::size_t spectrometer_range = 7;
    std::vector<double> scalings{95, 96, 97, 98, 99, 100, 101, 102, 103, 104, 105, 106, 107, 108, 109, 110};
    double dose_low = 265.0, dose_high = 275.0;
    double lambda_nominal_nm = 620.5;  ///< resonance at 100 % and the low dose
    double lambda_per_percent_nm = 6.0;
    double dose_offset_nm = 5.0;       ///< high dose resonates this much bluer
    double lambda_spread_nm = 0.2;
    double q_mean = 1.0e4, q_sd = 3.0e3, q_min = 2000.0, q_max = 40000.0;
    double amplitude = 1000.0, offset = 50.0, noise_sd = 5.0;
    int m_w = 4;
};

struct SyntheticFleet {
    std::vector<DeviceRecord> records;
    std::map<std::string, double> true_lambda;  ///< by device key, for resonances
    std::map<std::string, double> true_q;
};

inline SyntheticFleet synthetic_fleet(const FleetSpec& spec, synth::Rng& rng) {
    const std::size_t excluded = spec.visually_broken + spec.no_resonance;
    if (excluded + spec.not_in_reflection + spec.spectrometer_range > spec.investigated)
        throw DomainError("synthetic_fleet: category counts exceed the number of devices");
    if (spec.scalings.empty()) throw DomainError("synthetic_fleet: no scalings");

    // deterministic shuffle of category labels
    std::vector<int> category(spec.investigated, 0);
    std::size_t pos = 0;
    auto fill = [&](std::size_t n, int c) {
        for (std::size_t k = 0; k < n; ++k) category[pos++] = c;
    };
    fill(spec.visually_broken, 1);
    fill(spec.no_resonance, 2);
    fill(spec.not_in_reflection, 3);
    fill(spec.spectrometer_range, 4);
    for (std::size_t i = category.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.raw() % i);
        std::swap(category[i - 1], category[j]);
    }

    SyntheticFleet out;
    const std::size_t ns = spec.scalings.size();
    for (std::size_t i = 0; i < spec.investigated; ++i) {
        DeviceRecord r;
        r.sample_id = spec.sample_id;
        r.array_id = "A" + std::to_string(i / ns);
        r.device_id = "D" + std::to_string(i % ns);
        r.scaling = spec.scalings[i % ns];
        r.m_w = spec.m_w;
        const bool high = (i / ns) % 2 == 1;
        r.dose = high ? spec.dose_high : spec.dose_low;
        r.flags.visually_broken = category[i] == 1;
        r.flags.no_resonance = category[i] == 2;
        r.flags.not_in_reflection = category[i] == 3;
        r.flags.spectrometer_range = category[i] == 4;
        if (r.has_resonance() && !r.flags.spectrometer_range) {
            const double lambda = spec.lambda_nominal_nm + spec.lambda_per_percent_nm * (r.scaling - 100.0) -
                                  (high ? spec.dose_offset_nm : 0.0) + rng.normal(0.0, spec.lambda_spread_nm);
            const double q = std::clamp(rng.normal(spec.q_mean, spec.q_sd), spec.q_min, spec.q_max);
            out.true_lambda[r.key()] = lambda;
            out.true_q[r.key()] = q;
            if (r.q_eligible()) {
                synth::LorentzianSpec ls;
                ls.center = lambda;
                ls.fwhm = lambda / q;
                ls.amplitude = spec.amplitude;
                ls.offset = spec.offset;
                ls.noise_sd = spec.noise_sd;
                ls.span = std::max(1.0, 12.0 * ls.fwhm);
                ls.n = 501;
                r.traces["resonance"] = synth::lorentzian_spectrum(ls, rng);
            }
        }
        out.records.push_back(std::move(r));
    }
    return out;
}

}  // namespace cqed::pipeline
