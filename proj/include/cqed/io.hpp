#pragma once

// Text formats: trace, field and column CSV files in; CSV and JSON out.
// Numbers are written with 9 significant digits so identical inputs give
// byte-identical files.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cqed/design.hpp"
#include "cqed/errors.hpp"
#include "cqed/least_squares.hpp"
#include "cqed/trace.hpp"

namespace cqed::io {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

/// v rounded to 9 significant digits; JSON then prints the short form.
/// Non-finite values become null.
inline json num(double v) {
    if (!std::isfinite(v)) return nullptr;
    return std::strtod(fmt(v).c_str(), nullptr);
}

inline json num_array(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input file '" + path + "'");
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot open output file '" + path + "'");
    return out;
}

inline json read_json(std::istream& in, const std::string& source) {
    try {
        return json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw SchemaError(source + ": invalid JSON: " + e.what());
    }
}

inline json read_json_file(const std::string& path) {
    auto in = open_input(path);
    return read_json(in, path);
}

inline void write_json(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

/// Typed, strict view of a JSON parameter object. Every key must be read by
/// the consumer; finish() rejects leftovers so typos do not pass silently.
class Config {
public:
    explicit Config(const json& j = json::object(), std::string source = "configuration")
        : j_(j.is_null() ? json::object() : j), source_(std::move(source)) {
        if (!j_.is_object()) throw ConfigError(source_ + " must be a JSON object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    double num(const std::string& key, double fallback) {
        if (!take(key)) return fallback;
        if (!j_.at(key).is_number()) fail(key, "must be a number");
        return j_.at(key).get<double>();
    }
    std::optional<double> opt_num(const std::string& key) {
        if (!has(key)) {
            used_.insert(key);
            return std::nullopt;
        }
        return num(key, 0.0);
    }
    double required(const std::string& key) {
        if (!has(key)) fail(key, "is required");
        return num(key, 0.0);
    }
    std::size_t count(const std::string& key, std::size_t fallback, std::size_t min = 0) {
        const double v = num(key, static_cast<double>(fallback));
        if (!(v >= static_cast<double>(min)) || v != std::floor(v) || v > 1e9)
            fail(key, "must be an integer >= " + std::to_string(min));
        return static_cast<std::size_t>(v);
    }
    bool flag(const std::string& key, bool fallback) {
        if (!take(key)) return fallback;
        if (!j_.at(key).is_boolean()) fail(key, "must be true or false");
        return j_.at(key).get<bool>();
    }
    std::string str(const std::string& key, const std::string& fallback) {
        if (!take(key)) return fallback;
        if (!j_.at(key).is_string()) fail(key, "must be a string");
        return j_.at(key).get<std::string>();
    }
    std::vector<double> list(const std::string& key, std::vector<double> fallback) {
        if (!take(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); }))
            fail(key, "must be a list of numbers");
        return v.get<std::vector<double>>();
    }
    std::vector<std::string> strings(const std::string& key) {
        if (!take(key)) return {};
        const auto& v = j_.at(key);
        if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_string(); }))
            fail(key, "must be a list of strings");
        return v.get<std::vector<std::string>>();
    }
    std::map<std::string, double> numbers(const std::string& key) {
        std::map<std::string, double> out;
        if (!take(key)) return out;
        const auto& v = j_.at(key);
        if (!v.is_object()) fail(key, "must be an object of numbers");
        for (const auto& [k, e] : v.items()) {
            if (!e.is_number()) fail(key + "." + k, "must be a number");
            out[k] = e.get<double>();
        }
        return out;
    }
    /// Raw sub-object, handed on to another reader.
    json object(const std::string& key) {
        if (!take(key)) return json::object();
        if (!j_.at(key).is_object()) fail(key, "must be an object");
        return j_.at(key);
    }

    void finish(const std::string& context) const {
        for (const auto& [key, v] : j_.items())
            if (!used_.count(key)) throw ConfigError(context + ": unknown parameter '" + key + "' in " + source_);
    }
    const json& raw() const { return j_; }

private:
    bool take(const std::string& key) {
        used_.insert(key);
        return j_.contains(key);
    }
    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ConfigError(source_ + ": '" + key + "' " + what);
    }

    json j_;
    std::string source_;
    std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct CsvTable {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<long> lines;  ///< 1-based file line of each row

    std::size_t column(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError(source + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    }
    bool has(const std::string& name) const { return std::find(header.begin(), header.end(), name) != header.end(); }
    std::vector<double> values(const std::string& name) const {
        const auto c = column(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r[c]);
        return out;
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline double parse_double(std::string_view s, const std::string& source, long line) {
    if (s == "nan" || s == "NaN") return NAN;
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw DataError(source + ": cannot parse number '" + std::string(s) + "'", line);
    return v;
}

}  // namespace detail

/// Comma-separated numeric table. Blank lines and lines starting with '#' are
/// skipped; the first remaining line is the header.
inline CsvTable read_csv(std::istream& in, const std::string& source) {
    CsvTable t;
    t.source = source;
    std::string line;
    long lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        const auto s = detail::trim(line);
        if (s.empty() || s.front() == '#') continue;
        const auto cells = detail::split(s);
        if (!have_header) {
            for (auto c : cells) t.header.emplace_back(c);
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size())
            throw DataError(source + ": expected " + std::to_string(t.header.size()) + " columns, found " +
                                std::to_string(cells.size()),
                            lineno);
        std::vector<double> row;
        row.reserve(cells.size());
        for (auto c : cells) row.push_back(detail::parse_double(c, source, lineno));
        t.rows.push_back(std::move(row));
        t.lines.push_back(lineno);
    }
    if (!have_header) throw SchemaError(source + ": empty file, no header");
    return t;
}

inline CsvTable read_csv_file(const std::string& path) {
    auto in = open_input(path);
    return read_csv(in, path);
}

/// Column-major CSV writer.
inline void write_csv(std::ostream& out, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& columns) {
    if (header.size() != columns.size()) throw DomainError("write_csv: header and column count differ");
    const std::size_t n = columns.empty() ? 0 : columns.front().size();
    for (const auto& c : columns)
        if (c.size() != n) throw DomainError("write_csv: columns differ in length");
    for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
    out << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < columns.size(); ++k) out << (k ? "," : "") << fmt(columns[k][i]);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

struct AbscissaColumn {
    const char* name;
    TraceKind kind;
    const char* unit;
};

inline constexpr AbscissaColumn abscissa_columns[] = {
    {"wavelength_nm", TraceKind::spectrum, "nm"},
    {"detuning_GHz", TraceKind::scan, "GHz"},
    {"time_ns", TraceKind::histogram, "ns"},
};

/// Trace CSV: one abscissa column (wavelength_nm | detuning_GHz | time_ns),
/// a `counts` column and an optional `weight` column.
inline SampledTrace read_trace(std::istream& in, const std::string& source) {
    const auto t = read_csv(in, source);
    const AbscissaColumn* axis = nullptr;
    for (const auto& a : abscissa_columns) {
        if (!t.has(a.name)) continue;
        if (axis) throw SchemaError(source + ": more than one abscissa column");
        axis = &a;
    }
    if (!axis) throw SchemaError(source + ": header needs one of wavelength_nm, detuning_GHz, time_ns");
    if (!t.has("counts")) throw SchemaError(source + ": header needs a counts column");

    SampledTrace tr;
    tr.kind = axis->kind;
    tr.unit = axis->unit;
    tr.x = t.values(axis->name);
    tr.y = t.values("counts");
    if (t.has("weight")) tr.w = t.values("weight");
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const long line = t.lines[i];
        if (!std::isfinite(tr.x[i]) || !std::isfinite(tr.y[i])) throw DataError(source + ": non-finite value", line);
        if (i > 0 && !(tr.x[i] > tr.x[i - 1]))
            throw DataError(source + ": " + axis->name + " not strictly increasing", line);
        if (tr.y[i] < 0.0) throw DataError(source + ": negative counts", line);
        if (tr.weighted() && !(tr.w[i] >= 0.0 && std::isfinite(tr.w[i])))
            throw DataError(source + ": invalid weight", line);
    }
    if (tr.size() == 0) throw InsufficientData(source + ": no samples");
    return tr;
}

inline SampledTrace read_trace_file(const std::string& path) {
    auto in = open_input(path);
    return read_trace(in, path);
}

inline void write_trace(std::ostream& out, const SampledTrace& tr) {
    const char* axis = nullptr;
    for (const auto& a : abscissa_columns)
        if (a.kind == tr.kind) axis = a.name;
    if (tr.weighted())
        write_csv(out, {axis, "counts", "weight"}, {tr.x, tr.y, tr.w});
    else
        write_csv(out, {axis, "counts"}, {tr.x, tr.y});
}

// ---------------------------------------------------------------------------
// Field samples
// ---------------------------------------------------------------------------

inline std::vector<design::FieldSample> read_field_samples(std::istream& in, const std::string& source) {
    const auto t = read_csv(in, source);
    const char* names[] = {"x_nm", "y_nm", "z_nm", "u_sq", "ex", "ey", "ez"};
    std::size_t col[7];
    for (int k = 0; k < 7; ++k) col[k] = t.column(names[k]);
    std::vector<design::FieldSample> out;
    out.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        design::FieldSample s{{r[col[0]], r[col[1]], r[col[2]]}, r[col[3]], {r[col[4]], r[col[5]], r[col[6]]}};
        try {
            s.validate();
        } catch (const DomainError& e) {
            throw DataError(source + ": " + e.what(), t.lines[i]);
        }
        out.push_back(s);
    }
    if (out.empty()) throw InsufficientData(source + ": no field samples");
    return out;
}

inline std::vector<design::FieldSample> read_field_file(const std::string& path) {
    auto in = open_input(path);
    return read_field_samples(in, path);
}

// ---------------------------------------------------------------------------
// JSON views
// ---------------------------------------------------------------------------

inline json to_json(const fit::FitResult& fr) {
    json j;
    json params = json::object();
    for (std::size_t i = 0; i < fr.size(); ++i)
        params[fr.names[i]] = {{"value", num(fr.params[i])}, {"stderr", num(fr.stderr[i])}, {"fixed", bool(fr.fixed[i])}};
    j["parameters"] = params;
    j["names"] = fr.names;
    j["covariance"] = num_array(fr.covariance);
    json derived = json::object();
    for (const auto& [name, e] : fr.derived) derived[name] = {{"value", num(e.value)}, {"stderr", num(e.stderr)}};
    j["derived"] = derived;
    j["residual_norm"] = num(fr.residual_norm);
    j["converged"] = fr.converged;
    j["iterations"] = fr.n_iter;
    j["dof"] = fr.dof;
    j["rank_deficient"] = fr.rank_deficient;
    j["stderr_reliable"] = fr.stderr_reliable;
    j["warnings"] = fr.warnings;
    return j;
}

inline double value_or_nan(const json& v) { return v.is_null() ? NAN : v.get<double>(); }

inline fit::FitResult fit_result_from_json(const json& j, const std::string& source = "fit result") {
    try {
        fit::FitResult fr;
        fr.names = j.at("names").get<std::vector<std::string>>();
        const auto& params = j.at("parameters");
        for (const auto& name : fr.names) {
            const auto& p = params.at(name);
            fr.params.push_back(value_or_nan(p.at("value")));
            fr.stderr.push_back(value_or_nan(p.at("stderr")));
            fr.fixed.push_back(p.value("fixed", false));
        }
        for (const auto& c : j.at("covariance")) fr.covariance.push_back(value_or_nan(c));
        if (fr.covariance.size() != fr.names.size() * fr.names.size())
            throw SchemaError(source + ": covariance size does not match parameter count");
        if (j.contains("derived"))
            for (const auto& [name, e] : j.at("derived").items())
                fr.derived[name] = {value_or_nan(e.at("value")), value_or_nan(e.at("stderr"))};
        fr.residual_norm = value_or_nan(j.at("residual_norm"));
        fr.converged = j.at("converged").get<bool>();
        fr.n_iter = j.value("iterations", 0);
        fr.dof = j.value("dof", 0);
        fr.rank_deficient = j.value("rank_deficient", false);
        fr.stderr_reliable = j.value("stderr_reliable", true);
        if (j.contains("warnings")) fr.warnings = j.at("warnings").get<std::vector<std::string>>();
        return fr;
    } catch (const json::exception& e) {
        throw SchemaError(source + ": " + e.what());
    }
}

inline json to_json(const design::CavityDesign& c) {
    return {{"a_nm", num(c.a)},          {"r_nm", num(c.r)},     {"w_wg_nm", num(c.w_wg)}, {"t_h_nm", num(c.t_h)},
            {"d", num(c.d)},             {"eta", num(c.eta)},    {"N", c.N},               {"M_s", c.M_s},
            {"M_w", c.M_w},              {"L", c.L},             {"r_min_wg_nm", num(c.r_min_wg)},
            {"scaling_percent", num(c.scaling)}};
}

/// Design parameters from JSON; absent keys keep the nominal values.
inline design::CavityDesign design_from_json(const json& j, const std::string& source = "design") {
    design::CavityDesign c;
    try {
        c.a = j.value("a_nm", c.a);
        c.r = j.value("r_nm", c.r);
        c.w_wg = j.value("w_wg_nm", c.w_wg);
        c.t_h = j.value("t_h_nm", c.t_h);
        c.d = j.value("d", c.d);
        c.eta = j.value("eta", c.eta);
        c.N = j.value("N", c.N);
        c.M_s = j.value("M_s", c.M_s);
        c.M_w = j.value("M_w", c.M_w);
        c.L = j.value("L", c.L);
        c.r_min_wg = j.value("r_min_wg_nm", c.r_min_wg);
        c.scaling = j.value("scaling_percent", c.scaling);
    } catch (const json::exception& e) {
        throw SchemaError(source + ": " + e.what());
    }
    c.validate();
    return c;
}

inline json to_json(const design::CavityDesign& c, const design::Lattice& lat) {
    json holes = json::array();
    for (const auto& h : lat.holes)
        holes.push_back({{"center_nm", num(h.center_nm)},
                         {"radius_nm", num(h.radius_nm)},
                         {"lattice_nm", num(h.lattice_nm)},
                         {"region", design::to_string(h.region)}});
    return {{"design", to_json(c)}, {"defect_lattice_nm", num_array(lat.a_i)}, {"holes", holes}};
}

inline json to_json(const std::vector<design::ContourSet>& sets) {
    json out = json::array();
    for (const auto& cs : sets) {
        json lines = json::array();
        for (const auto& l : cs.lines) {
            json pts = json::array();
            for (const auto& p : l) pts.push_back({num(p.x), num(p.y)});
            lines.push_back(pts);
        }
        out.push_back({{"quantity", cs.quantity}, {"level", num(cs.level)}, {"polylines", lines}});
    }
    return out;
}

}  // namespace cqed::io
