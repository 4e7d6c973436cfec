#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cqed/errors.hpp"

namespace cqed {

enum class TraceKind { spectrum, scan, histogram };

inline const char* to_string(TraceKind k) {
    switch (k) {
        case TraceKind::spectrum: return "spectrum";
        case TraceKind::scan: return "scan";
        case TraceKind::histogram: return "histogram";
    }
    return "?";
}

/// Ordered (x, counts, optional weight) samples. The abscissa unit is carried
/// as a label: "nm" for spectra, "GHz" for laser scans, "ns" for histograms.
struct SampledTrace {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> w;  ///< empty when unweighted
    TraceKind kind = TraceKind::spectrum;
    std::string unit;

    std::size_t size() const { return x.size(); }
    bool weighted() const { return !w.empty(); }

    /// Throws DataError on length mismatch, non-finite values, a non-increasing
    /// abscissa or negative counts. Line numbers in messages are 1-based sample
    /// indices.
    void validate() const {
        if (y.size() != x.size()) throw DataError("trace: x and counts differ in length");
        if (!w.empty() && w.size() != x.size()) throw DataError("trace: weights differ in length");
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
                throw DataError("trace: non-finite value at sample " + std::to_string(i + 1));
            if (i > 0 && !(x[i] > x[i - 1]))
                throw DataError("trace: abscissa not strictly increasing at sample " + std::to_string(i + 1));
            if (y[i] < 0.0) throw DataError("trace: negative counts at sample " + std::to_string(i + 1));
            if (!w.empty() && !(w[i] >= 0.0 && std::isfinite(w[i])))
                throw DataError("trace: invalid weight at sample " + std::to_string(i + 1));
        }
    }

    /// Samples with x >= x0.
    SampledTrace from(double x0) const {
        SampledTrace out;
        out.kind = kind;
        out.unit = unit;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] < x0) continue;
            out.x.push_back(x[i]);
            out.y.push_back(y[i]);
            if (!w.empty()) out.w.push_back(w[i]);
        }
        return out;
    }
};

}  // namespace cqed
