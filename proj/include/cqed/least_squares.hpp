#pragma once

// Box-constrained Levenberg-Marquardt on a residual vector. Jacobians come
// from central differences (one-sided next to a bound); the covariance is the
// residual-scaled inverse of J^T J, falling back to a pseudo-inverse when J
// is rank deficient.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cqed/errors.hpp"
#include "cqed/trace.hpp"

namespace cqed::fit {

inline constexpr double unbounded = std::numeric_limits<double>::infinity();

struct ParamSpec {
    std::string name;
    double value = 0.0;
    double lo = -unbounded;
    double hi = unbounded;
    bool fixed = false;
    /// Typical magnitude, used for the finite-difference step when the value
    /// itself is near zero.
    double scale = 1.0;
    /// Position on the abscissa (line centre, onset time). Its difference step
    /// follows `scale` (the feature width) instead of the value, which may sit
    /// far from zero.
    bool location = false;
};

struct FitOptions {
    int max_iter = 200;
    double step_tol = 1e-8;   ///< relative parameter step
    double cost_tol = 1e-10;  ///< relative change of the residual norm
    double grad_tol = 1e-10;  ///< cosine between residual and any Jacobian column
    double fd_step = 1e-6;    ///< relative finite-difference step
    double rank_tol = 1e-10;  ///< singular-value cutoff relative to the largest
};

struct Estimate {
    double value = 0.0;
    double stderr = 0.0;
};

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> params;
    std::vector<double> stderr;
    std::vector<double> covariance;  ///< row-major, size n*n
    std::vector<bool> fixed;
    double residual_norm = 0.0;  ///< sum of squared weighted residuals
    bool converged = false;
    int n_iter = 0;
    int dof = 0;
    bool rank_deficient = false;
    bool stderr_reliable = true;
    std::vector<std::string> warnings;
    std::map<std::string, Estimate> derived;

    std::size_t size() const { return params.size(); }

    std::size_t index(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
        throw DomainError("fit result has no parameter '" + name + "'");
    }
    bool has(const std::string& name) const {
        return std::find(names.begin(), names.end(), name) != names.end();
    }
    double operator[](const std::string& name) const { return params[index(name)]; }
    double error(const std::string& name) const { return stderr[index(name)]; }
    double cov(std::size_t i, std::size_t j) const { return covariance[i * params.size() + j]; }

    /// Parameter or derived quantity by name.
    Estimate estimate(const std::string& name) const {
        if (has(name)) return {(*this)[name], error(name)};
        auto it = derived.find(name);
        if (it == derived.end()) throw DomainError("fit result has no quantity '" + name + "'");
        return it->second;
    }

    void warn(const std::string& w) {
        if (std::find(warnings.begin(), warnings.end(), w) == warnings.end()) warnings.push_back(w);
    }
    bool has_warning(const std::string& w) const {
        return std::find(warnings.begin(), warnings.end(), w) != warnings.end();
    }
};

/// Residual function over the full parameter vector (fixed entries included).
using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

namespace detail {

inline double cost_of(const Eigen::VectorXd& r) {
    if (!r.allFinite()) return unbounded;
    return r.squaredNorm();
}

struct Problem {
    const ResidualFn& f;
    std::vector<ParamSpec> specs;
    std::vector<int> free;  ///< indices of free parameters
    const FitOptions& opt;

    Eigen::VectorXd project(Eigen::VectorXd x) const {
        for (int i : free) x(i) = std::clamp(x(i), specs[i].lo, specs[i].hi);
        return x;
    }

    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& r0) const {
        Eigen::MatrixXd J(r0.size(), static_cast<Eigen::Index>(free.size()));
        for (std::size_t c = 0; c < free.size(); ++c) {
            const int i = free[c];
            const auto& s = specs[i];
            const double h = opt.fd_step * (s.location ? std::abs(s.scale) : std::max(std::abs(x(i)), std::abs(s.scale)));
            Eigen::VectorXd xp = x, xm = x;
            const bool room_up = x(i) + h <= s.hi;
            const bool room_down = x(i) - h >= s.lo;
            Eigen::VectorXd col;
            if (room_up && room_down) {
                xp(i) += h;
                xm(i) -= h;
                col = (f(xp) - f(xm)) / (2.0 * h);
            } else if (room_up) {
                xp(i) += h;
                col = (f(xp) - r0) / h;
            } else {
                xm(i) -= h;
                col = (r0 - f(xm)) / h;
            }
            if (!col.allFinite())
                throw NumericError("least_squares: non-finite Jacobian column for '" + s.name + "'");
            J.col(static_cast<Eigen::Index>(c)) = col;
        }
        return J;
    }

    /// Largest cosine between r and a Jacobian column, ignoring columns whose
    /// descent direction is blocked by an active bound.
    double gradient_cosine(const Eigen::VectorXd& x, const Eigen::MatrixXd& J, const Eigen::VectorXd& r) const {
        const double rn = r.norm();
        if (rn == 0.0) return 0.0;
        const Eigen::VectorXd g = J.transpose() * r;
        double worst = 0.0;
        for (std::size_t c = 0; c < free.size(); ++c) {
            const auto& s = specs[free[c]];
            const auto k = static_cast<Eigen::Index>(c);
            // descent moves against g
            if (g(k) > 0.0 && x(free[c]) <= s.lo) continue;
            if (g(k) < 0.0 && x(free[c]) >= s.hi) continue;
            const double cn = J.col(k).norm();
            if (cn == 0.0) continue;
            worst = std::max(worst, std::abs(g(k)) / (cn * rn));
        }
        return worst;
    }
};

}  // namespace detail

/// Minimise |f(p)|^2 over the free entries of `params`.
inline FitResult least_squares(const ResidualFn& f, std::vector<ParamSpec> params, const FitOptions& opt = {}) {
    const auto n = static_cast<Eigen::Index>(params.size());
    detail::Problem prob{f, params, {}, opt};
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = params[i];
        if (!std::isfinite(s.value)) throw InputError("least_squares: initial '" + s.name + "' is not finite");
        if (!s.fixed && (s.value < s.lo || s.value > s.hi))
            throw InputError("least_squares: initial '" + s.name + "' outside its bounds");
        if (!(s.lo <= s.hi)) throw InputError("least_squares: empty bounds for '" + s.name + "'");
        x(i) = s.value;
        if (!s.fixed) prob.free.push_back(static_cast<int>(i));
    }
    Eigen::VectorXd r = f(x);
    if (!r.allFinite()) throw InputError("least_squares: model is not finite at the initial parameters");
    const auto m = r.size();
    const auto nf = static_cast<Eigen::Index>(prob.free.size());
    if (m < nf) throw InsufficientData("least_squares: fewer residuals than free parameters");

    FitResult res;
    for (const auto& s : params) {
        res.names.push_back(s.name);
        res.fixed.push_back(s.fixed);
    }
    double cost = detail::cost_of(r);
    const double initial_cost = cost;

    if (nf > 0) {
        double lambda = 1e-3;
        Eigen::MatrixXd J = prob.jacobian(x, r);
        int it = 0;
        while (it < opt.max_iter) {
            ++it;
            if (cost <= 1e-20 * initial_cost || cost == 0.0 ||
                prob.gradient_cosine(x, J, r) < opt.grad_tol) {
                res.converged = true;
                break;
            }
            const Eigen::MatrixXd A = J.transpose() * J;
            const Eigen::VectorXd g = J.transpose() * r;
            Eigen::VectorXd d = A.diagonal();
            const double dmax = d.maxCoeff();
            for (Eigen::Index k = 0; k < nf; ++k) d(k) = std::max(d(k), 1e-12 * std::max(dmax, 1e-300));

            bool accepted = false;
            while (lambda < 1e16) {
                Eigen::MatrixXd M = A;
                M.diagonal() += lambda * d;
                const Eigen::VectorXd step = M.ldlt().solve(-g);
                Eigen::VectorXd trial = x;
                for (Eigen::Index k = 0; k < nf; ++k) trial(prob.free[k]) += step(k);
                trial = prob.project(trial);
                const Eigen::VectorXd rt = f(trial);
                const double ct = detail::cost_of(rt);
                if (ct < cost) {
                    const double dx = (trial - x).norm();
                    const double rel_cost = (cost - ct) / std::max(ct, 1e-300);
                    x = trial;
                    r = rt;
                                        cost = ct;
                    lambda = std::max(lambda / 10.0, 1e-12);
                    accepted = true;
                    if (dx <= opt.step_tol * (x.norm() + opt.step_tol) && rel_cost <= opt.cost_tol)
                        res.converged = true;
                    if (ct <= 1e-20 * initial_cost) res.converged = true;
                    break;
                }
                lambda *= 10.0;
            }
            if (!accepted) {
                // no downhill step at any damping: we sit at a (possibly bound-limited) minimum
                res.converged = prob.gradient_cosine(x, J, r) < 1e-6;
                break;
            }
            J = prob.jacobian(x, r);
            if (res.converged) break;
        }
        res.n_iter = it;
    } else {
        res.converged = true;
    }

    res.params.assign(x.data(), x.data() + n);
    res.residual_norm = cost;
    res.dof = static_cast<int>(m - nf);
    res.stderr.assign(static_cast<std::size_t>(n), 0.0);
    res.covariance.assign(static_cast<std::size_t>(n * n), 0.0);
    if (!res.converged) res.warn("NotConverged");

    if (nf > 0) {
        const Eigen::MatrixXd J = prob.jacobian(x, r);
        // column scaling keeps the rank test independent of parameter units
        Eigen::VectorXd colnorm(nf);
        for (Eigen::Index k = 0; k < nf; ++k) colnorm(k) = J.col(k).norm() > 0 ? J.col(k).norm() : 1.0;
        const Eigen::MatrixXd Js = J * colnorm.cwiseInverse().asDiagonal();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(Js, Eigen::ComputeThinV);
        const Eigen::VectorXd sv = svd.singularValues();
        const double cutoff = opt.rank_tol * (sv.size() > 0 ? sv(0) : 0.0);
        Eigen::VectorXd inv_sq = Eigen::VectorXd::Zero(nf);
        int rank = 0;
        for (Eigen::Index k = 0; k < sv.size(); ++k) {
            if (sv(k) > cutoff && sv(k) > 0.0) {
                inv_sq(k) = 1.0 / (sv(k) * sv(k));
                ++rank;
            }
        }
        if (rank < nf) {
            res.rank_deficient = true;
            res.stderr_reliable = false;
            res.warn("RankDeficient");
        }
        const Eigen::MatrixXd V = svd.matrixV();
        Eigen::MatrixXd covs = V * inv_sq.asDiagonal() * V.transpose();
        covs = colnorm.cwiseInverse().asDiagonal() * covs * colnorm.cwiseInverse().asDiagonal();
        covs = 0.5 * (covs + covs.transpose()).eval();
        const double s2 = res.dof > 0 ? cost / res.dof : 0.0;
        if (res.dof <= 0) res.stderr_reliable = false;
        for (Eigen::Index a = 0; a < nf; ++a)
            for (Eigen::Index b = 0; b < nf; ++b)
                res.covariance[static_cast<std::size_t>(prob.free[a] * n + prob.free[b])] = s2 * covs(a, b);
        for (Eigen::Index a = 0; a < nf; ++a) {
            const int i = prob.free[a];
            res.stderr[static_cast<std::size_t>(i)] =
                std::sqrt(std::max(0.0, res.covariance[static_cast<std::size_t>(i * n + i)]));
            const auto& s = params[static_cast<std::size_t>(i)];
            if (x(i) <= s.lo || x(i) >= s.hi) res.warn("AtBound:" + s.name);
        }
    }
    return res;
}

enum class Weighting {
    unweighted,
    poisson,  ///< w = 1 / max(y, 1)
    trace,    ///< weights stored in the trace
};

inline std::vector<double> weights_for(const SampledTrace& tr, Weighting mode) {
    std::vector<double> w(tr.size(), 1.0);
    if (mode == Weighting::poisson) {
        for (std::size_t i = 0; i < tr.size(); ++i) w[i] = 1.0 / std::max(tr.y[i], 1.0);
    } else if (mode == Weighting::trace) {
        if (!tr.weighted()) throw InputError("fit: trace weighting requested but the trace has no weights");
        w = tr.w;
    }
    return w;
}

/// Fit y ~ model(x, p) to paired samples without ordering requirements;
/// residuals are sqrt(w) (y - model). `w` may be empty.
template <class Model>
FitResult fit_points(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w,
                     Model&& model, std::vector<ParamSpec> params, const FitOptions& opt = {}) {
    if (x.size() != y.size() || (!w.empty() && w.size() != x.size()))
        throw DataError("fit: x, y and weights differ in length");
    std::size_t n_free = 0;
    for (const auto& s : params) n_free += s.fixed ? 0 : 1;
    if (x.size() < n_free + 1)
        throw InsufficientData("fit: " + std::to_string(x.size()) + " samples for " + std::to_string(n_free) +
                               " free parameters");
    std::vector<double> sw(x.size(), 1.0);
    for (std::size_t i = 0; i < w.size(); ++i) sw[i] = std::sqrt(w[i]);
    ResidualFn f = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(static_cast<Eigen::Index>(x.size()));
        for (std::size_t i = 0; i < x.size(); ++i) r(static_cast<Eigen::Index>(i)) = sw[i] * (y[i] - model(x[i], p));
        return r;
    };
    return least_squares(f, std::move(params), opt);
}

/// Fit y ~ model(x, p) to a validated trace.
template <class Model>
FitResult fit_curve(const SampledTrace& tr, Model&& model, std::vector<ParamSpec> params,
                    Weighting weighting = Weighting::unweighted, const FitOptions& opt = {}) {
    tr.validate();
    return fit_points(tr.x, tr.y, weights_for(tr, weighting), std::forward<Model>(model), std::move(params), opt);
}

/// First-order error of q(params) using the fit covariance. The gradient is
/// taken by central differences with relative step 1e-6.
template <class Q>
Estimate propagate(const FitResult& fr, Q&& q) {
    const std::size_t n = fr.size();
    Eigen::VectorXd p(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) p(static_cast<Eigen::Index>(i)) = fr.params[i];
    Estimate e;
    e.value = q(p);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (fr.fixed[i]) continue;
        // relative to the value so positive parameters stay positive
        const double h = fr.params[i] != 0.0 ? 1e-6 * std::abs(fr.params[i]) : 1e-6 * std::max(fr.stderr[i], 1e-12);
        Eigen::VectorXd a = p, b = p;
        a(static_cast<Eigen::Index>(i)) += h;
        b(static_cast<Eigen::Index>(i)) -= h;
        grad(static_cast<Eigen::Index>(i)) = (q(a) - q(b)) / (2.0 * h);
    }
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            var += grad(static_cast<Eigen::Index>(i)) * fr.cov(i, j) * grad(static_cast<Eigen::Index>(j));
    e.stderr = std::sqrt(std::max(0.0, var));
    return e;
}

}  // namespace cqed::fit
