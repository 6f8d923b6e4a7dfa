#pragma once

// Empirical verification harness for stochastic block alternating
// minimization on quadratic test problems with known constants.
//
// The concave objective is
//   L(theta) = -1/2 sum_d lambda_d ||theta_d - theta*_d||^2
//              - sum_{d<e} (theta_d - theta*_d)^T Gamma_{de} (theta_e - theta*_e)
// and the harness minimizes f = -L by cyclic projected stochastic gradient
// steps. Quadratics make every constant exact: lambda_d = mu_d (strong
// concavity = smoothness), gamma_d = sum_{e != d} ||Gamma_{de}||_2, so the
// convergence theorems become checkable inequalities:
//
//   xi = min_d 2 mu_d lambda_d / (mu_d + lambda_d)
//   admissibility: gamma := max_d gamma_d < 2 xi / (3 (K-1))
//   step: eta^t = (3/2) / (A (t+2) + (3/2)(K-1) gamma),  A = 2 xi - 3 gamma (K-1)
//   recursion: E[err^{t+1}] <= (1 - q^t) E[err^t] + (eta^t)^2 sigma^2 / (1 - (K-1) eta^t gamma)
//              with q^t = eta^t A / (1 - (K-1) eta^t gamma)
//   final rate: E[err at t+1] <= E[err^0] (2/(t+3))^{3/2} + 9 sigma^2 / (A^2 (t+3))
//
// sigma^2 is the supremum over the ball of E||per-sample gradient||^2:
// population part estimated by boundary sampling, plus dim * noise_sigma^2.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "common.hpp"
#include "matrix.hpp"

namespace altmin {

struct TheoryProblem {
    size_t K = 0;
    std::vector<size_t> dims;
    std::vector<Vector> theta_star;
    std::vector<double> lambda;  // strong-concavity moduli
    std::vector<double> mu;      // smoothness constants
    std::vector<double> gamma;   // gradient-stability constants
    std::vector<double> radius;  // r_d
    double noise_sigma = 0.0;
    // coupling[d][e] = Gamma_{de}, used for d < e only.
    std::vector<std::vector<Matrix>> coupling;

    double xi() const {
        double v = 0.0;
        for (size_t d = 0; d < K; ++d) {
            double x = 2.0 * mu[d] * lambda[d] / (mu[d] + lambda[d]);
            v = d == 0 ? x : std::min(v, x);
        }
        return v;
    }

    double gamma_max() const {
        double g = 0.0;
        for (double v : gamma) g = std::max(g, v);
        return g;
    }

    // 2 xi / (3 (K-1)); unconstrained for K = 1.
    double admissibility_rhs() const {
        if (K <= 1) return std::numeric_limits<double>::infinity();
        return 2.0 * xi() / (3.0 * static_cast<double>(K - 1));
    }

    void check_admissible() const {
        for (size_t d = 0; d < K; ++d) {
            if (!(0.0 <= gamma[d] && gamma[d] < lambda[d] && lambda[d] <= mu[d]))
                throw ConfigError("theory problem needs 0 <= gamma_d < lambda_d <= mu_d at block " +
                                  std::to_string(d + 1));
        }
        double g = gamma_max();
        double rhs = admissibility_rhs();
        if (!(g < rhs))
            throw ConfigError("inadmissible coupling: gamma = " + std::to_string(g) +
                              " must be < 2*xi/(3(K-1)) = " + std::to_string(rhs));
    }

    double step_a() const { return 2.0 * xi() - 3.0 * gamma_max() * static_cast<double>(K - 1); }

    double step(size_t t) const {
        double g = gamma_max();
        double denom = step_a() * static_cast<double>(t + 2) +
                       1.5 * static_cast<double>(K - 1) * g;
        return 1.5 / denom;
    }
};

// Gradient of f = -L restricted to block d.
inline Vector theory_grad_block(const TheoryProblem& p, const std::vector<Vector>& theta,
                                size_t d) {
    Vector g(p.dims[d]);
    for (size_t i = 0; i < g.len(); ++i)
        g[i] = p.lambda[d] * (theta[d][i] - p.theta_star[d][i]);
    for (size_t e = 0; e < p.K; ++e) {
        if (e == d) continue;
        Vector delta(p.dims[e]);
        for (size_t i = 0; i < delta.len(); ++i) delta[i] = theta[e][i] - p.theta_star[e][i];
        if (e > d) {
            Vector add = matvec(p.coupling[d][e], delta);
            for (size_t i = 0; i < g.len(); ++i) g[i] += add[i];
        } else {
            Vector add = matvec_t(p.coupling[e][d], delta);
            for (size_t i = 0; i < g.len(); ++i) g[i] += add[i];
        }
    }
    return g;
}

// Noiseless population operator G_d at step eta (no projection), for
// contractivity property checks.
inline Vector theory_population_step(const TheoryProblem& p, const std::vector<Vector>& theta,
                                     size_t d, double eta) {
    Vector g = theory_grad_block(p, theta, d);
    Vector out(p.dims[d]);
    for (size_t i = 0; i < out.len(); ++i) out[i] = theta[d][i] - eta * g[i];
    return out;
}

inline double spectral_norm(const Matrix& m) { return std::sqrt(lambda_max(matmul_tn(m, m))); }

// Quadratic problem with lambda_d = mu_d = lambda, ||Gamma_{de}||_2 =
// coupling exactly, gamma_d = (K-1) * coupling, theta* seeded, radii 2.
inline TheoryProblem make_quadratic_problem(size_t K, const std::vector<size_t>& dims,
                                            double lambda, double coupling, uint64_t seed) {
    if (K < 1 || dims.size() != K) throw ConfigError("theory problem needs dims per block");
    if (lambda <= 0.0 || coupling < 0.0)
        throw ConfigError("theory problem needs lambda > 0, coupling >= 0");
    TheoryProblem p;
    p.K = K;
    p.dims = dims;
    p.lambda.assign(K, lambda);
    p.mu.assign(K, lambda);
    p.gamma.assign(K, coupling * static_cast<double>(K - 1));
    p.radius.assign(K, 2.0);
    Rng star_rng(substream(seed, 0x57a12));
    for (size_t d = 0; d < K; ++d) {
        Vector v(dims[d]);
        for (size_t i = 0; i < v.len(); ++i) v[i] = star_rng.normal();
        p.theta_star.push_back(std::move(v));
    }
    p.coupling.assign(K, std::vector<Matrix>(K));
    for (size_t d = 0; d < K; ++d)
        for (size_t e = d + 1; e < K; ++e) {
            Matrix g(dims[d], dims[e]);
            if (coupling > 0.0) {
                Rng rng(substream(seed, 0xc091e + d * K + e));
                for (size_t i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
                double sn = spectral_norm(g);
                for (size_t i = 0; i < g.size(); ++i) g.data()[i] *= coupling / sn;
            }
            p.coupling[d][e] = std::move(g);
        }
    p.check_admissible();
    return p;
}

struct AmTrace {
    // Indexed t = 0..T; entry 0 is the initial point.
    std::vector<std::vector<double>> block_err_sq;  // [t][d]
    std::vector<double> total_err_sq;               // [t]
    std::vector<double> step;                       // eta^0..eta^{T-1}
};

namespace detail {

inline Vector sample_in_ball(Rng& rng, const Vector& center, double radius, bool boundary) {
    Vector v(center.len());
    double nrm = 0.0;
    while (nrm < 1e-12) {
        for (size_t i = 0; i < v.len(); ++i) v[i] = rng.normal();
        nrm = std::sqrt(norm_sq(v));
    }
    double scale = radius / nrm;
    if (!boundary)
        scale *= std::pow(rng.uniform(), 1.0 / static_cast<double>(v.len()));
    for (size_t i = 0; i < v.len(); ++i) v[i] = center[i] + v[i] * scale;
    return v;
}

inline void project_to_ball(Vector& v, const Vector& center, double radius) {
    double d2 = 0.0;
    for (size_t i = 0; i < v.len(); ++i) {
        double d = v[i] - center[i];
        d2 += d * d;
    }
    if (d2 <= radius * radius) return;
    double scale = radius / std::sqrt(d2);
    for (size_t i = 0; i < v.len(); ++i) v[i] = center[i] + (v[i] - center[i]) * scale;
}

}  // namespace detail

// Cyclic projected stochastic gradient run: theta^0_d drawn within r_d/2 of
// theta*_d, then for t = 0..T-1, blocks d = 1..K take
// theta_d <- Pi_{B(theta^0_d, r_d/2)}(theta_d - eta^t (grad_d f + noise)).
inline AmTrace stochastic_am_run(const TheoryProblem& p, size_t T, uint64_t seed) {
    p.check_admissible();
    std::vector<Vector> theta0, theta;
    Rng init_rng(substream(seed, 0x1417));
    for (size_t d = 0; d < p.K; ++d)
        theta0.push_back(detail::sample_in_ball(init_rng, p.theta_star[d], p.radius[d] / 2.0,
                                                false));
    theta = theta0;
    Rng noise_rng(substream(seed, 0x401c3));
    AmTrace trace;
    auto record = [&]() {
        std::vector<double> blocks(p.K);
        double total = 0.0;
        for (size_t d = 0; d < p.K; ++d) {
            double e2 = 0.0;
            for (size_t i = 0; i < p.dims[d]; ++i) {
                double diff = theta[d][i] - p.theta_star[d][i];
                e2 += diff * diff;
            }
            blocks[d] = e2;
            total += e2;
        }
        trace.block_err_sq.push_back(std::move(blocks));
        trace.total_err_sq.push_back(total);
    };
    record();
    for (size_t t = 0; t < T; ++t) {
        double eta = p.step(t);
        trace.step.push_back(eta);
        for (size_t d = 0; d < p.K; ++d) {
            Vector g = theory_grad_block(p, theta, d);
            for (size_t i = 0; i < g.len(); ++i) {
                double noise = p.noise_sigma == 0.0 ? 0.0 : p.noise_sigma * noise_rng.normal();
                theta[d][i] -= eta * (g[i] + noise);
            }
            detail::project_to_ball(theta[d], theta0[d], p.radius[d] / 2.0);
        }
        record();
    }
    return trace;
}

// sup over the ball of E||grad_d f^1||^2, summed over blocks: population part
// by boundary sampling (the quadratic's gradient norm is maximal on the
// boundary), noise part dim_d * noise_sigma^2 exactly.
inline double estimate_sigma_sq(const TheoryProblem& p, size_t samples = 1000,
                                uint64_t seed = 0x51634) {
    Rng rng(substream(seed, 0xba11));
    std::vector<double> sup(p.K, 0.0);
    for (size_t s = 0; s < samples; ++s) {
        std::vector<Vector> theta;
        for (size_t d = 0; d < p.K; ++d)
            theta.push_back(detail::sample_in_ball(rng, p.theta_star[d], p.radius[d], true));
        for (size_t d = 0; d < p.K; ++d)
            sup[d] = std::max(sup[d], norm_sq(theory_grad_block(p, theta, d)));
    }
    double total = 0.0;
    for (size_t d = 0; d < p.K; ++d)
        total += sup[d] + static_cast<double>(p.dims[d]) * p.noise_sigma * p.noise_sigma;
    return total;
}

struct BoundRow {
    size_t t = 0;
    double mean_err = 0.0;
    double rhs = 0.0;
    double stderr_mean = 0.0;
    bool pass = true;
};

struct BoundReport {
    std::vector<BoundRow> rows;
    std::vector<size_t> violations;
    bool all_pass = true;
    double sigma_sq = 0.0;
};

namespace detail {

inline void mean_and_se(const std::vector<AmTrace>& traces, size_t t, double& mean, double& se) {
    double m = static_cast<double>(traces.size());
    mean = 0.0;
    for (const auto& tr : traces) mean += tr.total_err_sq[t];
    mean /= m;
    double var = 0.0;
    for (const auto& tr : traces) {
        double d = tr.total_err_sq[t] - mean;
        var += d * d;
    }
    se = traces.size() > 1 ? std::sqrt(var / (m * (m - 1.0))) : 0.0;
}

}  // namespace detail

// Per-step recursion check over a trace ensemble, within 3 Monte-Carlo
// standard errors of the left side's mean.
inline BoundReport check_recursion(const std::vector<AmTrace>& traces, const TheoryProblem& p,
                                   double sigma_sq = -1.0) {
    if (traces.empty()) throw ConfigError("check_recursion needs at least one trace");
    BoundReport rep;
    rep.sigma_sq = sigma_sq >= 0.0 ? sigma_sq : estimate_sigma_sq(p);
    double g = p.gamma_max();
    double a = p.step_a();
    size_t T = traces[0].step.size();
    for (size_t t = 0; t < T; ++t) {
        double eta = traces[0].step[t];
        double denom = 1.0 - static_cast<double>(p.K - 1) * eta * g;
        double q = eta * a / denom;
        double mean_prev, se_prev, mean_next, se_next;
        detail::mean_and_se(traces, t, mean_prev, se_prev);
        detail::mean_and_se(traces, t + 1, mean_next, se_next);
        double rhs = (1.0 - q) * mean_prev + eta * eta * rep.sigma_sq / denom;
        bool pass = mean_next <= rhs + 3.0 * se_next + 1e-12 * (1.0 + std::abs(rhs));
        rep.rows.push_back({t + 1, mean_next, rhs, se_next, pass});
        if (!pass) {
            rep.violations.push_back(t + 1);
            rep.all_pass = false;
        }
    }
    return rep;
}

struct RateReport {
    std::vector<BoundRow> rows;
    std::vector<size_t> violations;
    bool all_pass = true;
    double sigma_sq = 0.0;
    double slope = 0.0;        // log-log fit over the final decade
    bool slope_applicable = false;  // only when noise dominates
    bool slope_ok = true;
};

// Closed-form rate check: mean error at trace index s obeys
// E0 (2/(s+2))^{3/2} + 9 sigma^2 / (A^2 (s+2)), plus the log-log slope of the
// final decade when noise is present.
inline RateReport check_final_rate(const std::vector<AmTrace>& traces, const TheoryProblem& p,
                                   double sigma_sq = -1.0) {
    if (traces.empty()) throw ConfigError("check_final_rate needs at least one trace");
    RateReport rep;
    rep.sigma_sq = sigma_sq >= 0.0 ? sigma_sq : estimate_sigma_sq(p);
    double a = p.step_a();
    double e0_mean, e0_se;
    detail::mean_and_se(traces, 0, e0_mean, e0_se);
    size_t T = traces[0].step.size();
    for (size_t s = 1; s <= T; ++s) {
        double mean_s, se_s;
        detail::mean_and_se(traces, s, mean_s, se_s);
        double tt = static_cast<double>(s + 2);
        double rhs = e0_mean * std::pow(2.0 / tt, 1.5) + 9.0 * rep.sigma_sq / (a * a * tt);
        bool pass = mean_s <= rhs + 3.0 * se_s + 1e-12 * (1.0 + std::abs(rhs));
        rep.rows.push_back({s, mean_s, rhs, se_s, pass});
        if (!pass) {
            rep.violations.push_back(s);
            rep.all_pass = false;
        }
    }
    // Least-squares slope of log(mean) vs log(s+2) over s in [T/10, T].
    size_t lo = std::max<size_t>(1, T / 10);
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (size_t s = lo; s <= T; ++s) {
        double mean_s, se_s;
        detail::mean_and_se(traces, s, mean_s, se_s);
        if (mean_s <= 0.0) continue;
        double x = std::log(static_cast<double>(s + 2));
        double y = std::log(mean_s);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        n += 1.0;
    }
    rep.slope = n > 1 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : 0.0;
    rep.slope_applicable = p.noise_sigma > 0.0;
    rep.slope_ok = !rep.slope_applicable || (rep.slope >= -1.3 && rep.slope <= -0.7);
    return rep;
}

}  // namespace altmin
