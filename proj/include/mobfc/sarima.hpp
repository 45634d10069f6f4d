#pragma once

// Seasonal ARIMA in state-space form: exact Gaussian likelihood via the Kalman
// filter, maximum-likelihood fitting with Nelder-Mead over a transformed
// parameter space, forecasting, and simulation.
//
// Model, with B the backshift operator and w the differenced series
// w_t = (1-B)^d (1-B^s)^D y_t:
//
//   (1 - φ(B)) (1 - Φ(B^s)) (w_t - μ) = (1 + θ(B)) (1 + Θ(B^s)) ε_t,  ε_t ~ N(0, σ²)
//
// μ is fitted only when `with_constant` is set. Exogenous regressors are not
// supported; `exog_columns` exists so callers can state that explicitly.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mobfc/nelder_mead.hpp"
#include "mobfc/parallel.hpp"
#include "mobfc/series.hpp"

namespace mobfc::ts {

class NonStationaryError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SarimaxSpec {
    std::size_t p = 1, d = 0, q = 1;
    std::size_t P = 1, D = 0, Q = 1;
    std::size_t s = 7;
    bool with_constant = false;
    std::size_t exog_columns = 0;  // reserved; must be 0

    void validate() const {
        if ((P || D || Q) && s < 2) throw std::invalid_argument("seasonal period must be >= 2");
        if (exog_columns != 0)
            throw std::invalid_argument("exogenous regressors are not supported");
    }
    std::size_t ar_order() const { return p + s * P; }
    std::size_t ma_order() const { return q + s * Q; }
    std::size_t state_dim() const { return std::max(ar_order(), ma_order() + 1); }
    std::size_t diff_order() const { return d + s * D; }
    std::size_t n_params() const { return p + q + P + Q + 1 + (with_constant ? 1 : 0); }

    std::string to_string() const {
        return "(" + std::to_string(p) + "," + std::to_string(d) + "," + std::to_string(q) + ")(" +
               std::to_string(P) + "," + std::to_string(D) + "," + std::to_string(Q) + "," +
               std::to_string(s) + ")";
    }
};

struct SarimaxParams {
    std::vector<double> ar;   // φ, length p
    std::vector<double> ma;   // θ, length q
    std::vector<double> sar;  // Φ, length P
    std::vector<double> sma;  // Θ, length Q
    double sigma2 = 1.0;
    double constant = 0.0;

    static SarimaxParams zeros(const SarimaxSpec& spec) {
        return {std::vector<double>(spec.p, 0.0), std::vector<double>(spec.q, 0.0),
                std::vector<double>(spec.P, 0.0), std::vector<double>(spec.Q, 0.0), 1.0, 0.0};
    }
};

// ---------------------------------------------------------------------------
// Lag polynomials. A polynomial is stored as coefficients c[0..n] of B^0..B^n.

using Poly = std::vector<double>;

inline Poly poly_multiply(const Poly& a, const Poly& b) {
    Poly out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

// 1 + sign * (c_1 B^step + c_2 B^{2 step} + ...)
inline Poly lag_poly(std::span<const double> coeffs, double sign, std::size_t step) {
    Poly out(coeffs.size() * step + 1, 0.0);
    out[0] = 1.0;
    for (std::size_t i = 0; i < coeffs.size(); ++i) out[(i + 1) * step] = sign * coeffs[i];
    return out;
}

// (1 - φ(B))(1 - Φ(B^s)) as a polynomial.
inline Poly ar_polynomial(const SarimaxSpec& spec, const SarimaxParams& par) {
    return poly_multiply(lag_poly(par.ar, -1.0, 1), lag_poly(par.sar, -1.0, spec.s));
}

// (1 + θ(B))(1 + Θ(B^s)) as a polynomial.
inline Poly ma_polynomial(const SarimaxSpec& spec, const SarimaxParams& par) {
    return poly_multiply(lag_poly(par.ma, 1.0, 1), lag_poly(par.sma, 1.0, spec.s));
}

// (1-B)^d (1-B^s)^D as a polynomial.
inline Poly diff_polynomial(const SarimaxSpec& spec) {
    Poly out{1.0};
    for (std::size_t i = 0; i < spec.d; ++i) out = poly_multiply(out, {1.0, -1.0});
    for (std::size_t i = 0; i < spec.D; ++i) {
        Poly seasonal(spec.s + 1, 0.0);
        seasonal[0] = 1.0;
        seasonal[spec.s] = -1.0;
        out = poly_multiply(out, seasonal);
    }
    return out;
}

// Coefficients in recursion form: w_t = Σ ar[i] w_{t-1-i} + ε_t + Σ ma[j] ε_{t-1-j}.
struct ExpandedArma {
    std::vector<double> ar;
    std::vector<double> ma;
};

inline ExpandedArma expand(const SarimaxSpec& spec, const SarimaxParams& par) {
    const Poly a = ar_polynomial(spec, par);
    const Poly m = ma_polynomial(spec, par);
    ExpandedArma out;
    for (std::size_t i = 1; i < a.size(); ++i) out.ar.push_back(-a[i]);
    for (std::size_t i = 1; i < m.size(); ++i) out.ma.push_back(m[i]);
    return out;
}

// Roots of c[0] + c[1] z + ... + c[n] z^n via companion-matrix eigenvalues.
inline std::vector<std::complex<double>> polynomial_roots(Poly c) {
    while (!c.empty() && c.back() == 0.0) c.pop_back();
    if (c.size() <= 1) return {};
    const std::size_t n = c.size() - 1;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        companion(0, static_cast<Eigen::Index>(i)) = -c[n - 1 - i] / c[n];
        if (i + 1 < n) companion(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(i)) = 1.0;
    }
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    std::vector<std::complex<double>> roots;
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) roots.push_back(solver.eigenvalues()[i]);
    return roots;
}

// Smallest root modulus; +inf for a constant polynomial.
inline double min_root_modulus(const Poly& c) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& r : polynomial_roots(c)) m = std::min(m, std::abs(r));
    return m;
}

inline bool is_stationary(const SarimaxSpec& spec, const SarimaxParams& par) {
    return min_root_modulus(ar_polynomial(spec, par)) > 1.0;
}

inline bool is_invertible(const SarimaxSpec& spec, const SarimaxParams& par) {
    return min_root_modulus(ma_polynomial(spec, par)) > 1.0;
}

// ---------------------------------------------------------------------------
// State space

// Harvey representation with state dimension m = max(p*, q* + 1):
//   α_{t+1} = T α_t + R ε_t,   w_t = μ + Z α_t
// T has the expanded AR coefficients in its first column and ones on the
// superdiagonal; Z = e_1; R = (1, θ*_1, ..., θ*_{m-1}).
struct StateSpace {
    Eigen::MatrixXd T;
    Eigen::VectorXd Z;
    Eigen::VectorXd R;
    double Q = 1.0;  // innovation variance σ²
    double mean = 0.0;
    Eigen::VectorXd a1;
    Eigen::MatrixXd P1;

    Eigen::Index dim() const { return T.rows(); }
};

namespace detail {

// Direct solve of (I - T⊗T) vec(P) = vec(V). O(m^6), only used when
// doubling fails for roots very close to the unit circle.
inline Eigen::MatrixXd lyapunov_kronecker(const Eigen::MatrixXd& T, const Eigen::MatrixXd& V) {
    const Eigen::Index m = T.rows();
    Eigen::MatrixXd K = Eigen::MatrixXd::Identity(m * m, m * m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            if (T(i, j) != 0.0) K.block(i * m, j * m, m, m) -= T(i, j) * T;
    const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(V.data(), m * m);
    const Eigen::VectorXd x = K.partialPivLu().solve(v);
    Eigen::MatrixXd P = Eigen::Map<const Eigen::MatrixXd>(x.data(), m, m);
    P = 0.5 * (P + P.transpose());
    if (!P.allFinite()) throw NonStationaryError("Lyapunov equation has no finite solution");
    return P;
}

}  // namespace detail

// Solves P = T P T' + V for stable T by the doubling algorithm.
inline Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& T, const Eigen::MatrixXd& V) {
    Eigen::MatrixXd A = T;
    Eigen::MatrixXd P = V;
    for (int iter = 0; iter < 60; ++iter) {
        Eigen::MatrixXd increment = A * P * A.transpose();
        P += increment;
        const double scale = P.cwiseAbs().maxCoeff();
        if (!std::isfinite(scale)) break;
        if (increment.cwiseAbs().maxCoeff() <= 1e-17 * scale) return 0.5 * (P + P.transpose());
        A = A * A;
    }
    return detail::lyapunov_kronecker(T, V);
}

inline StateSpace build_state_space(const SarimaxSpec& spec, const SarimaxParams& par) {
    spec.validate();
    if (par.ar.size() != spec.p || par.ma.size() != spec.q || par.sar.size() != spec.P ||
        par.sma.size() != spec.Q)
        throw std::invalid_argument("parameter lengths do not match the model order");
    if (!(par.sigma2 >= 0.0)) throw std::invalid_argument("sigma2 must be non-negative");
    if (!is_stationary(spec, par)) throw NonStationaryError("AR polynomial has a root inside the unit circle");

    const auto arma = expand(spec, par);
    const auto m = static_cast<Eigen::Index>(spec.state_dim());
    StateSpace ss;
    ss.T = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t i = 0; i < arma.ar.size(); ++i) ss.T(static_cast<Eigen::Index>(i), 0) = arma.ar[i];
    for (Eigen::Index i = 0; i + 1 < m; ++i) ss.T(i, i + 1) = 1.0;
    ss.Z = Eigen::VectorXd::Zero(m);
    ss.Z(0) = 1.0;
    ss.R = Eigen::VectorXd::Zero(m);
    ss.R(0) = 1.0;
    for (std::size_t j = 0; j < arma.ma.size(); ++j) ss.R(static_cast<Eigen::Index>(j + 1)) = arma.ma[j];
    ss.Q = par.sigma2;
    ss.mean = par.constant;
    ss.a1 = Eigen::VectorXd::Zero(m);
    ss.P1 = solve_discrete_lyapunov(ss.T, par.sigma2 * ss.R * ss.R.transpose());
    return ss;
}

struct KalmanOutput {
    double loglik = 0.0;
    std::vector<double> predictions;  // E[w_t | w_1..w_{t-1}]
    std::vector<double> variances;    // Var[w_t | w_1..w_{t-1}]
    Eigen::VectorXd next_state;       // a_{n+1|n}
    Eigen::MatrixXd next_cov;         // P_{n+1|n}
};

namespace detail {

// Applies the companion structure of T: (T a)_i = T_i0 a_0 + a_{i+1}.
inline void transition_vec(const Eigen::MatrixXd& T, const Eigen::VectorXd& a, Eigen::VectorXd& out) {
    const Eigen::Index m = a.size();
    for (Eigen::Index i = 0; i < m; ++i) out(i) = T(i, 0) * a(0) + (i + 1 < m ? a(i + 1) : 0.0);
}

// out = T P T' + Q R R', using the same structure twice.
inline void transition_cov(const StateSpace& ss, const Eigen::MatrixXd& P, Eigen::MatrixXd& work,
                           Eigen::MatrixXd& out) {
    const Eigen::Index m = P.rows();
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            work(i, j) = ss.T(i, 0) * P(0, j) + (i + 1 < m ? P(i + 1, j) : 0.0);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            out(i, j) = ss.T(j, 0) * work(i, 0) + (j + 1 < m ? work(i, j + 1) : 0.0) +
                        ss.Q * ss.R(i) * ss.R(j);
}

}  // namespace detail

// Prediction-error decomposition of the Gaussian log-likelihood of `y`
// (already differenced) under `ss`.
inline KalmanOutput kalman_filter(const StateSpace& ss, std::span<const double> y) {
    const Eigen::Index m = ss.dim();
    Eigen::VectorXd a = ss.a1, a_upd(m);
    Eigen::MatrixXd P = ss.P1, P_upd(m, m), work(m, m);
    KalmanOutput out;
    out.predictions.reserve(y.size());
    out.variances.reserve(y.size());
    const double log2pi = std::log(2.0 * std::numbers::pi);
    for (double obs : y) {
        if (!std::isfinite(obs)) throw std::invalid_argument("kalman_filter: non-finite observation");
        const double pred = ss.mean + a(0);
        const double F = P(0, 0);
        if (!(F > 0.0) || !std::isfinite(F))
            throw NumericalFailure("kalman_filter: non-positive prediction variance");
        const double v = obs - pred;
        out.predictions.push_back(pred);
        out.variances.push_back(F);
        out.loglik += -0.5 * (log2pi + std::log(F) + v * v / F);
        // measurement update
        for (Eigen::Index i = 0; i < m; ++i) a_upd(i) = a(i) + P(i, 0) * v / F;
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j) P_upd(i, j) = P(i, j) - P(i, 0) * P(0, j) / F;
        // time update
        detail::transition_vec(ss.T, a_upd, a);
        detail::transition_cov(ss, P_upd, work, P);
    }
    out.next_state = std::move(a);
    out.next_cov = std::move(P);
    return out;
}

inline double kalman_loglik(const StateSpace& ss, std::span<const double> y) {
    return kalman_filter(ss, y).loglik;
}

// ---------------------------------------------------------------------------
// Parameter transform

// Largest admissible |partial autocorrelation|. tanh saturates to exactly 1
// in double precision for |x| > 19, which would put roots on the unit circle.
inline constexpr double kMaxPartialAutocorr = 0.9999;

// Unconstrained reals → stationary AR coefficients through partial
// autocorrelations (Durbin-Levinson recursion).
inline std::vector<double> pacf_to_coefficients(std::span<const double> x) {
    std::vector<double> phi(x.size()), prev;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double r = kMaxPartialAutocorr * std::tanh(x[k]);
        prev.assign(phi.begin(), phi.begin() + static_cast<std::ptrdiff_t>(k));
        for (std::size_t j = 0; j < k; ++j) phi[j] = prev[j] - r * prev[k - 1 - j];
        phi[k] = r;
    }
    return phi;
}

// Inverse of pacf_to_coefficients (step-down recursion).
inline std::vector<double> coefficients_to_pacf(std::span<const double> coeffs) {
    std::vector<double> phi(coeffs.begin(), coeffs.end());
    std::vector<double> x(phi.size());
    for (std::size_t k = phi.size(); k-- > 0;) {
        const double r = phi[k];
        if (!(std::abs(r) < kMaxPartialAutocorr))
            throw NonStationaryError("coefficients outside the transformable region");
        x[k] = std::atanh(r / kMaxPartialAutocorr);
        std::vector<double> prev(k);
        for (std::size_t j = 0; j < k; ++j) prev[j] = (phi[j] + r * phi[k - 1 - j]) / (1.0 - r * r);
        std::copy(prev.begin(), prev.end(), phi.begin());
    }
    return x;
}

// Layout: [ar(p), ma(q), sar(P), sma(Q), log σ², μ (if with_constant)].
inline SarimaxParams constrain_params(const SarimaxSpec& spec, std::span<const double> u) {
    if (u.size() != spec.n_params()) throw std::invalid_argument("constrain_params: wrong vector length");
    std::size_t at = 0;
    auto block = [&](std::size_t n) {
        auto b = u.subspan(at, n);
        at += n;
        return b;
    };
    auto negate = [](std::vector<double> v) {
        for (auto& x : v) x = -x;
        return v;
    };
    SarimaxParams par;
    par.ar = pacf_to_coefficients(block(spec.p));
    par.ma = negate(pacf_to_coefficients(block(spec.q)));
    par.sar = pacf_to_coefficients(block(spec.P));
    par.sma = negate(pacf_to_coefficients(block(spec.Q)));
    par.sigma2 = std::exp(u[at++]);
    par.constant = spec.with_constant ? u[at] : 0.0;
    return par;
}

inline std::vector<double> unconstrain_params(const SarimaxSpec& spec, const SarimaxParams& par) {
    if (!(par.sigma2 > 0.0)) throw std::invalid_argument("unconstrain_params: sigma2 must be positive");
    std::vector<double> u;
    auto append = [&](const std::vector<double>& v) { u.insert(u.end(), v.begin(), v.end()); };
    auto negate = [](std::vector<double> v) {
        for (auto& x : v) x = -x;
        return v;
    };
    append(coefficients_to_pacf(par.ar));
    append(coefficients_to_pacf(negate(par.ma)));
    append(coefficients_to_pacf(par.sar));
    append(coefficients_to_pacf(negate(par.sma)));
    u.push_back(std::log(par.sigma2));
    if (spec.with_constant) u.push_back(par.constant);
    return u;
}

// ---------------------------------------------------------------------------
// Differencing

// Returns w_t = D(B) y_t for t >= L, where L = d + s·D.
inline std::vector<double> difference(const SarimaxSpec& spec, std::span<const double> y) {
    const Poly c = diff_polynomial(spec);
    const std::size_t lag = c.size() - 1;
    std::vector<double> w;
    for (std::size_t t = lag; t < y.size(); ++t) {
        double v = 0.0;
        for (std::size_t j = 0; j <= lag; ++j) v += c[j] * y[t - j];
        w.push_back(v);
    }
    return w;
}

// ---------------------------------------------------------------------------
// Likelihood, prediction, forecasting

struct OneStep {
    double loglik = 0.0;
    std::vector<double> predictions;  // aligned with y; NaN for the first d + s·D points
    std::vector<double> variances;
};

inline OneStep one_step_predictions(const SarimaxSpec& spec, const SarimaxParams& par,
                                    std::span<const double> y) {
    const auto ss = build_state_space(spec, par);
    const auto w = difference(spec, y);
    const auto kf = kalman_filter(ss, w);
    const Poly c = diff_polynomial(spec);
    const std::size_t lag = c.size() - 1;
    OneStep out;
    out.loglik = kf.loglik;
    out.predictions.assign(y.size(), std::numeric_limits<double>::quiet_NaN());
    out.variances.assign(y.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t t = lag; t < y.size(); ++t) {
        double carry = 0.0;
        for (std::size_t j = 1; j <= lag; ++j) carry -= c[j] * y[t - j];
        out.predictions[t] = kf.predictions[t - lag] + carry;
        out.variances[t] = kf.variances[t - lag];
    }
    return out;
}

struct Forecast {
    std::vector<double> mean;
    std::vector<double> variance;
    std::vector<double> lower95;
    std::vector<double> upper95;
};

inline constexpr double kZ95 = 1.96;

// h-step forecasts from the end of `y`. Interval half-width is 1.96 times the
// square root of the exact finite-sample forecast variance.
inline Forecast forecast(const SarimaxSpec& spec, const SarimaxParams& par, std::span<const double> y,
                         std::size_t horizon) {
    if (horizon < 1) throw std::invalid_argument("forecast: horizon must be >= 1");
    const auto ss = build_state_space(spec, par);
    const auto w = difference(spec, y);
    const auto kf = kalman_filter(ss, w);
    const Eigen::Index m = ss.dim();

    // ARMA-part forecast means and the joint covariance of their errors:
    // Cov(e_i, e_j) = (T^{j-i} P_i)_{00} for j >= i.
    std::vector<double> wmean(horizon);
    Eigen::MatrixXd cov(static_cast<Eigen::Index>(horizon), static_cast<Eigen::Index>(horizon));
    Eigen::VectorXd a = kf.next_state, tmp(m), col(m);
    Eigen::MatrixXd P = kf.next_cov, work(m, m), Pn(m, m);
    for (std::size_t i = 0; i < horizon; ++i) {
        wmean[i] = ss.mean + a(0);
        col = P.col(0);
        for (std::size_t j = i; j < horizon; ++j) {
            cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col(0);
            cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = col(0);
            detail::transition_vec(ss.T, col, tmp);
            col = tmp;
        }
        detail::transition_vec(ss.T, a, tmp);
        a = tmp;
        detail::transition_cov(ss, P, work, Pn);
        P = Pn;
    }

    // Integrate: y_{n+h} = w_{n+h} - Σ c_j y_{n+h-j}; errors follow the same
    // recursion, e^y = A e^w with A unit lower triangular.
    const Poly c = diff_polynomial(spec);
    const std::size_t lag = c.size() - 1;
    Forecast out;
    std::vector<double> hist(y.begin(), y.end());
    const auto H = static_cast<Eigen::Index>(horizon);
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(H, H);
    for (std::size_t h = 0; h < horizon; ++h) {
        double v = wmean[h];
        for (std::size_t j = 1; j <= lag; ++j) {
            v -= c[j] * hist[hist.size() - j];
            if (h >= j) A.row(static_cast<Eigen::Index>(h)) -= c[j] * A.row(static_cast<Eigen::Index>(h - j));
        }
        hist.push_back(v);
        out.mean.push_back(v);
    }
    const Eigen::MatrixXd ycov = lag == 0 ? cov : Eigen::MatrixXd(A * cov * A.transpose());
    for (std::size_t h = 0; h < horizon; ++h) {
        const double var = std::max(0.0, ycov(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(h)));
        out.variance.push_back(var);
        out.lower95.push_back(out.mean[h] - kZ95 * std::sqrt(var));
        out.upper95.push_back(out.mean[h] + kZ95 * std::sqrt(var));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Simulation

// Gaussian-innovation simulation; the first 10·m draws are burn-in.
inline TimeSeries simulate_sarma(const SarimaxSpec& spec, const SarimaxParams& par, std::size_t n,
                                 std::uint64_t seed, Timestamp start = {},
                                 Granularity g = Granularity::day) {
    spec.validate();
    if (!is_stationary(spec, par)) throw NonStationaryError("simulate_sarma: non-stationary parameters");
    const auto arma = expand(spec, par);
    const std::size_t burn = 10 * spec.state_dim();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sd = std::sqrt(par.sigma2);
    std::vector<double> w(burn + n, 0.0), eps(burn + n, 0.0);
    for (std::size_t t = 0; t < burn + n; ++t) {
        eps[t] = sd * normal(rng);
        double v = eps[t];
        for (std::size_t i = 0; i < arma.ar.size() && i < t; ++i) v += arma.ar[i] * w[t - 1 - i];
        for (std::size_t j = 0; j < arma.ma.size() && j < t; ++j) v += arma.ma[j] * eps[t - 1 - j];
        w[t] = v;
    }
    TimeSeries out{start, g, {}};
    out.values.reserve(n);
    for (std::size_t t = burn; t < burn + n; ++t) out.values.push_back(par.constant + w[t]);
    // Integrate when the model order includes differencing.
    const Poly c = diff_polynomial(spec);
    if (c.size() > 1) {
        for (std::size_t t = 0; t < n; ++t)
            for (std::size_t j = 1; j < c.size() && j <= t; ++j) out.values[t] -= c[j] * out.values[t - j];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Estimation

struct FitOptions {
    std::size_t max_evals = 4000;  // per restart
    double tolerance = 1e-9;
    std::size_t restarts = 5;
    std::uint64_t seed = 42;
    unsigned threads = 1;
};

struct FitResult {
    SarimaxSpec spec;
    SarimaxParams params;
    double loglik = -std::numeric_limits<double>::infinity();
    bool converged = false;
    std::size_t n_evals = 0;
    std::size_t best_restart = 0;
    double rmse_in_sample = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> rmse_out_of_sample;
    double min_ar_root = std::numeric_limits<double>::infinity();
    double min_ma_root = std::numeric_limits<double>::infinity();
    std::vector<double> objective_history;  // best -loglik per simplex iteration, best restart
};

namespace detail {

inline double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double variance_of(std::span<const double> v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

}  // namespace detail

// Maximizes the exact likelihood with Nelder-Mead in unconstrained
// coordinates. The series is rescaled to unit standard deviation internally;
// reported parameters and log-likelihood are on the original scale.
inline FitResult fit_mle(const SarimaxSpec& spec, std::span<const double> y, const FitOptions& opts = {}) {
    spec.validate();
    const auto w = difference(spec, y);
    if (w.size() < spec.state_dim() + 5)
        throw std::invalid_argument("fit_mle: series too short for a state dimension of " +
                                    std::to_string(spec.state_dim()));
    const double var = detail::variance_of(w);
    if (!(var > 0.0)) throw std::invalid_argument("fit_mle: degenerate series (zero variance)");
    const double scale = std::sqrt(var);
    std::vector<double> z(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) z[i] = w[i] / scale;

    // The differenced series is fitted directly, so the polynomial for the
    // optimizer carries no differencing.
    SarimaxSpec arma_spec = spec;
    arma_spec.d = arma_spec.D = 0;

    auto objective = [&](const std::vector<double>& u) {
        try {
            const auto par = constrain_params(arma_spec, u);
            return -kalman_loglik(build_state_space(arma_spec, par), z);
        } catch (const std::exception&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    std::vector<double> x0(arma_spec.n_params(), 0.0);
    const std::size_t n_coef = spec.p + spec.q + spec.P + spec.Q;
    const double zmean = detail::mean_of(z);
    double zms = 0.0;
    for (double v : z) zms += v * v;
    zms /= static_cast<double>(z.size());
    x0[n_coef] = std::log(spec.with_constant ? 1.0 : zms);
    if (spec.with_constant) x0[n_coef + 1] = zmean;

    const std::size_t restarts = std::max<std::size_t>(1, opts.restarts);
    std::vector<std::vector<double>> starts(restarts, x0);
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> jitter(0.0, 0.5);
    for (std::size_t r = 1; r < restarts; ++r)
        for (std::size_t i = 0; i < n_coef; ++i) starts[r][i] += jitter(rng);

    optim::NelderMeadOptions nm;
    nm.max_evals = opts.max_evals;
    nm.ftol = opts.tolerance;
    std::vector<optim::NelderMeadResult> results(restarts);
    parallel_tasks(restarts, opts.threads, [&](std::size_t r) {
        auto res = optim::nelder_mead(objective, starts[r], nm);
        // Restart once from the optimum to escape a collapsed simplex.
        auto polish = optim::nelder_mead(objective, res.x, nm);
        polish.n_evals += res.n_evals;
        polish.best_history.insert(polish.best_history.begin(), res.best_history.begin(), res.best_history.end());
        if (!(polish.fval <= res.fval)) {
            polish.x = res.x;
            polish.fval = res.fval;
        }
        results[r] = std::move(polish);
    });

    std::size_t best = 0;
    FitResult out;
    out.spec = spec;
    for (std::size_t r = 0; r < restarts; ++r) {
        out.n_evals += results[r].n_evals;
        if (results[r].fval < results[best].fval) best = r;
    }
    if (!std::isfinite(results[best].fval))
        throw NumericalFailure("fit_mle: no finite likelihood found");
    out.best_restart = best;
    out.converged = results[best].converged;
    out.objective_history = results[best].best_history;

    SarimaxParams par = constrain_params(arma_spec, results[best].x);
    par.sigma2 *= scale * scale;
    par.constant *= scale;
    out.params = par;

    const auto pred = one_step_predictions(spec, par, y);
    out.loglik = pred.loglik;
    std::vector<double> p, a;
    for (std::size_t t = 0; t < y.size(); ++t) {
        if (std::isnan(pred.predictions[t])) continue;
        p.push_back(pred.predictions[t]);
        a.push_back(y[t]);
    }
    out.rmse_in_sample = rmse(p, a);
    out.min_ar_root = min_root_modulus(ar_polynomial(spec, par));
    out.min_ma_root = min_root_modulus(ma_polynomial(spec, par));
    return out;
}

// Scores an h-step forecast from the end of `train` against `test`.
inline Forecast evaluate_out_of_sample(FitResult& fit, std::span<const double> train,
                                       std::span<const double> test) {
    auto fc = forecast(fit.spec, fit.params, train, test.size());
    fit.rmse_out_of_sample = rmse(fc.mean, test);
    return fc;
}

inline nlohmann::ordered_json to_json(const SarimaxSpec& s) {
    return {{"order", {s.p, s.d, s.q}},
            {"seasonal_order", {s.P, s.D, s.Q, s.s}},
            {"with_constant", s.with_constant},
            {"exogenous", nullptr}};
}

inline nlohmann::ordered_json to_json(const SarimaxParams& p) {
    return {{"ar", p.ar}, {"ma", p.ma}, {"seasonal_ar", p.sar}, {"seasonal_ma", p.sma},
            {"sigma2", p.sigma2}, {"constant", p.constant}};
}

}  // namespace mobfc::ts
