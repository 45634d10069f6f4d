#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "mobfc/sarima.hpp"

using namespace mobfc;
using namespace mobfc::ts;

namespace {

SarimaxSpec make_spec(std::size_t p, std::size_t q, std::size_t P = 0, std::size_t Q = 0, std::size_t s = 7) {
    SarimaxSpec spec;
    spec.p = p;
    spec.q = q;
    spec.P = P;
    spec.Q = Q;
    spec.s = s;
    return spec;
}

// Autocovariances of a causal ARMA process from its MA(∞) weights,
// with the lag polynomials multiplied out by hand here.
std::vector<double> psi_autocov(const std::vector<double>& ar, const std::vector<double>& ma, double sigma2,
                                std::size_t max_lag, std::size_t terms = 20000) {
    std::vector<double> psi(terms, 0.0);
    for (std::size_t j = 0; j < terms; ++j) {
        double v = j == 0 ? 1.0 : (j <= ma.size() ? ma[j - 1] : 0.0);
        for (std::size_t i = 1; i <= ar.size() && i <= j; ++i) v += ar[i - 1] * psi[j - i];
        psi[j] = v;
    }
    std::vector<double> g(max_lag + 1, 0.0);
    for (std::size_t h = 0; h <= max_lag; ++h)
        for (std::size_t j = 0; j + h < terms; ++j) g[h] += sigma2 * psi[j] * psi[j + h];
    return g;
}

std::vector<double> multiply(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> c(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
    return c;
}

// Multiplicative seasonal model expanded to plain ARMA coefficients (in the
// y_t = Σ a_i y_{t-i} + e_t + Σ m_j e_{t-j} sign convention).
std::pair<std::vector<double>, std::vector<double>> seasonal_to_arma(const SarimaxParams& p, std::size_t s) {
    std::vector<double> ar{1.0}, sar{1.0}, ma{1.0}, sma{1.0};
    for (double c : p.ar) ar.push_back(-c);
    for (double c : p.ma) ma.push_back(c);
    for (std::size_t i = 0; i < p.sar.size(); ++i) {
        sar.resize((i + 1) * s + 1, 0.0);
        sar.back() = -p.sar[i];
    }
    for (std::size_t i = 0; i < p.sma.size(); ++i) {
        sma.resize((i + 1) * s + 1, 0.0);
        sma.back() = p.sma[i];
    }
    auto a = multiply(ar, sar), m = multiply(ma, sma);
    std::vector<double> ao, mo;
    for (std::size_t i = 1; i < a.size(); ++i) ao.push_back(-a[i]);
    for (std::size_t i = 1; i < m.size(); ++i) mo.push_back(m[i]);
    return {ao, mo};
}

// Exact Gaussian log-likelihood from the full Toeplitz covariance matrix.
double dense_loglik(const std::vector<double>& gamma, const std::vector<double>& y, double mean = 0.0) {
    const auto n = static_cast<Eigen::Index>(y.size());
    Eigen::MatrixXd S(n, n);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v(i) = y[static_cast<std::size_t>(i)] - mean;
        for (Eigen::Index j = 0; j < n; ++j) S(i, j) = gamma[static_cast<std::size_t>(std::abs(i - j))];
    }
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    const Eigen::MatrixXd L = llt.matrixL();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(L(i, i));
    const double quad = v.dot(llt.solve(v));
    return -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi) + logdet + quad);
}

std::vector<double> noise(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, scale);
    std::vector<double> y(n);
    for (auto& v : y) v = d(rng);
    return y;
}

}  // namespace

TEST(AutocovOracle, PsiWeightsMatchClosedForms) {
    const double phi = 0.6, theta = 0.3, s2 = 1.7;
    auto ar1 = psi_autocov({phi}, {}, s2, 3);
    EXPECT_NEAR(ar1[0], s2 / (1 - phi * phi), 1e-12);
    EXPECT_NEAR(ar1[2], s2 * phi * phi / (1 - phi * phi), 1e-12);
    auto ma1 = psi_autocov({}, {theta}, s2, 2);
    EXPECT_NEAR(ma1[0], s2 * (1 + theta * theta), 1e-14);
    EXPECT_NEAR(ma1[1], s2 * theta, 1e-14);
    EXPECT_NEAR(ma1[2], 0.0, 1e-14);
    auto arma = psi_autocov({phi}, {theta}, s2, 2);
    EXPECT_NEAR(arma[0], s2 * (1 + 2 * phi * theta + theta * theta) / (1 - phi * phi), 1e-12);
    EXPECT_NEAR(arma[1], s2 * (1 + phi * theta) * (phi + theta) / (1 - phi * phi), 1e-12);
    EXPECT_NEAR(arma[2], phi * arma[1], 1e-12);
}

TEST(KalmanLikelihood, MatchesDenseGaussianOracle) {
    struct Case {
        SarimaxSpec spec;
        SarimaxParams par;
    };
    std::vector<Case> cases;
    {
        SarimaxParams p = SarimaxParams::zeros(make_spec(1, 0));
        p.ar = {0.7};
        p.sigma2 = 2.0;
        cases.push_back({make_spec(1, 0), p});
    }
    {
        SarimaxParams p = SarimaxParams::zeros(make_spec(0, 1));
        p.ma = {-0.4};
        p.sigma2 = 0.5;
        cases.push_back({make_spec(0, 1), p});
    }
    {
        SarimaxParams p = SarimaxParams::zeros(make_spec(1, 1));
        p.ar = {0.6};
        p.ma = {0.3};
        cases.push_back({make_spec(1, 1), p});
    }
    {
        SarimaxParams p = SarimaxParams::zeros(make_spec(0, 0, 1, 0));
        p.sar = {0.5};
        cases.push_back({make_spec(0, 0, 1, 0), p});
    }
    {
        SarimaxParams p = SarimaxParams::zeros(make_spec(1, 1, 1, 1));
        p.ar = {0.6};
        p.ma = {0.3};
        p.sar = {0.5};
        p.sma = {0.2};
        p.sigma2 = 1.3;
        cases.push_back({make_spec(1, 1, 1, 1), p});
    }
    {
        SarimaxParams p = SarimaxParams::zeros(make_spec(2, 2, 0, 1, 4));
        p.ar = {0.5, -0.3};
        p.ma = {0.2, 0.1};
        p.sma = {-0.5};
        cases.push_back({make_spec(2, 2, 0, 1, 4), p});
    }
    {
        auto spec = make_spec(1, 0);
        spec.with_constant = true;
        SarimaxParams p = SarimaxParams::zeros(spec);
        p.ar = {-0.4};
        p.constant = 3.0;
        cases.push_back({spec, p});
    }

    std::uint64_t seed = 100;
    for (const auto& c : cases) {
        const auto [ar, ma] = seasonal_to_arma(c.par, c.spec.s);
        for (std::size_t n : {1u, 2u, 9u, 40u}) {
            auto y = noise(n, seed++, 1.5);
            for (auto& v : y) v += c.par.constant;
            const auto gamma = psi_autocov(ar, ma, c.par.sigma2, n);
            const double want = dense_loglik(gamma, y, c.par.constant);
            const double got = kalman_loglik(build_state_space(c.spec, c.par), y);
            EXPECT_NEAR(got, want, 1e-8) << c.spec.to_string() << " n=" << n;
        }
    }
}

TEST(KalmanLikelihood, WhiteNoiseAtZero) {
    auto spec = make_spec(0, 0);
    auto ss = build_state_space(spec, SarimaxParams::zeros(spec));
    std::vector<double> y{0, 0, 0};
    EXPECT_NEAR(kalman_loglik(ss, y), 3 * (-0.5 * std::log(2 * std::numbers::pi)), 1e-14);
}

TEST(StateSpace, StationaryInitialCovariance) {
    auto spec = make_spec(1, 0);
    SarimaxParams p = SarimaxParams::zeros(spec);
    p.ar = {0.5};
    auto ss = build_state_space(spec, p);
    EXPECT_NEAR(ss.P1(0, 0), 1.0 / (1 - 0.25), 1e-12);
    EXPECT_EQ(spec.state_dim(), 1u);
    EXPECT_EQ(make_spec(1, 1, 1, 1).state_dim(), 9u);
}

TEST(StateSpace, RejectsNonStationary) {
    auto spec = make_spec(1, 0);
    SarimaxParams p = SarimaxParams::zeros(spec);
    p.ar = {1.0};
    EXPECT_THROW(build_state_space(spec, p), NonStationaryError);
    p.ar = {-1.2};
    EXPECT_THROW(build_state_space(spec, p), NonStationaryError);
}

TEST(Polynomials, ExpansionMatchesHandMultiplication) {
    auto spec = make_spec(1, 1, 1, 1);
    SarimaxParams p = SarimaxParams::zeros(spec);
    p.ar = {0.5};
    p.sar = {0.3};
    p.ma = {0.4};
    p.sma = {0.2};
    auto e = expand(spec, p);
    // (1 - 0.5B)(1 - 0.3B^7) = 1 - 0.5B - 0.3B^7 + 0.15B^8
    std::vector<double> ar_want{0.5, 0, 0, 0, 0, 0, 0.3, -0.15};
    // (1 + 0.4B)(1 + 0.2B^7) = 1 + 0.4B + 0.2B^7 + 0.08B^8
    std::vector<double> ma_want{0.4, 0, 0, 0, 0, 0, 0.2, 0.08};
    ASSERT_EQ(e.ar.size(), ar_want.size());
    ASSERT_EQ(e.ma.size(), ma_want.size());
    for (std::size_t i = 0; i < ar_want.size(); ++i) {
        EXPECT_NEAR(e.ar[i], ar_want[i], 1e-15);
        EXPECT_NEAR(e.ma[i], ma_want[i], 1e-15);
    }
    const auto [ar2, ma2] = seasonal_to_arma(p, 7);
    EXPECT_EQ(ar2, e.ar);
}

TEST(Polynomials, RootModulus) {
    EXPECT_NEAR(min_root_modulus({1.0, -0.5}), 2.0, 1e-12);
    // 1 - 0.25B^2 has roots ±2
    EXPECT_NEAR(min_root_modulus({1.0, 0.0, -0.25}), 2.0, 1e-12);
    EXPECT_EQ(min_root_modulus({1.0}), std::numeric_limits<double>::infinity());
}

TEST(Differencing, SimpleAndSeasonal) {
    auto spec = make_spec(0, 0);
    spec.d = 1;
    std::vector<double> y{1, 4, 9, 16};
    EXPECT_EQ(difference(spec, y), (std::vector<double>{3, 5, 7}));
    spec.d = 0;
    spec.D = 1;
    spec.s = 2;
    EXPECT_EQ(difference(spec, y), (std::vector<double>{8, 12}));
}

TEST(Transform, ZeroMapsToZeroCoefficients) {
    auto spec = make_spec(2, 1, 1, 1);
    std::vector<double> u(spec.n_params(), 0.0);
    auto p = constrain_params(spec, u);
    for (double c : p.ar) EXPECT_EQ(c, 0.0);
    for (double c : p.ma) EXPECT_EQ(c, 0.0);
    EXPECT_EQ(p.sigma2, 1.0);
}

TEST(Transform, RoundTrip) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-3, 3);
    auto spec = make_spec(3, 2, 1, 1);
    spec.with_constant = true;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> x(spec.n_params());
        for (auto& v : x) v = u(rng);
        auto back = unconstrain_params(spec, constrain_params(spec, x));
        ASSERT_EQ(back.size(), x.size());
        for (std::size_t i = 0; i < x.size(); ++i) ASSERT_NEAR(back[i], x[i], 1e-8 * std::max(1.0, std::abs(x[i])));
    }
}

TEST(Transform, ExtremeInputsStayStationaryAndInvertible) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> huge(-40, 40), moderate(-3, 3);
    const auto seasonal = make_spec(1, 1, 1, 1);
    const auto higher = make_spec(3, 3, 1, 1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> x(seasonal.n_params());
        for (auto& v : x) v = huge(rng);
        x.back() = 0.0;
        auto p = constrain_params(seasonal, x);
        ASSERT_TRUE(is_stationary(seasonal, p));
        ASSERT_TRUE(is_invertible(seasonal, p));
        ASSERT_NO_THROW(build_state_space(seasonal, p));

        std::vector<double> z(higher.n_params());
        for (auto& v : z) v = moderate(rng);
        auto q = constrain_params(higher, z);
        ASSERT_TRUE(is_stationary(higher, q));
        ASSERT_TRUE(is_invertible(higher, q));
        ASSERT_NO_THROW(build_state_space(higher, q));
    }
}

TEST(Forecast, Ar1HandComputed) {
    auto spec = make_spec(1, 0);
    SarimaxParams p = SarimaxParams::zeros(spec);
    p.ar = {0.5};
    std::vector<double> y{3.0, -1.0, 10.0};
    auto fc = forecast(spec, p, y, 3);
    EXPECT_NEAR(fc.mean[0], 5.0, 1e-12);
    EXPECT_NEAR(fc.mean[1], 2.5, 1e-12);
    EXPECT_NEAR(fc.mean[2], 1.25, 1e-12);
    EXPECT_NEAR(fc.variance[0], 1.0, 1e-12);
    EXPECT_NEAR(fc.variance[1], 1.25, 1e-12);
    EXPECT_NEAR(fc.variance[2], 1.3125, 1e-12);
    EXPECT_NEAR(fc.upper95[0] - fc.mean[0], 1.96, 1e-12);
}

TEST(Forecast, WhiteNoiseWithConstant) {
    auto spec = make_spec(0, 0);
    spec.with_constant = true;
    SarimaxParams p = SarimaxParams::zeros(spec);
    p.constant = 42.0;
    p.sigma2 = 4.0;
    auto fc = forecast(spec, p, std::vector<double>{40, 45, 41}, 4);
    for (std::size_t h = 0; h < 4; ++h) {
        EXPECT_NEAR(fc.mean[h], 42.0, 1e-12);
        EXPECT_NEAR(fc.variance[h], 4.0, 1e-12);
        EXPECT_NEAR(fc.lower95[h], 42.0 - 1.96 * 2.0, 1e-12);
    }
}

TEST(Forecast, RandomWalkVarianceGrowsLinearly) {
    auto spec = make_spec(0, 0);
    spec.d = 1;
    SarimaxParams p = SarimaxParams::zeros(spec);
    p.sigma2 = 2.0;
    auto fc = forecast(spec, p, std::vector<double>{1, 3, 2, 7}, 5);
    for (std::size_t h = 0; h < 5; ++h) {
        EXPECT_NEAR(fc.mean[h], 7.0, 1e-12);
        EXPECT_NEAR(fc.variance[h], 2.0 * static_cast<double>(h + 1), 1e-10);
    }
}

TEST(Forecast, OneStepAheadMatchesFilterPrediction) {
    std::vector<SarimaxSpec> specs{make_spec(1, 1, 1, 1), make_spec(2, 1, 0, 1, 4)};
    specs[1].d = 1;
    auto s3 = make_spec(1, 0, 1, 0);
    s3.D = 1;
    specs.push_back(s3);
    for (const auto& spec : specs) {
        SarimaxParams p = SarimaxParams::zeros(spec);
        if (!p.ar.empty()) p.ar[0] = 0.4;
        if (!p.ma.empty()) p.ma[0] = 0.2;
        if (!p.sar.empty()) p.sar[0] = 0.3;
        if (!p.sma.empty()) p.sma[0] = -0.3;
        auto y = noise(60, 7);
        auto fc = forecast(spec, p, std::span(y).first(59), 1);
        auto os = one_step_predictions(spec, p, y);
        EXPECT_NEAR(fc.mean[0], os.predictions[59], 1e-9) << spec.to_string();
        EXPECT_NEAR(fc.variance[0], os.variances[59], 1e-9) << spec.to_string();
    }
}

TEST(Forecast, IntervalsWidenForStationaryModels) {
    auto spec = make_spec(1, 1, 1, 1);
    SarimaxParams p = SarimaxParams::zeros(spec);
    p.ar = {0.6};
    p.ma = {0.3};
    p.sar = {0.5};
    p.sma = {0.2};
    auto y = simulate_sarma(spec, p, 200, 3).values;
    auto fc = forecast(spec, p, y, 30);
    for (std::size_t h = 1; h < 30; ++h) EXPECT_GE(fc.variance[h], fc.variance[h - 1] - 1e-12);
    const auto [ar, ma] = seasonal_to_arma(p, 7);
    EXPECT_LE(fc.variance.back(), psi_autocov(ar, ma, 1.0, 0)[0] + 1e-9);
}

TEST(Simulate, DeterministicAndMatchesMoments) {
    auto spec = make_spec(1, 0);
    spec.with_constant = true;
    SarimaxParams p = SarimaxParams::zeros(spec);
    p.ar = {0.5};
    p.constant = 10.0;
    auto a = simulate_sarma(spec, p, 20000, 5);
    EXPECT_EQ(a.values, simulate_sarma(spec, p, 20000, 5).values);
    double m = 0, v = 0;
    for (double x : a.values) m += x;
    m /= 20000;
    for (double x : a.values) v += (x - m) * (x - m);
    v /= 20000;
    EXPECT_NEAR(m, 10.0, 0.05);
    EXPECT_NEAR(v, 1.0 / 0.75, 0.06);
}

TEST(NelderMead, Rosenbrock) {
    auto f = [](const std::vector<double>& x) {
        return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
    };
    optim::NelderMeadOptions o;
    o.max_evals = 5000;
    o.ftol = 1e-14;
    auto r = optim::nelder_mead(f, {-1.2, 1.0}, o);
    EXPECT_NEAR(r.x[0], 1.0, 1e-3);
    EXPECT_NEAR(r.x[1], 1.0, 1e-3);
    for (std::size_t i = 1; i < r.best_history.size(); ++i) EXPECT_LE(r.best_history[i], r.best_history[i - 1]);
}

TEST(FitMle, RecoversSeasonalArma) {
    auto spec = make_spec(1, 1, 1, 1);
    SarimaxParams truth = SarimaxParams::zeros(spec);
    truth.ar = {0.6};
    truth.ma = {0.3};
    truth.sar = {0.5};
    truth.sma = {0.2};
    const auto y = simulate_sarma(spec, truth, 700, 2024).values;
    auto fit = fit_mle(spec, y);
    EXPECT_NEAR(fit.params.ar[0], 0.6, 0.15);
    EXPECT_NEAR(fit.params.ma[0], 0.3, 0.15);
    EXPECT_NEAR(fit.params.sar[0], 0.5, 0.15);
    EXPECT_NEAR(fit.params.sma[0], 0.2, 0.15);
    EXPECT_NEAR(fit.params.sigma2, 1.0, 0.15);
    EXPECT_GE(fit.loglik, kalman_loglik(build_state_space(spec, truth), y) - 1e-6);
    EXPECT_GT(fit.min_ar_root, 1.0);
    EXPECT_GT(fit.min_ma_root, 1.0);
    for (std::size_t i = 1; i < fit.objective_history.size(); ++i)
        EXPECT_LE(fit.objective_history[i], fit.objective_history[i - 1]);
}

TEST(FitMle, RecoversAr1) {
    auto spec = make_spec(1, 0);
    SarimaxParams truth = SarimaxParams::zeros(spec);
    truth.ar = {0.8};
    const auto y = simulate_sarma(spec, truth, 500, 77).values;
    auto fit = fit_mle(spec, y);
    EXPECT_NEAR(fit.params.ar[0], 0.8, 0.1);
    EXPECT_GE(fit.loglik, kalman_loglik(build_state_space(spec, truth), y) - 1e-6);
}

TEST(FitMle, DeterministicForFixedSeed) {
    auto spec = make_spec(1, 1);
    spec.with_constant = true;
    SarimaxParams truth = SarimaxParams::zeros(spec);
    truth.ar = {0.3};
    truth.ma = {0.4};
    truth.constant = 50;
    const auto y = simulate_sarma(spec, truth, 150, 8).values;
    FitOptions o;
    auto a = fit_mle(spec, y, o);
    o.threads = 3;
    auto b = fit_mle(spec, y, o);
    EXPECT_EQ(a.params.ar, b.params.ar);
    EXPECT_EQ(a.loglik, b.loglik);
    EXPECT_NEAR(a.params.constant, 50, 1.0);
}

TEST(FitMle, RejectsDegenerateInput) {
    auto spec = make_spec(1, 1, 1, 1);
    EXPECT_THROW(fit_mle(spec, std::vector<double>(5, 1.0)), std::invalid_argument);
    EXPECT_THROW(fit_mle(spec, std::vector<double>(60, 1.0)), std::invalid_argument);
    spec.exog_columns = 2;
    EXPECT_THROW(fit_mle(spec, noise(60, 1)), std::invalid_argument);
}
