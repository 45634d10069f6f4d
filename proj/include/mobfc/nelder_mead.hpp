#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

namespace mobfc::optim {

struct NelderMeadOptions {
    std::size_t max_evals = 5000;
    double ftol = 1e-9;     // spread of simplex values, absolute + relative
    double xtol = 1e-7;     // simplex diameter
    double initial_step = 0.25;
};

struct NelderMeadResult {
    std::vector<double> x;
    double fval = std::numeric_limits<double>::infinity();
    std::size_t n_evals = 0;
    bool converged = false;
    std::vector<double> best_history;  // best value after each iteration
};

// Derivative-free simplex minimization with the standard coefficients
// (reflect 1, expand 2, contract 1/2, shrink 1/2). Non-finite objective
// values are treated as +inf so the simplex steps away from them.
template <class Objective>
NelderMeadResult nelder_mead(Objective&& f, std::vector<double> x0, const NelderMeadOptions& opts = {}) {
    const std::size_t n = x0.size();
    NelderMeadResult res;
    auto eval = [&](const std::vector<double>& x) {
        ++res.n_evals;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    std::vector<std::vector<double>> simplex(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) {
        const double step = x0[i] != 0.0 ? opts.initial_step * std::max(1.0, std::abs(x0[i])) : opts.initial_step;
        simplex[i + 1][i] += step;
    }
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(simplex[i]);

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);
    auto point = [&](const std::vector<double>& from, double t, std::vector<double>& out) {
        for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + t * (from[j] - centroid[j]);
    };

    while (true) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
        res.best_history.push_back(fv[best]);

        double diam = 0.0;
        for (std::size_t i = 0; i <= n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                diam = std::max(diam, std::abs(simplex[i][j] - simplex[best][j]));
        const double spread = fv[worst] - fv[best];
        if (std::isfinite(spread) && spread <= opts.ftol * (1.0 + std::abs(fv[best])) && diam <= opts.xtol) {
            res.converged = true;
            break;
        }
        if (res.n_evals >= opts.max_evals) break;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);
        }

        point(simplex[worst], -1.0, xr);
        const double fr = eval(xr);
        if (fr < fv[best]) {
            point(simplex[worst], -2.0, xe);
            const double fe = eval(xe);
            if (fe < fr) {
                simplex[worst] = xe;
                fv[worst] = fe;
            } else {
                simplex[worst] = xr;
                fv[worst] = fr;
            }
            continue;
        }
        if (fr < fv[second]) {
            simplex[worst] = xr;
            fv[worst] = fr;
            continue;
        }
        // Contraction: outside if the reflection improved on the worst, else inside.
        const bool outside = fr < fv[worst];
        point(outside ? xr : simplex[worst], 0.5, xc);
        const double fc = eval(xc);
        if (fc < (outside ? fr : fv[worst])) {
            simplex[worst] = xc;
            fv[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == best) continue;
            for (std::size_t j = 0; j < n; ++j)
                simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
            fv[i] = eval(simplex[i]);
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    res.x = simplex[best];
    res.fval = fv[best];
    return res;
}

}  // namespace mobfc::optim
