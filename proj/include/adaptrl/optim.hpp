#pragma once

#include <algorithm>
#include <functional>
#include <random>
#include <vector>

#include "adaptrl/core.hpp"

namespace adaptrl {

struct NelderMeadResult {
    Vector x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct NelderMeadOptions {
    double tolerance = 1e-8;
    int max_evals = 5000;
    double initial_step = 0.5;
};

/// Downhill simplex minimization (reflection / expansion / contraction /
/// shrink with the standard 1, 2, 0.5, 0.5 coefficients).
inline NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f,
                                    const Vector& x0, const NelderMeadOptions& opt = {}) {
    const int n = static_cast<int>(x0.size());
    std::vector<Vector> simplex(n + 1, x0);
    for (int i = 0; i < n; ++i) simplex[i + 1][i] += opt.initial_step;

    std::vector<double> fv(n + 1);
    int evals = 0;
    for (int i = 0; i <= n; ++i) fv[i] = (++evals, f(simplex[i]));

    NelderMeadResult result;
    while (evals < opt.max_evals) {
        std::vector<int> order(n + 1);
        for (int i = 0; i <= n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });

        const int best = order[0], worst = order[n], second_worst = order[n - 1];
        if (std::abs(fv[worst] - fv[best]) <= opt.tolerance * (1.0 + std::abs(fv[best]))) {
            result.converged = true;
            break;
        }

        Vector centroid = Vector::Zero(n);
        for (int i = 0; i <= n; ++i)
            if (i != worst) centroid += simplex[i];
        centroid /= static_cast<double>(n);

        Vector xr = centroid + (centroid - simplex[worst]);
        double fr = (++evals, f(xr));
        if (fr < fv[best]) {
            Vector xe = centroid + 2.0 * (centroid - simplex[worst]);
            double fe = (++evals, f(xe));
            if (fe < fr) { simplex[worst] = xe; fv[worst] = fe; }
            else         { simplex[worst] = xr; fv[worst] = fr; }
        } else if (fr < fv[second_worst]) {
            simplex[worst] = xr;
            fv[worst] = fr;
        } else {
            Vector xc = centroid + 0.5 * (simplex[worst] - centroid);
            double fc = (++evals, f(xc));
            if (fc < fv[worst]) {
                simplex[worst] = xc;
                fv[worst] = fc;
            } else {
                for (int i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
                    fv[i] = (++evals, f(simplex[i]));
                }
            }
        }
        result.iterations++;
    }

    int best = 0;
    for (int i = 1; i <= n; ++i)
        if (fv[i] < fv[best]) best = i;
    result.x = simplex[best];
    result.value = fv[best];
    return result;
}

struct MultiStartResult {
    NelderMeadResult best;
    std::vector<double> start_values;   // final objective per start, in start order
    std::vector<Vector> start_points;   // final iterate per start
    bool unique_minimum = true;  // false when a near-best start found a distinct point
};

/// Multi-start wrapper: start 0 is x0, the rest are Gaussian perturbations.
/// Reduction is deterministic: best objective, then lowest start index.
inline MultiStartResult nelder_mead_multistart(const std::function<double(const Vector&)>& f,
                                               const Vector& x0, int restarts, Rng& rng,
                                               const NelderMeadOptions& opt = {},
                                               double spread = 1.0) {
    MultiStartResult out;
    std::normal_distribution<double> normal(0.0, spread);
    for (int s = 0; s < std::max(restarts, 1); ++s) {
        Vector start = x0;
        if (s > 0)
            for (Eigen::Index i = 0; i < start.size(); ++i) start[i] += normal(rng);
        NelderMeadResult r = nelder_mead(f, start, opt);
        out.start_values.push_back(r.value);
        out.start_points.push_back(r.x);
        if (s == 0 || r.value < out.best.value) out.best = r;
    }
    for (std::size_t s = 0; s < out.start_values.size(); ++s)
        if (out.start_values[s] <= out.best.value + 1e-6 &&
            (out.start_points[s] - out.best.x).norm() > 1e-4)
            out.unique_minimum = false;
    return out;
}

}  // namespace adaptrl
