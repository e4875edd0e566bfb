#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace oracle {

// Euclidean projection onto {p >= floors, sum p = total}.
inline std::vector<double> project(const std::vector<double>& v, const std::vector<double>& floors, double total)
{
    const std::size_t k = v.size();
    std::vector<double> y(k);
    for (std::size_t i = 0; i < k; ++i) y[i] = v[i] - floors[i];
    const double s = total - std::accumulate(floors.begin(), floors.end(), 0.0);
    std::vector<double> u = y;
    std::sort(u.begin(), u.end(), std::greater<>());
    double acc = 0, theta = 0;
    for (std::size_t j = 0; j < k; ++j)
    {
        acc += u[j];
        const double t = (acc - s) / static_cast<double>(j + 1);
        if (u[j] - t > 0) theta = t;
    }
    std::vector<double> p(k);
    for (std::size_t i = 0; i < k; ++i) p[i] = floors[i] + std::max(y[i] - theta, 0.0);
    return p;
}

// Accelerated projected gradient ascent with adaptive restart on
// sum log2(1 + p_k g_k).
inline std::vector<double> max_sum_rate(const std::vector<double>& g, const std::vector<double>& floors, double total,
                                        int iters = 200000)
{
    const std::size_t k = g.size();
    double lip = 0;
    for (double gi : g) lip = std::max(lip, gi * gi / std::log(2.0));
    const double step = 1.0 / lip;
    auto value = [&](const std::vector<double>& p) {
        double s = 0;
        for (std::size_t i = 0; i < k; ++i) s += std::log2(1 + p[i] * g[i]);
        return s;
    };
    std::vector<double> x = project(std::vector<double>(k, total / k), floors, total), y = x, grad(k);
    double t = 1, fx = value(x);
    for (int it = 0; it < iters; ++it)
    {
        for (std::size_t i = 0; i < k; ++i) grad[i] = y[i] + step * g[i] / (std::log(2.0) * (1 + y[i] * g[i]));
        std::vector<double> xn = project(grad, floors, total);
        const double fn = value(xn);
        if (fn < fx)
        {
            t = 1;
            y = x;
            continue;
        }
        const double tn = (1 + std::sqrt(1 + 4 * t * t)) / 2;
        for (std::size_t i = 0; i < k; ++i) y[i] = xn[i] + (t - 1) / tn * (xn[i] - x[i]);
        x = std::move(xn);
        fx = fn;
        t = tn;
    }
    return x;
}

}  // namespace oracle
