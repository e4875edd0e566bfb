#pragma once

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "swan/core_model.hpp"

namespace swan {

/// Phase lag accumulated from a feed at feed_x through a PA at x to a point
/// with along-waveguide coordinate target_x and lateral offset `offset`.
/// Strictly increasing in x to the right of the feed since n_eff > 1.
inline double phase_lag(const ScenarioConfig& cfg, double target_x, double offset, double feed_x, double x)
{
    return cfg.wavenumber() * std::hypot(x - target_x, offset) + cfg.guided_wavenumber() * (x - feed_x);
}

struct RefinementStep
{
    std::size_t segment = 0;
    double coarse_x = 0.0;
    double final_x = 0.0;
    double shift = 0.0;      // final_x - coarse_x
    long wraps = 0;          // 2 pi multiple solved for
    double residual = 0.0;   // phase error after the solve (rad)
    bool refined = false;    // false: coarse position kept
    bool clipped = false;    // pushed back to the segment boundary
};

struct ChainPlacement
{
    SwanLayout layout;
    std::size_t anchor = 0;
    double anchor_phase = 0.0;
    std::vector<RefinementStep> steps;
};

namespace detail {

/// Position x >= feed_x whose phase lag equals `phase`. Returns nullopt if
/// the quadratic has no real root on the physical branch.
inline std::optional<double> solve_phase(const ScenarioConfig& cfg, double target_x, double offset,
                                         double feed_x, double phase)
{
    const double n = cfg.n_eff;
    // r(x) = i3 - n x with r(x) = sqrt((x - target_x)^2 + offset^2); squaring
    // gives (1 - n^2) x^2 - 2 i1 x + i2 = 0.
    const double i3 = phase / cfg.wavenumber() + n * feed_x;
    const double i1 = target_x - n * i3;
    const double i2 = target_x * target_x + offset * offset - i3 * i3;
    const double a = 1.0 - n * n;
    const double b = -2.0 * i1;
    const double disc = b * b - 4.0 * a * i2;
    if (disc < 0.0) return std::nullopt;
    const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    double best = std::numeric_limits<double>::quiet_NaN();
    double best_err = std::numeric_limits<double>::infinity();
    for (double root : {q / a, q != 0.0 ? i2 / q : std::numeric_limits<double>::quiet_NaN()})
    {
        if (!std::isfinite(root)) continue;
        const double r = i3 - n * root;
        if (r <= 0.0) continue;
        const double err = std::abs(r - std::hypot(root - target_x, offset));
        if (err < best_err)
        {
            best_err = err;
            best = root;
        }
    }
    if (!std::isfinite(best)) return std::nullopt;
    // Newton polish on the unsquared equation.
    for (int it = 0; it < 3; ++it)
    {
        const double r = std::hypot(best - target_x, offset);
        const double g = r + n * best - i3;
        const double dg = (best - target_x) / r + n;
        best -= g / dg;
    }
    return best;
}

}  // namespace detail

/// Phase-aligned chain placement towards a target.
///
/// The anchor PA sits right above the target in the segment that contains it.
/// Every other PA starts at the closest position allowed by the spacing rule
/// (moving away from the anchor) and, when `refine` is set, is shifted to the
/// nearest position whose phase lag matches the anchor modulo 2 pi.
inline ChainPlacement chain_placement(const ScenarioConfig& cfg, const SwanLayout& base, const Position& target,
                                      bool refine = true)
{
    const std::size_t count = base.size();
    if (count == 0) throw Error("empty layout");
    ChainPlacement out;
    out.layout = base;
    auto& pa = out.layout.pa_x;
    const double len = base.segment_len;
    const double offset = lateral_offset(cfg, base.y, target);
    const double xs = std::clamp(target.x, base.segment_lo(0), base.segment_hi(count - 1));
    const double dmin = cfg.min_spacing;
    const double two_pi = 2.0 * kPi;

    const std::size_t anchor = base.segment_of(xs);
    out.anchor = anchor;
    pa[anchor] = std::clamp(xs, base.segment_lo(anchor), base.segment_hi(anchor));
    const double psi0 = phase_lag(cfg, xs, offset, base.feed_x[anchor], pa[anchor]);
    out.anchor_phase = psi0;

    auto psi = [&](std::size_t i, double x) { return phase_lag(cfg, xs, offset, base.feed_x[i], x); };

    auto finish = [&](RefinementStep& s, std::size_t i, double x, long wraps) {
        s.final_x = x;
        s.shift = x - s.coarse_x;
        s.wraps = wraps;
        s.residual = psi(i, x) - psi0 - two_pi * static_cast<double>(wraps);
        pa[i] = x;
        out.steps.push_back(s);
    };

    double prev = pa[anchor];
    for (std::size_t i = anchor + 1; i < count; ++i)
    {
        RefinementStep s;
        s.segment = i;
        const double lo = std::max(prev + dmin, base.segment_lo(i));
        double coarse = lo;
        if (coarse > base.segment_hi(i))
        {
            coarse = base.segment_hi(i);
            s.clipped = true;
        }
        s.coarse_x = coarse;
        double x = coarse;
        long wraps = 0;
        if (refine)
        {
            wraps = std::lround((psi(i, coarse) - psi0) / two_pi);
            auto sol = detail::solve_phase(cfg, xs, offset, base.feed_x[i], psi0 + two_pi * wraps);
            if (sol && *sol < lo - kLayoutTol)
            {
                ++wraps;
                sol = detail::solve_phase(cfg, xs, offset, base.feed_x[i], psi0 + two_pi * wraps);
            }
            if (!sol)
            {
                spdlog::debug("chain placement: no real root for segment {}, keeping coarse position", i);
            }
            else
            {
                x = *sol;
                s.refined = true;
                if (x > base.segment_hi(i))
                {
                    x = base.segment_hi(i);
                    s.clipped = true;
                }
            }
        }
        finish(s, i, x, wraps);
        prev = x;
    }

    prev = pa[anchor];
    for (std::size_t k = anchor; k-- > 0;)
    {
        RefinementStep s;
        s.segment = k;
        double coarse = std::min(prev - dmin, base.segment_hi(k));
        if (coarse < base.segment_lo(k))
        {
            coarse = base.segment_lo(k);
            s.clipped = true;
        }
        s.coarse_x = coarse;
        double x = coarse;
        long wraps = 0;
        if (refine)
        {
            wraps = std::lround((psi(k, coarse) - psi0) / two_pi) - 1;
            auto sol = detail::solve_phase(cfg, xs, offset, base.feed_x[k], psi0 + two_pi * wraps);
            if (!sol)
            {
                spdlog::debug("chain placement: no real root for segment {}, keeping coarse position", k);
            }
            else
            {
                x = *sol;
                s.refined = true;
                if (x < base.segment_lo(k))
                {
                    x = base.segment_lo(k);
                    s.clipped = true;
                }
            }
        }
        finish(s, k, x, wraps);
        prev = x;
    }
    return out;
}

inline SwanLayout rx_chain_placement(const ScenarioConfig& cfg, const SwanLayout& base, const Position& target)
{
    return chain_placement(cfg, base, target, true).layout;
}

struct SearchConfig
{
    double grid_step = 1e-2;
    int max_iters = 50;
    double rel_tol = 1e-4;
};

struct SearchResult
{
    SwanLayout layout;
    double objective = -std::numeric_limits<double>::infinity();
    int iterations = 0;
    std::size_t skipped = 0;         // candidates with non-finite objective
    std::vector<double> history;     // objective after each full sweep
};

/// Coordinate-wise grid ascent over PA positions.
///
/// For each PA in turn, every grid point of its segment is tried with the
/// other PAs held fixed; the best feasible candidate is kept only if it
/// strictly improves the objective, so ties resolve to the current (or the
/// leftmost improving) position. Sweeps repeat until the relative gain of a
/// sweep drops below rel_tol, a sweep changes nothing, or max_iters is
/// reached.
template <class Objective, class Feasible>
SearchResult elementwise_search(Objective&& objective, Feasible&& feasible, const SwanLayout& initial,
                                const SearchConfig& sc)
{
    if (!(sc.grid_step > 0.0)) throw Error("grid step must be positive");
    SearchResult res;
    res.layout = initial;
    std::vector<double>& x = res.layout.pa_x;
    if (!feasible(std::span<const double>(x))) throw Error("initial layout is infeasible");

    double best = objective(std::span<const double>(x));
    if (!std::isfinite(best)) best = -std::numeric_limits<double>::infinity();
    res.history.push_back(best);

    const double len = initial.segment_len;
    const auto steps = static_cast<long>(std::ceil(len / sc.grid_step - 1e-9));

    for (int it = 0; it < sc.max_iters; ++it)
    {
        const double start = best;
        for (std::size_t i = 0; i < x.size(); ++i)
        {
            const double keep = x[i];
            double arg = keep;
            const double lo = initial.segment_lo(i);
            const double hi = initial.segment_hi(i);
            for (long q = 0; q <= steps; ++q)
            {
                x[i] = std::min(lo + static_cast<double>(q) * sc.grid_step, hi);
                if (!feasible(std::span<const double>(x))) continue;
                const double v = objective(std::span<const double>(x));
                if (!std::isfinite(v))
                {
                    ++res.skipped;
                    continue;
                }
                if (v > best)
                {
                    best = v;
                    arg = x[i];
                }
            }
            x[i] = arg;
        }
        res.iterations = it + 1;
        res.history.push_back(best);
        assert(best >= start);
        const double scale = std::max(std::abs(start), 1e-300);
        if (!(best > start)) break;
        if (std::isfinite(start) && (best - start) / scale < sc.rel_tol) break;
    }
    res.objective = best;
    if (res.skipped > 0) spdlog::debug("element-wise search skipped {} non-finite candidates", res.skipped);
    return res;
}

struct ConstrainedSearchResult
{
    SearchResult search;
    bool feasible = false;
    bool used_phase_one = false;
};

/// Two-phase wrapper: if the start violates `slack >= 0`, first ascend the
/// slack until it is met, then ascend `objective` while keeping it met.
template <class Objective, class Slack, class Feasible>
ConstrainedSearchResult constrained_search(Objective&& objective, Slack&& slack, Feasible&& geometric,
                                           const SwanLayout& initial, const SearchConfig& sc)
{
    ConstrainedSearchResult out;
    SwanLayout start = initial;
    if (!(slack(std::span<const double>(start.pa_x)) >= 0.0))
    {
        out.used_phase_one = true;
        SearchConfig phase_one = sc;
        // Slack can cross zero from below, where a relative test is useless.
        phase_one.rel_tol = 0.0;
        auto r = elementwise_search(slack, geometric, start, phase_one);
        if (!(r.objective >= 0.0))
        {
            out.search = std::move(r);
            out.feasible = false;
            return out;
        }
        start = r.layout;
    }
    auto feasible = [&](std::span<const double> x) { return geometric(x) && slack(x) >= 0.0; };
    out.search = elementwise_search(objective, feasible, start, sc);
    out.feasible = true;
    return out;
}

inline auto geometric_feasibility(const SwanLayout& layout, double min_spacing)
{
    return [&layout, min_spacing](std::span<const double> x) {
        return positions_feasible(layout, x, min_spacing);
    };
}

/// Layout copy with PA positions replaced.
inline SwanLayout with_positions(const SwanLayout& base, std::span<const double> x)
{
    SwanLayout l = base;
    l.pa_x.assign(x.begin(), x.end());
    return l;
}

}  // namespace swan
