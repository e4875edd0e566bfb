#pragma once

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "swan/beamforming.hpp"
#include "swan/core_model.hpp"
#include "swan/placement.hpp"

namespace swan {

struct WaterFillResult
{
    std::vector<double> powers;
    double level = 0.0;
};

/// Maximises sum_k log2(1 + P_k g_k) over P_k >= floors[k], sum P_k = p_max.
/// Returns nullopt when the floors alone exceed the budget.
inline std::optional<WaterFillResult> try_water_fill(const std::vector<double>& gains, const std::vector<double>& floors,
                                                     double p_max)
{
    const std::size_t k = gains.size();
    if (k == 0 || floors.size() != k) throw Error("water-fill: gains and floors must be non-empty and equal length");
    for (std::size_t i = 0; i < k; ++i)
    {
        if (!(gains[i] > 0.0) || !std::isfinite(gains[i])) throw Error("water-fill: gains must be positive");
        if (!(floors[i] >= 0.0) || !std::isfinite(floors[i])) throw Error("water-fill: floors must be non-negative");
    }
    const double floor_sum = std::accumulate(floors.begin(), floors.end(), 0.0);
    if (floor_sum > p_max * (1.0 + 1e-12)) return std::nullopt;

    auto total = [&](double w) {
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) s += std::max(floors[i], w - 1.0 / gains[i]);
        return s;
    };

    double lo = std::numeric_limits<double>::infinity();
    double hi_inv = 0.0;
    for (double g : gains)
    {
        lo = std::min(lo, 1.0 / g);
        hi_inv = std::max(hi_inv, 1.0 / g);
    }
    double hi = p_max + hi_inv;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it)
    {
        const double mid = 0.5 * (lo + hi);
        if (total(mid) < p_max) lo = mid;
        else hi = mid;
    }
    double w = 0.5 * (lo + hi);

    // Close the budget exactly on the active set found by bisection.
    double fixed = 0.0, inv = 0.0;
    std::size_t active = 0;
    for (std::size_t i = 0; i < k; ++i)
    {
        if (w - 1.0 / gains[i] > floors[i])
        {
            ++active;
            inv += 1.0 / gains[i];
        }
        else
        {
            fixed += floors[i];
        }
    }
    if (active > 0)
    {
        const double exact = (p_max - fixed + inv) / static_cast<double>(active);
        bool consistent = true;
        for (std::size_t i = 0; i < k; ++i)
        {
            const bool was = w - 1.0 / gains[i] > floors[i];
            const bool now = exact - 1.0 / gains[i] > floors[i];
            if (was != now) consistent = false;
        }
        if (consistent) w = exact;
    }

    WaterFillResult out;
    out.level = w;
    out.powers.resize(k);
    for (std::size_t i = 0; i < k; ++i) out.powers[i] = std::max(floors[i], w - 1.0 / gains[i]);
    return out;
}

inline WaterFillResult water_fill(const std::vector<double>& gains, const std::vector<double>& floors, double p_max)
{
    auto r = try_water_fill(gains, floors, p_max);
    if (!r) throw InfeasibleError("infeasible QoS: floors exceed the power budget");
    return *r;
}

/// Per-slot communication SNR floor derived from the rate floor in bits/s/Hz.
/// k_scaled honours the 1/K factor of the slot rate; literal ignores it.
enum class FloorConvention { k_scaled, literal };

struct TdmaProblem
{
    std::vector<Position> users;
    Position target;
    double gamma_sen = 0.0;  // linear SNR
    double gamma_com = 0.0;  // bits/s/Hz per user
    double p_max = 0.1;      // W
    FloorConvention floors = FloorConvention::k_scaled;

    std::size_t slots() const { return users.size(); }

    double snr_floor() const
    {
        const double k = static_cast<double>(slots());
        const double e = floors == FloorConvention::k_scaled ? k * gamma_com : gamma_com;
        return std::exp2(e) - 1.0;
    }

    void validate() const
    {
        if (users.empty()) throw Error("TDMA problem needs at least one user");
        if (!(gamma_sen >= 0.0) || !(gamma_com >= 0.0)) throw Error("QoS thresholds must be non-negative");
        if (!(p_max > 0.0)) throw Error("power budget must be positive");
    }
};

struct TdmaOptions
{
    SearchConfig search;
    double eps_step = 0.1;
    int max_ao_iters = 20;
};

struct TdmaSolution
{
    Protocol protocol = Protocol::ss;
    bool feasible = false;
    double sum_rate = 0.0;
    SwanLayout tx;
    SwanLayout rx;
    std::vector<double> powers;
    std::vector<double> rates;
    std::vector<double> eps;                  // sm only
    std::vector<ComplexVector> tx_weights;    // sm only: unit norm, applied as h^T w
    ComplexVector rx_weights;                 // ss: selection, sm: unit MRC
    std::vector<double> history;              // sm: objective after each AO round
    double water_level = 0.0;
};

namespace detail {

struct SlotScore
{
    bool feasible = false;
    double sum_rate = -std::numeric_limits<double>::infinity();
    double floor_slack = -std::numeric_limits<double>::infinity();  // (p_max - sum floors) / p_max
    WaterFillResult fill;
};

/// Per-watt gains -> floors -> water-fill -> sum of slot rates.
inline SlotScore score_slots(const TdmaProblem& prob, const std::vector<double>& gc, const std::vector<double>& gs)
{
    SlotScore s;
    const std::size_t k = gc.size();
    std::vector<double> floors(k);
    const double com = prob.snr_floor();
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i)
    {
        if (!(gc[i] > 0.0) || !(gs[i] > 0.0)) return s;
        floors[i] = std::max(com / gc[i], prob.gamma_sen / gs[i]);
        total += floors[i];
    }
    s.floor_slack = (prob.p_max - total) / prob.p_max;
    if (!std::isfinite(s.floor_slack)) return s;
    auto fill = try_water_fill(gc, floors, prob.p_max);
    if (!fill) return s;
    s.feasible = true;
    s.fill = std::move(*fill);
    s.sum_rate = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        s.sum_rate += std::log2(1.0 + s.fill.powers[i] * gc[i]) / static_cast<double>(k);
    return s;
}

inline void fill_rates(TdmaSolution& sol, const std::vector<double>& gc, const SlotScore& s)
{
    const std::size_t k = gc.size();
    sol.feasible = s.feasible;
    if (!s.feasible)
    {
        sol.sum_rate = 0.0;
        sol.powers.assign(k, 0.0);
        sol.rates.assign(k, 0.0);
        return;
    }
    sol.powers = s.fill.powers;
    sol.water_level = s.fill.level;
    sol.rates.resize(k);
    sol.sum_rate = 0.0;
    for (std::size_t i = 0; i < k; ++i)
    {
        sol.rates[i] = std::log2(1.0 + sol.powers[i] * gc[i]) / static_cast<double>(k);
        sol.sum_rate += sol.rates[i];
    }
}

}  // namespace detail

/// SS: receive PA above the target, one transmit position shared by all
/// slots found by an exhaustive scan of the whole waveguide.
inline TdmaSolution solve_ss_multi(const ScenarioConfig& cfg, const TdmaProblem& prob, std::size_t n_tx,
                                   std::size_t m_rx, const TdmaOptions& opt = {})
{
    prob.validate();
    TdmaSolution sol;
    sol.protocol = Protocol::ss;
    sol.tx = SwanLayout::uniform(cfg, Side::tx, n_tx);
    sol.rx = SwanLayout::uniform(cfg, Side::rx, m_rx);
    const double xs = std::clamp(prob.target.x, 0.0, sol.rx.total_length());
    const std::size_t m = sol.rx.segment_of(xs);
    sol.rx.pa_x[m] = xs;
    sol.rx_weights = one_hot(m_rx, m);
    const double f2 = std::norm(cascaded_channels(cfg, sol.rx, prob.target)[static_cast<Eigen::Index>(m)]);

    const std::size_t k = prob.slots();
    const double len = sol.tx.total_length();
    const auto steps = static_cast<long>(std::ceil(len / opt.search.grid_step - 1e-9));
    std::vector<double> gc(k), gs(k);
    detail::SlotScore best;
    double best_x = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> best_gc;
    for (long q = 0; q <= steps; ++q)
    {
        const double x = std::min(static_cast<double>(q) * opt.search.grid_step, len);
        const std::size_t n = sol.tx.segment_of(x);
        const Complex wg = in_waveguide_coeff(cfg, sol.tx.feed_x[n], x);
        const Position pa{x, sol.tx.y, cfg.height};
        const double hs2 = std::norm(wg * free_space_coeff(cfg, pa, prob.target));
        for (std::size_t i = 0; i < k; ++i)
        {
            gc[i] = std::norm(wg * free_space_coeff(cfg, pa, prob.users[i])) / cfg.noise_c;
            gs[i] = cfg.reflection * f2 * hs2 / cfg.noise_s;
        }
        auto s = detail::score_slots(prob, gc, gs);
        if (s.feasible && s.sum_rate > best.sum_rate)
        {
            best = std::move(s);
            best_x = x;
            best_gc = gc;
        }
    }
    if (!std::isfinite(best_x))
    {
        sol.tx_weights.assign(k, one_hot(n_tx, sol.tx.segment_of(std::clamp(prob.target.x, 0.0, len))));
        detail::fill_rates(sol, gc, best);
        return sol;
    }
    const std::size_t n = sol.tx.segment_of(best_x);
    sol.tx.pa_x[n] = best_x;
    sol.tx_weights.assign(k, one_hot(n_tx, n));
    detail::fill_rates(sol, best_gc, best);
    return sol;
}

namespace detail {

/// Start point for transmit searches: the better of the target-aligned
/// chain and an optional warm start (by sum rate, then by slack).
template <class Score>
SwanLayout pick_start(const SwanLayout& chain, const SwanLayout* warm, Score&& score)
{
    if (!warm) return chain;
    const SlotScore a = score(chain.pa_x);
    const SlotScore b = score(warm->pa_x);
    if (a.feasible != b.feasible) return a.feasible ? chain : *warm;
    if (a.feasible) return b.sum_rate > a.sum_rate ? *warm : chain;
    return b.floor_slack > a.floor_slack ? *warm : chain;
}

}  // namespace detail

/// SA: phase-aligned receive chain, element-wise transmit placement scored
/// by water-filling.
inline TdmaSolution solve_sa_multi(const ScenarioConfig& cfg, const TdmaProblem& prob, std::size_t n_tx,
                                   std::size_t m_rx, const TdmaOptions& opt = {},
                                   const SwanLayout* warm_tx = nullptr)
{
    prob.validate();
    TdmaSolution sol;
    sol.protocol = Protocol::sa;
    const SwanLayout tx0 = SwanLayout::uniform(cfg, Side::tx, n_tx);
    sol.rx = rx_chain_placement(cfg, SwanLayout::uniform(cfg, Side::rx, m_rx), prob.target);
    const double b = std::norm(cascaded_channels(cfg, sol.rx, prob.target).sum());
    const std::size_t k = prob.slots();
    const double n = static_cast<double>(n_tx);
    const double m = static_cast<double>(m_rx);

    auto gains = [&](std::span<const double> x, std::vector<double>& gc, std::vector<double>& gs) {
        const SwanLayout l = with_positions(tx0, x);
        const double a = std::norm(cascaded_channels(cfg, l, prob.target).sum());
        gc.resize(k);
        gs.assign(k, cfg.reflection * a * b / (n * m * cfg.noise_s));
        for (std::size_t i = 0; i < k; ++i)
            gc[i] = std::norm(cascaded_channels(cfg, l, prob.users[i]).sum()) / (n * cfg.noise_c);
    };
    auto score = [&](std::span<const double> x) {
        std::vector<double> gc, gs;
        gains(x, gc, gs);
        return detail::score_slots(prob, gc, gs);
    };
    auto objective = [&](std::span<const double> x) {
        auto s = score(x);
        return s.feasible ? s.sum_rate : std::numeric_limits<double>::quiet_NaN();
    };
    auto slack = [&](std::span<const double> x) { return score(x).floor_slack; };

    const SwanLayout chain = chain_placement(cfg, tx0, prob.target, true).layout;
    const SwanLayout start = detail::pick_start(chain, warm_tx, score);
    auto r = constrained_search(objective, slack, geometric_feasibility(tx0, cfg.min_spacing), start, opt.search);
    sol.tx = r.search.layout;
    std::vector<double> gc, gs;
    gains(sol.tx.pa_x, gc, gs);
    auto s = detail::score_slots(prob, gc, gs);
    detail::fill_rates(sol, gc, s);
    return sol;
}

/// SM: coarse receive chain with MRC, alternating between element-wise
/// transmit placement and a per-slot grid over the epsilon beam family.
inline TdmaSolution solve_sm_multi(const ScenarioConfig& cfg, const TdmaProblem& prob, std::size_t n_tx,
                                   std::size_t m_rx, const TdmaOptions& opt = {},
                                   const TdmaSolution* warm = nullptr)
{
    prob.validate();
    if (!(opt.eps_step > 0.0 && opt.eps_step <= 1.0)) throw Error("eps step must lie in (0, 1]");
    TdmaSolution sol;
    sol.protocol = Protocol::sm;
    const SwanLayout tx0 = SwanLayout::uniform(cfg, Side::tx, n_tx);
    sol.rx = chain_placement(cfg, SwanLayout::uniform(cfg, Side::rx, m_rx), prob.target, false).layout;
    const ComplexVector fs = cascaded_channels(cfg, sol.rx, prob.target);
    sol.rx_weights = mrc_combiner(fs);
    const double f2 = fs.squaredNorm();
    const std::size_t k = prob.slots();

    std::vector<double> grid;
    const auto ne = static_cast<long>(std::ceil(1.0 / opt.eps_step - 1e-9));
    for (long q = 0; q <= ne; ++q) grid.push_back(std::min(static_cast<double>(q) * opt.eps_step, 1.0));

    struct Channels
    {
        std::vector<ComplexVector> hc;
        ComplexVector hs;
    };
    auto channels = [&](std::span<const double> x) {
        const SwanLayout l = with_positions(tx0, x);
        Channels c;
        c.hs = effective(cascaded_channels(cfg, l, prob.target));
        c.hc.reserve(k);
        for (const auto& u : prob.users) c.hc.push_back(effective(cascaded_channels(cfg, l, u)));
        return c;
    };
    auto slot_gains = [&](const Channels& c, std::size_t i, double eps, double& gc, double& gs) {
        const ComplexVector w = epsilon_beamformer(c.hc[i], c.hs, 1.0, eps);
        gc = beam_gain(c.hc[i], w) / cfg.noise_c;
        gs = cfg.reflection * f2 * beam_gain(c.hs, w) / cfg.noise_s;
    };
    auto score_with = [&](const Channels& c, const std::vector<double>& eps) {
        std::vector<double> gc(k), gs(k);
        for (std::size_t i = 0; i < k; ++i) slot_gains(c, i, eps[i], gc[i], gs[i]);
        return detail::score_slots(prob, gc, gs);
    };
    // Floor-minimising epsilon per slot, used to restore feasibility.
    auto min_floor_eps = [&](const Channels& c) {
        std::vector<double> eps(k, 0.0);
        const double com = prob.snr_floor();
        for (std::size_t i = 0; i < k; ++i)
        {
            double best = std::numeric_limits<double>::infinity();
            for (double e : grid)
            {
                double gc, gs;
                slot_gains(c, i, e, gc, gs);
                const double fl = std::max(com / gc, prob.gamma_sen / gs);
                if (fl < best)
                {
                    best = fl;
                    eps[i] = e;
                }
            }
        }
        return eps;
    };

    std::vector<double> eps(k, 0.0);
    SwanLayout start = chain_placement(cfg, tx0, prob.target, false).layout;
    if (warm && warm->feasible && warm->eps.size() == k)
    {
        const auto sw = score_with(channels(warm->tx.pa_x), warm->eps);
        const auto sc = score_with(channels(start.pa_x), eps);
        if (sw.feasible && (!sc.feasible || sw.sum_rate > sc.sum_rate))
        {
            start = warm->tx;
            eps = warm->eps;
        }
    }
    auto geometric = geometric_feasibility(tx0, cfg.min_spacing);

    if (!score_with(channels(start.pa_x), eps).feasible)
    {
        auto slack = [&](std::span<const double> x) {
            const Channels c = channels(x);
            return score_with(c, min_floor_eps(c)).floor_slack;
        };
        SearchConfig s1 = opt.search;
        s1.rel_tol = 0.0;
        if (slack(start.pa_x) < 0.0)
        {
            auto r = elementwise_search(slack, geometric, start, s1);
            start = r.layout;
        }
        eps = min_floor_eps(channels(start.pa_x));
        if (!score_with(channels(start.pa_x), eps).feasible)
        {
            sol.tx = start;
            sol.eps = eps;
            sol.tx_weights.clear();
            sol.feasible = false;
            sol.powers.assign(k, 0.0);
            sol.rates.assign(k, 0.0);
            return sol;
        }
    }

    SwanLayout cur = start;
    double best = score_with(channels(cur.pa_x), eps).sum_rate;
    sol.history.push_back(best);
    for (int it = 0; it < opt.max_ao_iters; ++it)
    {
        const double before = best;
        auto objective = [&](std::span<const double> x) {
            auto s = score_with(channels(x), eps);
            return s.feasible ? s.sum_rate : std::numeric_limits<double>::quiet_NaN();
        };
        auto r = elementwise_search(objective, geometric, cur, opt.search);
        if (r.objective > best)
        {
            cur = r.layout;
            best = r.objective;
        }

        const Channels c = channels(cur.pa_x);
        bool changed = true;
        for (int pass = 0; changed && pass < 10; ++pass)
        {
            changed = false;
            for (std::size_t i = 0; i < k; ++i)
            {
                const double keep = eps[i];
                double arg = keep;
                for (double e : grid)
                {
                    eps[i] = e;
                    auto s = score_with(c, eps);
                    if (s.feasible && s.sum_rate > best)
                    {
                        best = s.sum_rate;
                        arg = e;
                        changed = true;
                    }
                }
                eps[i] = arg;
            }
        }
        assert(best >= before);
        sol.history.push_back(best);
        if ((best - before) / std::max(std::abs(before), 1e-300) < opt.search.rel_tol) break;
    }

    sol.tx = cur;
    sol.eps = eps;
    const Channels c = channels(cur.pa_x);
    std::vector<double> gc(k), gs(k);
    sol.tx_weights.resize(k);
    for (std::size_t i = 0; i < k; ++i)
    {
        slot_gains(c, i, eps[i], gc[i], gs[i]);
        sol.tx_weights[i] = epsilon_beamformer(c.hc[i], c.hs, 1.0, eps[i]);
    }
    detail::fill_rates(sol, gc, detail::score_slots(prob, gc, gs));
    return sol;
}

}  // namespace swan
