#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "swan/beamforming.hpp"
#include "swan/core_model.hpp"
#include "swan/placement.hpp"

namespace swan {

/// Loss-free closed-form SS placement and its re-evaluation with loss.
struct SsClosedForm
{
    bool feasible = false;
    double x = 0.0;
    std::size_t segment = 0;
    double rate_lossfree = 0.0;
    double rate_lossy = 0.0;
    double gamma_s_lossy = 0.0;
};

struct ParetoPoint
{
    double threshold = 0.0;
    bool feasible = false;
    double rate = 0.0;
    double gamma_c = 0.0;
    double gamma_s = 0.0;
    ProtocolSolution solution;
    std::optional<SsClosedForm> closed_form;  // ss only
};

enum class SsMode { exact, closed_form };

namespace detail {

inline void finish_point(const ScenarioConfig& cfg, ParetoPoint& p, const Position& cu, const Position& st)
{
    const LinkMetrics m = snr_and_rate(cfg, p.solution, cu, st, 1);
    p.rate = m.rate;
    p.gamma_c = m.gamma_c;
    p.gamma_s = m.gamma_s;
}

/// Stationary points of -2 beta (x - a) - log((x - ref)^2 + off^2).
inline std::vector<double> log_gain_critical(double beta, double ref, double off)
{
    if (beta == 0.0) return {ref};
    const double disc = 1.0 - 4.0 * beta * beta * off * off;
    if (disc < 0.0) return {};
    const double r = std::sqrt(disc);
    return {ref + (-1.0 + r) / (2.0 * beta), ref + (-1.0 - r) / (2.0 * beta)};
}

/// Runs the constrained search from each start and keeps the best feasible
/// outcome; the first start wins ties.
template <class Objective, class Slack, class Feasible>
ConstrainedSearchResult best_of_starts(Objective&& objective, Slack&& slack, Feasible&& geometric,
                                       const std::vector<SwanLayout>& starts, const SearchConfig& sc)
{
    ConstrainedSearchResult best;
    bool have = false;
    for (const SwanLayout& s : starts)
    {
        auto r = constrained_search(objective, slack, geometric, s, sc);
        if (!have || (r.feasible && (!best.feasible || r.search.objective > best.search.objective)))
        {
            best = std::move(r);
            have = true;
        }
    }
    return best;
}

}  // namespace detail

/// Closed-form SS placement ignoring in-waveguide loss.
inline SsClosedForm ss_closed_form(const ScenarioConfig& cfg, const SwanLayout& tx, const SwanLayout& rx,
                                   const Position& cu, const Position& st, double gamma_sen)
{
    SsClosedForm out;
    const double e = cfg.path_constant();
    const double dt = lateral_offset(cfg, tx.y, st);
    const double dr = lateral_offset(cfg, rx.y, st);
    const double len = tx.total_length();
    const double rho = gamma_sen > 0.0
                           ? std::pow(e, 4) * cfg.reflection * cfg.p_max / (cfg.noise_s * gamma_sen * dr * dr) - dt * dt
                           : std::numeric_limits<double>::infinity();
    if (rho < 0.0) return out;
    const double half = std::sqrt(rho);
    const double lo = std::max(0.0, st.x - half);
    const double hi = std::min(st.x + half, len);
    if (lo > hi) return out;
    out.feasible = true;
    out.x = std::clamp(cu.x, lo, hi);
    out.segment = tx.segment_of(out.x);
    const double dc = lateral_offset(cfg, tx.y, cu);
    const double rc2 = (out.x - cu.x) * (out.x - cu.x) + dc * dc;
    out.rate_lossfree = std::log2(1.0 + cfg.p_max * e * e / (rc2 * cfg.noise_c));
    return out;
}

/// SS single-user point. The receive PA sits above the target; the
/// transmit PA is the rate-optimal position meeting the sensing floor,
/// found exactly per segment (default) or by the loss-free closed form.
inline ParetoPoint solve_ss_single(const ScenarioConfig& cfg, const SwanLayout& tx_base, const SwanLayout& rx_base,
                                   const Position& cu, const Position& st, double gamma_sen,
                                   SsMode mode = SsMode::exact)
{
    if (!(gamma_sen >= 0.0)) throw Error("sensing threshold must be non-negative");
    ParetoPoint p;
    p.threshold = gamma_sen;
    ProtocolSolution& sol = p.solution;
    sol.protocol = Protocol::ss;
    sol.power = cfg.p_max;
    sol.tx = tx_base;
    sol.rx = rx_base;
    const double xs = std::clamp(st.x, 0.0, rx_base.total_length());
    const std::size_t m = rx_base.segment_of(xs);
    sol.rx.pa_x[m] = xs;
    sol.rx_weights = one_hot(rx_base.size(), m);
    const double f2 = std::norm(cascaded_channels(cfg, sol.rx, st)[static_cast<Eigen::Index>(m)]);

    SsClosedForm cf = ss_closed_form(cfg, tx_base, sol.rx, cu, st, gamma_sen);
    if (cf.feasible)
    {
        ProtocolSolution s = sol;
        s.tx.pa_x[cf.segment] = cf.x;
        s.tx_weights = one_hot(tx_base.size(), cf.segment);
        const LinkMetrics lm = snr_and_rate(cfg, s, cu, st, 1);
        cf.rate_lossy = lm.rate;
        cf.gamma_s_lossy = lm.gamma_s;
    }
    p.closed_form = cf;

    if (mode == SsMode::closed_form)
    {
        if (!cf.feasible)
        {
            sol.tx_weights = one_hot(tx_base.size(), tx_base.segment_of(std::clamp(st.x, 0.0, tx_base.total_length())));
            return p;
        }
        sol.tx.pa_x[cf.segment] = cf.x;
        sol.tx_weights = one_hot(tx_base.size(), cf.segment);
        p.feasible = true;
        detail::finish_point(cfg, p, cu, st);
        return p;
    }

    const double beta = cfg.attenuation();
    const double dt = lateral_offset(cfg, tx_base.y, st);
    const double dc = lateral_offset(cfg, tx_base.y, cu);
    auto gs = [&](std::size_t i, double x) {
        const Complex h = in_waveguide_coeff(cfg, tx_base.feed_x[i], x)
                          * free_space_coeff(cfg, Position{x, tx_base.y, cfg.height}, st);
        return cfg.reflection * cfg.p_max * f2 * std::norm(h) / cfg.noise_s;
    };
    auto gc = [&](std::size_t i, double x) {
        const Complex h = in_waveguide_coeff(cfg, tx_base.feed_x[i], x)
                          * free_space_coeff(cfg, Position{x, tx_base.y, cfg.height}, cu);
        return std::norm(h);
    };

    double best = -1.0, best_x = 0.0;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < tx_base.size(); ++i)
    {
        const double a = tx_base.segment_lo(i), b = tx_base.segment_hi(i);
        std::vector<double> br{a, b};
        for (double c : detail::log_gain_critical(beta, st.x, dt))
            if (c > a && c < b) br.push_back(c);
        std::sort(br.begin(), br.end());
        std::vector<double> cand = br;
        for (std::size_t j = 0; j + 1 < br.size(); ++j)
        {
            double lo = br[j], hi = br[j + 1];
            const bool flo = gs(i, lo) >= gamma_sen;
            const bool fhi = gs(i, hi) >= gamma_sen;
            if (flo == fhi) continue;
            for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it)
            {
                const double mid = 0.5 * (lo + hi);
                if ((gs(i, mid) >= gamma_sen) == flo) lo = mid;
                else hi = mid;
            }
            cand.push_back(flo ? lo : hi);
        }
        for (double c : detail::log_gain_critical(beta, cu.x, dc))
            if (c > a && c < b) cand.push_back(c);
        std::sort(cand.begin(), cand.end());
        for (double x : cand)
        {
            if (gs(i, x) < gamma_sen) continue;
            const double v = gc(i, x);
            if (v > best)
            {
                best = v;
                best_x = x;
                best_i = i;
            }
        }
    }
    if (best < 0.0)
    {
        sol.tx_weights = one_hot(tx_base.size(), tx_base.segment_of(std::clamp(st.x, 0.0, tx_base.total_length())));
        return p;
    }
    sol.tx.pa_x[best_i] = best_x;
    sol.tx_weights = one_hot(tx_base.size(), best_i);
    p.feasible = true;
    detail::finish_point(cfg, p, cu, st);
    return p;
}

/// SA single-user point: phase-aligned receive chain, element-wise transmit
/// placement maximising the rate under the sensing floor, started from the
/// chains aligned to the target and to the user.
inline ParetoPoint solve_sa_single(const ScenarioConfig& cfg, const SwanLayout& tx_base, const SwanLayout& rx_base,
                                   const Position& cu, const Position& st, double gamma_sen,
                                   const SearchConfig& sc = {})
{
    if (!(gamma_sen >= 0.0)) throw Error("sensing threshold must be non-negative");
    ParetoPoint p;
    p.threshold = gamma_sen;
    ProtocolSolution& sol = p.solution;
    sol.protocol = Protocol::sa;
    sol.power = cfg.p_max;
    sol.rx = rx_chain_placement(cfg, rx_base, st);
    const double b = std::norm(cascaded_channels(cfg, sol.rx, st).sum());
    const double n = static_cast<double>(tx_base.size());
    const double m = static_cast<double>(rx_base.size());

    auto gamma_s = [&](std::span<const double> x) {
        const double a = std::norm(cascaded_channels(cfg, with_positions(tx_base, x), st).sum());
        return cfg.reflection * cfg.p_max * a * b / (n * m * cfg.noise_s);
    };
    auto objective = [&](std::span<const double> x) {
        const double g = std::norm(cascaded_channels(cfg, with_positions(tx_base, x), cu).sum());
        return std::log2(1.0 + cfg.p_max * g / (n * cfg.noise_c));
    };
    auto slack = [&](std::span<const double> x) {
        return gamma_sen > 0.0 ? gamma_s(x) / gamma_sen - 1.0 : 1.0;
    };
    const auto r = detail::best_of_starts(objective, slack, geometric_feasibility(tx_base, cfg.min_spacing),
                                          {chain_placement(cfg, tx_base, st, true).layout,
                                           chain_placement(cfg, tx_base, cu, true).layout},
                                          sc);
    sol.tx = r.search.layout;
    if (!r.feasible) return p;
    p.feasible = true;
    detail::finish_point(cfg, p, cu, st);
    return p;
}

/// SM single-user point: coarse receive chain with MRC, element-wise
/// transmit placement with the sensing-constrained beamformer inside.
inline ParetoPoint solve_sm_single(const ScenarioConfig& cfg, const SwanLayout& tx_base, const SwanLayout& rx_base,
                                   const Position& cu, const Position& st, double gamma_sen,
                                   const SearchConfig& sc = {})
{
    if (!(gamma_sen >= 0.0)) throw Error("sensing threshold must be non-negative");
    ParetoPoint p;
    p.threshold = gamma_sen;
    ProtocolSolution& sol = p.solution;
    sol.protocol = Protocol::sm;
    sol.power = cfg.p_max;
    sol.rx = chain_placement(cfg, rx_base, st, false).layout;
    const ComplexVector fs = cascaded_channels(cfg, sol.rx, st);
    sol.rx_weights = mrc_combiner(fs);
    const double f2 = fs.squaredNorm();

    auto beam = [&](std::span<const double> x) {
        const SwanLayout l = with_positions(tx_base, x);
        const ComplexVector hc = effective(cascaded_channels(cfg, l, cu));
        const ComplexVector hs = effective(cascaded_channels(cfg, l, st));
        return std::make_pair(hc, try_subspace_beamformer(hc, hs, fs, cfg.p_max, gamma_sen, cfg.reflection,
                                                          cfg.noise_s));
    };
    auto objective = [&](std::span<const double> x) {
        auto [hc, bf] = beam(x);
        if (!bf) return std::numeric_limits<double>::quiet_NaN();
        return std::log2(1.0 + beam_gain(hc, bf->w) / cfg.noise_c);
    };
    auto slack = [&](std::span<const double> x) {
        if (!(gamma_sen > 0.0)) return 1.0;
        const ComplexVector hs = cascaded_channels(cfg, with_positions(tx_base, x), st);
        return cfg.reflection * cfg.p_max * f2 * hs.squaredNorm() / (cfg.noise_s * gamma_sen) - 1.0;
    };
    const auto r = detail::best_of_starts(objective, slack, geometric_feasibility(tx_base, cfg.min_spacing),
                                          {chain_placement(cfg, tx_base, st, false).layout,
                                           chain_placement(cfg, tx_base, cu, false).layout},
                                          sc);
    sol.tx = r.search.layout;
    auto [hc, bf] = beam(sol.tx.pa_x);
    if (!r.feasible || !bf)
    {
        sol.tx_weights = ComplexVector::Zero(static_cast<Eigen::Index>(tx_base.size()));
        return p;
    }
    sol.tx_weights = bf->w / bf->w.norm();
    p.feasible = true;
    detail::finish_point(cfg, p, cu, st);
    return p;
}

inline ParetoPoint solve_single(Protocol protocol, const ScenarioConfig& cfg, const SwanLayout& tx,
                                const SwanLayout& rx, const Position& cu, const Position& st, double gamma_sen,
                                const SearchConfig& sc = {})
{
    switch (protocol)
    {
        case Protocol::ss: return solve_ss_single(cfg, tx, rx, cu, st, gamma_sen);
        case Protocol::sa: return solve_sa_single(cfg, tx, rx, cu, st, gamma_sen, sc);
        case Protocol::sm: return solve_sm_single(cfg, tx, rx, cu, st, gamma_sen, sc);
    }
    throw Error("unknown protocol");
}

/// One point per threshold (ascending). A solution that meets a stricter
/// threshold also meets every looser one, so each point keeps the better of
/// its own solve and the next stricter point's solution.
inline std::vector<ParetoPoint> pareto_sweep(Protocol protocol, const ScenarioConfig& cfg, const SwanLayout& tx,
                                             const SwanLayout& rx, const Position& cu, const Position& st,
                                             const std::vector<double>& thresholds, const SearchConfig& sc = {})
{
    if (!std::is_sorted(thresholds.begin(), thresholds.end())) throw Error("thresholds must be ascending");
    std::vector<ParetoPoint> out;
    out.reserve(thresholds.size());
    for (double g : thresholds) out.push_back(solve_single(protocol, cfg, tx, rx, cu, st, g, sc));
    for (std::size_t i = out.size(); i-- > 1;)
    {
        const ParetoPoint& stricter = out[i];
        ParetoPoint& cur = out[i - 1];
        if (stricter.feasible && (!cur.feasible || stricter.rate > cur.rate))
        {
            auto cf = cur.closed_form;
            const double t = cur.threshold;
            cur = stricter;
            cur.threshold = t;
            cur.closed_form = cf;
        }
    }
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i].feasible && out[i - 1].feasible) assert(out[i].rate <= out[i - 1].rate);
    return out;
}

}  // namespace swan
