#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "swan/core_model.hpp"
#include "swan/random.hpp"

namespace swan {

enum class GainMethod { closed_form, oracle, exact_sum, sinh_approx, sinh_large_n, atan_approx };

inline const char* to_string(GainMethod m)
{
    switch (m)
    {
        case GainMethod::closed_form: return "closed_form";
        case GainMethod::oracle: return "oracle";
        case GainMethod::exact_sum: return "exact_sum";
        case GainMethod::sinh_approx: return "sinh_approx";
        case GainMethod::sinh_large_n: return "sinh_large_n";
        case GainMethod::atan_approx: return "atan_approx";
    }
    return "?";
}

/// Average sensing gain of a segmented (SWAN) layout against a single
/// continuous waveguide (PASS) of the same length.
struct GainReport
{
    Protocol protocol = Protocol::ss;
    int n_tx = 0;
    int m_rx = 0;
    double area_x = 0.0;
    double gain_swan = 0.0;
    double gain_pass = 0.0;
    double eta = 0.0;
    double eta_asymptotic = 0.0;
    GainMethod method = GainMethod::closed_form;
    double std_error = 0.0;  // standard error of eta, oracle only
};

namespace detail {

/// (1 - e^{-x}) / x with the removable singularity filled.
inline double loss_average(double x)
{
    if (std::abs(x) < 1e-12) return 1.0 - 0.5 * x;
    return -std::expm1(-x) / x;
}

inline void check_counts(int n, int m)
{
    if (n < 1 || m < 1) throw Error("segment counts must be >= 1");
}

}  // namespace detail

/// SS: target-aligned PAs, so only the in-waveguide loss differs between the
/// architectures. Averaged over a target uniform along x.
inline GainReport gain_ss_closed(const ScenarioConfig& cfg, double area_x, int n, int m)
{
    detail::check_counts(n, m);
    if (!(area_x > 0.0)) throw Error("area length must be positive");
    const double b2 = 2.0 * cfg.attenuation() * area_x;
    GainReport r;
    r.protocol = Protocol::ss;
    r.n_tx = n;
    r.m_rx = m;
    r.area_x = area_x;
    r.gain_swan = detail::loss_average(b2 / n) * detail::loss_average(b2 / m);
    r.gain_pass = detail::loss_average(b2) * detail::loss_average(b2);
    r.eta = r.gain_swan / r.gain_pass;
    const double g = detail::loss_average(b2);
    r.eta_asymptotic = 1.0 / (g * g);
    r.method = GainMethod::closed_form;
    return r;
}

/// Monte-Carlo version of gain_ss_closed: samples feed-to-PA distances directly.
inline GainReport gain_ss_oracle(const ScenarioConfig& cfg, double area_x, int n, int m,
                                 std::uint64_t samples, std::uint64_t seed)
{
    detail::check_counts(n, m);
    if (samples < 10000) throw Error("oracle needs at least 1e4 samples");
    const double beta2 = 2.0 * cfg.attenuation();
    const double lt = area_x / n;
    const double lr = area_x / m;

    auto run = [&](std::uint64_t stream, double len_t, double len_r, double& mean, double& se) {
        CounterRng rng(seed, stream);
        double s = 0.0, s2 = 0.0;
        for (std::uint64_t i = 0; i < samples; ++i)
        {
            const double v = std::exp(-beta2 * len_t * rng.uniform()) * std::exp(-beta2 * len_r * rng.uniform());
            s += v;
            s2 += v * v;
        }
        const double ns = static_cast<double>(samples);
        mean = s / ns;
        const double var = std::max(0.0, s2 / ns - mean * mean);
        se = std::sqrt(var / (ns - 1.0));
    };

    double mw, sw, mp, sp;
    run(0, lt, lr, mw, sw);
    run(1, area_x, area_x, mp, sp);

    GainReport r;
    r.protocol = Protocol::ss;
    r.n_tx = n;
    r.m_rx = m;
    r.area_x = area_x;
    r.gain_swan = mw;
    r.gain_pass = mp;
    r.eta = mw / mp;
    r.std_error = r.eta * std::hypot(sw / mw, sp / mp);
    const double g = detail::loss_average(beta2 * area_x);
    r.eta_asymptotic = 1.0 / (g * g);
    r.method = GainMethod::oracle;
    return r;
}

/// Centred-target geometry for the SA and SM comparisons: the target sits
/// at the midpoint of the middle segment whose PA sits right above it, loss
/// is neglected, and every other PA sits at its segment end nearest the
/// centre. Even counts have no middle segment; even_pairs accepts them with
/// symmetric PA pairs at odd multiples of L/2 from the target.
struct CenteredGeometry
{
    double area_x = 20.0;
    double tx_offset = std::sqrt(130.0);
    double rx_offset = std::sqrt(10.0);
    bool even_pairs = false;
};

inline CenteredGeometry centered_geometry(const ScenarioConfig& cfg, const Position& target, double area_x)
{
    CenteredGeometry g;
    g.area_x = area_x;
    g.tx_offset = lateral_offset(cfg, cfg.y_tx, target);
    g.rx_offset = lateral_offset(cfg, cfg.y_rx, target);
    return g;
}

namespace detail {

/// Coherent amplitude sum of one side: sum over PAs of 1/distance.
inline double sa_side(int count, double area_x, double offset, GainMethod mode, bool even_pairs)
{
    const double len = area_x / count;
    switch (mode)
    {
        case GainMethod::exact_sum:
        {
            double s = 0.0;
            int half;
            if (count % 2 == 1)
            {
                s = 1.0 / offset;
                half = (count - 1) / 2;
            }
            else
            {
                if (!even_pairs) throw Error("centred placement needs an odd segment count");
                half = count / 2;
            }
            for (int k = 1; k <= half; ++k)
            {
                const double a = len * (k - 0.5);
                s += 2.0 / std::sqrt(a * a + offset * offset);
            }
            return s;
        }
        case GainMethod::sinh_approx:
            return 1.0 / offset + 2.0 / len * std::asinh((count - 1) * len / (2.0 * offset));
        case GainMethod::sinh_large_n:
            return 1.0 / offset + 2.0 * count / area_x * std::asinh(area_x / (2.0 * offset));
        default: throw Error(std::string("method not valid for SA: ") + to_string(mode));
    }
}

/// Incoherent power sum of one side: sum over PAs of 1/distance^2.
inline double sm_side(int count, double area_x, double offset, GainMethod mode, bool even_pairs)
{
    const double len = area_x / count;
    const double o2 = offset * offset;
    switch (mode)
    {
        case GainMethod::exact_sum:
        {
            double s = 0.0;
            int half;
            if (count % 2 == 1)
            {
                s = 1.0 / o2;
                half = (count - 1) / 2;
            }
            else
            {
                if (!even_pairs) throw Error("centred placement needs an odd segment count");
                half = count / 2;
            }
            for (int k = 1; k <= half; ++k)
            {
                const double a = len * (k - 0.5);
                s += 2.0 / (a * a + o2);
            }
            return s;
        }
        case GainMethod::atan_approx:
            return 1.0 / o2 + 2.0 / (len * offset) * std::atan((count - 1) * len / (2.0 * offset));
        default: throw Error(std::string("method not valid for SM: ") + to_string(mode));
    }
}

}  // namespace detail

/// Lossless sensing gain of a single PA pair right above the target.
inline double pass_gain_centered(const ScenarioConfig& cfg, const CenteredGeometry& g)
{
    const double e = cfg.path_constant();
    return cfg.reflection * cfg.p_max * std::pow(e, 4)
           / (cfg.noise_s * g.tx_offset * g.tx_offset * g.rx_offset * g.rx_offset);
}

inline GainReport gain_sa_centered(const ScenarioConfig& cfg, const CenteredGeometry& g, int n, int m,
                                   GainMethod mode = GainMethod::exact_sum)
{
    detail::check_counts(n, m);
    const double a = detail::sa_side(n, g.area_x, g.tx_offset, mode, g.even_pairs);
    const double b = detail::sa_side(m, g.area_x, g.rx_offset, mode, g.even_pairs);
    const double e = cfg.path_constant();
    GainReport r;
    r.protocol = Protocol::sa;
    r.n_tx = n;
    r.m_rx = m;
    r.area_x = g.area_x;
    r.method = mode;
    r.gain_swan = cfg.reflection * cfg.p_max * std::pow(e, 4) * a * a * b * b
                  / (static_cast<double>(n) * m * cfg.noise_s);
    r.gain_pass = pass_gain_centered(cfg, g);
    r.eta = r.gain_swan / r.gain_pass;
    const double d4 = std::pow(g.area_x, 4);
    const double st = std::asinh(g.area_x / (2.0 * g.tx_offset));
    const double sr = std::asinh(g.area_x / (2.0 * g.rx_offset));
    r.eta_asymptotic = 16.0 * std::pow(g.tx_offset * g.rx_offset, 2) * n * m / d4 * st * st * sr * sr;
    return r;
}

inline GainReport gain_sm_centered(const ScenarioConfig& cfg, const CenteredGeometry& g, int n, int m,
                                   GainMethod mode = GainMethod::exact_sum)
{
    detail::check_counts(n, m);
    const double a = detail::sm_side(n, g.area_x, g.tx_offset, mode, g.even_pairs);
    const double b = detail::sm_side(m, g.area_x, g.rx_offset, mode, g.even_pairs);
    const double e = cfg.path_constant();
    GainReport r;
    r.protocol = Protocol::sm;
    r.n_tx = n;
    r.m_rx = m;
    r.area_x = g.area_x;
    r.method = mode;
    r.gain_swan = cfg.reflection * cfg.p_max * std::pow(e, 4) * a * b / cfg.noise_s;
    r.gain_pass = pass_gain_centered(cfg, g);
    r.eta = r.gain_swan / r.gain_pass;
    auto side = [&](int count, double offset) {
        const double len = g.area_x / count;
        return 1.0 + 2.0 * offset / len * std::atan(g.area_x / (2.0 * offset));
    };
    r.eta_asymptotic = side(n, g.tx_offset) * side(m, g.rx_offset);
    return r;
}

/// Segment count below which adding SA segments lowers the sensing gain.
inline double sa_turning_point(double area_x, double offset)
{
    return area_x / (2.0 * offset * std::asinh(area_x / (2.0 * offset)));
}

}  // namespace swan
