#pragma once

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "swan/units.hpp"

namespace swan {

using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when a power budget or SNR threshold cannot be met.
class InfeasibleError : public Error
{
public:
    using Error::Error;
};

struct Position
{
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

inline double distance(const Position& a, const Position& b)
{
    return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z);
}

/// Physical scenario. Defaults are the reference indoor setup: a 20 m x 20 m
/// floor, waveguides 3 m above it at y = +5 (transmit) and y = -5 (receive).
struct ScenarioConfig
{
    double carrier_freq_hz = 28e9;
    double n_eff = 1.4;
    double kappa_db_per_m = 0.08;
    double height = 3.0;
    double y_tx = 5.0;
    double y_rx = -5.0;
    double area_x = 20.0;
    double area_y = 20.0;
    double p_max = 0.1;         // W
    double noise_c = 1e-12;     // W, communication receiver
    double noise_s = 1e-12;     // W, sensing receiver
    double reflection = 1.0;    // target reflection coefficient (power)
    double min_spacing = kSpeedOfLight / 28e9 / 2.0;

    double wavelength() const { return kSpeedOfLight / carrier_freq_hz; }
    double guided_wavelength() const { return wavelength() / n_eff; }
    double wavenumber() const { return 2.0 * kPi / wavelength(); }
    double guided_wavenumber() const { return 2.0 * kPi / guided_wavelength(); }
    /// Free-space amplitude constant: wavelength / (4 pi).
    double path_constant() const { return wavelength() / (4.0 * kPi); }
    /// In-waveguide amplitude attenuation per metre (nepers).
    double attenuation() const { return kappa_db_per_m * std::log(10.0) / 20.0; }

    void validate() const
    {
        auto positive = [](double v, const char* what) {
            if (!(v > 0.0) || !std::isfinite(v))
                throw Error(std::string("scenario: ") + what + " must be positive and finite");
        };
        positive(carrier_freq_hz, "carrier frequency");
        positive(height, "height");
        positive(area_x, "area_x");
        positive(area_y, "area_y");
        positive(noise_c, "communication noise power");
        positive(noise_s, "sensing noise power");
        positive(reflection, "reflection coefficient");
        if (!(n_eff > 1.0))
            throw Error("scenario: effective refractive index must exceed 1");
        if (!(kappa_db_per_m >= 0.0))
            throw Error("scenario: attenuation must be non-negative");
        if (!(p_max >= 0.0) || !std::isfinite(p_max))
            throw Error("scenario: power budget must be non-negative");
        if (!(min_spacing >= 0.0))
            throw Error("scenario: minimum spacing must be non-negative");
    }
};

enum class Side { tx, rx };

/// Segmented waveguide along x with one pinching antenna per segment.
/// Segment i (0-based) spans [i L, (i+1) L] and is fed from its left end.
struct SwanLayout
{
    double segment_len = 0.0;
    double y = 0.0;
    std::vector<double> feed_x;
    std::vector<double> pa_x;

    std::size_t size() const { return pa_x.size(); }
    double segment_lo(std::size_t i) const { return feed_x[i]; }
    double segment_hi(std::size_t i) const { return feed_x[i] + segment_len; }
    double total_length() const { return segment_len * static_cast<double>(size()); }

    Position pa(std::size_t i, double height) const { return {pa_x[i], y, height}; }

    /// Segment (0-based) containing x by the ceiling rule, clamped to range.
    std::size_t segment_of(double x) const
    {
        double k = std::ceil(x / segment_len);
        if (k < 1.0) k = 1.0;
        if (k > static_cast<double>(size())) k = static_cast<double>(size());
        return static_cast<std::size_t>(k) - 1;
    }

    /// PAs at segment centres.
    static SwanLayout uniform(double length, double y, std::size_t segments)
    {
        if (segments == 0) throw Error("layout needs at least one segment");
        if (!(length > 0.0)) throw Error("layout length must be positive");
        SwanLayout l;
        l.segment_len = length / static_cast<double>(segments);
        l.y = y;
        l.feed_x.resize(segments);
        l.pa_x.resize(segments);
        for (std::size_t i = 0; i < segments; ++i)
        {
            l.feed_x[i] = static_cast<double>(i) * l.segment_len;
            l.pa_x[i] = l.feed_x[i] + 0.5 * l.segment_len;
        }
        return l;
    }

    static SwanLayout uniform(const ScenarioConfig& cfg, Side side, std::size_t segments)
    {
        return uniform(cfg.area_x, side == Side::tx ? cfg.y_tx : cfg.y_rx, segments);
    }
};

inline constexpr double kLayoutTol = 1e-9;

/// Segment bounds and neighbour spacing for a candidate PA vector.
inline bool positions_feasible(const SwanLayout& l, std::span<const double> x, double min_spacing)
{
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        if (x[i] < l.segment_lo(i) - kLayoutTol || x[i] > l.segment_hi(i) + kLayoutTol) return false;
        if (i > 0 && x[i] - x[i - 1] < min_spacing - kLayoutTol) return false;
    }
    return true;
}

inline bool layout_feasible(const SwanLayout& l, double min_spacing)
{
    return l.feed_x.size() == l.pa_x.size() && positions_feasible(l, l.pa_x, min_spacing);
}

/// Lateral offset between a waveguide at height cfg.height and a ground point.
inline double lateral_offset(const ScenarioConfig& cfg, double waveguide_y, const Position& p)
{
    return std::hypot(waveguide_y - p.y, cfg.height - p.z);
}

/// Propagation inside the waveguide from feed to PA.
inline Complex in_waveguide_coeff(const ScenarioConfig& cfg, double feed_x, double pa_x)
{
    const double d = std::abs(pa_x - feed_x);
    return std::pow(10.0, -cfg.kappa_db_per_m * d / 20.0)
           * std::polar(1.0, -cfg.guided_wavenumber() * d);
}

/// Spherical-wave free-space coefficient between a PA and a point.
inline Complex free_space_coeff(const ScenarioConfig& cfg, const Position& pa, const Position& point)
{
    const double r = distance(pa, point);
    if (!(r > 1e-12)) throw Error("degenerate geometry: PA coincides with the user or target");
    return cfg.path_constant() / r * std::polar(1.0, -cfg.wavenumber() * r);
}

/// Per-PA cascaded (waveguide x free-space) channel to a point.
inline ComplexVector cascaded_channels(const ScenarioConfig& cfg, const SwanLayout& l, const Position& point)
{
    ComplexVector h(static_cast<Eigen::Index>(l.size()));
    for (std::size_t i = 0; i < l.size(); ++i)
        h[static_cast<Eigen::Index>(i)] = in_waveguide_coeff(cfg, l.feed_x[i], l.pa_x[i])
                                          * free_space_coeff(cfg, l.pa(i, cfg.height), point);
    return h;
}

enum class Protocol { ss, sa, sm };

inline const char* to_string(Protocol p)
{
    switch (p)
    {
        case Protocol::ss: return "ss";
        case Protocol::sa: return "sa";
        case Protocol::sm: return "sm";
    }
    return "?";
}

inline Protocol parse_protocol(const std::string& s)
{
    if (s == "ss" || s == "SS") return Protocol::ss;
    if (s == "sa" || s == "SA") return Protocol::sa;
    if (s == "sm" || s == "SM") return Protocol::sm;
    throw Error("unknown protocol '" + s + "'");
}

/// Placement plus weights for one slot.
///
/// ss: one-hot selection vectors. sm: unit-norm transmit beamformer (applied
/// as h^T w) and unit-norm receive combiner (applied as w^H f). sa: weights
/// unused, equal split is implied.
struct ProtocolSolution
{
    Protocol protocol = Protocol::sm;
    SwanLayout tx;
    SwanLayout rx;
    ComplexVector tx_weights;
    ComplexVector rx_weights;
    double power = 0.0;
};

struct LinkMetrics
{
    double gamma_c = 0.0;
    double gamma_s = 0.0;
    double rate = 0.0;
};

namespace detail {

inline void check_selection(const ComplexVector& w, std::size_t n, const char* what)
{
    if (static_cast<std::size_t>(w.size()) != n) throw Error(std::string(what) + " has wrong dimension");
    int ones = 0;
    for (Eigen::Index i = 0; i < w.size(); ++i)
    {
        const Complex v = w[i];
        if (v == Complex(1.0, 0.0)) ++ones;
        else if (v != Complex(0.0, 0.0)) throw Error(std::string(what) + " must be a 0/1 selection");
    }
    if (ones != 1) throw Error(std::string(what) + " must select exactly one PA");
}

inline void check_unit(const ComplexVector& w, std::size_t n, const char* what)
{
    if (static_cast<std::size_t>(w.size()) != n) throw Error(std::string(what) + " has wrong dimension");
    if (std::abs(w.norm() - 1.0) > 1e-9) throw Error(std::string(what) + " must have unit norm");
}

}  // namespace detail

/// Channel-model SNRs and per-slot rate (1/K) log2(1 + gamma_c).
inline LinkMetrics snr_and_rate(const ScenarioConfig& cfg, const ProtocolSolution& sol,
                                const Position& user, const Position& target, int slots = 1)
{
    if (slots < 1) throw Error("slot count must be >= 1");
    if (!(sol.power >= 0.0) || !std::isfinite(sol.power)) throw Error("power must be non-negative");
    if (sol.tx.size() == 0 || sol.rx.size() == 0) throw Error("empty layout");

    const ComplexVector hc = cascaded_channels(cfg, sol.tx, user);
    const ComplexVector hs = cascaded_channels(cfg, sol.tx, target);
    const ComplexVector fs = cascaded_channels(cfg, sol.rx, target);
    const double n = static_cast<double>(sol.tx.size());
    const double m = static_cast<double>(sol.rx.size());
    const double p = sol.power;

    LinkMetrics out;
    switch (sol.protocol)
    {
        case Protocol::ss:
            detail::check_selection(sol.tx_weights, sol.tx.size(), "tx selection");
            detail::check_selection(sol.rx_weights, sol.rx.size(), "rx selection");
            [[fallthrough]];
        case Protocol::sm:
        {
            if (sol.protocol == Protocol::sm)
            {
                detail::check_unit(sol.tx_weights, sol.tx.size(), "tx beamformer");
                detail::check_unit(sol.rx_weights, sol.rx.size(), "rx combiner");
            }
            const Complex cu = hc.transpose() * sol.tx_weights;
            const Complex st = hs.transpose() * sol.tx_weights;
            const Complex rx = sol.rx_weights.dot(fs);
            out.gamma_c = p * std::norm(cu) / cfg.noise_c;
            out.gamma_s = cfg.reflection * p * std::norm(rx) * std::norm(st) / cfg.noise_s;
            break;
        }
        case Protocol::sa:
            out.gamma_c = p * std::norm(hc.sum()) / (n * cfg.noise_c);
            out.gamma_s = cfg.reflection * p * std::norm(fs.sum()) * std::norm(hs.sum())
                          / (n * m * cfg.noise_s);
            break;
    }
    out.rate = std::log2(1.0 + out.gamma_c) / static_cast<double>(slots);
    return out;
}

inline ComplexVector one_hot(std::size_t n, std::size_t k)
{
    ComplexVector v = ComplexVector::Zero(static_cast<Eigen::Index>(n));
    v[static_cast<Eigen::Index>(k)] = 1.0;
    return v;
}

}  // namespace swan
