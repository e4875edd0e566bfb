#pragma once

#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <optional>

#include "swan/core_model.hpp"

namespace swan {

// All routines here use the Hermitian convention: the gain of w on channel a
// is |a^H w|^2. The channel model applies transmit weights as h^T w, so pass
// effective(h) = conj(h) for transmit channels.

inline ComplexVector effective(const ComplexVector& h) { return h.conjugate(); }

/// Unit-norm maximum-ratio combiner: maximises |w^H f| over unit w.
inline ComplexVector mrc_combiner(const ComplexVector& f)
{
    const double n = f.norm();
    if (!(n > 0.0)) throw Error("combiner: zero channel");
    return f / n;
}

enum class BeamBranch { mrt, subspace };

struct SubspaceBeamformer
{
    ComplexVector w;
    BeamBranch branch = BeamBranch::mrt;
    double power_threshold = 0.0;  // power above which MRT already meets the sensing floor
    Complex c1{0.0, 0.0};
    Complex c2{0.0, 0.0};
};

/// Rate-optimal transmit beamformer under a sensing SNR floor with the
/// receive side matched to f_s.
///
/// Maximises |h_c^H w|^2 subject to ||w||^2 = power and
/// alpha ||f_s||^2 |h_s^H w|^2 / noise_s >= gamma_sen.
/// Returns nullopt when no beamformer meets the floor.
inline std::optional<SubspaceBeamformer> try_subspace_beamformer(const ComplexVector& h_c, const ComplexVector& h_s,
                                                                 const ComplexVector& f_s, double power,
                                                                 double gamma_sen, double alpha, double noise_s)
{
    const double nc = h_c.norm();
    const double ns = h_s.norm();
    const double nf2 = f_s.squaredNorm();
    if (!(nc > 0.0) || !(ns > 0.0) || !(nf2 > 0.0)) throw Error("beamformer: zero channel");
    if (h_c.size() != h_s.size()) throw Error("beamformer: channel dimension mismatch");
    if (!(power >= 0.0) || !(gamma_sen >= 0.0)) throw Error("beamformer: negative power or threshold");

    const Complex cross = h_s.dot(h_c);  // h_s^H h_c
    SubspaceBeamformer out;
    if (gamma_sen == 0.0) out.power_threshold = 0.0;
    else if (std::abs(cross) == 0.0) out.power_threshold = std::numeric_limits<double>::infinity();
    else out.power_threshold = gamma_sen * nc * nc * noise_s / (alpha * nf2 * std::norm(cross));

    if (power > out.power_threshold || (power == out.power_threshold && gamma_sen == 0.0))
    {
        out.w = std::sqrt(power) * h_c / nc;
        out.branch = BeamBranch::mrt;
        return out;
    }

    const ComplexVector hs_hat = h_s / ns;
    const Complex proj = hs_hat.dot(h_c);
    const ComplexVector perp = h_c - proj * hs_hat;
    const double pn = perp.norm();
    const double c1sq = gamma_sen * noise_s / (alpha * nf2 * ns * ns);
    if (c1sq > power * (1.0 + 1e-12)) return std::nullopt;

    if (pn <= 1e-9 * nc)
    {
        // Collinear channels: MRT is also the best sensing beam.
        out.w = std::sqrt(power) * h_c / nc;
        out.branch = BeamBranch::mrt;
        return out;
    }

    const Complex ph1 = std::abs(proj) > 0.0 ? proj / std::abs(proj) : Complex(1.0, 0.0);
    out.c1 = std::sqrt(c1sq) * ph1;
    out.c2 = std::sqrt(std::max(power - c1sq, 0.0));  // perp^H h_c = ||perp||^2 is real
    out.w = out.c1 * hs_hat + out.c2 * perp / pn;
    out.branch = BeamBranch::subspace;
    return out;
}

inline SubspaceBeamformer subspace_beamformer(const ComplexVector& h_c, const ComplexVector& h_s,
                                              const ComplexVector& f_s, double power, double gamma_sen,
                                              double alpha, double noise_s)
{
    auto r = try_subspace_beamformer(h_c, h_s, f_s, power, gamma_sen, alpha, noise_s);
    if (!r) throw InfeasibleError("sensing threshold unreachable with the given power");
    return *r;
}

/// Interpolates between MRT towards the user (eps = 0) and a beam with a
/// share eps of the power on the target direction orthogonal to the user.
/// The orthogonal part is co-phased with the target channel's projection.
inline ComplexVector epsilon_beamformer(const ComplexVector& h_c, const ComplexVector& h_s, double power, double eps)
{
    if (!(eps >= 0.0 && eps <= 1.0)) throw Error("epsilon must lie in [0, 1]");
    if (!(power >= 0.0)) throw Error("beamformer: negative power");
    const double nc = h_c.norm();
    if (!(nc > 0.0)) throw Error("beamformer: zero channel");
    const ComplexVector hc_hat = h_c / nc;
    const ComplexVector u = h_s - hc_hat.dot(h_s) * hc_hat;
    const double un = u.norm();
    const Complex cross = h_s.dot(hc_hat);  // h_s^H hc_hat
    const Complex align = std::abs(cross) > 0.0 ? cross / std::abs(cross) : Complex(1.0, 0.0);
    if (un <= 1e-9 * std::max(h_s.norm(), std::numeric_limits<double>::min()))
    {
        spdlog::debug("epsilon beamformer: channels collinear, returning scaled MRT");
        return std::sqrt((1.0 - eps) * power) * hc_hat;
    }
    return std::sqrt((1.0 - eps) * power) * hc_hat + std::sqrt(eps * power) * align * (u / un);
}

/// Power share at which the epsilon family maximises the target gain.
inline double epsilon_sensing_peak(const ComplexVector& h_c, const ComplexVector& h_s)
{
    const double nc = h_c.norm();
    const ComplexVector hc_hat = h_c / nc;
    const ComplexVector u = h_s - hc_hat.dot(h_s) * hc_hat;
    return u.squaredNorm() / h_s.squaredNorm();
}

/// Gain |a^H w|^2.
inline double beam_gain(const ComplexVector& a, const ComplexVector& w) { return std::norm(a.dot(w)); }

}  // namespace swan
