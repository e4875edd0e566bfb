#pragma once

// Straight-line re-derivation of the channel and SNR expressions, written
// without touching the library's helpers.

#include <cmath>
#include <complex>
#include <vector>

namespace oracle {

using cd = std::complex<double>;

struct Geo
{
    double freq = 28e9, n_eff = 1.4, kappa = 0.08, height = 3.0;
};

inline double lam(const Geo& g) { return 3.0e8 / g.freq; }

/// Channel from a feed at fx through a PA at (px, py, h) to point (qx, qy, qz).
inline cd cascade(const Geo& g, double fx, double px, double py, double qx, double qy, double qz)
{
    const double l = lam(g);
    const double guided = std::abs(px - fx);
    const double amp_wg = std::exp(-g.kappa / 20.0 * std::log(10.0) * guided);
    const double ph_wg = -2.0 * M_PI * g.n_eff / l * guided;
    const double dx = px - qx, dy = py - qy, dz = g.height - qz;
    const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
    const double amp_fs = l / (4.0 * M_PI * r);
    const double ph_fs = -2.0 * M_PI / l * r;
    return amp_wg * amp_fs * cd(std::cos(ph_wg + ph_fs), std::sin(ph_wg + ph_fs));
}

}  // namespace oracle
