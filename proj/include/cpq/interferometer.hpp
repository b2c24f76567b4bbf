#ifndef CPQ_INTERFEROMETER_HPP
#define CPQ_INTERFEROMETER_HPP

#include <vector>

#include "cpq/circuit.hpp"

namespace cpq {

/// Effective single-variable Josephson potential of one loop,
/// V(phi) = a1 cos(phi) + b1 sin(phi) + a2 cos(2 phi) + b2 sin(2 phi),
/// all coefficients in GHz.
struct HarmonicPotential {
    double a1 = 0.0;
    double b1 = 0.0;
    double a2 = 0.0;
    double b2 = 0.0;
};

/// Andreev channel transmissions and superconducting gap of a short junction.
struct ChannelSet {
    std::vector<double> transmissions;
    double gap = 0.0; // GHz

    void validate() const;
};

/// Selects how the flux dependence of a loop enters the potential: the exact
/// interference expansion, or the small-detuning model linear in
/// (flux - 1/2) with slope 2*E_J1 on the cos(phi) quadrature.
enum class FluxErrorModel { exact, linearized };

/// Interference of the two arm potentials V_k(phi) = -ej1 cos(phi)
/// + ej2 cos(2 phi), evaluated at phi -/+ pi*flux:
///   a1 = -(ej1_1 + ej1_2) cos(pi f)     b1 = -(ej1_1 - ej1_2) sin(pi f)
///   a2 =  (ej2_1 + ej2_2) cos(2 pi f)   b2 =  (ej2_1 - ej2_2) sin(2 pi f)
HarmonicPotential loop_potential(const InterferometerLoop& loop,
                                 FluxErrorModel model = FluxErrorModel::exact);

/// V(phi) of a HarmonicPotential, for pointwise checks.
double potential_value(const HarmonicPotential& p, double phi);

/// Exact short-junction Josephson energy
/// E_J(phi) = -gap * sum_m sqrt(1 - T_m sin^2(phi/2)).
double short_junction_energy(const ChannelSet& channels, double phi);

struct HarmonicFit {
    double ej1 = 0.0;     // GHz, coefficient of -cos(phi)
    double ej2 = 0.0;     // GHz, coefficient of +cos(2 phi)
    double residual = 0.0; // GHz, RMS of the retained 3rd..6th harmonics
};

/// First two Fourier cosine coefficients of the exact junction energy over
/// one period (trapezoid quadrature, 4096 nodes).
HarmonicFit fit_harmonics(const ChannelSet& channels);

} // namespace cpq

#endif
