#include "cpq/interferometer.hpp"

#include <cmath>

#include "cpq/constants.hpp"
#include "cpq/trig.hpp"

namespace cpq {

void ChannelSet::validate() const {
    if (!(gap > 0.0))
        throw InvalidSpec("channel gap must be > 0");
    for (double t : transmissions)
        if (t < 0.0 || t > 1.0)
            throw InvalidSpec("channel transmission outside [0, 1]");
}

HarmonicPotential loop_potential(const InterferometerLoop& loop, FluxErrorModel model) {
    const double s1 = loop.arm1.ej1 + loop.arm2.ej1;
    const double d1 = loop.arm1.ej1 - loop.arm2.ej1;
    const double s2 = loop.arm1.ej2 + loop.arm2.ej2;
    const double d2 = loop.arm1.ej2 - loop.arm2.ej2;

    HarmonicPotential p;
    if (model == FluxErrorModel::linearized) {
        // Expansion around half flux: the detuning tilts the two valleys via
        // cos(phi) while the imbalance and pair-tunneling terms keep their
        // half-flux values.
        const double df = loop.flux - 0.5;
        p.a1 = -s1 * df;   // slope 2*E_J1 per unit flux for balanced arms
        p.b1 = -d1;
        p.a2 = -s2;
        p.b2 = 0.0;
        return p;
    }
    const double cf = cos_pi(loop.flux);
    const double sf = sin_pi(loop.flux);
    const double c2f = cos_pi(2.0 * loop.flux);
    const double s2f = sin_pi(2.0 * loop.flux);
    p.a1 = -s1 * cf;
    p.b1 = -d1 * sf;
    p.a2 = s2 * c2f;
    p.b2 = d2 * s2f;
    return p;
}

double potential_value(const HarmonicPotential& p, double phi) {
    return p.a1 * std::cos(phi) + p.b1 * std::sin(phi) +
           p.a2 * std::cos(2.0 * phi) + p.b2 * std::sin(2.0 * phi);
}

double short_junction_energy(const ChannelSet& channels, double phi) {
    channels.validate();
    const double s = std::sin(0.5 * phi);
    double e = 0.0;
    for (double t : channels.transmissions)
        e -= std::sqrt(1.0 - t * s * s);
    return channels.gap * e;
}

HarmonicFit fit_harmonics(const ChannelSet& channels) {
    channels.validate();
    constexpr int n = 4096;
    double c[7] = {0, 0, 0, 0, 0, 0, 0};
    for (int i = 0; i < n; ++i) {
        const double phi = 2.0 * kPi * i / n;
        const double e = short_junction_energy(channels, phi);
        for (int m = 1; m <= 6; ++m)
            c[m] += e * std::cos(m * phi);
    }
    for (int m = 1; m <= 6; ++m)
        c[m] *= 2.0 / n;

    HarmonicFit fit;
    fit.ej1 = -c[1];
    fit.ej2 = c[2];
    // RMS over phi of the neglected part sum_{m=3..6} c_m cos(m phi).
    fit.residual = std::sqrt(0.5 * (c[3] * c[3] + c[4] * c[4] + c[5] * c[5] + c[6] * c[6]));
    return fit;
}

} // namespace cpq
