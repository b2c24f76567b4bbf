#ifndef CPQ_TRIG_HPP
#define CPQ_TRIG_HPP

#include <cmath>

#include "cpq/constants.hpp"

namespace cpq {

// cos(pi x) and sin(pi x) with exact values at half-integer x.  Interference
// zeros at half flux and charge-degeneracy points must be exact so that
// symmetry-forbidden couplings are absent from the operator by construction,
// not merely small.

inline double cos_pi(double x) {
    const double r = std::remainder(x, 2.0); // r in [-1, 1]
    const double a = std::abs(r);
    if (a == 0.5) return 0.0;
    if (a == 0.0) return 1.0;
    if (a == 1.0) return -1.0;
    return std::cos(kPi * r);
}

inline double sin_pi(double x) {
    const double r = std::remainder(x, 2.0);
    if (r == 0.0 || std::abs(r) == 1.0) return 0.0;
    if (r == 0.5) return 1.0;
    if (r == -0.5) return -1.0;
    return std::sin(kPi * r);
}

} // namespace cpq

#endif
