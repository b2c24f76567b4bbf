#ifndef CPQ_CONSTANTS_HPP
#define CPQ_CONSTANTS_HPP

namespace cpq {

// 2019 SI exact values.
inline constexpr double kElementaryCharge = 1.602176634e-19; // C
inline constexpr double kPlanck = 6.62607015e-34;            // J s

// Charging energy of a 1 fF capacitor as a frequency: E_C/h = e^2/(2hC).
// e^2/(2h) = 1.9370226e-5 F*Hz, so with C in fF and energies in GHz the
// conversion is E_C = kChargingGHzfF / C.  Evaluates to 19.370226 GHz*fF.
inline constexpr double kChargingGHzfF =
    kElementaryCharge * kElementaryCharge / (2.0 * kPlanck) * 1.0e6;

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr const char* kVersion = "0.1.0";

} // namespace cpq

#endif
