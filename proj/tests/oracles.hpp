#pragma once

// Reference values produced by tests/compute_oracles.py (scipy DOP853,
// rtol 1e-13) and by closed forms. Do not edit by hand.

namespace regimelq::oracle {

// Symmetric two-regime scalar problem: P(t) = 1 / (1 + T - t).
inline constexpr double kE1Value = 0.5;
// Its first Picard iterate at t = 0.
inline constexpr double kE1FirstIterate = 0.6534539341427168;

// Same problem with Q = 1 in regime 1: initial iterate and full solution at t = 0.
inline constexpr double kAsymP0[2] = {1.7161661791908422, 1.2838338208091584};
inline constexpr double kAsymP[2] = {0.89748855493227453, 0.62621296745047428};

// Two-state chain with unit rates: P(α_1 ≠ α_0) = (1 - e^{-2}) / 2.
inline constexpr double kSwitchProbability = 0.43233235838169365;

// configs/two_state.yaml, P(0, i) row-major.
inline constexpr double kTwoStateP1[4] = {1.0191019723036636, -0.1657822349266514, -0.16578223492665145,
                                          1.1209701008531321};
inline constexpr double kTwoStateP2[4] = {0.7852986549623503, -0.054664046457771731, -0.054664046457771828,
                                          1.0022779300222679};

}  // namespace regimelq::oracle
