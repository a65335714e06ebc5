#pragma once

namespace dnpu::constants {

// Physical constants used throughout, in the project unit system:
// lengths in nm, energies in eV, voltages in V, time in s, currents in nA.
//
//   k_boltzmann_ev   CODATA exact value of k_B expressed in eV/K
//   elementary_charge_c  CODATA exact value of e in coulomb
//   coulomb_ev_nm    e^2/(4*pi*eps0) in eV*nm; divide by eps_r and the
//                    separation in nm to get the pair interaction in eV

inline constexpr double k_boltzmann_ev = 8.617333262e-5;
inline constexpr double elementary_charge_c = 1.602176634e-19;
inline constexpr double coulomb_ev_nm = 1.43996;

// One electron crossing per second equals this many nA.
inline constexpr double electrons_per_s_to_na = elementary_charge_c * 1e9;

}  // namespace dnpu::constants
