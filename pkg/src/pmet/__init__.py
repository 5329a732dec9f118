"""Electron-transfer rates for donor-bridge-acceptor systems in optical cavities.

Cavity-free Marcus superexchange plus the photon-dressed golden-rule rates
for a cavity on resonance with the D-A transition or detuned from every
electronic transition, with pathway decomposition and parameter sweeps.
"""

from .core import (HBAR_EV_S, K_B_EV_PER_K, OFF_RESONANT, RESONANT,
                   CavityParams, ConfigError, ConvergenceError, DipoleSet,
                   MolecularParams, SingularityError, SystemSpec,
                   ThermalParams, TruncationPolicy, boltzmann_kt, build_system)
from .fock import (DisplacementParam, OverlapMatrix, displacement_parameter,
                   overlap_matrix, overlap_matrix_oracle, required_size)
from .harness import (SweepResult, SweepSpec, build_sweep, converge_truncation,
                      emit_csv, run_sweep)
from .marcus import (MarcusResult, effective_driving_force, golden_rule_rate,
                     marcus_rate, marcus_result, superexchange_coupling)
from .offres import (PathwayMode, channel_driving_force_offres,
                     direct_da_offres, dressed_ba_offres, dressed_db_offres,
                     indirect_da_offres, pmet_rate_offres, total_da_offres)
from .resonant import (ChannelRow, ChannelTable, RateResult, bridge_coupling,
                       channel_driving_force, direct_da_coupling,
                       dressed_ba_coupling, dressed_db_coupling,
                       pmet_rate_resonant, thermal_populations)

__version__ = "0.1.0"

__all__ = [
    "HBAR_EV_S", "K_B_EV_PER_K", "RESONANT", "OFF_RESONANT",
    "CavityParams", "ConfigError", "ConvergenceError", "DipoleSet",
    "MolecularParams", "SingularityError", "SystemSpec", "ThermalParams",
    "TruncationPolicy", "boltzmann_kt", "build_system",
    "DisplacementParam", "OverlapMatrix", "displacement_parameter",
    "overlap_matrix", "overlap_matrix_oracle", "required_size",
    "MarcusResult", "effective_driving_force", "golden_rule_rate",
    "marcus_rate", "marcus_result", "superexchange_coupling",
    "ChannelRow", "ChannelTable", "RateResult", "bridge_coupling",
    "channel_driving_force", "direct_da_coupling", "dressed_ba_coupling",
    "dressed_db_coupling", "pmet_rate_resonant", "thermal_populations",
    "PathwayMode", "channel_driving_force_offres", "direct_da_offres",
    "dressed_ba_offres", "dressed_db_offres", "indirect_da_offres",
    "pmet_rate_offres", "total_da_offres",
    "SweepResult", "SweepSpec", "build_sweep", "converge_truncation",
    "emit_csv", "run_sweep",
]
