"""Cavity-free nonadiabatic superexchange rate for a donor-bridge-acceptor system.

Sign convention: delta_g is the free-energy change of the transfer step as
written, so the driving force is -delta_g and the activation energy is
(delta_g + lambda)^2 / (4 lambda).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import HBAR_EV_S, POLE_GUARD_EV, SingularityError, SystemSpec


@dataclass(frozen=True)
class MarcusResult:
    v_eff: float        # effective D-A coupling, eV
    delta_g: float      # effective free-energy change, eV
    activation: float   # (delta_g + lambda)^2 / (4 lambda), eV
    rate: float         # 1/s


def _check_gap(gap, name):
    if abs(gap) < POLE_GUARD_EV:
        raise SingularityError(
            "bridge gap %s = %.3e eV lies inside the resonance guard; "
            "perturbative superexchange is invalid at resonance" % (name, gap))


def superexchange_coupling(v_db, v_ba, gap_ba, gap_db):
    """Effective D-A coupling through virtual bridge occupation, eV.

    -(v_db * v_ba / 2) * (1/gap_ba + 1/gap_db) with gaps U_B-U_A and U_B-U_D.
    """
    _check_gap(gap_ba, "U_B-U_A")
    _check_gap(gap_db, "U_B-U_D")
    return -(v_db * v_ba / 2.0) * (1.0 / gap_ba + 1.0 / gap_db)


def effective_driving_force(u_a_minus_u_d, v_db, v_ba, gap_ba, gap_db):
    """Site-energy difference corrected by the second-order bridge shifts, eV."""
    _check_gap(gap_ba, "U_B-U_A")
    _check_gap(gap_db, "U_B-U_D")
    return u_a_minus_u_d - v_ba * v_ba / gap_ba + v_db * v_db / gap_db


def golden_rule_rate(coupling_sq, delta_g, lam, kt):
    """Nonadiabatic rate for one channel, 1/s.

    (coupling_sq / hbar) * sqrt(pi / (lam kT)) * exp(-(delta_g+lam)^2 / (4 lam kT)).
    Accepts scalars or arrays; shared by the cavity-free rate and every
    photon-dressed channel so the prefactor is computed identically across
    code paths.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive, got %r" % (lam,))
    if not kt > 0:
        raise ValueError("kT must be positive, got %r" % (kt,))
    coupling_sq = np.asarray(coupling_sq, dtype=float)
    delta_g = np.asarray(delta_g, dtype=float)
    with np.errstate(under="ignore"):
        gauss = np.exp(-((delta_g + lam) ** 2) / (4.0 * lam * kt))
        out = (coupling_sq / HBAR_EV_S) * np.sqrt(np.pi / (lam * kt)) * gauss
    return float(out) if out.ndim == 0 else out


def marcus_rate(v_eff, delta_g, lam, kt):
    """Classical Marcus rate with coupling v_eff (eV), 1/s."""
    return golden_rule_rate(v_eff * v_eff, delta_g, lam, kt)


def marcus_result(spec: SystemSpec) -> MarcusResult:
    """Cavity-free rate for a full system spec (cavity fields ignored)."""
    mol = spec.molecular
    v_eff = superexchange_coupling(mol.v_db, mol.v_ba, mol.gap_ba, mol.gap_db)
    delta_g = effective_driving_force(mol.u_a - mol.u_d, mol.v_db, mol.v_ba,
                                      mol.gap_ba, mol.gap_db)
    lam = mol.lambda_da
    return MarcusResult(
        v_eff=v_eff,
        delta_g=delta_g,
        activation=(delta_g + lam) ** 2 / (4.0 * lam),
        rate=marcus_rate(v_eff, delta_g, lam, spec.thermal.kt),
    )
