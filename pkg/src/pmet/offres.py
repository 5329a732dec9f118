"""Off-resonance cavity-mediated ET rate: all three sites are photon-dressed.

The cavity couples to the D-B and B-A transitions, so every channel (n, m)
carries an internal sum over bridge photon numbers l.  The donor-acceptor
amplitude splits into a cavity-established direct (through-space) part and a
bridge-assisted superexchange part; the two can be evaluated separately for
pathway analysis.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .core import (OFF_RESONANT, POLE_GUARD_EV, ConfigError, SingularityError,
                   SystemSpec)
from .fock import displacement_parameter, overlap_matrix, required_size
from .marcus import golden_rule_rate
from .resonant import (AMPLITUDE_FLOOR_EV, ChannelRow, ChannelTable, RateResult,
                       adaptive_staircase, thermal_populations)


class PathwayMode(str, Enum):
    """Which D-A amplitude enters the rate: both pathways or one alone."""

    TOTAL = "total"
    DIRECT_ONLY = "direct_only"
    BRIDGE_ONLY = "bridge_only"


def _dressing(spec: SystemSpec, max_index, l_top):
    cav, dip = spec.cavity, spec.dipoles
    d_db = displacement_parameter(cav.chi, dip.delta_db, cav.hbar_omega_c)
    d_ba = displacement_parameter(cav.chi, dip.delta_ba, cav.hbar_omega_c)
    d_da = displacement_parameter(cav.chi, dip.delta_da, cav.hbar_omega_c)
    worst = max(abs(d_db.d), abs(d_ba.d), abs(d_da.d))
    size = required_size(max(max_index, l_top) + 2, worst)
    return (overlap_matrix(d_db, size), overlap_matrix(d_ba, size),
            overlap_matrix(d_da, size))


def _check_mode(spec):
    if spec.mode != OFF_RESONANT:
        raise ConfigError("spec is not in off_resonant mode (dipoles.mode = %r)"
                          % spec.mode, key="mode")


def dressed_db_offres(n, l, spec: SystemSpec):
    """Dressed donor-bridge coupling, eV.

    v_db s[n][l] + hbar_g_c (sqrt(n) s[n-1][l] + sqrt(n+1) s[n+1][l]) on the
    D-B displacement dressing; the lowering term is absent at n = 0.
    """
    _check_mode(spec)
    s_db, _, _ = _dressing(spec, max(n, l), max(n, l))
    s = s_db.entries
    lower = 0.0 if n == 0 else np.sqrt(float(n)) * s[n - 1, l]
    return (spec.molecular.v_db * s[n, l]
            + spec.cavity.hbar_g_c * (lower + np.sqrt(n + 1.0) * s[n + 1, l]))


def dressed_ba_offres(l, m, spec: SystemSpec):
    """Dressed bridge-acceptor coupling, eV.

    v_ba s[l][m] + hbar_eta_c (sqrt(l) s[l-1][m] + sqrt(l+1) s[l+1][m]) on the
    B-A displacement dressing.  Both ladder factors are functions of l, the
    bra-side (bridge) photon number: the lowering term scales as sqrt(l) and
    is absent at l = 0.
    """
    _check_mode(spec)
    _, s_ba, _ = _dressing(spec, max(l, m), max(l, m))
    s = s_ba.entries
    lower = 0.0 if l == 0 else np.sqrt(float(l)) * s[l - 1, m]
    return (spec.molecular.v_ba * s[l, m]
            + spec.cavity.hbar_eta_c * (lower + np.sqrt(l + 1.0) * s[l + 1, m]))


def direct_da_offres(n, m, spec: SystemSpec):
    """Cavity-established direct D-A amplitude (hbar g eta / omega) s_da[n][m], eV."""
    _check_mode(spec)
    _, _, s_da = _dressing(spec, max(n, m), max(n, m))
    cav = spec.cavity
    return cav.hbar_g_c * cav.hbar_eta_c / cav.hbar_omega_c * s_da.entries[n, m]


def _resolve_l_max(spec, l_max):
    return spec.truncation.l_max if l_max is None else int(l_max)


def indirect_da_offres(n, m, spec: SystemSpec, l_max=None):
    """Bridge-assisted D-A amplitude: sum over bridge photon channels l, eV.

    -sum_l (vdb[n,l] vba[l,m] / 2) [1/(gap_ba + (l-m) hw) + 1/(gap_db + (l-n) hw)]
    truncated at l_max.  Terms with a vanishing numerator contribute 0; a
    surviving term whose denominator falls inside the pole guard raises.
    """
    _check_mode(spec)
    l_max = _resolve_l_max(spec, l_max)
    mol, w = spec.molecular, spec.cavity.hbar_omega_c
    acc = 0.0
    for l in range(l_max + 1):
        num = dressed_db_offres(n, l, spec) * dressed_ba_offres(l, m, spec)
        if num == 0.0:
            continue
        den_a = mol.gap_ba + (l - m) * w
        den_d = mol.gap_db + (l - n) * w
        for value, tag in ((den_a, "U_B-U_A + (l-m)*hw"), (den_d, "U_B-U_D + (l-n)*hw")):
            if abs(value) < POLE_GUARD_EV:
                raise SingularityError(
                    "photon-shifted resonance %s = %.3e eV in bridge channel "
                    "(l=%d) of channel (n=%d, m=%d)" % (tag, value, l, n, m),
                    indices=(l, n, m))
        acc += -(num / 2.0) * (1.0 / den_a + 1.0 / den_d)
    return acc


def total_da_offres(n, m, spec: SystemSpec, mode=PathwayMode.TOTAL, l_max=None):
    """Selected D-A amplitude for channel (n, m), eV."""
    mode = PathwayMode(mode)
    if mode is PathwayMode.DIRECT_ONLY:
        return direct_da_offres(n, m, spec)
    if mode is PathwayMode.BRIDGE_ONLY:
        return indirect_da_offres(n, m, spec, l_max)
    return direct_da_offres(n, m, spec) + indirect_da_offres(n, m, spec, l_max)


def channel_driving_force_offres(n, m, spec: SystemSpec, l_max=None):
    """Effective free-energy change for channel (n, m), eV."""
    _check_mode(spec)
    l_max = _resolve_l_max(spec, l_max)
    mol, w = spec.molecular, spec.cavity.hbar_omega_c
    base = -(mol.u_d - mol.u_a) + (m - n) * w
    for l in range(l_max + 1):
        num_ba = dressed_ba_offres(l, n, spec) * dressed_ba_offres(l, m, spec)
        if num_ba != 0.0:
            den = mol.gap_ba + (l - m) * w
            if abs(den) < POLE_GUARD_EV:
                raise SingularityError(
                    "photon-shifted resonance U_B-U_A + (l-m)*hw in bridge channel "
                    "(l=%d) of channel (n=%d, m=%d)" % (l, n, m), indices=(l, n, m))
            base -= num_ba / den
        num_db = dressed_db_offres(n, l, spec) * dressed_db_offres(m, l, spec)
        if num_db != 0.0:
            den = mol.gap_db + (l - n) * w
            if abs(den) < POLE_GUARD_EV:
                raise SingularityError(
                    "photon-shifted resonance U_B-U_D + (l-n)*hw in bridge channel "
                    "(l=%d) of channel (n=%d, m=%d)" % (l, n, m), indices=(l, n, m))
            base += num_db / den
    return base


def _dressed_matrices(spec, top, l_top):
    """Vectorized dressed coupling matrices VDB (rows x l) and VBA (l x cols)."""
    mol, cav = spec.molecular, spec.cavity
    s_db, s_ba, s_da = _dressing(spec, top, l_top)

    rows = np.arange(top + 1, dtype=float)
    ls = np.arange(l_top + 1, dtype=float)

    db = s_db.entries
    core = db[: top + 1, : l_top + 1]
    lowered = np.zeros_like(core)
    lowered[1:, :] = db[:top, : l_top + 1]
    raised = db[1 : top + 2, : l_top + 1]
    vdb = (mol.v_db * core
           + cav.hbar_g_c * (np.sqrt(rows)[:, None] * lowered
                             + np.sqrt(rows + 1.0)[:, None] * raised))

    ba = s_ba.entries
    core = ba[: l_top + 1, : top + 1]
    lowered = np.zeros_like(core)
    lowered[1:, :] = ba[:l_top, : top + 1]
    raised = ba[1 : l_top + 2, : top + 1]
    vba = (mol.v_ba * core
           + cav.hbar_eta_c * (np.sqrt(ls)[:, None] * lowered
                               + np.sqrt(ls + 1.0)[:, None] * raised))
    return vdb, vba, s_da


def _assemble(spec: SystemSpec, n_max, l_max, m_max, mode, skip_poles):
    """Channel arrays and total rate at fixed cutoffs."""
    mol, cav, th = spec.molecular, spec.cavity, spec.thermal
    w = cav.hbar_omega_c
    top = max(n_max, m_max)
    vdb, vba, s_da = _dressed_matrices(spec, top, l_max)

    n_idx = np.arange(n_max + 1)
    m_idx = np.arange(m_max + 1)
    l_idx = np.arange(l_max + 1)

    vdb_n = vdb[: n_max + 1, :]            # (n, l)
    vdb_m = vdb[: m_max + 1, :]            # (m, l)
    vba_m = vba[:, : m_max + 1]            # (l, m)
    vba_n = vba[:, : n_max + 1]            # (l, n)

    den1 = mol.gap_ba + (l_idx[:, None] - m_idx[None, :]) * w   # (l, m)
    den2 = mol.gap_db + (l_idx[:, None] - n_idx[None, :]) * w   # (l, n)
    bad1 = np.abs(den1) < POLE_GUARD_EV
    bad2 = np.abs(den2) < POLE_GUARD_EV
    inv1 = 1.0 / np.where(bad1, np.inf, den1)
    inv2 = 1.0 / np.where(bad2, np.inf, den2)

    poled = np.zeros((n_max + 1, m_max + 1), dtype=bool)
    if bad1.any() or bad2.any():
        nz_db_n = (vdb_n != 0.0).astype(float)
        nz_db_m = (vdb_m != 0.0).astype(float)
        nz_ba_m = (vba_m != 0.0).astype(float)
        nz_ba_n = (vba_n != 0.0).astype(float)
        # indirect amplitude terms hitting a guarded denominator
        poled |= np.einsum("nl,lm->nm", nz_db_n, bad1 & (vba_m != 0.0)) > 0
        poled |= np.einsum("nl,lm->nm", nz_db_n * bad2.T, nz_ba_m) > 0
        # driving-force terms hitting a guarded denominator
        poled |= np.einsum("ln,lm->nm", nz_ba_n, bad1 & (vba_m != 0.0)) > 0
        poled |= np.einsum("nl,ml->nm", nz_db_n * bad2.T, nz_db_m) > 0
        if poled.any() and not skip_poles:
            n0, m0 = map(int, np.argwhere(poled)[0])
            raise SingularityError(
                "photon-shifted resonance in the bridge-channel sum at channel "
                "(n=%d, m=%d); rerun with skip_poles to drop such channels"
                % (n0, m0), indices=(n0, m0))

    f_direct = (cav.hbar_g_c * cav.hbar_eta_c / w) * s_da.entries[: n_max + 1,
                                                                  : m_max + 1]
    f_bridge = -0.5 * (np.einsum("nl,lm->nm", vdb_n, vba_m * inv1)
                       + np.einsum("nl,lm->nm", vdb_n * inv2.T, vba_m))
    f_total = f_direct + f_bridge

    delta_g = (-(mol.u_d - mol.u_a) + (m_idx[None, :] - n_idx[:, None]) * w
               - np.einsum("ln,lm->nm", vba_n, vba_m * inv1)
               + np.einsum("nl,ml->nm", vdb_n * inv2.T, vdb_m))

    if mode is PathwayMode.DIRECT_ONLY:
        f_rate = f_direct
    elif mode is PathwayMode.BRIDGE_ONLY:
        f_rate = f_bridge
    else:
        f_rate = f_total

    p = thermal_populations(th.beta, w, n_max)
    partial = p[:, None] * golden_rule_rate(f_rate * f_rate, delta_g,
                                            mol.lambda_da, th.kt)
    keep = ~poled & (np.abs(f_rate) >= AMPLITUDE_FLOOR_EV)
    total = float(np.sum(np.where(keep, partial, 0.0)))
    return {
        "total": total, "keep": keep, "poles_skipped": int(poled.sum()),
        "f_direct": f_direct, "f_bridge": f_bridge, "f_total": f_total,
        "delta_g": delta_g, "p": p, "partial": partial,
    }


def _rows(arrays):
    keep = arrays["keep"]
    rows = []
    for n, m in np.argwhere(keep):
        rows.append(ChannelRow(
            n=int(n), m=int(m),
            f_direct=float(arrays["f_direct"][n, m]),
            f_bridge=float(arrays["f_bridge"][n, m]),
            f_total=float(arrays["f_total"][n, m]),
            delta_g=float(arrays["delta_g"][n, m]),
            p_n=float(arrays["p"][n]),
            partial_rate=float(arrays["partial"][n, m]),
        ))
    return ChannelTable(rows=tuple(rows))


def pmet_rate_offres(spec: SystemSpec, mode=PathwayMode.TOTAL,
                     skip_poles=False) -> RateResult:
    """Total off-resonance rate (or one pathway) with channel decomposition."""
    _check_mode(spec)
    mode = PathwayMode(mode)
    policy = spec.truncation
    if policy.mode == "fixed":
        arrays = _assemble(spec, policy.n_max, policy.l_max, policy.m_max,
                            mode, skip_poles)
        used = (policy.n_max, policy.l_max, policy.m_max)
        converged, delta = None, None
    else:
        cut, arrays, delta = adaptive_staircase(
            policy, lambda c: _assemble(spec, c, c, c, mode, skip_poles))
        used = (cut, cut, cut)
        converged = True
    return RateResult(
        total_rate=arrays["total"],
        table=_rows(arrays),
        truncation_used=used,
        converged=converged,
        relative_change=delta,
        poles_skipped=arrays["poles_skipped"] if skip_poles else 0,
        pathway=mode.value,
    )
