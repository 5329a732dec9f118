"""On-resonance cavity-mediated ET rate: photon dresses the D-A transition.

The donor-acceptor pair exchanges photons with the cavity mode while the
bridge stays undressed.  Each channel (n, m) pairs n photons on the donor
side with m on the acceptor side; its amplitude is the sum of a direct
photon-assisted D-A term and a bridge-mediated superexchange term, and the
total rate is the thermally weighted golden-rule sum over channels.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import (ADAPTIVE_CAP, ADAPTIVE_START, POLE_GUARD_EV, RESONANT,
                   ConfigError, ConvergenceError, SingularityError, SystemSpec)
from .fock import OverlapMatrix, displacement_parameter, overlap_matrix, required_size
from .marcus import golden_rule_rate

log = logging.getLogger(__name__)

# amplitudes below this are numerical noise at double precision; the channel
# contributes exactly 0 to the rate and is dropped from the table
AMPLITUDE_FLOOR_EV = 1e-300


@dataclass(frozen=True)
class ChannelRow:
    n: int
    m: int
    f_direct: float      # eV
    f_bridge: float      # eV
    f_total: float       # eV, = f_direct + f_bridge exactly
    delta_g: float       # eV
    p_n: float
    partial_rate: float  # 1/s, includes the p_n weight


@dataclass(frozen=True)
class ChannelTable:
    rows: tuple

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def row(self, n, m):
        for r in self.rows:
            if r.n == n and r.m == m:
                return r
        raise KeyError("no channel (n=%d, m=%d) in table" % (n, m))


@dataclass(frozen=True)
class RateResult:
    total_rate: float            # 1/s
    table: ChannelTable
    truncation_used: tuple       # (n_max, l_max or None, m_max)
    converged: bool | None       # None for fixed truncation
    relative_change: float | None
    poles_skipped: int = 0
    pathway: str | None = None


def thermal_populations(beta, hbar_omega_c, n_max):
    """Geometric photon-number weights renormalized over 0..n_max."""
    if not beta > 0:
        raise ValueError("beta must be positive, got %r" % (beta,))
    if not hbar_omega_c > 0:
        raise ValueError("hbar_omega_c must be positive, got %r" % (hbar_omega_c,))
    n = np.arange(int(n_max) + 1, dtype=float)
    with np.errstate(under="ignore"):
        weights = np.exp(-beta * hbar_omega_c * n)
    return weights / weights.sum()


def _entry(matrix: OverlapMatrix, n, m, label):
    if n < 0 or m < 0 or n >= matrix.size or m >= matrix.size:
        raise IndexError("%s index (%d, %d) outside truncation %d" % (label, n, m, matrix.size))
    return matrix.entries[n, m]


def dressed_db_coupling(n, v_db, s_db: OverlapMatrix):
    """Photon-dressed donor-bridge coupling v_db * s_db[n][0], eV."""
    return v_db * _entry(s_db, n, 0, "s_db")


def dressed_ba_coupling(m, v_ba, s_ba: OverlapMatrix):
    """Photon-dressed bridge-acceptor coupling v_ba * s_ba[0][m], eV."""
    return v_ba * _entry(s_ba, 0, m, "s_ba")


def direct_da_coupling(n, m, hbar_g_c, s_da: OverlapMatrix):
    """Photon-assisted direct D-A amplitude, eV.

    hbar_g_c * (sqrt(n) s_da[n-1][m] + sqrt(n+1) s_da[n+1][m]); the lowering
    term is absent at n = 0.
    """
    upper = _entry(s_da, n + 1, m, "s_da")
    lower = 0.0 if n == 0 else _entry(s_da, n - 1, m, "s_da")
    return hbar_g_c * (np.sqrt(float(n)) * lower + np.sqrt(n + 1.0) * upper)


def bridge_coupling(n, m, v_db_dressed, v_ba_dressed, gap_ba, gap_db, hbar_omega_c):
    """Bridge-mediated amplitude for channel (n, m), eV.

    -(v_db_dressed * v_ba_dressed / 2) * [1/(gap_ba - m w) + 1/(gap_db - n w)].
    Channels whose numerator vanishes contribute 0 regardless of the
    denominators; otherwise a denominator inside the pole guard raises.
    """
    numerator = v_db_dressed * v_ba_dressed
    if numerator == 0.0:
        return 0.0
    den_m = gap_ba - m * hbar_omega_c
    den_n = gap_db - n * hbar_omega_c
    for value, tag in ((den_m, "U_B-U_A - m*hw"), (den_n, "U_B-U_D - n*hw")):
        if abs(value) < POLE_GUARD_EV:
            raise SingularityError(
                "photon-shifted resonance %s = %.3e eV at channel (n=%d, m=%d)"
                % (tag, value, n, m), indices=(n, m))
    return -(numerator / 2.0) * (1.0 / den_m + 1.0 / den_n)


def _dressing(spec: SystemSpec, max_index):
    """The three overlap matrices sized for channel indices up to max_index."""
    cav, dip = spec.cavity, spec.dipoles
    d_db = displacement_parameter(cav.chi, dip.delta_db, cav.hbar_omega_c)
    d_ba = displacement_parameter(cav.chi, dip.delta_ba, cav.hbar_omega_c)
    d_da = displacement_parameter(cav.chi, dip.delta_da, cav.hbar_omega_c)
    worst = max(abs(d_db.d), abs(d_ba.d), abs(d_da.d))
    size = required_size(max_index + 2, worst)
    return (overlap_matrix(d_db, size), overlap_matrix(d_ba, size),
            overlap_matrix(d_da, size))


def channel_driving_force(n, m, spec: SystemSpec):
    """Effective free-energy change for channel (n, m), eV.

    -(U_D - U_A) + (m - n) hw minus/plus the second-order bridge shifts built
    from the dressed couplings, with photon-shifted denominators.
    """
    mol, cav = spec.molecular, spec.cavity
    s_db, s_ba, _ = _dressing(spec, max(n, m))
    a_n = dressed_db_coupling(n, mol.v_db, s_db)
    a_m = dressed_db_coupling(m, mol.v_db, s_db)
    b_n = dressed_ba_coupling(n, mol.v_ba, s_ba)
    b_m = dressed_ba_coupling(m, mol.v_ba, s_ba)
    w = cav.hbar_omega_c
    base = -(mol.u_d - mol.u_a) + (m - n) * w
    den_m = mol.gap_ba - m * w
    den_n = mol.gap_db - n * w
    if b_n * b_m != 0.0:
        if abs(den_m) < POLE_GUARD_EV:
            raise SingularityError(
                "photon-shifted resonance U_B-U_A - m*hw at channel (n=%d, m=%d)" % (n, m),
                indices=(n, m))
        base -= b_n * b_m / den_m
    if a_n * a_m != 0.0:
        if abs(den_n) < POLE_GUARD_EV:
            raise SingularityError(
                "photon-shifted resonance U_B-U_D - n*hw at channel (n=%d, m=%d)" % (n, m),
                indices=(n, m))
        base += a_n * a_m / den_n
    return base


def _assemble(spec: SystemSpec, n_max, m_max, skip_poles):
    """Channel arrays and total rate at fixed cutoffs."""
    mol, cav, th = spec.molecular, spec.cavity, spec.thermal
    w = cav.hbar_omega_c
    top = max(n_max, m_max)
    s_db, s_ba, s_da = _dressing(spec, top)

    n_idx = np.arange(n_max + 1)
    m_idx = np.arange(m_max + 1)
    a = mol.v_db * s_db.entries[: top + 1, 0]      # dressed D-B, by photon number
    b = mol.v_ba * s_ba.entries[0, : top + 1]      # dressed B-A, by photon number

    da = s_da.entries
    lowered = np.zeros((n_max + 1, m_max + 1))
    lowered[1:, :] = da[:n_max, : m_max + 1]
    raised = da[1 : n_max + 2, : m_max + 1]
    f_direct = cav.hbar_g_c * (np.sqrt(n_idx, dtype=float)[:, None] * lowered
                               + np.sqrt(n_idx + 1.0)[:, None] * raised)

    den_m = mol.gap_ba - m_idx * w
    den_n = mol.gap_db - n_idx * w
    bad_m = np.abs(den_m) < POLE_GUARD_EV
    bad_n = np.abs(den_n) < POLE_GUARD_EV
    inv_m = 1.0 / np.where(bad_m, np.inf, den_m)
    inv_n = 1.0 / np.where(bad_n, np.inf, den_n)

    ab = np.outer(a[: n_max + 1], b[: m_max + 1])
    bb = np.outer(b[: n_max + 1], b[: m_max + 1])
    aa = np.outer(a[: n_max + 1], a[: m_max + 1])

    poled = (bad_m[None, :] & ((ab != 0.0) | (bb != 0.0))) | \
            (bad_n[:, None] & ((ab != 0.0) | (aa != 0.0)))
    if poled.any() and not skip_poles:
        n0, m0 = map(int, np.argwhere(poled)[0])
        raise SingularityError(
            "photon-shifted resonance at channel (n=%d, m=%d); "
            "rerun with skip_poles to drop such channels" % (n0, m0),
            indices=(n0, m0))

    f_bridge = -(ab / 2.0) * (inv_m[None, :] + inv_n[:, None])
    f_total = f_direct + f_bridge
    delta_g = (-(mol.u_d - mol.u_a) + (m_idx[None, :] - n_idx[:, None]) * w
               - bb * inv_m[None, :] + aa * inv_n[:, None])

    p = thermal_populations(th.beta, w, n_max)
    partial = p[:, None] * golden_rule_rate(f_total * f_total, delta_g,
                                            mol.lambda_da, th.kt)
    keep = ~poled & (np.abs(f_total) >= AMPLITUDE_FLOOR_EV)
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


def adaptive_staircase(policy, evaluate):
    """Double a joint cutoff from ADAPTIVE_START until the total settles.

    evaluate(cut) must return a payload dict with a "total" entry.  Returns
    (cut, payload, relative_change); raises ConvergenceError at the cap.
    """
    cut = ADAPTIVE_START
    payload = evaluate(cut)
    history = [(cut, payload["total"])]
    delta = None
    while cut < ADAPTIVE_CAP:
        nxt = min(cut * 2, ADAPTIVE_CAP)
        payload_next = evaluate(nxt)
        delta = abs(payload_next["total"] - payload["total"]) / \
            max(abs(payload_next["total"]), 1e-300)
        history.append((nxt, payload_next["total"]))
        if delta < policy.tol:
            log.debug("adaptive truncation converged at %d (delta %.3e): %s",
                      nxt, delta, history)
            return nxt, payload_next, delta
        cut, payload = nxt, payload_next
    raise ConvergenceError(
        "total rate not converged to %g at cutoff cap %d (last delta %s)"
        % (policy.tol, ADAPTIVE_CAP, "%.3e" % delta if delta is not None else "n/a"),
        cap=ADAPTIVE_CAP, last_delta=delta)


def pmet_rate_resonant(spec: SystemSpec, skip_poles=False) -> RateResult:
    """Total on-resonance rate with full channel decomposition."""
    if spec.mode != RESONANT:
        raise ConfigError("spec is not in resonant mode (dipoles.mode = %r)"
                          % spec.mode, key="mode")
    policy = spec.truncation
    if policy.mode == "fixed":
        arrays = _assemble(spec, policy.n_max, policy.m_max, skip_poles)
        used = (policy.n_max, None, policy.m_max)
        converged, delta = None, None
    else:
        cut, arrays, delta = adaptive_staircase(
            policy, lambda c: _assemble(spec, c, c, skip_poles))
        used = (cut, None, cut)
        converged = True
    return RateResult(
        total_rate=arrays["total"],
        table=_rows(arrays),
        truncation_used=used,
        converged=converged,
        relative_change=delta,
        poles_skipped=arrays["poles_skipped"] if skip_poles else 0,
    )
