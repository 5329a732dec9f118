"""Parameter sweeps, convergence studies, CSV output, and validation checks.

Sweep points are independent jobs; with several workers the rows still come
back in input-value order, and identical configs produce byte-identical CSV
files regardless of the worker count.  Timestamps live only in the sidecar
metadata file, never in the CSV.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

from .core import (ADAPTIVE_CAP, ADAPTIVE_START, HBAR_EV_S, K_B_EV_PER_K,
                   RESONANT, ConfigError, ConvergenceError, SingularityError,
                   SystemSpec, CavityParams, TruncationPolicy, build_system,
                   parse_energy)
from .fock import OverlapMatrix, overlap_matrix, overlap_matrix_oracle
from .marcus import MarcusResult, marcus_result
from .offres import PathwayMode, pmet_rate_offres
from .resonant import ChannelTable, RateResult, pmet_rate_resonant, thermal_populations

log = logging.getLogger(__name__)

SWEEP_AXES = ("g_over_omega", "hbar_omega_c", "bridge_gap", "v_symmetric")
_ENERGY_AXES = ("hbar_omega_c", "bridge_gap", "v_symmetric")


def apply_axis(base: SystemSpec, axis, value) -> SystemSpec:
    """A new SystemSpec with one swept quantity replaced by `value`."""
    if axis == "g_over_omega":
        hbar_g_c = value * base.cavity.hbar_omega_c
        chi = hbar_g_c / base.dipoles.transition_primary
        return replace(base, cavity=CavityParams.derive(
            base.cavity.hbar_omega_c, chi, base.dipoles))
    if axis == "hbar_omega_c":
        return replace(base, cavity=CavityParams.derive(
            value, base.cavity.chi, base.dipoles))
    if axis == "bridge_gap":
        # value is U_B - U_D; U_B - U_A follows from the fixed U_D - U_A
        return replace(base, molecular=replace(
            base.molecular, u_b=base.molecular.u_d + value))
    if axis == "v_symmetric":
        return replace(base, molecular=replace(
            base.molecular, v_db=value, v_ba=value))
    raise ConfigError("unknown sweep axis %r (expected one of %s)"
                      % (axis, ", ".join(SWEEP_AXES)), key="sweep_axis")


@dataclass(frozen=True)
class SweepSpec:
    base: SystemSpec
    axis: str
    values: tuple
    pathway: PathwayMode = PathwayMode.TOTAL

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ConfigError("unknown sweep axis %r" % (self.axis,), key="sweep_axis")
        if len(self.values) == 0:
            raise ConfigError("sweep_values must be nonempty", key="sweep_values")
        diffs = np.diff(np.asarray(self.values, dtype=float))
        if len(diffs) and not np.all(diffs > 0):
            raise ConfigError("sweep_values must be strictly increasing",
                              key="sweep_values")

    @property
    def mode(self):
        return self.base.mode


@dataclass(frozen=True)
class SweepRow:
    value: float
    total_rate: float
    direct_rate: float | None    # off-resonant mode only
    bridge_rate: float | None    # off-resonant mode only
    n_max: int
    l_max: int | None
    m_max: int
    converged: bool | None
    poles_skipped: int


@dataclass(frozen=True)
class SweepResult:
    axis: str
    rows: tuple
    metadata: dict


def sweep_record(sweep: SweepSpec) -> dict:
    """Canonical flat record for hashing and the sidecar metadata."""
    record = dict(sweep.base.to_config())
    record["sweep_axis"] = sweep.axis
    record["sweep_values"] = [float(v) for v in sweep.values]
    record["sweep_pathway"] = sweep.pathway.value
    return record


def config_hash(record) -> str:
    return hashlib.sha256(
        json.dumps(record, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()


def result_metadata(record) -> dict:
    return {
        "config_sha256": config_hash(record),
        "constants": {"hbar_ev_s": HBAR_EV_S, "k_b_ev_per_k": K_B_EV_PER_K},
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }


def _annotate(exc, axis, value):
    message = "%s = %.6g: %s" % (axis, value, exc)
    if isinstance(exc, SingularityError):
        return SingularityError(message, indices=exc.indices)
    return ConvergenceError(message, cap=exc.cap, last_delta=exc.last_delta)


def _sweep_point(sweep: SweepSpec, value, skip_poles):
    spec = apply_axis(sweep.base, sweep.axis, value)
    try:
        if spec.mode == RESONANT:
            res = pmet_rate_resonant(spec, skip_poles=skip_poles)
            direct = bridge = None
            poles = res.poles_skipped
        else:
            res = pmet_rate_offres(spec, sweep.pathway, skip_poles=skip_poles)
            direct = pmet_rate_offres(spec, PathwayMode.DIRECT_ONLY,
                                      skip_poles=skip_poles).total_rate
            bridge = pmet_rate_offres(spec, PathwayMode.BRIDGE_ONLY,
                                      skip_poles=skip_poles).total_rate
            poles = res.poles_skipped
    except (SingularityError, ConvergenceError) as exc:
        raise _annotate(exc, sweep.axis, value) from exc
    n_max, l_max, m_max = res.truncation_used
    return SweepRow(value=float(value), total_rate=res.total_rate,
                    direct_rate=direct, bridge_rate=bridge,
                    n_max=n_max, l_max=l_max, m_max=m_max,
                    converged=res.converged, poles_skipped=poles)


def run_sweep(sweep: SweepSpec, workers=1, skip_poles=False) -> SweepResult:
    """Evaluate the rate at every swept value; rows follow input order."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = tuple(pool.map(
                lambda v: _sweep_point(sweep, v, skip_poles), sweep.values))
    else:
        rows = tuple(_sweep_point(sweep, v, skip_poles) for v in sweep.values)
    return SweepResult(axis=sweep.axis, rows=rows,
                       metadata=result_metadata(sweep_record(sweep)))


def converge_truncation(spec: SystemSpec, tol):
    """Smallest power-of-two cutoffs whose next doubling changes the rate < tol.

    Returns (n_max, l_max, m_max, history) with history a list of
    ((n_max, l_max, m_max), rate) pairs for auditing.
    """
    if not 0 < tol < 1:
        raise ConfigError("tol must lie in (0, 1), got %r" % (tol,), key="tol")
    rate_fn = pmet_rate_resonant if spec.mode == RESONANT else pmet_rate_offres
    history = []
    cut = ADAPTIVE_START
    prev = None
    while cut <= ADAPTIVE_CAP:
        fixed = replace(spec, truncation=TruncationPolicy.fixed(cut))
        total = rate_fn(fixed).total_rate
        history.append(((cut, cut, cut), total))
        if prev is not None:
            delta = abs(total - prev[1]) / max(abs(total), 1e-300)
            if delta < tol:
                log.debug("truncation staircase for tol %g: %s", tol, history)
                return prev[0], prev[0], prev[0], history
        prev = (cut, total)
        cut *= 2
    raise ConvergenceError(
        "rate not converged to %g within the cutoff cap %d" % (tol, ADAPTIVE_CAP),
        cap=ADAPTIVE_CAP)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.16e" % value


def _write_rows(stream, header, rows):
    stream.write(",".join(header) + "\r\n")
    for row in rows:
        stream.write(",".join(_fmt(v) if not isinstance(v, str) else v
                              for v in row) + "\r\n")


RATE_HEADER = ("kind", "n", "m", "f_direct_ev", "f_bridge_ev", "f_total_ev",
               "delta_g_ev", "p_n", "rate_per_s")
SWEEP_HEADER = ("axis", "value", "total_rate_per_s", "direct_rate_per_s",
                "bridge_rate_per_s", "n_max", "l_max", "m_max", "converged",
                "poles_skipped")
MARCUS_HEADER = ("v_eff_ev", "delta_g_ev", "activation_ev", "rate_per_s")


def _channel_rows(table):
    for r in table:
        yield ("channel", r.n, r.m, r.f_direct, r.f_bridge, r.f_total,
               r.delta_g, r.p_n, r.partial_rate)


def emit_csv(result, destination, metadata=None):
    """Write a result as deterministic RFC-4180 CSV.

    `destination` is a path or a file-like object.  For paths, a sidecar
    `<destination>.meta.json` records the config hash, constants, and
    timestamp whenever metadata is available (never inside the CSV itself).
    """
    if metadata is None:
        metadata = getattr(result, "metadata", None)

    def render(stream):
        if isinstance(result, MarcusResult):
            _write_rows(stream, MARCUS_HEADER,
                        [(result.v_eff, result.delta_g, result.activation,
                          result.rate)])
        elif isinstance(result, RateResult):
            summary = ("total", None, None, None, None, None, None, None,
                       result.total_rate)
            _write_rows(stream, RATE_HEADER,
                        [summary, *_channel_rows(result.table)])
        elif isinstance(result, ChannelTable):
            _write_rows(stream, RATE_HEADER, list(_channel_rows(result)))
        elif isinstance(result, SweepResult):
            rows = [(result.axis, r.value, r.total_rate, r.direct_rate,
                     r.bridge_rate, r.n_max, r.l_max, r.m_max, r.converged,
                     r.poles_skipped) for r in result.rows]
            _write_rows(stream, SWEEP_HEADER, rows)
        elif isinstance(result, OverlapMatrix):
            size = result.size
            stream.write(",".join(["n\\m"] + [str(m) for m in range(size)]) + "\r\n")
            for n in range(size):
                stream.write(",".join([str(n)] + [_fmt(v) for v in
                                                  result.entries[n]]) + "\r\n")
        else:
            raise TypeError("cannot emit %r as CSV" % type(result).__name__)

    if hasattr(destination, "write"):
        render(destination)
        return
    with open(destination, "w", newline="") as stream:
        render(stream)
    if metadata is not None:
        with open(str(destination) + ".meta.json", "w") as stream:
            json.dump(metadata, stream, indent=2, sort_keys=True)
            stream.write("\n")


def _parse_pathway(word):
    aliases = {"direct": PathwayMode.DIRECT_ONLY, "bridge": PathwayMode.BRIDGE_ONLY,
               "total": PathwayMode.TOTAL}
    if isinstance(word, PathwayMode):
        return word
    try:
        return aliases.get(word) or PathwayMode(word)
    except ValueError:
        raise ConfigError("unknown pathway %r (total, direct, or bridge)" % (word,),
                          key="sweep_pathway") from None


def build_sweep(record) -> SweepSpec:
    """SweepSpec from a flat config record carrying sweep_* keys."""
    base = build_system(record)
    if "sweep_axis" not in record:
        raise ConfigError("missing field 'sweep_axis'", key="sweep_axis")
    axis = record["sweep_axis"]
    raw = record.get("sweep_values")
    if not isinstance(raw, (list, tuple)) or not raw:
        raise ConfigError("sweep_values must be a nonempty list", key="sweep_values")
    if axis in _ENERGY_AXES:
        values = tuple(parse_energy(v, "sweep_values") for v in raw)
    else:
        values = tuple(float(v) for v in raw)
    pathway = _parse_pathway(record.get("sweep_pathway", "total"))
    return SweepSpec(base=base, axis=axis, values=values, pathway=pathway)


def load_config(path) -> dict:
    """JSON config record from a file; parse problems become ConfigError."""
    try:
        with open(path) as stream:
            record = json.load(stream)
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("invalid JSON in %s: %s" % (path, exc)) from exc
    if not isinstance(record, dict):
        raise ConfigError("config %s must contain a JSON object" % path)
    return record


def bundled_config(name) -> dict:
    """One of the packaged example configs, by bare name."""
    ref = resources.files("pmet").joinpath("configs/%s.json" % name)
    try:
        return json.loads(ref.read_text())
    except FileNotFoundError:
        raise ConfigError("no bundled config named %r" % (name,)) from None


def validation_report():
    """Oracle-equivalence and cavity-free reduction checks.

    Returns a list of (name, passed, detail) triples; used by the `validate`
    CLI subcommand.
    """
    checks = []
    for d in (0.1, 0.5, 1.0, 2.0):
        analytic = overlap_matrix(d, 30).entries
        oracle = overlap_matrix_oracle(d, 30, 120).entries
        diff = float(np.max(np.abs(analytic - oracle)))
        checks.append(("overlap_oracle[d=%g]" % d, diff < 1e-9,
                       "max|analytic-oracle| = %.3e" % diff))

    spec = build_system(bundled_config("resonant_paper"))
    result = pmet_rate_resonant(spec)
    p0 = thermal_populations(spec.thermal.beta, spec.cavity.hbar_omega_c,
                             result.truncation_used[0])[0]
    baseline = marcus_result(spec).rate
    err = abs(result.total_rate / (p0 * baseline) - 1.0)
    checks.append(("resonant_reduction_chi0", err < 1e-10,
                   "|k/(P0 k_MT) - 1| = %.3e" % err))

    spec = build_system(bundled_config("offres_si"))
    baseline = marcus_result(spec).rate
    total = pmet_rate_offres(spec, PathwayMode.TOTAL).total_rate
    direct = pmet_rate_offres(spec, PathwayMode.DIRECT_ONLY).total_rate
    bridge = pmet_rate_offres(spec, PathwayMode.BRIDGE_ONLY).total_rate
    err = abs(total / baseline - 1.0)
    checks.append(("offres_reduction_total", err < 1e-10,
                   "|k/k_MT - 1| = %.3e" % err))
    checks.append(("offres_reduction_direct", direct == 0.0,
                   "k_direct = %.3e" % direct))
    err = abs(bridge / baseline - 1.0)
    checks.append(("offres_reduction_bridge", err < 1e-10,
                   "|k_bridge/k_MT - 1| = %.3e" % err))
    return checks
