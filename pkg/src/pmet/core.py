"""Unit system, physical constants, and validated model-parameter types.

All energies are handled internally in eV, temperatures in K, and rates come
out in 1/s through the fixed constants below.  A complete calculation is
described by a :class:`SystemSpec`, normally built from a flat config record
via :func:`build_system`.
"""

from __future__ import annotations

from dataclasses import dataclass

HBAR_EV_S = 6.582119569e-16     # reduced Planck constant, eV*s
K_B_EV_PER_K = 8.617333262e-5   # Boltzmann constant, eV/K

RESONANT = "resonant"
OFF_RESONANT = "off_resonant"

# adaptive truncation staircase: start at 8, double up to the hard cap
ADAPTIVE_START = 8
ADAPTIVE_CAP = 256

# perturbative denominators closer to zero than this are treated as poles, eV
POLE_GUARD_EV = 1e-9


class ConfigError(ValueError):
    """Invalid or incomplete configuration.  `key` names the offending field."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class SingularityError(ArithmeticError):
    """A photon-shifted energy denominator fell inside the pole guard.

    `indices` identifies the offending channel, e.g. ``(n, m)`` or
    ``(l, n, m)`` when an internal bridge-channel sum is involved.
    """

    def __init__(self, message, indices=None):
        super().__init__(message)
        self.indices = indices


class ConvergenceError(RuntimeError):
    """Adaptive truncation hit the hard cap before reaching tolerance."""

    def __init__(self, message, cap=None, last_delta=None):
        super().__init__(message)
        self.cap = cap
        self.last_delta = last_delta


def boltzmann_kt(temperature):
    """kT in eV for a temperature in K.  Errors on non-positive input."""
    if not temperature > 0:
        raise ConfigError("temperature must be positive, got %r" % (temperature,),
                          key="temperature")
    return K_B_EV_PER_K * temperature


@dataclass(frozen=True)
class MolecularParams:
    """Diabatic site energies, electronic couplings, and reorganization energy.

    The direct donor-acceptor electronic coupling is fixed at zero by the
    model and has no field here; donor and acceptor talk only through the
    bridge (and, in a cavity, through the photon mode).
    """

    u_d: float          # donor site energy, eV
    u_b: float          # bridge site energy, eV
    u_a: float          # acceptor site energy, eV
    v_db: float         # donor-bridge diabatic coupling, eV
    v_ba: float         # bridge-acceptor diabatic coupling, eV
    lambda_da: float    # solvent reorganization energy, eV

    def __post_init__(self):
        if not self.lambda_da > 0:
            raise ConfigError("lambda_da must be positive", key="lambda_da")
        if not self.u_b - self.u_d > 0:
            raise ConfigError("u_b must lie above u_d (off-resonant bridge)", key="u_b")
        if not self.u_b - self.u_a > 0:
            raise ConfigError("u_b must lie above u_a (off-resonant bridge)", key="u_b")

    @property
    def gap_db(self):
        """U_B - U_D, eV."""
        return self.u_b - self.u_d

    @property
    def gap_ba(self):
        """U_B - U_A, eV."""
        return self.u_b - self.u_a

    @property
    def u_d_minus_u_a(self):
        return self.u_d - self.u_a


@dataclass(frozen=True)
class DipoleSet:
    """Transition and permanent dipoles (dimensionless), per coupling mode.

    resonant mode: the photon dresses the donor-acceptor transition directly;
    needs the transition dipole `mu_da` and the permanent dipoles `mu_dd`,
    `mu_aa`.

    off_resonant mode: the photon couples to the D-B and B-A transitions;
    needs `mu_db`, `mu_ba` and the three permanent-dipole differences `d_db`,
    `d_ba`, `d_da`.  The three differences are independent inputs and no
    additivity between them is enforced.
    """

    mode: str
    mu_da: float | None = None
    mu_dd: float | None = None
    mu_aa: float | None = None
    mu_db: float | None = None
    mu_ba: float | None = None
    d_db: float | None = None
    d_ba: float | None = None
    d_da: float | None = None

    def __post_init__(self):
        if self.mode == RESONANT:
            for name in ("mu_da", "mu_dd", "mu_aa"):
                if getattr(self, name) is None:
                    raise ConfigError("missing field '%s' for resonant dipoles" % name,
                                      key=name)
            if self.mu_da == 0:
                raise ConfigError("transition dipole mu_da must be nonzero", key="mu_da")
        elif self.mode == OFF_RESONANT:
            for name in ("mu_db", "mu_ba", "d_db", "d_ba", "d_da"):
                if getattr(self, name) is None:
                    raise ConfigError("missing field '%s' for off_resonant dipoles" % name,
                                      key=name)
            if self.mu_db == 0:
                raise ConfigError("transition dipole mu_db must be nonzero", key="mu_db")
            if self.mu_ba == 0:
                raise ConfigError("transition dipole mu_ba must be nonzero", key="mu_ba")
        else:
            raise ConfigError("mode must be 'resonant' or 'off_resonant', got %r"
                              % (self.mode,), key="mode")

    @classmethod
    def resonant(cls, mu_da, mu_dd, mu_aa):
        return cls(mode=RESONANT, mu_da=mu_da, mu_dd=mu_dd, mu_aa=mu_aa)

    @classmethod
    def off_resonant(cls, mu_db, mu_ba, d_db, d_ba, d_da):
        return cls(mode=OFF_RESONANT, mu_db=mu_db, mu_ba=mu_ba,
                   d_db=d_db, d_ba=d_ba, d_da=d_da)

    @property
    def transition_primary(self):
        """Dipole that defines hbar_g_c: mu_da (resonant) or mu_db (off-resonant)."""
        return self.mu_da if self.mode == RESONANT else self.mu_db

    @property
    def transition_secondary(self):
        """Dipole that defines hbar_eta_c (off-resonant only)."""
        return None if self.mode == RESONANT else self.mu_ba

    # Permanent-dipole differences entering the photon-displacement dressing
    # factors.  In resonant mode only donor and acceptor are shifted, so the
    # D-B dressing sees mu_dd alone and the B-A dressing sees -mu_aa.
    @property
    def delta_db(self):
        return self.mu_dd if self.mode == RESONANT else self.d_db

    @property
    def delta_ba(self):
        return -self.mu_aa if self.mode == RESONANT else self.d_ba

    @property
    def delta_da(self):
        return self.mu_dd - self.mu_aa if self.mode == RESONANT else self.d_da


@dataclass(frozen=True)
class CavityParams:
    """Photon energy and field strength, with the derived coupling energies.

    `chi` is the cavity field strength in eV per unit (dimensionless) dipole;
    chi = 0 must reproduce cavity-free behavior in every downstream rate.
    """

    hbar_omega_c: float          # photon energy, eV
    chi: float                   # field strength, eV per unit dipole
    hbar_g_c: float              # chi * primary transition dipole, eV
    hbar_eta_c: float | None     # chi * secondary transition dipole, eV (off-resonant)

    def __post_init__(self):
        if not self.hbar_omega_c > 0:
            raise ConfigError("hbar_omega_c must be positive", key="hbar_omega_c")
        if self.chi < 0:
            raise ConfigError("chi must be non-negative", key="chi")

    @classmethod
    def derive(cls, hbar_omega_c, chi, dipoles: DipoleSet):
        """Build with hbar_g_c (and hbar_eta_c) derived from chi and the dipoles."""
        second = dipoles.transition_secondary
        return cls(hbar_omega_c=hbar_omega_c, chi=chi,
                   hbar_g_c=chi * dipoles.transition_primary,
                   hbar_eta_c=None if second is None else chi * second)


@dataclass(frozen=True)
class ThermalParams:
    temperature: float   # K
    kt: float            # eV
    beta: float          # 1/eV

    def __post_init__(self):
        if not self.temperature > 0:
            raise ConfigError("temperature must be positive", key="temperature")

    @classmethod
    def at_temperature(cls, temperature):
        kt = boltzmann_kt(temperature)
        return cls(temperature=temperature, kt=kt, beta=1.0 / kt)


@dataclass(frozen=True)
class TruncationPolicy:
    """Fock-space cutoffs: fixed values, or adaptive doubling to a tolerance.

    Adaptive mode starts the (n_max, l_max, m_max) staircase at
    ADAPTIVE_START and doubles until the total rate changes by less than
    `tol` relative, up to the hard cap ADAPTIVE_CAP.
    """

    mode: str = "adaptive"
    n_max: int = 16
    l_max: int = 16
    m_max: int = 16
    tol: float | None = 1e-8

    def __post_init__(self):
        if self.mode not in ("fixed", "adaptive"):
            raise ConfigError("truncation_mode must be 'fixed' or 'adaptive', got %r"
                              % (self.mode,), key="truncation_mode")
        for name in ("n_max", "l_max", "m_max"):
            value = getattr(self, name)
            if not (isinstance(value, int) and value >= 1):
                raise ConfigError("%s must be an integer >= 1" % name, key=name)
        if self.mode == "adaptive":
            if self.tol is None or not (0 < self.tol < 1):
                raise ConfigError("adaptive tolerance must lie in (0, 1)", key="tol")

    @classmethod
    def fixed(cls, n_max, l_max=None, m_max=None):
        l_max = n_max if l_max is None else l_max
        m_max = n_max if m_max is None else m_max
        return cls(mode="fixed", n_max=n_max, l_max=l_max, m_max=m_max, tol=None)

    @classmethod
    def adaptive(cls, tol=1e-8):
        return cls(mode="adaptive", tol=tol)


@dataclass(frozen=True)
class SystemSpec:
    """A complete, validated description of one rate calculation.

    Immutable after construction; safe to share read-only across workers.
    """

    molecular: MolecularParams
    cavity: CavityParams
    dipoles: DipoleSet
    thermal: ThermalParams
    truncation: TruncationPolicy

    @property
    def mode(self):
        return self.dipoles.mode

    def to_config(self):
        """Flat config record; `build_system` on it reproduces this spec."""
        record = {
            "mode": self.dipoles.mode,
            "u_d": self.molecular.u_d,
            "u_b": self.molecular.u_b,
            "u_a": self.molecular.u_a,
            "v_db": self.molecular.v_db,
            "v_ba": self.molecular.v_ba,
            "lambda_da": self.molecular.lambda_da,
            "hbar_omega_c": self.cavity.hbar_omega_c,
            "chi": self.cavity.chi,
            "temperature": self.thermal.temperature,
            "truncation_mode": self.truncation.mode,
            "n_max": self.truncation.n_max,
            "l_max": self.truncation.l_max,
            "m_max": self.truncation.m_max,
        }
        if self.truncation.mode == "adaptive":
            record["tol"] = self.truncation.tol
        if self.dipoles.mode == RESONANT:
            record.update(mu_da=self.dipoles.mu_da, mu_dd=self.dipoles.mu_dd,
                          mu_aa=self.dipoles.mu_aa)
        else:
            record.update(mu_db=self.dipoles.mu_db, mu_ba=self.dipoles.mu_ba,
                          d_db=self.dipoles.d_db, d_ba=self.dipoles.d_ba,
                          d_da=self.dipoles.d_da)
        return record


_ENERGY_SUFFIXES = (("meV", 1e-3), ("eV", 1.0))


def parse_energy(value, key):
    """Energy in eV from a number (taken as eV) or a string with a unit suffix."""
    if isinstance(value, bool):
        raise ConfigError("expected an energy for '%s', got a boolean" % key, key=key)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        text = value.strip()
        for suffix, scale in _ENERGY_SUFFIXES:
            if text.endswith(suffix):
                number = text[: -len(suffix)].strip()
                try:
                    return float(number) * scale
                except ValueError:
                    raise ConfigError("cannot parse energy %r for '%s'" % (value, key),
                                      key=key) from None
        raise ConfigError("energy %r for '%s' needs an 'eV' or 'meV' suffix"
                          % (value, key), key=key)
    raise ConfigError("expected an energy for '%s', got %r" % (key, value), key=key)


def _parse_temperature(value, key="temperature"):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        text = value.strip()
        if text.endswith("K"):
            text = text[:-1].strip()
        try:
            return float(text)
        except ValueError:
            pass
    raise ConfigError("cannot parse temperature %r" % (value,), key=key)


def _parse_number(value, key):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    raise ConfigError("expected a number for '%s', got %r" % (key, value), key=key)


def _require(record, key):
    if key not in record:
        raise ConfigError("missing field '%s'" % key, key=key)
    return record[key]


def _molecular_from_record(record):
    if "u_d" in record or "u_b" in record or "u_a" in record:
        u_d = parse_energy(_require(record, "u_d"), "u_d")
        u_b = parse_energy(_require(record, "u_b"), "u_b")
        u_a = parse_energy(_require(record, "u_a"), "u_a")
    else:
        # difference form: acceptor pinned at zero
        u_a = 0.0
        u_d = parse_energy(_require(record, "u_d_minus_u_a"), "u_d_minus_u_a")
        u_b = u_d + parse_energy(_require(record, "u_b_minus_u_d"), "u_b_minus_u_d")
    return MolecularParams(
        u_d=u_d, u_b=u_b, u_a=u_a,
        v_db=parse_energy(_require(record, "v_db"), "v_db"),
        v_ba=parse_energy(_require(record, "v_ba"), "v_ba"),
        lambda_da=parse_energy(_require(record, "lambda_da"), "lambda_da"),
    )


def _dipoles_from_record(record, mode):
    if mode == RESONANT:
        return DipoleSet.resonant(
            mu_da=_parse_number(_require(record, "mu_da"), "mu_da"),
            mu_dd=_parse_number(_require(record, "mu_dd"), "mu_dd"),
            mu_aa=_parse_number(_require(record, "mu_aa"), "mu_aa"),
        )
    return DipoleSet.off_resonant(
        mu_db=_parse_number(_require(record, "mu_db"), "mu_db"),
        mu_ba=_parse_number(_require(record, "mu_ba"), "mu_ba"),
        d_db=_parse_number(_require(record, "d_db"), "d_db"),
        d_ba=_parse_number(_require(record, "d_ba"), "d_ba"),
        d_da=_parse_number(_require(record, "d_da"), "d_da"),
    )


def _cavity_from_record(record, dipoles):
    hbar_omega_c = parse_energy(_require(record, "hbar_omega_c"), "hbar_omega_c")
    if "chi" in record and "hbar_g_c" in record:
        raise ConfigError("provide 'chi' or 'hbar_g_c', not both", key="hbar_g_c")
    if "hbar_g_c" in record:
        # back-derive the field strength from the primary transition dipole
        hbar_g_c = parse_energy(record["hbar_g_c"], "hbar_g_c")
        if hbar_g_c < 0:
            raise ConfigError("hbar_g_c must be non-negative", key="hbar_g_c")
        chi = hbar_g_c / dipoles.transition_primary
    else:
        chi = parse_energy(_require(record, "chi"), "chi")
    return CavityParams.derive(hbar_omega_c, chi, dipoles)


def _truncation_from_record(record):
    mode = record.get("truncation_mode", "adaptive")
    if mode == "fixed":
        def cutoff(key):
            value = record.get(key, 16)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError("%s must be an integer" % key, key=key)
            return value
        return TruncationPolicy.fixed(cutoff("n_max"), cutoff("l_max"), cutoff("m_max"))
    if mode == "adaptive":
        tol = record.get("tol", 1e-8)
        if isinstance(tol, bool) or not isinstance(tol, (int, float)):
            raise ConfigError("tol must be a number in (0, 1)", key="tol")
        return TruncationPolicy.adaptive(float(tol))
    raise ConfigError("truncation_mode must be 'fixed' or 'adaptive', got %r" % (mode,),
                      key="truncation_mode")


def build_system(record) -> SystemSpec:
    """Validated SystemSpec from a flat config record (dict).

    Unknown keys are ignored so that rate configs can share a file with sweep
    settings.  Every validation failure raises ConfigError naming the
    offending key.
    """
    if not isinstance(record, dict):
        raise ConfigError("config record must be a mapping, got %r" % type(record))
    mode = _require(record, "mode")
    if mode not in (RESONANT, OFF_RESONANT):
        raise ConfigError("mode must be 'resonant' or 'off_resonant', got %r" % (mode,),
                          key="mode")
    dipoles = _dipoles_from_record(record, mode)
    return SystemSpec(
        molecular=_molecular_from_record(record),
        cavity=_cavity_from_record(record, dipoles),
        dipoles=dipoles,
        thermal=ThermalParams.at_temperature(
            _parse_temperature(_require(record, "temperature"))),
        truncation=_truncation_from_record(record),
    )
