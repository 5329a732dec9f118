"""Displacement-operator matrix elements between photon Fock states.

Everything downstream dresses electronic couplings with the real, symmetric-
up-to-parity overlaps s[n][m] = <n| exp(d (a^dag - a)) |m>.  The analytic
path evaluates the closed form

    s[n][m] = sqrt(m!/n!) * d^(n-m) * exp(-d^2/2) * L_m^(n-m)(d^2),   n >= m

with the n < m triangle fixed by transpose parity s[m][n] = (-1)^(n+m) s[n][m].
The associated Laguerre polynomials come from the three-term recurrence in
the degree, and the factorial ratio is assembled in log space so entries stay
finite far past n ~ 170.  An independent oracle exponentiates the truncated
(a^dag - a) generator instead and must agree entrywise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln


@dataclass(frozen=True)
class DisplacementParam:
    """Dimensionless displacement d of the photon mode; any sign, finite."""

    d: float

    def __post_init__(self):
        if not math.isfinite(self.d):
            raise ValueError("displacement must be finite, got %r" % (self.d,))


def displacement_parameter(chi, delta_mu, hbar_omega_c) -> DisplacementParam:
    """d = chi * delta_mu / hbar_omega_c for a permanent-dipole difference delta_mu."""
    if not hbar_omega_c > 0:
        raise ValueError("hbar_omega_c must be positive, got %r" % (hbar_omega_c,))
    return DisplacementParam(d=chi * delta_mu / hbar_omega_c)


@dataclass(frozen=True, eq=False)
class OverlapMatrix:
    """Truncated Fock-basis matrix of displacement overlaps; immutable."""

    d: float
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.entries.setflags(write=False)

    @property
    def size(self):
        return self.entries.shape[0]

    def __getitem__(self, index):
        return self.entries[index]


def headroom(d) -> int:
    """Extra Fock levels needed above the trusted block under displacement d.

    Displacement spreads amplitude by roughly d^2 quanta; ceil(4 d^2 + 10)
    keeps sum rules over the trusted block converged.
    """
    d = _displacement_value(d)
    return int(math.ceil(4.0 * d * d + 10.0))


def required_size(n_trust, d) -> int:
    """Matrix size so entries with both indices <= n_trust are fully converged."""
    return int(n_trust) + headroom(d)


def _displacement_value(d):
    return d.d if isinstance(d, DisplacementParam) else float(d)


def overlap_matrix(d, size) -> OverlapMatrix:
    """Analytic displacement overlap matrix of shape (size, size).

    d may be a DisplacementParam or a bare float.  Entries are real by
    construction; L values that underflow the representable range come out
    as an exact 0.
    """
    d = _displacement_value(d)
    size = int(size)
    if size < 1:
        raise ValueError("size must be >= 1, got %d" % size)
    s = np.zeros((size, size))
    if d == 0.0:
        np.fill_diagonal(s, 1.0)
        return OverlapMatrix(d=d, entries=s)

    x = d * d
    log_fact = gammaln(np.arange(size + 1, dtype=float) + 1.0)  # log_fact[j] = ln(j!)
    sign_d = 1.0 if d > 0 else -1.0
    log_abs_d = math.log(abs(d))
    for k in range(size):  # k = n - m >= 0, one subdiagonal at a time
        count = size - k
        lag = np.empty(count)
        lag[0] = 1.0
        if count > 1:
            lag[1] = 1.0 + k - x
            for j in range(1, count - 1):
                lag[j + 1] = ((2.0 * j + k + 1.0 - x) * lag[j]
                              - (j + k) * lag[j - 1]) / (j + 1.0)
        m_idx = np.arange(count)
        log_pref = (0.5 * (log_fact[m_idx] - log_fact[m_idx + k])
                    + k * log_abs_d - 0.5 * x)
        with np.errstate(divide="ignore"):
            vals = np.sign(lag) * np.exp(log_pref + np.log(np.abs(lag)))
        vals *= sign_d ** k
        s[m_idx + k, m_idx] = vals
        if k:
            # transpose parity: s[m][n] = (-1)^(n+m) s[n][m], exact
            s[m_idx, m_idx + k] = vals if k % 2 == 0 else -vals
    return OverlapMatrix(d=d, entries=s)


def displacement_generator(d, size) -> np.ndarray:
    """The antisymmetric matrix d (a^dag - a) in a truncated Fock basis."""
    d = _displacement_value(d)
    size = int(size)
    if size < 1:
        raise ValueError("size must be >= 1, got %d" % size)
    gen = np.zeros((size, size))
    steps = d * np.sqrt(np.arange(1, size, dtype=float))
    rows = np.arange(1, size)
    gen[rows, rows - 1] = steps       # a^dag
    gen[rows - 1, rows] = -steps      # -a
    return gen


def overlap_matrix_oracle(d, size, n_work) -> OverlapMatrix:
    """Brute-force overlap matrix: expm of the generator in a larger basis.

    Exponentiates the (n_work x n_work) generator by scaling-and-squaring
    (Pade core) and keeps the top-left (size x size) block.  Requires
    n_work >= 2 * size of headroom so the kept block is converged.
    """
    d = _displacement_value(d)
    size = int(size)
    n_work = int(n_work)
    if size < 1:
        raise ValueError("size must be >= 1, got %d" % size)
    if n_work < 2 * size:
        raise ValueError("n_work must be >= 2*size for headroom, got %d < %d"
                         % (n_work, 2 * size))
    full = expm(displacement_generator(d, n_work))
    return OverlapMatrix(d=d, entries=np.ascontiguousarray(full[:size, :size]))
