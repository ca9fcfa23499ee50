"""Slow, independent reference computations used to validate the fast paths.

Everything in this module is deliberately built from first principles with
its own numerics: high-precision matrix exponentials and ladder-operator
enumeration (mpmath) instead of closed-form binomial amplitudes, and
compensated summation for moments.  No numerical kernel is shared with the
production modules, so agreement between the two is meaningful evidence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from .errors import NotPRepresentable

MAX_ORACLE_LEVEL = 12


@dataclass(frozen=True)
class OraclePmf:
    """High-precision joint click distribution from path enumeration."""

    probs: dict[tuple[int, int], mp.mpf]
    source: str

    def total(self) -> mp.mpf:
        return mp.fsum(self.probs.values())

    def as_floats(self) -> dict[tuple[int, int], float]:
        return {k: float(v) for k, v in self.probs.items()}


def oracle_click_pmf(n: int, theta: float, dps: int = 50) -> OraclePmf:
    """Joint click pmf for a number state absorbed by two empty detectors.

    The interaction couples the field only to the symmetric detector mode, so
    the computation proceeds in two independently derived stages:

    1. exponentiate the two-mode exchange generator on the total-excitation-n
       subspace (mpmath ``expm``) to get the amplitude for moving k quanta
       into the symmetric mode;
    2. expand k symmetric-mode quanta over the two detectors by k explicit
       applications of (b1+b2)/sqrt(2) raising, normalised by sqrt(k!).

    Amplitudes are squared at the end.  Runs at ``dps`` decimal digits.
    """
    if n < 0 or n > MAX_ORACLE_LEVEL:
        raise ValueError(f"oracle supports levels 0..{MAX_ORACLE_LEVEL}, got {n}")
    with mp.workdps(dps):
        th = mp.mpf(theta)
        probs: dict[tuple[int, int], mp.mpf] = {}
        if n == 0:
            probs[(0, 0)] = mp.mpf(1)
            return OraclePmf(probs=probs, source="enumeration n=0")
        # Stage 1: basis |n-k, k> of (field, symmetric mode), k = 0..n.
        gen = mp.zeros(n + 1)
        for k in range(1, n + 1):
            elem = mp.sqrt(mp.mpf((n - k + 1) * k))
            gen[k - 1, k] = elem
            gen[k, k - 1] = elem
        u = mp.expm(-1j * th * gen)
        transfer = [u[k, 0] for k in range(n + 1)]
        # Stage 2: split amplitudes <j1,j2|(d+^dagger)^k|0,0>/sqrt(k!).
        for k in range(n + 1):
            split = _symmetric_mode_expansion(k)
            for (j1, j2), amp in split.items():
                prob = abs(transfer[k] * amp) ** 2
                probs[(j1, j2)] = probs.get((j1, j2), mp.mpf(0)) + prob
        return OraclePmf(probs=probs, source=f"enumeration n={n} theta={theta}")


def _symmetric_mode_expansion(k: int) -> dict[tuple[int, int], mp.mpc]:
    """Amplitudes of |j1,j2> in the k-quanta symmetric-mode number state."""
    state = {(0, 0): mp.mpf(1)}
    inv_sqrt2 = 1 / mp.sqrt(2)
    for _ in range(k):
        nxt: dict[tuple[int, int], mp.mpf] = {}
        for (j1, j2), amp in state.items():
            raised = amp * inv_sqrt2
            nxt[(j1 + 1, j2)] = nxt.get((j1 + 1, j2), mp.mpf(0)) + raised * mp.sqrt(j1 + 1)
            nxt[(j1, j2 + 1)] = nxt.get((j1, j2 + 1), mp.mpf(0)) + raised * mp.sqrt(j2 + 1)
        state = nxt
    norm = mp.sqrt(mp.factorial(k))
    return {key: amp / norm for key, amp in state.items()}


def oracle_moments_from_pmf(pmf) -> tuple[float, float, float, float]:
    """(``<N1>``, ``<N2>``, ``<N1 N2>``, covariance) by direct weighted sums.

    Accepts any mapping ``(n1, n2) -> probability``.  Sums run through
    ``math.fsum`` so accumulation error stays below the quantities the fast
    paths are checked against.
    """
    items = [(int(n1), int(n2), float(p)) for (n1, n2), p in pmf.items()]
    total = math.fsum(p for _, _, p in items)
    if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
        raise ValueError(f"pmf not normalised: total={total!r}")
    m1 = math.fsum(n1 * p for n1, _, p in items)
    m2 = math.fsum(n2 * p for _, n2, p in items)
    m12 = math.fsum(n1 * n2 * p for n1, n2, p in items)
    # Compensated covariance: accumulate the centred product directly.
    cov = math.fsum((n1 - m1) * (n2 - m2) * p for n1, n2, p in items)
    return m1, m2, m12, cov


@dataclass(frozen=True)
class GaussianJointMoments:
    """Closed-form joint homodyne moments for a classical source."""

    mean1: float
    mean2: float
    covariance: float
    var1: float
    var2: float


def oracle_gaussian_joint(kind: str, params: dict, gamma0_dt: float,
                          nodes: int = 128) -> GaussianJointMoments:
    """Joint homodyne moments by 1-D quadrature over the classical weight.

    Conditioned on a coherent amplitude ``a``, each readout is Gaussian with
    mean ``sqrt(2*gamma0_dt)*Im(a)`` and variance 1/2.  The classical weight
    is integrated over ``y = Im(a)`` with Gauss-Hermite nodes, independently
    of any measurement-channel grid machinery.
    """
    g = float(gamma0_dt)
    if kind == "coherent":
        y_nodes = np.array([complex(params["alpha"]).imag])
        weights = np.array([1.0])
    elif kind == "thermal":
        nbar = float(params["nbar"])
        if nbar == 0.0:
            y_nodes = np.array([0.0])
            weights = np.array([1.0])
        else:
            # y ~ N(0, nbar/2): x_gh nodes for weight exp(-t^2).
            t, w = np.polynomial.hermite.hermgauss(nodes)
            y_nodes = t * math.sqrt(nbar)  # t*sqrt(2*sigma^2), sigma^2=nbar/2
            weights = w / math.sqrt(math.pi)
    else:
        raise NotPRepresentable(f"no proper classical weight for kind={kind!r}")

    shift = math.sqrt(2.0 * g)
    mean_y = float(np.dot(weights, y_nodes))
    mean_y2 = float(np.dot(weights, y_nodes**2))
    mean = shift * mean_y
    var_y = mean_y2 - mean_y**2
    cov = 2.0 * g * var_y
    var = 0.5 + 2.0 * g * var_y
    return GaussianJointMoments(mean1=mean, mean2=mean, covariance=cov,
                                var1=var, var2=var)


def chi2_sf(stat: float, dof: int) -> float:
    """Survival function of the chi-square distribution (mpmath-backed)."""
    if dof <= 0:
        raise ValueError("dof must be positive")
    if stat <= 0:
        return 1.0
    return float(mp.gammainc(dof / 2.0, stat / 2.0, mp.inf, regularized=True))
