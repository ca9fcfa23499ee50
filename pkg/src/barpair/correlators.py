"""Analytic cross-correlators, Monte-Carlo estimators and null-test verdicts.

Analytic side: the weak-coupling predictions as functions of the source
moment bundle.  Empirical side: unbiased covariance and ratio estimators
with delta-method standard errors on centred moments (a seeded bootstrap is
available for validation).  The null test compares the empirical statistic
against zero, its expectation under the coherent-state hypothesis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .channels import SampleBatch
from .errors import (InsufficientSamples, UndefinedForVacuum, VacuumDetectors,
                     ZeroMarginalMean, ZeroP1)
from .evolution import (JointDetectorState, cross_mode_moment,
                        detector_occupancies)
from .field_states import FieldMoments

MIN_SAMPLES = 100


class Estimate(NamedTuple):
    value: float | complex
    standard_error: float


class ClickCovariance(NamedTuple):
    value: float
    defined: bool


@dataclass(frozen=True)
class CorrelatorReport:
    """Analytic prediction next to its Monte-Carlo estimate."""

    channel: str
    analytic_value: float | complex
    empirical_value: float | complex
    standard_error: float
    sample_count: int
    z_score: float | None
    auxiliary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "channel": self.channel,
            "analytic_value": _jsonable(self.analytic_value),
            "empirical_value": _jsonable(self.empirical_value),
            "standard_error": self.standard_error,
            "sample_count": self.sample_count,
            "z_score": self.z_score,
            "auxiliary": {k: _jsonable(v) for k, v in self.auxiliary.items()},
        }


@dataclass(frozen=True)
class NullTestVerdict:
    """Decision on the coherent-state hypothesis for one correlator."""

    statistic: float
    standard_error: float
    threshold: float
    verdict: str  # "consistent_with_coherent" | "acoherent"
    channel: str
    note: str

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "standard_error": self.standard_error,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "channel": self.channel,
            "note": self.note,
        }


def _jsonable(value):
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def make_report(channel: str, analytic, estimate: Estimate, count: int,
                auxiliary: dict | None = None) -> CorrelatorReport:
    se = estimate.standard_error
    if se > 0:
        z = abs(estimate.value - analytic) / se if isinstance(
            estimate.value, complex) or isinstance(analytic, complex) else (
                estimate.value - analytic) / se
        z = float(z)
    else:
        z = None
    return CorrelatorReport(channel=channel, analytic_value=analytic,
                            empirical_value=estimate.value,
                            standard_error=se, sample_count=count,
                            z_score=z, auxiliary=auxiliary or {})


# ---------------------------------------------------------------------------
# Analytic weak-coupling correlators.

def analytic_click_covariance(m: FieldMoments, gamma0_dt: float) -> ClickCovariance:
    """(gamma0_dt)^2 * Q * <a^dag a>; flagged undefined for vacuum."""
    _check_coupling(gamma0_dt)
    if m.n_mean <= 1e-14:
        return ClickCovariance(value=0.0, defined=False)
    return ClickCovariance(value=gamma0_dt**2 * m.mandel_q * m.n_mean,
                           defined=True)


def analytic_R(m: FieldMoments) -> float:
    """Count-correlation ratio <N1 N2>/(<N1><N2>) = 1 + Q/<n> = g2(0)."""
    if m.n_mean <= 1e-14:
        raise UndefinedForVacuum("R undefined at zero mean occupancy")
    return 1.0 + m.mandel_q / m.n_mean


def analytic_homodyne_covariance(m: FieldMoments, gamma0_dt: float) -> float:
    """gamma0_dt * (<dP^2> - 1/2) in dimensionless units."""
    _check_coupling(gamma0_dt)
    return gamma0_dt * (m.p_var - 0.5)


def analytic_heterodyne_re_covariance(m: FieldMoments, gamma0_dt: float) -> float:
    """(gamma0_dt / 2) * (<dP^2> - 1/2)."""
    _check_coupling(gamma0_dt)
    return 0.5 * gamma0_dt * (m.p_var - 0.5)


def analytic_heterodyne_cross(m: FieldMoments, gamma0_dt: float) -> complex:
    """gamma0_dt * (<a^dag a> - <a^dag><a>)."""
    _check_coupling(gamma0_dt)
    return complex(gamma0_dt * (m.n_mean - abs(m.a_mean) ** 2))


def _check_coupling(gamma0_dt: float) -> None:
    if not (0.0 < gamma0_dt < 1.0):
        raise ValueError(f"gamma0_dt must lie in (0, 1), got {gamma0_dt}")


# ---------------------------------------------------------------------------
# Empirical estimators.

SELECTORS = ("clicks", "quadratures", "heterodyne_re", "heterodyne_cross")


def _observables(batch: SampleBatch, selector: str):
    if selector == "clicks":
        return batch.data[:, 0].astype(float), batch.data[:, 1].astype(float)
    if selector == "quadratures":
        return batch.data[:, 0].astype(float), batch.data[:, 1].astype(float)
    if selector == "heterodyne_re":
        return batch.data[:, 0].real.copy(), batch.data[:, 1].real.copy()
    if selector == "heterodyne_cross":
        return batch.data[:, 0].copy(), batch.data[:, 1].copy()
    raise ValueError(f"unknown selector {selector!r}; choose from {SELECTORS}")


def estimate_covariance(batch: SampleBatch, selector: str) -> Estimate:
    """Unbiased sample covariance with a delta-method standard error.

    For the complex selector the estimator is
    mean(conj(a - abar) * (b - bbar)); its standard error combines the
    variances of the real and imaginary parts of the centred products.

    For click counts the sampling noise is carried almost entirely by the
    discrete coincidence events.  A batch that contains none of them would
    make the plug-in fourth moment report essentially zero uncertainty, so
    in that case one pseudo-coincidence of leverage (1 - abar)(1 - bbar) is
    folded into the variance (the counting-statistics analogue of the rule
    of three); batches with any observed coincidence are untouched.
    """
    if batch.count < MIN_SAMPLES:
        raise InsufficientSamples(f"need >= {MIN_SAMPLES} samples, got {batch.count}")
    a, b = _observables(batch, selector)
    n = batch.count
    if selector == "heterodyne_cross":
        da = a - a.mean()
        db = b - b.mean()
        t = np.conj(da) * db
        cov = complex(t.sum() / (n - 1))
        centred = t - t.mean()
        var = (np.mean(centred.real**2) + np.mean(centred.imag**2))
        return Estimate(value=cov, standard_error=math.sqrt(max(var, 0.0) / n))
    da = a - a.mean()
    db = b - b.mean()
    t = da * db
    cov = float(t.sum() / (n - 1))
    m22 = float(np.mean(t**2))
    if selector == "clicks" and not np.any((a > 0) & (b > 0)):
        leverage = (1.0 - a.mean()) * (1.0 - b.mean())
        m22 += leverage**2 / n
    var = max(m22 - cov**2, 0.0)
    return Estimate(value=cov, standard_error=math.sqrt(var / n))


def bootstrap_covariance(batch: SampleBatch, selector: str,
                         resamples: int = 1000, seed: int = 0) -> Estimate:
    """Bootstrap validation of the delta-method standard error."""
    if batch.count < MIN_SAMPLES:
        raise InsufficientSamples(f"need >= {MIN_SAMPLES} samples, got {batch.count}")
    a, b = _observables(batch, selector)
    n = batch.count
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    reps = np.empty(resamples, dtype=complex)
    for r in range(resamples):
        idx = rng.integers(0, n, size=n)
        aa, bb = a[idx], b[idx]
        da = np.conj(aa - aa.mean()) if selector == "heterodyne_cross" else aa - aa.mean()
        reps[r] = np.sum(da * (bb - bb.mean())) / (n - 1)
    centre = reps.mean()
    spread = math.sqrt(float(np.mean(np.abs(reps - centre) ** 2)))
    value = complex(centre) if selector == "heterodyne_cross" else float(centre.real)
    return Estimate(value=value, standard_error=spread)


def estimate_g2_ratio(batch: SampleBatch) -> Estimate:
    """mean(n1*n2)/(mean(n1)*mean(n2)) with a delta-method error."""
    if batch.count < MIN_SAMPLES:
        raise InsufficientSamples(f"need >= {MIN_SAMPLES} samples, got {batch.count}")
    n1 = batch.data[:, 0].astype(float)
    n2 = batch.data[:, 1].astype(float)
    m1, m2 = n1.mean(), n2.mean()
    if m1 <= 0 or m2 <= 0:
        raise ZeroMarginalMean("both detector sample means must be positive")
    prod = n1 * n2
    mp = prod.mean()
    g = mp / (m1 * m2)
    grad = np.array([1.0 / (m1 * m2), -mp / (m1**2 * m2), -mp / (m1 * m2**2)])
    stack = np.stack([prod, n1, n2])
    cov = np.cov(stack)
    var = float(grad @ cov @ grad) / batch.count
    return Estimate(value=g, standard_error=math.sqrt(max(var, 0.0)))


def estimate_g2_from_clicks(batch: SampleBatch, detector: int = 1) -> Estimate:
    """2*P2*P0/P1^2 from one detector's click frequencies.

    The standard error follows from the multinomial covariance of the
    frequency vector through the gradient of the ratio.
    """
    if batch.count < MIN_SAMPLES:
        raise InsufficientSamples(f"need >= {MIN_SAMPLES} samples, got {batch.count}")
    counts = batch.data[:, detector - 1].astype(int)
    n = batch.count
    p0 = float(np.count_nonzero(counts == 0)) / n
    p1 = float(np.count_nonzero(counts == 1)) / n
    p2 = float(np.count_nonzero(counts == 2)) / n
    if p1 == 0.0:
        raise ZeroP1("no single-click events on the chosen detector")
    g = 2.0 * p2 * p0 / p1**2
    grad = np.array([2.0 * p2 / p1**2,
                     -4.0 * p2 * p0 / p1**3,
                     2.0 * p0 / p1**2])
    probs = np.array([p0, p1, p2])
    sigma = (np.diag(probs) - np.outer(probs, probs)) / n
    var = float(grad @ sigma @ grad)
    return Estimate(value=g, standard_error=math.sqrt(max(var, 0.0)))


def combine_inverse_variance(a: Estimate, b: Estimate) -> Estimate:
    """Inverse-variance weighted combination of two estimates."""
    wa = 1.0 / a.standard_error**2
    wb = 1.0 / b.standard_error**2
    value = (wa * a.value + wb * b.value) / (wa + wb)
    return Estimate(value=float(value), standard_error=math.sqrt(1.0 / (wa + wb)))


# ---------------------------------------------------------------------------
# Null test and first-order coherence.

def null_test(report: CorrelatorReport, z_star: float = 5.0) -> NullTestVerdict:
    """Verdict on the coherent-state hypothesis from one correlator report.

    The statistic is the empirical correlator (its modulus when complex),
    whose expectation is exactly zero for any coherent state; it is compared
    against ``z_star`` empirical standard errors.
    """
    if report.standard_error <= 0:
        raise ValueError("null test needs a positive standard error")
    stat = abs(report.empirical_value) if isinstance(
        report.empirical_value, complex) else float(report.empirical_value)
    ratio = abs(stat) / report.standard_error
    acoherent = ratio > z_star
    note = (f"|statistic|/SE = {ratio:.2f} "
            f"{'exceeds' if acoherent else 'is within'} threshold {z_star:g}")
    return NullTestVerdict(statistic=float(stat),
                           standard_error=report.standard_error,
                           threshold=z_star,
                           verdict="acoherent" if acoherent
                           else "consistent_with_coherent",
                           channel=report.channel, note=note)


def g1_cross(js: JointDetectorState) -> float:
    """|<b1^dag b2>| / sqrt(<b1^dag b1><b2^dag b2>) from the joint state."""
    n1, n2 = detector_occupancies(js)
    if n1 <= 1e-14 or n2 <= 1e-14:
        raise VacuumDetectors("detector occupancies too small for g1")
    return abs(cross_mode_moment(js)) / math.sqrt(n1 * n2)
