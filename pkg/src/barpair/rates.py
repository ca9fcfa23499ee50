"""Physical detector parameters and the dimensionless coupling they imply."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .errors import ApproximationDomain, NonFinite

NEWTON_G = 6.67430e-11  # m^3 kg^-1 s^-2
ALUMINUM_SOUND_SPEED = 5.0e3  # m/s, typical bar material
WEAK_COUPLING_MAX = 0.1
FEASIBLE_RANGE = (0.1, 10.0)


@dataclass(frozen=True)
class DetectorSpec:
    """Resonant mass detector: all fields strictly positive, SI units.

    ``speed_m_s`` is the propagation speed in the fifth-power denominator of
    the emission rate.  The acoustic-resonance reading makes it the sound
    speed in the bar material (~5e3 m/s); the alternative reading is the
    speed of light.  Both are one value of this field apart, so the choice
    stays with the caller.
    """

    mass_kg: float
    length_m: float
    omega_rad_s: float
    speed_m_s: float
    dt_s: float

    def __post_init__(self):
        for name in ("mass_kg", "length_m", "omega_rad_s", "speed_m_s", "dt_s"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")


def gamma0_rate(spec: DetectorSpec) -> float:
    """Spontaneous emission rate 8*G*M*L^2*omega^4 / (pi^4 * v^5), in 1/s."""
    try:
        rate = (8.0 * NEWTON_G * spec.mass_kg * spec.length_m**2
                * spec.omega_rad_s**4) / (math.pi**4 * spec.speed_m_s**5)
    except (OverflowError, ZeroDivisionError) as exc:
        raise NonFinite(f"rate not representable: {exc}") from exc
    if not math.isfinite(rate):
        raise NonFinite(f"rate evaluated to {rate!r}")
    return rate


class Absorption(NamedTuple):
    probability: float
    feasible: bool


def stimulated_absorption_probability(gamma0: float, dt: float,
                                      n_mean: float) -> Absorption:
    """gamma0 * dt * n_mean with a feasibility flag.

    Feasible means the stimulated probability lands in [0.1, 10], the window
    where clicks are observable with high probability.  Valid only in the
    linearised regime gamma0*dt <= 0.1.
    """
    if gamma0 * dt > WEAK_COUPLING_MAX:
        raise ApproximationDomain(
            f"gamma0*dt = {gamma0 * dt:.3e} outside linear domain "
            f"(<= {WEAK_COUPLING_MAX})")
    if n_mean < 0:
        raise ValueError("n_mean must be non-negative")
    prob = gamma0 * dt * n_mean
    lo, hi = FEASIBLE_RANGE
    return Absorption(probability=prob, feasible=lo <= prob <= hi)


def required_occupancy(gamma0_dt: float, target_probability: float) -> float:
    """Mean occupancy needed for a given stimulated absorption probability."""
    if gamma0_dt <= 0:
        raise ValueError("gamma0_dt must be positive")
    return target_probability / gamma0_dt
