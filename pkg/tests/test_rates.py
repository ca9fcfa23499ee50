import math

import mpmath as mp
import pytest

from barpair import (ApproximationDomain, DetectorSpec, NonFinite,
                     gamma0_rate, required_occupancy,
                     stimulated_absorption_probability)

BAR = DetectorSpec(mass_kg=1400.0, length_m=1.5, omega_rad_s=2 * math.pi * 1e3,
                   speed_m_s=5e3, dt_s=1.0)


def test_rate_regression_anchor():
    # frozen from a 40-digit evaluation of the same expression
    with mp.workdps(40):
        g = (8 * mp.mpf("6.67430e-11") * 1400 * mp.mpf("1.5") ** 2
             * (2 * mp.pi * 1000) ** 4 / (mp.pi**4 * mp.mpf(5000) ** 5))
        anchor = float(g)
    assert anchor == pytest.approx(8.611448832e-12, rel=1e-12)
    assert gamma0_rate(BAR) == pytest.approx(anchor, rel=1e-12)


def test_rate_scaling_structure():
    base = gamma0_rate(BAR)
    double_l = DetectorSpec(BAR.mass_kg, 3.0, BAR.omega_rad_s, BAR.speed_m_s, 1.0)
    assert gamma0_rate(double_l) == pytest.approx(4 * base, rel=1e-12)
    double_w = DetectorSpec(BAR.mass_kg, BAR.length_m, 2 * BAR.omega_rad_s,
                            BAR.speed_m_s, 1.0)
    assert gamma0_rate(double_w) == pytest.approx(16 * base, rel=1e-12)
    fast_v = DetectorSpec(BAR.mass_kg, BAR.length_m, BAR.omega_rad_s,
                          10 * BAR.speed_m_s, 1.0)
    assert gamma0_rate(fast_v) == pytest.approx(base / 1e5, rel=1e-12)


def test_rate_monotonicity():
    base = gamma0_rate(BAR)
    assert gamma0_rate(DetectorSpec(BAR.mass_kg * 1.01, BAR.length_m,
                                    BAR.omega_rad_s, BAR.speed_m_s, 1.0)) > base
    assert gamma0_rate(DetectorSpec(BAR.mass_kg, BAR.length_m * 1.01,
                                    BAR.omega_rad_s, BAR.speed_m_s, 1.0)) > base
    assert gamma0_rate(DetectorSpec(BAR.mass_kg, BAR.length_m,
                                    BAR.omega_rad_s * 1.01, BAR.speed_m_s, 1.0)) > base
    assert gamma0_rate(DetectorSpec(BAR.mass_kg, BAR.length_m,
                                    BAR.omega_rad_s, BAR.speed_m_s * 1.01, 1.0)) < base


def test_dimensional_audit():
    # same computation in cgs-style units with compensating factors
    si = gamma0_rate(BAR)
    g_cgs = 6.67430e-11 * 1e6 / 1e3       # cm^3 g^-1 s^-2
    mass_g = BAR.mass_kg * 1e3
    length_cm = BAR.length_m * 1e2
    speed_cm = BAR.speed_m_s * 1e2
    cgs = (8.0 * g_cgs * mass_g * length_cm**2 * BAR.omega_rad_s**4
           / (math.pi**4 * speed_cm**5))
    assert cgs == pytest.approx(si, rel=1e-12)


def test_spec_validation():
    with pytest.raises(ValueError):
        DetectorSpec(mass_kg=-1.0, length_m=1.0, omega_rad_s=1.0,
                     speed_m_s=1.0, dt_s=1.0)
    with pytest.raises(ValueError):
        DetectorSpec(mass_kg=math.inf, length_m=1.0, omega_rad_s=1.0,
                     speed_m_s=1.0, dt_s=1.0)


def test_rate_nonfinite_guard():
    spec = DetectorSpec(mass_kg=1e308, length_m=1e154, omega_rad_s=1e77,
                        speed_m_s=1e-300, dt_s=1.0)
    with pytest.raises(NonFinite):
        gamma0_rate(spec)


def test_absorption_probability_window():
    out = stimulated_absorption_probability(1e-3, 1.0, 1000.0)
    assert out.probability == pytest.approx(1.0)
    assert out.feasible
    zero = stimulated_absorption_probability(1e-3, 1.0, 0.0)
    assert zero.probability == 0.0
    assert not zero.feasible
    # tiny coupling compensated by a huge occupancy
    big = stimulated_absorption_probability(1e-38, 1.0, 1e38)
    assert big.probability == pytest.approx(1.0)
    assert big.feasible


def test_absorption_domain_guard():
    with pytest.raises(ApproximationDomain):
        stimulated_absorption_probability(0.2, 1.0, 1.0)


def test_required_occupancy_inverts():
    gdt = 3.2e-7
    for target in (0.1, 1.0, 10.0):
        n = required_occupancy(gdt, target)
        assert n * gdt == pytest.approx(target, rel=1e-12)
