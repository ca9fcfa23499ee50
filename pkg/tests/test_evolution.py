import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from barpair import (ApproximationDomain, CouplingParams, CutoffOverflow,
                     NotPRepresentable, QuadratureNotConverged, click_pmf,
                     evolve, evolve_approx_classical, evolve_approximate,
                     evolve_exact, evolve_sequential,
                     fock_click_pmf_closed_form, joint_state_trace_distance,
                     make_coherent, make_fock, make_thermal, oracle_click_pmf)
from barpair.evolution import (align_joint, detector_occupancies,
                               mean_amplitudes, reduced_detector)
from barpair.field_states import _coherent_amplitudes, moments_from_matrix


def check_joint_invariants(js):
    tr = float(np.real(np.trace(js.rho12)))
    assert 1.0 - 1e-10 <= tr <= 1.0 + 1e-12
    assert np.max(np.abs(js.rho12 - js.rho12.conj().T)) <= 1e-12


# ---------------------------------------------------------------------------
# Coupling parameters.

def test_coupling_theta():
    cp = CouplingParams(0.02)
    assert cp.theta == pytest.approx(math.sqrt(0.04))
    assert 0.0 < cp.theta < math.pi / 2


@pytest.mark.parametrize("kwargs", [
    {"gamma0_dt": 0.0},
    {"gamma0_dt": 1.0},
    {"gamma0_dt": 0.1, "mode": "bogus"},
    {"gamma0_dt": 0.1, "mode": "sequential"},
    {"gamma0_dt": 0.1, "mode": "sequential", "dt_split": (0.1, 0.0)},
])
def test_coupling_validation(kwargs):
    with pytest.raises(ValueError):
        CouplingParams(**kwargs)


# ---------------------------------------------------------------------------
# Exact path.

def test_exact_vacuum_stays_empty():
    js = evolve_exact(make_coherent(0), CouplingParams(0.02))
    assert js.rho12.shape == (1, 1)
    assert js.rho12[0, 0] == pytest.approx(1.0)
    check_joint_invariants(js)


def test_exact_single_quantum_probabilities():
    js = evolve_exact(make_fock(1), CouplingParams(0.02))  # theta = 0.2
    pmf = click_pmf(js).as_dict()
    assert pmf[(0, 0)] == pytest.approx(0.9605304970014426, abs=1e-12)
    assert pmf[(1, 0)] == pytest.approx(0.019734751499278728, abs=1e-12)
    assert pmf[(0, 1)] == pytest.approx(0.019734751499278728, abs=1e-12)
    check_joint_invariants(js)


def test_exact_coherent_marginals_are_coherent():
    alpha, gdt = 1.5 - 0.5j, 0.01
    js = evolve_exact(make_coherent(alpha), CouplingParams(gdt))
    amp = -1j * alpha * math.sin(math.sqrt(2 * gdt)) / math.sqrt(2)
    for det in (1, 2):
        red = reduced_detector(js, det)
        probe = _coherent_amplitudes(amp, red.shape[0])
        fidelity = float(np.real(probe.conj() @ red @ probe))
        assert fidelity > 1.0 - 1e-10
    b1, b2 = mean_amplitudes(js)
    assert abs(b1 - amp) < 1e-9
    assert abs(b2 - amp) < 1e-9


def test_exact_quantum_number_conservation_support():
    n = 4
    js = evolve_exact(make_fock(n), CouplingParams(0.05))
    pmf = click_pmf(js)
    populated = pmf.outcomes[pmf.probs > 1e-13]
    assert np.all(populated.sum(axis=1) <= n)


def test_exact_no_quanta_created():
    for state in (make_fock(3), make_thermal(2.0), make_coherent(2)):
        js = evolve_exact(state, CouplingParams(0.03))
        o1, o2 = detector_occupancies(js)
        n_src = moments_from_matrix(state.fock_matrix).n_mean
        assert o1 + o2 <= n_src + 1e-10


def test_exact_unitarity_bookkeeping():
    state = make_coherent(2.2 + 0.3j)
    js = evolve_exact(state, CouplingParams(0.02))
    assert js.field_residual is not None
    levels = np.arange(js.field_residual.shape[0])
    n_field = float(np.real(np.diagonal(js.field_residual)) @ levels)
    o1, o2 = detector_occupancies(js)
    n_src = moments_from_matrix(state.fock_matrix).n_mean
    assert n_field + o1 + o2 == pytest.approx(n_src, abs=1e-9)


@given(re=st.floats(-1.5, 1.5), im=st.floats(-1.5, 1.5),
       gdt=st.floats(1e-4, 0.2))
@settings(max_examples=15, deadline=None)
def test_exact_exchange_symmetry(re, im, gdt):
    js = evolve_exact(make_coherent(complex(re, im)), CouplingParams(gdt))
    t = js.tensor()
    assert np.max(np.abs(t - t.transpose(1, 0, 3, 2))) < 1e-12


def test_exact_exchange_symmetry_fock():
    js = evolve_exact(make_fock(3), CouplingParams(0.04))
    t = js.tensor()
    assert np.max(np.abs(t - t.transpose(1, 0, 3, 2))) == 0.0


# ---------------------------------------------------------------------------
# Closed-form pmf.

def test_closed_form_point_cases():
    assert fock_click_pmf_closed_form(0, 0.3) == {(0, 0): pytest.approx(1.0)}
    pmf = fock_click_pmf_closed_form(1, 0.2)
    assert pmf[(1, 0)] == pytest.approx(math.sin(0.2) ** 2 / 2, abs=1e-15)


@pytest.mark.parametrize("n,theta", [(2, 0.1), (5, 0.4), (40, 0.8), (9, 1.2)])
def test_closed_form_normalised(n, theta):
    assert abs(math.fsum(fock_click_pmf_closed_form(n, theta).values()) - 1.0) < 1e-12


def test_closed_form_matches_oracle_exactly():
    for theta in (0.05, 0.2, 0.5):
        oracle = oracle_click_pmf(2, theta).as_floats()
        closed = fock_click_pmf_closed_form(2, theta)
        assert max(abs(closed[k] - v) for k, v in oracle.items()) < 1e-14


def test_closed_form_domain():
    with pytest.raises(ValueError):
        fock_click_pmf_closed_form(3, 0.0)


# ---------------------------------------------------------------------------
# Sequential path.

def test_sequential_vacuum():
    cp = CouplingParams(0.01, mode="sequential", dt_split=(0.01, 0.01))
    js = evolve_sequential(make_coherent(0), cp)
    assert js.rho12[0, 0] == pytest.approx(1.0)
    check_joint_invariants(js)


def test_sequential_close_to_exact_at_weak_coupling():
    cp_seq = CouplingParams(1e-3, mode="sequential", dt_split=(1e-3, 1e-3))
    js_seq = evolve_sequential(make_coherent(3), cp_seq)
    js_ex = evolve_exact(make_coherent(3), CouplingParams(1e-3))
    assert joint_state_trace_distance(js_ex, js_seq) <= 5e-3
    check_joint_invariants(js_seq)


def test_sequential_first_detector_sees_more():
    cp = CouplingParams(0.01, mode="sequential", dt_split=(0.01, 0.01))
    js = evolve_sequential(make_fock(2), cp)
    o1, o2 = detector_occupancies(js)
    assert o1 == pytest.approx(2 * math.sin(0.1) ** 2, abs=1e-10)
    assert o2 == pytest.approx(2 * math.cos(0.1) ** 2 * math.sin(0.1) ** 2,
                               abs=1e-10)
    assert o1 > o2


def test_sequential_guards_large_inputs():
    cp = CouplingParams(0.01, mode="sequential", dt_split=(0.01, 0.01))
    with pytest.raises(CutoffOverflow):
        evolve_sequential(make_thermal(100.0), cp)


# ---------------------------------------------------------------------------
# Approximate paths.

def test_approx_classical_coherent_amplitude():
    js = evolve_approx_classical(make_coherent(2),
                                 CouplingParams(0.01, mode="approximate"))
    b1, b2 = mean_amplitudes(js)
    assert b1 == pytest.approx(-0.2j, abs=1e-9)
    assert b2 == pytest.approx(-0.2j, abs=1e-9)
    check_joint_invariants(js)


def test_approx_classical_thermal_block_diagonal():
    js = evolve_approx_classical(make_thermal(3.0),
                                 CouplingParams(0.01, mode="approximate"))
    t = js.tensor()
    k = t.shape[0]
    totals = np.add.outer(np.arange(k), np.arange(k))
    off_block = np.where(totals[:, :, None, None] != totals[None, None, :, :],
                         t, 0.0)
    assert np.max(np.abs(off_block)) < 1e-13
    check_joint_invariants(js)


def test_approx_classical_exchange_symmetric():
    js = evolve_approx_classical(make_thermal(2.0),
                                 CouplingParams(0.02, mode="approximate"))
    t = js.tensor()
    assert np.max(np.abs(t - t.transpose(1, 0, 3, 2))) < 1e-13


def test_approx_requires_classical_weight():
    with pytest.raises(NotPRepresentable):
        evolve_approx_classical(make_fock(2),
                                CouplingParams(0.01, mode="approximate"))


def test_approx_domain_guard():
    with pytest.raises(ApproximationDomain):
        evolve_approx_classical(make_coherent(1),
                                CouplingParams(0.2, mode="approximate"))
    with pytest.raises(ApproximationDomain):
        evolve_approximate(make_fock(1), CouplingParams(0.2, mode="approximate"))


def test_quadrature_convergence_guard():
    with pytest.raises(QuadratureNotConverged):
        evolve_approx_classical(make_thermal(3.0),
                                CouplingParams(0.01, mode="approximate"),
                                radial_nodes=2)


def test_weak_unitary_matches_classical_mixture():
    cp = CouplingParams(0.01, mode="approximate")
    for state in (make_coherent(2), make_thermal(3.0)):
        a, b = align_joint(evolve_approx_classical(state, cp),
                           evolve_approximate(state, cp))
        assert np.max(np.abs(a - b)) < 1e-9


def test_approx_close_to_exact():
    # direct comparison; approximation error is first order in the coupling
    st_ = make_coherent(2)
    js_a = evolve_approx_classical(st_, CouplingParams(1e-3, mode="approximate"))
    js_e = evolve_exact(st_, CouplingParams(1e-3))
    assert joint_state_trace_distance(js_e, js_a) <= 2e-3


def test_exact_approx_convergence_is_linear():
    # successive trace-distance ratios across decades stay near ten
    for alpha in (3.0, 1.0 + 0.5j):
        distances = []
        for gdt in (1e-2, 1e-3, 1e-4):
            st_ = make_coherent(alpha)
            js_e = evolve_exact(st_, CouplingParams(gdt))
            js_a = evolve_approx_classical(
                st_, CouplingParams(gdt, mode="approximate"))
            distances.append(joint_state_trace_distance(js_e, js_a))
        for hi, lo in zip(distances, distances[1:]):
            assert 5.0 <= hi / lo <= 20.0


def test_evolve_dispatch():
    st_ = make_fock(2)
    js = evolve(st_, CouplingParams(0.01, mode="approximate"))
    assert js.provenance.mode == "approximate"
    js = evolve(st_, CouplingParams(0.01))
    assert js.provenance.mode == "exact"
    js = evolve(make_coherent(1), CouplingParams(0.01, mode="sequential",
                                                 dt_split=(0.01, 0.01)))
    assert js.provenance.mode == "sequential"


def test_approximate_path_fock_occupancy_is_amplitude_exact():
    js = evolve_approximate(make_fock(5), CouplingParams(0.01, mode="approximate"))
    o1, o2 = detector_occupancies(js)
    assert o1 == pytest.approx(0.05, abs=1e-12)
    assert o2 == pytest.approx(0.05, abs=1e-12)


def test_provenance_recorded():
    cp = CouplingParams(0.02)
    js = evolve_exact(make_thermal(1.0), cp)
    assert js.provenance.gamma0_dt == 0.02
    assert "thermal" in js.provenance.source_label
