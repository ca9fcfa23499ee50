"""Single-mode bosonic states in a truncated Fock basis.

The canonical representation is a Hermitian density matrix ``rho[m, n]``
over number levels ``0..d``.  Quadratures are dimensionless with
``[X, P] = i`` (vacuum variance 1/2 on each), ``X = (a + a^dag)/sqrt(2)``
and ``P = (a - a^dag)/(sqrt(2) i)``.  States with a proper classical
phase-space weight (coherent, thermal) carry a :class:`ClassicalP` tag; the
tag is metadata for the mixture-based evolution path and for sampling, never
the canonical representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CutoffOverflow, NonConvergedTail, NotPRepresentable

DEFAULT_TAIL_MASS = 1e-12
DEFAULT_MAX_DIM = 4096
TRACE_TOL = 1e-10
HERMITICITY_TOL = 1e-12
DIAGONAL_TOL = 1e-14
MAX_COHERENT_ENERGY = 1e6
MAX_SQUEEZE = 5.0


@dataclass(frozen=True)
class CutoffPolicy:
    """How to choose the Fock-space truncation.

    The dimension is the smallest one whose retained trace reaches
    ``1 - tail_mass``, plus ``extra_levels`` padding, capped at ``max_dim``.
    """

    tail_mass: float = DEFAULT_TAIL_MASS
    max_dim: int = DEFAULT_MAX_DIM
    extra_levels: int = 0


@dataclass(frozen=True)
class ClassicalP:
    """Tag for states whose phase-space weight is a probability density."""

    kind: str  # "coherent" | "thermal"
    alpha: complex = 0j
    nbar: float = 0.0


@dataclass(frozen=True)
class FieldState:
    """Truncated Fock-basis density matrix with provenance metadata."""

    fock_matrix: np.ndarray
    cutoff: int
    classical_p: ClassicalP | None
    label: str
    tail_mass: float = 0.0

    def __post_init__(self):
        self.fock_matrix.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.cutoff + 1


@dataclass(frozen=True)
class FieldMoments:
    """Moment bundle consumed by the analytic correlator formulas.

    ``mandel_q`` and ``g2`` are reported as 0 and NaN for (numerical) vacuum;
    ``g2_defined`` records whether the normalised moments exist.
    """

    n_mean: float
    n2_normal: float
    a_mean: complex
    p_var: float
    mandel_q: float
    g2: float
    g2_defined: bool = True


def validate_matrix(matrix: np.ndarray) -> None:
    """Check trace, Hermiticity and diagonal positivity invariants."""
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"density matrix must be square, got {matrix.shape}")
    tr = float(np.real(np.trace(matrix)))
    if not (1.0 - TRACE_TOL <= tr <= 1.0 + 1e-14):
        raise ValueError(f"trace {tr!r} outside [1-{TRACE_TOL}, 1]")
    herm_gap = np.max(np.abs(matrix - matrix.conj().T))
    if herm_gap > HERMITICITY_TOL:
        raise ValueError(f"matrix not Hermitian: max gap {herm_gap:.3e}")
    min_diag = float(np.min(np.real(np.diagonal(matrix))))
    if min_diag < -DIAGONAL_TOL:
        raise ValueError(f"negative diagonal entry {min_diag:.3e}")


def from_matrix(matrix, label: str = "custom",
                classical_p: ClassicalP | None = None) -> FieldState:
    """Wrap a raw density matrix after validating the state invariants."""
    arr = np.array(matrix, dtype=complex)
    validate_matrix(arr)
    tail = max(0.0, 1.0 - float(np.real(np.trace(arr))))
    return FieldState(fock_matrix=arr, cutoff=arr.shape[0] - 1,
                      classical_p=classical_p, label=label, tail_mass=tail)


def _coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    """<n|alpha> for n < dim, evaluated in log space to dodge underflow."""
    if alpha == 0:
        vec = np.zeros(dim, dtype=complex)
        vec[0] = 1.0
        return vec
    n = np.arange(dim)
    mag = np.abs(alpha)
    log_mod = -0.5 * mag**2 + n * math.log(mag) - 0.5 * _lgamma(n + 1)
    phase = np.exp(1j * n * np.angle(alpha))
    return np.exp(log_mod) * phase


def _lgamma(values: np.ndarray) -> np.ndarray:
    return np.array([math.lgamma(float(v)) for v in np.atleast_1d(values)])


def _choose_cutoff(probs: np.ndarray, policy: CutoffPolicy, what: str) -> int:
    """Smallest level index with retained mass >= 1 - tail target."""
    cum = np.cumsum(probs)
    idx = np.searchsorted(cum, 1.0 - policy.tail_mass)
    if idx >= len(probs):
        raise CutoffOverflow(
            f"{what}: tail target {policy.tail_mass} needs more than "
            f"{len(probs)} levels")
    d = int(idx) + policy.extra_levels
    if d + 1 > policy.max_dim:
        raise CutoffOverflow(
            f"{what}: dimension {d + 1} exceeds cap {policy.max_dim}")
    return d


def make_coherent(alpha, policy: CutoffPolicy = CutoffPolicy()) -> FieldState:
    """Coherent state |alpha><alpha| truncated to the tail-mass target.

    Args:
        alpha: complex amplitude; ``|alpha|^2`` must not exceed 1e6.
        policy: truncation policy (tail mass, dimension cap).

    Returns:
        FieldState with a ``coherent`` classical tag.
    """
    alpha = complex(alpha)
    energy = abs(alpha) ** 2
    if energy > MAX_COHERENT_ENERGY:
        raise ValueError(f"|alpha|^2 = {energy:.3e} exceeds {MAX_COHERENT_ENERGY:.0e}")
    probe_dim = min(policy.max_dim + 1,
                    int(energy + 12.0 * math.sqrt(energy + 1.0) + 40))
    amps = _coherent_amplitudes(alpha, probe_dim)
    d = _choose_cutoff(np.abs(amps) ** 2, policy, "coherent state")
    vec = amps[:d + 1]
    rho = np.outer(vec, vec.conj())
    tail = max(0.0, 1.0 - float(np.real(np.trace(rho))))
    return FieldState(fock_matrix=rho, cutoff=d,
                      classical_p=ClassicalP(kind="coherent", alpha=alpha),
                      label=f"coherent(alpha={alpha})", tail_mass=tail)


def make_fock(n: int, policy: CutoffPolicy = CutoffPolicy()) -> FieldState:
    """Number state |n><n|, represented exactly."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n + 1 > policy.max_dim:
        raise CutoffOverflow(f"level {n} exceeds dimension cap {policy.max_dim}")
    rho = np.zeros((n + 1, n + 1), dtype=complex)
    rho[n, n] = 1.0
    return FieldState(fock_matrix=rho, cutoff=n, classical_p=None,
                      label=f"fock(n={n})", tail_mass=0.0)


def make_thermal(nbar: float, policy: CutoffPolicy = CutoffPolicy()) -> FieldState:
    """Thermal state with mean occupancy ``nbar`` (Bose-Einstein diagonal)."""
    nbar = float(nbar)
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    if nbar == 0.0:
        rho = np.array([[1.0 + 0j]])
        return FieldState(fock_matrix=rho, cutoff=0,
                          classical_p=ClassicalP(kind="thermal", nbar=0.0),
                          label="thermal(nbar=0)", tail_mass=0.0)
    ratio = nbar / (1.0 + nbar)
    # Geometric tail: sum_{n>d} = ratio^(d+1).
    d = int(math.ceil(math.log(policy.tail_mass) / math.log(ratio))) - 1
    d = max(d, 0) + policy.extra_levels
    if d + 1 > policy.max_dim:
        raise CutoffOverflow(
            f"thermal nbar={nbar}: dimension {d + 1} exceeds cap {policy.max_dim}")
    n = np.arange(d + 1)
    probs = np.exp(n * math.log(ratio) - math.log1p(nbar))
    rho = np.diag(probs.astype(complex))
    tail = max(0.0, 1.0 - float(probs.sum()))
    return FieldState(fock_matrix=rho, cutoff=d,
                      classical_p=ClassicalP(kind="thermal", nbar=nbar),
                      label=f"thermal(nbar={nbar})", tail_mass=tail)


def make_squeezed(r: float, phi: float, displacement=0j,
                  policy: CutoffPolicy = CutoffPolicy()) -> FieldState:
    """Displaced squeezed state D(displacement) S(r e^{i phi}) |0>.

    Number-basis amplitudes come from the standard two-term recurrence for
    eigenvectors of the Bogoliubov-transformed annihilation operator; the
    vector is normalised after the tail converges.  ``phi = pi`` squeezes the
    P quadrature (variance ``exp(-2r)/2`` at zero displacement).
    """
    r = float(r)
    phi = float(phi)
    alpha = complex(displacement)
    if abs(r) > MAX_SQUEEZE:
        raise ValueError(f"|r| = {abs(r)} exceeds {MAX_SQUEEZE}")
    mu = math.cosh(r)
    nu = complex(math.cos(phi), math.sin(phi)) * math.sinh(r)
    drive = alpha + (nu / mu) * alpha.conjugate()

    dim = 64
    while True:
        dim = min(dim, policy.max_dim)
        c = np.zeros(dim, dtype=complex)
        c[0] = 1.0
        scale_log = 0.0
        for n in range(dim - 1):
            prev = c[n - 1] if n >= 1 else 0.0
            c[n + 1] = (drive * c[n] - (nu / mu) * math.sqrt(n) * prev) / math.sqrt(n + 1)
            peak = abs(c[n + 1])
            if peak > 1e120:  # rescale; only ratios matter before normalisation
                c[:n + 2] /= peak
                scale_log += math.log(peak)
        probs = np.abs(c) ** 2
        total = probs.sum()
        tail_block = probs[-max(4, dim // 16):].sum()
        if tail_block <= 1e-18 * total:
            break
        if dim >= policy.max_dim:
            raise NonConvergedTail(
                f"squeezed r={r}: tail target unreachable at dimension {dim}")
        dim *= 2

    norm = probs / total
    cum = np.cumsum(norm)
    idx = int(np.searchsorted(cum, 1.0 - policy.tail_mass))
    if idx >= dim:
        raise NonConvergedTail(
            f"squeezed r={r}: tail target {policy.tail_mass} unreachable")
    d = min(idx + policy.extra_levels, dim - 1)
    if d + 1 > policy.max_dim:
        raise CutoffOverflow(
            f"squeezed r={r}: dimension {d + 1} exceeds cap {policy.max_dim}")
    vec = (c / math.sqrt(total))[:d + 1]
    rho = np.outer(vec, vec.conj())
    tail = max(0.0, 1.0 - float(np.real(np.trace(rho))))
    return FieldState(fock_matrix=rho, cutoff=d, classical_p=None,
                      label=f"squeezed(r={r}, phi={phi}, alpha={alpha})",
                      tail_mass=tail)


def moments_from_matrix(matrix: np.ndarray) -> FieldMoments:
    """Moments by ladder-operator contraction of a Fock-basis matrix."""
    diag = np.real(np.diagonal(matrix))
    dim = matrix.shape[0]
    n = np.arange(dim)
    n_mean = float(np.dot(n, diag))
    n2_normal = float(np.dot(n * (n - 1), diag))
    # <a> = sum_m sqrt(m) rho[m, m-1]; <a^2> = sum_m sqrt(m(m-1)) rho[m, m-2].
    a_mean = 0j
    if dim >= 2:
        sub = np.diagonal(matrix, offset=-1)  # rho[m, m-1], m = 1..d
        a_mean = complex(np.dot(np.sqrt(n[1:]), sub))
    a2_mean = 0j
    if dim >= 3:
        sub2 = np.diagonal(matrix, offset=-2)
        m = n[2:]
        a2_mean = complex(np.dot(np.sqrt(m * (m - 1)), sub2))
    p_mean = math.sqrt(2.0) * a_mean.imag
    p_var = n_mean + 0.5 - a2_mean.real - p_mean**2
    return _bundle(n_mean, n2_normal, a_mean, p_var)


def _bundle(n_mean, n2_normal, a_mean, p_var) -> FieldMoments:
    if n_mean > 1e-14:
        q = (n2_normal - n_mean**2) / n_mean
        g2 = n2_normal / n_mean**2
        return FieldMoments(n_mean=n_mean, n2_normal=n2_normal, a_mean=a_mean,
                            p_var=p_var, mandel_q=q, g2=g2, g2_defined=True)
    return FieldMoments(n_mean=n_mean, n2_normal=n2_normal, a_mean=a_mean,
                        p_var=p_var, mandel_q=0.0, g2=float("nan"),
                        g2_defined=False)


def compute_moments(state: FieldState) -> FieldMoments:
    """Moment bundle for a state.

    Tagged classical states use the closed forms of their tag (so coherent
    states report exactly zero Mandel Q and exactly vacuum quadrature noise,
    free of truncation residue); everything else is contracted from the Fock
    matrix.  Tag and matrix routes agree to within truncation tolerance, which
    the test-suite enforces.
    """
    tag = state.classical_p
    if tag is not None and tag.kind == "coherent":
        a = tag.alpha
        e = abs(a) ** 2
        return _bundle(e, e * e, a, 0.5)
    if tag is not None and tag.kind == "thermal":
        nbar = tag.nbar
        return _bundle(nbar, 2.0 * nbar * nbar, 0j, nbar + 0.5)
    return moments_from_matrix(state.fock_matrix)


class PSampler:
    """Deterministic stream of coherent amplitudes from a classical tag.

    One sampler per thread: instances hold private RNG state and must not be
    shared.
    """

    def __init__(self, tag: ClassicalP, seed: int):
        self._tag = tag
        self._rng = np.random.default_rng(np.random.SeedSequence(seed))
        self.seed = seed

    def draw(self, count: int) -> np.ndarray:
        if count < 0:
            raise ValueError("count must be non-negative")
        if self._tag.kind == "coherent":
            return np.full(count, self._tag.alpha, dtype=complex)
        sigma = math.sqrt(self._tag.nbar / 2.0)
        re = self._rng.standard_normal(count)
        im = self._rng.standard_normal(count)
        return sigma * (re + 1j * im)


def classical_p_sampler(state: FieldState, seed: int) -> PSampler:
    """Sampler over the classical weight of a tagged state.

    Raises:
        NotPRepresentable: for states without a proper classical weight
            (number or squeezed states); callers should switch to the exact
            evolution path.
    """
    if state.classical_p is None:
        raise NotPRepresentable(
            f"state {state.label!r} has no proper classical weight")
    return PSampler(state.classical_p, seed)
