"""Evolution of one field mode against two initially empty detectors.

Only the symmetric combination of the detector modes couples to the field,
so the exact simultaneous interaction is a two-mode exchange (beamsplitter)
between the field and that symmetric mode at mixing angle
``theta = sqrt(2*gamma0_dt)``; the antisymmetric mode stays in vacuum.  The
engine exploits this: it reduces the field into the symmetric mode first and
then splits the symmetric mode 50/50 over the two detectors with an exact
isometry.  Mixed inputs evolve coherence-by-coherence (each ``|n><m|`` Fock
entry carries its own amplitude factors), which preserves linearity without
any eigendecomposition.

Three paths are provided:

* ``exact``       -- the unitary at ``theta = sqrt(2*gamma0_dt)``.
* ``sequential``  -- detector 1 then detector 2, angles ``sqrt(gamma0_dt_i)``.
* ``approximate`` -- the weak-coupling map whose absorbed amplitude is
  exactly ``-i*alpha*sqrt(gamma0_dt)`` per detector.  For classical states
  this is the coherent-state mixture; in general it is the same beamsplitter
  reduction run at the amplitude-matched angle ``arcsin(sqrt(2*gamma0_dt))``,
  which coincides with the mixture wherever both are defined.  The
  approximate path leaves the retained field factor undepleted, so it does
  not conserve quanta; that bookkeeping failure is the approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (ApproximationDomain, BarpairError, CutoffOverflow,
                     NotPRepresentable, QuadratureNotConverged)
from .field_states import FieldState, _coherent_amplitudes

DETECTOR_TAIL = 5e-11
JOINT_TRACE_TOL = 1e-10
MAX_PRODUCT_DIM = 4096
FIELD_RESIDUAL_AUTO_DIM = 600
WEAK_COUPLING_MAX = 0.1


@dataclass(frozen=True)
class CouplingParams:
    """Dimensionless coupling for one interaction window.

    ``gamma0_dt`` is the product of the spontaneous-emission rate and the
    interaction time.  ``dt_split`` gives the per-detector products for the
    sequential path.
    """

    gamma0_dt: float
    mode: str = "exact"
    dt_split: tuple[float, float] | None = None

    def __post_init__(self):
        if not (0.0 < self.gamma0_dt < 1.0):
            raise ValueError(f"gamma0_dt must lie in (0, 1), got {self.gamma0_dt}")
        if self.mode not in ("exact", "sequential", "approximate"):
            raise ValueError(f"unknown evolution mode {self.mode!r}")
        if self.mode == "sequential":
            if self.dt_split is None:
                raise ValueError("sequential mode needs dt_split")
            g1, g2 = self.dt_split
            if g1 <= 0 or g2 <= 0:
                raise ValueError("both dt_split entries must be positive")

    @property
    def theta(self) -> float:
        """Mixing angle of the simultaneous interaction."""
        return math.sqrt(2.0 * self.gamma0_dt)


@dataclass(frozen=True)
class Provenance:
    mode: str
    source_label: str
    gamma0_dt: float
    dt_split: tuple[float, float] | None = None


@dataclass(frozen=True)
class JointDetectorState:
    """Reduced two-detector state over the product basis |n1, n2>.

    ``rho12`` is indexed row-major with detector 1 major:
    ``index = n1 * (det_cutoff + 1) + n2``.  ``symmetric_mode`` caches the
    reduced symmetric-mode matrix when the antisymmetric mode is known to be
    in vacuum (exact and approximate paths); it makes eigen-decompositions
    rank-(K+1) instead of rank-(K+1)^2.  ``field_residual`` is the retained
    field factor: the reduced field marginal for unitary paths, the
    untouched input for the approximate path.
    """

    rho12: np.ndarray
    det_cutoff: int
    field_residual: np.ndarray | None
    provenance: Provenance
    symmetric_mode: np.ndarray | None = None

    def __post_init__(self):
        self.rho12.setflags(write=False)
        if self.field_residual is not None:
            self.field_residual.setflags(write=False)
        if self.symmetric_mode is not None:
            self.symmetric_mode.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.det_cutoff + 1

    def tensor(self) -> np.ndarray:
        k = self.dim
        return self.rho12.reshape(k, k, k, k)


def _bs_columns(rho: np.ndarray, theta: float, tail: float):
    """Transfer coefficients u[n, k] = sqrt(C(n,k)) cos^(n-k) sin^k.

    Columns are grown until the symmetric-mode diagonal reaches the retained
    trace minus ``tail``; small inputs (d <= 12) keep the complete transfer
    support, which costs nothing and keeps low-level pmfs exact.  Returns
    (u, K, retained_mass).
    """
    d = rho.shape[0] - 1
    diag = np.real(np.diagonal(rho))
    trace = float(diag.sum())
    n = np.arange(d + 1, dtype=float)
    ln_cos = math.log(math.cos(theta))
    tan_t = math.tan(theta)
    col = np.exp(n * ln_cos)
    cols = [col]
    cum = float(np.dot(diag, col**2))
    k = 0
    full_support = d <= 12
    while (cum < trace - tail or full_support) and k < d:
        nxt = np.zeros(d + 1)
        nxt[k + 1:] = cols[k][k + 1:] * tan_t * np.sqrt((n[k + 1:] - k) / (k + 1))
        # recurrence leaves the k-th entry column at zero beyond n < k+1
        cols.append(nxt)
        cum += float(np.dot(diag, nxt**2))
        k += 1
    u = np.stack(cols, axis=1)
    return u, k, cum


def _symmetric_reduction(rho: np.ndarray, theta: float,
                         tail: float = DETECTOR_TAIL):
    """Reduced symmetric-mode matrix after the exchange unitary.

    rho_sym[k, k'] = (-i)^k (i)^k' sum_n rho[n, n-k+k'] u[n,k] u[n-k+k',k'].
    """
    u, cap, _ = _bs_columns(rho, theta, tail)
    d = rho.shape[0] - 1
    if (cap + 1) ** 2 > MAX_PRODUCT_DIM:
        raise CutoffOverflow(
            f"detector product dimension {(cap + 1) ** 2} exceeds {MAX_PRODUCT_DIM}")
    phase = (-1j) ** np.arange(cap + 1)
    rho_sym = np.zeros((cap + 1, cap + 1), dtype=complex)
    for k in range(cap + 1):
        for kp in range(cap + 1):
            off = kp - k
            hi = d - off if off > 0 else d
            if hi < k:
                continue
            idx = np.arange(k, hi + 1)
            vals = rho[idx, idx + off] * u[idx, k] * u[idx + off, kp]
            rho_sym[k, kp] = phase[k] * np.conj(phase[kp]) * vals.sum()
    return 0.5 * (rho_sym + rho_sym.conj().T), u


def _split_isometry(cap: int) -> np.ndarray:
    """Map |k> of the symmetric mode onto the two-detector product basis."""
    dim = cap + 1
    m = np.zeros((dim * dim, dim))
    for k in range(dim):
        for j in range(k + 1):
            m[j * dim + (k - j), k] = math.sqrt(math.comb(k, j) / 2.0**k)
    return m


def _field_marginal(rho: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Reduced field matrix after the exchange (unitary paths only)."""
    d = rho.shape[0] - 1
    cap = u.shape[1] - 1
    rf = np.zeros((d + 1, d + 1), dtype=complex)
    for k in range(cap + 1):
        w = u[k:, k]
        rf[:d + 1 - k, :d + 1 - k] += rho[k:, k:] * np.outer(w, w)
    return 0.5 * (rf + rf.conj().T)


def _check_joint_trace(rho12: np.ndarray, what: str) -> None:
    tr = float(np.real(np.trace(rho12)))
    if not (1.0 - JOINT_TRACE_TOL <= tr <= 1.0 + 1e-12):
        raise BarpairError(f"{what}: joint trace {tr!r} violates tolerance")


def _keep_residual(flag, dim: int) -> bool:
    if flag == "auto":
        return dim <= FIELD_RESIDUAL_AUTO_DIM
    return bool(flag)


def _unitary_reduction(state: FieldState, theta: float, mode: str,
                       cp: CouplingParams, keep_field_residual) -> JointDetectorState:
    rho_sym, u = _symmetric_reduction(state.fock_matrix, theta)
    cap = rho_sym.shape[0] - 1
    m = _split_isometry(cap)
    rho12 = m @ rho_sym @ m.T
    rho12 = 0.5 * (rho12 + rho12.conj().T)
    _check_joint_trace(rho12, mode)
    residual = None
    if _keep_residual(keep_field_residual, state.dim):
        residual = _field_marginal(state.fock_matrix, u)
    prov = Provenance(mode=mode, source_label=state.label,
                      gamma0_dt=cp.gamma0_dt, dt_split=cp.dt_split)
    return JointDetectorState(rho12=rho12, det_cutoff=cap,
                              field_residual=residual, provenance=prov,
                              symmetric_mode=rho_sym)


def evolve_exact(state: FieldState, cp: CouplingParams,
                 keep_field_residual="auto") -> JointDetectorState:
    """Exact simultaneous interaction at ``theta = sqrt(2*gamma0_dt)``.

    A number state |n> scatters into ``sqrt(C(n,k)) cos^(n-k)(theta)
    (-i sin theta)^k`` amplitudes for k transferred quanta, which then split
    binomially over the detectors; mixed states follow by linearity over the
    Fock-matrix entries.  The field is traced out of ``rho12``.
    """
    return _unitary_reduction(state, cp.theta, "exact", cp, keep_field_residual)


def evolve_approximate(state: FieldState, cp: CouplingParams,
                       keep_field_residual="auto") -> JointDetectorState:
    """Weak-coupling map with per-detector amplitude exactly -i*sqrt(gamma0_dt)*alpha.

    Runs the same reduction at the amplitude-matched angle
    ``arcsin(sqrt(2*gamma0_dt))``, extending the coherent-state-mixture
    result linearly to states without a classical weight.  The retained
    field factor is the input, undepleted.
    """
    if cp.gamma0_dt > WEAK_COUPLING_MAX:
        raise ApproximationDomain(
            f"gamma0_dt={cp.gamma0_dt} outside weak-coupling domain "
            f"(<= {WEAK_COUPLING_MAX})")
    theta_eff = math.asin(math.sqrt(2.0 * cp.gamma0_dt))
    js = _unitary_reduction(state, theta_eff, "approximate", cp,
                            keep_field_residual=False)
    residual = None
    if _keep_residual(keep_field_residual, state.dim):
        residual = state.fock_matrix.copy()
    return JointDetectorState(rho12=js.rho12, det_cutoff=js.det_cutoff,
                              field_residual=residual, provenance=js.provenance,
                              symmetric_mode=js.symmetric_mode)


def evolve_approx_classical(state: FieldState, cp: CouplingParams,
                            radial_nodes: int = 96,
                            keep_field_residual="auto") -> JointDetectorState:
    """Weak-coupling evolution as a mixture over the classical weight.

    Each coherent component |alpha> sends the product state to
    ``|-i alpha sqrt(gamma0_dt)>`` on both detectors.  Coherent inputs are
    assembled exactly; thermal inputs integrate the radial weight with
    Gauss-Laguerre quadrature (the angular integral is done analytically,
    which is what makes the result block-diagonal in total photon number).

    Raises:
        NotPRepresentable: for states without a classical tag.
        QuadratureNotConverged: if doubling the radial nodes moves any
            matrix entry by more than 1e-9.
    """
    tag = state.classical_p
    if tag is None:
        raise NotPRepresentable(
            f"state {state.label!r} has no proper classical weight; "
            "use the exact path")
    if cp.gamma0_dt > WEAK_COUPLING_MAX:
        raise ApproximationDomain(
            f"gamma0_dt={cp.gamma0_dt} outside weak-coupling domain "
            f"(<= {WEAK_COUPLING_MAX})")

    if tag.kind == "coherent":
        beta_sym = -1j * tag.alpha * math.sqrt(2.0 * cp.gamma0_dt)
        rho_sym = _coherent_symmetric(beta_sym)
    else:
        rho_sym = _thermal_symmetric(tag.nbar, cp.gamma0_dt, radial_nodes)
    cap = rho_sym.shape[0] - 1
    if (cap + 1) ** 2 > MAX_PRODUCT_DIM:
        raise CutoffOverflow(
            f"detector product dimension {(cap + 1) ** 2} exceeds {MAX_PRODUCT_DIM}")
    m = _split_isometry(cap)
    rho12 = m @ rho_sym @ m.T
    rho12 = 0.5 * (rho12 + rho12.conj().T)
    _check_joint_trace(rho12, "approximate (classical mixture)")
    residual = None
    if _keep_residual(keep_field_residual, state.dim):
        residual = state.fock_matrix.copy()
    prov = Provenance(mode="approximate", source_label=state.label,
                      gamma0_dt=cp.gamma0_dt, dt_split=cp.dt_split)
    return JointDetectorState(rho12=rho12, det_cutoff=cap,
                              field_residual=residual, provenance=prov,
                              symmetric_mode=rho_sym)


def _coherent_symmetric(beta_sym: complex) -> np.ndarray:
    """Symmetric-mode matrix for equal coherent detector amplitudes."""
    energy = abs(beta_sym) ** 2
    probe = int(energy + 12.0 * math.sqrt(energy + 1.0) + 30)
    amps = _coherent_amplitudes(beta_sym, probe)
    cum = np.cumsum(np.abs(amps) ** 2)
    cap = int(np.searchsorted(cum, 1.0 - DETECTOR_TAIL))
    if cap >= probe:
        raise CutoffOverflow("coherent detector amplitude too large to truncate")
    vec = amps[:cap + 1]
    return np.outer(vec, vec.conj())


def _thermal_symmetric(nbar: float, gamma0_dt: float, radial_nodes: int) -> np.ndarray:
    """Phase-averaged symmetric-mode matrix for a thermal source (diagonal)."""
    n_u = nbar * gamma0_dt  # mean of u = |beta|^2 under the classical weight
    if n_u == 0.0:
        return np.array([[1.0 + 0j]])
    mean_sym = 2.0 * n_u
    ratio = mean_sym / (1.0 + mean_sym)
    cap = max(1, int(math.ceil(math.log(DETECTOR_TAIL) / math.log(ratio))))
    q1 = _thermal_occupation(n_u, cap, radial_nodes)
    q2 = _thermal_occupation(n_u, cap, 2 * radial_nodes)
    if float(np.max(np.abs(q1 - q2))) > 1e-9:
        raise QuadratureNotConverged(
            f"radial quadrature with {radial_nodes} nodes not converged")
    return np.diag(q2.astype(complex))


def _laggauss(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Laguerre rule by Golub-Welsch (stable at high order)."""
    k = np.arange(nodes, dtype=float)
    jac = np.diag(2.0 * k + 1.0) + np.diag(k[1:], 1) + np.diag(k[1:], -1)
    vals, vecs = np.linalg.eigh(jac)
    return vals, vecs[0] ** 2


def _thermal_occupation(n_u: float, cap: int, nodes: int) -> np.ndarray:
    """q_k = E[exp(-2u) (2u)^k / k!] with u exponential of mean ``n_u``."""
    t, w = _laggauss(nodes)
    u = n_u * t
    k = np.arange(cap + 1)[:, None]
    log_terms = (-2.0 * u)[None, :] + k * np.log(2.0 * u)[None, :]
    log_terms -= np.array([math.lgamma(float(x) + 1.0) for x in k[:, 0]])[:, None]
    return (np.exp(log_terms) * w[None, :]).sum(axis=1)


def evolve_sequential(state: FieldState, cp: CouplingParams,
                      keep_field_residual="auto") -> JointDetectorState:
    """Detector 1 interacts first, then detector 2, each at sqrt(gamma0_dt_i).

    The field stays in play between the two exchanges, so detector 1 sees the
    undepleted field and picks up slightly more than detector 2.  Memory
    scales with (field dim x detector-1 dim)^2; the path guards itself with
    CutoffOverflow for large inputs.
    """
    if cp.dt_split is None:
        raise ValueError("sequential evolution requires dt_split")
    g1, g2 = cp.dt_split
    th1 = math.sqrt(g1)
    th2 = math.sqrt(g2)
    rho = state.fock_matrix
    d = state.dim - 1

    u1, k1, _ = _bs_columns(rho, th1, DETECTOR_TAIL / 2.0)
    if (d + 1) * (k1 + 1) > MAX_PRODUCT_DIM:
        raise CutoffOverflow(
            f"sequential intermediate dimension {(d + 1) * (k1 + 1)} exceeds "
            f"{MAX_PRODUCT_DIM}")
    phase1 = (-1j) ** np.arange(k1 + 1)
    s1 = np.zeros((d + 1, k1 + 1, d + 1, k1 + 1), dtype=complex)
    for k in range(k1 + 1):
        for kp in range(k1 + 1):
            block = rho[k:, kp:] * np.outer(u1[k:, k], u1[kp:, kp])
            s1[:d + 1 - k, k, :d + 1 - kp, kp] = (
                phase1[k] * np.conj(phase1[kp]) * block)

    # Field marginal between the stages drives the stage-2 cutoff choice.
    marg1 = np.real(np.einsum("lkmk->lm", s1).diagonal()).copy()
    marg1_mat = np.diag(marg1)
    u2, k2, _ = _bs_columns(marg1_mat, th2, DETECTOR_TAIL / 2.0)
    phase2 = (-1j) ** np.arange(k2 + 1)

    rho_t = np.zeros((k1 + 1, k2 + 1, k1 + 1, k2 + 1), dtype=complex)
    for q in range(k2 + 1):
        for qp in range(k2 + 1):
            off = qp - q
            hi = d - off if off > 0 else d
            if hi < q:
                continue
            l_idx = np.arange(q, hi + 1)
            lp = l_idx + off
            w = u2[l_idx, q] * u2[lp, qp] * phase2[q] * np.conj(phase2[qp])
            gathered = s1[l_idx, :, lp, :]
            rho_t[:, q, :, qp] = np.tensordot(w, gathered, axes=(0, 0))

    cap = max(k1, k2)
    if (cap + 1) ** 2 > MAX_PRODUCT_DIM:
        raise CutoffOverflow(
            f"detector product dimension {(cap + 1) ** 2} exceeds {MAX_PRODUCT_DIM}")
    full = np.zeros((cap + 1, cap + 1, cap + 1, cap + 1), dtype=complex)
    full[:k1 + 1, :k2 + 1, :k1 + 1, :k2 + 1] = rho_t
    rho12 = full.reshape((cap + 1) ** 2, (cap + 1) ** 2)
    rho12 = 0.5 * (rho12 + rho12.conj().T)
    _check_joint_trace(rho12, "sequential")

    residual = None
    if _keep_residual(keep_field_residual, state.dim):
        t1 = np.einsum("lkmk->lm", s1)
        rf = np.zeros((d + 1, d + 1), dtype=complex)
        for q in range(k2 + 1):
            w = u2[q:, q]
            rf[:d + 1 - q, :d + 1 - q] += t1[q:, q:] * np.outer(w, w)
        residual = 0.5 * (rf + rf.conj().T)
    prov = Provenance(mode="sequential", source_label=state.label,
                      gamma0_dt=cp.gamma0_dt, dt_split=cp.dt_split)
    return JointDetectorState(rho12=rho12, det_cutoff=cap,
                              field_residual=residual, provenance=prov,
                              symmetric_mode=None)


def evolve(state: FieldState, cp: CouplingParams,
           keep_field_residual="auto") -> JointDetectorState:
    """Dispatch on ``cp.mode``; approximate prefers the classical mixture."""
    if cp.mode == "exact":
        return evolve_exact(state, cp, keep_field_residual)
    if cp.mode == "sequential":
        return evolve_sequential(state, cp, keep_field_residual)
    if state.classical_p is not None:
        return evolve_approx_classical(state, cp,
                                       keep_field_residual=keep_field_residual)
    return evolve_approximate(state, cp, keep_field_residual)


def fock_click_pmf_closed_form(n: int, theta: float) -> dict[tuple[int, int], float]:
    """Closed-form joint click pmf for a number state input.

    p(n1, n2) = C(n, s) sin^(2s) cos^(2(n-s)) * C(s, n1) / 2^s with
    s = n1 + n2.  Fast path used to cross-check the brute-force oracle and
    the matrix pipeline; evaluated in log space so large n stays finite.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if not (0.0 < theta < math.pi / 2.0):
        raise ValueError(f"theta must lie in (0, pi/2), got {theta}")
    ln_sin2 = 2.0 * math.log(math.sin(theta))
    ln_cos2 = 2.0 * math.log(math.cos(theta))
    ln2 = math.log(2.0)
    pmf: dict[tuple[int, int], float] = {}
    for s in range(n + 1):
        base = (math.lgamma(n + 1) - math.lgamma(s + 1) - math.lgamma(n - s + 1)
                + s * ln_sin2 + (n - s) * ln_cos2 - s * ln2)
        for n1 in range(s + 1):
            split = (math.lgamma(s + 1) - math.lgamma(n1 + 1)
                     - math.lgamma(s - n1 + 1))
            pmf[(n1, s - n1)] = math.exp(base + split)
    return pmf


# ---------------------------------------------------------------------------
# Observables of the joint detector state.

def detector_occupancies(js: JointDetectorState) -> tuple[float, float]:
    """Mean photon numbers (<b1^dag b1>, <b2^dag b2>)."""
    k = js.dim
    diag = np.real(np.diagonal(js.rho12)).reshape(k, k)
    n = np.arange(k)
    return float(np.dot(n, diag.sum(axis=1))), float(np.dot(n, diag.T.sum(axis=1)))


def _first_moment(t: np.ndarray, axis: int) -> complex:
    """<b_axis> from the rho12 tensor R[m1, m2, n1, n2]."""
    k = t.shape[0]
    root = np.sqrt(np.arange(1, k))
    if axis == 0:
        # sum_{m1>=1, m2} sqrt(m1) R[m1, m2, m1-1, m2]
        block = np.einsum("mjmj->mj", t[1:, :, 0:k - 1, :])
        return complex(np.dot(root, block.sum(axis=1)))
    block = np.einsum("jmjm->jm", t[:, 1:, :, 0:k - 1])
    return complex(np.dot(root, block.sum(axis=0)))


def mean_amplitudes(js: JointDetectorState) -> tuple[complex, complex]:
    """(<b1>, <b2>)."""
    t = js.tensor()
    return _first_moment(t, 0), _first_moment(t, 1)


def _second_moment(t: np.ndarray, axis: int) -> complex:
    """<b_axis^2> from the rho12 tensor."""
    k = t.shape[0]
    if k < 3:
        return 0j
    m = np.arange(2, k)
    root = np.sqrt(m * (m - 1))
    if axis == 0:
        block = np.einsum("mjmj->mj", t[2:, :, 0:k - 2, :])
        return complex(np.dot(root, block.sum(axis=1)))
    block = np.einsum("jmjm->jm", t[:, 2:, :, 0:k - 2])
    return complex(np.dot(root, block.sum(axis=0)))


def cross_mode_moment(js: JointDetectorState) -> complex:
    """<b1^dag b2>."""
    t = js.tensor()
    k = js.dim
    if k < 2:
        return 0j
    m1 = np.arange(0, k - 1)
    m2 = np.arange(1, k)
    weights = np.sqrt((m1[:, None] + 1.0) * m2[None, :])
    block = np.einsum("abab->ab", t[0:k - 1, 1:, 1:, 0:k - 1])
    return complex(np.sum(weights * block))


def quadrature_stats(js: JointDetectorState, detector: int) -> tuple[float, float]:
    """(mean, variance) of X = (b + b^dag)/sqrt(2) for detector 1 or 2."""
    axis = detector - 1
    t = js.tensor()
    b = _first_moment(t, axis)
    b2 = _second_moment(t, axis)
    occ = detector_occupancies(js)[axis]
    mean = math.sqrt(2.0) * b.real
    second = 0.5 + occ + b2.real
    return mean, second - mean**2


def reduced_detector(js: JointDetectorState, detector: int) -> np.ndarray:
    """Single-detector marginal matrix (partial trace over the other)."""
    t = js.tensor()
    if detector == 1:
        return np.einsum("mjnj->mn", t)
    return np.einsum("jmjn->mn", t)


# ---------------------------------------------------------------------------
# Distances between evolution outputs.

def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """(1/2)||a - b||_1 for Hermitian matrices of equal dimension."""
    if a.shape != b.shape:
        n = max(a.shape[0], b.shape[0])
        a = _embed(a, n)
        b = _embed(b, n)
    vals = np.linalg.eigvalsh(a - b)
    return 0.5 * float(np.abs(vals).sum())


def _embed(mat: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n, n), dtype=complex)
    out[:mat.shape[0], :mat.shape[1]] = mat
    return out


def embed_joint(rho12: np.ndarray, old_cutoff: int, new_cutoff: int) -> np.ndarray:
    """Grow a product-basis joint matrix to a larger per-detector cutoff.

    Flattened product indices interleave the two detector labels, so the
    embedding must go through the rank-4 tensor; corner-embedding the flat
    matrix would scramble the basis.
    """
    if new_cutoff < old_cutoff:
        raise ValueError("cannot shrink a joint matrix")
    k0, k1 = old_cutoff + 1, new_cutoff + 1
    t = rho12.reshape(k0, k0, k0, k0)
    out = np.zeros((k1, k1, k1, k1), dtype=complex)
    out[:k0, :k0, :k0, :k0] = t
    return out.reshape(k1 * k1, k1 * k1)


def align_joint(js_a: JointDetectorState,
                js_b: JointDetectorState) -> tuple[np.ndarray, np.ndarray]:
    """The two rho12 matrices embedded at a common detector cutoff."""
    cap = max(js_a.det_cutoff, js_b.det_cutoff)
    return (embed_joint(js_a.rho12, js_a.det_cutoff, cap),
            embed_joint(js_b.rho12, js_b.det_cutoff, cap))


def _purity(mat: np.ndarray) -> float:
    return float(np.real(np.sum(mat * mat.T)))


def joint_state_trace_distance(js_a: JointDetectorState,
                               js_b: JointDetectorState) -> float:
    """Trace distance between retained joint (field x detectors) states.

    Both outputs must carry a field residual.  When every factor is pure the
    products are pure, and the distance is sqrt(1 - F) with F the product of
    factor overlaps; otherwise the kron difference is diagonalised directly
    (guarded by dimension).
    """
    if js_a.field_residual is None or js_b.field_residual is None:
        raise ValueError("both joint states must retain a field residual")
    fa, fb = js_a.field_residual, js_b.field_residual
    da, db = align_joint(js_a, js_b)
    pure = all(_purity(m) > 1.0 - 1e-9 for m in (fa, fb, da, db))
    if pure:
        nf = max(fa.shape[0], fb.shape[0])
        overlap_f = float(np.real(np.sum(_embed(fa, nf) * _embed(fb, nf).T)))
        overlap_d = float(np.real(np.sum(da * db.T)))
        fidelity = max(0.0, overlap_f * overlap_d)
        return math.sqrt(max(0.0, 1.0 - fidelity))
    nf = max(fa.shape[0], fb.shape[0])
    if nf * da.shape[0] > 1500:
        raise ValueError("joint dimension too large for direct trace distance")
    full_a = np.kron(_embed(fa, nf), da)
    full_b = np.kron(_embed(fb, nf), db)
    return trace_distance(full_a, full_b)
