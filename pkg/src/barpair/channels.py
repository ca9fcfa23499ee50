"""Measurement distributions and reproducible samplers for the detector pair.

Three readout channels are supported on a :class:`JointDetectorState`:

* click      -- joint photon-number pmf, sampled by inverse CDF;
* homodyne   -- joint quadrature density on a uniform grid, sampled by
  marginal-then-conditional inverse CDF with within-cell interpolation;
* heterodyne -- joint phase-space (Husimi) density, sampled by rejection
  from a Gaussian envelope.

Samplers are deterministic in (seed, generator_id, count); a batch may be
split into independent streams seeded by (seed, stream index), and the
merged batch is the concatenation in stream order, so results do not depend
on how many workers consumed the streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EnvelopeTooTight, GridTooSmall
from .evolution import (JointDetectorState, _split_isometry,
                        detector_occupancies, mean_amplitudes,
                        quadrature_stats)

VACUUM_SIGMA = math.sqrt(0.5)
BOUNDARY_MASS_TOL = 1e-8
MASS_TOL = 1e-6
_CLICK_KEY = 1
_HOMODYNE_KEY = 2
_HETERODYNE_KEY = 3
_PROBE_KEY = 999983


@dataclass(frozen=True)
class GridAxis:
    """Uniform cell grid: cell i spans [lo + i*step, lo + (i+1)*step)."""

    lo: float
    step: float
    count: int

    @property
    def hi(self) -> float:
        return self.lo + self.step * self.count

    def centers(self) -> np.ndarray:
        return self.lo + (np.arange(self.count) + 0.5) * self.step


@dataclass(frozen=True)
class GridPdf:
    """Joint quadrature density sampled at cell centers."""

    axis1: GridAxis
    axis2: GridAxis
    values: np.ndarray
    total_mass: float

    def __post_init__(self):
        self.values.setflags(write=False)

    def cell_area(self) -> float:
        return self.axis1.step * self.axis2.step

    def marginal(self, detector: int) -> np.ndarray:
        if detector == 1:
            return self.values.sum(axis=1) * self.axis2.step
        return self.values.sum(axis=0) * self.axis1.step

    def means(self) -> tuple[float, float]:
        c1 = self.axis1.centers()
        c2 = self.axis2.centers()
        w = self.values * self.cell_area() / self.total_mass
        return float(np.dot(c1, w.sum(axis=1))), float(np.dot(c2, w.sum(axis=0)))

    def covariance(self) -> float:
        m1, m2 = self.means()
        c1 = self.axis1.centers() - m1
        c2 = self.axis2.centers() - m2
        w = self.values * self.cell_area() / self.total_mass
        return float(c1 @ w @ c2)

    def variances(self) -> tuple[float, float]:
        m1, m2 = self.means()
        c1 = self.axis1.centers() - m1
        c2 = self.axis2.centers() - m2
        w = self.values * self.cell_area() / self.total_mass
        return float(np.dot(c1**2, w.sum(axis=1))), float(np.dot(c2**2, w.sum(axis=0)))


@dataclass(frozen=True)
class ClickPmf:
    """Joint click distribution over lexicographic outcomes (n1, n2)."""

    outcomes: np.ndarray  # (M, 2) int64, lexicographic
    probs: np.ndarray     # (M,) float64, sums to trace(rho12)

    def __post_init__(self):
        self.outcomes.setflags(write=False)
        self.probs.setflags(write=False)

    def as_dict(self) -> dict[tuple[int, int], float]:
        return {(int(a), int(b)): float(p)
                for (a, b), p in zip(self.outcomes, self.probs)}

    def total(self) -> float:
        return float(self.probs.sum())


@dataclass(frozen=True)
class SampleBatch:
    """Seeded Monte-Carlo outcomes for one channel.

    ``data`` is (count, 2): integer pairs for clicks, real pairs for
    homodyne, complex pairs for heterodyne.  Regenerating with the same
    (seed, generator_id, count) reproduces the batch bit-exactly.
    """

    channel: str
    data: np.ndarray
    seed: int
    generator_id: str
    count: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data.setflags(write=False)
        if self.count != self.data.shape[0]:
            raise ValueError("count does not match data length")


def _stream_sizes(count: int, streams: int) -> list[int]:
    base = count // streams
    return [base + (1 if s < count % streams else 0) for s in range(streams)]


def _stream_rng(seed: int, channel_key: int, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(channel_key, stream))
    return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------------------
# Click channel.

def click_pmf(js: JointDetectorState) -> ClickPmf:
    """p(n1, n2) = <n1, n2| rho12 |n1, n2>."""
    k = js.dim
    diag = np.real(np.diagonal(js.rho12)).copy()
    if float(diag.min()) < -1e-14:
        raise ValueError(f"click pmf has a negative entry {diag.min():.3e}")
    np.clip(diag, 0.0, None, out=diag)
    grid = np.indices((k, k)).reshape(2, -1).T.astype(np.int64)
    return ClickPmf(outcomes=grid, probs=diag)


def sample_clicks(pmf: ClickPmf, count: int, seed: int,
                  streams: int = 1) -> SampleBatch:
    """Inverse-CDF draws over the lexicographically ordered outcomes."""
    if count < 1:
        raise ValueError("count must be >= 1")
    total = pmf.total()
    if abs(total - 1.0) > MASS_TOL:
        raise ValueError(f"pmf not normalised: total={total!r}")
    cdf = np.cumsum(pmf.probs) / total
    parts = []
    for s, size in enumerate(_stream_sizes(count, streams)):
        if size == 0:
            continue
        rng = _stream_rng(seed, _CLICK_KEY, s)
        u = rng.random(size)
        idx = np.searchsorted(cdf, u, side="right")
        parts.append(pmf.outcomes[idx])
    data = np.concatenate(parts, axis=0)
    return SampleBatch(channel="click", data=data, seed=seed,
                       generator_id=f"click-invcdf-v1/s{streams}", count=count)


# ---------------------------------------------------------------------------
# Homodyne channel.

def _hermite_functions(xs: np.ndarray, levels: int) -> np.ndarray:
    """Oscillator eigenfunctions psi_n(x) (vacuum variance 1/2), shape (G, levels)."""
    out = np.zeros((len(xs), levels))
    out[:, 0] = math.pi ** (-0.25) * np.exp(-0.5 * xs**2)
    if levels > 1:
        out[:, 1] = math.sqrt(2.0) * xs * out[:, 0]
    for n in range(1, levels - 1):
        out[:, n + 1] = (math.sqrt(2.0 / (n + 1)) * xs * out[:, n]
                         - math.sqrt(n / (n + 1)) * out[:, n - 1])
    return out


def _eig_pairs(js: JointDetectorState) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvector tensors (R, K+1, K+1) of rho12.

    Uses the cached symmetric-mode matrix when present (the antisymmetric
    mode is in vacuum there), which keeps the rank at K+1.
    """
    k = js.dim
    if js.symmetric_mode is not None:
        vals, vecs = np.linalg.eigh(js.symmetric_mode)
        vecs = _split_isometry(k - 1) @ vecs
    else:
        vals, vecs = np.linalg.eigh(js.rho12)
    keep = vals > max(1e-15, 1e-15 * float(vals.max()))
    vals = vals[keep]
    tensors = vecs[:, keep].T.reshape(-1, k, k)
    return vals, tensors


def default_grid(js: JointDetectorState, points: int = 512,
                 pad_sigmas: float = 8.0) -> tuple[GridAxis, GridAxis]:
    """Axes centred on the detector means, padded by ``pad_sigmas`` widths."""
    axes = []
    for det in (1, 2):
        mean, var = quadrature_stats(js, det)
        pad = pad_sigmas * max(math.sqrt(max(var, 0.0)), VACUUM_SIGMA)
        lo = mean - pad
        step = 2.0 * pad / points
        axes.append(GridAxis(lo=lo, step=step, count=points))
    return axes[0], axes[1]


def homodyne_pdf(js: JointDetectorState, grid=None, points: int = 512,
                 pad_sigmas: float = 8.0, lo_phase: float = 0.0) -> GridPdf:
    """Joint density of the X quadratures of the two detectors.

    ``p(x1, x2)`` is assembled from the eigen-decomposition of ``rho12``
    with oscillator eigenfunctions evaluated by upward recurrence.  The
    default local-oscillator phase measures X = (b + b^dag)/sqrt(2), which
    reads the imaginary part of the source amplitude under the -i absorption
    phase; ``lo_phase`` rotates to (b e^{-i phi} + h.c.)/sqrt(2) and exists
    for exploration only.

    Raises:
        GridTooSmall: if the grid fails to cover the displaced region plus
            eight vacuum widths, or if boundary cells hold more than 1e-8
            probability mass.
    """
    if grid is None:
        ax1, ax2 = default_grid(js, points=points, pad_sigmas=pad_sigmas)
    else:
        ax1, ax2 = (g if isinstance(g, GridAxis)
                    else GridAxis(lo=float(g[0]),
                                  step=(float(g[1]) - float(g[0])) / int(g[2]),
                                  count=int(g[2]))
                    for g in grid)
    for det, ax in ((1, ax1), (2, ax2)):
        mean, _ = quadrature_stats(js, det)
        span = 8.0 * VACUUM_SIGMA
        if ax.lo > mean - span or ax.hi < mean + span:
            raise GridTooSmall(
                f"axis {det} [{ax.lo:.3f}, {ax.hi:.3f}] must cover the mean "
                f"{mean:.3f} by at least eight vacuum widths")

    vals, tensors = _eig_pairs(js)
    if lo_phase != 0.0:
        k = js.dim
        phase = np.exp(-1j * lo_phase * np.arange(k))
        tensors = tensors * phase[None, :, None] * phase[None, None, :]
    psi1 = _hermite_functions(ax1.centers(), js.dim)
    psi2 = _hermite_functions(ax2.centers(), js.dim)
    p = np.zeros((ax1.count, ax2.count))
    for lam, a in zip(vals, tensors):
        amp = psi1 @ a @ psi2.T
        p += lam * np.abs(amp) ** 2

    mass = float(p.sum()) * ax1.step * ax2.step
    if abs(mass - 1.0) > MASS_TOL:
        raise GridTooSmall(f"grid captures mass {mass!r}, expected 1 within {MASS_TOL}")
    boundary = (p[0, :].sum() + p[-1, :].sum() + p[:, 0].sum() + p[:, -1].sum())
    boundary *= ax1.step * ax2.step
    if boundary > BOUNDARY_MASS_TOL:
        raise GridTooSmall(f"boundary cells hold mass {boundary:.3e}")
    return GridPdf(axis1=ax1, axis2=ax2, values=p, total_mass=mass)


def sample_homodyne(pdf: GridPdf, count: int, seed: int,
                    streams: int = 1) -> SampleBatch:
    """Draw x1 from the marginal, then x2 from the conditional slice.

    Both inverse CDFs interpolate linearly within a cell, i.e. outcomes are
    uniform inside the selected cell.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    v = pdf.values
    g1, g2 = v.shape
    w1 = v.sum(axis=1)
    cdf1 = np.cumsum(w1)
    cdf1 /= cdf1[-1]
    rows = np.cumsum(v, axis=1)
    row_tot = rows[:, -1].copy()
    safe = row_tot > 0
    rows_norm = np.where(safe[:, None], rows / np.where(safe, row_tot, 1.0)[:, None], 1.0)
    flat = (rows_norm + np.arange(g1)[:, None]).ravel()

    parts = []
    for s, size in enumerate(_stream_sizes(count, streams)):
        if size == 0:
            continue
        rng = _stream_rng(seed, _HOMODYNE_KEY, s)
        u1 = rng.random(size)
        u2 = rng.random(size)
        i = np.searchsorted(cdf1, u1, side="right")
        prev1 = np.where(i > 0, cdf1[np.maximum(i - 1, 0)], 0.0)
        den1 = cdf1[i] - prev1
        frac1 = np.where(den1 > 0, (u1 - prev1) / np.where(den1 > 0, den1, 1.0), 0.5)
        x1 = pdf.axis1.lo + (i + frac1) * pdf.axis1.step

        j = np.searchsorted(flat, i + u2, side="right") - i * g2
        j = np.clip(j, 0, g2 - 1)
        prev2 = np.where(j > 0, rows_norm[i, np.maximum(j - 1, 0)], 0.0)
        den2 = rows_norm[i, j] - prev2
        frac2 = np.where(den2 > 0, (u2 - prev2) / np.where(den2 > 0, den2, 1.0), 0.5)
        x2 = pdf.axis2.lo + (j + frac2) * pdf.axis2.step
        parts.append(np.column_stack([x1, x2]))
    data = np.concatenate(parts, axis=0)
    return SampleBatch(channel="homodyne", data=data, seed=seed,
                       generator_id=f"homodyne-grid-v1/s{streams}", count=count)


# ---------------------------------------------------------------------------
# Heterodyne channel.

def _coherent_rows(betas: np.ndarray, levels: int) -> np.ndarray:
    """E[b, n] = <n|beta_b> for n < levels."""
    out = np.zeros((len(betas), levels), dtype=complex)
    out[:, 0] = np.exp(-0.5 * np.abs(betas) ** 2)
    for n in range(1, levels):
        out[:, n] = out[:, n - 1] * betas / math.sqrt(n)
    return out


def _husimi_batch(b1: np.ndarray, b2: np.ndarray, vals: np.ndarray,
                  tensors: np.ndarray, levels: int) -> np.ndarray:
    e1 = _coherent_rows(b1, levels)
    e2 = _coherent_rows(b2, levels)
    q = np.zeros(len(b1))
    for lam, a in zip(vals, tensors):
        z = ((e1 @ a.conj()) * e2).sum(axis=1)
        q += lam * np.abs(z) ** 2
    return q / math.pi**2


def heterodyne_density(js: JointDetectorState, beta1: complex,
                       beta2: complex) -> float:
    """Joint phase-space density <beta1, beta2| rho12 |beta1, beta2> / pi^2."""
    vals, tensors = _eig_pairs(js)
    q = _husimi_batch(np.array([beta1], dtype=complex),
                      np.array([beta2], dtype=complex), vals, tensors, js.dim)
    return float(q[0])


def sample_heterodyne(js: JointDetectorState, count: int, seed: int,
                      streams: int = 1, envelope_safety: float = 1.5,
                      probe_count: int = 4096,
                      chunk: int = 131072) -> SampleBatch:
    """Rejection sampling of the joint Husimi density.

    The proposal is a product of complex Gaussians centred on the mean
    detector amplitudes with per-mode variance 1 + max occupancy, the
    occupancy measured about the proposal centre (a displaced state only
    widens the envelope by its fluctuation, not by its displacement).  The
    envelope constant is calibrated on a seeded probe set and inflated by
    ``envelope_safety``.  Any proposal where the target exceeds the envelope
    raises EnvelopeTooTight.  The achieved acceptance rate is recorded in
    ``meta``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    vals, tensors = _eig_pairs(js)
    levels = js.dim
    c1, c2 = mean_amplitudes(js)
    occ1, occ2 = detector_occupancies(js)
    centred = max(occ1 - abs(c1) ** 2, occ2 - abs(c2) ** 2, 0.0)
    s_var = 1.0 + centred

    def propose(rng, size):
        z = rng.standard_normal((size, 4))
        b1 = c1 + math.sqrt(s_var / 2.0) * (z[:, 0] + 1j * z[:, 1])
        b2 = c2 + math.sqrt(s_var / 2.0) * (z[:, 2] + 1j * z[:, 3])
        return b1, b2

    def proposal_density(b1, b2):
        expo = (np.abs(b1 - c1) ** 2 + np.abs(b2 - c2) ** 2) / s_var
        return np.exp(-expo) / (math.pi**2 * s_var**2)

    probe_rng = _stream_rng(seed, _HETERODYNE_KEY, _PROBE_KEY)
    pb1, pb2 = propose(probe_rng, probe_count)
    pb1 = np.concatenate([pb1, [c1]])
    pb2 = np.concatenate([pb2, [c2]])
    ratios = (_husimi_batch(pb1, pb2, vals, tensors, levels)
              / proposal_density(pb1, pb2))
    envelope = envelope_safety * float(ratios.max())
    if envelope <= 0:
        raise EnvelopeTooTight("probe ratios all vanish; degenerate state")

    parts = []
    proposed = 0
    accepted = 0
    for s, size in enumerate(_stream_sizes(count, streams)):
        if size == 0:
            continue
        rng = _stream_rng(seed, _HETERODYNE_KEY, s)
        got = []
        have = 0
        while have < size:
            b1, b2 = propose(rng, chunk)
            q = _husimi_batch(b1, b2, vals, tensors, levels)
            g = proposal_density(b1, b2)
            ratio = q / (envelope * g)
            if float(ratio.max()) > 1.0 + 1e-9:
                raise EnvelopeTooTight(
                    f"target exceeded envelope by factor {float(ratio.max()):.6f}")
            u = rng.random(chunk)
            keep = u < ratio
            proposed += chunk
            accepted += int(keep.sum())
            got.append(np.column_stack([b1[keep], b2[keep]]))
            have += int(keep.sum())
        parts.append(np.concatenate(got, axis=0)[:size])
    data = np.concatenate(parts, axis=0)
    return SampleBatch(channel="heterodyne", data=data, seed=seed,
                       generator_id=f"het-reject-v1/s{streams}", count=count,
                       meta={"acceptance_rate": accepted / proposed,
                             "envelope": envelope})


# ---------------------------------------------------------------------------
# CSV serialization.

CSV_HEADER = "channel,seed,index,out1_a,out1_b,out2_a,out2_b"


def write_batch_csv(batch: SampleBatch, path) -> None:
    """Serialize a batch to the stable 7-column CSV layout."""
    lines = [CSV_HEADER]
    if batch.channel == "click":
        for i, (a, b) in enumerate(batch.data):
            lines.append(f"click,{batch.seed},{i},{int(a)},,{int(b)},")
    elif batch.channel == "homodyne":
        for i, (a, b) in enumerate(batch.data):
            lines.append(f"homodyne,{batch.seed},{i},{float(a)!r},,{float(b)!r},")
    elif batch.channel == "heterodyne":
        for i, (a, b) in enumerate(batch.data):
            lines.append(f"heterodyne,{batch.seed},{i},"
                         f"{float(a.real)!r},{float(a.imag)!r},"
                         f"{float(b.real)!r},{float(b.imag)!r}")
    else:
        raise ValueError(f"unknown channel {batch.channel!r}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_batch_csv(path) -> SampleBatch:
    """Load a batch written by :func:`write_batch_csv`."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header!r}")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    if not rows:
        raise ValueError("empty batch file")
    channel = rows[0][0]
    seed = int(rows[0][1])
    if channel == "click":
        data = np.array([[int(r[3]), int(r[5])] for r in rows], dtype=np.int64)
    elif channel == "homodyne":
        data = np.array([[float(r[3]), float(r[5])] for r in rows])
    elif channel == "heterodyne":
        data = np.array([[complex(float(r[3]), float(r[4])),
                          complex(float(r[5]), float(r[6]))] for r in rows])
    else:
        raise ValueError(f"unknown channel {channel!r}")
    return SampleBatch(channel=channel, data=data, seed=seed,
                       generator_id="csv-import", count=len(rows))
