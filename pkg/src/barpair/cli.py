"""Batch front end: configure, run, estimate, decide, and write reports.

One experiment = one source state, one coupling, one seed, and a set of
readout channels.  Configuration lives in a single JSON document; every leaf
has a matching command-line flag that overrides the file value.  Outputs are
sample CSVs, a versioned ``report.json``, a ``manifest.json`` with content
hashes, and optional SVG summaries.

Exit codes: 0 success, 2 configuration error, 3 numerical-domain error,
4 partial failure (some channels failed, results for the rest written).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .channels import (click_pmf, homodyne_pdf, sample_clicks,
                       sample_heterodyne, sample_homodyne, write_batch_csv)
from .correlators import (CorrelatorReport, analytic_click_covariance,
                          analytic_heterodyne_cross,
                          analytic_heterodyne_re_covariance,
                          analytic_homodyne_covariance, analytic_R,
                          combine_inverse_variance, estimate_covariance,
                          estimate_g2_from_clicks, estimate_g2_ratio,
                          g1_cross, make_report, null_test)
from .errors import (ApproximationDomain, BarpairError, ConfigError,
                     CutoffOverflow, NonConvergedTail, NonFinite,
                     NotPRepresentable)
from .evolution import CouplingParams, evolve, fock_click_pmf_closed_form
from .field_states import (compute_moments, make_coherent, make_fock,
                           make_squeezed, make_thermal)
from .oracles import oracle_click_pmf, oracle_gaussian_joint
from .rates import DetectorSpec, gamma0_rate, required_occupancy
from .svg_report import heatmap_svg, histogram_svg

CHANNELS = ("click", "homodyne", "heterodyne")
FORMATS = ("csv", "json", "svg")
LOW_COINCIDENCE_FRACTION = 0.01
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Canonical experiment description; round-trips through JSON."""

    state_kind: str
    state_params: dict
    seed: int
    samples: int = 100000
    gamma0_dt: float | None = None
    detector: dict | None = None
    evolution: str = "exact"
    dt_split: tuple[float, float] | None = None
    channels: tuple[str, ...] = CHANNELS
    z_threshold: float = 5.0
    grid_points: int = 512
    grid_pad: float = 8.0
    out_dir: str | None = None
    formats: tuple[str, ...] = ("csv", "json")

    def to_dict(self) -> dict:
        doc = {
            "state": {"kind": self.state_kind, **self.state_params},
            "seed": self.seed,
            "samples": self.samples,
            "coupling": ({"gamma0_dt": self.gamma0_dt}
                         if self.detector is None else {"detector": self.detector}),
            "evolution": self.evolution,
            "channels": list(self.channels),
            "z_threshold": self.z_threshold,
            "grid": {"points": self.grid_points, "pad_sigmas": self.grid_pad},
            "output": {"directory": self.out_dir, "formats": list(self.formats)},
        }
        if self.dt_split is not None:
            doc["dt_split"] = list(self.dt_split)
        return doc

    def sha256(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True,
                             separators=(",", ":")).encode()
        return hashlib.sha256(payload).hexdigest()


def config_from_dict(doc: dict) -> ExperimentConfig:
    try:
        state = dict(doc["state"])
        kind = state.pop("kind")
        if "seed" not in doc:
            raise KeyError("seed")
        seed = int(doc["seed"])
        coupling = doc.get("coupling", {})
        gamma0_dt = coupling.get("gamma0_dt")
        detector = coupling.get("detector")
        if gamma0_dt is None and detector is None:
            raise KeyError("coupling.gamma0_dt or coupling.detector")
        channels = tuple(doc.get("channels", list(CHANNELS)))
        grid = doc.get("grid", {})
        output = doc.get("output", {})
        dt_split = doc.get("dt_split")
        cfg = ExperimentConfig(
            state_kind=kind,
            state_params=_canonical_state_params(kind, state),
            seed=seed,
            samples=int(doc.get("samples", 100000)),
            gamma0_dt=None if gamma0_dt is None else float(gamma0_dt),
            detector=detector,
            evolution=doc.get("evolution", "exact"),
            dt_split=None if dt_split is None else (float(dt_split[0]),
                                                    float(dt_split[1])),
            channels=channels,
            z_threshold=float(doc.get("z_threshold", 5.0)),
            grid_points=int(grid.get("points", 512)),
            grid_pad=float(grid.get("pad_sigmas", 8.0)),
            out_dir=output.get("directory"),
            formats=tuple(output.get("formats", ["csv", "json"])),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ConfigError(f"missing or malformed config field: {exc}") from exc
    _validate_config(cfg)
    return cfg


def _canonical_state_params(kind: str, params: dict) -> dict:
    def as_pair(value):
        if isinstance(value, (list, tuple)):
            return [float(value[0]), float(value[1])]
        z = complex(value)
        return [z.real, z.imag]

    if kind == "coherent":
        return {"alpha": as_pair(params["alpha"])}
    if kind == "fock":
        return {"n": int(params["n"])}
    if kind == "thermal":
        return {"nbar": float(params["nbar"])}
    if kind == "squeezed":
        return {"r": float(params["r"]), "phi": float(params["phi"]),
                "alpha": as_pair(params.get("alpha", [0.0, 0.0]))}
    raise ConfigError(f"unknown state kind {kind!r}")


def _validate_config(cfg: ExperimentConfig) -> None:
    if cfg.samples < 100:
        raise ConfigError("samples must be at least 100")
    if not cfg.channels:
        raise ConfigError("channels must be non-empty")
    for ch in cfg.channels:
        if ch not in CHANNELS:
            raise ConfigError(f"unknown channel {ch!r}")
    for fmt in cfg.formats:
        if fmt not in FORMATS:
            raise ConfigError(f"unknown output format {fmt!r}")
    if cfg.evolution not in ("exact", "sequential", "approximate"):
        raise ConfigError(f"unknown evolution mode {cfg.evolution!r}")
    if cfg.evolution == "sequential" and cfg.dt_split is None:
        raise ConfigError("sequential evolution requires dt_split")


def load_config(path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(doc)


def build_state(cfg: ExperimentConfig):
    p = cfg.state_params
    if cfg.state_kind == "coherent":
        return make_coherent(complex(p["alpha"][0], p["alpha"][1]))
    if cfg.state_kind == "fock":
        return make_fock(p["n"])
    if cfg.state_kind == "thermal":
        return make_thermal(p["nbar"])
    if cfg.state_kind == "squeezed":
        return make_squeezed(p["r"], p["phi"],
                             complex(p["alpha"][0], p["alpha"][1]))
    raise ConfigError(f"unknown state kind {cfg.state_kind!r}")


def effective_gamma0_dt(cfg: ExperimentConfig) -> float:
    if cfg.gamma0_dt is not None:
        return cfg.gamma0_dt
    det = cfg.detector
    spec = DetectorSpec(mass_kg=det["mass_kg"], length_m=det["length_m"],
                        omega_rad_s=det["omega_rad_s"],
                        speed_m_s=det["speed_m_s"], dt_s=det["dt_s"])
    return gamma0_rate(spec) * spec.dt_s


# ---------------------------------------------------------------------------
# Channel pipelines.

def _click_channel(js, moments, gdt, cfg):
    pmf = click_pmf(js)
    batch = sample_clicks(pmf, cfg.samples, cfg.seed)
    est = estimate_covariance(batch, "clicks")
    analytic = analytic_click_covariance(moments, gdt)

    probs = pmf.probs / pmf.total()
    n1 = pmf.outcomes[:, 0].astype(float)
    n2 = pmf.outcomes[:, 1].astype(float)
    e1 = float(np.dot(n1, probs))
    e2 = float(np.dot(n2, probs))
    exact_cov = float(np.dot((n1 - e1) * (n2 - e2), probs))

    aux = {
        "analytic_R": analytic_R(moments) if moments.n_mean > 1e-14 else None,
        "g1_modulus": _maybe_g1(js),
        "weak_coupling_covariance": analytic.value,
        "exact_state_covariance": exact_cov,
        "approximation_error": exact_cov - analytic.value,
        "covariance_defined": analytic.defined,
        "coincidence_fraction": float(np.mean(
            (batch.data[:, 0] > 0) & (batch.data[:, 1] > 0))),
    }
    try:
        ratio = estimate_g2_ratio(batch)
        aux["g2_ratio"] = ratio.value
        aux["g2_ratio_se"] = ratio.standard_error
    except BarpairError as exc:
        aux["g2_ratio_error"] = str(exc)
    try:
        clicks = estimate_g2_from_clicks(batch, detector=1)
        aux["g2_clicks"] = clicks.value
        aux["g2_clicks_se"] = clicks.standard_error
    except BarpairError as exc:
        aux["g2_clicks_error"] = str(exc)

    report = make_report("click", analytic.value, est, cfg.samples, aux)
    return [report], [null_test(report, cfg.z_threshold)], batch, None


def _maybe_g1(js):
    try:
        return g1_cross(js)
    except BarpairError:
        return None


def _homodyne_channel(js, moments, gdt, cfg):
    pdf = homodyne_pdf(js, points=cfg.grid_points, pad_sigmas=cfg.grid_pad)
    batch = sample_homodyne(pdf, cfg.samples, cfg.seed)
    est = estimate_covariance(batch, "quadratures")
    analytic = analytic_homodyne_covariance(moments, gdt)
    means = pdf.means()
    aux = {
        "grid_covariance": pdf.covariance(),
        "grid_mean_1": means[0],
        "grid_mean_2": means[1],
        "grid_mass": pdf.total_mass,
    }
    report = make_report("homodyne", analytic, est, cfg.samples, aux)
    return [report], [null_test(report, cfg.z_threshold)], batch, pdf


def _heterodyne_channel(js, moments, gdt, cfg):
    batch = sample_heterodyne(js, cfg.samples, cfg.seed)
    re_est = estimate_covariance(batch, "heterodyne_re")
    re_analytic = analytic_heterodyne_re_covariance(moments, gdt)
    re_report = make_report("heterodyne_re", re_analytic, re_est, cfg.samples,
                            {"acceptance_rate": batch.meta["acceptance_rate"]})
    cross_est = estimate_covariance(batch, "heterodyne_cross")
    cross_analytic = analytic_heterodyne_cross(moments, gdt)
    cross_report = make_report("heterodyne_cross", cross_analytic, cross_est,
                               cfg.samples, {})
    reports = [re_report, cross_report]
    verdicts = [null_test(re_report, cfg.z_threshold),
                null_test(cross_report, cfg.z_threshold)]
    return reports, verdicts, batch, None


_PIPELINES = {
    "click": _click_channel,
    "homodyne": _homodyne_channel,
    "heterodyne": _heterodyne_channel,
}


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run the configured pipeline and return the report document.

    When ``cfg.out_dir`` is set, sample CSVs, ``report.json``,
    ``manifest.json`` and any SVGs are written there.
    """
    started = time.time()
    state = build_state(cfg)
    moments = compute_moments(state)
    gdt = effective_gamma0_dt(cfg)
    cp = CouplingParams(gamma0_dt=gdt, mode=cfg.evolution, dt_split=cfg.dt_split)
    js = evolve(state, cp)

    out_dir = Path(cfg.out_dir) if cfg.out_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    channels_doc: dict = {}
    written: list[Path] = []
    failures = 0
    for channel in cfg.channels:
        try:
            reports, verdicts, batch, pdf = _PIPELINES[channel](js, moments, gdt, cfg)
        except (BarpairError, ValueError) as exc:
            channels_doc[channel] = {"status": "failed", "error": str(exc)}
            failures += 1
            continue
        files = []
        if out_dir is not None and "csv" in cfg.formats:
            path = out_dir / f"{channel}.csv"
            write_batch_csv(batch, path)
            files.append(path.name)
            written.append(path)
        if out_dir is not None and "svg" in cfg.formats:
            files.extend(_write_svgs(out_dir, channel, batch, pdf, written))
        channels_doc[channel] = {
            "status": "ok",
            "reports": [r.to_dict() for r in reports],
            "verdicts": [v.to_dict() for v in verdicts],
            "files": files,
        }

    status = "ok" if failures == 0 else (
        "failed" if failures == len(cfg.channels) else "partial")
    doc = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "config": cfg.to_dict(),
        "config_sha256": cfg.sha256(),
        "status": status,
        "gamma0_dt": gdt,
        "state_label": state.label,
        "field_tail_mass": state.tail_mass,
        "joint_trace_deficit": 1.0 - float(np.real(np.trace(js.rho12))),
        "elapsed_s": round(time.time() - started, 3),
        "channels": channels_doc,
    }
    if out_dir is not None and "json" in cfg.formats:
        report_path = out_dir / "report.json"
        report_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        written.append(report_path)
        manifest = {"files": [{"path": p.name,
                               "sha256": hashlib.sha256(p.read_bytes()).hexdigest(),
                               "bytes": p.stat().st_size}
                              for p in written]}
        (out_dir / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return doc


def _write_svgs(out_dir: Path, channel: str, batch, pdf, written: list[Path]):
    names = []
    for det in (1, 2):
        col = batch.data[:, det - 1]
        values = col.real if np.iscomplexobj(col) else col.astype(float)
        svg = histogram_svg(values, title=f"{channel} detector {det}",
                            x_label="outcome" if channel == "click" else "value")
        path = out_dir / f"{channel}_det{det}_hist.svg"
        path.write_text(svg)
        names.append(path.name)
        written.append(path)
    if pdf is not None:
        svg = heatmap_svg(pdf.values,
                          (pdf.axis1.lo, pdf.axis1.hi, pdf.axis2.lo, pdf.axis2.hi),
                          title="joint quadrature density")
        path = out_dir / "homodyne_pdf_heatmap.svg"
        path.write_text(svg)
        names.append(path.name)
        written.append(path)
    return names


# ---------------------------------------------------------------------------
# Secondary commands.

def compare_g2(cfg: ExperimentConfig) -> dict:
    """Both g2 estimators, their errors, and the weighted combination."""
    if "click" not in cfg.channels:
        raise ConfigError("compare-g2 needs the click channel enabled")
    state = build_state(cfg)
    moments = compute_moments(state)
    gdt = effective_gamma0_dt(cfg)
    cp = CouplingParams(gamma0_dt=gdt, mode=cfg.evolution, dt_split=cfg.dt_split)
    js = evolve(state, cp)
    pmf = click_pmf(js)
    batch = sample_clicks(pmf, cfg.samples, cfg.seed)
    ratio = estimate_g2_ratio(batch)
    clicks = estimate_g2_from_clicks(batch, detector=1)
    combined = combine_inverse_variance(ratio, clicks)
    coincidences = float(np.mean((batch.data[:, 0] > 0) & (batch.data[:, 1] > 0)))
    return {
        "analytic_g2": analytic_R(moments) if moments.n_mean > 1e-14 else None,
        "ratio_method": {"value": ratio.value, "se": ratio.standard_error},
        "click_statistics_method": {"value": clicks.value,
                                    "se": clicks.standard_error},
        "combined": {"value": combined.value, "se": combined.standard_error},
        "coincidence_fraction": coincidences,
        "low_coincidence": coincidences < LOW_COINCIDENCE_FRACTION,
        "samples": cfg.samples,
        "seed": cfg.seed,
    }


def run_oracle_suite(max_level: int = 8,
                     thetas=(0.05, 0.2, 0.5)) -> list[tuple[str, bool, float]]:
    """Cross-validate fast paths against the enumeration oracle."""
    rows = []
    for theta in thetas:
        worst_closed = 0.0
        worst_matrix = 0.0
        for n in range(0, max_level + 1):
            oracle = oracle_click_pmf(n, theta).as_floats()
            closed = fock_click_pmf_closed_form(n, theta)
            gap_closed = max(abs(closed.get(k, 0.0) - v) for k, v in oracle.items())
            worst_closed = max(worst_closed, gap_closed)
            gdt = theta**2 / 2.0
            js = evolve(make_fock(n), CouplingParams(gamma0_dt=gdt, mode="exact"))
            matrix = click_pmf(js).as_dict()
            gap_matrix = max(abs(matrix.get(k, 0.0) - v) for k, v in oracle.items())
            worst_matrix = max(worst_matrix, gap_matrix)
        rows.append((f"closed-form vs oracle (theta={theta})",
                     worst_closed < 1e-12, worst_closed))
        rows.append((f"matrix path vs oracle (theta={theta})",
                     worst_matrix < 1e-12, worst_matrix))

    for kind, params, state in (
            ("coherent", {"alpha": 2j}, make_coherent(2j)),
            ("thermal", {"nbar": 3.0}, make_thermal(3.0))):
        gdt = 0.01
        ref = oracle_gaussian_joint(kind, params, gdt)
        js = evolve(state, CouplingParams(gamma0_dt=gdt, mode="approximate"))
        pdf = homodyne_pdf(js)
        gap = max(abs(pdf.covariance() - ref.covariance),
                  abs(pdf.means()[0] - ref.mean1),
                  abs(pdf.variances()[0] - ref.var1))
        rows.append((f"grid moments vs classical quadrature ({kind})",
                     gap < 1e-6, gap))
    return rows


# ---------------------------------------------------------------------------
# Argument parsing.

def _add_run_flags(parser):
    parser.add_argument("--config", help="path to a JSON experiment config")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--samples", type=int)
    parser.add_argument("--out", dest="out_dir")
    parser.add_argument("--format", dest="formats",
                        help="comma-separated subset of csv,json,svg")
    parser.add_argument("--gamma0-dt", dest="gamma0_dt", type=float)
    parser.add_argument("--evolution", choices=["exact", "sequential",
                                                "approximate"])
    parser.add_argument("--dt-split", dest="dt_split",
                        help="two comma-separated gamma0*dt values")
    parser.add_argument("--channels", help="comma-separated channel subset")
    parser.add_argument("--z-threshold", dest="z_threshold", type=float)
    parser.add_argument("--state-kind", dest="state_kind",
                        choices=["coherent", "fock", "thermal", "squeezed"])
    parser.add_argument("--alpha", help="complex literal, e.g. 2 or 1+2j")
    parser.add_argument("--fock-n", dest="fock_n", type=int)
    parser.add_argument("--nbar", type=float)
    parser.add_argument("--squeeze-r", dest="squeeze_r", type=float)
    parser.add_argument("--squeeze-phi", dest="squeeze_phi", type=float)
    parser.add_argument("--grid-points", dest="grid_points", type=int)
    parser.add_argument("--grid-pad", dest="grid_pad", type=float)


def _config_from_args(args) -> ExperimentConfig:
    doc: dict = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    state = dict(doc.get("state", {}))
    if args.state_kind:
        state["kind"] = args.state_kind
    if args.alpha is not None:
        state["alpha"] = args.alpha
    if args.fock_n is not None:
        state["n"] = args.fock_n
    if args.nbar is not None:
        state["nbar"] = args.nbar
    if args.squeeze_r is not None:
        state["r"] = args.squeeze_r
    if args.squeeze_phi is not None:
        state["phi"] = args.squeeze_phi
    if "kind" not in state:
        raise ConfigError("state.kind is required (config file or --state-kind)")
    doc["state"] = state
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.samples is not None:
        doc["samples"] = args.samples
    coupling = dict(doc.get("coupling", {}))
    if args.gamma0_dt is not None:
        coupling = {"gamma0_dt": args.gamma0_dt}
    doc["coupling"] = coupling
    if args.evolution:
        doc["evolution"] = args.evolution
    if args.dt_split:
        parts = args.dt_split.split(",")
        doc["dt_split"] = [float(parts[0]), float(parts[1])]
    if args.channels:
        doc["channels"] = args.channels.split(",")
    if args.z_threshold is not None:
        doc["z_threshold"] = args.z_threshold
    grid = dict(doc.get("grid", {}))
    if args.grid_points is not None:
        grid["points"] = args.grid_points
    if args.grid_pad is not None:
        grid["pad_sigmas"] = args.grid_pad
    if grid:
        doc["grid"] = grid
    output = dict(doc.get("output", {}))
    if args.out_dir is not None:
        output["directory"] = args.out_dir
    if args.formats is not None:
        output["formats"] = args.formats.split(",")
    if output:
        doc["output"] = output
    return config_from_dict(doc)


def _print_verdicts(doc: dict) -> None:
    for channel, entry in doc["channels"].items():
        if entry["status"] != "ok":
            print(f"{channel}: FAILED ({entry['error']})")
            continue
        for verdict in entry["verdicts"]:
            print(f"{verdict['channel']}: {verdict['verdict']} "
                  f"(|stat|/SE = {abs(verdict['statistic']) / verdict['standard_error']:.2f}, "
                  f"z* = {verdict['threshold']:g})")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="barpair",
        description="Joint measurement statistics of two resonant detectors "
                    "coupled to one radiation mode")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a configured experiment")
    _add_run_flags(run_p)

    g_p = sub.add_parser("gamma0", help="emission rate from detector parameters")
    g_p.add_argument("--mass", type=float, required=True, help="kg")
    g_p.add_argument("--length", type=float, required=True, help="m")
    g_p.add_argument("--omega", type=float, required=True, help="rad/s")
    g_p.add_argument("--speed", type=float, required=True,
                     help="m/s (sound speed reading; pass 3e8 for light)")
    g_p.add_argument("--dt", type=float, required=True, help="s")

    cmp_p = sub.add_parser("compare-g2", help="both g2 estimators on one batch")
    _add_run_flags(cmp_p)

    o_p = sub.add_parser("oracle", help="run the brute-force validation table")
    o_p.add_argument("--max-level", type=int, default=8)

    args = parser.parse_args(argv)

    if args.command == "gamma0":
        spec = DetectorSpec(mass_kg=args.mass, length_m=args.length,
                            omega_rad_s=args.omega, speed_m_s=args.speed,
                            dt_s=args.dt)
        rate = gamma0_rate(spec)
        gdt = rate * spec.dt_s
        print(f"gamma0 = {rate!r} 1/s")
        print(f"gamma0*dt = {gdt!r}")
        print("target_probability  required_occupancy")
        for target in (0.1, 1.0, 10.0):
            print(f"{target:>18g}  {required_occupancy(gdt, target)!r}")
        return 0

    if args.command == "oracle":
        rows = run_oracle_suite(max_level=args.max_level)
        worst_fail = False
        for name, ok, gap in rows:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: max gap {gap:.3e}")
            worst_fail |= not ok
        return 1 if worst_fail else 0

    try:
        cfg = _config_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "compare-g2":
            table = compare_g2(cfg)
            print(json.dumps(table, indent=2, sort_keys=True))
            return 0
        doc = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (CutoffOverflow, ApproximationDomain, NonConvergedTail,
            NotPRepresentable, NonFinite, ValueError) as exc:
        print(f"numerical-domain error: {exc}", file=sys.stderr)
        return 3

    _print_verdicts(doc)
    if doc["status"] == "partial":
        return 4
    if doc["status"] == "failed":
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
