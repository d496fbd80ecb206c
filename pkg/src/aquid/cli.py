"""Command-line pipeline for the ring-condensate junction analysis.

Stages: stationary mean-field states -> generalized Bose-Hubbard sweep ->
semiclassical critical curves -> quantized phase spectra and qubit metrics.
Each command persists CSV/JSON artifacts plus a manifest with digests so
that reruns are auditable; expensive stages are cached on disk keyed by the
full parameter set (cache root from $AQUID_CACHE_DIR, default
~/.cache/aquid).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import __version__, gbh, gp2d, qspec, tmdyn, units

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONVERGENCE = 3
EXIT_PARTIAL = 4


class CliError(ValueError):
    """Usage-level failure (bad flags, missing files, bad parameter files)."""


# ---------------------------------------------------------------------------
# digests, manifest, cache
# ---------------------------------------------------------------------------

def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _key(**parts) -> str:
    blob = json.dumps(parts, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class RunManifest:
    """Record of one CLI invocation: inputs, stages, output digests."""

    scenario_digest: str
    tool_version: str = __version__
    stages: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)

    def add_stage(self, name: str, status: str, seconds: float) -> None:
        self.stages.append({"name": name, "status": status,
                            "seconds": round(seconds, 3)})

    def register(self, out_dir: Path, path: Path) -> None:
        self.outputs[str(path.relative_to(out_dir))] = _sha256_file(path)

    def save(self, out_dir: Path) -> None:
        with open(out_dir / "manifest.json", "w") as fh:
            json.dump(asdict(self), fh, indent=2)


class ArtifactCache:
    """Flat content-addressed store for expensive pipeline intermediates."""

    def __init__(self, root=None):
        env = os.environ.get("AQUID_CACHE_DIR")
        self.root = Path(root or env or Path.home() / ".cache" / "aquid")
        self.root.mkdir(parents=True, exist_ok=True)

    def get_json(self, key: str):
        path = self.root / f"{key}.json"
        if not path.exists():
            return None
        with open(path) as fh:
            return json.load(fh)

    def put_json(self, key: str, obj) -> None:
        tmp = self.root / f"{key}.json.tmp"
        with open(tmp, "w") as fh:
            json.dump(obj, fh)
        tmp.replace(self.root / f"{key}.json")

    def get_state(self, key: str):
        path = self.root / f"{key}.npz"
        if not path.exists():
            return None
        return gp2d.load_state(str(path))

    def put_state(self, key: str, state) -> None:
        gp2d.save_state(str(self.root / f"{key}.npz"), state)


# ---------------------------------------------------------------------------
# scenario loading and curve (de)serialization
# ---------------------------------------------------------------------------

def resolve_scenario(spec: str) -> tuple[str, str]:
    """Scenario YAML text and its digest, from a path or a packaged name."""
    path = Path(spec)
    if path.exists():
        text = path.read_text()
    else:
        pkg = resources.files("aquid") / "scenarios" / spec
        if not pkg.is_file():
            pkg = resources.files("aquid") / "scenarios" / f"{spec}.yaml"
        if not pkg.is_file():
            raise CliError(f"scenario {spec!r}: no such file or packaged name")
        text = pkg.read_text()
    return text, hashlib.sha256(text.encode()).hexdigest()


def load_junction_curve(path: str) -> qspec.CosineParamCurve:
    """Table-style junction parameter file -> sinusoidal parameter curve."""
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise CliError(f"junction parameter file {path!r}: {exc}") from exc
    if not isinstance(doc, dict) or "junction" not in doc:
        raise CliError(f"junction parameter file {path!r}: missing 'junction' section")
    sec = doc["junction"]
    try:
        return qspec.CosineParamCurve(
            K0=float(sec["K0_nK"]), P_eff_mid=float(sec["Peff_mid_nK"]),
            U_eff=float(sec["Ueff_nK"]), N=int(sec["N"]),
            f0=float(sec["f0_Hz"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"junction parameter file {path!r}: {exc}") from exc


def curve_to_dict(curve: gbh.GbhCurve) -> dict:
    return {
        "samples": [asdict(s) for s in curve.samples],
        "central_interval": list(curve.central_interval),
        "f0": curve.f0,
        "peff_span": list(curve.peff_span) if curve.peff_span else None,
        "failures": list(curve.failures),
    }


def curve_from_dict(doc: dict) -> gbh.GbhCurve:
    return gbh.GbhCurve(
        samples=tuple(gbh.GbhParams(**s) for s in doc["samples"]),
        central_interval=tuple(doc["central_interval"]),
        f0=doc["f0"],
        peff_span=tuple(doc["peff_span"]) if doc["peff_span"] else None,
        failures=tuple(doc["failures"]))


# ---------------------------------------------------------------------------
# cached pipeline stages
# ---------------------------------------------------------------------------

def stage_f0(config, g2d: float, cache: ArtifactCache) -> float:
    key = _key(stage="f0", **asdict(config))
    doc = cache.get_json(key)
    if doc is None:
        doc = {"f0_Hz": gp2d.f0_numeric(config, g2d)}
        cache.put_json(key, doc)
    return float(doc["f0_Hz"])


def stage_stationary(config, g2d: float, cache: ArtifactCache, omega: float,
                     winding: int) -> gp2d.StationaryState:
    key = _key(stage="stationary", omega=round(omega, 10), winding=winding,
               **asdict(config))
    state = cache.get_state(key)
    if state is None:
        init = gp2d.make_initial(config, "winding", winding=winding,
                                 omega=omega)
        state = gp2d.relax_imaginary(config, init, g2d, omega)
        cache.put_state(key, state)
    return state


def stage_gbh(config, g2d: float, cache: ArtifactCache, f0: float, f_samples,
              peff_samples=None, on_error: str = "skip",
              progress=None) -> gbh.GbhCurve:
    key = _key(stage="gbh", f0=round(f0, 8),
               f_samples=[round(float(x), 8) for x in f_samples],
               peff_samples=None if peff_samples is None
               else [round(float(x), 8) for x in peff_samples],
               **asdict(config))
    doc = cache.get_json(key)
    if doc is None:
        curve = gbh.sweep(config, g2d, f0, f_samples,
                          peff_samples=peff_samples, on_error=on_error,
                          progress=gbh.SweepProgress(progress))
        cache.put_json(key, curve_to_dict(curve))
        return curve
    return curve_from_dict(doc)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _setup(args):
    text, digest = resolve_scenario(args.scenario)
    config = units.load_scenario(text)
    if args.grid is not None:
        from dataclasses import replace
        config = replace(config, grid_points_per_axis=args.grid).validate()
    g2d = units.coupling_2d(units.constants(), config.omega_z).g2d
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    if manifest_path.exists():
        with open(manifest_path) as fh:
            doc = json.load(fh)
        manifest = RunManifest(scenario_digest=digest,
                               tool_version=doc.get("tool_version", __version__),
                               stages=doc.get("stages", []),
                               outputs=doc.get("outputs", {}))
    else:
        manifest = RunManifest(scenario_digest=digest)
    return config, g2d, out, manifest, ArtifactCache()


def _f_grid(args, default_min=0.0, default_max=1.0, default_n=9):
    fmin = default_min if args.fmin is None else args.fmin
    fmax = default_max if args.fmax is None else args.fmax
    n = default_n if args.fsamples is None else args.fsamples
    if n < 2 or not 0.0 <= fmin < fmax <= 1.0:
        raise CliError(f"bad frequency grid: fmin={fmin}, fmax={fmax}, n={n}")
    return np.linspace(fmin, fmax, n)


def cmd_stationary(args) -> int:
    config, g2d, out, manifest, cache = _setup(args)
    t0 = time.time()
    x = args.f_over_f0
    omega = 0.0 if x == 0.0 else 2.0 * math.pi * x * stage_f0(config, g2d, cache)
    winding = 0 if args.state == "zero" else 1
    state = stage_stationary(config, g2d, cache, omega, winding)
    tag = f"{args.state}_x{x:g}"
    gp2d.save_state(str(out / f"state_{tag}.npz"), state)
    manifest.register(out, out / f"state_{tag}.npz")
    manifest.register(out, out / f"state_{tag}.json")
    manifest.add_stage(f"stationary:{tag}", "ok", time.time() - t0)
    manifest.save(out)
    print(f"stationary {tag}: mu/Vb = {state.mu / config.Vb:.4f}, "
          f"winding = {state.winding}, label = {state.phase_label}, "
          f"residual = {state.residual:.3e} nK")
    return EXIT_OK


def _gbh_curve(args, config, g2d, cache, progress=None) -> gbh.GbhCurve:
    f0 = stage_f0(config, g2d, cache)
    xs = _f_grid(args)
    if not np.any(np.isclose(xs, 0.5)):
        raise CliError("the frequency grid must include f/f0 = 0.5")
    return stage_gbh(config, g2d, cache, f0, xs, progress=progress)


def cmd_gbh(args) -> int:
    config, g2d, out, manifest, cache = _setup(args)
    t0 = time.time()
    curve = _gbh_curve(args, config, g2d, cache, progress=print)
    gbh.write_gbh_curve(out / "gbh_curve.csv", curve)
    summary = gbh.summary(curve)
    summary["failures"] = list(curve.failures)
    summary["peff_span"] = list(curve.peff_span) if curve.peff_span else None
    with open(out / "gbh_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    status = "partial" if curve.failures else "ok"
    manifest.register(out, out / "gbh_curve.csv")
    manifest.register(out, out / "gbh_summary.json")
    manifest.add_stage("gbh", status, time.time() - t0)
    manifest.save(out)
    print(f"gbh sweep: U_eff/U = {summary['Ueff_over_U']:.4f}, "
          f"delta_f/f0 = {summary['delta_f_over_f0']:.5f}, "
          f"failures = {len(curve.failures)}")
    return EXIT_PARTIAL if curve.failures else EXIT_OK


def cmd_critical(args) -> int:
    config, g2d, out, manifest, cache = _setup(args)
    t0 = time.time()
    curve = _gbh_curve(args, config, g2d, cache)
    jp = curve.junction_params()
    span = curve.samples[0].f_over_f0, curve.samples[-1].f_over_f0
    xs = np.linspace(span[0], span[1],
                     101 if args.fsamples is None else max(args.fsamples, 3))
    tmdyn.write_critical_curves(out / "critical_curves.csv",
                                curve.tm_samples(xs), jp)
    tmdyn.write_interference(out / "interference.csv", xs, jp)
    files = ["critical_curves.csv", "interference.csv"]
    if args.gp_points:
        points = measure_critical_points(config, g2d, cache, curve)
        with open(out / "critical_points_gp.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["f_over_f0", "Zc_gp"])
            for x, zc in points:
                wr.writerow([f"{x:.8g}", f"{zc:.6g}"])
        files.append("critical_points_gp.csv")
    for name in files:
        manifest.register(out, out / name)
    manifest.add_stage("critical", "ok", time.time() - t0)
    manifest.save(out)
    print(f"critical curves: I0/N = {jp.I0_per_N:.5f} 1/s, "
          f"alpha0 = {jp.alpha0:.5f}")
    return EXIT_PARTIAL if curve.failures else EXIT_OK


def measure_critical_points(config, g2d: float, cache: ArtifactCache,
                            curve: gbh.GbhCurve, n_points: int = 3,
                            n_bisect: int = 6) -> list[tuple[float, float]]:
    """Critical imbalance measured directly from mean-field dynamics.

    At each probe frequency, seeds of growing imbalance are propagated for
    about one oscillation period; the largest seed whose Z(t) still crosses
    zero (librating motion) brackets the critical imbalance.  Expensive:
    each probe is a full real-time run.
    """
    xs = np.linspace(curve.samples[0].f_over_f0,
                     curve.samples[-1].f_over_f0, n_points)
    k_of = curve.k_interp()
    out = []
    for x in xs:
        key = _key(stage="zc_gp", x=round(float(x), 8), n_bisect=n_bisect,
                   f0=round(curve.f0, 8), **asdict(config))
        doc = cache.get_json(key)
        if doc is not None:
            out.append((float(x), float(doc["Zc"])))
            continue
        omega = 2.0 * math.pi * curve.f0 * float(x)
        s0 = stage_stationary(config, g2d, cache, omega, 0)
        spi = stage_stationary(config, g2d, cache, omega, 1)
        modes = gbh.localized_modes(s0, spi)
        params = tmdyn.TmParams(K=float(k_of(x)), U_eff=curve.U_eff,
                                P_eff=curve.peff_extended(float(x)),
                                N=curve.N)
        ci = tmdyn.critical_imbalance(params)
        zc_pred = ci.zc_zero if ci.zc_zero is not None else ci.zc_pi
        phi_min = 0.0 if ci.zc_zero is not None else math.pi
        t_run = 1.2 * math.pi * units.constants().hbar_over_kB / math.sqrt(
            curve.N * curve.U_eff
            * max(abs(params.K), abs(params.P_eff)) / 2.0)
        lo, hi = 0.2 * zc_pred, 3.0 * zc_pred
        for _ in range(n_bisect):
            mid = 0.5 * (lo + hi)
            init = gp2d.make_initial(config, "tm", modes=modes, z=mid,
                                     phi=phi_min)
            series = gp2d.evolve_real(config, init, g2d, omega, t_run,
                                      sample_every=25, modes=modes)
            crosses = np.any(series.z[1:] * series.z[:-1] < 0)
            if crosses:
                lo = mid
            else:
                hi = mid
        zc = 0.5 * (lo + hi)
        cache.put_json(key, {"Zc": zc})
        out.append((float(x), zc))
    return out


def cmd_qubit(args) -> int:
    config, g2d, out, manifest, cache = _setup(args)
    t0 = time.time()
    failures = ()
    if args.table5_fast:
        pcurve = load_junction_curve(args.table5_fast)
        provenance = {"junction_file": _sha256_file(args.table5_fast)}
    else:
        curve = _gbh_curve(args, config, g2d, cache)
        pcurve = curve.param_curve()
        failures = curve.failures
        provenance = {"gbh_curve": _key(**curve_to_dict(curve))}
    report = qspec.qubit_report(pcurve)
    doc = asdict(report)
    doc["provenance"] = {"scenario": manifest.scenario_digest, **provenance,
                         "f0_Hz": pcurve.f0}
    with open(out / "qubit_report.json", "w") as fh:
        json.dump(doc, fh, indent=2)

    xs = _f_grid(args, default_min=0.4, default_max=0.6, default_n=41)
    spectra = [pcurve.spectrum(float(x)) for x in xs]
    with open(out / "spectrum.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["f_over_f0"] + [f"E{j}_nK" for j in range(8)])
        for x, s in zip(xs, spectra):
            wr.writerow([f"{x:.8g}"] + [f"{e:.10g}" for e in s.energies[:8]])
    try:
        currents = [qspec.level_currents(spectra, j) for j in range(5)]
        tracking_note = "overlap"
    except qspec.SpectrumError as exc:
        # eigenvector character can rotate faster than the frequency grid
        # resolves near the symmetric point; fall back to the adiabatic,
        # energy-ordered branches and flag it
        currents = [qspec.level_currents(spectra, j, tracking="energy")
                    for j in range(5)]
        tracking_note = f"energy (overlap tracking ambiguous: {exc})"
    with open(out / "levels_currents.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["f_over_f0"] + [f"I{j}_perN" for j in range(5)])
        for i, x in enumerate(xs):
            wr.writerow([f"{x:.8g}"] + [f"{currents[j][i]:.8g}"
                                        for j in range(5)])
    for name in ("qubit_report.json", "spectrum.csv", "levels_currents.csv"):
        manifest.register(out, out / name)
    manifest.add_stage(f"qubit[tracking={tracking_note.split(' ')[0]}]",
                       "partial" if failures else "ok", time.time() - t0)
    manifest.save(out)
    print(f"qubit: q = {report.q:.4g}, Q = {report.Q:.4g}, "
          f"T_osc = {report.T_osc:.4g} s, "
          f"Q*dfpp = {report.product_Q_dfpp:.4g}")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_all(args) -> int:
    worst = EXIT_OK
    for fn in (cmd_stationary, cmd_gbh, cmd_critical, cmd_qubit):
        code = fn(args)
        worst = max(worst, code)
    return worst


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aquid",
        description="Ring-condensate junction pipeline: mean-field states, "
                    "Bose-Hubbard parameters, critical curves, qubit spectra.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("stationary", cmd_stationary), ("gbh", cmd_gbh),
                     ("critical", cmd_critical), ("qubit", cmd_qubit),
                     ("all", cmd_all)):
        p = sub.add_parser(name)
        p.set_defaults(func=fn)
        p.add_argument("--scenario", required=True,
                       help="scenario YAML path or packaged scenario name")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--grid", type=int, default=None,
                       help="override grid points per axis")
        p.add_argument("--fmin", type=float, default=None)
        p.add_argument("--fmax", type=float, default=None)
        p.add_argument("--fsamples", type=int, default=None)
        p.add_argument("--f-over-f0", type=float, default=0.0,
                       help="rotation rate for the stationary command")
        p.add_argument("--state", choices=("zero", "pi"), default="zero")
        p.add_argument("--gp-points", action="store_true",
                       help="add mean-field-measured critical points (slow)")
        p.add_argument("--table5-fast", default=None, metavar="FILE",
                       help="junction parameter file; qubit stage skips the "
                            "mean-field pipeline")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (CliError, units.ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (gp2d.GpError, gbh.GbhError, qspec.SpectrumError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
