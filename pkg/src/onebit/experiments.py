"""Scripted replication runs: Haar scans, theta sweeps and visibility studies.

Every run can be written to a run directory holding a JSON report, CSV detail
files and a manifest. Only the manifest carries a timestamp, so reports from
identical configurations are byte identical.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, _backend
from . import lhv as _lhv
from . import polytope as pt
from . import stats
from .qstate import Behavior, TwoQubitState, haar_random_basis, max_entangled_qudit_behavior

BORDERLINE_GAP = 1e-6
OUTPUT_ENV = "ONEBIT_OUTPUT_DIR"


@dataclass
class ScanReport:
    scenario: pt.Scenario
    n_points: int
    fraction_in_local: float
    fraction_outside_comm: float
    seed: int
    conjugate_bob: bool = False
    n_in_local: int = 0
    n_outside_comm: int = 0
    n_unresolved: int = 0
    borderline: list[int] = field(default_factory=list)
    points: list[dict] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError("a scan needs at least one point")
        for f in (self.fraction_in_local, self.fraction_outside_comm):
            if not 0.0 <= f <= 1.0:
                raise ValueError("fractions must lie in [0, 1]")

    def binomial_error(self) -> float:
        p = self.fraction_in_local
        n = self.n_points - self.n_unresolved
        return math.sqrt(max(p * (1 - p), 1e-12) / max(n, 1))

    def to_dict(self) -> dict:
        return {
            "scenario": list(self.scenario.shape),
            "n_points": self.n_points,
            "fraction_in_local": self.fraction_in_local,
            "fraction_in_local_stderr": self.binomial_error(),
            "fraction_outside_comm": self.fraction_outside_comm,
            "n_in_local": self.n_in_local,
            "n_outside_comm": self.n_outside_comm,
            "n_unresolved": self.n_unresolved,
            "borderline_points": self.borderline,
            "seed": self.seed,
            "bob_basis_convention": "conjugated" if self.conjugate_bob else "unconjugated",
        }

    def points_csv(self) -> str:
        buf = io.StringIO()
        cols = ["index", "in_local", "local_gap", "in_comm", "comm_gap", "status"]
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in self.points:
            w.writerow({k: row.get(k, "") for k in cols})
        return buf.getvalue()


def _certified_gap(res: pt.MembershipResult) -> float:
    """Lower bound on the distance to the set (0 when inside)."""
    if res.inside:
        return 0.0
    return res.margin / float(np.linalg.norm(res.functional))


def _scan_point(args) -> dict:
    s, d, seed, i, conjugate_bob = args
    rng = np.random.default_rng(_lhv.stream(seed, i))
    alice = [haar_random_basis(d, rng) for _ in range(s.nx)]
    bob = [haar_random_basis(d, rng) for _ in range(s.ny)]
    P = max_entangled_qudit_behavior(d, alice, bob, conjugate_bob=conjugate_bob)
    row = {"index": i, "status": "ok"}
    try:
        loc = pt.membership(P, s, "local")
        row["in_local"] = loc.inside
        row["local_gap"] = _certified_gap(loc)
        if loc.inside:
            # L is contained in C
            row["in_comm"] = True
            row["comm_gap"] = 0.0
        else:
            com = pt.membership(P, s, "comm")
            row["in_comm"] = com.inside
            row["comm_gap"] = _certified_gap(com)
    except pt.NonConvergenceError as exc:
        row["status"] = f"unresolved: {exc}"
    return row


def haar_scan(
    s,
    d: int,
    n_points: int,
    seed: int,
    conjugate_bob: bool = False,
    workers: int = 1,
) -> ScanReport:
    """Sample points of the quantum set from Haar-random qudit measurements and
    test each for membership in the local and one-bit polytopes."""
    s = pt.Scenario.of(s)
    if s.na != d or s.nb != d:
        raise ValueError(f"scenario outputs {s.na},{s.nb} must equal the qudit dimension {d}")
    if n_points < 1:
        raise ValueError("n_points must be positive")
    s.check_oracle()
    jobs = [(s, d, seed, i, conjugate_bob) for i in range(n_points)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_scan_point, jobs, chunksize=max(1, n_points // (8 * workers))))
    else:
        rows = [_scan_point(j) for j in jobs]
    resolved = [r for r in rows if r["status"] == "ok"]
    n_ok = max(len(resolved), 1)
    n_local = sum(bool(r["in_local"]) for r in resolved)
    n_out = sum(not r["in_comm"] for r in resolved)
    borderline = [
        r["index"]
        for r in resolved
        if (not r["in_local"] and r["local_gap"] < BORDERLINE_GAP)
        or (not r["in_comm"] and r["comm_gap"] < BORDERLINE_GAP)
    ]
    return ScanReport(
        scenario=s,
        n_points=n_points,
        fraction_in_local=n_local / n_ok,
        fraction_outside_comm=n_out / n_ok,
        seed=seed,
        conjugate_bob=conjugate_bob,
        n_in_local=n_local,
        n_outside_comm=n_out,
        n_unresolved=n_points - len(resolved),
        borderline=borderline,
        points=rows,
    )


def theta_sweep(
    thetas,
    settings_count: int = 500,
    n: int = 100_000,
    seed: int = 0,
    protocol: str = "semianalytical",
    workers: int = 1,
    smoothing: float | None = None,
) -> dict[str, stats.SweepSummary]:
    """Divergence distributions of a protocol across states, keyed by preset name.

    ``thetas`` holds preset names or coefficient files. With
    ``protocol="max-entangled"`` only the maximally entangled state is allowed.
    """
    settings = stats.random_settings(settings_count, seed)
    out = {}
    for name in thetas:
        if protocol == "semianalytical":
            coeffs = _lhv.load_preset(name)
            proto = _lhv.SemianalyticalProtocol(coeffs)
            theta = coeffs.theta
        else:
            theta = parse_theta(name)
            if not math.isclose(theta, math.pi / 4, abs_tol=1e-4):
                raise ValueError(f"the {protocol} protocol only targets theta = pi/4")
            proto = _lhv.make_protocol(protocol)
        out[name] = stats.sweep(
            proto, TwoQubitState(theta), settings, n=n, seed=seed, smoothing=smoothing, workers=workers
        )
    return out


def visibility_study(
    s,
    P_ns: Behavior,
    noise: Behavior,
    reference_wq: float | None = None,
    set_tag: str = "comm",
    method: str = "bisection",
) -> dict:
    """Threshold of P_ns against noise, compared with a reference quantum threshold.

    Thresholds are reported as noise weights (1 - w_star), the convention of the
    reference values: the mixture enters the set once the noise weight reaches
    it. A violation needs the quantum threshold below the communication one.
    """
    s = pt.Scenario.of(s)
    res = pt.visibility(P_ns, noise, s, set_tag, method=method, reference_wq=reference_wq)
    w_c = res.noise_threshold
    report = {
        "scenario": list(s.shape),
        "set": set_tag,
        "w_star": res.w_star,
        "w_c": w_c,
        "visibility": res.to_dict(),
    }
    if res.w_star >= 1.0:
        report["status"] = "no candidate"
    if reference_wq is not None:
        gap = reference_wq - w_c
        report["reference_wq"] = {"value": reference_wq, "source": "external reference"}
        report["gap"] = gap
        report["violation"] = bool(gap < -pt.VISIBILITY_TOL)
        report.setdefault("status", "violation" if report["violation"] else "no violation")
    else:
        report.setdefault("status", "no reference")
    return report


# ---------------------------------------------------------------------------
# helpers shared with the command line

def parse_theta(text) -> float:
    """Radians, or a pi fraction such as ``5pi/32`` / ``pi/4`` / ``3*pi/16``."""
    if isinstance(text, (int, float)):
        return float(text)
    t = str(text).strip().replace(" ", "").replace("π", "pi").replace("*", "")
    if "pi" not in t:
        return float(t)
    num, _, den = t.partition("/")
    coef = num.replace("pi", "")
    value = (float(coef) if coef not in ("", "+") else 1.0) * math.pi
    if coef == "-":
        value = -math.pi
    return value / float(den) if den else value


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "runs"))


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, pt.Scenario):
        return list(obj.shape)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _sanitize(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def csv_with_config(body: str, config: dict) -> str:
    return "# config=" + json.dumps(_sanitize(config), sort_keys=True, default=_json_default) + "\n" + body


def write_run(
    experiment: str, seed: int, config: dict, files: dict[str, str], outdir=None, runtime: dict | None = None
) -> Path:
    """Write files into ``<outdir>/<experiment>-seed<seed>-<timestamp>/`` plus a manifest.

    ``runtime`` holds settings that do not affect results (worker count, paths);
    they go to the manifest only.
    """
    now = _dt.datetime.now(_dt.timezone.utc)
    root = Path(outdir) if outdir is not None else default_output_dir()
    run = root / f"{experiment}-seed{seed}-{now.strftime('%Y%m%dT%H%M%S%fZ')}"
    run.mkdir(parents=True, exist_ok=False)
    for name, text in files.items():
        (run / name).write_text(text)
    manifest = {
        "experiment": experiment,
        "created": now.isoformat(),
        "code_version": __version__,
        "kernel_backend": _backend.BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": _sanitize(config),
        "runtime": _sanitize(runtime or {}),
        "files": sorted(files),
    }
    (run / "manifest.json").write_text(dumps(manifest))
    return run


def scan_files(report: ScanReport, config: dict) -> dict[str, str]:
    body = {"config": _sanitize(config), "result": report.to_dict()}
    return {"report.json": dumps(body), "points.csv": csv_with_config(report.points_csv(), config)}


def sweep_files(results: dict[str, stats.SweepSummary], config: dict) -> dict[str, str]:
    files = {}
    summary = {"config": _sanitize(config), "results": {}}
    for name, summ in results.items():
        slug = name.replace("/", "_")
        files[f"settings_{slug}.csv"] = csv_with_config(summ.to_csv(), {**config, "theta_name": name})
        summary["results"][name] = _sanitize(summ.summary_dict())
    files["report.json"] = dumps(summary)
    return files

