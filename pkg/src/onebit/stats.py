"""Distances between quantum targets and protocol outputs.

KL is taken as D(target || model): the model is the null hypothesis, and
``-ln(0.05) / D`` is the number of samples needed to reject it at 95%.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import lhv as _lhv
from .qstate import TwoQubitState, as_unit, born_behavior, random_unit_vector

NORM_TOL = 1e-9
SMOOTHING_EPS = 1e-9
LN_20 = -math.log(0.05)
QUANTILE_LEVELS = (0.0, 0.25, 0.5, 0.75, 1.0)
QUANTILE_NAMES = ("min", "q25", "median", "q75", "max")


class InfiniteDivergenceWarning(UserWarning):
    """The model assigns zero probability to an outcome the target allows."""


def _pair(target, model) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(target, dtype=float)
    q = np.asarray(model, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {q.shape}")
    return p, q


def _check_normalized(t: np.ndarray, what: str) -> None:
    if np.any(t < 0):
        raise ValueError(f"{what} has negative entries")
    if abs(t.sum() - 1.0) > NORM_TOL:
        raise ValueError(f"{what} is not normalized (sum={t.sum()!r})")


def smooth(model, eps: float = SMOOTHING_EPS) -> np.ndarray:
    """Floor entries at ``eps`` and renormalize."""
    q = np.maximum(np.asarray(model, dtype=float), eps)
    return q / q.sum()


def kl_divergence(target, model, smoothing: float | None = None) -> float:
    """Sum of target * ln(target / model) in nats, with 0 ln 0 = 0.

    Returns +inf (with an ``InfiniteDivergenceWarning``) when the model has a
    zero where the target does not, unless ``smoothing`` floors the model.
    """
    p, q = _pair(target, model)
    _check_normalized(p, "target")
    _check_normalized(q, "model")
    if smoothing is not None:
        q = smooth(q, smoothing)
    p = p.ravel()
    q = q.ravel()
    support = p > 0
    if np.any(q[support] <= 0):
        warnings.warn("model has zero mass on the target's support", InfiniteDivergenceWarning, stacklevel=2)
        return math.inf
    val = float(np.sum(p[support] * np.log(p[support] / q[support])))
    return max(val, 0.0)


def tvd(target, model) -> float:
    p, q = _pair(target, model)
    return float(min(0.5 * np.abs(p - q).sum(), 1.0))


def n95(kl: float, as_count: bool = False) -> float:
    """Samples needed for 95% confidence rejection: -ln(0.05) / kl.

    With ``as_count`` the value is rounded up to an integer requirement of at
    least one sample (infinity stays infinite).
    """
    if kl < 0 or math.isnan(kl):
        raise ValueError("KL divergence must be non-negative")
    if kl == 0:
        return math.inf
    val = LN_20 / kl
    if as_count and math.isfinite(val):
        return float(max(1, math.ceil(val)))
    return val


@dataclass(frozen=True)
class DivergenceReport:
    kl: float
    tvd: float
    n95: float
    a_hat: tuple[float, float, float] | None = None
    b_hat: tuple[float, float, float] | None = None
    smoothed: bool = False

    @classmethod
    def compare(cls, target, model, a_hat=None, b_hat=None, smoothing: float | None = None):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", InfiniteDivergenceWarning)
            kl = kl_divergence(target, model, smoothing=smoothing)
        return cls(
            kl=kl,
            tvd=tvd(target, model),
            n95=n95(kl),
            a_hat=None if a_hat is None else tuple(float(c) for c in a_hat),
            b_hat=None if b_hat is None else tuple(float(c) for c in b_hat),
            smoothed=smoothing is not None,
        )


def _quantiles(values) -> dict:
    arr = np.asarray(values, dtype=float)
    qs = np.quantile(arr, QUANTILE_LEVELS)
    return dict(zip(QUANTILE_NAMES, (float(v) for v in qs)))


@dataclass
class SweepSummary:
    per_setting: list[DivergenceReport]
    quantiles: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.per_setting:
            raise ValueError("empty sweep")
        if not self.quantiles:
            self.quantiles = {
                metric: _quantiles([getattr(r, metric) for r in self.per_setting])
                for metric in ("kl", "tvd", "n95")
            }

    def values(self, metric: str) -> np.ndarray:
        return np.array([getattr(r, metric) for r in self.per_setting])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["ax", "ay", "az", "bx", "by", "bz", "kl", "tvd", "n95"])
        for r in self.per_setting:
            a = r.a_hat or (math.nan,) * 3
            b = r.b_hat or (math.nan,) * 3
            w.writerow([*(repr(c) for c in a), *(repr(c) for c in b), repr(r.kl), repr(r.tvd), repr(r.n95)])
        return buf.getvalue()

    def summary_dict(self) -> dict:
        return {
            "n_settings": len(self.per_setting),
            "quantiles": self.quantiles,
            "mean": {m: float(np.mean(self.values(m))) for m in ("kl", "tvd")},
            **self.meta,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary_dict(), indent=2, sort_keys=True, default=_json_default)


def _json_default(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def random_settings(count: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Haar-random (uniform on the sphere) measurement direction pairs."""
    rng = np.random.default_rng(_lhv.stream(seed, 0xA5E7))
    return [(random_unit_vector(rng), random_unit_vector(rng)) for _ in range(count)]


def setting_key(a: np.ndarray, b: np.ndarray) -> tuple[int, int]:
    digest = hashlib.sha256(np.concatenate([a, b]).astype("<f8").tobytes()).digest()
    return int.from_bytes(digest[:4], "little"), int.from_bytes(digest[4:8], "little")


def _one_setting(args):
    protocol, state, a, b, n, seq, smoothing = args
    target = born_behavior(state, a, b).table[0, 0]
    model = _lhv.estimate_behavior(protocol, a, b, n, seq)
    return DivergenceReport.compare(target, model, a, b, smoothing=smoothing)


def sweep(
    protocol: _lhv.Protocol,
    state: TwoQubitState,
    settings,
    n: int = _lhv.DEFAULT_SAMPLES,
    seed: int = 0,
    smoothing: float | None = None,
    workers: int = 1,
) -> SweepSummary:
    """Per-setting divergence of the protocol estimate from the Born table.

    Each setting draws its LHVs from the stream ``(seed, key, chunk)`` where
    ``key`` is a digest of the setting itself, so reports do not depend on
    the order of ``settings`` or on the worker count.
    """
    settings = [(as_unit(a), as_unit(b)) for a, b in settings]
    if not settings:
        raise ValueError("need at least one setting")
    jobs = [
        (protocol, state, a, b, n, _lhv.stream(seed, *setting_key(a, b)), smoothing)
        for a, b in settings
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            reports = list(ex.map(_one_setting, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        reports = [_one_setting(job) for job in jobs]
    meta = {
        "theta": state.theta,
        "n_samples": n,
        "seed": seed,
        "smoothing": smoothing,
        **protocol.describe(),
    }
    return SweepSummary(reports, meta=meta)


def report_dicts(summary: SweepSummary) -> list[dict]:
    return [asdict(r) for r in summary.per_setting]
