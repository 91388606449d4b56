import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onebit import lhv
from onebit.qstate import TwoQubitState
from onebit.stats import (
    DivergenceReport,
    InfiniteDivergenceWarning,
    SweepSummary,
    kl_divergence,
    n95,
    random_settings,
    sweep,
    tvd,
)


@st.composite
def distributions(draw, size=4, positive=False):
    lo = 1e-6 if positive else 0.0
    w = np.array([draw(st.floats(lo, 1.0)) for _ in range(size)])
    if w.sum() == 0:
        w[0] = 1.0
    return w / w.sum()


def test_kl_examples():
    p = np.array([0.1, 0.2, 0.3, 0.4])
    assert kl_divergence(p, p) == 0.0
    assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)
    expected = 0.7 * math.log(1.4) + 0.3 * math.log(0.6)
    assert kl_divergence([0.7, 0.3], [0.5, 0.5]) == pytest.approx(expected, abs=1e-15)
    assert expected == pytest.approx(0.08228, abs=5e-6)


def test_kl_direction_target_first():
    # D(p||q) != D(q||p); zero-mass target entries are harmless
    assert math.isfinite(kl_divergence([1.0, 0.0], [0.5, 0.5]))
    with pytest.warns(InfiniteDivergenceWarning):
        assert kl_divergence([0.5, 0.5], [1.0, 0.0]) == math.inf


def test_kl_smoothing():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        val = kl_divergence([0.5, 0.5], [1.0, 0.0], smoothing=1e-9)
    assert math.isfinite(val) and val > 0


def test_kl_input_checks():
    with pytest.raises(ValueError):
        kl_divergence([0.5, 0.5], [0.5, 0.5, 0.0])
    with pytest.raises(ValueError):
        kl_divergence([0.6, 0.6], [0.5, 0.5])


def test_tvd_examples():
    assert tvd([0.25] * 4, [0.25] * 4) == 0.0
    assert tvd([1, 0, 0, 0], [0, 0, 1, 0]) == 1.0
    assert tvd([0.7, 0.3], [0.5, 0.5]) == pytest.approx(0.2, abs=1e-15)


def test_n95_examples():
    assert n95(2.9957e-2) == pytest.approx(100.0, rel=1e-4)
    assert n95(2.9957e-4) == pytest.approx(1e4, rel=1e-4)
    assert n95(0.0) == math.inf
    assert n95(1e6, as_count=True) == 1.0
    assert n95(math.inf) == 0.0
    assert n95(math.inf, as_count=True) == 1.0
    with pytest.raises(ValueError):
        n95(-1.0)


@settings(max_examples=300, deadline=None)
@given(distributions(), distributions(positive=True))
def test_pinsker(p, q):
    d = kl_divergence(p, q)
    assert tvd(p, q) <= math.sqrt(d / 2) + 1e-12
    assert d >= 0


@settings(max_examples=200, deadline=None)
@given(distributions(), distributions(positive=True), st.permutations(range(4)))
def test_kl_permutation_invariant(p, q, perm):
    perm = list(perm)
    assert kl_divergence(p[perm], q[perm]) == pytest.approx(kl_divergence(p, q), abs=1e-12)


def test_report_fields():
    r = DivergenceReport.compare([0.7, 0.3], [0.5, 0.5], a_hat=[0, 0, 1], b_hat=[1, 0, 0])
    assert r.n95 == pytest.approx(-math.log(0.05) / r.kl)
    assert r.a_hat == (0.0, 0.0, 1.0)


def test_single_setting_quantiles():
    r = DivergenceReport.compare([0.7, 0.3], [0.5, 0.5])
    summ = SweepSummary([r])
    for metric in ("kl", "tvd", "n95"):
        assert len(set(summ.quantiles[metric].values())) == 1
        assert summ.quantiles[metric]["median"] == getattr(r, metric)


def test_sweep_order_and_worker_independent():
    proto = lhv.MaxEntangledProtocol()
    state = TwoQubitState(math.pi / 4)
    sets = random_settings(12, seed=3)
    base = sweep(proto, state, sets, n=5000, seed=9)
    rev = sweep(proto, state, sets[::-1], n=5000, seed=9)
    par = sweep(proto, state, sets, n=5000, seed=9, workers=2)
    assert [r.kl for r in base.per_setting] == [r.kl for r in rev.per_setting][::-1]
    assert base.to_csv() == par.to_csv()
    assert base.summary_json() == par.summary_json()
    for r in base.per_setting:
        assert r.tvd <= math.sqrt(r.kl / 2) + 1e-12


@pytest.mark.slow
def test_max_entangled_noise_floor():
    # with the exact protocol only estimator noise remains: roughly 3/(2N) nats
    proto = lhv.MaxEntangledProtocol()
    summ = sweep(proto, TwoQubitState(math.pi / 4), random_settings(500, seed=1), n=1_000_000, seed=1)
    assert summ.quantiles["kl"]["median"] <= 1e-4
