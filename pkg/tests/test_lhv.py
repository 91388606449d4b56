import json
import math
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onebit import _backend, _kernels_py
from onebit import lhv
from onebit.lhv import (
    LhvSample,
    MaxEntangledProtocol,
    ProtocolCoefficients,
    SemianalyticalProtocol,
    TonerBaconProtocol,
    estimate_behavior,
    lhv1_single_lambda,
    load_preset,
    max_entangled_round,
    sample_lhv_batch,
    semianalytical_comm_prob,
    semianalytical_local_prob,
    table_sums,
    toner_bacon_round,
)
from onebit.experiments import parse_theta
from onebit.qstate import TwoQubitState, born_behavior
from onebit.stats import kl_divergence

import oracles

X = np.array([1.0, 0.0, 0.0])
Y = np.array([0.0, 1.0, 0.0])
Z = np.array([0.0, 0.0, 1.0])

PRESET_ROWS = json.loads(resources.files("onebit").joinpath("data/presets.json").read_text())
PRESETS = {row["name"]: row for row in PRESET_ROWS}


@st.composite
def unit_vectors(draw):
    v = np.array([draw(st.floats(-1, 1)) for _ in range(3)])
    n = np.linalg.norm(v)
    if n < 1e-3:
        return Z.copy()
    return v / n


# --- sampling --------------------------------------------------------------

def test_lhv_batch_unit_and_unbiased():
    n = 1_000_000
    l1, l2 = sample_lhv_batch(np.random.default_rng(0), n)
    assert np.max(np.abs(np.linalg.norm(l1, axis=1) - 1)) <= 1e-12
    assert np.max(np.abs(np.linalg.norm(l2, axis=1) - 1)) <= 1e-12
    se = math.sqrt(1 / 3 / n)
    assert np.all(np.abs(l1.mean(axis=0)) <= 3 * se)
    assert np.all(np.abs(l2.mean(axis=0)) <= 3 * se)
    dots = np.einsum("ij,ij->i", l1, l2)
    assert abs(dots.mean()) <= 3 * dots.std() / math.sqrt(n)


# --- single rounds ---------------------------------------------------------

def test_max_entangled_all_positive():
    r = max_entangled_round(Z, Z, LhvSample(Z, Z))
    assert (r.comm_bit, r.a_out, r.b_out) == (1, -1, 1)


def test_max_entangled_sign_bookkeeping():
    r = max_entangled_round(Z, X, LhvSample(Z, -Z))
    assert r.comm_bit == -1
    assert r.a_out == -1
    # b.(l1 + c l2) = x.(2z) = 0 and sgn(0) = +1
    assert r.b_out == 1


def test_toner_bacon_alice_ignores_lambda2():
    rng = np.random.default_rng(1)
    for _ in range(20):
        l2 = oracles.haar_unit_vector(rng)
        b = oracles.haar_unit_vector(rng)
        assert toner_bacon_round(Z, b, LhvSample(Z, l2)).a_out == -1


@settings(max_examples=300, deadline=None)
@given(unit_vectors(), unit_vectors(), unit_vectors(), unit_vectors())
def test_rounds_match_scalar_oracle(a, b, l1, l2):
    sample = LhvSample(l1, l2)
    r = max_entangled_round(a, b, sample)
    assert (r.a_out, r.b_out) == oracles.maxent_outputs(a, b, l1, l2)
    r = toner_bacon_round(a, b, sample)
    assert (r.a_out, r.b_out) == oracles.maxent_outputs(a, b, l1, l2, toner_bacon=True)


def test_zeroed_coefficients_follow_lambda2():
    zero = {"u": 0, "v": 0, "w": 0, "x": 0, "y": 0}
    coeffs = ProtocolCoefficients.from_dict(
        {"theta": 0.5, "alice1": zero, "alice2": zero, "bob1": zero, "bob2": zero, "comm": {"u": 0, "v": 0}}
    )
    a = np.array([0.6, 0.0, 0.8])
    assert semianalytical_local_prob("alice1", a, LhvSample(X, Z), coeffs) == 0.0
    assert semianalytical_local_prob("alice2", a, LhvSample(X, Z), coeffs) == 1.0


def test_hand_evaluated_alice1_singlet_preset():
    coeffs = load_preset("pi/4")
    p = coeffs.alice1
    assert (p.u, p.v, p.w, p.x, p.y) == (-0.9121, 0.2046, -0.0052, 0.0065, 0.0041)
    # a.lambda = v = 0.2046, bias = w = -0.0052, argument 0.1994 > 0
    assert semianalytical_local_prob("alice1", Z, LhvSample(X, Y), coeffs) == 0.0


def test_bob2_against_scalar_oracle():
    row = PRESETS["5pi/32"]
    assert (row["bob2"]["u"], row["bob2"]["v"]) == (0.4924, 0.6380)
    coeffs = load_preset("5pi/32")
    rng = np.random.default_rng(77)
    b = oracles.haar_unit_vector(rng)
    for _ in range(200):
        l1, l2 = oracles.haar_unit_vector(rng), oracles.haar_unit_vector(rng)
        ref = oracles.party_prob(-1, [row["bob2"][k] for k in "uvwxy"], b, l1, l2)
        assert semianalytical_local_prob("bob2", b, LhvSample(l1, l2), coeffs) == ref


def test_comm_step_cases():
    zero = {"u": 0, "v": 0, "w": 0, "x": 0, "y": 0}
    base = {"theta": 0.5, "alice1": zero, "alice2": zero, "bob1": zero, "bob2": zero}
    coeffs = ProtocolCoefficients.from_dict({**base, "comm": {"u": 0, "v": 0}})
    a = Z
    # both dot products positive: f = 1
    assert semianalytical_comm_prob(a, LhvSample(np.array([0.6, 0, 0.8]), np.array([0, 0.6, 0.8])), coeffs) == 0.0
    # a.l1 > 0 > a.l2: f = -1
    assert semianalytical_comm_prob(a, LhvSample(np.array([0.6, 0, 0.8]), np.array([0, 0.6, -0.8])), coeffs) == 1.0


def test_comm_against_scalar_oracle():
    row = PRESETS["5pi/32"]
    assert (row["comm"]["u"], row["comm"]["v"]) == (0.1313, 0.3838)
    coeffs = load_preset("5pi/32")
    rng = np.random.default_rng(78)
    for _ in range(500):
        a, l1, l2 = (oracles.haar_unit_vector(rng) for _ in range(3))
        ref = oracles.comm_prob(row["comm"]["u"], row["comm"]["v"], a, l1, l2)
        assert semianalytical_comm_prob(a, LhvSample(l1, l2), coeffs) == ref


def test_presets_match_table_rows():
    assert [r["name"] for r in PRESET_ROWS] == ["pi/4", "7pi/32", "3pi/16", "5pi/32", "pi/8"]
    for row in PRESET_ROWS:
        c = load_preset(row["name"])
        assert c.theta == pytest.approx(parse_theta(row["name"]))
        assert c.to_dict()["comm"] == row["comm"]


def test_unknown_preset():
    with pytest.raises(KeyError):
        load_preset("pi/3")


# --- locality --------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(unit_vectors(), unit_vectors(), unit_vectors(), unit_vectors(), unit_vectors(), unit_vectors())
def test_locality_under_setting_perturbation(a1, a2, b1, b2, l1, l2):
    sample = LhvSample(l1, l2)
    for proto in (MaxEntangledProtocol(), TonerBaconProtocol(), SemianalyticalProtocol(load_preset("3pi/16"))):
        # Alice's marginal never depends on Bob's setting
        assert np.array_equal(
            lhv1_single_lambda(proto, a1, b1, sample).sum(axis=1),
            lhv1_single_lambda(proto, a1, b2, sample).sum(axis=1),
        )
        # Bob's marginal depends on Alice's setting only through the message
        if proto.alice(a1, sample)[0] == proto.alice(a2, sample)[0]:
            assert np.array_equal(
                lhv1_single_lambda(proto, a1, b1, sample).sum(axis=0),
                lhv1_single_lambda(proto, a2, b1, sample).sum(axis=0),
            )


@settings(max_examples=100, deadline=None)
@given(unit_vectors(), unit_vectors(), unit_vectors(), unit_vectors())
def test_semianalytical_table_matches_oracle(a, b, l1, l2):
    name = "7pi/32"
    got = lhv1_single_lambda(SemianalyticalProtocol(load_preset(name)), a, b, LhvSample(l1, l2))
    assert np.array_equal(got, oracles.semianalytical_table(PRESETS[name], a, b, l1, l2))


def test_deterministic_protocols_single_entry():
    rng = np.random.default_rng(4)
    for _ in range(50):
        a, b, l1, l2 = (oracles.haar_unit_vector(rng) for _ in range(4))
        for proto in (MaxEntangledProtocol(), TonerBaconProtocol()):
            t = lhv1_single_lambda(proto, a, b, LhvSample(l1, l2))
            assert sorted(t.ravel()) == [0, 0, 0, 1]


def test_half_half_mixture():
    class Fixed(lhv.Protocol):
        def alice(self, a, s):
            return 0.5, 1.0, 0.0

        def bob(self, b, s):
            return 1.0, 0.0

    t = lhv1_single_lambda(Fixed(), Z, Z, LhvSample(Z, Z))
    assert np.array_equal(t, [[0.5, 0.0], [0.0, 0.5]])


@settings(max_examples=50, deadline=None)
@given(unit_vectors(), unit_vectors(), st.integers(0, 2**32 - 1))
def test_max_entangled_rotational_covariance(a, b, seed):
    # rotating settings and hidden variables together leaves every round unchanged
    rng = np.random.default_rng(seed)
    R = oracles.random_rotation(rng)
    l1, l2 = oracles.haar_unit_vector(rng), oracles.haar_unit_vector(rng)
    r1 = max_entangled_round(a, b, LhvSample(l1, l2))
    rot = [R @ v for v in (a, b, l1, l2)]
    rot = [v / np.linalg.norm(v) for v in rot]
    r2 = max_entangled_round(rot[0], rot[1], LhvSample(rot[2], rot[3]))
    margins = [abs(a @ l1), abs(a @ l2), abs(a @ (l1 + l2)), abs(a @ (l1 - l2)), abs(b @ (l1 + l2)), abs(b @ (l1 - l2))]
    if min(margins) > 1e-9:
        assert r1 == r2


# --- kernels ---------------------------------------------------------------

def _all_protocols():
    return [MaxEntangledProtocol(), TonerBaconProtocol(), SemianalyticalProtocol(load_preset("5pi/32"))]


def test_kernel_matches_per_draw_tables():
    rng = np.random.default_rng(9)
    a, b = oracles.haar_unit_vector(rng), oracles.haar_unit_vector(rng)
    l1, l2 = sample_lhv_batch(rng, 500)
    for proto in _all_protocols():
        ref = sum(lhv1_single_lambda(proto, a, b, LhvSample(l1[i], l2[i])) for i in range(500))
        assert np.array_equal(table_sums(proto, a, b, l1, l2, backend=_kernels_py), ref)


@pytest.mark.skipif(_backend.BACKEND != "cython", reason="compiled extension not built")
def test_backends_bit_identical():
    from onebit import _ckernels

    rng = np.random.default_rng(10)
    l1, l2 = sample_lhv_batch(rng, 20_000)
    for proto in _all_protocols():
        for _ in range(5):
            a, b = oracles.haar_unit_vector(rng), oracles.haar_unit_vector(rng)
            t_py = table_sums(proto, a, b, l1, l2, backend=_kernels_py)
            t_c = table_sums(proto, a, b, l1, l2, backend=_ckernels)
            assert np.array_equal(t_py, t_c)


def test_single_sample_equals_single_lambda():
    rng = np.random.default_rng(12)
    a, b = oracles.haar_unit_vector(rng), oracles.haar_unit_vector(rng)
    for proto in _all_protocols():
        gen = np.random.default_rng(5)
        est = estimate_behavior(proto, a, b, 1, gen)
        l1, l2 = sample_lhv_batch(np.random.default_rng(5), 1)
        assert np.array_equal(est, lhv1_single_lambda(proto, a, b, LhvSample(l1[0], l2[0])))


def test_estimate_requires_samples():
    with pytest.raises(ValueError):
        estimate_behavior(MaxEntangledProtocol(), Z, Z, 0, 1)


def test_seeded_estimate_is_reproducible():
    p = SemianalyticalProtocol(load_preset("3pi/16"))
    t1 = estimate_behavior(p, X, Z, 150_000, 3)
    t2 = estimate_behavior(p, X, Z, 150_000, 3)
    assert np.array_equal(t1, t2)


def test_regression_pinned_table():
    p = SemianalyticalProtocol(load_preset("5pi/32"))
    a = np.array([0.6, 0.0, 0.8])
    b = np.array([0.0, 0.8, -0.6])
    t = estimate_behavior(p, a, b, 100_000, 12345)
    counts = t * 100_000
    assert np.array_equal(np.rint(counts), [[56455, 14222], [12296, 17027]])
    assert np.max(np.abs(counts - np.rint(counts))) < 1e-6


# --- Monte Carlo against the Born rule -------------------------------------

@pytest.mark.parametrize("proto", [MaxEntangledProtocol(), TonerBaconProtocol()], ids=["maxent", "toner-bacon"])
def test_singlet_statistics(proto):
    rng = np.random.default_rng(21)
    n = 1_000_000
    singlet = TwoQubitState(math.pi / 4)
    for k in range(3):
        a, b = oracles.haar_unit_vector(rng), oracles.haar_unit_vector(rng)
        t = estimate_behavior(proto, a, b, n, lhv.stream(21, k))
        ref = born_behavior(singlet, a, b).table[0, 0]
        sigma = 0.5 / math.sqrt(n)
        assert np.all(np.abs(t - ref) <= 3 * sigma)
        signs = np.array([1, -1])
        E = signs @ t @ signs
        assert abs(E + a @ b) <= 3 / math.sqrt(n)
        assert abs(t.sum(axis=1) @ signs) <= 3 / math.sqrt(n)
        assert abs(t.sum(axis=0) @ signs) <= 3 / math.sqrt(n)


def test_singlet_preset_close_to_singlet():
    proto = SemianalyticalProtocol(load_preset("pi/4"))
    singlet = TwoQubitState(math.pi / 4)
    rng = np.random.default_rng(31)
    kls = []
    for k in range(100):
        a, b = oracles.haar_unit_vector(rng), oracles.haar_unit_vector(rng)
        t = estimate_behavior(proto, a, b, 1_000_000, lhv.stream(31, k))
        kls.append(kl_divergence(born_behavior(singlet, a, b).table[0, 0], t, smoothing=1e-9))
    assert np.median(kls) < 5e-3
