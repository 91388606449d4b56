"""LHV+1 protocols: shared randomness, per-round rules and Monte Carlo estimation.

The shared randomness is a pair of independent uniform unit vectors. A
protocol is a pair of local strategies plus a (possibly stochastic) one-bit
message from Alice; for a fixed LHV draw the outcome table is

    P(A,B) = P(c=+1) P1(A) P1(B) + P(c=-1) P2(A) P2(B)

Conventions: sgn(0) = +1, step(0) = 0, outcome +1 is index 0.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import _backend
from .qstate import as_unit

DEFAULT_SAMPLES = 10_000
CHUNK = 1 << 16
PARTY_TAGS = ("alice1", "alice2", "bob1", "bob2")
# sign in P(out=+1) = (1 + s * sgn(.)) / 2 for each party tag
_PARTY_SIGN = {"alice1": -1.0, "alice2": 1.0, "bob1": 1.0, "bob2": -1.0}
_ZHAT = np.array([0.0, 0.0, 1.0])


def sgn(t: float) -> float:
    return 1.0 if t >= 0.0 else -1.0


def step(t: float) -> float:
    return 1.0 if t > 0.0 else 0.0


def _dot(m, v) -> float:
    return m[0] * v[0] + m[1] * v[1] + m[2] * v[2]


@dataclass(frozen=True, eq=False)
class LhvSample:
    lambda1: np.ndarray
    lambda2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lambda1", as_unit(self.lambda1))
        object.__setattr__(self, "lambda2", as_unit(self.lambda2))


@dataclass(frozen=True)
class ProtocolRound:
    a_out: int
    b_out: int
    comm_bit: int


@dataclass(frozen=True)
class PartyCoefficients:
    u: float
    v: float
    w: float
    x: float
    y: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in self.as_tuple()):
            raise ValueError("coefficients must be finite")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.u, self.v, self.w, self.x, self.y)


@dataclass(frozen=True)
class ProtocolCoefficients:
    theta: float
    alice1: PartyCoefficients
    alice2: PartyCoefficients
    bob1: PartyCoefficients
    bob2: PartyCoefficients
    comm_u: float
    comm_v: float
    name: str = ""

    def party(self, tag: str) -> PartyCoefficients:
        if tag not in PARTY_TAGS:
            raise ValueError(f"unknown party tag {tag!r}")
        return getattr(self, tag)

    def as_array(self) -> np.ndarray:
        """Flat layout used by the kernels: four parties (u,v,w,x,y), then comm (u,v)."""
        vals = []
        for tag in PARTY_TAGS:
            vals.extend(self.party(tag).as_tuple())
        vals.extend([self.comm_u, self.comm_v])
        return np.array(vals, dtype=float)

    def to_dict(self) -> dict:
        out = {"name": self.name, "theta": self.theta}
        for tag in PARTY_TAGS:
            p = self.party(tag)
            out[tag] = {"u": p.u, "v": p.v, "w": p.w, "x": p.x, "y": p.y}
        out["comm"] = {"u": self.comm_u, "v": self.comm_v}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ProtocolCoefficients":
        parties = {
            tag: PartyCoefficients(*(float(data[tag][k]) for k in "uvwxy")) for tag in PARTY_TAGS
        }
        return cls(
            theta=float(data["theta"]),
            comm_u=float(data["comm"]["u"]),
            comm_v=float(data["comm"]["v"]),
            name=str(data.get("name", "")),
            **parties,
        )

    def with_biases_zeroed(self) -> "ProtocolCoefficients":
        """Copy with every party's w, x, y set to 0."""
        zeroed = {
            tag: PartyCoefficients(self.party(tag).u, self.party(tag).v, 0.0, 0.0, 0.0)
            for tag in PARTY_TAGS
        }
        return ProtocolCoefficients(
            self.theta, comm_u=self.comm_u, comm_v=self.comm_v, name=self.name + "+zero-bias", **zeroed
        )


def _preset_bytes() -> bytes:
    return resources.files("onebit").joinpath("data/presets.json").read_bytes()


def _check_presets(raw: bytes) -> None:
    expected = resources.files("onebit").joinpath("data/presets.json.sha256").read_text().split()[0]
    if hashlib.sha256(raw).hexdigest() != expected:
        raise RuntimeError("coefficient preset file fails its checksum")


def preset_names() -> list[str]:
    raw = _preset_bytes()
    _check_presets(raw)
    return [entry["name"] for entry in json.loads(raw)]


def load_preset(name: str) -> ProtocolCoefficients:
    """Load a shipped coefficient set by name (``"5pi/32"``) or from a JSON path."""
    raw = _preset_bytes()
    _check_presets(raw)
    table = {entry["name"]: entry for entry in json.loads(raw)}
    key = name.replace(" ", "").replace("π", "pi")
    if key in table:
        return ProtocolCoefficients.from_dict(table[key])
    path = Path(name)
    if path.exists():
        return ProtocolCoefficients.from_dict(json.loads(path.read_text()))
    raise KeyError(f"no coefficient preset or file named {name!r}; presets: {sorted(table)}")


def preset_for_theta(theta: float, tol: float = 1e-9) -> ProtocolCoefficients:
    raw = _preset_bytes()
    _check_presets(raw)
    for entry in json.loads(raw):
        if abs(entry["theta"] - theta) <= tol:
            return ProtocolCoefficients.from_dict(entry)
    raise KeyError(f"no shipped preset for theta={theta!r}")


# ---------------------------------------------------------------------------
# shared randomness

def sample_lhv(rng: np.random.Generator) -> LhvSample:
    l1 = rng.standard_normal(3)
    l2 = rng.standard_normal(3)
    return LhvSample(l1 / np.linalg.norm(l1), l2 / np.linalg.norm(l2))


def sample_lhv_batch(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    """n independent LHV draws as two (n, 3) arrays of unit vectors."""
    g = rng.standard_normal((n, 2, 3))
    g /= np.linalg.norm(g, axis=2, keepdims=True)
    return np.ascontiguousarray(g[:, 0]), np.ascontiguousarray(g[:, 1])


def stream(seed, *keys: int) -> np.random.SeedSequence:
    """Counter-addressed child seed sequence for (seed, key0, key1, ...)."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(keys))
    return np.random.SeedSequence(seed, spawn_key=tuple(keys))


# ---------------------------------------------------------------------------
# single-round rules

def _maxent_vector(a, lhv: LhvSample) -> tuple[float, np.ndarray]:
    c = sgn(_dot(a, lhv.lambda1)) * sgn(_dot(a, lhv.lambda2))
    return c, lhv.lambda1 + c * lhv.lambda2


def max_entangled_round(a_hat, b_hat, lhv: LhvSample) -> ProtocolRound:
    a = as_unit(a_hat)
    b = as_unit(b_hat)
    c, v = _maxent_vector(a, lhv)
    return ProtocolRound(int(-sgn(_dot(a, v))), int(sgn(_dot(b, v))), int(c))


def toner_bacon_round(a_hat, b_hat, lhv: LhvSample) -> ProtocolRound:
    a = as_unit(a_hat)
    b = as_unit(b_hat)
    c, v = _maxent_vector(a, lhv)
    return ProtocolRound(int(-sgn(_dot(a, lhv.lambda1))), int(sgn(_dot(b, v))), int(c))


def semianalytical_local_prob(party_tag: str, m_hat, lhv: LhvSample, coeffs: ProtocolCoefficients) -> float:
    """P(output = +1) for one party's local strategy; always 0 or 1."""
    p = coeffs.party(party_tag)
    m = as_unit(m_hat)
    l1, l2 = lhv.lambda1, lhv.lambda2
    lam = (p.u * l1[0] + l2[0], p.u * l1[1] + l2[1], p.u * l1[2] + l2[2] + p.v)
    s = sgn(_dot(m, lam) + (p.w + p.x * l1[2] + p.y * l2[2]))
    return (1.0 + _PARTY_SIGN[party_tag] * s) * 0.5


def comm_bias(lhv: LhvSample, coeffs: ProtocolCoefficients) -> float:
    return coeffs.comm_u + coeffs.comm_v * lhv.lambda2[2] * (1.0 - lhv.lambda1[2])


def semianalytical_comm_prob(a_hat, lhv: LhvSample, coeffs: ProtocolCoefficients) -> float:
    """P(c = +1) from the clipped four-term step expression."""
    a = as_unit(a_hat)
    d1 = _dot(a, lhv.lambda1)
    d2 = _dot(a, lhv.lambda2)
    bc = comm_bias(lhv, coeffs)
    f = (
        step(d1 + bc) * step(d2 + bc)
        + step(-d1 + bc) * step(-d2 + bc)
        - step(-d1 - bc) * step(d2 - bc)
        - step(d1 - bc) * step(-d2 - bc)
    )
    return 0.5 * (1.0 - min(max(f, -1.0), 1.0))


# ---------------------------------------------------------------------------
# protocols as strategy pairs

class Protocol:
    """An LHV+1 protocol split into what Alice and Bob may each compute.

    ``alice`` sees only (a_hat, lhv) and returns (P(c=+1), P1(A=+1), P2(A=+1));
    ``bob`` sees only (b_hat, lhv) and returns (P1(B=+1), P2(B=+1)).
    """

    name = "protocol"
    kind: int

    def params(self):
        return None

    def alice(self, a_hat, lhv: LhvSample) -> tuple[float, float, float]:
        raise NotImplementedError

    def bob(self, b_hat, lhv: LhvSample) -> tuple[float, float]:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"protocol": self.name}


def _plus(t: float) -> float:
    return 1.0 if t > 0 else 0.0


class MaxEntangledProtocol(Protocol):
    name = "max-entangled"
    kind = _backend.MAX_ENTANGLED

    def alice(self, a_hat, lhv):
        a = as_unit(a_hat)
        c = sgn(_dot(a, lhv.lambda1)) * sgn(_dot(a, lhv.lambda2))
        out1 = -sgn(_dot(a, lhv.lambda1 + lhv.lambda2))
        out2 = -sgn(_dot(a, lhv.lambda1 - lhv.lambda2))
        return _plus(c), _plus(out1), _plus(out2)

    def bob(self, b_hat, lhv):
        b = as_unit(b_hat)
        return _plus(sgn(_dot(b, lhv.lambda1 + lhv.lambda2))), _plus(sgn(_dot(b, lhv.lambda1 - lhv.lambda2)))


class TonerBaconProtocol(MaxEntangledProtocol):
    name = "toner-bacon"
    kind = _backend.TONER_BACON

    def alice(self, a_hat, lhv):
        a = as_unit(a_hat)
        c = sgn(_dot(a, lhv.lambda1)) * sgn(_dot(a, lhv.lambda2))
        out = _plus(-sgn(_dot(a, lhv.lambda1)))
        return _plus(c), out, out


class SemianalyticalProtocol(Protocol):
    name = "semianalytical"
    kind = _backend.SEMIANALYTICAL

    def __init__(self, coeffs: ProtocolCoefficients):
        self.coeffs = coeffs

    def params(self):
        return self.coeffs.as_array()

    def alice(self, a_hat, lhv):
        return (
            semianalytical_comm_prob(a_hat, lhv, self.coeffs),
            semianalytical_local_prob("alice1", a_hat, lhv, self.coeffs),
            semianalytical_local_prob("alice2", a_hat, lhv, self.coeffs),
        )

    def bob(self, b_hat, lhv):
        return (
            semianalytical_local_prob("bob1", b_hat, lhv, self.coeffs),
            semianalytical_local_prob("bob2", b_hat, lhv, self.coeffs),
        )

    def describe(self):
        return {"protocol": self.name, "coefficients": self.coeffs.to_dict()}


PROTOCOLS = {
    "max-entangled": MaxEntangledProtocol,
    "toner-bacon": TonerBaconProtocol,
}


def make_protocol(name: str, coeffs: ProtocolCoefficients | None = None) -> Protocol:
    if name == "semianalytical":
        if coeffs is None:
            raise ValueError("the semianalytical protocol needs coefficients")
        return SemianalyticalProtocol(coeffs)
    try:
        return PROTOCOLS[name]()
    except KeyError:
        raise ValueError(f"unknown protocol {name!r}") from None


def lhv1_single_lambda(protocol: Protocol, a_hat, b_hat, lhv: LhvSample) -> np.ndarray:
    """2x2 outcome table for one LHV draw (convex mixture of the two strategies)."""
    pc, pa1, pa2 = protocol.alice(a_hat, lhv)
    pb1, pb2 = protocol.bob(b_hat, lhv)
    qc = 1.0 - pc
    return np.array(
        [
            [pc * pa1 * pb1 + qc * pa2 * pb2, pc * pa1 * (1.0 - pb1) + qc * pa2 * (1.0 - pb2)],
            [pc * (1.0 - pa1) * pb1 + qc * (1.0 - pa2) * pb2,
             pc * (1.0 - pa1) * (1.0 - pb1) + qc * (1.0 - pa2) * (1.0 - pb2)],
        ]
    )


def table_sums(protocol: Protocol, a_hat, b_hat, l1: np.ndarray, l2: np.ndarray, backend=None) -> np.ndarray:
    """Sum of per-draw tables over the given LHV arrays, as a 2x2 array."""
    k = backend if backend is not None else _backend.kernels
    a = as_unit(a_hat)
    b = as_unit(b_hat)
    return np.asarray(k.mc_table_sums(protocol.kind, a, b, l1, l2, protocol.params())).reshape(2, 2)


def estimate_behavior(protocol: Protocol, a_hat, b_hat, n: int = DEFAULT_SAMPLES, rng=None) -> np.ndarray:
    """Monte Carlo estimate of the protocol's 2x2 outcome table from n LHV draws.

    ``rng`` may be a Generator (consumed sequentially) or a seed /
    SeedSequence, in which case chunk ``k`` of the draws uses the child stream
    ``(seed, k)`` so results do not depend on how chunks are scheduled.
    """
    if n < 1:
        raise ValueError("need at least one LHV sample")
    if rng is None:
        rng = np.random.default_rng()
    sums = np.zeros((2, 2))
    done = 0
    k = 0
    while done < n:
        m = min(CHUNK, n - done)
        if isinstance(rng, np.random.Generator):
            gen = rng
        else:
            gen = np.random.default_rng(stream(rng, k))
        l1, l2 = sample_lhv_batch(gen, m)
        sums += table_sums(protocol, a_hat, b_hat, l1, l2)
        done += m
        k += 1
    return sums / n
