"""Local and one-bit-communication polytopes of a Bell scenario.

A deterministic one-bit strategy is a message function ``msg: X -> {0,1}``,
Alice's outputs ``alice_out[x]`` and two rows of Bob outputs
``bob_out[m][y]``. Its behaviour has a single 1 in each (x, y) block, at
``(alice_out[x], bob_out[msg[x]][y])``. Strategies are stored canonically:
``msg[0] == 0``, and a constant message carries two identical Bob rows, so
distinct canonical strategies give distinct behaviours.

Membership in the convex hull is decided without materialising the vertex
list: a linear oracle returns the vertex maximising any functional, and a
fully corrective Frank-Wolfe loop uses it to find the nearest hull point.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog, nnls

from . import _backend
from .qstate import Behavior

MAX_NX = 8
MAX_BOB_PAIRS = 10**6
MAX_ORACLE_WORK = 10**7
MEMBERSHIP_TOL = 1e-7
VISIBILITY_TOL = 5e-5
ORACLE_TIE_TOL = 1e-12
# outside certificates need the hyperplane to clear the point by this much
CERT_TOL = 1e-12
SET_TAGS = ("local", "comm")


class GuardExceededError(ValueError):
    """Scenario too large for enumeration or for the vertex oracle."""


class NonConvergenceError(RuntimeError):
    """An iterative solver stopped before reaching a certified answer."""


@dataclass(frozen=True)
class Scenario:
    nx: int
    ny: int
    na: int
    nb: int

    def __post_init__(self):
        for name in ("nx", "ny", "na", "nb"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")

    @classmethod
    def parse(cls, text: str) -> "Scenario":
        parts = [p for p in text.replace("(", "").replace(")", "").split(",") if p.strip()]
        if len(parts) != 4:
            raise ValueError(f"scenario must be 'nx,ny,na,nb', got {text!r}")
        return cls(*(int(p) for p in parts))

    @classmethod
    def of(cls, obj) -> "Scenario":
        if isinstance(obj, Scenario):
            return obj
        if isinstance(obj, Behavior):
            return cls(*obj.scenario)
        if isinstance(obj, str):
            return cls.parse(obj)
        return cls(*obj)

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.nx, self.ny, self.na, self.nb)

    @property
    def dim(self) -> int:
        return self.nx * self.ny * self.na * self.nb

    def naive_comm_count(self) -> int:
        return self.na**self.nx * self.nb ** (2 * self.ny) * 2**self.nx

    def comm_count(self) -> int:
        """Distinct one-bit vertices (leading factor |A|^|X|)."""
        return self.na**self.nx * self._dedup_bracket()

    def printed_comm_count(self) -> int:
        """The same count with a leading factor |A|, as the formula is usually quoted."""
        return self.na * self._dedup_bracket()

    def _dedup_bracket(self) -> int:
        rows = self.nb**self.ny
        return rows + (2 ** (self.nx - 1) - 1) * (rows * rows - rows)

    def local_count(self) -> int:
        return self.na**self.nx * self.nb**self.ny

    def check_enumerable(self) -> None:
        if self.nx > MAX_NX or self.nb ** (2 * self.ny) > MAX_BOB_PAIRS:
            raise GuardExceededError(
                f"scenario {self.shape} exceeds the enumeration guard "
                f"(nx <= {MAX_NX}, nb^(2 ny) <= {MAX_BOB_PAIRS})"
            )

    def check_oracle(self) -> None:
        if self.nb ** (2 * self.ny) * 2 ** (self.nx - 1) > MAX_ORACLE_WORK:
            raise GuardExceededError(
                f"scenario {self.shape} exceeds the oracle guard "
                f"(nb^(2 ny) 2^(nx-1) <= {MAX_ORACLE_WORK})"
            )

    def __str__(self) -> str:
        return ",".join(str(n) for n in self.shape)


@dataclass(frozen=True)
class CommStrategy:
    msg: tuple[int, ...]
    alice_out: tuple[int, ...]
    bob_out: tuple[tuple[int, ...], tuple[int, ...]]

    def __post_init__(self):
        object.__setattr__(self, "msg", tuple(int(m) for m in self.msg))
        object.__setattr__(self, "alice_out", tuple(int(a) for a in self.alice_out))
        object.__setattr__(self, "bob_out", tuple(tuple(int(b) for b in row) for row in self.bob_out))
        if len(self.bob_out) != 2 or len(self.bob_out[0]) != len(self.bob_out[1]):
            raise ValueError("bob_out must be two rows of equal length")
        if len(self.msg) != len(self.alice_out):
            raise ValueError("msg and alice_out must both have length nx")
        if any(m not in (0, 1) for m in self.msg):
            raise ValueError("messages are single bits")

    @property
    def is_local(self) -> bool:
        return len(set(self.msg)) == 1

    def is_canonical(self) -> bool:
        if self.msg[0] != 0:
            return False
        return not self.is_local or self.bob_out[0] == self.bob_out[1]

    def canonical(self) -> "CommStrategy":
        msg, rows = self.msg, self.bob_out
        if msg[0] == 1:
            msg = tuple(1 - m for m in msg)
            rows = (rows[1], rows[0])
        if all(m == 0 for m in msg):
            rows = (rows[0], rows[0])
        return CommStrategy(msg, self.alice_out, rows)

    def outputs(self, x: int, y: int) -> tuple[int, int]:
        return self.alice_out[x], self.bob_out[self.msg[x]][y]

    def to_dict(self) -> dict:
        return {"msg": list(self.msg), "alice_out": list(self.alice_out), "bob_out": [list(r) for r in self.bob_out]}


def strategy_to_behavior(strat: CommStrategy, s) -> Behavior:
    s = Scenario.of(s)
    if len(strat.msg) != s.nx or len(strat.bob_out[0]) != s.ny:
        raise ValueError("strategy does not match scenario")
    table = np.zeros(s.shape)
    for x in range(s.nx):
        for y in range(s.ny):
            a, b = strat.outputs(x, y)
            table[x, y, a, b] = 1.0
    return Behavior(table)


# ---------------------------------------------------------------------------
# enumeration

@lru_cache(maxsize=None)
def _digits(base: int, length: int) -> np.ndarray:
    """All base-``base`` tuples of the given length, lexicographic, as rows."""
    if length == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(list(itertools.product(range(base), repeat=length)), dtype=np.int64)


@lru_cache(maxsize=None)
def _messages(nx: int) -> np.ndarray:
    """Canonical message functions (msg[0] = 0), lexicographic; row 0 is constant."""
    return np.concatenate([np.zeros((2 ** (nx - 1), 1), dtype=np.int64), _digits(2, nx - 1)], axis=1)


@dataclass(frozen=True, eq=False)
class VertexList(Sequence):
    """Compact, index-addressable list of canonical deterministic strategies.

    Order is lexicographic in (msg, bob_out, alice_out); the local vertices are
    the leading block with a constant message.
    """

    scenario: Scenario
    msg: np.ndarray  # (K, nx)
    alice: np.ndarray  # (K, nx)
    bob: np.ndarray  # (K, 2, ny)
    set_tag: str = "comm"

    def __len__(self) -> int:
        return self.msg.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return CommStrategy(self.msg[i], self.alice[i], (self.bob[i, 0], self.bob[i, 1]))

    def __iter__(self) -> Iterator[CommStrategy]:
        for i in range(len(self)):
            yield self[i]

    def flat_indices(self) -> np.ndarray:
        """(K, nx*ny) positions of the ones in each flattened behaviour table."""
        s = self.scenario
        x = np.arange(s.nx)[:, None]
        y = np.arange(s.ny)[None, :]
        b = np.take_along_axis(self.bob, self.msg[:, :, None].repeat(s.ny, axis=2), axis=1)  # (K, nx, ny)
        a = self.alice[:, :, None]
        idx = ((x * s.ny + y) * s.na + a) * s.nb + b
        return idx.reshape(len(self), -1)

    def matrix(self) -> sparse.csr_matrix:
        """Sparse 0/1 matrix with one flattened vertex per row."""
        idx = self.flat_indices()
        k, m = idx.shape
        indptr = np.arange(0, k * m + 1, m)
        return sparse.csr_matrix((np.ones(k * m), idx.ravel(), indptr), shape=(k, self.scenario.dim))

    def behaviors(self) -> np.ndarray:
        """Dense (K, nx, ny, na, nb) tables; only for small lists."""
        return self.matrix().toarray().reshape((len(self),) + self.scenario.shape)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(st.to_dict()) + "\n" for st in self)


def _enumerate(s: Scenario, local: bool) -> VertexList:
    s.check_enumerable()
    rows = _digits(s.nb, s.ny)
    nrows = rows.shape[0]
    alices = _digits(s.na, s.nx)
    nal = alices.shape[0]
    msgs = _messages(s.nx)
    if local:
        msgs = msgs[:1]
    blocks_msg, blocks_r0, blocks_r1 = [], [], []
    for mi, m in enumerate(msgs):
        if mi == 0:
            r0 = np.arange(nrows)
            r1 = r0
        else:
            r0, r1 = np.meshgrid(np.arange(nrows), np.arange(nrows), indexing="ij")
            keep = r0 != r1
            r0, r1 = r0[keep], r1[keep]
        blocks_msg.append(np.repeat(m[None, :], r0.size, axis=0))
        blocks_r0.append(r0)
        blocks_r1.append(r1)
    msg = np.concatenate(blocks_msg)
    r0 = np.concatenate(blocks_r0)
    r1 = np.concatenate(blocks_r1)
    npairs = msg.shape[0]
    bob = np.stack([rows[r0], rows[r1]], axis=1)
    return VertexList(
        s,
        msg=np.repeat(msg, nal, axis=0).astype(np.int8),
        alice=np.tile(alices, (npairs, 1)).astype(np.int8),
        bob=np.repeat(bob, nal, axis=0).astype(np.int8),
        set_tag="local" if local else "comm",
    )


def enumerate_comm_vertices(s) -> VertexList:
    """All canonical deterministic one-bit strategies, duplicate free."""
    s = Scenario.of(s)
    vl = _enumerate(s, local=False)
    assert len(vl) == s.comm_count()
    return vl


def enumerate_local_vertices(s) -> VertexList:
    s = Scenario.of(s)
    vl = _enumerate(s, local=True)
    assert len(vl) == s.local_count()
    return vl


def enumerate_vertices(s, set_tag: str) -> VertexList:
    _check_tag(set_tag)
    return enumerate_local_vertices(s) if set_tag == "local" else enumerate_comm_vertices(s)


def _check_tag(set_tag: str) -> None:
    if set_tag not in SET_TAGS:
        raise ValueError(f"set_tag must be one of {SET_TAGS}, got {set_tag!r}")


# ---------------------------------------------------------------------------
# linear oracle

def _first_within(values: np.ndarray, best: float, tol: float) -> int:
    return int(np.argmax(values >= best - tol))


def _oracle_choice(D: np.ndarray, s: Scenario, local: bool) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Lexicographically first maximiser as (msg, alice, row0, row1)."""
    rows = _digits(s.nb, s.ny)
    scale = 1.0 + float(np.max(np.abs(D))) * s.nx * s.ny
    tol = ORACLE_TIE_TOL * scale
    G, Aidx = _backend.kernels.oracle_row_scores(D, rows, tol)
    msgs = _messages(s.nx)
    if local:
        msgs = msgs[:1]
    # value of message m with rows (r0, r1) splits into sum_{msg=0} G[x, r0] + sum_{msg=1} G[x, r1]
    S1 = msgs.astype(float) @ G
    S0 = (1 - msgs).astype(float) @ G
    best0 = S0.max(axis=1)
    best1 = S1.max(axis=1)
    best1[0] = 0.0
    vals = best0 + best1
    mi = _first_within(vals, float(vals.max()), tol)
    msg = msgs[mi]
    r0 = _first_within(S0[mi], best0[mi], tol)
    r1 = r0 if mi == 0 else _first_within(S1[mi], best1[mi], tol)
    if r1 == r0 and mi != 0:
        msg = msgs[0]
    chosen = np.where(msg == 0, r0, r1)
    alice = Aidx[np.arange(s.nx), chosen]
    return msg, alice, r0, r1


def _vertex_flat(s: Scenario, msg, alice, r0: int, r1: int) -> np.ndarray:
    rows = _digits(s.nb, s.ny)
    brow = np.where(np.asarray(msg)[:, None] == 0, rows[r0][None, :], rows[r1][None, :])  # (nx, ny)
    x = np.arange(s.nx)[:, None]
    y = np.arange(s.ny)[None, :]
    return (((x * s.ny + y) * s.na + np.asarray(alice)[:, None]) * s.nb + brow).ravel()


def _oracle_flat(D: np.ndarray, s: Scenario, local: bool) -> tuple[np.ndarray, float, tuple]:
    msg, alice, r0, r1 = _oracle_choice(D, s, local)
    idx = _vertex_flat(s, msg, alice, r0, r1)
    value = float(np.sum(D.reshape(-1)[idx]))
    return idx, value, (msg, alice, r0, r1)


def _to_strategy(s: Scenario, choice) -> CommStrategy:
    msg, alice, r0, r1 = choice
    rows = _digits(s.nb, s.ny)
    return CommStrategy(msg, alice, (rows[r0], rows[r1] if msg.any() else rows[r0]))


def comm_oracle(direction, s, set_tag: str = "comm") -> tuple[CommStrategy, float]:
    """Vertex maximising <direction, V> over the chosen polytope, and that maximum.

    Exact: for each canonical message function the objective separates into a
    term for Bob's row 0 and one for row 1, and Alice's output is optimised per
    input. Ties go to the lexicographically first strategy in (msg, bob, alice).
    """
    _check_tag(set_tag)
    s = Scenario.of(s)
    s.check_oracle()
    D = np.asarray(direction, dtype=float).reshape(s.shape)
    _, value, choice = _oracle_flat(D, s, set_tag == "local")
    return _to_strategy(s, choice), value


def local_oracle(direction, s) -> tuple[CommStrategy, float]:
    return comm_oracle(direction, s, "local")


def bell_value(functional, s, set_tag: str = "comm", game: bool = False) -> float:
    """Maximum of the functional over the polytope; ``game`` divides by nx*ny."""
    s = Scenario.of(s)
    _, value = comm_oracle(functional, s, set_tag)
    return value / (s.nx * s.ny) if game else value


# ---------------------------------------------------------------------------
# membership

@dataclass
class MembershipResult:
    inside: bool
    distance: float
    set_tag: str
    iterations: int
    weights: np.ndarray | None = None
    vertices: list[CommStrategy] | None = None
    functional: np.ndarray | None = None
    functional_value: float | None = None
    vertex_max: float | None = None
    support: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def margin(self) -> float | None:
        if self.functional is None:
            return None
        return self.functional_value - self.vertex_max

    def certificate(self) -> dict:
        if self.inside:
            return {
                "kind": "convex-combination",
                "weights": [float(w) for w in self.weights],
                "vertices": [v.to_dict() for v in self.vertices],
            }
        return {
            "kind": "separating-functional",
            "functional": [float(c) for c in self.functional],
            "value_at_point": self.functional_value,
            "max_over_vertices": self.vertex_max,
            "margin": self.margin,
        }

    def to_dict(self) -> dict:
        return {
            "inside": self.inside,
            "distance": self.distance,
            "set": self.set_tag,
            "iterations": self.iterations,
            "certificate": self.certificate(),
        }


def _nearest_in_hull(V: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Convex weights of the point of conv(rows of V) nearest to p.

    Uses min_{u>=0} |W u|^2 + (1.u - 1)^2 with W = (V - p)^T, whose solution is
    the optimal convex weights scaled by 1 / (1 + d^2).
    """
    W = (V - p).T
    A = np.vstack([W, np.ones((1, V.shape[0]))])
    rhs = np.zeros(A.shape[0])
    rhs[-1] = 1.0
    u, _ = nnls(A, rhs, maxiter=50 * A.shape[1] + 100)
    total = u.sum()
    if total <= 0:
        raise NonConvergenceError("degenerate nearest-point subproblem")
    return u / total


def _exact_weights(V: np.ndarray, p: np.ndarray) -> np.ndarray | None:
    k = V.shape[0]
    A_eq = np.vstack([V.T, np.ones((1, k))])
    b_eq = np.append(p, 1.0)
    res = linprog(np.zeros(k), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        return None
    w = np.clip(res.x, 0.0, None)
    return w / w.sum()


def membership(
    P,
    s=None,
    set_tag: str = "comm",
    tol: float = MEMBERSHIP_TOL,
    max_iter: int = 20_000,
    initial: Sequence[np.ndarray] = (),
) -> MembershipResult:
    """Decide whether P lies in the local or one-bit polytope.

    Fully corrective Frank-Wolfe on |q - P|^2: each step adds the oracle vertex
    for the residual direction P - q and re-solves the nearest point over the
    active set. Stops inside when |q - P| <= tol (then re-solves the weights
    exactly by LP), or outside as soon as the residual direction separates P
    from every vertex.
    """
    _check_tag(set_tag)
    if isinstance(P, Behavior):
        s = Scenario(*P.scenario) if s is None else Scenario.of(s)
        p = P.flat().astype(float)
    else:
        s = Scenario.of(s)
        p = np.asarray(P, dtype=float).reshape(-1)
    if p.size != s.dim:
        raise ValueError("point does not match scenario")
    s.check_oracle()
    local = set_tag == "local"
    dim = s.dim

    active: list[np.ndarray] = []
    seen: set[bytes] = set()

    def add(idx: np.ndarray) -> bool:
        key = np.sort(idx).tobytes()
        if key in seen:
            return False
        seen.add(key)
        active.append(idx)
        return True

    for idx in initial:
        add(np.asarray(idx))
    if not active:
        idx, _, _ = _oracle_flat(p.reshape(s.shape), s, local)
        add(idx)

    def dense(idxs):
        V = np.zeros((len(idxs), dim))
        for i, idx in enumerate(idxs):
            V[i, idx] = 1.0
        return V

    V = dense(active)
    for it in range(1, max_iter + 1):
        mu = _nearest_in_hull(V, p)
        keep = mu > 0
        if not keep.all():
            removed = [active[i] for i in np.flatnonzero(~keep)]
            for idx in removed:
                seen.discard(np.sort(idx).tobytes())
            active = [active[i] for i in np.flatnonzero(keep)]
            V = V[keep]
            mu = mu[keep]
        q = mu @ V
        r = p - q
        dist = float(np.linalg.norm(r))
        if dist <= tol:
            return _inside_result(s, set_tag, p, V, mu, active, it)
        idx, vmax, _ = _oracle_flat(r.reshape(s.shape), s, local)
        hp = float(r @ p)
        margin = hp - vmax
        if margin > CERT_TOL * dist:
            return MembershipResult(
                inside=False,
                distance=dist,
                set_tag=set_tag,
                iterations=it,
                functional=r,
                functional_value=hp,
                vertex_max=vmax,
                support=list(active),
            )
        if not add(idx):
            raise NonConvergenceError(
                f"Frank-Wolfe stalled at distance {dist:.3e} after {it} iterations"
            )
        row = np.zeros((1, dim))
        row[0, idx] = 1.0
        V = np.vstack([V, row])
    raise NonConvergenceError(f"membership did not converge in {max_iter} iterations")


def _inside_result(s, set_tag, p, V, mu, active, it) -> MembershipResult:
    exact = _exact_weights(V, p)
    weights = mu
    if exact is not None:
        if np.linalg.norm(exact @ V - p) <= np.linalg.norm(mu @ V - p):
            weights = exact
    nz = weights > 0
    weights = weights[nz]
    support = [active[i] for i in np.flatnonzero(nz)]
    V = V[nz]
    dist = float(np.linalg.norm(weights @ V - p))
    return MembershipResult(
        inside=True,
        distance=dist,
        set_tag=set_tag,
        iterations=it,
        weights=weights,
        vertices=[_strategy_from_flat(s, idx) for idx in support],
        support=support,
    )


def _strategy_from_flat(s: Scenario, idx: np.ndarray) -> CommStrategy:
    """Recover a canonical strategy from the flat positions of its ones."""
    idx = np.asarray(idx).reshape(s.nx, s.ny)
    b = idx % s.nb
    a = (idx // s.nb) % s.na
    alice = a[:, 0]
    row0 = tuple(b[0])
    other = next((tuple(b[x]) for x in range(s.nx) if tuple(b[x]) != row0), row0)
    msg = tuple(0 if tuple(b[x]) == row0 else 1 for x in range(s.nx))
    return CommStrategy(msg, alice, (row0, other)).canonical()


# ---------------------------------------------------------------------------
# visibility

@dataclass
class VisibilityResult:
    """Largest weight w with w P + (1 - w) noise inside the set.

    ``noise_threshold`` is 1 - w_star: the noise weight at which the mixture
    enters the set, the figure usually tabulated as a threshold weight.
    """

    w_star: float
    set_tag: str
    method: str
    bracket: tuple[float, float]
    reference_wq: float | None = None
    inside_certificate: MembershipResult | None = field(default=None, repr=False)
    outside_certificate: MembershipResult | None = field(default=None, repr=False)
    iterations: int = 0

    @property
    def noise_threshold(self) -> float:
        return 1.0 - self.w_star

    def to_dict(self) -> dict:
        out = {
            "w_star": self.w_star,
            "noise_threshold": self.noise_threshold,
            "set": self.set_tag,
            "method": self.method,
            "bracket": list(self.bracket),
            "iterations": self.iterations,
        }
        if self.reference_wq is not None:
            out["reference_wq"] = {"value": self.reference_wq, "source": "external reference"}
        if self.outside_certificate is not None:
            out["outside_certificate"] = self.outside_certificate.certificate()
        if self.inside_certificate is not None:
            out["inside_certificate"] = self.inside_certificate.certificate()
        return out


def _as_flat(P, s: Scenario) -> np.ndarray:
    arr = P.flat() if isinstance(P, Behavior) else np.asarray(P, dtype=float).reshape(-1)
    if arr.size != s.dim:
        raise ValueError("point does not match scenario")
    return arr.astype(float)


def visibility(
    P,
    noise,
    s=None,
    set_tag: str = "comm",
    method: str = "bisection",
    tol: float = VISIBILITY_TOL,
    reference_wq: float | None = None,
) -> VisibilityResult:
    """Threshold mixing weight of P against noise for the local or one-bit set."""
    _check_tag(set_tag)
    s = Scenario.of(s if s is not None else P)
    p = _as_flat(P, s)
    z = _as_flat(noise, s)
    if method == "bisection":
        res = _visibility_bisection(p, z, s, set_tag, tol)
    elif method == "direct":
        res = _visibility_direct(p, z, s, set_tag)
    else:
        raise ValueError(f"unknown visibility method {method!r}")
    res.reference_wq = reference_wq
    return res


def _visibility_bisection(p, z, s, set_tag, tol) -> VisibilityResult:
    at_noise = membership(z, s, set_tag)
    if not at_noise.inside:
        raise ValueError("noise point is not inside the set; threshold undefined")
    at_one = membership(p, s, set_tag, initial=at_noise.support)
    if at_one.inside:
        return VisibilityResult(1.0, set_tag, "bisection", (1.0, 1.0), inside_certificate=at_one)
    lo, hi = 0.0, 1.0
    lo_res, hi_res = at_noise, at_one
    steps = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        res = membership(mid * p + (1.0 - mid) * z, s, set_tag, initial=lo_res.support)
        steps += 1
        if res.inside:
            lo, lo_res = mid, res
        else:
            hi, hi_res = mid, res
    return VisibilityResult(
        lo, set_tag, "bisection", (lo, hi),
        inside_certificate=lo_res, outside_certificate=hi_res, iterations=steps,
    )


def _visibility_direct(p, z, s, set_tag, max_iter: int = 10_000) -> VisibilityResult:
    """max w s.t. sum mu_v v - w (P - noise) = noise, sum mu = 1, mu >= 0.

    Solved by column generation: the equality duals of the restricted LP price
    new vertices through the exact oracle.
    """
    local = set_tag == "local"
    at_noise = membership(z, s, set_tag)
    if not at_noise.inside:
        raise ValueError("noise point is not inside the set; threshold undefined")
    cols = list(at_noise.support)
    seen = {np.sort(c).tobytes() for c in cols}
    idx, _, _ = _oracle_flat(p.reshape(s.shape), s, local)
    if np.sort(idx).tobytes() not in seen:
        cols.append(idx)
        seen.add(np.sort(idx).tobytes())
    d = p - z
    dim = s.dim
    for it in range(1, max_iter + 1):
        k = len(cols)
        A = np.zeros((dim + 1, k + 1))
        for j, c in enumerate(cols):
            A[c, j] = 1.0
        A[dim, :k] = 1.0
        A[:dim, k] = -d
        c_obj = np.zeros(k + 1)
        c_obj[k] = -1.0
        bounds = [(0, None)] * k + [(0.0, 1.0)]
        res = linprog(c_obj, A_eq=A, b_eq=np.append(z, 1.0), bounds=bounds, method="highs")
        if res.status != 0:
            raise NonConvergenceError(f"restricted visibility LP failed: {res.message}")
        y = res.eqlin.marginals
        idx, val, _ = _oracle_flat(y[:dim].reshape(s.shape), s, local)
        if val + y[dim] <= 1e-10:
            w = float(res.x[k])
            return VisibilityResult(min(max(w, 0.0), 1.0), set_tag, "direct", (w, w), iterations=it)
        key = np.sort(idx).tobytes()
        if key in seen:
            raise NonConvergenceError("column generation repeated a column")
        seen.add(key)
        cols.append(idx)
    raise NonConvergenceError("visibility column generation did not converge")


# ---------------------------------------------------------------------------
# reference points and functionals

# Bob's output on the second setting is alice_out XOR key[x] (0-indexed outputs)
_TABLE2_KEYS = (0, 2, 3, 1)


def table2_point() -> Behavior:
    """Locally unbiased, maximally correlated (4,2,4,4) point with a 3/4 game value."""
    table = np.zeros((4, 2, 4, 4))
    for x in range(4):
        for a in range(4):
            table[x, 0, a, a] = 0.25
            table[x, 1, a, a ^ _TABLE2_KEYS[x]] = 0.25
    return Behavior(table)


def table2_functional() -> np.ndarray:
    """Indicator of the cells where the Table-II point is supported."""
    return (table2_point().table > 0).astype(float)


def white_noise(s) -> Behavior:
    s = Scenario.of(s)
    return Behavior(np.full(s.shape, 1.0 / (s.na * s.nb)))


def chsh_functional() -> np.ndarray:
    """E00 + E01 + E10 - E11 on (2,2,2,2) in correlator form."""
    parity = np.array([[1.0, -1.0], [-1.0, 1.0]])
    F = np.empty((2, 2, 2, 2))
    for x in range(2):
        for y in range(2):
            F[x, y] = (-1.0 if x == y == 1 else 1.0) * parity
    return F


def maximally_correlated_point(s, permutations=None) -> Behavior:
    """Locally unbiased point whose (x, y) blocks are scaled permutation matrices.

    ``permutations[x][y]`` maps Alice's output to Bob's; the default is
    ``b = (a + x*y) mod n``.
    """
    s = Scenario.of(s)
    if s.na != s.nb:
        raise ValueError("maximally correlated points need na == nb")
    n = s.na
    table = np.zeros(s.shape)
    for x in range(s.nx):
        for y in range(s.ny):
            perm = (
                [(a + x * y) % n for a in range(n)]
                if permutations is None
                else list(permutations[x][y])
            )
            if sorted(perm) != list(range(n)):
                raise ValueError(f"block ({x}, {y}) is not a permutation")
            for a, b in enumerate(perm):
                table[x, y, a, b] = 1.0 / n
    return Behavior(table)


def correlator_value(F: np.ndarray, P: Behavior) -> float:
    return float(np.sum(np.asarray(F).reshape(P.table.shape) * P.table))
