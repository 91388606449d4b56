"""Exact quantum target behaviours.

Two families of targets are produced here:

* projective qubit measurements on ``|psi(theta)> = cos(theta)|01> - sin(theta)|10>``,
  parametrised by Bloch vectors for Alice and Bob;
* projective measurements on the maximally entangled qudit pair
  ``|Phi_d> = sum_i |ii> / sqrt(d)``, parametrised by orthonormal bases.

Outcome labels are fixed globally: ``+1`` is index 0 and ``-1`` is index 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

NORM_TOL = 1e-12
NORMALIZATION_TOL = 1e-10
# Theta values this close outside [0, pi/4] are snapped onto the boundary,
# so that rounded inputs such as 0.7854 are accepted.
THETA_SNAP = 1e-4


@dataclass(frozen=True)
class TwoQubitState:
    """Partially entangled state cos(theta)|01> - sin(theta)|10>."""

    theta: float

    def __post_init__(self):
        theta = float(self.theta)
        if not math.isfinite(theta):
            raise ValueError("theta must be finite")
        if -THETA_SNAP <= theta < 0.0:
            theta = 0.0
        elif math.pi / 4 < theta <= math.pi / 4 + THETA_SNAP:
            theta = math.pi / 4
        if not 0.0 <= theta <= math.pi / 4:
            raise ValueError(f"theta={self.theta!r} outside [0, pi/4]")
        object.__setattr__(self, "theta", theta)

    @property
    def vector(self) -> np.ndarray:
        """State vector in the basis |00>, |01>, |10>, |11>."""
        return np.array([0.0, math.cos(self.theta), -math.sin(self.theta), 0.0], dtype=complex)

    @property
    def is_maximally_entangled(self) -> bool:
        return self.theta == math.pi / 4


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        if abs(n - 1.0) > NORM_TOL:
            raise ValueError(f"Bloch vector not unit norm (|v| = {n!r})")

    @classmethod
    def from_array(cls, v, normalize: bool = False) -> "BlochVector":
        v = np.asarray(v, dtype=float).reshape(3)
        if normalize:
            v = v / np.linalg.norm(v)
        return cls(float(v[0]), float(v[1]), float(v[2]))

    @classmethod
    def from_angles(cls, polar: float, azimuth: float) -> "BlochVector":
        return cls(
            math.sin(polar) * math.cos(azimuth),
            math.sin(polar) * math.sin(azimuth),
            math.cos(polar),
        )

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


def as_unit(v) -> np.ndarray:
    """Return ``v`` as a float array of shape (3,), checking unit norm."""
    if isinstance(v, BlochVector):
        return v.to_array()
    arr = np.asarray(v, dtype=float).reshape(3)
    n = float(np.linalg.norm(arr))
    if abs(n - 1.0) > NORM_TOL:
        raise ValueError(f"vector not unit norm (|v| = {n!r})")
    return arr


@dataclass(frozen=True, eq=False)
class QuditBasis:
    """Orthonormal basis of C^d, stored as the columns of ``vectors``."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=complex)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 1:
            raise ValueError("basis must be a square d x d array")
        gram = v.conj().T @ v
        if np.max(np.abs(gram - np.eye(v.shape[0]))) > NORMALIZATION_TOL:
            raise ValueError("basis vectors are not orthonormal")
        object.__setattr__(self, "vectors", v)

    @property
    def dimension(self) -> int:
        return self.vectors.shape[0]

    def vector(self, i: int) -> np.ndarray:
        return self.vectors[:, i]

    def to_dict(self) -> dict:
        rows = []
        for i in range(self.dimension):
            col = self.vectors[:, i]
            inter = np.empty(2 * self.dimension)
            inter[0::2] = col.real
            inter[1::2] = col.imag
            rows.append(inter.tolist())
        return {"dimension": self.dimension, "vectors": rows}

    @classmethod
    def from_dict(cls, data: dict) -> "QuditBasis":
        d = int(data["dimension"])
        rows = np.asarray(data["vectors"], dtype=float)
        if rows.shape != (d, 2 * d):
            raise ValueError("basis vectors must be d rows of 2d interleaved floats")
        cols = rows[:, 0::2] + 1j * rows[:, 1::2]
        return cls(cols.T)


@dataclass(frozen=True, eq=False)
class Behavior:
    """Conditional probability table P(a,b|x,y), indexed ``table[x, y, a, b]``."""

    table: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.ndim != 4:
            raise ValueError("behavior table must have shape (nx, ny, na, nb)")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        if self.check:
            if np.any(t < 0):
                raise ValueError("behavior has negative entries")
            sums = t.sum(axis=(2, 3))
            if np.max(np.abs(sums - 1.0)) > NORMALIZATION_TOL:
                raise ValueError("behavior not normalized for every (x, y)")

    @property
    def scenario(self) -> tuple[int, int, int, int]:
        return tuple(int(n) for n in self.table.shape)

    def flat(self) -> np.ndarray:
        return self.table.reshape(-1)

    def signalling_gap(self) -> float:
        """Largest violation of no-signalling in either direction."""
        pa = self.table.sum(axis=3)  # (x, y, a)
        pb = self.table.sum(axis=2)  # (x, y, b)
        gap_a = np.max(np.abs(pa - pa[:, :1, :]))
        gap_b = np.max(np.abs(pb - pb[:1, :, :]))
        return float(max(gap_a, gap_b))

    def is_no_signalling(self, tol: float = NORMALIZATION_TOL) -> bool:
        return self.signalling_gap() <= tol

    def mix(self, other: "Behavior", w: float) -> "Behavior":
        """Return ``w * self + (1 - w) * other``."""
        if self.scenario != other.scenario:
            raise ValueError("scenario mismatch")
        t = w * self.table + (1.0 - w) * other.table
        return Behavior(np.clip(t, 0.0, None))

    def to_dict(self) -> dict:
        return {"scenario": list(self.scenario), "table": self.table.reshape(-1).tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict, check: bool = True) -> "Behavior":
        scenario = tuple(int(n) for n in data["scenario"])
        if len(scenario) != 4:
            raise ValueError("scenario must be [nx, ny, na, nb]")
        table = np.asarray(data["table"], dtype=float)
        if table.size != math.prod(scenario):
            raise ValueError("table length does not match scenario")
        return cls(table.reshape(scenario), check=check)

    @classmethod
    def from_json(cls, text: str, check: bool = True) -> "Behavior":
        return cls.from_dict(json.loads(text), check=check)


def projector(m_hat: np.ndarray, outcome: int) -> np.ndarray:
    """(I + s m.sigma)/2 with s = +1 for index 0 and -1 for index 1."""
    s = 1.0 if outcome == 0 else -1.0
    return 0.5 * (np.eye(2) + s * np.einsum("i,ijk->jk", m_hat, PAULI))


def born_behavior(state: TwoQubitState, a_hat, b_hat) -> Behavior:
    """Born-rule outcome table for a single pair of qubit measurements."""
    a = as_unit(a_hat)
    b = as_unit(b_hat)
    psi = state.vector
    table = np.empty((2, 2))
    for i in range(2):
        pa = projector(a, i)
        for j in range(2):
            op = np.kron(pa, projector(b, j))
            table[i, j] = float(np.real(psi.conj() @ op @ psi))
    return Behavior(np.clip(table, 0.0, None).reshape(1, 1, 2, 2))


def closed_form_stats(state: TwoQubitState, a_hat, b_hat) -> tuple[float, float, float]:
    """Return (<A>, <B>, <AB>) for the state.

    The correlation tensor of |psi(theta)> is diag(-sin 2t, -sin 2t, -1), and the
    local Bloch vectors are +cos 2t z for Alice and -cos 2t z for Bob.
    """
    a = as_unit(a_hat)
    b = as_unit(b_hat)
    c2 = math.cos(2 * state.theta)
    s2 = math.sin(2 * state.theta)
    mean_a = c2 * a[2]
    mean_b = -c2 * b[2]
    corr = -s2 * (a[0] * b[0] + a[1] * b[1]) - a[2] * b[2]
    return float(mean_a), float(mean_b), float(corr)


def stats_to_table(mean_a: float, mean_b: float, corr: float) -> np.ndarray:
    """2x2 table P(A,B) = (1 + A<A> + B<B> + AB E)/4 in index order (+, -)."""
    signs = np.array([1.0, -1.0])
    return 0.25 * (
        1.0 + signs[:, None] * mean_a + signs[None, :] * mean_b + np.outer(signs, signs) * corr
    )


def max_entangled_qudit_behavior(
    d: int,
    alice_bases: Sequence[QuditBasis],
    bob_bases: Sequence[QuditBasis],
    conjugate_bob: bool = False,
) -> Behavior:
    """P(a,b|x,y) = |(<a_x| (x) <b_y|) |Phi_d>|^2.

    With ``conjugate_bob`` Bob's basis vectors are complex conjugated first, which
    turns the amplitude into <a_x|b_y>/sqrt(d). The unconjugated default gives
    sum_i conj(a_i) conj(b_i) / sqrt(d).
    """
    if not alice_bases or not bob_bases:
        raise ValueError("need at least one basis per party")
    for basis in (*alice_bases, *bob_bases):
        if basis.dimension != d:
            raise ValueError(f"basis of dimension {basis.dimension} given for d={d}")
    A = np.stack([bs.vectors for bs in alice_bases])  # (nx, i, a)
    B = np.stack([bs.vectors for bs in bob_bases])  # (ny, i, b)
    if conjugate_bob:
        B = B.conj()
    amp = np.einsum("xia,yib->xyab", A.conj(), B.conj()) / math.sqrt(d)
    table = np.abs(amp) ** 2
    return Behavior(table)


def haar_random_basis(d: int, rng: np.random.Generator) -> QuditBasis:
    """Columns of a Haar-random unitary (QR of a complex Ginibre matrix)."""
    if d < 2:
        raise ValueError("d must be at least 2")
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    q = q * (diag / np.abs(diag))
    return QuditBasis(q)


def computational_basis(d: int) -> QuditBasis:
    return QuditBasis(np.eye(d, dtype=complex))


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)
