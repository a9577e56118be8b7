"""Coordinate calculus for antisymmetric forms on a chart.

A ``FormField`` stores expression coefficients over sorted multi-indices.
Evaluating it at a point yields a ``FormValue`` whose coefficients are jets,
so exterior derivative, interior product and Lie derivative (via Cartan's
formula) all come out with exact derivatives instead of finite differences.

The module also hosts the tolerance-aware linear algebra used by every
constant-rank and kernel condition: SVD ranks, orthonormal kernel bases and
principal-angle comparisons of subspaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import subspace_angles

from .expr import Expression, Jet2, eval_jet2


class ArityMismatch(Exception):
    pass


class DegreeMismatch(Exception):
    pass


def sorted_indices(n: int, k: int) -> list[tuple[int, ...]]:
    """All sorted multi-indices of length k over n coordinates."""
    return list(combinations(range(n), k))


def insert_index(i: int, J: tuple[int, ...]) -> Optional[tuple[int, tuple[int, ...]]]:
    """Insert i into the sorted tuple J.

    Returns (sign, sorted tuple) with sign = (-1)^position, or None when i
    already occurs in J (the wedge collapses).
    """
    if i in J:
        return None
    pos = 0
    while pos < len(J) and J[pos] < i:
        pos += 1
    sign = -1 if pos % 2 else 1
    return sign, J[:pos] + (i,) + J[pos:]


@dataclass
class FormField:
    """A k-form with expression coefficients, indexed by sorted multi-indices."""

    degree: int
    dim: int
    coeffs: dict[tuple[int, ...], Expression] = field(default_factory=dict)

    def __post_init__(self):
        for idx in self.coeffs:
            if len(idx) != self.degree or tuple(sorted(idx)) != idx:
                raise ValueError(f"bad multi-index {idx} for degree {self.degree}")
            if any(i < 0 or i >= self.dim for i in idx):
                raise ValueError(f"multi-index {idx} out of range for dim {self.dim}")

    def at(self, point: Sequence[float]) -> "FormValue":
        return FormValue(self.degree, self.dim,
                         {idx: eval_jet2(e, point) for idx, e in self.coeffs.items()})

    def is_zero(self) -> bool:
        return not self.coeffs

    @staticmethod
    def zero(degree: int, dim: int) -> "FormField":
        return FormField(degree, dim, {})


@dataclass
class FormValue:
    """A k-form at a point; coefficients are jets of whatever order survives."""

    degree: int
    dim: int
    coeffs: dict[tuple[int, ...], Jet2]

    @staticmethod
    def zero(degree: int, dim: int) -> "FormValue":
        return FormValue(degree, dim, {})

    def __add__(self, other: "FormValue") -> "FormValue":
        if other.degree != self.degree:
            raise DegreeMismatch(f"{self.degree} vs {other.degree}")
        out = dict(self.coeffs)
        for idx, j in other.coeffs.items():
            out[idx] = out[idx] + j if idx in out else j
        return FormValue(self.degree, self.dim, out)

    def __sub__(self, other: "FormValue") -> "FormValue":
        return self + other.scaled(-1.0)

    def scaled(self, c: float) -> "FormValue":
        return FormValue(self.degree, self.dim,
                         {idx: j.scaled(c) for idx, j in self.coeffs.items()})

    def jet_scaled(self, f: Jet2) -> "FormValue":
        return FormValue(self.degree, self.dim,
                         {idx: f * j for idx, j in self.coeffs.items()})

    def d(self) -> "FormValue":
        """Exterior derivative; one derivative order is consumed."""
        out: dict[tuple[int, ...], Jet2] = {}
        for I, j in self.coeffs.items():
            for i in range(self.dim):
                ins = insert_index(i, I)
                if ins is None:
                    continue
                sign, L = ins
                term = j.partial(i).scaled(sign)
                out[L] = out[L] + term if L in out else term
        return FormValue(self.degree + 1, self.dim, out)

    def interior(self, X: Sequence[Jet2]) -> "FormValue":
        """Interior product with the vector of jets X."""
        if self.degree == 0:
            return FormValue.zero(0, self.dim)
        out: dict[tuple[int, ...], Jet2] = {}
        for I, j in self.coeffs.items():
            for m, i in enumerate(I):
                J = I[:m] + I[m + 1:]
                term = (X[i] * j).scaled(-1.0 if m % 2 else 1.0)
                out[J] = out[J] + term if J in out else term
        return FormValue(self.degree - 1, self.dim, out)

    def interior_vec(self, v: np.ndarray) -> "FormValue":
        """Interior product with a plain vector (coefficients keep their order
        only in value; gradients are scaled componentwise)."""
        if self.degree == 0:
            return FormValue.zero(0, self.dim)
        out: dict[tuple[int, ...], Jet2] = {}
        for I, j in self.coeffs.items():
            for m, i in enumerate(I):
                if v[i] == 0.0:
                    continue
                J = I[:m] + I[m + 1:]
                term = j.scaled((-1.0 if m % 2 else 1.0) * float(v[i]))
                out[J] = out[J] + term if J in out else term
        return FormValue(self.degree - 1, self.dim, out)

    def lie(self, X: Sequence[Jet2]) -> "FormValue":
        """Lie derivative along X via Cartan's formula i_X d + d i_X."""
        return self.d().interior(X) + self.interior(X).d()

    def evaluate(self, vectors: Sequence[Sequence[float]]) -> float:
        if len(vectors) != self.degree:
            raise ArityMismatch(f"need {self.degree} vectors, got {len(vectors)}")
        if self.degree == 0:
            return sum(j.value for j in self.coeffs.values()) if self.coeffs else 0.0
        V = np.asarray(vectors, dtype=float)  # rows = vectors
        total = 0.0
        for I, j in self.coeffs.items():
            minor = V[:, list(I)].T  # rows indexed by I, columns by vectors
            total += j.value * float(np.linalg.det(minor))
        return total

    def coeff_value(self, idx: tuple[int, ...]) -> float:
        j = self.coeffs.get(idx)
        return 0.0 if j is None else j.value

    def values_on(self, indices: Sequence[tuple[int, ...]]) -> np.ndarray:
        return np.array([self.coeff_value(idx) for idx in indices])

    def max_abs(self) -> float:
        if not self.coeffs:
            return 0.0
        return max(abs(j.value) for j in self.coeffs.values())


def form_calculus_values(alpha: FormField, point: Sequence[float],
                         vectors: Sequence[Sequence[float]],
                         X: Optional[Sequence[Expression]] = None) -> dict:
    """Evaluate alpha, d(alpha) and optionally L_X alpha on coordinate data.

    ``vectors`` must hold degree(alpha) vectors, or degree+1 to also get the
    exterior-derivative slot.
    """
    k = alpha.degree
    if len(vectors) not in (k, k + 1):
        raise ArityMismatch(f"need {k} or {k + 1} vectors, got {len(vectors)}")
    val = alpha.at(point)
    out = {"alpha": val.evaluate(vectors[:k])}
    if len(vectors) == k + 1:
        out["d_alpha"] = val.d().evaluate(vectors)
    if X is not None:
        Xj = [eval_jet2(e, point) for e in X]
        out["lie"] = val.lie(Xj).evaluate(vectors[:k])
    return out


# ----------------------------------------------------------------------
# Tolerance-aware linear algebra.

@dataclass
class LinearSubspaceResult:
    rank: int
    kernel_basis: np.ndarray        # shape (cols, cols - rank), orthonormal columns
    singular_values: np.ndarray
    tolerance_used: float

    @property
    def kernel_vectors(self) -> list[np.ndarray]:
        return [self.kernel_basis[:, j] for j in range(self.kernel_basis.shape[1])]

    @property
    def nullity(self) -> int:
        return self.kernel_basis.shape[1]


def rank_and_kernel(M: np.ndarray, relative: float = 1e-8) -> LinearSubspaceResult:
    """SVD rank with relative threshold and orthonormal kernel basis.

    rank = #{sigma > relative * sigma_max}; a zero matrix has rank 0 and a
    full identity kernel.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    rows, cols = M.shape
    if cols == 0:
        return LinearSubspaceResult(0, np.zeros((0, 0)), np.zeros(0), 0.0)
    if rows == 0 or not np.any(M):
        return LinearSubspaceResult(0, np.eye(cols), np.zeros(min(rows, cols)), 0.0)
    _, s, vt = np.linalg.svd(M)
    smax = s[0] if s.size else 0.0
    tol = relative * smax
    rank = int(np.sum(s > tol)) if smax > 0.0 else 0
    kernel = vt[rank:].T
    return LinearSubspaceResult(rank, kernel, s, tol)


def orthonormal_columns(M: np.ndarray, relative: float = 1e-8) -> np.ndarray:
    """Orthonormal basis of the column space of M (possibly empty)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] == 0 or not np.any(M):
        return np.zeros((M.shape[0], 0))
    u, s, _ = np.linalg.svd(M, full_matrices=False)
    rank = int(np.sum(s > relative * s[0]))
    return u[:, :rank]


def max_principal_angle(A: np.ndarray, B: np.ndarray) -> float:
    """Largest principal angle between the column spaces (radians).

    Comparing spaces of different dimension is the caller's business; this
    returns the angles over min(dim A, dim B) directions.
    """
    if A.shape[1] == 0 or B.shape[1] == 0:
        return 0.0
    ang = subspace_angles(A, B)
    return float(np.max(ang)) if ang.size else 0.0


def subspace_equal(A: np.ndarray, B: np.ndarray, tol: float) -> tuple[bool, float]:
    """Two-sided equality test: dimensions match and every principal angle
    is at most tol (in radians, which equals the sine bound at this scale)."""
    if A.shape[1] != B.shape[1]:
        return False, float(np.pi / 2)
    angle = max_principal_angle(A, B)
    return angle <= tol, angle


def subspace_contained(A: np.ndarray, B: np.ndarray, tol: float) -> tuple[bool, float]:
    """Containment col(A) in col(B) via principal angles."""
    if A.shape[1] == 0:
        return True, 0.0
    if A.shape[1] > B.shape[1]:
        return False, float(np.pi / 2)
    angle = max_principal_angle(A, B)
    return angle <= tol, angle
