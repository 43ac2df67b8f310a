"""Dense exterior algebra over R^3 and R^(1+3).

k-vectors (and k-covectors, which share the representation in an orthonormal
basis) are stored densely over the C(dim, k) lexicographic combination basis.
The three defining relations implemented here are

* duality pairing      <v1^...^vk, w1^...^wk> = det(v_i . w_j),
* interior product     <eta |_ alpha, beta> = <eta, alpha ^ beta>,
* Hodge dual           xi ^ star(eta) = <xi, eta> e_1^...^e_n,

all with respect to the Euclidean metric and the fixed positively oriented
basis.  In dimension 3 this gives star(a ^ b) = a x b and star(star(v)) = v.
For spacetime use, index 0 is the time direction e_0.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

__all__ = [
    "MultiVector",
    "basis_tuples",
    "wedge",
    "hodge_star",
    "interior",
    "pairing",
    "linear_image",
]


@lru_cache(maxsize=None)
def basis_tuples(dim: int, grade: int) -> tuple[tuple[int, ...], ...]:
    """Lexicographically ordered index tuples of the Lambda_grade basis."""
    return tuple(itertools.combinations(range(dim), grade))


@lru_cache(maxsize=None)
def _basis_pos(dim: int, grade: int) -> dict[tuple[int, ...], int]:
    return {I: n for n, I in enumerate(basis_tuples(dim, grade))}


def _merge(I: tuple[int, ...], J: tuple[int, ...]) -> tuple[int, tuple[int, ...]]:
    """Sign and sorted tuple for e_I ^ e_J; sign 0 when an index repeats."""
    if set(I) & set(J):
        return 0, ()
    merged = I + J
    inversions = 0
    for a in range(len(merged)):
        for b in range(a + 1, len(merged)):
            if merged[a] > merged[b]:
                inversions += 1
    return (-1) ** inversions, tuple(sorted(merged))


class MultiVector:
    """A k-vector over R^dim with dim in {3, 4}.

    Coefficients live on the lexicographic combination basis, e.g. for
    dim=3, grade=2 the basis order is e1^e2, e1^e3, e2^e3 (0-based
    indices (0,1), (0,2), (1,2)).
    """

    __slots__ = ("dim", "grade", "coeffs")

    def __init__(self, dim: int, grade: int, coeffs=None):
        if dim not in (3, 4):
            raise ValueError(f"ambient dimension must be 3 or 4, got {dim}")
        if not 0 <= grade <= dim:
            raise ValueError(f"grade {grade} exceeds ambient dimension {dim}")
        n = len(basis_tuples(dim, grade))
        if coeffs is None:
            coeffs = np.zeros(n)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (n,):
            raise ValueError(f"expected {n} coefficients for grade {grade} in dim {dim}")
        self.dim = dim
        self.grade = grade
        self.coeffs = coeffs

    # -- constructors ------------------------------------------------------

    @classmethod
    def scalar(cls, dim: int, value: float) -> "MultiVector":
        return cls(dim, 0, np.array([float(value)]))

    @classmethod
    def from_vector(cls, v) -> "MultiVector":
        v = np.asarray(v, dtype=float)
        return cls(v.shape[0], 1, v.copy())

    @classmethod
    def basis(cls, dim: int, I: tuple[int, ...]) -> "MultiVector":
        I = tuple(I)
        coeffs = np.zeros(len(basis_tuples(dim, len(I))))
        coeffs[_basis_pos(dim, len(I))[I]] = 1.0
        return cls(dim, len(I), coeffs)

    @classmethod
    def from_vectors(cls, *vectors) -> "MultiVector":
        """v1 ^ v2 ^ ... ^ vk."""
        vs = [np.asarray(v, dtype=float) for v in vectors]
        out = cls.from_vector(vs[0])
        for v in vs[1:]:
            out = wedge(out, cls.from_vector(v))
        return out

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other: "MultiVector") -> "MultiVector":
        self._check_compatible(other)
        return MultiVector(self.dim, self.grade, self.coeffs + other.coeffs)

    def __sub__(self, other: "MultiVector") -> "MultiVector":
        self._check_compatible(other)
        return MultiVector(self.dim, self.grade, self.coeffs - other.coeffs)

    def __neg__(self) -> "MultiVector":
        return MultiVector(self.dim, self.grade, -self.coeffs)

    def __mul__(self, c: float) -> "MultiVector":
        return MultiVector(self.dim, self.grade, self.coeffs * float(c))

    __rmul__ = __mul__

    def _check_compatible(self, other: "MultiVector") -> None:
        if self.dim != other.dim or self.grade != other.grade:
            raise ValueError("dimension/grade mismatch")

    def norm(self) -> float:
        """Euclidean norm of the coefficient vector (= mass for simple k-vectors)."""
        return float(np.linalg.norm(self.coeffs))

    def as_vector(self) -> np.ndarray:
        if self.grade != 1:
            raise ValueError("as_vector requires grade 1")
        return self.coeffs.copy()

    def __repr__(self) -> str:  # pragma: no cover
        return f"MultiVector(dim={self.dim}, grade={self.grade}, coeffs={self.coeffs})"


def wedge(a: MultiVector, b: MultiVector) -> MultiVector:
    """Graded-anticommutative bilinear wedge product a ^ b."""
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    dim = a.dim
    grade = a.grade + b.grade
    if grade > dim:
        raise ValueError(f"grade {grade} exceeds ambient dimension {dim}")
    pos = _basis_pos(dim, grade)
    out = np.zeros(len(basis_tuples(dim, grade)))
    for I, ca in zip(basis_tuples(dim, a.grade), a.coeffs):
        if ca == 0.0:
            continue
        for J, cb in zip(basis_tuples(dim, b.grade), b.coeffs):
            if cb == 0.0:
                continue
            sign, K = _merge(I, J)
            if sign:
                out[pos[K]] += sign * ca * cb
    return MultiVector(dim, grade, out)


def pairing(xi: MultiVector, alpha: MultiVector) -> float:
    """Duality pairing <xi, alpha>; orthonormal so it is the coefficient dot."""
    xi._check_compatible(alpha)
    return float(np.dot(xi.coeffs, alpha.coeffs))


def hodge_star(eta: MultiVector) -> MultiVector:
    """Hodge dual: the unique star(eta) with xi ^ star(eta) = <xi, eta> e_1..e_n."""
    dim, grade = eta.dim, eta.grade
    cograde = dim - grade
    pos = _basis_pos(dim, cograde)
    out = np.zeros(len(basis_tuples(dim, cograde)))
    full = tuple(range(dim))
    for I, c in zip(basis_tuples(dim, grade), eta.coeffs):
        if c == 0.0:
            continue
        Ic = tuple(sorted(set(full) - set(I)))
        sign, _ = _merge(I, Ic)
        out[pos[Ic]] += sign * c
    return MultiVector(dim, cograde, out)


def interior(eta: MultiVector, alpha: MultiVector) -> MultiVector:
    """Interior product eta |_ alpha, defined by <eta |_ alpha, beta> = <eta, alpha ^ beta>."""
    if eta.dim != alpha.dim:
        raise ValueError("dimension mismatch")
    if alpha.grade > eta.grade:
        raise ValueError("interior product needs grade(alpha) <= grade(eta)")
    dim = eta.dim
    grade = eta.grade - alpha.grade
    eta_pos = _basis_pos(dim, eta.grade)
    out = np.zeros(len(basis_tuples(dim, grade)))
    for nJ, J in enumerate(basis_tuples(dim, grade)):
        acc = 0.0
        for I, ca in zip(basis_tuples(dim, alpha.grade), alpha.coeffs):
            if ca == 0.0:
                continue
            sign, K = _merge(I, J)
            if sign:
                acc += ca * sign * eta.coeffs[eta_pos[K]]
        out[nJ] = acc
    return MultiVector(dim, grade, out)


def linear_image(S: np.ndarray, eta: MultiVector) -> MultiVector:
    """Extension of a linear map S to k-vectors: S(v1^..^vk) = (S v1)^..^(S vk).

    S maps R^dim_in -> R^dim_out, given as an (dim_out, dim_in) matrix.
    """
    S = np.asarray(S, dtype=float)
    dim_out = S.shape[0]
    out = MultiVector(dim_out, eta.grade)
    cols = [S[:, j] for j in range(S.shape[1])]
    for I, c in zip(basis_tuples(eta.dim, eta.grade), eta.coeffs):
        if c == 0.0:
            continue
        if eta.grade == 0:
            out = out + MultiVector.scalar(dim_out, c)
            continue
        term = MultiVector.from_vectors(*[cols[i] for i in I])
        out = out + c * term
    return out
