"""Background simplicial complexes and the flat norm as a linear program.

The flat norm of a k-chain T subordinate to a complex K is

    F(T) = min { M(Q) + M(R) : T = boundary(Q) + R,
                 Q a (k+1)-chain of K, R a k-chain of K },

solved as an LP after splitting Q and R into positive and negative parts.
Restricted to a fixed complex this is an upper bound for the unrestricted
flat norm; fillings and witnesses are returned for downstream use.

Free-floating chains are snapped onto cone complexes (their segments as
edges plus apex fans), which contain the chains by construction.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog

from .chains import KEY_QUANT_REL, SimplicialCurrent, refine_1chain, simplex_volumes

__all__ = [
    "SimplicialComplex",
    "cone_complex",
    "dense_complex",
    "flat_distance_1chains",
]


class SimplicialComplex:
    """Finite simplicial complex with oriented (ascending-index) simplices."""

    def __init__(self, points: np.ndarray, simplices: dict[int, np.ndarray]):
        self.points = np.asarray(points, dtype=float)
        self.dim = self.points.shape[1]
        self.simplices: dict[int, np.ndarray] = {}
        for k, arr in simplices.items():
            arr = np.asarray(arr, dtype=int)
            if arr.ndim != 2 or arr.shape[1] != k + 1:
                raise ValueError(f"grade-{k} simplices must be (m, {k + 1}) index arrays")
            arr = np.sort(arr, axis=1)
            if len({tuple(r) for r in arr}) != arr.shape[0]:
                raise ValueError(f"duplicate grade-{k} simplices")
            self.simplices[k] = arr
        self._key_cache: dict[int, dict[tuple, int]] = {}

    @classmethod
    def from_top_simplices(cls, points: np.ndarray, top: np.ndarray) -> "SimplicialComplex":
        """Build the full face lattice below the given top simplices."""
        top = np.asarray(top, dtype=int)
        k_top = top.shape[1] - 1
        simplices = {k_top: np.unique(np.sort(top, axis=1), axis=0)}
        for k in range(k_top - 1, 0, -1):
            faces = set()
            for s in simplices[k + 1]:
                for f in itertools.combinations(s, k + 1):
                    faces.add(f)
            simplices[k] = np.array(sorted(faces), dtype=int)
        return cls(points, simplices)

    # -- geometry ----------------------------------------------------------

    def grades(self) -> list[int]:
        return sorted(self.simplices)

    def count(self, k: int) -> int:
        return self.simplices[k].shape[0] if k in self.simplices else 0

    def vertex_array(self, k: int) -> np.ndarray:
        return self.points[self.simplices[k]]

    def volumes(self, k: int) -> np.ndarray:
        return simplex_volumes(self.vertex_array(k))

    def boundary_matrix(self, k: int) -> np.ndarray:
        """Signed incidence (count(k-1), count(k)): face i-removed gets (-1)^i."""
        lower = {tuple(s): i for i, s in enumerate(self.simplices[k - 1])}
        B = np.zeros((self.count(k - 1), self.count(k)))
        for j, s in enumerate(self.simplices[k]):
            for i in range(k + 1):
                face = tuple(np.delete(s, i))
                B[lower[face], j] = (-1.0) ** i
        return B

    def validate(self) -> None:
        """Every face of every simplex must be present (closed complex)."""
        for k in self.grades():
            if k == 0 or (k - 1) not in self.simplices:
                continue
            lower = {tuple(s) for s in self.simplices[k - 1]}
            for s in self.simplices[k]:
                for i in range(k + 1):
                    if tuple(np.delete(s, i)) not in lower:
                        raise ValueError(f"missing face of a grade-{k} simplex")

    # -- chain <-> coefficient vector ---------------------------------------

    def _keys(self, k: int) -> dict[tuple, tuple[int, int]]:
        """Map coordinate-sorted vertex keys to (simplex index, parity).

        Parity converts between the coordinate-sorted orientation used for
        lookups and the index-ascending orientation of the stored simplex.
        """
        if k not in self._key_cache:
            qscale = self._qscale()
            q = np.round(self.points / qscale).astype(np.int64)
            table = {}
            for i, s in enumerate(self.simplices[k]):
                coords = [tuple(q[v]) for v in s]
                order = sorted(range(k + 1), key=lambda j: coords[j])
                key = tuple(coords[j] for j in order)
                table[key] = (i, _parity(order))
            self._key_cache[k] = table
        return self._key_cache[k]

    def _qscale(self) -> float:
        span = self.points.max(axis=0) - self.points.min(axis=0)
        return max(float(np.linalg.norm(span)), 1e-30) * KEY_QUANT_REL

    def chain_vector(self, T: SimplicialCurrent) -> np.ndarray:
        """Coefficients of T on the grade-T simplices; raises if unsupported."""
        k = T.grade
        table = self._keys(k)
        qscale = self._qscale()
        vec = np.zeros(self.count(k))
        for i in range(T.n_simplices):
            verts = T.vertices[i]
            q = [tuple(r) for r in np.round(verts / qscale).astype(np.int64)]
            order = sorted(range(k + 1), key=lambda j: q[j])
            key = tuple(q[j] for j in order)
            hit = table.get(key)
            if hit is None:
                raise ValueError("chain is not subordinate to the complex")
            idx, complex_parity = hit
            vec[idx] += _parity(order) * complex_parity * T.weights[i]
        return vec

    def chain_from_vector(self, k: int, vec: np.ndarray,
                          tol: float = 1e-12) -> SimplicialCurrent:
        mask = np.abs(vec) > tol
        return SimplicialCurrent(k, self.dim, self.vertex_array(k)[mask],
                                 np.asarray(vec, dtype=float)[mask], validate=False)

    # -- flat norm LP ---------------------------------------------------------

    def flat_norm(self, T: SimplicialCurrent | np.ndarray, grade: int | None = None,
                  return_decomposition: bool = False):
        """F(T) over chains of this complex (see module docstring)."""
        if isinstance(T, SimplicialCurrent):
            grade = T.grade
            t = self.chain_vector(T)
        else:
            if grade is None:
                raise ValueError("grade required for raw coefficient input")
            t = np.asarray(T, dtype=float)
        k = grade
        if k + 1 not in self.simplices:
            raise ValueError(f"complex carries no grade-{k + 1} simplices to fill with")
        B = self.boundary_matrix(k + 1)
        n_low, n_top = B.shape
        vol_top = self.volumes(k + 1)
        vol_low = self.volumes(k)
        # unknowns: [q+, q-, r+, r-]
        c = np.concatenate([vol_top, vol_top, vol_low, vol_low])
        A_eq = np.hstack([B, -B, np.eye(n_low), -np.eye(n_low)])
        res = linprog(c, A_eq=A_eq, b_eq=t, bounds=(0, None), method="highs")
        if not res.success:
            raise RuntimeError(f"flat norm LP failed: {res.message}")
        value = float(res.fun)
        if not return_decomposition:
            return value
        q = res.x[:n_top] - res.x[n_top:2 * n_top]
        r = res.x[2 * n_top:2 * n_top + n_low] - res.x[2 * n_top + n_low:]
        return value, self.chain_from_vector(k + 1, q), self.chain_from_vector(k, r)

    def fill_min_mass(self, T: SimplicialCurrent | np.ndarray, grade: int | None = None):
        """Minimal-mass (k+1)-chain Q with boundary(Q) = T, or None if none exists."""
        if isinstance(T, SimplicialCurrent):
            grade = T.grade
            t = self.chain_vector(T)
        else:
            t = np.asarray(T, dtype=float)
        B = self.boundary_matrix(grade + 1)
        n_top = B.shape[1]
        vol_top = self.volumes(grade + 1)
        c = np.concatenate([vol_top, vol_top])
        A_eq = np.hstack([B, -B])
        res = linprog(c, A_eq=A_eq, b_eq=t, bounds=(0, None), method="highs")
        if not res.success:
            return None
        q = res.x[:n_top] - res.x[n_top:]
        return float(res.fun), self.chain_from_vector(grade + 1, q)

    def flat_distance(self, A: SimplicialCurrent, B: SimplicialCurrent) -> float:
        return self.flat_norm(self.chain_vector(A) - self.chain_vector(B), grade=A.grade)


def _parity(perm: list[int]) -> int:
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def cone_complex(chains: list[SimplicialCurrent],
                 apexes: np.ndarray | None = None) -> SimplicialComplex:
    """Complex containing the given 1-chains: their segments as edges, plus
    fan triangles from each apex over every edge.

    Every closed loop bounds its apex cone, so fillings always exist.  The
    default apex is the vertex centroid nudged off any segment line.
    """
    pts_list = [C.vertices.reshape(-1, C.dim) for C in chains if C.n_simplices]
    if not pts_list:
        raise ValueError("cone_complex needs at least one nonempty chain")
    dim = chains[0].dim
    pts = np.concatenate(pts_list, axis=0)
    diam = max(float(np.linalg.norm(pts.max(0) - pts.min(0))), 1e-30)
    if apexes is None:
        apex = pts.mean(axis=0) + 0.01 * diam * _nudge(dim)
        apexes = apex[None, :]
    apexes = np.asarray(apexes, dtype=float).reshape(-1, dim)
    allpts = np.concatenate([pts, apexes], axis=0)

    qscale = diam * KEY_QUANT_REL
    index: dict[tuple, int] = {}
    unique_pts: list[np.ndarray] = []

    def vid(p: np.ndarray) -> int:
        key = tuple(np.round(p / qscale).astype(np.int64))
        if key not in index:
            index[key] = len(unique_pts)
            unique_pts.append(p)
        return index[key]

    edges = set()
    for C in chains:
        if C.grade != 1:
            raise ValueError("cone_complex expects 1-chains")
        for i in range(C.n_simplices):
            a = vid(C.vertices[i, 0])
            b = vid(C.vertices[i, 1])
            if a != b:
                edges.add(tuple(sorted((a, b))))
    apex_ids = [vid(a) for a in apexes]
    base_edges = list(edges)
    triangles = set()
    for ap in apex_ids:
        for (a, b) in base_edges:
            if ap not in (a, b):
                edges.add(tuple(sorted((a, ap))))
                edges.add(tuple(sorted((b, ap))))
                triangles.add(tuple(sorted((a, b, ap))))
    points = np.stack(unique_pts)
    return SimplicialComplex(points, {
        1: np.array(sorted(edges), dtype=int),
        2: np.array(sorted(triangles), dtype=int),
    })


def dense_complex(chains: list[SimplicialCurrent],
                  max_points: int = 48) -> SimplicialComplex | None:
    """Complex with every edge and every triangle on the union vertex set.

    Unlike the apex fans of cone_complex this contains surfaces connecting
    distinct loops (annuli, strips), so small fills come out tight.  The
    triangle count is cubic in the points, so inputs beyond max_points
    return None and callers fall back to the cone construction.
    """
    pts_list = [C.vertices.reshape(-1, C.dim) for C in chains if C.n_simplices]
    if not pts_list:
        raise ValueError("dense_complex needs at least one nonempty chain")
    pts = np.concatenate(pts_list, axis=0)
    diam = max(float(np.linalg.norm(pts.max(0) - pts.min(0))), 1e-30)
    qscale = diam * KEY_QUANT_REL
    index: dict[tuple, int] = {}
    unique_pts: list[np.ndarray] = []

    def vid(p: np.ndarray) -> int:
        key = tuple(np.round(p / qscale).astype(np.int64))
        if key not in index:
            index[key] = len(unique_pts)
            unique_pts.append(p)
        return index[key]

    for C in chains:
        if C.grade != 1:
            raise ValueError("dense_complex expects 1-chains")
        for i in range(C.n_simplices):
            vid(C.vertices[i, 0])
            vid(C.vertices[i, 1])
    n = len(unique_pts)
    if n > max_points:
        return None
    points = np.stack(unique_pts)
    edges = np.array(list(itertools.combinations(range(n), 2)), dtype=int)
    tris = np.array(list(itertools.combinations(range(n), 3)), dtype=int)
    if len(tris):
        areas = simplex_volumes(points[tris])
        tris = tris[areas > 1e-13 * diam * diam]
    return SimplicialComplex(points, {1: edges, 2: tris})


def _nudge(dim: int) -> np.ndarray:
    v = np.ones(dim)
    v[0] = 0.618
    if dim > 1:
        v[1] = 1.2929
    return v / np.linalg.norm(v)


def flat_distance_1chains(A: SimplicialCurrent, B: SimplicialCurrent,
                          apexes: np.ndarray | None = None) -> float:
    """Flat distance surrogate for free 1-chains.

    Refines both chains to common segments; exact cancellation gives 0
    without any LP, otherwise the difference is snapped onto a cone complex
    and the restricted flat-norm LP is solved (an upper bound in general).
    """
    pts = np.concatenate([A.vertices.reshape(-1, A.dim),
                          B.vertices.reshape(-1, B.dim)], axis=0)
    diff = (refine_1chain(A, pts) - refine_1chain(B, pts)).canonicalized()
    if diff.n_simplices == 0:
        return 0.0
    K = dense_complex([diff]) if apexes is None else None
    if K is None:
        K = cone_complex([diff], apexes=apexes)
    return K.flat_norm(diff)
