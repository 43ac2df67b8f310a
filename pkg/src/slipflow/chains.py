"""Simplicial polyhedral k-currents.

A current is a finite list of oriented k-simplices with real multiplicities,
``T = sum_i m_i [simplex_i]``.  Orientation is carried by vertex order; a
negative multiplicity is the same current as the odd-permuted simplex.  An
optional coefficient quantum eps > 0 marks chains whose multiplicities lie in
eps * Z (eps = 0 means unconstrained real coefficients).

The boundary operator is the alternating-sign face sum.  Canonicalization
(sort vertices, quantized-coordinate keys, merge, drop degenerate or
zero-weight simplices) makes ``boundary(boundary(T)) == 0`` hold exactly in
floating point, because paired faces carry bitwise-identical coordinates.
"""

from __future__ import annotations

import io as _io
import math
from typing import Callable, Iterable

import numpy as np

__all__ = [
    "SimplicialCurrent",
    "LineTension",
    "simplex_volumes",
    "orientation_kvector",
    "product_current",
    "polygon_loop",
    "dump_chain",
    "load_chain",
    "dumps_chain",
    "loads_chain",
    "refine_1chain",
    "refined_difference_mass",
    "pair_with_form",
]

# Relative tolerances from the build contract: vertex keys are quantized at
# 1e-9 of the chain diameter; simplices below 1e-12 * scale^k volume are
# treated as degenerate.
KEY_QUANT_REL = 1e-9
DEGENERATE_VOL_REL = 1e-12


def simplex_volumes(vertices: np.ndarray) -> np.ndarray:
    """k-volumes of an (n, k+1, d) vertex array via the Gram determinant.

    vol = sqrt(det(E^T E)) / k!  with E the edge matrix (v_i - v_0).
    """
    vertices = np.asarray(vertices, dtype=float)
    n, kp1, _ = vertices.shape
    k = kp1 - 1
    if n == 0:
        return np.zeros(0)
    if k == 0:
        return np.ones(n)
    E = vertices[:, 1:, :] - vertices[:, :1, :]  # (n, k, d)
    G = np.einsum("nid,njd->nij", E, E)
    dets = np.linalg.det(G)
    return np.sqrt(np.maximum(dets, 0.0)) / math.factorial(k)


def orientation_kvector(vertices: np.ndarray) -> np.ndarray:
    """Unnormalized orientation k-vectors on the lexicographic basis.

    vertices: (n, k+1, d) with k in {1, 2, 3}.  The k-vector of a simplex is
    (v1-v0) ^ ... ^ (vk-v0); its Euclidean norm equals k! * volume.
    """
    vertices = np.asarray(vertices, dtype=float)
    n, kp1, d = vertices.shape
    k = kp1 - 1
    E = vertices[:, 1:, :] - vertices[:, :1, :]
    if k == 1:
        return E[:, 0, :]
    if k == 2:
        comps = []
        for a in range(d):
            for b in range(a + 1, d):
                comps.append(E[:, 0, a] * E[:, 1, b] - E[:, 0, b] * E[:, 1, a])
        return np.stack(comps, axis=1)
    if k == 3:
        comps = []
        for idx in _combinations(d, 3):
            sub = E[:, :, idx]
            comps.append(np.linalg.det(sub))
        return np.stack(comps, axis=1)
    raise ValueError(f"orientation_kvector supports grades 1..3, got {k}")


def _combinations(d: int, k: int) -> list[tuple[int, ...]]:
    import itertools

    return list(itertools.combinations(range(d), k))


def _perm_parity(perm: np.ndarray) -> int:
    sign = 1
    p = list(perm)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


class SimplicialCurrent:
    """Polyhedral k-current: oriented simplices with signed multiplicities."""

    __slots__ = ("grade", "dim", "vertices", "weights", "quantum")

    def __init__(self, grade: int, dim: int, vertices=None, weights=None,
                 quantum: float = 0.0, validate: bool = True):
        if grade < 0 or dim < 1 or grade > dim:
            raise ValueError(f"invalid grade {grade} for ambient dimension {dim}")
        if vertices is None:
            vertices = np.zeros((0, grade + 1, dim))
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim != 3 or vertices.shape[1:] != (grade + 1, dim):
            raise ValueError(
                f"vertices must have shape (n, {grade + 1}, {dim}), got {vertices.shape}")
        if weights is None:
            weights = np.ones(vertices.shape[0])
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if weights.shape[0] != vertices.shape[0]:
            raise ValueError("weights length must match simplex count")
        if quantum < 0:
            raise ValueError("coefficient quantum must be >= 0")
        if validate and quantum > 0 and weights.size:
            steps = weights / quantum
            if not np.allclose(steps, np.round(steps), atol=1e-9):
                raise ValueError("weights are not multiples of the coefficient quantum")
        self.grade = grade
        self.dim = dim
        self.vertices = vertices
        self.weights = weights
        self.quantum = float(quantum)

    # -- basic queries -------------------------------------------------------

    @property
    def n_simplices(self) -> int:
        return self.vertices.shape[0]

    def volumes(self) -> np.ndarray:
        return simplex_volumes(self.vertices)

    def mass(self) -> float:
        """M(T) = sum |m_i| vol_k(simplex_i)."""
        return float(np.sum(np.abs(self.weights) * self.volumes()))

    def mass_psi(self, psi: "LineTension") -> float:
        """Anisotropic line mass: sum psi(sign(m) tau_hat) |m| length."""
        if self.grade != 1:
            raise ValueError("mass_psi is defined for 1-currents")
        if self.n_simplices == 0:
            return 0.0
        tangents = self.vertices[:, 1, :] - self.vertices[:, 0, :]
        lengths = np.linalg.norm(tangents, axis=1)
        total = 0.0
        for tang, ln, w in zip(tangents, lengths, self.weights):
            if ln == 0.0 or w == 0.0:
                continue
            total += abs(w) * ln * psi(np.sign(w) * tang / ln)
        return float(total)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.n_simplices == 0:
            return np.zeros(self.dim), np.zeros(self.dim)
        pts = self.vertices.reshape(-1, self.dim)
        return pts.min(axis=0), pts.max(axis=0)

    def diameter(self) -> float:
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(hi - lo))

    def copy(self) -> "SimplicialCurrent":
        return SimplicialCurrent(self.grade, self.dim, self.vertices.copy(),
                                 self.weights.copy(), self.quantum, validate=False)

    def select(self, mask) -> "SimplicialCurrent":
        return SimplicialCurrent(self.grade, self.dim, self.vertices[mask],
                                 self.weights[mask], self.quantum, validate=False)

    # -- arithmetic ------------------------------------------------------------

    def _merge_quantum(self, other: "SimplicialCurrent") -> float:
        if self.quantum > 0 and self.quantum == other.quantum:
            return self.quantum
        return 0.0

    def __add__(self, other: "SimplicialCurrent") -> "SimplicialCurrent":
        if self.grade != other.grade or self.dim != other.dim:
            raise ValueError("grade/dimension mismatch")
        return SimplicialCurrent(
            self.grade, self.dim,
            np.concatenate([self.vertices, other.vertices], axis=0),
            np.concatenate([self.weights, other.weights]),
            self._merge_quantum(other), validate=False)

    def __neg__(self) -> "SimplicialCurrent":
        return SimplicialCurrent(self.grade, self.dim, self.vertices,
                                 -self.weights, self.quantum, validate=False)

    def __sub__(self, other: "SimplicialCurrent") -> "SimplicialCurrent":
        return self + (-other)

    def scaled(self, c: float) -> "SimplicialCurrent":
        return SimplicialCurrent(self.grade, self.dim, self.vertices,
                                 self.weights * float(c),
                                 self.quantum * abs(float(c)), validate=False)

    # -- core operations -------------------------------------------------------

    def boundary(self, canonical: bool = True) -> "SimplicialCurrent":
        """Alternating-sign boundary; exact pair cancellation when canonical."""
        if self.grade == 0:
            raise ValueError("boundary is undefined for 0-currents")
        k = self.grade
        n = self.n_simplices
        faces = []
        weights = []
        for i in range(k + 1):
            idx = [j for j in range(k + 1) if j != i]
            faces.append(self.vertices[:, idx, :])
            weights.append(self.weights * ((-1) ** i))
        verts = np.concatenate(faces, axis=0) if n else np.zeros((0, k, self.dim))
        wts = np.concatenate(weights) if n else np.zeros(0)
        out = SimplicialCurrent(k - 1, self.dim, verts, wts, self.quantum, validate=False)
        return out.canonicalized() if canonical else out

    def canonicalized(self, qscale: float | None = None,
                      drop_degenerate: bool = True) -> "SimplicialCurrent":
        """Canonical form: per-simplex sorted vertices (parity-signed weights),
        merge simplices with equal quantized keys, drop zero/degenerate terms."""
        n = self.n_simplices
        if n == 0:
            return self.copy()
        if qscale is None:
            qscale = max(self.diameter(), 1e-30) * KEY_QUANT_REL
        q = np.round(self.vertices / qscale).astype(np.int64)
        merged: dict[tuple, int] = {}
        out_verts: list[np.ndarray] = []
        out_weights: list[float] = []
        for i in range(n):
            w = self.weights[i]
            if w == 0.0:
                continue
            if self.grade > 0:
                order = np.lexsort(q[i].T[::-1])
                w = w * _perm_parity(order)
                key = tuple(map(tuple, q[i][order]))
                sverts = self.vertices[i][order]
            else:
                key = (tuple(q[i][0]),)
                sverts = self.vertices[i]
            slot = merged.get(key)
            if slot is None:
                merged[key] = len(out_verts)
                out_verts.append(sverts)
                out_weights.append(w)
            else:
                out_weights[slot] += w
        if not out_verts:
            return SimplicialCurrent(self.grade, self.dim, quantum=self.quantum,
                                     validate=False)
        verts = np.stack(out_verts)
        wts = np.array(out_weights)
        wscale = np.max(np.abs(self.weights)) if self.weights.size else 1.0
        keep = np.abs(wts) > 1e-13 * max(wscale, 1e-300)
        if drop_degenerate and self.grade > 0:
            vols = simplex_volumes(verts)
            vscale = max(self.diameter(), 1e-30) ** self.grade
            keep &= vols > DEGENERATE_VOL_REL * vscale
        return SimplicialCurrent(self.grade, self.dim, verts[keep], wts[keep],
                                 self.quantum, validate=False)

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.canonicalized().mass() <= tol

    def pushforward(self, f, out_dim: int | None = None,
                    canonical: bool = False) -> "SimplicialCurrent":
        """Image current under a map applied to vertices.

        f is either an (out_dim, dim) matrix, a (matrix, shift) pair, or a
        callable mapping an (m, dim) array to (m, out_dim).  Simplices whose
        image is degenerate (k-volume below 1e-12 * scale^k) are dropped;
        this is what makes projection commute with boundary after
        cancellation.
        """
        pts = self.vertices.reshape(-1, self.dim)
        if callable(f):
            new = np.asarray(f(pts), dtype=float)
        elif isinstance(f, tuple):
            A, b = f
            new = pts @ np.asarray(A, dtype=float).T + np.asarray(b, dtype=float)
        else:
            new = pts @ np.asarray(f, dtype=float).T
        if out_dim is None:
            out_dim = new.shape[1]
        verts = new.reshape(self.n_simplices, self.grade + 1, out_dim)
        out = SimplicialCurrent(self.grade, out_dim, verts, self.weights.copy(),
                                self.quantum, validate=False)
        if out.n_simplices and out.grade > 0:
            vols = simplex_volumes(verts)
            vscale = max(out.diameter(), 1e-30) ** out.grade
            out = out.select(vols > DEGENERATE_VOL_REL * vscale)
        return out.canonicalized() if canonical else out

    def round_to_quantum(self, quantum: float) -> tuple["SimplicialCurrent", bool]:
        """Round multiplicities to quantum * Z (half to even, numpy convention).

        Connected components with uniform multiplicity are rounded as one
        block so closed chains stay closed.  Returns (chain, annihilated_all).
        """
        if quantum <= 0:
            return self.copy(), False
        T = self.canonicalized()
        if T.n_simplices == 0:
            return SimplicialCurrent(self.grade, self.dim, quantum=quantum,
                                     validate=False), False
        comps = _connected_components(T)
        weights = T.weights.copy()
        for comp in comps:
            wvals = weights[comp]
            if np.allclose(wvals, wvals[0], rtol=0, atol=1e-12 * max(1.0, abs(wvals[0]))):
                weights[comp] = np.round(wvals[0] / quantum) * quantum
            else:
                weights[comp] = np.round(wvals / quantum) * quantum
        out = SimplicialCurrent(T.grade, T.dim, T.vertices, weights, quantum,
                                validate=False).canonicalized()
        annihilated = self.mass() > 0 and out.mass() == 0.0
        return out, annihilated

    def __repr__(self) -> str:  # pragma: no cover
        return (f"SimplicialCurrent(grade={self.grade}, dim={self.dim}, "
                f"n={self.n_simplices}, eps={self.quantum})")


def _connected_components(T: SimplicialCurrent) -> list[np.ndarray]:
    """Group simplices sharing (quantized) vertices."""
    n = T.n_simplices
    qscale = max(T.diameter(), 1e-30) * KEY_QUANT_REL
    q = np.round(T.vertices / qscale).astype(np.int64)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    seen: dict[tuple, int] = {}
    for i in range(n):
        for v in range(T.grade + 1):
            key = tuple(q[i, v])
            if key in seen:
                ra, rb = find(i), find(seen[key])
                if ra != rb:
                    parent[ra] = rb
            else:
                seen[key] = i
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [np.array(g) for g in groups.values()]


# -- line tension -------------------------------------------------------------


class LineTension:
    """Convex positively 1-homogeneous even integrand on line directions."""

    def __init__(self, func: Callable[[np.ndarray], float], label: str = "custom"):
        self._func = func
        self.label = label

    def __call__(self, v: np.ndarray) -> float:
        return float(self._func(np.asarray(v, dtype=float)))

    @classmethod
    def isotropic(cls, weight: float = 1.0) -> "LineTension":
        w = float(weight)
        if w <= 0:
            raise ValueError("line tension weight must be positive")
        return cls(lambda v: w * float(np.linalg.norm(v)), label=f"iso({w})")

    @classmethod
    def anisotropic(cls, matrix) -> "LineTension":
        A = np.asarray(matrix, dtype=float)
        probe = np.linalg.svd(A, compute_uv=False)
        if probe.min() <= 0:
            raise ValueError("anisotropy matrix must be nonsingular")
        return cls(lambda v: float(np.linalg.norm(A @ v)), label="aniso")

    def check_admissible(self, n_samples: int = 200, seed: int = 0,
                         dim: int = 3) -> dict:
        """Sampled 1-homogeneity, midpoint convexity and positivity report."""
        rng = np.random.default_rng(seed)
        hom_err = conv_viol = 0.0
        min_unit = np.inf
        for _ in range(n_samples):
            v = rng.normal(size=dim)
            u = v / np.linalg.norm(v)
            t = rng.uniform(0.1, 5.0)
            hom_err = max(hom_err, abs(self(t * v) - t * self(v)))
            w = rng.normal(size=dim)
            conv_viol = max(conv_viol, self(0.5 * (v + w)) - 0.5 * (self(v) + self(w)))
            min_unit = min(min_unit, self(u))
        return {"homogeneity_error": hom_err, "convexity_violation": max(conv_viol, 0.0),
                "min_on_sphere": min_unit,
                "admissible": hom_err < 1e-9 and conv_viol < 1e-9 and min_unit > 0}


# -- products -----------------------------------------------------------------


def _shuffles(j: int, k: int) -> list[tuple[np.ndarray, int]]:
    """Vertex index paths and signs of the shuffle triangulation of
    simplex_j x simplex_k.  Each path yields one (j+k)-simplex; the sign is
    the parity of the (j,k)-shuffle."""
    import itertools

    out = []
    steps_total = j + k
    for ups in itertools.combinations(range(steps_total), k):
        seq = np.zeros(steps_total, dtype=int)
        seq[list(ups)] = 1
        inversions = 0
        for a in range(steps_total):
            for b in range(a + 1, steps_total):
                if seq[a] == 1 and seq[b] == 0:
                    inversions += 1
        path = np.zeros((steps_total + 1, 2), dtype=int)
        pos = np.array([0, 0])
        for s, step in enumerate(seq):
            pos = pos + (np.array([0, 1]) if step else np.array([1, 0]))
            path[s + 1] = pos
        out.append((path, (-1) ** inversions))
    return out


def product_current(T1: SimplicialCurrent, T2: SimplicialCurrent) -> SimplicialCurrent:
    """Product current T1 x T2 via the shuffle triangulation of each prism.

    Satisfies the Leibniz boundary formula exactly at chain level:
    boundary(T1 x T2) = boundary(T1) x T2 + (-1)^grade1 T1 x boundary(T2).
    """
    j, k = T1.grade, T2.grade
    dim = T1.dim + T2.dim
    shuffles = _shuffles(j, k)
    verts_out = []
    weights_out = []
    for i1 in range(T1.n_simplices):
        a = T1.vertices[i1]
        wa = T1.weights[i1]
        if wa == 0.0:
            continue
        for i2 in range(T2.n_simplices):
            b = T2.vertices[i2]
            wb = T2.weights[i2]
            if wb == 0.0:
                continue
            for path, sign in shuffles:
                pv = np.concatenate([a[path[:, 0]], b[path[:, 1]]], axis=1)
                verts_out.append(pv)
                weights_out.append(sign * wa * wb)
    quantum = T1.quantum * T2.quantum if (T1.quantum > 0 and T2.quantum > 0) else 0.0
    if not verts_out:
        return SimplicialCurrent(j + k, dim, quantum=quantum, validate=False)
    return SimplicialCurrent(j + k, dim, np.stack(verts_out), np.array(weights_out),
                             quantum, validate=False)


def polygon_loop(points, weight: float = 1.0, quantum: float = 0.0,
                 closed: bool = True) -> SimplicialCurrent:
    """Oriented polygonal 1-current through the given points."""
    pts = np.asarray(points, dtype=float)
    n, dim = pts.shape
    m = n if closed else n - 1
    verts = np.zeros((m, 2, dim))
    for i in range(m):
        verts[i, 0] = pts[i]
        verts[i, 1] = pts[(i + 1) % n]
    return SimplicialCurrent(1, dim, verts, np.full(m, float(weight)), quantum,
                             validate=False)


# -- chain dump format ----------------------------------------------------------
#
# Header:  DIM K EPS COUNT [TIME t]
# Record:  k eps m x0 y0 z0 [t0] x1 y1 z1 [t1] ...
#
# Coordinates are written spatial-first (x y z, then the time coordinate for
# DIM=4); internally spacetime points are stored time-first.  Floats are
# written with repr for bit-exact round-trips.


def _file_order(dim: int) -> list[int]:
    return list(range(dim)) if dim == 3 else [1, 2, 3, 0]


def dumps_chain(T: SimplicialCurrent, time: float | None = None) -> str:
    if T.dim not in (3, 4):
        raise ValueError("chain dumps support ambient dimension 3 or 4")
    order = _file_order(T.dim)
    buf = _io.StringIO()
    head = f"{T.dim} {T.grade} {_fmt(T.quantum)} {T.n_simplices}"
    if time is not None:
        head += f" TIME {_fmt(time)}"
    buf.write(head + "\n")
    for i in range(T.n_simplices):
        rec = [str(T.grade), _fmt(T.quantum), _fmt(T.weights[i])]
        for v in range(T.grade + 1):
            rec.extend(_fmt(T.vertices[i, v, ax]) for ax in order)
        buf.write(" ".join(rec) + "\n")
    return buf.getvalue()


def _fmt(x: float) -> str:
    return repr(float(x))


def dump_chain(T: SimplicialCurrent, path, time: float | None = None) -> None:
    data = dumps_chain(T, time=time)
    with open(path, "w") as fh:
        fh.write(data)


def loads_chain(text: str) -> tuple[SimplicialCurrent, float | None]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    dim, grade = int(head[0]), int(head[1])
    quantum = float(head[2])
    count = int(head[3])
    time = float(head[5]) if len(head) >= 6 and head[4] == "TIME" else None
    order = _file_order(dim)
    inv = np.argsort(order)
    verts = np.zeros((count, grade + 1, dim))
    weights = np.zeros(count)
    for i, ln in enumerate(lines[1:count + 1]):
        toks = ln.split()
        if int(toks[0]) != grade:
            raise ValueError(f"record grade {toks[0]} does not match header grade {grade}")
        weights[i] = float(toks[2])
        coords = np.array([float(t) for t in toks[3:]], dtype=float)
        if coords.size != (grade + 1) * dim:
            raise ValueError("record has wrong number of coordinates")
        verts[i] = coords.reshape(grade + 1, dim)[:, inv]
    return SimplicialCurrent(grade, dim, verts, weights, quantum, validate=False), time


def load_chain(path) -> tuple[SimplicialCurrent, float | None]:
    with open(path) as fh:
        return loads_chain(fh.read())


# -- 1-chain refinement and form pairings ---------------------------------------


def refine_1chain(T: SimplicialCurrent, points: np.ndarray,
                  tol: float | None = None) -> SimplicialCurrent:
    """Split segments of a 1-current at the given points lying on them."""
    if T.grade != 1:
        raise ValueError("refine_1chain requires a 1-current")
    pts = np.asarray(points, dtype=float).reshape(-1, T.dim)
    if tol is None:
        tol = max(T.diameter(), 1e-30) * KEY_QUANT_REL * 10
    verts_out, weights_out = [], []
    for i in range(T.n_simplices):
        a, b = T.vertices[i, 0], T.vertices[i, 1]
        seg = b - a
        seg_len2 = float(seg @ seg)
        params = [0.0, 1.0]
        if seg_len2 > 0:
            rel = pts - a
            t = rel @ seg / seg_len2
            perp = rel - np.outer(t, seg)
            on = (np.linalg.norm(perp, axis=1) <= tol) & (t > tol) & (t < 1 - tol)
            params.extend(sorted(set(np.round(t[on], 15))))
        params = sorted(set(params))
        for t0, t1 in zip(params[:-1], params[1:]):
            verts_out.append(np.stack([a + t0 * seg, a + t1 * seg]))
            weights_out.append(T.weights[i])
    if not verts_out:
        return SimplicialCurrent(1, T.dim, quantum=T.quantum, validate=False)
    return SimplicialCurrent(1, T.dim, np.stack(verts_out), np.array(weights_out),
                             T.quantum, validate=False)


def refined_difference_mass(A: SimplicialCurrent, B: SimplicialCurrent) -> float:
    """Mass of A - B after common 1-chain refinement and cancellation.

    Zero iff the chains agree up to subdivision of segments; always an upper
    bound for their flat distance.
    """
    pts = np.concatenate([A.vertices.reshape(-1, A.dim),
                          B.vertices.reshape(-1, B.dim)], axis=0)
    diff = refine_1chain(A, pts) - refine_1chain(B, pts)
    return diff.canonicalized().mass()


_GAUSS_SEG = (np.array([0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)]),
              np.array([0.5, 0.5]))
_GAUSS_TRI = (np.array([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]),
              np.array([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]))


def pair_with_form(T: SimplicialCurrent, form: Callable[[np.ndarray], np.ndarray]) -> float:
    """<T, omega> for a k-form given as x -> coefficient vector on the
    lexicographic dx^I basis.  Exact for polynomial coefficients of degree
    <= 2 (edge-midpoint rules); used as an equality surrogate for currents
    that differ only by re-triangulation.
    """
    if T.n_simplices == 0:
        return 0.0
    k = T.grade
    kvecs = orientation_kvector(T.vertices)  # includes k! * volume scaling
    total = 0.0
    if k == 1:
        nodes, wts = _GAUSS_SEG
        for i in range(T.n_simplices):
            a, b = T.vertices[i, 0], T.vertices[i, 1]
            acc = 0.0
            for t, w in zip(nodes, wts):
                x = a + t * (b - a)
                acc += w * float(np.dot(form(x), kvecs[i]))
            total += T.weights[i] * acc
    elif k == 2:
        nodes, wts = _GAUSS_TRI
        for i in range(T.n_simplices):
            v0 = T.vertices[i, 0]
            e1 = T.vertices[i, 1] - v0
            e2 = T.vertices[i, 2] - v0
            acc = 0.0
            for (l1, l2), w in zip(nodes, wts):
                x = v0 + l1 * e1 + l2 * e2
                acc += w * float(np.dot(form(x), kvecs[i]))
            total += 0.5 * T.weights[i] * acc
    else:
        raise ValueError("pair_with_form supports grades 1 and 2")
    return float(total)
