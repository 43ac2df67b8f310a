"""Finite catalog of candidate slip moves for the incremental minimization.

The admissible class of slip trajectories is infinite dimensional; the
solver explores a finite, deterministic surrogate instead: whole-bundle
glide translations over a direction/step stencil, single-node
displacements, per-segment bow-outs (midpoint insertion), loop scalings
about the centroid, and the neutral move.  Every candidate starts exactly
at the current configuration (ruled bands share the t=0 trace by
construction) and candidates whose sup slice mass exceeds the configured
cap are discarded.  Generation order is canonical so ties can be broken by
catalog index.
"""

from __future__ import annotations

import numpy as np

from .chains import SimplicialCurrent
from .dislocations import DislocationState
from .energetics import SlipFamily
from .spacetime import ruled_sweep

__all__ = ["Move", "MoveCatalog", "extract_loops", "plane_basis"]


def plane_basis(normal):
    """Deterministic orthonormal pair spanning the plane with this normal."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    k = int(np.argmin(np.abs(n)))
    e = np.zeros(3)
    e[k] = 1.0
    u1 = np.cross(e, n)
    u1 = u1 / np.linalg.norm(u1)
    u2 = np.cross(n, u1)
    return u1, u2


def loop_normal(points: np.ndarray) -> np.ndarray:
    """Unit normal of a (nearly) planar loop, Newell construction."""
    P = np.asarray(points, dtype=float)
    Q = np.roll(P, -1, axis=0)
    n = np.sum(np.cross(P, Q), axis=0)
    nn = float(np.linalg.norm(n))
    if nn == 0.0:
        raise ValueError("degenerate loop has no plane")
    return n / nn


def extract_loops(T: SimplicialCurrent, tol_rel: float = 1e-9):
    """Ordered closed polylines of a 1-chain: list of (points (m,3), mult).

    Segments are walked head-to-tail with quantized endpoint keys; every
    segment of one loop must carry the same signed multiplicity.  Raises if
    the chain does not decompose into closed loops (dislocations are
    boundaryless by definition).
    """
    T = T.canonicalized()
    n = T.n_simplices
    if n == 0:
        return []
    V = T.vertices
    W = T.weights
    scale = max(float(np.max(np.abs(V))), 1.0)
    q = tol_rel * scale

    def key(pt):
        return tuple(np.round(pt / q).astype(np.int64))

    heads = []
    tails = []
    pts_a = np.where(W[:, None] >= 0, V[:, 0], V[:, 1])
    pts_b = np.where(W[:, None] >= 0, V[:, 1], V[:, 0])
    mult = np.abs(W)
    for i in range(n):
        heads.append(key(pts_a[i]))
        tails.append(key(pts_b[i]))
    start_index: dict = {}
    for i in range(n):
        start_index.setdefault(heads[i], []).append(i)
    used = np.zeros(n, dtype=bool)
    loops = []
    for i0 in range(n):
        if used[i0]:
            continue
        used[i0] = True
        pts = [pts_a[i0], pts_b[i0]]
        m = mult[i0]
        cur = tails[i0]
        origin = heads[i0]
        guard = 0
        while cur != origin:
            nxt = None
            for j in start_index.get(cur, []):
                if not used[j]:
                    nxt = j
                    break
            if nxt is None:
                raise ValueError("1-chain does not close into loops")
            if abs(mult[nxt] - m) > 1e-12 * max(m, 1.0):
                raise ValueError("mixed multiplicities along one loop")
            used[nxt] = True
            pts.append(pts_b[nxt])
            cur = tails[nxt]
            guard += 1
            if guard > n:
                raise ValueError("loop walk failed to terminate")
        loops.append((np.asarray(pts[:-1]), float(m)))
    return loops


class Move:
    """One candidate: an identifier and the complete slip family."""

    __slots__ = ("move_id", "kind", "family")

    def __init__(self, move_id: str, kind: str, family: SlipFamily):
        self.move_id = move_id
        self.kind = kind
        self.family = family

    def __repr__(self):  # pragma: no cover
        return f"Move({self.move_id})"


class MoveCatalog:
    """Candidate generator with a deterministic ordering.

    glide_normals maps canonical Burgers keys to slip-plane normals; moves
    for a bundle with a normal stay inside its plane.  Bundles without a
    configured normal translate along the coordinate axes and skip
    bow-outs (their loop plane is used for scalings only).
    """

    def __init__(self, glide_normals=None, translate_steps=(0.25,),
                 node_steps=(), bow_steps=(), scale_factors=(),
                 cap: float = 100.0):
        from .dislocations import canonical_burgers

        self.glide_normals = {}
        if glide_normals:
            for b, nrm in glide_normals.items():
                k, _ = canonical_burgers(b)
                self.glide_normals[k] = np.asarray(nrm, dtype=float)
        self.translate_steps = tuple(float(s) for s in translate_steps)
        self.node_steps = tuple(float(s) for s in node_steps)
        self.bow_steps = tuple(float(s) for s in bow_steps)
        self.scale_factors = tuple(float(f) for f in scale_factors)
        self.cap = float(cap)

    def directions_for(self, key):
        nrm = self.glide_normals.get(key)
        if nrm is None:
            dirs = [np.eye(3)[i] * s for i in range(3) for s in (1.0, -1.0)]
            return dirs
        u1, u2 = plane_basis(nrm)
        return [u1, -u1, u2, -u2]

    def _family(self, per_bundle_loops, moved_key, new_points, window,
                base_points=None):
        """Complete slip family: moved bundle ruled to its targets, all other
        bundles ruled in place (static cylinders).  base_points overrides the
        source polylines of the moved bundle (used when vertices are
        inserted, so both ends of the ruling stay matched)."""
        fam = SlipFamily(window)
        for key, loops in per_bundle_loops.items():
            P0 = [pts for pts, _ in loops]
            mults = [m for _, m in loops]
            if key == moved_key:
                P1 = new_points
                if base_points is not None:
                    P0 = base_points
            else:
                P1 = P0
            if not P0:
                continue
            fam.set(key, ruled_sweep(P0, P1, mults, window))
        return fam

    def generate(self, state: DislocationState, window=(0.0, 1.0)):
        """The ordered candidate list for this configuration."""
        per_bundle = {}
        for b, T in state.systems():
            per_bundle[tuple(b)] = extract_loops(T)
        moves = [Move("neutral", "neutral", SlipFamily.neutral(state, window))]

        def add(move_id, kind, key, new_pts, base_pts=None):
            fam = self._family(per_bundle, key, new_pts, window, base_pts)
            if fam.sup_slice_mass() <= self.cap * (1.0 + 1e-9):
                moves.append(Move(move_id, kind, fam))

        for key in sorted(per_bundle):
            loops = per_bundle[key]
            if not loops:
                continue
            dirs = self.directions_for(key)
            tag = ",".join(f"{c:g}" for c in key)
            # whole-bundle translations
            for di, d in enumerate(dirs):
                for si, s in enumerate(self.translate_steps):
                    new_pts = [pts + s * d for pts, _ in loops]
                    add(f"translate[{tag}]d{di}s{si}", "translate", key, new_pts)
            # single-node displacements
            for li, (pts, _) in enumerate(loops):
                for ni in range(pts.shape[0]):
                    for di, d in enumerate(dirs):
                        for si, s in enumerate(self.node_steps):
                            new_pts = [p.copy() for p, _ in loops]
                            new_pts[li][ni] = new_pts[li][ni] + s * d
                            add(f"node[{tag}]l{li}n{ni}d{di}s{si}",
                                "node", key, new_pts)
            # per-segment bow-outs (midpoint insertion, in-plane normal)
            nrm = self.glide_normals.get(key)
            if nrm is not None and self.bow_steps:
                nhat = nrm / np.linalg.norm(nrm)
                for li, (pts, _) in enumerate(loops):
                    m = pts.shape[0]
                    for gi in range(m):
                        seg = pts[(gi + 1) % m] - pts[gi]
                        sn = float(np.linalg.norm(seg))
                        if sn == 0.0:
                            continue
                        out = np.cross(nhat, seg / sn)
                        mid = 0.5 * (pts[gi] + pts[(gi + 1) % m])
                        for pi, pm in enumerate((1.0, -1.0)):
                            for si, s in enumerate(self.bow_steps):
                                base, newp = [], []
                                for lj, (p, _) in enumerate(loops):
                                    if lj == li:
                                        bp = np.insert(p, gi + 1, mid, axis=0)
                                        tp = bp.copy()
                                        tp[gi + 1] = mid + pm * s * out
                                    else:
                                        bp = p.copy()
                                        tp = p.copy()
                                    base.append(bp)
                                    newp.append(tp)
                                add(f"bow[{tag}]l{li}g{gi}p{pi}s{si}",
                                    "bow", key, newp, base)
            # loop scalings about the centroid
            for li, (pts, _) in enumerate(loops):
                c = pts.mean(axis=0)
                for fi, f in enumerate(self.scale_factors):
                    new_pts = [p.copy() for p, _ in loops]
                    new_pts[li] = c + f * (new_pts[li] - c)
                    add(f"scale[{tag}]l{li}f{fi}", "scale", key, new_pts)
        return moves
