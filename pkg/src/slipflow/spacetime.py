"""Surfaces in spacetime [sigma, tau] x R^3 traced out by moving curves.

Points are stored time-first: (t, x, y, z).  For a 2-current S with unit
orientation split orthogonally as S_vec = xi ^ tau (xi the normalized
in-surface time gradient), the per-simplex identities

    |grad_S t|^2 + |p(S_vec)|^2 = 1          (p drops time components)
    integral M(S|_t) dt = integral |grad_S t| d|S|   (coarea)

hold exactly on flat simplices and are exposed as checks.  Slices are
computed geometrically (plane section + orientation by contraction with the
normalized time gradient); the spatial variation is

    Var(S; I) = integral_{I x R^3} |p(S_vec)| d|S|,

the exact spatial-projection area sum for simplicial data.
"""

from __future__ import annotations

import math

import numpy as np

from .chains import SimplicialCurrent, product_current, refine_1chain

__all__ = [
    "SpaceTimeCurrent",
    "time_interval",
    "static_cylinder",
    "ruled_sweep",
    "concatenate",
    "rescale",
    "deformation_distance",
    "slice_1current",
]

SPATIAL_PROJECTION = np.array([[0.0, 1.0, 0.0, 0.0],
                               [0.0, 0.0, 1.0, 0.0],
                               [0.0, 0.0, 0.0, 1.0]])

# index pairs of the lexicographic 2-vector basis in R^4
_PAIRS = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
_SPATIAL_COMPS = [3, 4, 5]  # (1,2), (1,3), (2,3)


def time_interval(a: float, b: float) -> SimplicialCurrent:
    return SimplicialCurrent(1, 1, np.array([[[float(a)], [float(b)]]]))


class SpaceTimeCurrent:
    """A simplicial 2-current in R^(1+3) with a time window."""

    def __init__(self, chain: SimplicialCurrent, window: tuple[float, float]):
        if chain.dim != 4 or chain.grade != 2:
            raise ValueError("SpaceTimeCurrent wraps grade-2 currents in R^4")
        if not window[1] > window[0]:
            raise ValueError("window must satisfy tau > sigma")
        self.chain = chain
        self.window = (float(window[0]), float(window[1]))
        self._geom = None

    # -- cached per-simplex geometry -------------------------------------------

    def _geometry(self):
        """areas, unit 2-vectors, |grad_S t| and |p(S_vec)| per simplex."""
        if self._geom is None:
            V = self.chain.vertices
            n = V.shape[0]
            if n == 0:
                self._geom = (np.zeros(0), np.zeros((0, 6)), np.zeros(0), np.zeros(0))
                return self._geom
            e1 = V[:, 1, :] - V[:, 0, :]
            e2 = V[:, 2, :] - V[:, 0, :]
            w = np.stack([e1[:, a] * e2[:, b] - e1[:, b] * e2[:, a]
                          for (a, b) in _PAIRS], axis=1)
            norms = np.linalg.norm(w, axis=1)
            areas = 0.5 * norms
            unit = np.zeros_like(w)
            ok = norms > 0
            unit[ok] = w[ok] / norms[ok, None]
            # in-plane gradient of t: solve the 2x2 Gram system for e0
            g11 = np.einsum("ni,ni->n", e1, e1)
            g12 = np.einsum("ni,ni->n", e1, e2)
            g22 = np.einsum("ni,ni->n", e2, e2)
            b1, b2 = e1[:, 0], e2[:, 0]
            det = g11 * g22 - g12 * g12
            det = np.where(det > 0, det, 1.0)
            c1 = (g22 * b1 - g12 * b2) / det
            c2 = (g11 * b2 - g12 * b1) / det
            grad = c1[:, None] * e1 + c2[:, None] * e2
            grad_norm = np.linalg.norm(grad, axis=1)
            proj = np.linalg.norm(unit[:, _SPATIAL_COMPS], axis=1)
            self._geom = (areas, unit, grad_norm, proj)
        return self._geom

    def pythagoras_error(self) -> float:
        """max |  |grad_S t|^2 + |p(S_vec)|^2 - 1 | over simplices."""
        areas, _, grad, proj = self._geometry()
        if areas.size == 0:
            return 0.0
        mask = areas > 0
        return float(np.max(np.abs(grad[mask] ** 2 + proj[mask] ** 2 - 1.0), initial=0.0))

    # -- masses -----------------------------------------------------------------

    def mass(self) -> float:
        return self.chain.mass()

    def variation(self, interval: tuple[float, float] | None = None) -> float:
        """Var(S; I): mass of the spatial sweep, exact per clipped simplex."""
        S = self if interval is None else self.restrict_time(*interval)
        V = S.chain.vertices
        if V.shape[0] == 0:
            return 0.0
        sp = V[:, :, 1:]
        cr = np.cross(sp[:, 1, :] - sp[:, 0, :], sp[:, 2, :] - sp[:, 0, :])
        return float(np.sum(np.abs(S.chain.weights) * 0.5 * np.linalg.norm(cr, axis=1)))

    def spatial_sweep(self) -> SimplicialCurrent:
        """p_* of the surface: 2-current in R^3, degenerate images dropped."""
        return self.chain.pushforward(SPATIAL_PROJECTION)

    def coarea_mass_gap(self) -> tuple[float, float]:
        """(integral of slice masses in t, integral |grad_S t| d|S|).

        Both sides computed independently: left via the closed-form integral
        of the affine slice-segment lengths, right from the cached geometry.
        The coarea identity says they agree.
        """
        left = self.integral_slice_mass()
        areas, _, grad, _ = self._geometry()
        right = float(np.sum(np.abs(self.chain.weights) * grad * areas))
        return left, right

    def integral_slice_mass(self) -> float:
        """int M(S(t)) dt, exact: per simplex and time interval the slice
        endpoints are affine in t, so the length integral has a closed form."""
        total = 0.0
        V = self.chain.vertices
        for i in range(V.shape[0]):
            w = abs(self.chain.weights[i])
            if w == 0.0:
                continue
            total += w * _segment_length_integral(V[i])
        return total

    def sup_slice_mass(self, eta_rel: float = 1e-7) -> float:
        """sup_t M(S(t)): slice mass is piecewise convex in t with breakpoints
        at vertex times, so the sup is approached at interval ends."""
        times = np.unique(self.chain.vertices[:, :, 0].ravel())
        if times.size == 0:
            return 0.0
        span = max(self.window[1] - self.window[0], 1e-30)
        eta = eta_rel * span
        best = 0.0
        probes = []
        for a, b in zip(times[:-1], times[1:]):
            if b - a > 4 * eta:
                probes.extend([a + eta, b - eta, 0.5 * (a + b)])
        for t in probes:
            sl, ok = self.slice_at(t)
            if ok:
                best = max(best, sl.mass())
        return best

    # -- slicing -----------------------------------------------------------------

    def slice_at(self, t: float, nudge: bool = True) -> tuple[SimplicialCurrent, bool]:
        """Geometric time slice S(t) = p_*(S|_t) as an R^3 1-current.

        Returns (chain, valid); valid is False when the surface has an atom
        at t (a flat piece in the plane {time = t}), i.e. the trajectory
        jumps there.  Slice times hitting vertex times are nudged forward by
        1e-9 of the window span.
        """
        span = max(self.window[1] - self.window[0], 1e-30)
        V = self.chain.vertices
        if V.shape[0] == 0:
            return SimplicialCurrent(1, 3, quantum=self.chain.quantum, validate=False), True
        times = V[:, :, 0]
        flat_tol = 1e-12 * span
        flat = np.all(np.abs(times - t) <= flat_tol, axis=1)
        areas = self._geometry()[0]
        if np.any(flat & (areas > 0)):
            return SimplicialCurrent(1, 3, quantum=self.chain.quantum, validate=False), False
        if nudge:
            guard = 0
            while np.any(np.abs(times - t) <= flat_tol) and guard < 8:
                t = t + 1e-9 * span
                guard += 1
        _, unit, _, _ = self._geometry()
        verts_out, weights_out = [], []
        for i in range(V.shape[0]):
            tv = times[i]
            below = tv < t
            above = tv > t
            if below.all() or above.all():
                continue
            lone_side = below if below.sum() == 1 else above
            a = int(np.argmax(lone_side))
            others = [j for j in range(3) if j != a]
            pts = []
            for bidx in others:
                lam = (t - tv[a]) / (tv[bidx] - tv[a])
                pts.append(V[i, a] + lam * (V[i, bidx] - V[i, a]))
            P, Q = pts
            seg = Q[1:] - P[1:]
            if not np.any(seg):
                continue
            tau = _contract_with_time_gradient(V[i], unit[i])
            s = math.copysign(1.0, float(seg @ tau[1:]))
            verts_out.append(np.stack([P[1:], Q[1:]]))
            weights_out.append(s * self.chain.weights[i])
        if not verts_out:
            return SimplicialCurrent(1, 3, quantum=self.chain.quantum, validate=False), True
        out = SimplicialCurrent(1, 3, np.stack(verts_out), np.array(weights_out),
                                self.chain.quantum, validate=False)
        return out, True

    def restrict_time(self, a: float, b: float) -> "SpaceTimeCurrent":
        """S restricted to the open slab (a, b) x R^3.

        Triangles are clipped (convex polygon section, fan re-triangulation);
        flat pieces lying in the end planes carry no slab measure and are
        dropped.
        """
        V = self.chain.vertices
        verts_out, weights_out = [], []
        span = max(self.window[1] - self.window[0], 1e-30)
        flat_tol = 1e-12 * span
        for i in range(V.shape[0]):
            w = self.chain.weights[i]
            if w == 0.0:
                continue
            tv = V[i, :, 0]
            if np.all(np.abs(tv - a) <= flat_tol) or np.all(np.abs(tv - b) <= flat_tol):
                continue
            poly = _clip_polygon_halfspace(list(V[i]), a, keep_above=True)
            poly = _clip_polygon_halfspace(poly, b, keep_above=False)
            if len(poly) < 3:
                continue
            for j in range(1, len(poly) - 1):
                verts_out.append(np.stack([poly[0], poly[j], poly[j + 1]]))
                weights_out.append(w)
        lo, hi = max(a, self.window[0]), min(b, self.window[1])
        if hi <= lo:
            lo, hi = a, b
        if not verts_out:
            return SpaceTimeCurrent(
                SimplicialCurrent(2, 4, quantum=self.chain.quantum, validate=False),
                (lo, hi))
        chain = SimplicialCurrent(2, 4, np.stack(verts_out), np.array(weights_out),
                                  self.chain.quantum, validate=False)
        return SpaceTimeCurrent(chain, (lo, hi))

    # -- boundary traces -----------------------------------------------------------

    def boundary(self) -> SimplicialCurrent:
        return self.chain.boundary()

    def boundary_trace(self, t: float) -> SimplicialCurrent:
        """p_* of the part of boundary(S) lying in the plane {time = t}."""
        b = self.chain.boundary()
        if b.n_simplices == 0:
            return SimplicialCurrent(1, 3, quantum=self.chain.quantum, validate=False)
        span = max(self.window[1] - self.window[0], 1e-30)
        at = np.all(np.abs(b.vertices[:, :, 0] - t) <= 1e-9 * span, axis=1)
        return b.select(at).pushforward(SPATIAL_PROJECTION, canonical=True)

    def interior_boundary_mass(self) -> float:
        """Mass of boundary(S) strictly inside the open time window."""
        b = self.chain.boundary()
        if b.n_simplices == 0:
            return 0.0
        span = self.window[1] - self.window[0]
        t0, t1 = self.window
        inner = ~(np.all(np.abs(b.vertices[:, :, 0] - t0) <= 1e-9 * span, axis=1)
                  | np.all(np.abs(b.vertices[:, :, 0] - t1) <= 1e-9 * span, axis=1))
        return b.select(inner).mass()

    def map_time(self, knots_in, knots_out) -> "SpaceTimeCurrent":
        """Push forward under the piecewise-affine time map knots_in -> knots_out.

        Simplices are split at the input knots first, so each piece maps
        affinely and spatial projections (hence Var) are preserved exactly.
        """
        knots_in = np.asarray(knots_in, dtype=float)
        knots_out = np.asarray(knots_out, dtype=float)
        if knots_in.shape != knots_out.shape or knots_in.size < 2:
            raise ValueError("need matching knot arrays with at least two knots")
        if np.any(np.diff(knots_in) <= 0) or np.any(np.diff(knots_out) <= 0):
            raise ValueError("time maps must be strictly increasing")
        pieces = []
        for j in range(knots_in.size - 1):
            a_in, b_in = knots_in[j], knots_in[j + 1]
            part = self.restrict_time(a_in, b_in)
            if part.chain.n_simplices == 0:
                continue
            scale = (knots_out[j + 1] - knots_out[j]) / (b_in - a_in)
            A = np.eye(4)
            A[0, 0] = scale
            shift = np.zeros(4)
            shift[0] = knots_out[j] - scale * a_in
            pieces.append(part.chain.pushforward((A, shift)))
        window = (float(knots_out[0]), float(knots_out[-1]))
        if not pieces:
            return SpaceTimeCurrent(
                SimplicialCurrent(2, 4, quantum=self.chain.quantum, validate=False), window)
        total = pieces[0]
        for p in pieces[1:]:
            total = total + p
        return SpaceTimeCurrent(total, window)

    def __repr__(self) -> str:  # pragma: no cover
        return f"SpaceTimeCurrent(n={self.chain.n_simplices}, window={self.window})"


# -- constructions ------------------------------------------------------------------


def static_cylinder(T: SimplicialCurrent, window=(0.0, 1.0)) -> SpaceTimeCurrent:
    """The neutral trajectory: [window] x T, Var = 0, slices = T."""
    if T.dim != 3 or T.grade != 1:
        raise ValueError("static_cylinder expects a 1-current in R^3")
    prod = product_current(time_interval(*window), T)
    return SpaceTimeCurrent(prod, window)


def ruled_sweep(T0_points_list, T1_points_list, weights, window=(0.0, 1.0),
                quantum: float = 0.0, closed: bool = True) -> SpaceTimeCurrent:
    """Linear-homotopy band between matched polylines.

    Each entry of the lists is an (m, 3) array of matched vertices (same m,
    same closedness); the band between matched segments is split into two
    triangles with a consistent diagonal, so the chain boundary is exactly
    delta_1 x T1 - delta_0 x T0 plus cancelling seams (plus side rails for
    open polylines).
    """
    t0, t1 = float(window[0]), float(window[1])
    verts_out, weights_out = [], []
    for P0, P1, w in zip(T0_points_list, T1_points_list, weights):
        P0 = np.asarray(P0, dtype=float)
        P1 = np.asarray(P1, dtype=float)
        if P0.shape != P1.shape:
            raise ValueError("matched polylines need equal vertex counts")
        m = P0.shape[0]
        A0 = np.hstack([np.full((m, 1), t0), P0])
        A1 = np.hstack([np.full((m, 1), t1), P1])
        n_seg = m if closed else m - 1
        for i in range(n_seg):
            j = (i + 1) % m
            a0, b0 = A0[i], A0[j]
            a1, b1 = A1[i], A1[j]
            # diagonal a0-b1; orientation chosen so the boundary is
            # delta_1 x T1 - delta_0 x T0 with seam rails cancelling
            verts_out.append(np.stack([a0, b1, b0]))
            weights_out.append(w)
            verts_out.append(np.stack([a0, a1, b1]))
            weights_out.append(w)
    chain = SimplicialCurrent(2, 4, np.stack(verts_out), np.array(weights_out),
                              quantum, validate=False)
    return SpaceTimeCurrent(chain, (t0, t1))


def concatenate(S1: SpaceTimeCurrent, S2: SpaceTimeCurrent) -> SpaceTimeCurrent:
    """S2 after S1 on [0,1]: S1 compressed to [0, 1/2], S2 to [1/2, 1].

    Var is additive under this surgery (time compression does not move
    spatial projections).
    """
    a = S1.map_time(np.array(S1.window), np.array([0.0, 0.5]))
    b = S2.map_time(np.array(S2.window), np.array([0.5, 1.0]))
    return SpaceTimeCurrent(a.chain + b.chain, (0.0, 1.0))


def rescale(S: SpaceTimeCurrent, knots_in, knots_out) -> SpaceTimeCurrent:
    """Monotone piecewise-affine time reparametrization (new window = image)."""
    return S.map_time(knots_in, knots_out)


def deformation_distance(T0: SimplicialCurrent, T1: SimplicialCurrent,
                         complex=None):
    """Upper bound for the Lipschitz deformation distance plus a witness.

    The witness is: cylinder over T0 on [0, 1/2], an instantaneous transfer
    sheet {1/2} x Q over a minimal-mass filling Q of T1 - T0 (flat-norm LP),
    cylinder over T1 on [1/2, 1].  Var(witness) = M(Q); boundary is exactly
    delta_1 x T1 - delta_0 x T0.
    """
    from .complexes import cone_complex, dense_complex

    pts = np.concatenate([T0.vertices.reshape(-1, 3), T1.vertices.reshape(-1, 3)], axis=0)
    R0 = refine_1chain(T0, pts)
    R1 = refine_1chain(T1, pts)
    diff = (R1 - R0).canonicalized()
    if diff.n_simplices == 0:
        return 0.0, static_cylinder(T0)
    K = complex
    if K is None:
        # all-triangles complex is tight for small inputs (annuli, strips);
        # large inputs fall back to apex fans
        K = dense_complex([R0, R1])
    if K is None:
        K = cone_complex([R0, R1])
    t = K.chain_vector(R1) - K.chain_vector(R0)
    filled = K.fill_min_mass(t, grade=1)
    if filled is None:
        raise ValueError("difference is not fillable on the supplied complex")
    mass, Q = filled
    sheet = product_current(
        SimplicialCurrent(0, 1, np.array([[[0.5]]]), np.array([1.0])), Q)
    lower = product_current(time_interval(0.0, 0.5), T0)
    upper = product_current(time_interval(0.5, 1.0), T1)
    witness = SpaceTimeCurrent(lower + sheet + upper, (0.0, 1.0))
    return float(mass), witness


def slice_1current(R: SimplicialCurrent, t: float) -> SimplicialCurrent:
    """Time slice of a 1-current in R^(1+3): signed point masses, projected.

    Sign convention: a segment crossing upward in time contributes +m.
    """
    if R.dim != 4 or R.grade != 1:
        raise ValueError("slice_1current expects 1-currents in R^4")
    verts_out, weights_out = [], []
    for i in range(R.n_simplices):
        ta, tb = R.vertices[i, 0, 0], R.vertices[i, 1, 0]
        if ta == tb or not (min(ta, tb) < t < max(ta, tb)):
            continue
        lam = (t - ta) / (tb - ta)
        p = R.vertices[i, 0] + lam * (R.vertices[i, 1] - R.vertices[i, 0])
        verts_out.append(p[None, 1:])
        weights_out.append(R.weights[i] * math.copysign(1.0, tb - ta))
    if not verts_out:
        return SimplicialCurrent(0, 3, quantum=R.quantum, validate=False)
    return SimplicialCurrent(0, 3, np.stack(verts_out), np.array(weights_out),
                             R.quantum, validate=False)


# -- local helpers -------------------------------------------------------------------


def _contract_with_time_gradient(verts: np.ndarray, unit_w: np.ndarray) -> np.ndarray:
    """tau = S_vec |_ xi: the slice orientation of one simplex."""
    e1 = verts[1] - verts[0]
    e2 = verts[2] - verts[0]
    G = np.array([[e1 @ e1, e1 @ e2], [e1 @ e2, e2 @ e2]])
    rhs = np.array([e1[0], e2[0]])
    try:
        c = np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError:
        return np.zeros(4)
    grad = c[0] * e1 + c[1] * e2
    norm = np.linalg.norm(grad)
    if norm == 0.0:
        return np.zeros(4)
    xi = grad / norm
    W = np.zeros((4, 4))
    for comp, (a, b) in zip(unit_w, _PAIRS):
        W[a, b] = comp
        W[b, a] = -comp
    return xi @ W


def _clip_polygon_halfspace(poly: list[np.ndarray], level: float,
                            keep_above: bool) -> list[np.ndarray]:
    """Sutherland-Hodgman clip of a convex planar polygon in the time coord."""
    out: list[np.ndarray] = []
    n = len(poly)
    for i in range(n):
        cur, nxt = poly[i], poly[(i + 1) % n]
        tc, tn = cur[0] - level, nxt[0] - level
        if not keep_above:
            tc, tn = -tc, -tn
        cur_in, nxt_in = tc >= 0, tn >= 0
        if cur_in:
            out.append(cur)
        if cur_in != nxt_in:
            lam = tc / (tc - tn)
            out.append(cur + lam * (nxt - cur))
    return out


def _segment_length_integral(verts: np.ndarray) -> float:
    """int over t of the slice-segment length of one triangle (closed form)."""
    tv = verts[:, 0]
    order = np.argsort(tv)
    t0, t1, t2 = tv[order]
    v0, v1, v2 = verts[order]
    total = 0.0
    # between t0 and t1 the slice joins edge (v0,v1) and edge (v0,v2)
    if t1 > t0:
        p = lambda t: v0 + (t - t0) / (t1 - t0) * (v1 - v0)
        q = lambda t: v0 + (t - t0) / (t2 - t0) * (v2 - v0)
        total += _affine_norm_integral(p, q, t0, t1)
    # between t1 and t2 the slice joins edge (v1,v2) and edge (v0,v2)
    if t2 > t1:
        p = lambda t: v1 + (t - t1) / (t2 - t1) * (v2 - v1)
        q = lambda t: v0 + (t - t0) / (t2 - t0) * (v2 - v0)
        total += _affine_norm_integral(p, q, t1, t2)
    return total


def _affine_norm_integral(p, q, ta: float, tb: float) -> float:
    """int_ta^tb |p(t) - q(t)| dt with p, q affine: the spatial difference is
    a + s b on s in [0, L], integrated in closed form."""
    if tb <= ta:
        return 0.0
    a = (p(ta) - q(ta))[1:]
    b_end = (p(tb) - q(tb))[1:]
    L = tb - ta
    b = (b_end - a) / L

    beta = float(b @ b)
    if beta < 1e-300:
        return float(np.linalg.norm(a)) * L
    gamma = float(a @ b)
    alpha = float(a @ a)
    disc = alpha * beta - gamma * gamma  # >= 0 by Cauchy-Schwarz

    def F(s: float) -> float:
        r = math.sqrt(max(beta * s * s + 2 * gamma * s + alpha, 0.0))
        term1 = (beta * s + gamma) * r / (2.0 * beta)
        if disc <= 1e-300 * max(alpha * beta, 1.0):
            return term1
        arg = (beta * s + gamma) / math.sqrt(beta * max(disc / beta, 1e-300))
        term2 = (disc / (2.0 * beta ** 1.5)) * math.asinh(arg)
        return term1 + term2

    return F(L) - F(0.0)
