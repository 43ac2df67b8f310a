"""Dislocation lines, slip sweeps and the plastic distortion they generate.

A dislocation state holds one 1-current per canonical Burgers vector (the
representative with positive leading component); the mirror line bundle for
-b is minus the stored chain and is never materialized.  Moving a line along
a spacetime trajectory S deposits slip: the spatial sweep p_*(S) becomes a
distortion sheet with matrix density b (x) nu per unit area, nu the oriented
surface normal.  Row-wise distributional curls of such sheets are exactly the
chain boundaries of their surfaces, which makes the line-density constraint

    curl P = sum_b  b (x) T^b

checkable at chain level with no quadrature error.
"""

from __future__ import annotations

import numpy as np

from .chains import SimplicialCurrent, refined_difference_mass
from .complexes import cone_complex
from .spacetime import SpaceTimeCurrent

__all__ = [
    "canonical_burgers",
    "SlipSheet",
    "PlasticDistortion",
    "DislocationState",
    "sweep_sheet",
    "forward",
    "initial_fill_sheet",
    "slip_rate",
    "consistency_residual",
]

CRITICAL_TIME_GRADIENT = 1e-9


def canonical_burgers(b) -> tuple[tuple[float, ...], float]:
    """Representative of {b, -b} with positive leading nonzero component.

    Returns (key, sign) with b = sign * key.
    """
    b = np.asarray(b, dtype=float)
    if not np.any(b):
        raise ValueError("Burgers vector must be nonzero")
    lead = b[np.nonzero(b)[0][0]]
    sign = 1.0 if lead > 0 else -1.0
    return tuple(sign * b), sign


class SlipSheet:
    """A 2-current in R^3 carrying the matrix density b (x) nu."""

    def __init__(self, surface: SimplicialCurrent, burgers):
        if surface.grade != 2 or surface.dim != 3:
            raise ValueError("slip sheets are 2-currents in R^3")
        self.surface = surface
        self.burgers = np.asarray(burgers, dtype=float)

    def matrix_mass(self) -> float:
        """Total variation of the matrix measure: |b| x area."""
        return float(np.linalg.norm(self.burgers)) * self.surface.mass()

    def row_curl(self, i: int) -> SimplicialCurrent:
        """curl of row i as a 1-current: b_i times the surface boundary."""
        return self.surface.boundary().scaled(self.burgers[i])

    def triangles_with_density(self):
        """(vertices (n,3,3), weights, normals, areas, density b (x) nu per tri)."""
        V = self.surface.vertices
        cr = np.cross(V[:, 1] - V[:, 0], V[:, 2] - V[:, 0])
        norms = np.linalg.norm(cr, axis=1)
        areas = 0.5 * norms
        normals = np.zeros_like(cr)
        ok = norms > 0
        normals[ok] = cr[ok] / norms[ok, None]
        dens = self.burgers[None, :, None] * normals[:, None, :]
        return V, self.surface.weights, normals, areas, dens


class PlasticDistortion:
    """A list of slip sheets (the singular, curl-carrying part of P)."""

    def __init__(self, sheets=None):
        self.sheets = list(sheets) if sheets else []

    def add(self, sheet: SlipSheet) -> None:
        self.sheets.append(sheet)

    def extended(self, sheet: SlipSheet) -> "PlasticDistortion":
        return PlasticDistortion(self.sheets + [sheet])

    def matrix_mass(self) -> float:
        return sum(s.matrix_mass() for s in self.sheets)

    def row_curl(self, i: int) -> SimplicialCurrent:
        total = SimplicialCurrent(1, 3)
        for s in self.sheets:
            if s.burgers[i] != 0.0:
                total = total + s.row_curl(i)
        return total

    def curl_rows(self):
        return [self.row_curl(i) for i in range(3)]


class DislocationState:
    """Current line configuration, one chain per canonical Burgers vector."""

    def __init__(self):
        self._lines: dict[tuple[float, ...], SimplicialCurrent] = {}
        self._burgers: dict[tuple[float, ...], np.ndarray] = {}

    def add_line(self, b, chain: SimplicialCurrent) -> None:
        key, sign = canonical_burgers(b)
        chain = chain if sign > 0 else -chain
        if key in self._lines:
            self._lines[key] = (self._lines[key] + chain).canonicalized()
        else:
            self._lines[key] = chain.canonicalized()
            self._burgers[key] = np.array(key)

    def line(self, b) -> SimplicialCurrent:
        """The chain for b, mirroring the stored canonical representative."""
        key, sign = canonical_burgers(b)
        T = self._lines[key]
        return T if sign > 0 else -T

    def systems(self):
        """(burgers, chain) pairs in deterministic key order."""
        for key in sorted(self._lines):
            yield self._burgers[key], self._lines[key]

    def replace(self, b, chain: SimplicialCurrent) -> None:
        key, sign = canonical_burgers(b)
        self._lines[key] = (chain if sign > 0 else -chain).canonicalized()
        self._burgers[key] = np.array(key)

    def total_line_mass(self) -> float:
        return sum(T.mass() for _, T in self.systems())

    def copy(self) -> "DislocationState":
        out = DislocationState()
        out._lines = dict(self._lines)
        out._burgers = dict(self._burgers)
        return out


# -- kinematics ------------------------------------------------------------------


def sweep_sheet(S: SpaceTimeCurrent, b) -> SlipSheet:
    """Slip deposited by the trajectory S: sheet over the spatial sweep.

    Its matrix mass is |b| Var(S) exactly; for a loop swept within its glide
    plane this is |b| times the swept area.
    """
    return SlipSheet(S.spatial_sweep(), b)


def forward(S: SpaceTimeCurrent, T: SimplicialCurrent) -> SimplicialCurrent:
    """Transport T along S: project the trajectory boundary and graft it on.

    When T equals the initial trace of S this returns the final trace;
    interior seam rails cancel at chain level.
    """
    moved = S.chain.boundary().pushforward(
        np.array([[0.0, 1.0, 0.0, 0.0],
                  [0.0, 0.0, 1.0, 0.0],
                  [0.0, 0.0, 0.0, 1.0]]))
    return (moved + T).canonicalized()


def initial_fill_sheet(T: SimplicialCurrent, b, apex=None) -> SlipSheet:
    """A minimal-mass sheet with boundary T (cone-complex flat-norm fill).

    Used to seed a consistent plastic distortion: curl of the sheet rows is
    exactly b_i T.
    """
    apexes = None if apex is None else np.asarray(apex, dtype=float)[None, :]
    K = cone_complex([T], apexes=apexes)
    filled = K.fill_min_mass(K.chain_vector(T), grade=1)
    if filled is None:
        raise ValueError("line bundle is not fillable; is it closed?")
    _, Q = filled
    return SlipSheet(Q, b)


def slip_rate(S: SpaceTimeCurrent, t: float):
    """Instantaneous slip rate along the slice S(t).

    Per generating simplex the scalar rate is |p(S_vec)| / |grad_S t| (area
    swept per unit time per unit line length).  Returns (slice chain, rates
    per slice segment, critical flag); the flag marks near-jump simplices
    where |grad_S t| falls below 1e-9 and the rate is unreliable.
    """
    span = max(S.window[1] - S.window[0], 1e-30)
    V = S.chain.vertices
    times = V[:, :, 0]
    areas, unit, grad, proj = S._geometry()
    sl, ok = S.slice_at(t)
    if not ok:
        return sl, np.zeros(0), True
    rates = []
    critical = False
    tt = t
    guard = 0
    while np.any(np.abs(times - tt) <= 1e-12 * span) and guard < 8:
        tt += 1e-9 * span
        guard += 1
    for i in range(V.shape[0]):
        tv = times[i]
        if tv.min() < tt < tv.max() and not (tv < tt).all() and not (tv > tt).all():
            if grad[i] < CRITICAL_TIME_GRADIENT:
                critical = True
                rates.append(np.inf)
            else:
                rates.append(proj[i] / grad[i])
    return sl, np.array(rates), critical


def consistency_residual(P: PlasticDistortion, state: DislocationState) -> float:
    """Chain-level defect of curl P = sum_b b (x) T^b, summed over rows.

    Exact cancellation to refinement; returns the leftover mass.
    """
    total = 0.0
    for i in range(3):
        target = SimplicialCurrent(1, 3)
        for b, T in state.systems():
            if b[i] != 0.0:
                target = target + T.scaled(b[i])
        total += refined_difference_mass(P.row_curl(i), target)
    return total
