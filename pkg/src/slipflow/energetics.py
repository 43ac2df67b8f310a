"""Slip costs and line energies: rate-independent dissipation, core energy.

Conventions.  Line bundles come in mirror pairs (the bundle for -b is minus
the bundle for b); only canonical representatives are stored.  Totals over
the full sign-closed collection therefore count each canonical bundle twice
(line-tension masses, slice masses), while the dissipation's half factor
cancels the double count, so slip costs sum over canonical bundles only.

The cost of a space-time sweep direction is evaluated through its spatial
shadow (the swept-area vector) alone.  That choice makes dissipation exactly
invariant under monotone time reparametrizations: reparametrizing tilts the
simplices but leaves every spatial shadow bitwise unchanged.
"""

from __future__ import annotations

import numpy as np

from .chains import LineTension, SimplicialCurrent
from .dislocations import DislocationState, canonical_burgers
from .spacetime import SpaceTimeCurrent, static_cylinder

__all__ = [
    "DissipationPotential",
    "CoreEnergy",
    "SlipFamily",
    "dissipation",
    "simplex_bivectors",
    "MIRROR_FACTOR",
]

# each stored canonical bundle has an unstored mirror partner
MIRROR_FACTOR = 2.0

_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


def simplex_bivectors(vertices: np.ndarray) -> np.ndarray:
    """Area-scaled 2-vectors of space-time triangles, components in the
    lexicographic pair basis (01, 02, 03, 12, 13, 23) of R^{1+3}."""
    E1 = vertices[:, 1] - vertices[:, 0]
    E2 = vertices[:, 2] - vertices[:, 0]
    out = np.empty((vertices.shape[0], 6))
    for c, (a, b) in enumerate(_PAIRS):
        out[:, c] = E1[:, a] * E2[:, b] - E1[:, b] * E2[:, a]
    return 0.5 * out


class DissipationPotential:
    """Cost per unit trajectory area for one Burgers bundle.

    On a 2-vector xi the cost is rho * |v| with v the dual of the spatial
    part of xi (the swept-area vector); with a glide-plane normal n the
    out-of-plane sweep is penalized:  rho * (|v.n| + kappa |v - (v.n) n|).
    Convex and positively 1-homogeneous by construction (compositions of
    norms with linear maps); blind to components carrying no spatial shadow.
    """

    def __init__(self, rho: float = 1.0, kappa: float = 1.0, glide_normal=None):
        if rho <= 0.0:
            raise ValueError("rho must be positive")
        if kappa < 1.0:
            raise ValueError("climb penalty must be >= 1")
        self.rho = float(rho)
        self.kappa = float(kappa)
        if glide_normal is None:
            self.glide_normal = None
        else:
            gn = np.asarray(glide_normal, dtype=float)
            nn = float(np.linalg.norm(gn))
            if nn == 0.0:
                raise ValueError("glide normal must be nonzero")
            self.glide_normal = gn / nn

    @staticmethod
    def swept_vectors(xi: np.ndarray) -> np.ndarray:
        """Spatial shadow of 2-vectors: dual of the (12, 13, 23) block."""
        xi = np.asarray(xi, dtype=float)
        return np.stack([xi[..., 5], -xi[..., 4], xi[..., 3]], axis=-1)

    def cost(self, xi: np.ndarray) -> np.ndarray:
        v = self.swept_vectors(xi)
        if self.glide_normal is None:
            return self.rho * np.linalg.norm(v, axis=-1)
        vn = v @ self.glide_normal
        tang = v - vn[..., None] * self.glide_normal
        return self.rho * (np.abs(vn) + self.kappa * np.linalg.norm(tang, axis=-1))

    def comparability_constant(self) -> float:
        """C with C^-1 |shadow| <= cost <= C |shadow| (tight for this family)."""
        if self.glide_normal is None:
            return max(self.rho, 1.0 / self.rho)
        upper = self.rho * self.kappa * np.sqrt(2.0)
        lower = self.rho
        return float(max(upper, 1.0 / lower))


class CoreEnergy:
    """h(total line-tension mass): linear near zero, cubic tail.

    h(z) = z for z <= z0 and z + (z - z0)^3 beyond, so h is increasing,
    h(z) >= z, and h(z) >= (z - z0)^3 (superlinear growth with exponent 3).
    Line-tension masses may be weighted per canonical Burgers vector.
    """

    def __init__(self, z0: float = 1.0, tensions: dict | None = None):
        if z0 < 0.0:
            raise ValueError("threshold must be nonnegative")
        self.z0 = float(z0)
        self.tensions: dict[tuple[float, ...], LineTension] = {}
        if tensions:
            for b, psi in tensions.items():
                key, _ = canonical_burgers(b)
                self.tensions[key] = psi

    def h(self, z):
        z = np.asarray(z, dtype=float)
        tail = np.where(z > self.z0, (z - self.z0) ** 3, 0.0)
        return z + tail

    def growth_constant(self, z_samples=None) -> float:
        """C with h(z) >= C^-1 z^3 - C on the sampled range."""
        if z_samples is None:
            z_samples = np.linspace(0.0, 10.0 * (self.z0 + 1.0), 2001)
        z = np.asarray(z_samples, dtype=float)
        for C in (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0):
            if np.all(self.h(z) >= z ** 3 / C - C):
                return C
        raise AssertionError("cubic growth constant not found on sample range")

    def line_mass(self, state: DislocationState) -> float:
        """Line-tension mass over the sign-closed collection (mirrors count)."""
        total = 0.0
        for b, T in state.systems():
            psi = self.tensions.get(tuple(b))
            total += T.mass_psi(psi) if psi is not None else T.mass()
        return MIRROR_FACTOR * total

    def total(self, state: DislocationState) -> float:
        return float(self.h(self.line_mass(state)))


class SlipFamily:
    """One space-time trajectory per canonical Burgers vector.

    All trajectories share a common time window.  Bundles not explicitly
    set are implicitly neutral (no trajectory, zero variation).
    """

    def __init__(self, window=(0.0, 1.0)):
        self.window = (float(window[0]), float(window[1]))
        self._surfaces: dict[tuple[float, ...], SpaceTimeCurrent] = {}

    def set(self, b, S: SpaceTimeCurrent) -> None:
        key, sign = canonical_burgers(b)
        if S.window != self.window:
            raise ValueError("trajectory window does not match the family window")
        if sign < 0:
            S = SpaceTimeCurrent(-S.chain, S.window)
        self._surfaces[key] = S

    def get(self, b) -> SpaceTimeCurrent | None:
        key, sign = canonical_burgers(b)
        S = self._surfaces.get(key)
        if S is None or sign > 0:
            return S
        return SpaceTimeCurrent(-S.chain, S.window)

    def items(self):
        for key in sorted(self._surfaces):
            yield key, self._surfaces[key]

    @classmethod
    def neutral(cls, state: DislocationState, window=(0.0, 1.0)) -> "SlipFamily":
        fam = cls(window)
        for b, T in state.systems():
            fam.set(b, static_cylinder(T, window))
        return fam

    def variation(self, interval=None) -> float:
        """Summed spatial-shadow area over canonical bundles."""
        return sum(S.variation(interval) for _, S in self.items())

    def sup_slice_mass(self) -> float:
        """max over time of the sign-closed slice mass (mirrors count)."""
        return MIRROR_FACTOR * sum(S.sup_slice_mass() for _, S in self.items())

    def initial_traces(self) -> dict:
        out = {}
        for key, S in self.items():
            out[key] = S.slice_at(self.window[0])[0]
        return out

    def final_state(self, state: DislocationState) -> DislocationState:
        """Forward transport of the line configuration along the family."""
        from .dislocations import forward

        out = state.copy()
        for key, S in self.items():
            out.replace(key, forward(S, state.line(key)))
        return out

    def rescaled(self, window) -> "SlipFamily":
        out = SlipFamily(window)
        for key, S in self.items():
            out._surfaces[key] = S.map_time(list(S.window), list(window))
        return out


def dissipation(potentials, family: SlipFamily, interval=None) -> float:
    """Total slip cost of the family, exactly additive and rate independent.

    potentials: mapping canonical-Burgers-key -> DissipationPotential, or a
    single potential used for every bundle.  Per-simplex quadrature is exact
    because the cost is constant on flat simplices.
    """
    total = 0.0
    for key, S in family.items():
        if interval is not None:
            S = S.restrict_time(float(interval[0]), float(interval[1]))
        pot = potentials[key] if isinstance(potentials, dict) else potentials
        if S.chain.n_simplices == 0:
            continue
        xi = simplex_bivectors(S.chain.vertices)
        costs = pot.cost(xi)
        total += float(np.sum(np.abs(S.chain.weights) * costs))
    return total
