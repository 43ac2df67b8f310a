"""Slip cost and core-energy behavior on hand-computable sweeps.

Frozen geometry oracles:
  * square loop side 2 about the origin expanded by 1.2 sweeps the annulus
    2.4^2 - 2^2 = 1.76, tiled exactly by the four ruled trapezoid bands;
  * the same loop translated up by 0.5 sweeps four vertical side quads of
    total area 4 * (2 * 0.5) = 4.0, all orthogonal to the glide plane.
"""

import numpy as np
import pytest

from slipflow.chains import LineTension, polygon_loop, refined_difference_mass
from slipflow.dislocations import DislocationState
from slipflow.energetics import (
    MIRROR_FACTOR,
    CoreEnergy,
    DissipationPotential,
    SlipFamily,
    dissipation,
    simplex_bivectors,
)
from slipflow.spacetime import concatenate, ruled_sweep, static_cylinder

SQUARE = np.array([[1.0, -1.0, 0.0], [1.0, 1.0, 0.0],
                   [-1.0, 1.0, 0.0], [-1.0, -1.0, 0.0]])


def square_state(mult=1.0):
    st = DislocationState()
    st.add_line((1.0, 0.0, 0.0), polygon_loop(SQUARE, weight=mult))
    return st


def expansion_sweep(factor=1.2, window=(0.0, 1.0)):
    return ruled_sweep([SQUARE], [factor * SQUARE], [1.0], window)


def climb_sweep(dz=0.5, window=(0.0, 1.0)):
    lifted = SQUARE + np.array([0.0, 0.0, dz])
    return ruled_sweep([SQUARE], [lifted], [1.0], window)


def test_neutral_family_costs_nothing():
    st = square_state()
    fam = SlipFamily.neutral(st, (0.0, 1.0))
    pot = DissipationPotential(rho=1.0)
    assert dissipation(pot, fam) == 0.0
    assert fam.variation() == 0.0
    out = fam.final_state(st)
    for (b, T), (b2, T2) in zip(st.systems(), out.systems()):
        assert refined_difference_mass(T, T2) <= 1e-12


def test_expansion_sweeps_annulus_area():
    S = expansion_sweep(1.2)
    fam = SlipFamily((0.0, 1.0))
    fam.set((1.0, 0.0, 0.0), S)
    pot = DissipationPotential(rho=1.0)
    assert dissipation(pot, fam) == pytest.approx(1.76, abs=1e-12)
    assert fam.variation() == pytest.approx(1.76, abs=1e-12)


def test_glide_versus_climb_costs():
    pot = DissipationPotential(rho=1.0, kappa=3.0, glide_normal=(0, 0, 1))
    fam_g = SlipFamily((0.0, 1.0))
    fam_g.set((1.0, 0.0, 0.0), expansion_sweep(1.2))
    assert dissipation(pot, fam_g) == pytest.approx(1.76, abs=1e-12)
    fam_c = SlipFamily((0.0, 1.0))
    fam_c.set((1.0, 0.0, 0.0), climb_sweep(0.5))
    assert dissipation(pot, fam_c) == pytest.approx(3.0 * 4.0, abs=1e-12)


def test_cost_homogeneous_and_convex():
    rng = np.random.default_rng(3)
    pots = [DissipationPotential(rho=0.7),
            DissipationPotential(rho=1.3, kappa=2.5, glide_normal=(0, 1, 1))]
    for pot in pots:
        xi = rng.normal(size=(1000, 6))
        eta = rng.normal(size=(1000, 6))
        a = rng.uniform(0.1, 5.0, size=1000)
        hom = np.abs(pot.cost(a[:, None] * xi) - a * pot.cost(xi))
        assert np.max(hom) <= 1e-12 * np.max(a * pot.cost(xi))
        mid = pot.cost(0.5 * (xi + eta)) - 0.5 * (pot.cost(xi) + pot.cost(eta))
        assert np.max(mid) <= 1e-12


def test_comparability_with_shadow_mass():
    rng = np.random.default_rng(4)
    pot = DissipationPotential(rho=1.4, kappa=2.0, glide_normal=(0, 0, 1))
    C = pot.comparability_constant()
    xi = rng.normal(size=(1000, 6))
    shadow = np.linalg.norm(DissipationPotential.swept_vectors(xi), axis=-1)
    cost = pot.cost(xi)
    assert np.all(cost <= C * shadow + 1e-12)
    assert np.all(cost >= shadow / C - 1e-12)


def test_dissipation_rate_independent():
    S = expansion_sweep(1.3)
    fam = SlipFamily((0.0, 1.0))
    fam.set((1.0, 0.0, 0.0), S)
    pot = DissipationPotential(rho=1.0, kappa=4.0, glide_normal=(0, 0, 1))
    base = dissipation(pot, fam)
    rng = np.random.default_rng(5)
    for _ in range(5):
        interior = np.sort(rng.uniform(0.05, 0.95, size=3))
        knots_in = np.concatenate([[0.0], interior, [1.0]])
        knots_out = np.concatenate(
            [[0.0], np.sort(rng.uniform(0.05, 0.95, size=3)), [1.0]])
        fam2 = SlipFamily((0.0, 1.0))
        fam2.set((1.0, 0.0, 0.0), S.map_time(knots_in, knots_out))
        assert abs(dissipation(pot, fam2) - base) <= 1e-12 * max(base, 1.0)


def test_dissipation_additive_over_concatenation():
    S1 = expansion_sweep(1.2)
    S2 = ruled_sweep([1.2 * SQUARE], [1.3 * SQUARE], [1.0], (0.0, 1.0))
    pot = DissipationPotential(rho=1.0)
    fam1 = SlipFamily((0.0, 1.0))
    fam1.set((1.0, 0.0, 0.0), S1)
    fam2 = SlipFamily((0.0, 1.0))
    fam2.set((1.0, 0.0, 0.0), S2)
    cat = SlipFamily((0.0, 1.0))
    cat.set((1.0, 0.0, 0.0), concatenate(S1, S2))
    d = dissipation(pot, cat)
    assert d == pytest.approx(dissipation(pot, fam1) + dissipation(pot, fam2),
                              abs=1e-12)
    # interval splitting agrees with the whole
    left = dissipation(pot, cat, (0.0, 0.5))
    right = dissipation(pot, cat, (0.5, 1.0))
    assert left + right == pytest.approx(d, abs=1e-12)


def test_mirror_bundle_roundtrip():
    fam = SlipFamily((0.0, 1.0))
    S = expansion_sweep(1.1)
    fam.set((-1.0, 0.0, 0.0), S)
    back = fam.get((-1.0, 0.0, 0.0))
    assert np.array_equal(back.chain.vertices, S.chain.vertices)
    assert np.array_equal(back.chain.weights, S.chain.weights)
    stored = fam.get((1.0, 0.0, 0.0))
    assert np.array_equal(stored.chain.weights, -S.chain.weights)


def test_core_energy_values():
    core = CoreEnergy(z0=1.0)
    assert core.h(0.5) == 0.5
    assert core.h(1.0) == 1.0
    assert core.h(2.0) == pytest.approx(3.0, abs=1e-15)
    assert core.growth_constant() <= 64.0
    st = square_state()
    # perimeter 8, mirror doubles it
    assert core.line_mass(st) == pytest.approx(MIRROR_FACTOR * 8.0, abs=1e-12)
    assert core.total(st) == pytest.approx(
        float(core.h(MIRROR_FACTOR * 8.0)), abs=1e-12)


def test_core_energy_weighted_tension():
    psi = LineTension.anisotropic(np.diag([2.0, 1.0, 1.0]))
    core = CoreEnergy(z0=100.0, tensions={(1.0, 0.0, 0.0): psi})
    st = square_state()
    # two edges along x weigh 1.0 each, two along y weigh 2.0 each, length 2
    expected = MIRROR_FACTOR * (2 * 2.0 * 1.0 + 2 * 2.0 * 2.0)
    assert core.line_mass(st) == pytest.approx(expected, abs=1e-12)


def test_family_transport_matches_sweep_target():
    st = square_state()
    fam = SlipFamily((0.0, 1.0))
    fam.set((1.0, 0.0, 0.0), expansion_sweep(1.2))
    out = fam.final_state(st)
    target = polygon_loop(1.2 * SQUARE, weight=1.0)
    moved = out.line((1.0, 0.0, 0.0))
    assert refined_difference_mass(moved, target) <= 1e-12


def test_neutral_sup_slice_mass_counts_mirror():
    st = square_state()
    fam = SlipFamily.neutral(st, (0.0, 1.0))
    assert fam.sup_slice_mass() == pytest.approx(MIRROR_FACTOR * 8.0, rel=1e-9)


def test_bivector_shadow_matches_triangle_area():
    rng = np.random.default_rng(6)
    V = rng.normal(size=(200, 3, 4))
    xi = simplex_bivectors(V)
    # spatial shadow norm == area of the spatially projected triangle
    P = V[..., 1:]
    cr = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    area = 0.5 * np.linalg.norm(cr, axis=-1)
    shadow = np.linalg.norm(DissipationPotential.swept_vectors(xi), axis=-1)
    assert np.max(np.abs(shadow - area)) <= 1e-12 * np.max(area)
