"""Line transport, slip sheets and the curl consistency identity."""

import numpy as np
import pytest

from slipflow.chains import SimplicialCurrent, polygon_loop, refined_difference_mass
from slipflow.dislocations import (
    DislocationState,
    PlasticDistortion,
    canonical_burgers,
    consistency_residual,
    forward,
    initial_fill_sheet,
    slip_rate,
    sweep_sheet,
)
from slipflow.spacetime import ruled_sweep, static_cylinder


def square_pts(side, center=(0.0, 0.0, 0.0)):
    h = side / 2.0
    return np.array([[-h, -h, 0], [h, -h, 0], [h, h, 0], [-h, h, 0]]) + np.asarray(center)


def test_canonical_burgers_representative():
    key, sign = canonical_burgers([0.0, -1.0, 0.5])
    assert key == (0.0, 1.0, -0.5)
    assert sign == -1.0
    key2, sign2 = canonical_burgers([0.0, 1.0, -0.5])
    assert key2 == key and sign2 == 1.0
    with pytest.raises(ValueError):
        canonical_burgers([0.0, 0.0, 0.0])


def test_state_merges_mirror_lines():
    st = DislocationState()
    T = polygon_loop(square_pts(1.0))
    st.add_line([1.0, 0.0, 0.0], T)
    # adding the mirror bundle with the mirrored chain changes nothing
    st.add_line([-1.0, 0.0, 0.0], -T)
    systems = list(st.systems())
    assert len(systems) == 1
    b, chain = systems[0]
    assert tuple(b) == (1.0, 0.0, 0.0)
    assert chain.mass() == pytest.approx(2 * T.mass())
    assert refined_difference_mass(st.line([-1.0, 0.0, 0.0]), -chain) <= 1e-12


def test_sweep_sheet_mass_is_burgers_times_area():
    b = np.array([1.0, 0.0, 0.0])
    p0 = square_pts(1.0)
    p1 = square_pts(2.0)
    S = ruled_sweep([p0], [p1], [1.0])
    sheet = sweep_sheet(S, b)
    # swept annulus between concentric squares: 2^2 - 1^2
    assert sheet.matrix_mass() == pytest.approx(np.linalg.norm(b) * 3.0, rel=1e-12)


def test_forward_transports_initial_to_final_trace():
    p0 = square_pts(1.0)
    p1 = square_pts(2.0)
    S = ruled_sweep([p0], [p1], [1.0])
    T1 = forward(S, polygon_loop(p0))
    assert refined_difference_mass(T1, polygon_loop(p1)) <= 1e-12
    # transporting an unrelated bundle adds the net sweep boundary
    extra = polygon_loop(square_pts(1.0, center=(5.0, 5.0, 0.0)))
    T2 = forward(S, polygon_loop(p0) + extra)
    assert refined_difference_mass(T2, polygon_loop(p1) + extra) <= 1e-12


def test_static_cylinder_transports_identically():
    T = polygon_loop(square_pts(1.5))
    S = static_cylinder(T)
    assert refined_difference_mass(forward(S, T), T) <= 1e-12


def test_row_curl_is_boundary_times_component():
    b = np.array([2.0, 0.0, -1.0])
    pts = square_pts(2.0)
    S = ruled_sweep([pts], [square_pts(3.0)], [1.0])
    sheet = sweep_sheet(S, b)
    outer = polygon_loop(square_pts(3.0))
    inner = polygon_loop(pts)
    for i, bi in enumerate(b):
        want = (outer - inner).scaled(bi) if bi else SimplicialCurrent(1, 3)
        assert refined_difference_mass(sheet.row_curl(i), want) <= 1e-11


def test_initial_fill_sheet_closes_consistency():
    b = np.array([1.0, 0.0, 0.0])
    T = polygon_loop(square_pts(2.0))
    sheet = initial_fill_sheet(T, b)
    st = DislocationState()
    st.add_line(b, T)
    P = PlasticDistortion([sheet])
    assert consistency_residual(P, st) <= 1e-9
    # with an in-plane apex the cone is the flat disk: mass = enclosed area
    flat = initial_fill_sheet(T, b, apex=(0.0, 0.0, 0.0))
    assert flat.surface.mass() == pytest.approx(4.0, abs=1e-12)
    assert consistency_residual(PlasticDistortion([flat]), st) <= 1e-9


def test_consistency_tracks_sweeps_over_time():
    b = np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)
    side0 = 1.0
    T0 = polygon_loop(square_pts(side0))
    st = DislocationState()
    st.add_line(b, T0)
    P = PlasticDistortion([initial_fill_sheet(T0, b)])
    for t in np.linspace(0.1, 1.0, 10):
        side = side0 + t
        S = ruled_sweep([square_pts(side0)], [square_pts(side)], [1.0])
        st_t = DislocationState()
        st_t.add_line(b, polygon_loop(square_pts(side)))
        P_t = P.extended(sweep_sheet(S, b))
        assert consistency_residual(P_t, st_t) <= 1e-8


def test_slip_rate_matches_uniform_expansion():
    # square expanding at edge speed v: every swept simplex has rate v
    v = 0.7
    p0 = square_pts(2.0)
    p1 = square_pts(2.0 + 2 * v)  # half-width grows by v per unit time
    S = ruled_sweep([p0], [p1], [1.0])
    sl, rates, critical = slip_rate(S, 0.5)
    assert not critical
    assert rates.size > 0
    # corner motion is tangential stretching: normal sweep rate is v everywhere
    assert np.min(rates) == pytest.approx(v, rel=1e-9)
    assert np.max(rates) == pytest.approx(v, rel=1e-9)


def test_slip_rate_flags_jump():
    pts = square_pts(1.0)
    tri = np.array([[[0.5, *pts[0]], [0.5, *pts[1]], [0.5, *pts[2]]]])
    S_flat = static_cylinder(polygon_loop(pts))
    chain = S_flat.chain + SimplicialCurrent(2, 4, tri, np.array([1.0]), validate=False)
    from slipflow.spacetime import SpaceTimeCurrent
    S = SpaceTimeCurrent(chain, (0.0, 1.0))
    sl, rates, critical = slip_rate(S, 0.5)
    assert critical
