"""Move generation: loop extraction, candidate counts, admissibility."""

import numpy as np
import pytest

from slipflow.catalog import MoveCatalog, extract_loops, loop_normal, plane_basis
from slipflow.chains import SimplicialCurrent, polygon_loop, refined_difference_mass
from slipflow.dislocations import DislocationState

SQUARE = np.array([[1.0, -1.0, 0.0], [1.0, 1.0, 0.0],
                   [-1.0, 1.0, 0.0], [-1.0, -1.0, 0.0]])


def square_state(mult=1.0):
    st = DislocationState()
    st.add_line((1.0, 0.0, 0.0), polygon_loop(SQUARE, weight=mult))
    return st


def test_plane_basis_orthonormal():
    for nrm in ((0, 0, 1), (1, 1, 0), (0.3, -0.2, 0.9)):
        u1, u2 = plane_basis(nrm)
        n = np.asarray(nrm, float)
        n = n / np.linalg.norm(n)
        assert abs(np.dot(u1, u2)) <= 1e-14
        assert abs(np.dot(u1, n)) <= 1e-14
        assert abs(np.dot(u2, n)) <= 1e-14
        assert np.linalg.norm(u1) == pytest.approx(1.0, abs=1e-14)
        assert np.linalg.norm(u2) == pytest.approx(1.0, abs=1e-14)


def test_extract_single_loop():
    loops = extract_loops(polygon_loop(SQUARE, weight=1.0))
    assert len(loops) == 1
    pts, mult = loops[0]
    assert mult == 1.0
    assert pts.shape == (4, 3)
    # same cyclic order as the input square
    start = np.argmin(np.sum((pts - SQUARE[0]) ** 2, axis=1))
    rolled = np.roll(pts, -start, axis=0)
    assert np.allclose(rolled, SQUARE, atol=1e-12)


def test_extract_negative_weight_reverses():
    loops = extract_loops(polygon_loop(SQUARE, weight=-2.0))
    pts, mult = loops[0]
    assert mult == 2.0
    assert loop_normal(pts) @ np.array([0.0, 0.0, 1.0]) < 0


def test_extract_two_loops_and_half_multiplicity():
    far = SQUARE + np.array([5.0, 0.0, 0.0])
    chain = polygon_loop(SQUARE, weight=1.0) + polygon_loop(far, weight=0.5)
    loops = extract_loops(chain)
    assert sorted(m for _, m in loops) == [0.5, 1.0]


def test_extract_rejects_open_chain():
    verts = np.array([[[0.0, 0, 0], [1.0, 0, 0]],
                      [[1.0, 0, 0], [1.0, 1.0, 0]]])
    open_chain = SimplicialCurrent(1, 3, verts, np.array([1.0, 1.0]))
    with pytest.raises(ValueError, match="close into loops"):
        extract_loops(open_chain)


def test_catalog_counts_and_order():
    st = square_state()
    cat = MoveCatalog(glide_normals={(1.0, 0.0, 0.0): (0, 0, 1)},
                      translate_steps=(0.25,), node_steps=(0.25,),
                      bow_steps=(0.2,), scale_factors=(0.9, 1.1), cap=1e9)
    moves = cat.generate(st)
    # 1 neutral + 4 translations + 16 node moves + 8 bow-outs + 2 scalings
    assert len(moves) == 31
    assert moves[0].move_id == "neutral"
    kinds = [m.kind for m in moves]
    assert kinds == (["neutral"] + ["translate"] * 4 + ["node"] * 16
                     + ["bow"] * 8 + ["scale"] * 2)
    # regenerating gives the identical id sequence
    ids = [m.move_id for m in moves]
    assert ids == [m.move_id for m in cat.generate(st)]


def test_candidates_start_at_current_lines():
    st = square_state()
    T = st.line((1.0, 0.0, 0.0))
    cat = MoveCatalog(glide_normals={(1.0, 0.0, 0.0): (0, 0, 1)},
                      translate_steps=(0.3,), node_steps=(0.3,),
                      bow_steps=(0.2,), scale_factors=(1.1,), cap=1e9)
    for mv in cat.generate(st):
        S = mv.family.get((1.0, 0.0, 0.0))
        if S is None:
            continue
        trace = S.boundary_trace(0.0)
        assert refined_difference_mass(trace, -T) <= 1e-9


def test_cap_discards_large_candidates():
    st = square_state()
    # neutral slice mass is 2 * perimeter = 16; scaling up by 1.5 tops out
    # at 2 * 12 = 24, above a cap of 20
    cat = MoveCatalog(glide_normals={(1.0, 0.0, 0.0): (0, 0, 1)},
                      translate_steps=(), scale_factors=(1.5,), cap=20.0)
    moves = cat.generate(st)
    assert [m.kind for m in moves] == ["neutral"]
    cat2 = MoveCatalog(glide_normals={(1.0, 0.0, 0.0): (0, 0, 1)},
                       translate_steps=(), scale_factors=(1.5,), cap=30.0)
    assert [m.kind for m in cat2.generate(st)] == ["neutral", "scale"]


def test_translation_moves_all_loops_of_bundle():
    st = DislocationState()
    far = SQUARE + np.array([5.0, 0.0, 0.0])
    st.add_line((1.0, 0.0, 0.0),
                polygon_loop(SQUARE, weight=1.0) + polygon_loop(far, weight=1.0))
    cat = MoveCatalog(glide_normals={(1.0, 0.0, 0.0): (0, 0, 1)},
                      translate_steps=(0.5,), cap=1e9)
    moves = [m for m in cat.generate(st) if m.kind == "translate"]
    assert moves
    S = moves[0].family.get((1.0, 0.0, 0.0))
    # translating two side-2 squares by 0.5 sweeps two bands per loop,
    # each 2 long and 0.5 wide
    assert S.variation() == pytest.approx(4.0, abs=1e-12)
    out = moves[0].family.final_state(st)
    assert out.line((1.0, 0.0, 0.0)).mass() == pytest.approx(16.0, abs=1e-9)


def test_bundle_without_normal_uses_axes():
    st = square_state()
    cat = MoveCatalog(translate_steps=(0.1,), cap=1e9)
    moves = cat.generate(st)
    assert [m.kind for m in moves] == ["neutral"] + ["translate"] * 6
