"""End-to-end acceptance gate: one printed line per criterion.

Each test prints `ACCEPT <nn> <title>: PASS/FAIL (details)` before asserting,
so a full run (`pytest tests/test_acceptance.py -s`) reads as a checklist.
The heavy criteria (09, 11, 13) dominate the runtime; the whole file is
sized to finish on a laptop-class machine.
"""

import time

import numpy as np
import pytest
from scipy.spatial import Delaunay

from slipflow.chains import LineTension, SimplicialCurrent, polygon_loop
from slipflow.complexes import SimplicialComplex
from slipflow.dislocations import (DislocationState, PlasticDistortion,
                                   consistency_residual, forward,
                                   initial_fill_sheet, sweep_sheet)
from slipflow.elastic import (ElasticSolver, IsotropicElasticity,
                              manufactured_fields)
from slipflow.energetics import DissipationPotential, SlipFamily, dissipation
from slipflow.evolution import epsilon_study, run_evolution
from slipflow.exterior import MultiVector, hodge_star, interior, pairing, wedge
from slipflow.grid import DomainGrid, curl_cells, surface_shear_load
from slipflow.scenario import (half_multiplicity_config, materialize,
                               parse_scenario, reference_shear_config)
from slipflow.spacetime import concatenate, ruled_sweep, slice_1current

import oracles


def report(num, title, ok, detail):
    print("ACCEPT %02d %-46s %s (%s)"
          % (num, title + ":", "PASS" if ok else "FAIL", detail), flush=True)
    assert ok, "criterion %02d failed: %s" % (num, detail)


def sloped_band(rng, n=6, closed=True):
    gap = 2.0 * np.pi / n
    ang = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False) \
        + rng.uniform(-0.25, 0.25, size=n) * gap
    r0 = rng.uniform(0.5, 1.0)
    p0 = np.stack([r0 * np.cos(ang), r0 * np.sin(ang), np.zeros(n)], axis=1)
    p1 = p0 * rng.uniform(1.1, 1.6) + rng.normal(scale=0.2, size=3)
    return ruled_sweep([p0], [p1], [float(rng.integers(1, 3))],
                       (0.0, 1.0), closed=closed)


def random_monotone_knots(rng, n_inner=3):
    inner = np.sort(rng.uniform(0.1, 0.9, size=n_inner))
    return np.concatenate([[0.0], inner, [1.0]])


def test_01_boundary_of_boundary_vanishes():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for grade in (2, 3):
        for _ in range(500):
            n = int(rng.integers(2, 6))
            verts = rng.uniform(-1.0, 2.0, size=(n, grade + 1, 3))
            weights = rng.integers(-3, 4, size=n).astype(float)
            T = SimplicialCurrent(grade, 3, verts, weights, quantum=1.0,
                                  validate=False)
            worst = max(worst, T.boundary().boundary().canonicalized().mass())
    elapsed = time.perf_counter() - t0
    ok = worst == 0.0 and elapsed < 10.0
    report(1, "boundary-of-boundary vanishes",
           ok, "worst=%g over 1000 chains, %.1fs < 10s" % (worst, elapsed))


def test_02_exterior_algebra_identities():
    rng = np.random.default_rng(102)
    worst = 0.0
    from math import comb
    for _ in range(1000):
        a = rng.normal(size=3)
        b = rng.normal(size=3)
        cross = hodge_star(wedge(MultiVector.from_vector(a),
                                 MultiVector.from_vector(b)))
        worst = max(worst, float(np.max(np.abs(cross.as_vector()
                                               - np.cross(a, b)))))
        k = int(rng.integers(0, 4))
        eta = MultiVector(3, k, rng.normal(size=comb(3, k)))
        twice = hodge_star(hodge_star(eta))
        worst = max(worst, float(np.max(np.abs(twice.coeffs - eta.coeffs))))
        k = int(rng.integers(1, 4))
        zeta = MultiVector(3, k, rng.normal(size=comb(3, k)))
        alpha = MultiVector.from_vector(rng.normal(size=3))
        beta = MultiVector(3, k - 1, rng.normal(size=comb(3, k - 1)))
        lhs = pairing(interior(zeta, alpha), beta)
        rhs = pairing(zeta, wedge(alpha, beta))
        worst = max(worst, abs(lhs - rhs))
    report(2, "exterior algebra identities",
           worst <= 1e-13, "max err=%.2e <= 1e-13, 1000 triples" % worst)


def test_03_pythagoras_identity():
    rng = np.random.default_rng(103)
    worst = max(sloped_band(rng).pythagoras_error() for _ in range(300))
    report(3, "slope pythagoras identity per simplex",
           worst <= 1e-12, "max err=%.2e <= 1e-12, 300 surfaces" % worst)


def test_04_coarea_mass_decomposition():
    rng = np.random.default_rng(104)
    worst = 0.0
    for _ in range(200):
        left, right = sloped_band(rng).coarea_mass_gap()
        worst = max(worst, abs(left - right) / max(right, 1e-30))
    report(4, "coarea slice-mass decomposition",
           worst <= 1e-8, "max rel err=%.2e <= 1e-8, 200 surfaces" % worst)


def test_05_slice_boundary_anticommute():
    rng = np.random.default_rng(105)
    worst = 0.0
    for _ in range(5):
        p0 = rng.uniform(-1.0, 1.0, size=(4, 3))
        p1 = p0 + rng.uniform(-0.5, 0.5, size=(4, 3))
        S = ruled_sweep([p0], [p1], [1.0], closed=False)
        bnd = S.boundary()
        for t in np.linspace(0.07, 0.93, 20):
            sl, generic = S.slice_at(t)
            if not generic:
                continue
            total = (sl.boundary() + slice_1current(bnd, t)).canonicalized()
            worst = max(worst, total.mass())
    report(5, "slice of boundary anticommutes",
           worst == 0.0, "worst=%g exact, 20 times x 5 surfaces" % worst)


def test_06_concatenation_and_rescaling():
    rng = np.random.default_rng(106)
    worst_var = 0.0
    b = (1.0, 0.0, 0.0)
    pots = {b: DissipationPotential(rho=0.3, kappa=2.0,
                                    glide_normal=(0, 0, 1))}
    worst_diss = 0.0
    for _ in range(10):
        sq = np.array([[1.0, -1.0, 0.0], [1.0, 1.0, 0.0],
                       [-1.0, 1.0, 0.0], [-1.0, -1.0, 0.0]])
        f = rng.uniform(1.2, 1.7)
        S1 = ruled_sweep([0.5 * sq], [0.5 * f * sq], [1.0], (0.0, 1.0))
        S2 = ruled_sweep([0.5 * f * sq], [0.5 * f * sq + rng.normal(
            scale=0.3, size=3)], [1.0], (0.0, 1.0))
        C = concatenate(S1, S2)
        worst_var = max(worst_var, abs(C.variation() - S1.variation()
                                       - S2.variation()))
        fam = SlipFamily((0.0, 1.0))
        fam.set(b, C)
        base = dissipation(pots, fam)
        for _ in range(5):
            warped = SlipFamily((0.0, 1.0))
            warped.set(b, C.map_time(random_monotone_knots(rng),
                                     random_monotone_knots(rng)))
            worst_diss = max(worst_diss, abs(dissipation(pots, warped)
                                             - base))
    ok = worst_var <= 1e-12 and worst_diss <= 1e-12
    report(6, "Var additivity and Diss reparametrization",
           ok, "var err=%.2e, diss err=%.2e <= 1e-12"
           % (worst_var, worst_diss))


def planar_patch(rng, max_tris=12):
    while True:
        pts2 = rng.uniform(0.0, 1.0, size=(int(rng.integers(5, 9)), 2))
        try:
            tri = Delaunay(pts2)
        except Exception:
            continue
        if 2 <= len(tri.simplices) <= max_tris:
            break
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    pts3 = np.hstack([pts2, np.zeros((len(pts2), 1))]) @ q.T \
        + rng.normal(size=3)
    return SimplicialComplex.from_top_simplices(pts3, tri.simplices)


def test_07_flat_norm_against_enumeration():
    rng = np.random.default_rng(107)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        K = planar_patch(rng)
        B = K.boundary_matrix(2)
        z = rng.integers(-1, 2, size=K.count(2)).astype(float)
        noise = rng.integers(-1, 2, size=K.count(1)).astype(float)
        noise[rng.random(K.count(1)) > 0.3] = 0.0
        t = np.clip(B @ z + noise, -1, 1)
        got = K.flat_norm(t, grade=1)
        want = oracles.flat_norm_enumerated(B, t, K.volumes(2), K.volumes(1))
        worst = max(worst, abs(got - want))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 60.0
    report(7, "flat-norm LP equals enumeration oracle",
           ok, "max |LP-oracle|=%.2e, 50 complexes, %.1fs < 60s"
           % (worst, elapsed))


def test_08_plastic_flow_ground_truth():
    b = (0.7, 0.0, 0.0)
    sq = np.array([[1.0, -1.0, 0.0], [1.0, 1.0, 0.0],
                   [-1.0, 1.0, 0.0], [-1.0, -1.0, 0.0]])
    a0, a1 = 0.6, 1.0
    S = ruled_sweep([a0 * sq], [a1 * sq], [1.0], (0.0, 1.0))
    annulus = (2 * a1) ** 2 - (2 * a0) ** 2
    got = sweep_sheet(S, b).matrix_mass()
    want = 0.7 * annulus
    mass_err = abs(got - want)

    T0 = polygon_loop(a0 * sq)
    state = DislocationState()
    state.add_line(b, T0)
    P = PlasticDistortion()
    P.add(initial_fill_sheet(T0, b))
    r0 = consistency_residual(P, state)
    worst_res = r0
    for t in np.linspace(0.1, 1.0, 10):
        part = S.restrict_time(0.0, t)
        Pt = P.extended(sweep_sheet(part, b))
        st = state.copy()
        st.replace(b, forward(part, T0))
        worst_res = max(worst_res, consistency_residual(Pt, st))
    ok = mass_err <= 1e-12 * want and worst_res <= 1e-8
    report(8, "plastic flow mass |b|*area and consistency",
           ok, "mass err=%.2e, residual=%.2e <= 1e-8 at 10 times"
           % (mass_err, worst_res))


def test_09_beta_solver_contract():
    E = IsotropicElasticity(1.0, 1.0)
    box = ((0.0, 1.0),) * 3
    rng = np.random.default_rng(109)

    # curl-free input: rows of p are gradients of random quadratics, which
    # the one-sided/central difference stencils differentiate exactly
    grid = DomainGrid((16,) * 3, box)
    solver = ElasticSolver(grid, E)
    A = rng.normal(size=(3, 3, 3))
    c = grid.cell_centers().reshape(grid.n + (3,))
    p = np.einsum("ijk,...k->...ij", A + np.swapaxes(A, 1, 2), c)
    curl = curl_cells(grid, p)
    beta0, _ = solver.solve_beta(curl)
    zero_norm = float(np.max(np.abs(beta0)))

    errs = []
    t64 = 0.0
    for n, tol in ((16, 1e-7), (32, 1e-7), (64, 1e-4)):
        g = DomainGrid((n,) * 3, box)
        es = ElasticSolver(g, E)
        _sig, beta_f, _ = manufactured_fields(box, E)
        beta_star = beta_f(g.cell_centers()).reshape(g.n + (3, 3))
        t0 = time.perf_counter()
        beta, _info = es.solve_beta(-es._curl_rows(beta_star), tol=tol,
                                    maxiter=4000)
        if n == 64:
            t64 = time.perf_counter() - t0
        errs.append(np.sqrt(g.cell_volume
                            * float(np.sum((beta - beta_star) ** 2))))
    orders = [float(np.log2(errs[i] / errs[i + 1])) for i in range(2)]

    grid8 = DomainGrid((8,) * 3, box)
    s8 = ElasticSolver(grid8, E)
    cc = grid8.cell_centers().reshape(grid8.n + (3,))
    psmooth = 0.1 * np.stack([[np.sin(1.3 * cc[..., 0] + 0.2 * i + 0.5 * j)
                               * np.cos(0.9 * cc[..., 1])
                               for j in range(3)] for i in range(3)],
                             axis=-1).reshape(grid8.n + (3, 3))
    u = s8.minimize_u(psmooth)
    free, beta_q = s8.free_displacement(u, psmooth)
    vol = grid8.cell_volume
    defect = abs(vol * float(np.sum(s8.elastic.apply(beta_q) * free)))
    norms = (np.sqrt(vol * float(np.sum(beta_q ** 2)))
             * np.sqrt(vol * float(np.sum(free ** 2))))
    ortho_ok = defect <= 1e-6 * max(norms, 1e-30)

    ok = (zero_norm <= 1e-10 and min(orders) >= 0.9 and ortho_ok
          and t64 < 120.0)
    report(9, "beta solver: kernel, convergence, orthogonality",
           ok, "|beta(curl=0)|=%.1e, orders=%.2f/%.2f >= 0.9, "
           "ortho=%.1e, 64^3 %.0fs < 120s"
           % (zero_norm, orders[0], orders[1],
              defect / max(norms, 1e-30), t64))


def test_10_minimizer_contract():
    rng = np.random.default_rng(110)
    grid = DomainGrid((8,) * 3, ((-1.0, 1.0),) * 3)
    solver = ElasticSolver(grid, IsotropicElasticity(1.0, 1.0))
    hold = (0.3, -0.2, 0.1)
    u = solver.minimize_u(np.zeros(grid.n + (3, 3)), hold_value=hold)
    hold_err = float(np.max(np.abs(u - np.asarray(hold))))

    g = surface_shear_load(grid, "z+", (1, 0, 0), 0.3)
    cc = grid.cell_centers().reshape(grid.n + (3,))
    p = 0.1 * np.stack([np.sin(cc + 0.3 * k) for k in range(3)],
                       axis=-1)[..., :3].reshape(grid.n + (3, 3))
    # direct factorization vs iterations from a random start
    iterative = ElasticSolver(grid, IsotropicElasticity(1.0, 1.0),
                              lu_threshold=0)
    u1 = solver.minimize_u(p, g=g, r=1.0)
    u2 = iterative.minimize_u(p, g=g, r=1.0,
                              w0=rng.normal(size=u1.size))
    start_err = float(np.max(np.abs(u1 - u2))) / max(
        float(np.max(np.abs(u1))), 1e-30)

    worst_el = 0.0
    for _ in range(20):
        k = rng.uniform(0.5, 1.5, size=3)
        ph = rng.uniform(0, 2 * np.pi, size=(3, 3))
        pf = 0.1 * np.stack(
            [[np.sin(k[0] * cc[..., 0] + ph[i, j])
              * np.cos(k[1] * cc[..., 1]) * np.sin(k[2] * cc[..., 2] + 0.3)
              for j in range(3)] for i in range(3)], axis=0)
        pf = np.moveaxis(pf, (0, 1), (-2, -1))
        uf = solver.minimize_u(pf, g=g, r=0.7)
        worst_el = max(worst_el,
                       solver.euler_lagrange_residual(uf, pf, g=g, r=0.7))
    ok = hold_err <= 1e-10 and start_err <= 1e-7 and worst_el <= 1e-7
    report(10, "minimizer: hold value, start independence, EL",
           ok, "hold=%.1e <= 1e-10, start=%.1e <= 1e-7, EL=%.1e <= 1e-7 x20"
           % (hold_err, start_err, worst_el))


@pytest.fixture(scope="module")
def reference_run(tmp_path_factory):
    config, lines = reference_shear_config(16)
    path = materialize(tmp_path_factory.mktemp("ref"), config, lines)
    scn = parse_scenario(path)
    model, catalog, state, run_kwargs = scn.build()
    t0 = time.perf_counter()
    trace = run_evolution(model, catalog, state, 8, 1.0, **run_kwargs)
    return trace, time.perf_counter() - t0


def test_11_incremental_scheme_reference_run(reference_run):
    trace, elapsed = reference_run
    rows, rep = trace.rows, trace.report
    worst_step = max(r["E"] + r["Diss_step"] - h
                     for r, h in zip(rows, rep["hold_energies"]))
    telescoped = rep["lower_estimate_defect"]
    gronwall = rep["gronwall_constant"]
    moved = sum(1 for r in rows if r["accepted_move_id"])
    ok = (len(rows) == 8 and worst_step <= 1e-9
          and telescoped <= 8e-9 and np.isfinite(gronwall)
          and moved > 0 and elapsed < 300.0)
    report(11, "reference shear run estimates",
           ok, "step=%.1e <= 1e-9, telescoped=%.1e, Gronwall C=%.3f, "
           "%d moves, %.0fs < 300s"
           % (worst_step, telescoped, gronwall, moved, elapsed))


def test_12_stability_certificate_every_step(reference_run):
    trace, _elapsed = reference_run
    certs = trace.stability
    worst = max(c["worst_improvement"] for c in certs)
    candidates = min(c["n_candidates"] for c in certs)
    ok = (len(certs) == len(trace.rows) and worst <= 1e-10
          and candidates > 0)
    report(12, "depth-2 stability certificate per step",
           ok, "steps=%d, worst improvement=%.2e <= 1e-10, >=%d candidates"
           % (len(certs), worst, candidates))


def test_13_epsilon_uniformity_study(tmp_path):
    config, lines = half_multiplicity_config(8)
    scn = parse_scenario(materialize(tmp_path, config, lines))
    model, catalog, state, run_kwargs = scn.build()
    t0 = time.perf_counter()
    with pytest.warns(UserWarning, match="annihilated"):
        study = epsilon_study(model, catalog, state, 8, 1.0,
                              [1.0, 0.5, 0.25, 0.125], **run_kwargs)
    elapsed = time.perf_counter() - t0
    spreads = study["spreads"]
    worst_spread = max(spreads.values())
    const = study["uniform_constant"]

    # flat distances to the finest run, largest quantum first; the paper-side
    # expectation (smaller quantum = closer traces) is reported, not gated
    eps_desc = sorted(study["flat_distances"], reverse=True)
    dists = [study["flat_distances"][e] for e in eps_desc]
    monotone = all(a >= b - 1e-12 for a, b in zip(dists, dists[1:]))
    print("ACCEPT 13 [report] flat distances by quantum %s: %s "
          "(monotone non-increasing: %s)"
          % (eps_desc, ["%.4g" % d for d in dists], monotone), flush=True)

    ok = worst_spread < 0.20 and np.isfinite(const) and const > 0.0
    report(13, "multiplicity-quantum uniformity",
           ok, "max spread=%.1f%% < 20%%, constant=%.3g, %.0fs"
           % (100.0 * worst_spread, const, elapsed))
