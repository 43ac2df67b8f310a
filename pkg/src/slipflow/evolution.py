"""Quasi-static evolution by time-incremental energy minimization.

One step minimizes, over a finite catalog of slip moves, the updated total
energy plus the slip cost of getting there.  Greedy coordinate descent over
the catalog; the do-nothing move is always present, so a step never ends
worse than holding the previous state at the new load.  The plastic
distortion, its mollified cell field, the dislocation lines and the
spacetime slip record are advanced together so the curl consistency residual
stays at the chain level (no grid error enters it).

Bookkeeping conventions: dissipation and the plastic distortion sum over
canonical Burgers representatives only (the sign-mirror partner of a bundle
duplicates the same matrix contribution, which the one-half in the slip cost
cancels); reported line masses, slice masses and slip variation count both
mirrors.
"""

from __future__ import annotations

import warnings

import numpy as np

from .chains import SimplicialCurrent
from .dislocations import (DislocationState, PlasticDistortion,
                           consistency_residual, initial_fill_sheet,
                           sweep_sheet)
from .energetics import MIRROR_FACTOR, SlipFamily, dissipation
from .spacetime import SpaceTimeCurrent, concatenate, deformation_distance

__all__ = ["EnergyModel", "IncrementalState", "EvolutionTrace",
           "EvolutionError", "initial_state", "incremental_step",
           "stability_certificate", "run_evolution", "round_multiplicities",
           "epsilon_study", "IMPROVE_TOL", "STEP_SLACK"]

IMPROVE_TOL = 1e-10   # acceptance threshold for a strictly improving move
STEP_SLACK = 1e-9     # per-step tolerance on the one-sided energy estimate

ZERO_SWEEP = 1e-13    # spatial sweeps below this mass do not become sheets


class EnergyModel:
    """Grid, elasticity, core energy, slip cost and external load in one bundle.

    potentials is one DissipationPotential or a dict keyed by canonical
    Burgers tuple; g is a lumped nodal load paired as sum(g * u) and scaled
    by the ramp r(t).
    """

    def __init__(self, solver, core, potentials, g=None, ramp=None,
                 delta=None, hold_value=(0.0, 0.0, 0.0), p_background=None):
        self.solver = solver
        self.grid = solver.grid
        self.core = core
        self.potentials = potentials
        self.g = None if g is None else np.asarray(g, dtype=float).reshape(-1, 3)
        self.ramp = ramp if ramp is not None else (lambda t: 0.0)
        self.delta = (2.0 * float(np.max(self.grid.h)) if delta is None
                      else float(delta))
        self.hold_value = tuple(float(v) for v in hold_value)
        self.p_background = (None if p_background is None
                             else np.asarray(p_background, dtype=float))

    def mollify(self, sheets):
        return self.grid.mollify_sheets(PlasticDistortion(list(sheets)),
                                        self.delta)

    def equilibrium(self, p_cells, t, w0=None):
        return self.solver.minimize_u(p_cells, g=self.g, r=float(self.ramp(t)),
                                      hold_value=self.hold_value, w0=w0)

    def load_pairing(self, u) -> float:
        if self.g is None:
            return 0.0
        return float(np.sum(self.g * np.asarray(u, dtype=float).reshape(-1, 3)))

    def energy(self, t, u, p_cells, lines) -> dict:
        """Elastic energy minus load pairing plus core term, itemized."""
        W_e = self.solver.elastic_energy(u, p_cells)
        load = float(self.ramp(t)) * self.load_pairing(u)
        W_c = self.core.total(lines)
        return {"W_e": W_e, "load_term": load, "W_c": W_c,
                "E": W_e - load + W_c}


class IncrementalState:
    """Snapshot after one accepted step of the incremental scheme."""

    __slots__ = ("k", "t", "u", "distortion", "p_cells", "clipped", "lines",
                 "diss_cum", "family", "components", "var_S_cum", "var_p_cum",
                 "sup_slice")

    def __init__(self, k, t, u, distortion, p_cells, clipped, lines, diss_cum,
                 family, components, var_S_cum, var_p_cum, sup_slice):
        self.k = int(k)
        self.t = float(t)
        self.u = u
        self.distortion = distortion
        self.p_cells = p_cells
        self.clipped = bool(clipped)
        self.lines = lines
        self.diss_cum = float(diss_cum)
        self.family = family          # per-step slip record on [0, 1]
        self.components = components  # energy terms at (t, u, p, lines)
        self.var_S_cum = float(var_S_cum)
        self.var_p_cum = float(var_p_cum)
        self.sup_slice = float(sup_slice)

    def consistency(self) -> float:
        return consistency_residual(self.distortion, self.lines)


class EvolutionError(RuntimeError):
    """Step failure; carries the trace built so far as .trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


def initial_state(model: EnergyModel, lines: DislocationState,
                  t0: float = 0.0) -> IncrementalState:
    """Consistent start: cone fillings of every line, equilibrium at t0."""
    P = PlasticDistortion()
    for key, T in lines.systems():
        P.add(initial_fill_sheet(T, key))
    p_cells, clipped = model.mollify(P.sheets)
    if model.p_background is not None:
        p_cells = p_cells + model.p_background
    u = model.equilibrium(p_cells, t0)
    comps = model.energy(t0, u, p_cells, lines)
    fam = SlipFamily.neutral(lines, (0.0, 1.0))
    return IncrementalState(0, t0, u, P, p_cells, clipped, lines.copy(), 0.0,
                            fam, comps, 0.0, 0.0, fam.sup_slice_mass())


def _evaluate(model, t, lines, cells, family, w0=None):
    """Candidate bookkeeping: state, fields and score after one slip family."""
    new_lines = family.final_state(lines)
    sheets = []
    for key, S in family.items():
        sheet = sweep_sheet(S, key)
        if sheet.surface.mass() > ZERO_SWEEP:
            sheets.append(sheet)
    clipped = False
    if sheets:
        dep, clipped = model.mollify(sheets)
        cells = cells + dep
    u = model.equilibrium(cells, t, w0=w0)
    comps = model.energy(t, u, cells, new_lines)
    d = dissipation(model.potentials, family)
    return {"lines": new_lines, "sheets": sheets, "cells": cells,
            "clipped": clipped, "u": u, "components": comps, "diss": d,
            "score": comps["E"] + d}


def _concat_families(f1: SlipFamily, f2: SlipFamily) -> SlipFamily:
    """f2 after f1, recompressed onto [0, 1] bundle by bundle."""
    d1, d2 = dict(f1.items()), dict(f2.items())
    if set(d1) != set(d2):
        raise ValueError("families cover different Burgers bundles")
    out = SlipFamily((0.0, 1.0))
    for key in sorted(d1):
        out.set(key, concatenate(d1[key], d2[key]))
    return out


def incremental_step(model: EnergyModel, catalog, prev: IncrementalState,
                     t_k: float, improve_tol: float = IMPROVE_TOL,
                     step_slack: float = STEP_SLACK, max_rounds: int = 12,
                     search_depth: int = 2):
    """One incremental minimization step; returns (state, info).

    Greedy descent over single moves; when no single move improves, move
    pairs are searched too (search_depth >= 2), so the returned state is
    stable against everything the certificate later re-checks.  info carries
    the accepted move ids, the step dissipation and the energy of holding
    the previous state at the new load (the one-sided bound).
    """
    hold_E = model.energy(t_k, prev.u, prev.p_cells, prev.lines)["E"]
    lines = prev.lines
    cells = prev.p_cells
    current = None
    accepted = []   # (move_id, family, diss, evaluation)
    w0 = np.asarray(prev.u, dtype=float).ravel()

    for _ in range(max_rounds):
        moves = catalog.generate(lines, window=(0.0, 1.0))
        singles = []
        for idx, mv in enumerate(moves):
            if current is not None and mv.kind == "neutral":
                continue
            ev = _evaluate(model, t_k, lines, cells, mv.family, w0=w0)
            singles.append((ev["score"], ev["diss"], idx, mv, ev))
        if current is None:
            neutral = [c for c in singles if c[3].kind == "neutral"]
            if not neutral:
                raise EvolutionError("catalog did not produce the neutral move")
            current = neutral[0][4]
            singles = [c for c in singles if c[3].kind != "neutral"]
        incumbent = current["components"]["E"]
        best = (min(singles, key=lambda c: (c[0], c[1], c[2]))
                if singles else None)
        if best is not None and best[0] < incumbent - improve_tol:
            accepted.append((best[3].move_id, best[3].family, best[1],
                             best[4]))
            current = best[4]
            lines = current["lines"]
            cells = current["cells"]
            w0 = np.asarray(current["u"], dtype=float).ravel()
            continue
        if search_depth < 2 or not singles:
            break
        # no single move improves; search chained pairs before settling
        pair = None
        for s1, d1, i1, mv1, ev1 in singles:
            w1 = np.asarray(ev1["u"], dtype=float).ravel()
            for j2, mv2 in enumerate(
                    catalog.generate(ev1["lines"], window=(0.0, 1.0))):
                if mv2.kind == "neutral":
                    continue
                ev2 = _evaluate(model, t_k, ev1["lines"], ev1["cells"],
                                mv2.family, w0=w1)
                score = ev2["components"]["E"] + d1 + ev2["diss"]
                rank = (score, d1 + ev2["diss"], (i1, j2))
                if pair is None or rank < pair[0]:
                    pair = (rank, mv1, ev1, d1, mv2, ev2)
        if pair is None or pair[0][0] >= incumbent - improve_tol:
            break
        _, mv1, ev1, d1, mv2, ev2 = pair
        accepted.append((mv1.move_id, mv1.family, d1, ev1))
        accepted.append((mv2.move_id, mv2.family, ev2["diss"], ev2))
        current = ev2
        lines = current["lines"]
        cells = current["cells"]
        w0 = np.asarray(current["u"], dtype=float).ravel()

    diss_step = sum(a[2] for a in accepted)
    e_k = current["components"]["E"]
    if e_k + diss_step > hold_E + step_slack:
        raise EvolutionError(
            "incremental step %g violated the one-sided estimate: "
            "%.12g + %.12g > %.12g + %g"
            % (t_k, e_k, diss_step, hold_E, step_slack))

    if not accepted:
        family = SlipFamily.neutral(prev.lines, (0.0, 1.0))
    else:
        family = accepted[0][1]
        for _, fam, _, _ in accepted[1:]:
            family = _concat_families(family, fam)

    new_sheets = [s for _, _, _, ev in accepted for s in ev["sheets"]]
    distortion = (prev.distortion if not new_sheets
                  else PlasticDistortion(prev.distortion.sheets + new_sheets))
    var_step = family.variation() if accepted else 0.0
    var_p_step = sum(s.matrix_mass() for s in new_sheets)
    clipped = prev.clipped or any(ev["clipped"] for *_, ev in accepted)

    state = IncrementalState(
        prev.k + 1, t_k, current["u"], distortion, current["cells"], clipped,
        current["lines"], prev.diss_cum + diss_step, family,
        current["components"],
        prev.var_S_cum + MIRROR_FACTOR * var_step,
        prev.var_p_cum + var_p_step,
        max(prev.sup_slice, family.sup_slice_mass()))
    info = {"accepted": [a[0] for a in accepted], "diss_step": diss_step,
            "hold_energy": hold_E, "rounds": len(accepted)}
    return state, info


def stability_certificate(model: EnergyModel, catalog, st: IncrementalState,
                          depth: int = 2,
                          improve_tol: float = IMPROVE_TOL) -> dict:
    """Best energy improvement any catalog move (or move pair) still offers.

    A state passes when no candidate lowers energy plus slip cost by more
    than improve_tol.  Depth 2 chains two moves, pricing both slips.
    """
    E_ref = st.components["E"]
    worst = -np.inf
    n = 0
    first = []
    for mv in catalog.generate(st.lines, window=(0.0, 1.0)):
        ev = _evaluate(model, st.t, st.lines, st.p_cells, mv.family,
                       w0=np.asarray(st.u, dtype=float).ravel())
        n += 1
        worst = max(worst, E_ref - ev["score"])
        if depth >= 2 and mv.kind != "neutral":
            first.append(ev)
    if depth >= 2:
        for ev in first:
            w1 = np.asarray(ev["u"], dtype=float).ravel()
            for mv2 in catalog.generate(ev["lines"], window=(0.0, 1.0)):
                if mv2.kind == "neutral":
                    continue
                ev2 = _evaluate(model, st.t, ev["lines"], ev["cells"],
                                mv2.family, w0=w1)
                n += 1
                worst = max(worst,
                            E_ref - (ev2["components"]["E"]
                                     + ev["diss"] + ev2["diss"]))
    worst = float(worst) if n else 0.0
    return {"step": st.k, "t": st.t, "worst_improvement": worst,
            "n_candidates": n, "ok": bool(worst <= improve_tol)}


class EvolutionTrace:
    """Per-step records, states, stability certificates and run report."""

    COLUMNS = ("step", "t", "E", "W_e", "W_c", "load_term", "Diss_step",
               "Diss_cum", "M(T)", "Var_cum", "consistency_residual",
               "accepted_move_id")

    def __init__(self, states, rows, stability, report):
        self.states = states
        self.rows = rows
        self.stability = stability
        self.report = report

    @property
    def final(self) -> IncrementalState:
        return self.states[-1]

    def csv_text(self) -> str:
        lines = [",".join(self.COLUMNS)]
        for row in self.rows:
            out = []
            for col in self.COLUMNS:
                v = row[col]
                if isinstance(v, (int, np.integer)):
                    out.append(str(int(v)))
                elif isinstance(v, float):
                    out.append(repr(v))
                else:
                    out.append(str(v))
            lines.append(",".join(out))
        return "\n".join(lines) + "\n"

    def assembled_family(self) -> SlipFamily:
        """All per-step slips glued on [t_0, t_N], knots at the step times."""
        knots = [st.t for st in self.states]
        window = (knots[0], knots[-1])
        out = SlipFamily(window)
        keys = sorted(key for key, _ in self.states[1].family.items())
        for key in keys:
            chains = []
            for k, st in enumerate(self.states[1:], start=1):
                S = st.family.get(key)
                if S is None:
                    raise ValueError("bundle disappeared mid-run")
                chains.append(S.map_time(list(S.window),
                                         [knots[k - 1], knots[k]]).chain)
            total = chains[0]
            for c in chains[1:]:
                total = total + c
            out.set(key, SpaceTimeCurrent(total, window))
        return out

    def interpolants(self):
        """(energy(t) piecewise affine, state(t) right-continuous)."""
        knots = np.array([st.t for st in self.states])
        energies = np.array([st.components["E"] for st in self.states])

        def energy_at(t):
            return float(np.interp(t, knots, energies))

        def state_at(t):
            idx = int(np.searchsorted(knots, t, side="right") - 1)
            return self.states[max(0, min(idx, len(self.states) - 1))]

        return energy_at, state_at

    def aposteriori_bounds(self) -> dict:
        """The four trajectory bounds, all finite whenever the run finished."""
        return {
            "sup_p_mass": max(st.distortion.matrix_mass() for st in self.states),
            "sup_slice_mass": max(st.sup_slice for st in self.states),
            "var_p": self.final.var_p_cum,
            "var_S": self.final.var_S_cum,
            "diss": self.final.diss_cum,
        }


def run_evolution(model: EnergyModel, catalog, lines0: DislocationState,
                  n_steps: int, t_end: float = 1.0, *,
                  improve_tol: float = IMPROVE_TOL,
                  step_slack: float = STEP_SLACK,
                  stability_depth: int = 2, stability_every: int = 1,
                  max_rounds: int = 12, search_depth: int = 2) -> EvolutionTrace:
    """Uniform-grid incremental run with per-step estimates enforced.

    stability_every = m checks the stability certificate on every m-th step
    (and the last); 0 disables the certificates.
    """
    if n_steps < 1:
        raise ValueError("need at least one time step")
    state = initial_state(model, lines0, 0.0)
    states = [state]
    rows = []
    stability = []
    e0 = state.components["E"]
    load_telescope = 0.0
    max_defect = -np.inf
    hold_energies = []
    init_cert = (stability_certificate(model, catalog, state, depth=1,
                                       improve_tol=improve_tol)
                 if stability_every else None)
    dt = float(t_end) / int(n_steps)
    try:
        for k in range(1, int(n_steps) + 1):
            t_k = k * dt
            new, info = incremental_step(model, catalog, state, t_k,
                                         improve_tol=improve_tol,
                                         step_slack=step_slack,
                                         max_rounds=max_rounds,
                                         search_depth=search_depth)
            hold_energies.append(info["hold_energy"])
            load_telescope += ((float(model.ramp(t_k))
                                - float(model.ramp(state.t)))
                               * model.load_pairing(state.u))
            defect = (new.components["E"] + new.diss_cum
                      - (e0 - load_telescope))
            max_defect = max(max_defect, defect)
            if defect > n_steps * step_slack:
                raise EvolutionError(
                    "telescoped energy estimate failed at step %d: defect %.3e"
                    % (k, defect))
            res = new.consistency()
            rows.append({
                "step": k, "t": t_k, "E": new.components["E"],
                "W_e": new.components["W_e"], "W_c": new.components["W_c"],
                "load_term": new.components["load_term"],
                "Diss_step": info["diss_step"], "Diss_cum": new.diss_cum,
                "M(T)": MIRROR_FACTOR * new.lines.total_line_mass(),
                "Var_cum": new.var_S_cum,
                "consistency_residual": res,
                "accepted_move_id": "+".join(info["accepted"]) or "neutral",
            })
            states.append(new)
            state = new
            if stability_every and (k % stability_every == 0 or k == n_steps):
                stability.append(stability_certificate(
                    model, catalog, state, depth=stability_depth,
                    improve_tol=improve_tol))
    except EvolutionError as exc:
        if exc.trace is None:
            exc.trace = EvolutionTrace(states, rows, stability,
                                       {"aborted_at_step": len(rows) + 1})
        raise
    except Exception as exc:
        partial = EvolutionTrace(states, rows, stability,
                                 {"aborted_at_step": len(rows) + 1})
        raise EvolutionError("run aborted: %s" % exc, partial) from exc

    alphas = [1.0 + st.components["E"] + st.diss_cum for st in states]
    ratios = []
    for k in range(1, len(alphas)):
        if alphas[k - 1] > 0.0:
            ratios.append((alphas[k] - alphas[k - 1]) / (dt * alphas[k - 1]))
        else:
            ratios.append(np.inf)
    report = {
        "gronwall_constant": float(max(ratios)) if ratios else 0.0,
        "gronwall_ratios": ratios,
        "lower_estimate_defect": float(max_defect),
        "hold_energies": hold_energies,
        "initial_stability": init_cert,
        "stability_ok": all(c["ok"] for c in stability),
        "clipped": states[-1].clipped,
        "n_steps": int(n_steps),
        "t_end": float(t_end),
    }
    return EvolutionTrace(states, rows, stability, report)


def round_multiplicities(lines: DislocationState, eps: float):
    """Line multiplicities rounded to the eps lattice (half goes to even).

    Returns (state, annihilated); annihilated is True when rounding dropped
    at least one segment to zero multiplicity.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    out = DislocationState()
    dropped = 0
    for key, T in lines.systems():
        w = np.round(np.asarray(T.weights, dtype=float) / eps) * eps
        keep = w != 0.0
        dropped += int(np.count_nonzero(~keep))
        if not np.any(keep):
            continue
        chain = SimplicialCurrent(1, 3, T.vertices[keep], w[keep],
                                  quantum=eps)
        out.add_line(key, chain)
    return out, dropped > 0


def _line_or_empty(lines: DislocationState, key) -> SimplicialCurrent:
    try:
        return lines.line(key)
    except KeyError:
        return SimplicialCurrent(1, 3)


def epsilon_study(model: EnergyModel, catalog, lines0: DislocationState,
                  n_steps: int, t_end: float, epsilons, **run_kwargs) -> dict:
    """Runs per multiplicity quantum and cross-run uniformity report.

    The four trajectory bounds are collected per eps with their relative
    spread; flat-type distances between matched-time line configurations are
    measured against the finest-eps run.
    """
    eps_sorted = sorted(float(e) for e in epsilons)
    runs = {}
    annihilated = {}
    for eps in reversed(eps_sorted):
        st, dropped = round_multiplicities(lines0, eps)
        annihilated[eps] = dropped
        if dropped:
            warnings.warn("multiplicity rounding at eps=%g annihilated "
                          "dislocation segments" % eps)
        runs[eps] = run_evolution(model, catalog, st, n_steps, t_end,
                                  **run_kwargs)
    bounds = {eps: runs[eps].aposteriori_bounds() for eps in eps_sorted}
    names = ("sup_p_mass", "sup_slice_mass", "var_p", "var_S")
    spreads = {}
    for name in names:
        vals = [bounds[eps][name] for eps in eps_sorted]
        top = max(vals)
        spreads[name] = (top - min(vals)) / top if top > 0.0 else 0.0
    ref = runs[eps_sorted[0]]
    distances = {}
    for eps in eps_sorted:
        worst = 0.0
        for k, st in enumerate(runs[eps].states):
            ref_st = ref.states[k]
            keys = set(tuple(k0) for k0, _ in st.lines.systems())
            keys |= set(tuple(k0) for k0, _ in ref_st.lines.systems())
            for key in sorted(keys):
                Ta = _line_or_empty(st.lines, key)
                Tb = _line_or_empty(ref_st.lines, key)
                if Ta.n_simplices == 0 and Tb.n_simplices == 0:
                    continue
                dist, _ = deformation_distance(Ta, Tb)
                worst = max(worst, dist)
        distances[eps] = worst
    return {
        "epsilons": eps_sorted,
        "bounds": bounds,
        "spreads": spreads,
        "uniform_constant": max(bounds[eps][name] for eps in eps_sorted
                                for name in names),
        "flat_distances": distances,
        "annihilated": annihilated,
        "runs": runs,
    }
