"""Scenario configs: parsing, validation, canonical form, model assembly.

A scenario is one JSON tree describing the domain, elasticity, dislocation
content, loading program, slip-cost potentials and solver controls.  Parsing
fills documented defaults, validates everything at once (reporting every
problem, not just the first) and produces a canonical serialization whose
parse/emit round trip is exact.  All quantities are nondimensional lattice
units.
"""

import json
import os

import numpy as np

from .chains import LineTension, polygon_loop
from .dislocations import DislocationState
from .grid import DomainGrid, surface_shear_load, load_field
from .elastic import IsotropicElasticity, ElasticSolver
from .energetics import CoreEnergy, DissipationPotential, MIRROR_FACTOR
from .catalog import MoveCatalog
from .evolution import EnergyModel

FACES = ("x-", "x+", "y-", "y+", "z-", "z+")
RAMPS = ("linear", "constant")


class ScenarioError(ValueError):
    """All validation problems of one config file, collected."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid scenario:\n"
                         + "\n".join("  - " + e for e in self.errors))


def _vec(x, n=3):
    v = [float(c) for c in x]
    if len(v) != n:
        raise ValueError
    return v


def _norm_domain(raw, err):
    out = {"n": [16, 16, 16],
           "box": [[-1.6, 1.6], [-1.6, 1.6], [-0.8, 0.8]],
           "mollify_width": None}
    src = raw if isinstance(raw, dict) else {}
    if not isinstance(raw, dict):
        err.append("domain: expected an object")
    if "n" in src:
        try:
            out["n"] = [int(v) for v in src["n"]]
            assert len(out["n"]) == 3
        except Exception:
            err.append("domain.n: expected three integers")
    if any(v < 2 for v in out["n"]):
        err.append("domain.n: every grid count must be >= 2")
    if "box" in src:
        try:
            out["box"] = [_vec(side, 2) for side in src["box"]]
            assert len(out["box"]) == 3
        except Exception:
            err.append("domain.box: expected three [lo, hi] pairs")
    for axis, (lo, hi) in zip("xyz", out["box"]):
        if not lo < hi:
            err.append("domain.box: %s has lo >= hi" % axis)
    h = [(hi - lo) / max(nv, 1) for (lo, hi), nv in zip(out["box"], out["n"])]
    if src.get("mollify_width") is not None:
        try:
            out["mollify_width"] = float(src["mollify_width"])
        except Exception:
            err.append("domain.mollify_width: expected a number")
    if out["mollify_width"] is not None:
        if out["mollify_width"] <= 0.0:
            err.append("domain.mollify_width: must be positive")
        elif out["mollify_width"] < 2.0 * max(h) - 1e-12:
            err.append("domain.mollify_width: must be >= twice the largest "
                       "cell spacing (%.6g)" % (2.0 * max(h)))
    for extra in set(src) - {"n", "box", "mollify_width"}:
        err.append("domain.%s: unknown key" % extra)
    return out


def _norm_elasticity(raw, err):
    out = {"lam": 1.0, "mu": 1.0, "hold_value": [0.0, 0.0, 0.0]}
    src = raw if isinstance(raw, dict) else {}
    if raw is not None and not isinstance(raw, dict):
        err.append("elasticity: expected an object")
    for key in ("lam", "mu"):
        if key in src:
            try:
                out[key] = float(src[key])
            except Exception:
                err.append("elasticity.%s: expected a number" % key)
    if out["mu"] <= 0.0:
        err.append("elasticity.mu: shear modulus must be positive")
    if out["lam"] < 0.0:
        err.append("elasticity.lam: negative first modulus not supported")
    if "hold_value" in src:
        try:
            out["hold_value"] = _vec(src["hold_value"])
        except Exception:
            err.append("elasticity.hold_value: expected a 3-vector")
    for extra in set(src) - {"lam", "mu", "hold_value"}:
        err.append("elasticity.%s: unknown key" % extra)
    return out


def _norm_loading(raw, err):
    out = {"kind": "none", "magnitude": 0.0, "ramp": "linear", "faces": []}
    if raw is None:
        return out
    if not isinstance(raw, dict):
        err.append("loading: expected an object")
        return out
    out["kind"] = raw.get("kind", "none")
    if out["kind"] not in ("none", "surface_shear"):
        err.append("loading.kind: expected 'none' or 'surface_shear'")
        out["kind"] = "none"
    if "magnitude" in raw:
        try:
            out["magnitude"] = float(raw["magnitude"])
        except Exception:
            err.append("loading.magnitude: expected a number")
    out["ramp"] = raw.get("ramp", "linear")
    if out["ramp"] not in RAMPS:
        err.append("loading.ramp: expected one of %s" % (RAMPS,))
        out["ramp"] = "linear"
    faces = raw.get("faces", [])
    if out["kind"] == "surface_shear" and not faces:
        err.append("loading.faces: surface_shear needs at least one face")
    clean = []
    for i, entry in enumerate(faces if isinstance(faces, list) else []):
        tag = "loading.faces[%d]" % i
        if not isinstance(entry, dict):
            err.append(tag + ": expected an object")
            continue
        face = entry.get("face")
        if face not in FACES:
            err.append(tag + ".face: expected one of %s" % (FACES,))
            continue
        try:
            direction = _vec(entry.get("direction"))
        except Exception:
            err.append(tag + ".direction: expected a 3-vector")
            continue
        if not any(direction):
            err.append(tag + ".direction: must be nonzero")
            continue
        axis = "xyz".index(face[0])
        if direction[axis] != 0.0:
            err.append(tag + ".direction: must be tangent to face " + face)
            continue
        clean.append({"face": face, "direction": direction})
    if not isinstance(faces, list):
        err.append("loading.faces: expected a list")
    out["faces"] = clean
    for extra in set(raw) - {"kind", "magnitude", "ramp", "faces"}:
        err.append("loading.%s: unknown key" % extra)
    return out


def _norm_potentials(raw, burgers, err):
    out = {"core_threshold": 100.0, "systems": []}
    src = raw if isinstance(raw, dict) else {}
    if not isinstance(raw, dict):
        err.append("potentials: expected an object")
    if "core_threshold" in src:
        try:
            out["core_threshold"] = float(src["core_threshold"])
        except Exception:
            err.append("potentials.core_threshold: expected a number")
    if out["core_threshold"] <= 0.0:
        err.append("potentials.core_threshold: must be positive")
    systems = src.get("systems", [])
    if not isinstance(systems, list):
        err.append("potentials.systems: expected a list")
        systems = []
    seen = set()
    clean = []
    for i, entry in enumerate(systems):
        tag = "potentials.systems[%d]" % i
        if not isinstance(entry, dict):
            err.append(tag + ": expected an object")
            continue
        try:
            bvec = _vec(entry.get("burgers"))
        except Exception:
            err.append(tag + ".burgers: expected a 3-vector")
            continue
        rec = {"burgers": bvec, "rho": 1.0, "kappa": 1.0,
               "glide_normal": [0.0, 0.0, 1.0], "tension": 0.0}
        for key in ("rho", "kappa", "tension"):
            if key in entry:
                try:
                    rec[key] = float(entry[key])
                except Exception:
                    err.append(tag + ".%s: expected a number" % key)
        if rec["rho"] <= 0.0:
            err.append(tag + ".rho: slip resistance must be positive")
        if rec["kappa"] < 1.0:
            err.append(tag + ".kappa: climb penalty must be >= 1")
        if rec["tension"] < 0.0:
            err.append(tag + ".tension: must be nonnegative")
        if "glide_normal" in entry:
            try:
                rec["glide_normal"] = _vec(entry["glide_normal"])
            except Exception:
                err.append(tag + ".glide_normal: expected a 3-vector")
        if not any(rec["glide_normal"]):
            err.append(tag + ".glide_normal: must be nonzero")
        for extra in set(entry) - {"burgers", "rho", "kappa", "glide_normal",
                                   "tension"}:
            err.append(tag + ".%s: unknown key" % extra)
        key = tuple(rec["burgers"])
        if key in seen:
            err.append(tag + ": duplicate Burgers vector %s" % (bvec,))
            continue
        seen.add(key)
        clean.append(rec)
    for bvec in burgers:
        if tuple(bvec) not in seen:
            err.append("potentials.systems: missing entry for Burgers "
                       "vector %s" % (bvec,))
    out["systems"] = sorted(clean, key=lambda r: tuple(r["burgers"]))
    return out


def _norm_solver(raw, err):
    out = {"steps": 8, "t_end": 1.0, "eps": 0.0,
           "epsilons": [1.0, 0.5, 0.25, 0.125],
           "catalog": {"translate_steps": [], "node_steps": [],
                       "bow_steps": [], "scale_factors": [], "cap": None},
           "improve_tol": 1e-10, "step_slack": 1e-9,
           "stability_depth": 2, "stability_every": 1,
           "search_depth": 2, "max_rounds": 12}
    src = raw if isinstance(raw, dict) else {}
    if raw is not None and not isinstance(raw, dict):
        err.append("solver: expected an object")
    for key, kind in (("steps", int), ("t_end", float), ("eps", float),
                      ("improve_tol", float), ("step_slack", float),
                      ("stability_depth", int), ("stability_every", int),
                      ("search_depth", int), ("max_rounds", int)):
        if key in src:
            try:
                out[key] = kind(src[key])
            except Exception:
                err.append("solver.%s: expected %s" % (key, kind.__name__))
    if out["steps"] < 1:
        err.append("solver.steps: need at least one step")
    if out["t_end"] <= 0.0:
        err.append("solver.t_end: must be positive")
    if out["eps"] < 0.0:
        err.append("solver.eps: must be >= 0")
    if out["improve_tol"] <= 0.0:
        err.append("solver.improve_tol: tolerance must be positive")
    if out["step_slack"] <= 0.0:
        err.append("solver.step_slack: tolerance must be positive")
    if out["stability_depth"] not in (1, 2):
        err.append("solver.stability_depth: expected 1 or 2")
    if out["search_depth"] not in (1, 2):
        err.append("solver.search_depth: expected 1 or 2")
    if out["stability_every"] < 0:
        err.append("solver.stability_every: must be >= 0")
    if out["max_rounds"] < 1:
        err.append("solver.max_rounds: must be >= 1")
    if "epsilons" in src:
        try:
            out["epsilons"] = [float(e) for e in src["epsilons"]]
            assert out["epsilons"]
        except Exception:
            err.append("solver.epsilons: expected a nonempty number list")
    if any(e <= 0.0 for e in out["epsilons"]):
        err.append("solver.epsilons: every quantum must be positive")
    cat = src.get("catalog", {})
    if not isinstance(cat, dict):
        err.append("solver.catalog: expected an object")
        cat = {}
    for key in ("translate_steps", "node_steps", "bow_steps",
                "scale_factors"):
        if key in cat:
            try:
                out["catalog"][key] = [float(v) for v in cat[key]]
            except Exception:
                err.append("solver.catalog.%s: expected a number list" % key)
    if cat.get("cap") is not None:
        try:
            out["catalog"]["cap"] = float(cat["cap"])
        except Exception:
            err.append("solver.catalog.cap: expected a number")
        if isinstance(out["catalog"]["cap"], float) \
                and out["catalog"]["cap"] <= 0.0:
            err.append("solver.catalog.cap: must be positive")
    for extra in set(cat) - {"translate_steps", "node_steps", "bow_steps",
                             "scale_factors", "cap"}:
        err.append("solver.catalog.%s: unknown key" % extra)
    for extra in set(src) - {"steps", "t_end", "eps", "epsilons", "catalog",
                             "improve_tol", "step_slack", "stability_depth",
                             "stability_every", "search_depth", "max_rounds"}:
        err.append("solver.%s: unknown key" % extra)
    return out


def _norm_output(raw, err):
    out = {"trace": "trace.csv", "manifest": "manifest.json",
           "epsilon_report": "epsilon_report.json", "slices": "slices.json"}
    src = raw if isinstance(raw, dict) else {}
    if raw is not None and not isinstance(raw, dict):
        err.append("output: expected an object")
    for key in out:
        if key in src:
            if not isinstance(src[key], str) or not src[key]:
                err.append("output.%s: expected a nonempty file name" % key)
            else:
                out[key] = src[key]
    for extra in set(src) - set(out):
        err.append("output.%s: unknown key" % extra)
    return out


def _load_lines(path, burgers, box, err):
    """Loop file -> DislocationState, validating geometry against the box."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except Exception as exc:
        err.append("initial_lines: unreadable loop file (%s)" % exc)
        return None
    loops = data.get("loops") if isinstance(data, dict) else None
    if not isinstance(loops, list) or not loops:
        err.append("initial_lines.loops: expected a nonempty list")
        return None
    default_quantum = float(data.get("quantum", 1.0)) if isinstance(
        data, dict) else 1.0
    allowed = {tuple(b) for b in burgers}
    state = DislocationState()
    ok = True
    for i, loop in enumerate(loops):
        tag = "initial_lines.loops[%d]" % i
        if not isinstance(loop, dict):
            err.append(tag + ": expected an object")
            ok = False
            continue
        try:
            bvec = tuple(_vec(loop.get("burgers")))
        except Exception:
            err.append(tag + ".burgers: expected a 3-vector")
            ok = False
            continue
        if bvec not in allowed:
            err.append(tag + ".burgers: %s not in the scenario burgers list"
                       % (list(bvec),))
            ok = False
            continue
        verts = np.asarray(loop.get("vertices", ()), dtype=float)
        if verts.ndim != 2 or verts.shape[0] < 3 or verts.shape[1] != 3:
            err.append(tag + ".vertices: expected at least three 3-vectors")
            ok = False
            continue
        for axis, (lo, hi) in enumerate(box):
            lo_v = float(verts[:, axis].min())
            hi_v = float(verts[:, axis].max())
            if lo_v < lo or hi_v > hi:
                err.append(tag + ".vertices: loop leaves the domain box "
                           "along %s (allowed [%g, %g])"
                           % ("xyz"[axis], lo, hi))
                ok = False
                break
        else:
            weight = float(loop.get("weight", 1.0))
            quantum = float(loop.get("quantum", default_quantum))
            if weight == 0.0:
                err.append(tag + ".weight: must be nonzero")
                ok = False
                continue
            if quantum < 0.0:
                err.append(tag + ".quantum: must be >= 0")
                ok = False
                continue
            state.add_line(bvec, polygon_loop(verts, weight=weight,
                                              quantum=quantum))
    return state if ok else None


class Scenario:
    """Validated config plus the objects the solver needs."""

    def __init__(self, config, base_dir, lines, p_background):
        self.config = config
        self.base_dir = base_dir
        self.lines = lines
        self.p_background = p_background

    def __eq__(self, other):
        return (isinstance(other, Scenario)
                and self.config == other.config)

    def canonical_text(self) -> str:
        return canonical_text(self.config)

    def gamma_star(self) -> float:
        """Default sliced-mass cap: 10x the initial line mass, floored."""
        return max(10.0 * MIRROR_FACTOR * self.lines.total_line_mass(), 100.0)

    def build(self):
        """Returns (model, catalog, lines, run_kwargs) ready for the driver."""
        cfg = self.config
        grid = DomainGrid(tuple(cfg["domain"]["n"]),
                          tuple(tuple(side) for side in cfg["domain"]["box"]))
        solver = ElasticSolver(grid, IsotropicElasticity(
            lam=cfg["elasticity"]["lam"], mu=cfg["elasticity"]["mu"]))
        tensions = {}
        pots = {}
        normals = {}
        for rec in cfg["potentials"]["systems"]:
            key = tuple(rec["burgers"])
            tensions[key] = LineTension.isotropic(rec["tension"])
            pots[key] = DissipationPotential(rho=rec["rho"],
                                             kappa=rec["kappa"],
                                             glide_normal=rec["glide_normal"])
            normals[key] = tuple(rec["glide_normal"])
        core = CoreEnergy(z0=cfg["potentials"]["core_threshold"],
                          tensions=tensions)
        load = cfg["loading"]
        g = None
        ramp = None
        if load["kind"] == "surface_shear":
            g = sum(surface_shear_load(grid, f["face"], f["direction"],
                                       load["magnitude"])
                    for f in load["faces"])
            ramp = ((lambda t: t) if load["ramp"] == "linear"
                    else (lambda t: 1.0))
        model = EnergyModel(solver, core, pots, g=g, ramp=ramp,
                            delta=cfg["domain"]["mollify_width"],
                            hold_value=tuple(cfg["elasticity"]["hold_value"]),
                            p_background=self.p_background)
        sol = cfg["solver"]
        cap = sol["catalog"]["cap"]
        catalog = MoveCatalog(
            glide_normals=normals,
            translate_steps=tuple(sol["catalog"]["translate_steps"]),
            node_steps=tuple(sol["catalog"]["node_steps"]),
            bow_steps=tuple(sol["catalog"]["bow_steps"]),
            scale_factors=tuple(sol["catalog"]["scale_factors"]),
            cap=self.gamma_star() if cap is None else cap)
        run_kwargs = {
            "improve_tol": sol["improve_tol"],
            "step_slack": sol["step_slack"],
            "stability_depth": sol["stability_depth"],
            "stability_every": sol["stability_every"],
            "search_depth": sol["search_depth"],
            "max_rounds": sol["max_rounds"],
        }
        return model, catalog, self.lines, run_kwargs


def canonical_text(config) -> str:
    """Stable serialization: sorted keys, exact float round trip."""
    return json.dumps(config, sort_keys=True, indent=2,
                      ensure_ascii=True) + "\n"


def parse_scenario(path) -> Scenario:
    """Reads, defaults and validates one config file.

    Raises ScenarioError carrying the complete list of problems; the message
    names the offending config key for each.
    """
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except Exception as exc:
        raise ScenarioError(["config: unreadable JSON (%s)" % exc])
    if not isinstance(raw, dict):
        raise ScenarioError(["config: top level must be an object"])
    base_dir = os.path.dirname(os.path.abspath(path))
    err = []
    cfg = {}
    cfg["domain"] = _norm_domain(raw.get("domain"), err)
    cfg["elasticity"] = _norm_elasticity(raw.get("elasticity"), err)
    burgers = raw.get("burgers")
    cfg["burgers"] = []
    if not isinstance(burgers, list) or not burgers:
        err.append("burgers: expected a nonempty list of 3-vectors")
    else:
        try:
            cfg["burgers"] = sorted(_vec(b) for b in burgers)
        except Exception:
            err.append("burgers: expected a nonempty list of 3-vectors")
    cfg["loading"] = _norm_loading(raw.get("loading"), err)
    cfg["potentials"] = _norm_potentials(raw.get("potentials"),
                                         cfg["burgers"], err)
    cfg["solver"] = _norm_solver(raw.get("solver"), err)
    cfg["output"] = _norm_output(raw.get("output"), err)
    lines_rel = raw.get("initial_lines")
    cfg["initial_lines"] = lines_rel if isinstance(lines_rel, str) else None
    if not cfg["initial_lines"]:
        err.append("initial_lines: expected a loop file path")
    p_rel = raw.get("initial_plastic_field")
    cfg["initial_plastic_field"] = p_rel if isinstance(p_rel, str) else None
    if p_rel is not None and not isinstance(p_rel, str):
        err.append("initial_plastic_field: expected a file path or null")
    for extra in set(raw) - {"domain", "elasticity", "burgers", "loading",
                             "potentials", "solver", "output",
                             "initial_lines", "initial_plastic_field"}:
        err.append("%s: unknown key" % extra)

    lines = None
    if cfg["initial_lines"]:
        lines_path = os.path.join(base_dir, cfg["initial_lines"])
        if not os.path.isfile(lines_path):
            err.append("initial_lines: file not found: %s"
                       % cfg["initial_lines"])
        elif cfg["burgers"]:
            lines = _load_lines(lines_path, cfg["burgers"],
                                cfg["domain"]["box"], err)
    p_background = None
    if cfg["initial_plastic_field"]:
        p_path = os.path.join(base_dir, cfg["initial_plastic_field"])
        if not os.path.isfile(p_path):
            err.append("initial_plastic_field: file not found: %s"
                       % cfg["initial_plastic_field"])
        else:
            try:
                p_background, _meta = load_field(p_path)
            except Exception as exc:
                err.append("initial_plastic_field: unreadable field (%s)"
                           % exc)
            else:
                want = tuple(cfg["domain"]["n"]) + (3, 3)
                if p_background.shape != want:
                    err.append("initial_plastic_field: shape %s does not "
                               "match the grid %s"
                               % (p_background.shape, want))
                    p_background = None
    if err:
        raise ScenarioError(err)
    return Scenario(cfg, base_dir, lines, p_background)


def reference_shear_config(n=16):
    """Single expanding loop under a ramped balanced shear couple."""
    config = {
        "domain": {"n": [n, n, n],
                   "box": [[-1.6, 1.6], [-1.6, 1.6], [-0.8, 0.8]]},
        "elasticity": {"lam": 1.0, "mu": 1.0},
        "burgers": [[1.0, 0.0, 0.0]],
        "initial_lines": "lines.json",
        "loading": {"kind": "surface_shear", "magnitude": 0.28,
                    "ramp": "linear",
                    "faces": [
                        {"face": "z+", "direction": [-1.0, 0.0, 0.0]},
                        {"face": "z-", "direction": [1.0, 0.0, 0.0]},
                        {"face": "x+", "direction": [0.0, 0.0, -1.0]},
                        {"face": "x-", "direction": [0.0, 0.0, 1.0]}]},
        "potentials": {"core_threshold": 100.0, "systems": [
            {"burgers": [1.0, 0.0, 0.0], "rho": 0.12, "kappa": 4.0,
             "glide_normal": [0.0, 0.0, 1.0], "tension": 0.01}]},
        "solver": {"steps": 8, "t_end": 1.0,
                   "catalog": {"translate_steps": [0.2],
                               "scale_factors": [0.9, 1.1], "cap": 16.0}},
        "output": {"trace": "trace.csv", "manifest": "manifest.json"},
    }
    s = 0.8
    lines = {"loops": [{"burgers": [1.0, 0.0, 0.0], "weight": 1.0,
                        "vertices": [[s, -s, 0.0], [s, s, 0.0],
                                     [-s, s, 0.0], [-s, -s, 0.0]]}]}
    return config, lines


def half_multiplicity_config(n=8):
    """Reference drive plus an inert half-quantum loop on a second system."""
    config, lines = reference_shear_config(n)
    config["burgers"] = [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]
    config["potentials"]["systems"].append(
        {"burgers": [0.0, 1.0, 0.0], "rho": 0.2, "kappa": 4.0,
         "glide_normal": [0.0, 0.0, 1.0], "tension": 0.002})
    config["potentials"]["systems"].sort(key=lambda r: tuple(r["burgers"]))
    config["solver"]["catalog"]["cap"] = 16.8
    config["solver"]["epsilons"] = [1.0, 0.5, 0.25, 0.125]
    s = 0.15
    lines["loops"].append(
        {"burgers": [0.0, 1.0, 0.0], "weight": 0.5, "quantum": 0.5,
         "vertices": [[0.7 + s, -0.7 - s, 0.0], [0.7 + s, -0.7 + s, 0.0],
                      [0.7 - s, -0.7 + s, 0.0], [0.7 - s, -0.7 - s, 0.0]]})
    return config, lines


def materialize(directory, config, lines_payload) -> str:
    """Writes config + loop file into a directory; returns the config path."""
    os.makedirs(directory, exist_ok=True)
    lines_path = os.path.join(directory, config["initial_lines"])
    with open(lines_path, "w") as fh:
        json.dump(lines_payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    config_path = os.path.join(directory, "scenario.json")
    with open(config_path, "w") as fh:
        fh.write(canonical_text(config))
    return config_path
