"""Structured hexahedral grid: fields, difference operators, mollification.

Displacements live on nodes of an (nx, ny, nz) cell grid over a box; plastic
distortions and other matrix data live at cell centers as (nx, ny, nz, 3, 3)
arrays.  grad_bar is the cell average of the trilinear gradient (exact for
trilinear node fields, which is what makes the energy bookkeeping in the
elastic solver quadrature-consistent).  Slip sheets are mollified onto cell
centers with a compactly supported bump, normalized per sample point so the
total deposited matrix mass is exact.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

__all__ = ["DomainGrid", "curl_cells", "curl_as_boundary", "save_field",
           "load_field", "surface_shear_load", "body_load"]


class DomainGrid:
    def __init__(self, n, box):
        self.n = tuple(int(v) for v in n)
        box = np.asarray(box, dtype=float)
        if box.shape != (3, 2) or np.any(box[:, 1] <= box[:, 0]):
            raise ValueError("box must be three increasing (lo, hi) pairs")
        if len(self.n) != 3 or min(self.n) < 1:
            raise ValueError("need at least one cell per direction")
        self.box = box
        self.h = (box[:, 1] - box[:, 0]) / np.array(self.n, dtype=float)
        self.node_shape = tuple(v + 1 for v in self.n)
        self.n_nodes = int(np.prod(self.node_shape))
        self.n_cells = int(np.prod(self.n))
        self.cell_volume = float(np.prod(self.h))

    # -- geometry ---------------------------------------------------------------

    def node_axes(self):
        return [np.linspace(self.box[d, 0], self.box[d, 1], self.node_shape[d])
                for d in range(3)]

    def node_coords(self) -> np.ndarray:
        ax = self.node_axes()
        X = np.meshgrid(*ax, indexing="ij")
        return np.stack([x.ravel() for x in X], axis=1)

    def cell_centers(self) -> np.ndarray:
        ax = [self.box[d, 0] + (np.arange(self.n[d]) + 0.5) * self.h[d]
              for d in range(3)]
        X = np.meshgrid(*ax, indexing="ij")
        return np.stack([x.ravel() for x in X], axis=1)

    def node_weights(self) -> np.ndarray:
        """Lumped (trapezoid) quadrature weights per node, summing to |box|."""
        parts = []
        for d in range(3):
            w = np.full(self.node_shape[d], self.h[d])
            w[0] *= 0.5
            w[-1] *= 0.5
            parts.append(w)
        return np.einsum("i,j,k->ijk", *parts).ravel()

    def cell_node_indices(self) -> np.ndarray:
        """(n_cells, 8) node indices, local corner order (dx, dy, dz) lex."""
        nx, ny, nz = self.n
        gx, gy, gz = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz),
                                 indexing="ij")
        base = (gx * self.node_shape[1] + gy) * self.node_shape[2] + gz
        base = base.ravel()
        sy, sz = self.node_shape[1], self.node_shape[2]
        offs = np.array([(dx * sy + dy) * sz + dz
                         for dx in (0, 1) for dy in (0, 1) for dz in (0, 1)])
        return base[:, None] + offs[None, :]

    # -- difference operators ------------------------------------------------------

    def grad_bar(self, u: np.ndarray) -> np.ndarray:
        """Cell-averaged gradient of a node field.

        u: (n_nodes, m) or (n_nodes,) -> (nx, ny, nz, m, 3) (or (..., 3)).
        Exact cell average of the trilinear interpolant's gradient.
        """
        squeeze = u.ndim == 1
        U = u.reshape(self.node_shape + ((-1,) if not squeeze else ()))
        if squeeze:
            U = U[..., None]
        m = U.shape[-1]
        out = np.empty(self.n + (m, 3))
        d = np.diff(U, axis=0) / self.h[0]
        out[..., 0] = 0.25 * (d[:, :-1, :-1] + d[:, 1:, :-1] + d[:, :-1, 1:] + d[:, 1:, 1:])
        d = np.diff(U, axis=1) / self.h[1]
        out[..., 1] = 0.25 * (d[:-1, :, :-1] + d[1:, :, :-1] + d[:-1, :, 1:] + d[1:, :, 1:])
        d = np.diff(U, axis=2) / self.h[2]
        out[..., 2] = 0.25 * (d[:-1, :-1, :] + d[1:, :-1, :] + d[:-1, 1:, :] + d[1:, 1:, :])
        return out[..., 0, :] if squeeze else out

    def grad_bar_adjoint(self, M: np.ndarray) -> np.ndarray:
        """Adjoint of grad_bar against the cell-volume inner product.

        M: (nx, ny, nz, m, 3) -> (n_nodes, m) with
        (grad_bar_adjoint(M) . u) = sum_cells V * M : grad_bar(u).
        """
        m = M.shape[-2]
        out = np.zeros(self.node_shape + (m,))
        V = self.cell_volume
        c = M[..., 0] * (0.25 * V / self.h[0])
        for sy in (slice(None, -1), slice(1, None)):
            for sz in (slice(None, -1), slice(1, None)):
                out[1:, sy, sz] += c
                out[:-1, sy, sz] -= c
        c = M[..., 1] * (0.25 * V / self.h[1])
        for sx in (slice(None, -1), slice(1, None)):
            for sz in (slice(None, -1), slice(1, None)):
                out[sx, 1:, sz] += c
                out[sx, :-1, sz] -= c
        c = M[..., 2] * (0.25 * V / self.h[2])
        for sx in (slice(None, -1), slice(1, None)):
            for sy in (slice(None, -1), slice(1, None)):
                out[sx, sy, 1:] += c
                out[sx, sy, :-1] -= c
        return out.reshape(self.n_nodes, m)

    def interpolate_nodes(self, u: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Trilinear evaluation of a node field at arbitrary points."""
        U = u.reshape(self.node_shape + ((-1,) if u.ndim > 1 else ()))
        squeeze = u.ndim == 1
        if squeeze:
            U = U[..., None]
        loc = (np.asarray(pts) - self.box[:, 0]) / self.h
        idx = np.clip(loc.astype(int), 0, np.array(self.n) - 1)
        frac = loc - idx
        out = 0.0
        for dx in (0, 1):
            wx = np.where(dx, frac[:, 0], 1 - frac[:, 0])
            for dy in (0, 1):
                wy = np.where(dy, frac[:, 1], 1 - frac[:, 1])
                for dz in (0, 1):
                    wz = np.where(dz, frac[:, 2], 1 - frac[:, 2])
                    w = wx * wy * wz
                    out = out + w[:, None] * U[idx[:, 0] + dx, idx[:, 1] + dy, idx[:, 2] + dz]
        return out[:, 0] if squeeze else out

    # -- mollification ----------------------------------------------------------------

    def mollify_sheets(self, distortion, delta: float):
        """Cell-centered matrix density of the slip sheets, bump-smoothed.

        Kernel (1 - (r/delta)^2)^2 on r < delta, normalized per sample point
        against the cell lattice so the integral of the returned density
        equals the sheet matrix measure exactly.  Requires delta >= 2 max(h)
        so every sample sees enough cells.  Returns (field, clipped) where
        clipped reports whether any sample's support leaked outside the box.
        """
        if delta < 2.0 * float(np.max(self.h)) - 1e-12:
            raise ValueError("mollification radius must be at least two cell widths")
        field = np.zeros(self.n + (3, 3))
        clipped = False
        for sheet in distortion.sheets:
            for pts, mat in _sample_sheet(sheet, delta):
                clipped = clipped or leak_outside(self.box, pts, delta)
                self._deposit(field, pts, mat, delta)
        return field, clipped

    def _deposit(self, field, pts, mat, delta, block: int = 2048):
        """Scatter a normalized bump per sample point, scaled by one matrix."""
        if len(pts) == 0:
            return
        pts = np.asarray(pts, dtype=float)
        inv_h = 1.0 / self.h
        lo_box = self.box[:, 0]
        reach = int(np.ceil(delta * float(np.max(inv_h)))) + 1
        offs = np.arange(-reach, reach + 1)
        Vc = self.cell_volume
        flat = field.reshape(self.n_cells, 3, 3)
        bump = np.zeros(self.n_cells)
        for s in range(0, len(pts), block):
            P = pts[s:s + block]
            ctr = (P - lo_box) * inv_h - 0.5
            base = np.floor(ctr).astype(np.intp)
            # per-axis cell indices, center offsets and in-box masks
            idx, d2, ok = [], [], []
            for a in range(3):
                ia = base[:, a:a + 1] + offs[None, :]
                ca = lo_box[a] + (ia + 0.5) * self.h[a]
                idx.append(np.clip(ia, 0, self.n[a] - 1))
                d2.append((ca - P[:, a:a + 1]) ** 2)
                ok.append((ia >= 0) & (ia < self.n[a]))
            r2 = (d2[0][:, :, None, None] + d2[1][:, None, :, None]
                  + d2[2][:, None, None, :]) / delta ** 2
            k = np.where(r2 < 1.0, (1.0 - np.minimum(r2, 1.0)) ** 2, 0.0)
            k *= (ok[0][:, :, None, None] & ok[1][:, None, :, None]
                  & ok[2][:, None, None, :])
            tot = k.sum(axis=(1, 2, 3)) * Vc
            live = tot > 0.0
            if not np.any(live):
                continue
            w = np.zeros_like(k)
            w[live] = k[live] / tot[live, None, None, None]
            cell = ((idx[0][:, :, None, None] * self.n[1]
                     + idx[1][:, None, :, None]) * self.n[2]
                    + idx[2][:, None, None, :])
            bump += np.bincount(cell.ravel(), weights=w.ravel(),
                                minlength=self.n_cells)
        flat += bump[:, None, None] * np.asarray(mat, dtype=float)
        return


def leak_outside(box, pts, delta) -> bool:
    if len(pts) == 0:
        return False
    lo = np.min(pts - box[:, 0], initial=np.inf)
    hi = np.min(box[:, 1] - np.max(pts, axis=0), initial=np.inf)
    return bool(min(lo, hi) < delta)


def _sample_sheet(sheet, delta):
    """Per sub-triangle: barycentric sample points plus one shared b (x) nu
    matrix weight (each sample carries an equal share of the triangle)."""
    V, W, normals, areas, dens = sheet.triangles_with_density()
    for i in range(V.shape[0]):
        if W[i] == 0.0 or areas[i] == 0.0:
            continue
        edges = np.linalg.norm(V[i] - np.roll(V[i], 1, axis=0), axis=1)
        m = max(1, int(np.ceil(edges.max() / (delta / 4.0))))
        a, b = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        keep = (a + b) <= m - 1
        a, b = a[keep], b[keep]
        # each (a, b) lattice cell holds one upright sub-triangle centroid;
        # inverted ones fill the remaining area
        cent_up = (V[i, 0] + (a[:, None] + 1 / 3) / m * (V[i, 1] - V[i, 0])
                   + (b[:, None] + 1 / 3) / m * (V[i, 2] - V[i, 0]))
        keep_dn = (a + b) <= m - 2
        cent_dn = (V[i, 0] + (a[keep_dn][:, None] + 2 / 3) / m * (V[i, 1] - V[i, 0])
                   + (b[keep_dn][:, None] + 2 / 3) / m * (V[i, 2] - V[i, 0]))
        pts = np.concatenate([cent_up, cent_dn], axis=0)
        sub_area = areas[i] / m ** 2
        yield pts, W[i] * sub_area * dens[i]


def curl_cells(grid: DomainGrid, M: np.ndarray) -> np.ndarray:
    """Row-wise curl of a cell-centered matrix field by central differences
    (one-sided at the boundary).  Returns (nx, ny, nz, 3, 3): rows are
    curl(M[i, :])."""
    out = np.empty_like(M)
    def d(f, axis):
        return np.gradient(f, grid.h[axis], axis=axis)
    for i in range(3):
        out[..., i, 0] = d(M[..., i, 2], 1) - d(M[..., i, 1], 2)
        out[..., i, 1] = d(M[..., i, 0], 2) - d(M[..., i, 2], 0)
        out[..., i, 2] = d(M[..., i, 1], 0) - d(M[..., i, 0], 1)
    return out


def curl_as_boundary(grid: DomainGrid, v_cells: np.ndarray):
    """Curl of a sampled vector field as the boundary of its dual plate chain.

    Every cell deposits three mid-plane plates: the cross-section normal to
    axis d, oriented as the 2-vector dual to e_d, weighted v_d * h_d so the
    plate represents the cell's share of the 2-current dual to v.  Shared
    plate edges merge under boundary cancellation into centered differences
    of v, so the boundary 1-chain carries the discrete curl.

    Returns (boundary_chain, cell_vectors, interior): cell_vectors is the
    per-cell vector density assembled from edges off the domain faces and
    interior flags cells one layer away from the boundary, where the
    assembly is complete.
    """
    from .chains import SimplicialCurrent

    v = np.asarray(v_cells, dtype=float)
    if v.shape != grid.n + (3,):
        raise ValueError("need a cell-centered vector field")
    ax = grid.node_axes()
    mids = [0.5 * (a[:-1] + a[1:]) for a in ax]
    I = np.indices(grid.n)
    verts_all = []
    weights_all = []
    # (e, f) span the plate so that unit_e ^ unit_f is the Hodge dual of e_d
    for d, e, f in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        w = (v[..., d] * grid.h[d]).ravel()
        keep = w != 0.0
        if not np.any(keep):
            continue
        corners = []
        for oe, of in ((0, 0), (1, 0), (1, 1), (0, 1)):
            c = np.empty(grid.n + (3,))
            c[..., d] = mids[d][I[d]]
            c[..., e] = ax[e][I[e] + oe]
            c[..., f] = ax[f][I[f] + of]
            corners.append(c.reshape(-1, 3)[keep])
        A, B, C, D = corners
        verts_all.append(np.stack([A, B, C], axis=1))
        weights_all.append(w[keep])
        verts_all.append(np.stack([A, C, D], axis=1))
        weights_all.append(w[keep])
    if verts_all:
        plates = SimplicialCurrent(2, 3, np.concatenate(verts_all),
                                   np.concatenate(weights_all))
    else:
        plates = SimplicialCurrent(2, 3)
    bd = plates.boundary()

    cell_vectors = np.zeros(grid.n + (3,))
    interior = np.zeros(grid.n, dtype=bool)
    interior[tuple(slice(1, m - 1) for m in grid.n)] = True
    if bd.n_simplices:
        mid = bd.vertices.mean(axis=1)
        vec = bd.weights[:, None] * (bd.vertices[:, 1] - bd.vertices[:, 0])
        tol = 1e-9 * float(np.max(grid.box[:, 1] - grid.box[:, 0]))
        off_face = np.ones(len(mid), dtype=bool)
        for a in range(3):
            off_face &= np.abs(mid[:, a] - grid.box[a, 0]) > tol
            off_face &= np.abs(mid[:, a] - grid.box[a, 1]) > tol
        mid = mid[off_face]
        vec = vec[off_face]
        idx = np.empty((len(mid), 3), dtype=np.intp)
        for a in range(3):
            s = (mid[:, a] - grid.box[a, 0]) / grid.h[a]
            # midpoints sit on faces or half-cells; bias face hits upward so
            # every merged edge lands in one cell deterministically
            idx[:, a] = np.clip(np.floor(s + 1e-6).astype(np.intp),
                                0, grid.n[a] - 1)
        flat = np.ravel_multi_index((idx[:, 0], idx[:, 1], idx[:, 2]), grid.n)
        acc = np.zeros((grid.n_cells, 3))
        np.add.at(acc, flat, vec)
        cell_vectors = acc.reshape(grid.n + (3,)) / grid.cell_volume
    return bd, cell_vectors, interior


# -- loads ---------------------------------------------------------------------------


def surface_shear_load(grid: DomainGrid, face: str = "z+",
                       direction=(1.0, 0.0, 0.0), magnitude: float = 1.0) -> np.ndarray:
    """Lumped nodal forces of a uniform traction on one box face.

    Returns (n_nodes, 3); the pairing sum(g * u) approximates the surface
    integral of traction . u with trapezoid weights.
    """
    axis = {"x": 0, "y": 1, "z": 2}[face[0]]
    side = -1 if face[1] == "-" else 0 if face[1] == "+" else None
    if side is None:
        raise ValueError("face must look like 'z+', 'x-', ...")
    parts = []
    for d in range(3):
        if d == axis:
            continue
        w = np.full(grid.node_shape[d], grid.h[d])
        w[0] *= 0.5
        w[-1] *= 0.5
        parts.append(w)
    area_w = np.einsum("i,j->ij", *parts)
    g = np.zeros(grid.node_shape + (3,))
    sl = [slice(None)] * 3
    sl[axis] = side
    for c in range(3):
        g[tuple(sl) + (c,)] = magnitude * float(direction[c]) * area_w
    return g.reshape(grid.n_nodes, 3)


def body_load(grid: DomainGrid, func) -> np.ndarray:
    """Lumped nodal forces of a body force density given as func(points)->(n,3)."""
    pts = grid.node_coords()
    f = np.asarray(func(pts), dtype=float)
    return f * grid.node_weights()[:, None]


# -- field IO --------------------------------------------------------------------------


def save_field(path: str, array: np.ndarray, meta: dict) -> None:
    """Binary array + JSON sidecar, written atomically."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".npy.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.save(fh, array)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    side = {"shape": list(array.shape), "dtype": str(array.dtype)}
    side.update(meta)
    text = json.dumps(side, sort_keys=True, indent=1)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".json.tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text + "\n")
        os.replace(tmp, path + ".json")
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_field(path: str):
    array = np.load(path)
    with open(path + ".json") as fh:
        meta = json.load(fh)
    if list(array.shape) != meta["shape"]:
        raise ValueError("sidecar shape does not match array")
    return array, meta
