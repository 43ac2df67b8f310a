"""Linear elasticity on the grid: trilinear elements, exact quadrature.

The stored energy is  W(u, p) = 1/2 int |Du - p|_E^2  with u trilinear on
nodes, p constant per cell and E the isotropic stiffness.  The element
matrix uses 2x2x2 Gauss points, exact for trilinear gradients, so the
stiffness kernel is exactly the six rigid modes and every energy identity
below holds at solver precision:

  * minimize_u fixes the kernel with six linear constraints (three integral
    skew components, three mean displacements over a hold region);
  * solve_beta computes the incompatible strain as beta = grad_bar(phi) - p
    with phi the elastic potential of p; when p is a gradient the result is
    zero, and the remainder is E-orthogonal to all trilinear gradients.

Small problems factor the saddle system once (SuperLU, reused across
right-hand sides); large ones run a kernel-projected Jacobi-PCG.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import DomainGrid

__all__ = ["IsotropicElasticity", "ElasticSolver", "manufactured_fields"]


class IsotropicElasticity:
    """E A = lam tr(A) I + 2 mu sym(A); energy density A : E A."""

    def __init__(self, lam: float, mu: float):
        if mu <= 0 or 3 * lam + 2 * mu <= 0:
            raise ValueError("need mu > 0 and 3 lam + 2 mu > 0")
        self.lam = float(lam)
        self.mu = float(mu)

    def apply(self, A: np.ndarray) -> np.ndarray:
        sym = 0.5 * (A + np.swapaxes(A, -1, -2))
        tr = np.trace(A, axis1=-2, axis2=-1)
        return self.lam * tr[..., None, None] * np.eye(3) + 2.0 * self.mu * sym

    def energy_density(self, A: np.ndarray) -> np.ndarray:
        sym = 0.5 * (A + np.swapaxes(A, -1, -2))
        tr = np.trace(A, axis1=-2, axis2=-1)
        return self.lam * tr ** 2 + 2.0 * self.mu * np.sum(sym * sym, axis=(-2, -1))

    def inverse(self, S: np.ndarray) -> np.ndarray:
        """Compliance: the symmetric A with E A = S (S must be symmetric)."""
        tr = np.trace(S, axis1=-2, axis2=-1)
        fac = self.lam / (3.0 * self.lam + 2.0 * self.mu)
        return (S - fac * tr[..., None, None] * np.eye(3)) / (2.0 * self.mu)


def _element_stiffness(h, elastic: IsotropicElasticity) -> np.ndarray:
    """Exact (24, 24) stiffness of one box cell, local corner order lex."""
    gp = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
    corners = [(dx, dy, dz) for dx in (0, 1) for dy in (0, 1) for dz in (0, 1)]
    vol = float(np.prod(h))
    Ke = np.zeros((24, 24))
    for gx in gp:
        for gy in gp:
            for gz in gp:
                xi = (gx, gy, gz)
                grads = np.empty((8, 3))
                for a, (dx, dy, dz) in enumerate(corners):
                    f = [dx * xi[0] + (1 - dx) * (1 - xi[0]),
                         dy * xi[1] + (1 - dy) * (1 - xi[1]),
                         dz * xi[2] + (1 - dz) * (1 - xi[2])]
                    s = [(2 * dx - 1) / h[0], (2 * dy - 1) / h[1],
                         (2 * dz - 1) / h[2]]
                    grads[a] = [s[0] * f[1] * f[2], f[0] * s[1] * f[2],
                                f[0] * f[1] * s[2]]
                w = vol / 8.0
                gg = grads @ grads.T
                for a in range(8):
                    for b in range(8):
                        blk = (elastic.lam * np.outer(grads[a], grads[b])
                               + elastic.mu * np.outer(grads[b], grads[a])
                               + elastic.mu * gg[a, b] * np.eye(3))
                        Ke[3 * a:3 * a + 3, 3 * b:3 * b + 3] += w * blk
    return Ke


class ElasticSolver:
    def __init__(self, grid: DomainGrid, elastic: IsotropicElasticity,
                 hold_box=None, lu_threshold: int = 60000,
                 pcg_tol: float = 1e-10, pcg_maxiter: int = 4000):
        self.grid = grid
        self.elastic = elastic
        self.ndof = grid.n_nodes * 3
        self.lu_threshold = int(lu_threshold)
        self.pcg_tol = float(pcg_tol)
        self.pcg_maxiter = int(pcg_maxiter)
        self.Ke = _element_stiffness(grid.h, elastic)
        cells = grid.cell_node_indices()
        self.dof_idx = (3 * cells[:, :, None] + np.arange(3)).reshape(-1, 24)
        self._diag = np.bincount(self.dof_idx.ravel(),
                                 weights=np.tile(np.diag(self.Ke), grid.n_cells),
                                 minlength=self.ndof)
        self.hold_box = (np.asarray(hold_box, dtype=float)
                         if hold_box is not None else np.asarray(grid.box))
        self._build_kernel_and_constraints()
        self._lu = None
        self.last_info: dict = {}

    # -- operators ---------------------------------------------------------------

    def apply_K(self, u_flat: np.ndarray) -> np.ndarray:
        U = u_flat[self.dof_idx]
        F = U @ self.Ke  # Ke symmetric
        return np.bincount(self.dof_idx.ravel(), weights=F.ravel(),
                           minlength=self.ndof)

    def _build_kernel_and_constraints(self):
        X = self.grid.node_coords()
        ctr = self.grid.box.mean(axis=1)
        Xc = X - ctr
        R = np.zeros((self.ndof, 6))
        for i in range(3):
            R[i::3, i] = 1.0
        rot = [np.array([[0.0, 0, 0], [0, 0, -1.0], [0, 1.0, 0]]),
               np.array([[0.0, 0, 1.0], [0, 0, 0], [-1.0, 0, 0]]),
               np.array([[0.0, -1.0, 0], [1.0, 0, 0], [0, 0, 0]])]
        for k in range(3):
            R[:, 3 + k] = (Xc @ rot[k].T).ravel()
        self.R = R
        C = np.zeros((6, self.ndof))
        pairs = [(0, 1), (0, 2), (1, 2)]
        for k, (i, j) in enumerate(pairs):
            A = np.zeros((3, 3))
            A[i, j], A[j, i] = 1.0, -1.0
            M = np.broadcast_to(A, self.grid.n + (3, 3))
            C[k] = self.grid.grad_bar_adjoint(M).ravel()
        inside = np.all((X >= self.hold_box[:, 0]) & (X <= self.hold_box[:, 1]),
                        axis=1)
        if not np.any(inside):
            raise ValueError("hold box contains no grid nodes")
        w = inside.astype(float) / inside.sum()
        for i in range(3):
            C[3 + i, i::3] = w
        self.C = C
        self.CR_inv = np.linalg.inv(C @ R)

    def _assemble_K(self) -> sp.csr_matrix:
        rows = np.repeat(self.dof_idx, 24, axis=1).ravel()
        cols = np.tile(self.dof_idx, (1, 24)).ravel()
        data = np.tile(self.Ke.ravel(), self.grid.n_cells)
        return sp.coo_matrix((data, (rows, cols)),
                             shape=(self.ndof, self.ndof)).tocsr()

    def _kkt_lu(self):
        if self._lu is None:
            K = self._assemble_K()
            Ct = sp.csr_matrix(self.C.T)
            kkt = sp.bmat([[K, Ct], [Ct.T, None]], format="csc")
            self._lu = spla.splu(kkt)
        return self._lu

    # -- constrained solve ----------------------------------------------------------

    def _solve(self, load: np.ndarray, d6: np.ndarray, w0=None) -> np.ndarray:
        """argmin 1/2 u K u - load . u  subject to  C u = d6."""
        if self.ndof <= self.lu_threshold:
            lu = self._kkt_lu()
            sol = lu.solve(np.concatenate([load, d6]))
            u = sol[:self.ndof]
            res = self.apply_K(u) + self.C.T @ sol[self.ndof:] - load
            self.last_info = {"method": "lu", "iterations": 0,
                              "residual": float(np.linalg.norm(res))
                              / max(float(np.linalg.norm(load)), 1e-30)}
            return u
        return self._solve_pcg(load, d6, w0)

    def _project(self, w: np.ndarray) -> np.ndarray:
        return w - self.R @ (self.CR_inv @ (self.C @ w))

    def _solve_pcg(self, load, d6, w0=None):
        u_p = self.R @ (self.CR_inv @ d6)
        r0 = load - self.apply_K(u_p)
        rhs = r0 - self.C.T @ (self.CR_inv.T @ (self.R.T @ r0))
        w = np.zeros_like(load) if w0 is None else self._project(w0)
        r = rhs - self.apply_K(w) if w0 is not None else rhs.copy()
        Minv = 1.0 / np.where(self._diag > 0, self._diag, 1.0)
        z = self._project(Minv * r)
        p = z.copy()
        rz = float(np.sum(r * z))
        norm_rhs = max(float(np.linalg.norm(rhs)), 1e-300)
        it = 0
        for it in range(1, self.pcg_maxiter + 1):
            Kp = self.apply_K(p)
            alpha = rz / float(np.sum(p * Kp))
            w += alpha * p
            r -= alpha * Kp
            if float(np.linalg.norm(r)) <= self.pcg_tol * norm_rhs:
                break
            z = self._project(Minv * r)
            rz_new = float(np.sum(r * z))
            p = z + (rz_new / rz) * p
            rz = rz_new
        u = u_p + w
        u -= self.R @ (self.CR_inv @ (self.C @ u - d6))
        lam = self.CR_inv.T @ (self.R.T @ (load - self.apply_K(u)))
        res = self.apply_K(u) + self.C.T @ lam - load
        self.last_info = {"method": "pcg", "iterations": it,
                          "residual": float(np.linalg.norm(res))
                          / max(float(np.linalg.norm(load)), 1e-30)}
        return u

    # -- public solves -----------------------------------------------------------------

    def load_from_cells(self, M: np.ndarray) -> np.ndarray:
        """Nodal load with (load . u) = sum_c V M_c : grad_bar(u)_c."""
        return self.grid.grad_bar_adjoint(M).ravel()

    def minimize_u(self, p_cells: np.ndarray, g=None, r: float = 0.0,
                   hold_value=(0.0, 0.0, 0.0), w0=None) -> np.ndarray:
        """Equilibrium displacement for plastic distortion p and load r*g.

        Minimizes 1/2 int |Du - p|_E^2 - r <g, u> under the six constraints;
        returns the node field (n_nodes, 3).
        """
        load = self.load_from_cells(self.elastic.apply(p_cells))
        if g is not None and r != 0.0:
            load = load + r * np.asarray(g, dtype=float).ravel()
        d6 = np.concatenate([np.zeros(3), np.asarray(hold_value, dtype=float)])
        u = self._solve(load, d6, w0)
        return u.reshape(self.grid.n_nodes, 3)

    def apply_K_bar(self, phi_flat: np.ndarray) -> np.ndarray:
        """Averaged-gradient stiffness: grad_bar^T (V E grad_bar(phi))."""
        D = self.grid.grad_bar(phi_flat.reshape(self.grid.n_nodes, 3))
        return self.grid.grad_bar_adjoint(self.elastic.apply(D)).ravel()

    def _kbar_diag(self) -> np.ndarray:
        if not hasattr(self, "_kbar_diag_cache"):
            adj = np.zeros(self.grid.node_shape)
            for sx in (slice(None, -1), slice(1, None)):
                for sy in (slice(None, -1), slice(1, None)):
                    for sz in (slice(None, -1), slice(1, None)):
                        adj[sx, sy, sz] += 1.0
            h = self.grid.h
            lam, mu = self.elastic.lam, self.elastic.mu
            base = mu * float(np.sum(1.0 / (16.0 * h ** 2)))
            per_comp = (lam + mu) / (16.0 * h ** 2) + base
            d = adj.ravel()[:, None] * (self.grid.cell_volume * per_comp)[None, :]
            self._kbar_diag_cache = d.ravel()
        return self._kbar_diag_cache

    def incompatible_split(self, p_cells: np.ndarray, tol: float = 1e-13,
                           maxiter: int | None = None):
        """E-orthogonal splitting p = grad_bar(phi) + q.

        Minimizes 1/2 sum_c V |grad_bar(phi) - p|_E^2 over node fields phi
        (plain CG).  At the minimum q is E-orthogonal to every averaged
        gradient, exactly in the sense that the defect equals the returned
        solver residual; p = grad_bar(w) gives an E-null q.  The skew part
        of q is a gauge (the E product does not see it); all energy
        statements are gauge-free.

        Returns (q_cells, info).
        """
        rhs = self.grid.grad_bar_adjoint(self.elastic.apply(p_cells)).ravel()
        if maxiter is None:
            maxiter = max(200, 12 * max(self.grid.n))
        Minv = 1.0 / self._kbar_diag()
        phi = np.zeros(self.ndof)
        r = rhs.copy()
        z = Minv * r
        pdir = z.copy()
        rz = float(np.sum(r * z))
        norm_rhs = max(float(np.linalg.norm(rhs)), 1e-300)
        it = 0
        if norm_rhs > 1e-300:
            for it in range(1, maxiter + 1):
                Ap = self.apply_K_bar(pdir)
                denom = float(np.sum(pdir * Ap))
                if denom <= 0.0:
                    break
                alpha = rz / denom
                phi += alpha * pdir
                r -= alpha * Ap
                if float(np.linalg.norm(r)) <= tol * norm_rhs:
                    break
                z = Minv * r
                rz_new = float(np.sum(r * z))
                pdir = z + (rz_new / rz) * pdir
                rz = rz_new
        beta = self.grid.grad_bar(phi.reshape(self.grid.n_nodes, 3)) - p_cells
        info = {"method": "cg_bar", "iterations": it,
                "residual": float(np.linalg.norm(r)) / norm_rhs,
                "phi": phi.reshape(self.grid.n_nodes, 3)}
        return beta, info

    def incompatibility_pairing(self, beta_cells: np.ndarray, v) -> float:
        """sum_c V E(beta) : grad_bar(v), the orthogonality defect of beta."""
        Dv = self.grid.grad_bar(np.asarray(v, dtype=float).reshape(-1, 3))
        return self.grid.cell_volume * float(np.sum(self.elastic.apply(beta_cells) * Dv))

    def free_displacement(self, u, p_cells: np.ndarray, beta=None):
        """The compatible remainder free = grad_bar(u) - p - beta.

        With the default beta = q from incompatible_split(p), free is the
        averaged gradient grad_bar(u - phi), E-orthogonal to beta up to the
        split solver residual; the elastic energy then splits additively.
        Returns (free_cells, beta_cells).
        """
        if beta is None:
            beta, _ = self.incompatible_split(p_cells)
        Du = self.grid.grad_bar(np.asarray(u, dtype=float).reshape(-1, 3))
        return Du - p_cells - beta, beta

    # -- first-order least-squares div/curl solve ------------------------------------

    def solve_beta(self, curl_p: np.ndarray, tol: float = 1e-10,
                   maxiter: int | None = None, x0: np.ndarray | None = None):
        """Strain field with prescribed row curls and elastic equilibrium.

        Solves, row by row in the least-squares sense on the cell lattice,

            div(E beta) = 0,  curl(beta) = -curl_p,  (E beta) n = 0 on faces

        by plain CG on the normal equations of the stacked first-order
        system (central differences inside, one-sided at the boundary; face
        residuals weighted by 1/h).  Kernel components (constant skew
        fields) are never excited when starting from x0 in the range.

        Returns (beta_cells, info) with relative residuals of both interior
        equations and the L^{3/2} norm report.
        """
        g = -np.asarray(curl_p, dtype=float)
        shape = self.grid.n + (3, 3)
        if g.shape != shape:
            raise ValueError("curl data must be a cell matrix field")
        rhs = self._fosls_adjoint_curl(g)
        norm_g = float(np.linalg.norm(g))
        if norm_g == 0.0 and x0 is None:
            beta = np.zeros(shape)
            info = {"iterations": 0, "residual_div": 0.0, "residual_curl": 0.0,
                    "l32_norm": 0.0}
            return beta, info
        if maxiter is None:
            maxiter = max(400, 30 * max(self.grid.n))
        beta = np.zeros(shape) if x0 is None else np.array(x0, dtype=float)
        r = rhs - self._fosls_normal(beta)
        p = r.copy()
        rr = float(np.sum(r * r))
        norm_rhs = max(float(np.linalg.norm(rhs)), 1e-300)
        it = 0
        for it in range(1, maxiter + 1):
            Ap = self._fosls_normal(p)
            denom = float(np.sum(p * Ap))
            if denom <= 0.0:
                break
            alpha = rr / denom
            beta += alpha * p
            r -= alpha * Ap
            rr_new = float(np.sum(r * r))
            if np.sqrt(rr_new) <= tol * norm_rhs:
                break
            p = r + (rr_new / rr) * p
            rr = rr_new
        Eb = self.elastic.apply(beta)
        scale = max((self.elastic.lam + 2 * self.elastic.mu) * norm_g, 1e-300)
        res_div = float(np.linalg.norm(self._div_rows(Eb))) / scale
        res_curl = (float(np.linalg.norm(self._curl_rows(beta) - g))
                    / max(norm_g, 1e-300))
        l32 = (float(np.sum(np.sum(beta ** 2, axis=(-2, -1)) ** 0.75))
               * self.grid.cell_volume) ** (2.0 / 3.0)
        info = {"iterations": it, "residual_div": res_div,
                "residual_curl": res_curl, "l32_norm": l32}
        return beta, info

    # stacked first-order operator pieces (cell lattice, hand-coded adjoints)

    def _div_rows(self, M: np.ndarray) -> np.ndarray:
        h = self.grid.h
        out = np.zeros(self.grid.n + (3,))
        for d in range(3):
            out += _d1(M[..., :, d], h[d], d)
        return out

    def _div_rows_adjoint(self, w: np.ndarray) -> np.ndarray:
        h = self.grid.h
        out = np.zeros(self.grid.n + (3, 3))
        for d in range(3):
            out[..., :, d] = _d1_adjoint(w, h[d], d)
        return out

    def _curl_rows(self, M: np.ndarray) -> np.ndarray:
        h = self.grid.h
        out = np.empty_like(M)
        out[..., 0] = _d1(M[..., 2], h[1], 1) - _d1(M[..., 1], h[2], 2)
        out[..., 1] = _d1(M[..., 0], h[2], 2) - _d1(M[..., 2], h[0], 0)
        out[..., 2] = _d1(M[..., 1], h[0], 0) - _d1(M[..., 0], h[1], 1)
        return out

    def _curl_rows_adjoint(self, G: np.ndarray) -> np.ndarray:
        h = self.grid.h
        out = np.zeros_like(G)
        out[..., 2] += _d1_adjoint(G[..., 0], h[1], 1)
        out[..., 1] -= _d1_adjoint(G[..., 0], h[2], 2)
        out[..., 0] += _d1_adjoint(G[..., 1], h[2], 2)
        out[..., 2] -= _d1_adjoint(G[..., 1], h[0], 0)
        out[..., 1] += _d1_adjoint(G[..., 2], h[0], 0)
        out[..., 0] -= _d1_adjoint(G[..., 2], h[1], 1)
        return out

    def _flux_weighted(self, Eb: np.ndarray) -> np.ndarray:
        """Accumulate (1/h^2)-weighted boundary flux normal-equation term."""
        out = np.zeros_like(Eb)
        for d in range(3):
            w2 = 1.0 / self.grid.h[d] ** 2
            sl_lo = [slice(None)] * 3
            sl_lo[d] = 0
            sl_hi = [slice(None)] * 3
            sl_hi[d] = -1
            out[tuple(sl_lo) + (slice(None), d)] += w2 * Eb[tuple(sl_lo) + (slice(None), d)]
            out[tuple(sl_hi) + (slice(None), d)] += w2 * Eb[tuple(sl_hi) + (slice(None), d)]
        return out

    def _fosls_normal(self, beta: np.ndarray) -> np.ndarray:
        Eb = self.elastic.apply(beta)
        term_div = self.elastic.apply(self._div_rows_adjoint(self._div_rows(Eb)))
        term_curl = self._curl_rows_adjoint(self._curl_rows(beta))
        term_flux = self.elastic.apply(self._flux_weighted(Eb))
        return term_div + term_curl + term_flux

    def _fosls_adjoint_curl(self, g: np.ndarray) -> np.ndarray:
        return self._curl_rows_adjoint(g)

    # -- energies ------------------------------------------------------------------------

    def elastic_energy(self, u: np.ndarray, p_cells: np.ndarray) -> float:
        """1/2 int |Du - p|_E^2, exact for trilinear u and cellwise p."""
        uf = np.asarray(u, dtype=float).ravel()
        quad = float(np.sum(uf * self.apply_K(uf)))
        Ep = self.elastic.apply(p_cells)
        Du = self.grid.grad_bar(uf.reshape(self.grid.n_nodes, 3))
        cross = self.grid.cell_volume * float(np.sum(Ep * Du))
        pp = self.grid.cell_volume * float(np.sum(self.elastic.energy_density(p_cells)))
        return 0.5 * quad - cross + 0.5 * pp

    def total_energy(self, u, p_cells, g=None, r: float = 0.0,
                     core: float = 0.0) -> float:
        """W(u, p) - r <g, u> + core."""
        E = self.elastic_energy(u, p_cells)
        if g is not None and r != 0.0:
            E -= r * float(np.sum(np.asarray(g).reshape(-1, 3)
                                  * np.asarray(u).reshape(-1, 3)))
        return E + core

    def euler_lagrange_residual(self, u, p_cells, g=None, r: float = 0.0) -> float:
        """Relative norm of K u + C^T lam - load at the given state."""
        load = self.load_from_cells(self.elastic.apply(p_cells))
        if g is not None and r != 0.0:
            load = load + r * np.asarray(g, dtype=float).ravel()
        uf = np.asarray(u, dtype=float).ravel()
        Ku = self.apply_K(uf)
        lam = self.CR_inv.T @ (self.R.T @ (load - Ku))
        res = Ku + self.C.T @ lam - load
        return float(np.linalg.norm(res)) / max(float(np.linalg.norm(load)), 1e-30)


def _d1(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Central difference inside, one-sided at the ends, along one axis."""
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[0] = (f[1] - f[0]) / h
    out[-1] = (f[-1] - f[-2]) / h
    if f.shape[0] > 2:
        out[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


def _d1_adjoint(g: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Exact transpose of _d1 in the unweighted euclidean product."""
    g = np.moveaxis(g, axis, 0)
    out = np.zeros_like(g)
    out[0] -= g[0] / h
    out[1] += g[0] / h
    out[-2] -= g[-1] / h
    out[-1] += g[-1] / h
    if g.shape[0] > 2:
        out[:-2] -= g[1:-1] / (2.0 * h)
        out[2:] += g[1:-1] / (2.0 * h)
    return np.moveaxis(out, 0, axis)


# -- manufactured reference fields --------------------------------------------------------


def manufactured_fields(box, elastic: IsotropicElasticity):
    """Closed-form divergence-free stress with traction-free boundary.

    With psi(x) = prod_d sin^3(pi (x_d - lo_d) / L_d):
      sigma(x) = laplace(psi) I - Hess(psi)   (row-wise divergence free,
                                               vanishes on the box faces)
      beta     = compliance(sigma)
    Returns (sigma(pts), beta(pts), grad_psi(pts)) as callables.
    """
    box = np.asarray(box, dtype=float)
    lo = box[:, 0]
    L = box[:, 1] - box[:, 0]

    def parts(x):
        t = np.pi * (np.asarray(x) - lo) / L
        s, c = np.sin(t), np.cos(t)
        f = s ** 3
        df = 3.0 * np.pi / L * s ** 2 * c
        ddf = (np.pi / L) ** 2 * (6.0 * s * c ** 2 - 3.0 * s ** 3)
        return f, df, ddf

    def hess(x):
        f, df, ddf = parts(x)
        n = f.shape[0]
        H = np.empty((n, 3, 3))
        for i in range(3):
            for j in range(3):
                term = np.ones(n)
                for d in range(3):
                    if d == i == j:
                        term = term * ddf[:, d]
                    elif d in (i, j):
                        term = term * df[:, d]
                    else:
                        term = term * f[:, d]
                H[:, i, j] = term
        return H

    def sigma(x):
        H = hess(x)
        tr = np.trace(H, axis1=-2, axis2=-1)
        return tr[:, None, None] * np.eye(3) - H

    def beta(x):
        return elastic.inverse(sigma(x))

    def grad_psi(x):
        f, df, _ = parts(x)
        g = np.empty(f.shape)
        for i in range(3):
            term = np.ones(f.shape[0])
            for d in range(3):
                term = term * (df[:, d] if d == i else f[:, d])
            g[:, i] = term
        return g

    return sigma, beta, grad_psi
