"""ALE flux reconstruction in space, marched by explicit SSP-RK3.

The semi-discrete residual follows the GCL-safe form: the instantaneous
metric terms are never differentiated, the Jacobian is never evolved as an
unknown, and the grid velocity enters as a pointwise -V_g . grad(u) source
plus mesh-relative face fluxes F_n = F . n - (V_g . n) u.  The grid velocity
is frozen per physical step, V_g = (x^{n+1} - x^n) / dt, and nodes move
linearly within the step; metrics are rebuilt at every RK stage from the
stage-time node positions.
"""

from dataclasses import dataclass

import numpy as np

from stfr.basis import make_basis
from stfr.geometry import (
    SpatialGeometry,
    shape1d,
    shape2d,
    spatial_face_points,
    spatial_geometry,
    spatial_points,
)
from stfr.mesh import Mesh
from stfr.motion import MotionPrescription, motion_path
from stfr.physics import (
    Advection1D,
    Advection2D,
    EquationSet,
    ExactSolution,
    exact_state,
    flux,
)
from stfr.st_solver import (
    PseudoControls,  # noqa: F401  (re-exported for symmetric driver APIs)
    _transformed_common_flux,
    _transformed_normal_flux,
    _traces_all_edges,
    initial_condition,
)
from stfr.timestepping import SSP_RK3_STAGE_TIMES, ssp_rk3_step


@dataclass
class MolField:
    """Spatial nodal coefficients, (n_elems, (k_s+1)^dim, n_vars)."""

    values: np.ndarray
    ks: int
    t: float
    coords: np.ndarray  # node coordinates at time t


def grid_velocity_step(coords_n: np.ndarray, coords_n1: np.ndarray,
                       dt: float) -> np.ndarray:
    """Per-node velocity (x^{n+1} - x^n) / dt, held constant over the step."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    return (np.asarray(coords_n1) - np.asarray(coords_n)) / dt


def _nodal_to_points(mesh: Mesh, nodal: np.ndarray, basis_s) -> tuple:
    """Interpolate nodal (per-mesh-node) vectors to solution and face points.

    Returns (at_solution_points, at_face_points) with shapes
    (nE, nS, dim) and (nE, n_edges, nFs, dim).
    """
    dim = mesh.dim
    C = nodal[mesh.elems]  # (nE, nc, dim)
    xi, eta = spatial_points(basis_s, dim)
    if dim == 1:
        N, _ = shape1d(xi)
    else:
        N, _, _ = shape2d(xi, eta)
    vol = np.einsum("pc,ecd->epd", N, C)
    n_edges = 2 * dim
    nFs = 1 if dim == 1 else basis_s.n
    fac = np.empty((mesh.n_elems, n_edges, nFs, dim))
    for edge in range(n_edges):
        fxi, feta = spatial_face_points(basis_s, dim, edge)
        if dim == 1:
            Nf, _ = shape1d(fxi)
        else:
            Nf, _, _ = shape2d(fxi, feta)
        fac[:, edge] = np.einsum("pc,ecd->epd", Nf, C)
    return vol, fac


class MolOperator:
    """Residual du/dt at one mesh position with one frozen grid velocity."""

    def __init__(self, mesh: Mesh, coords: np.ndarray, vel_nodes: np.ndarray,
                 eq: EquationSet, t: float = 0.0,
                 bc: ExactSolution | None = None):
        self.mesh = mesh
        self.eq = eq
        self.dim = mesh.dim
        self.t = t
        self.bs = None  # set by bind_degree
        self.coords = coords
        self.vel_nodes = vel_nodes
        self.bc = bc

    def bind_degree(self, ks: int):
        self.bs = make_basis(ks)
        self.geom: SpatialGeometry = spatial_geometry(self.mesh, self.coords, self.bs)
        vg_vol, vg_face = _nodal_to_points(self.mesh, self.vel_nodes, self.bs)
        self.vg = vg_vol
        dim = self.dim
        # space-time-style face vectors (M, -V_g . M): mesh-relative fluxes
        self.face_Mst = np.concatenate(
            [self.geom.face_m,
             -np.einsum("egfd,egfd->egf", vg_face, self.geom.face_m)[..., None]],
            axis=-1)
        f = self.mesh.faces
        self.f_eL, self.f_edgeL = f.elem_l, f.edge_l
        self.f_eR, self.f_edgeR = f.elem_r, f.edge_r
        self.f_flip = f.flip
        self.face_M = self.face_Mst[self.f_eL, self.f_edgeL]
        self.d_e = self.mesh.dirichlet[:, 0] if len(self.mesh.dirichlet) else np.empty(0, int)
        self.d_edge = self.mesh.dirichlet[:, 1] if len(self.mesh.dirichlet) else np.empty(0, int)
        if len(self.d_e):
            if self.bc is None:
                raise ValueError("mesh has dirichlet faces but no analytic bc")
            fc = self.geom.face_coords[self.d_e, self.d_edge]
            if dim == 1:
                self.d_ext = exact_state(self.bc, fc[..., 0], t=self.t)
            else:
                self.d_ext = exact_state(self.bc, fc[..., 0], fc[..., 1], self.t)
            self.d_M = self.face_Mst[self.d_e, self.d_edge]
        # advection fast path: (c - V_g) . M_dir per point
        if isinstance(self.eq, (Advection1D, Advection2D)):
            c = (self.eq.c,) if dim == 1 else (self.eq.c1, self.eq.c2)
            rel = np.stack([c[i] - self.vg[..., i] for i in range(dim)], axis=-1)
            self.w_xi = np.einsum("esd,esd->es", rel, self.geom.m_xi)
            if dim == 2:
                self.w_eta = np.einsum("esd,esd->es", rel, self.geom.m_eta)
        return self

    def _interior(self, u):
        """js * (div F - V_g . grad u) at solution points."""
        Ds = self.bs.diff
        dim, eq = self.dim, self.eq
        nE, nS, nV = u.shape
        n1 = self.bs.n
        if isinstance(eq, (Advection1D, Advection2D)):
            if dim == 1:
                du = np.matmul(Ds, u)
                return self.w_xi[..., None] * du
            du_xi = np.matmul(Ds, u.reshape(nE * n1, n1, nV)).reshape(u.shape)
            du_eta = np.matmul(Ds, u.reshape(nE, n1, n1 * nV)).reshape(u.shape)
            return self.w_xi[..., None] * du_xi + self.w_eta[..., None] * du_eta
        fx, gy = flux(eq, u)
        m_xi, m_eta, vg = self.geom.m_xi, self.geom.m_eta, self.vg
        F = np.stack([fx, gy, u], axis=-2)  # (nE, nS, 3, nV)
        dF_xi = np.matmul(Ds, F.reshape(nE * n1, n1, 3 * nV)).reshape(F.shape)
        dF_eta = np.matmul(Ds, F.reshape(nE, n1, n1 * 3 * nV)).reshape(F.shape)
        # augment metric rows with -V_g . M so the stacked u-component
        # carries the grid-velocity transport term
        w_xi = np.concatenate(
            [m_xi, -np.einsum("esd,esd->es", vg, m_xi)[..., None]], axis=-1)
        w_eta = np.concatenate(
            [m_eta, -np.einsum("esd,esd->es", vg, m_eta)[..., None]], axis=-1)
        out = np.einsum("esc,escv->esv", w_xi, dF_xi)
        out += np.einsum("esc,escv->esv", w_eta, dF_eta)
        return out

    def _side_deltas(self, u):
        u_t = u[:, None]  # reuse the space-time trace helper with nT = 1
        tr = _traces_all_edges(u_t, self.bs, self.dim)[:, :, 0]  # (nE,ne,nFs,nV)
        n_edges = 2 * self.dim
        nFs = tr.shape[2]
        nV = u.shape[-1]
        delta = np.zeros((self.mesh.n_elems, n_edges, nFs, nV))
        QL = tr[self.f_eL, self.f_edgeL]
        QR = tr[self.f_eR, self.f_edgeR]
        if self.dim == 2 and np.any(self.f_flip):
            QR = np.where(self.f_flip[:, None, None], QR[:, ::-1, :], QR)
        M = self.face_M
        com = _transformed_common_flux(self.eq, QL, QR, M)
        dL = com - _transformed_normal_flux(self.eq, QL, M)
        dR_here = com - _transformed_normal_flux(self.eq, QR, M)
        if self.dim == 2:
            dR = np.where(self.f_flip[:, None, None], -dR_here[:, ::-1, :], -dR_here)
        else:
            dR = -dR_here
        delta[self.f_eL, self.f_edgeL] = dL
        delta[self.f_eR, self.f_edgeR] = dR
        if len(self.d_e):
            QB = tr[self.d_e, self.d_edge]
            com_b = _transformed_common_flux(self.eq, QB, self.d_ext, self.d_M)
            delta[self.d_e, self.d_edge] = \
                com_b - _transformed_normal_flux(self.eq, QB, self.d_M)
        return delta

    def _lift(self, delta):
        gl, gr = self.bs.corr_deriv_left, self.bs.corr_deriv_right
        if self.dim == 1:
            return (delta[:, 1] * gr[None, :, None]
                    - delta[:, 0] * gl[None, :, None])
        n1 = self.bs.n
        nV = delta.shape[-1]
        south = -delta[:, 0][:, None, :, :] * gl[None, :, None, None]
        north = delta[:, 2][:, None, :, :] * gr[None, :, None, None]
        east = delta[:, 1][:, :, None, :] * gr[None, None, :, None]
        west = -delta[:, 3][:, :, None, :] * gl[None, None, :, None]
        corr = (south + north) + (east + west)
        return corr.reshape(self.mesh.n_elems, n1 * n1, nV)

    def residual(self, u):
        """du/dt = -(div F - V_g . grad u + correction field)."""
        total = self._interior(u)
        total += self._lift(self._side_deltas(u))
        return -total / self.geom.js[..., None]


def mol_residual(field: MolField, mesh: Mesh, vel_nodes: np.ndarray,
                 eq: EquationSet, bc: ExactSolution | None = None) -> np.ndarray:
    """Semi-discrete du/dt at the solution points (spec surface)."""
    op = MolOperator(mesh, field.coords, vel_nodes, eq, t=field.t, bc=bc)
    op.bind_degree(field.ks)
    return op.residual(field.values)


def rk3_physical_step(field: MolField, mesh: Mesh, coords_n1: np.ndarray,
                      dt: float, eq: EquationSet,
                      bc: ExactSolution | None = None) -> MolField:
    """One SSP-RK3 step from field.t to field.t + dt.

    The grid velocity is frozen from the step's endpoint positions; stage
    residuals see the linearly interpolated node positions at stage times
    (0, 1, 1/2) and the matching analytic boundary states.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    coords_n = field.coords
    vel = grid_velocity_step(coords_n, coords_n1, dt)
    ops = {}

    def rhs(u, t_stage):
        c = (t_stage - field.t) / dt
        key = round(c, 12)
        if key not in ops:
            coords_c = (1 - c) * coords_n + c * coords_n1
            ops[key] = MolOperator(mesh, coords_c, vel, eq,
                                   t=field.t + c * dt, bc=bc).bind_degree(field.ks)
        return ops[key].residual(u)

    u1 = ssp_rk3_step(field.values, rhs, dt, t=field.t)
    return MolField(values=u1, ks=field.ks, t=field.t + dt, coords=coords_n1)


def mol_stable_dt(mesh: Mesh, coords: np.ndarray, eq: EquationSet, ks: int,
                  safety: float = 0.5) -> float:
    """Explicit-RK3 stable step estimate: safety * h_min / (s_max (k+1)^2).

    s_max is a crude convective speed bound; the (k+1)^2 factor tracks the
    growth of the FR operator's spectral radius with degree.
    """
    C = mesh.elem_corners(coords)
    if mesh.dim == 1:
        h = np.min(np.abs(C[:, 1, 0] - C[:, 0, 0]))
    else:
        d1 = np.linalg.norm(C[:, 1] - C[:, 0], axis=1)
        d2 = np.linalg.norm(C[:, 3] - C[:, 0], axis=1)
        h = min(np.min(d1), np.min(d2))
    if isinstance(eq, Advection1D):
        s = abs(eq.c)
    elif isinstance(eq, Advection2D):
        s = np.hypot(eq.c1, eq.c2)
    else:
        s = 3.0  # order-one velocities plus sound speed for the test states
    return safety * h / (max(s, 1e-12) * (ks + 1) ** 2)


@dataclass
class MolMarchResult:
    field: MolField
    coords_final: np.ndarray


def march_mol(mesh: Mesh, motion: MotionPrescription, eq: EquationSet,
              sol: ExactSolution, ks: int, dt: float, n_steps: int,
              bc: ExactSolution | None = None,
              step_callback=None) -> MolMarchResult:
    """March n_steps SSP-RK3 steps from the exact initial condition."""
    bs = make_basis(ks)
    path = motion_path(motion, mesh, dt, n_steps)
    if bc is None and len(mesh.dirichlet):
        bc = sol
    u0 = initial_condition(mesh, path[0], bs, sol)
    fld = MolField(values=u0, ks=ks, t=0.0, coords=path[0])
    for k in range(n_steps):
        fld = rk3_physical_step(fld, mesh, path[k + 1], dt, eq, bc=bc)
        if step_callback is not None:
            step_callback(fld)
    return MolMarchResult(field=fld, coords_final=path[n_steps])
