"""Space-time flux reconstruction solver.

One slab at a time: assemble the space-time residual (projected divergence
plus correction field), drive it to steady state in pseudo time with
explicit SSP-RK3, then interpolate the converged slab to its top face to
feed the next slab.

The interior divergence is evaluated in chain-rule form: reference-direction
derivatives of the collocated physical flux components are contracted with
the exact pointwise metric rows M_dir = |J| grad(dir).  For polynomial
fluxes this equals the exact divergence of the collocated flux (the metric
rows of a linear space-time element satisfy the conservation-law identities
exactly), which is what preserves uniform flow on deforming grids at every
order.  Temporal faces are upwinded causally: the bottom face takes the
inflow (previous slab or initial condition), the top face is left local.
"""

from dataclasses import dataclass, field

import numpy as np

from stfr.basis import BasisSet, make_basis
from stfr.geometry import SlabGeometry, slab_geometry
from stfr.mesh import Mesh
from stfr.motion import MotionPrescription, motion_path
from stfr.physics import (
    Advection1D,
    Advection2D,
    EquationSet,
    Euler2D,
    ExactSolution,
    exact_state,
    flux,
)
from stfr.timestepping import ssp_rk3_step


class PseudoConvergenceError(RuntimeError):
    """Pseudo-time marching hit max_iters before the requested residual drop."""

    def __init__(self, msg, achieved_drop, iterations):
        super().__init__(msg)
        self.achieved_drop = achieved_drop
        self.iterations = iterations


@dataclass
class PseudoControls:
    """Dual-time-stepping controls.

    sigma_cfl defaults to 0.8 / (2 k_s + 1); drop_orders is the required
    reduction of the relative unsteady residual; an absolute RMS floor
    short-circuits the relative criterion for exact initial guesses.
    """

    sigma_cfl: float | None = None
    drop_orders: float = 10.0
    max_iters: int = 100_000
    abs_floor: float = 1e-14

    def __post_init__(self):
        if self.sigma_cfl is not None and self.sigma_cfl <= 0:
            raise ValueError("sigma_cfl must be > 0")
        if self.drop_orders < 1:
            raise ValueError("drop_orders must be >= 1")


@dataclass
class StateField:
    """Space-time nodal coefficients of one slab.

    values has shape (n_elems, k_t+1, (k_s+1)^dim, n_vars), C-ordered over
    (tau level, spatial point); spatial points are x-fastest.
    """

    values: np.ndarray
    ks: int
    kt: int
    slab_index: int = 0
    t_n: float = 0.0
    t_np1: float = 0.0


@dataclass
class SlabStats:
    iterations: int
    initial_residual: float
    final_residual: float
    pseudo_dt: float


def _traces_all_edges(u, basis_s, dim):
    """Solution traces on every side face, (nE, n_edges, nT, nFs, nV)."""
    el, er = basis_s.extrap_left, basis_s.extrap_right
    nE, nT = u.shape[0], u.shape[1]
    nV = u.shape[-1]
    n1 = basis_s.n
    if dim == 1:
        u3 = u.reshape(nE * nT, n1, nV)
        t0 = np.matmul(el, u3).reshape(nE, 1, nT, 1, nV)
        t1 = np.matmul(er, u3).reshape(nE, 1, nT, 1, nV)
        return np.concatenate([t0, t1], axis=1)
    uy = u.reshape(nE * nT, n1, n1 * nV)       # contract eta
    ux = u.reshape(nE * nT * n1, n1, nV)       # contract xi
    tr_s = np.matmul(el, uy).reshape(nE, nT, n1, nV)
    tr_n = np.matmul(er, uy).reshape(nE, nT, n1, nV)
    tr_w = np.matmul(el, ux).reshape(nE, nT, n1, nV)
    tr_e = np.matmul(er, ux).reshape(nE, nT, n1, nV)
    return np.stack([tr_s, tr_e, tr_n, tr_w], axis=1)


def _transformed_normal_flux(eq, Q, M):
    """M . F_st(Q) for an unnormalized outward space-time vector M."""
    if isinstance(eq, Advection1D):
        lam = eq.c * M[..., 0] + M[..., 1]
        return lam[..., None] * Q
    if isinstance(eq, Advection2D):
        lam = eq.c1 * M[..., 0] + eq.c2 * M[..., 1] + M[..., 2]
        return lam[..., None] * Q
    f, g = flux(eq, Q)
    return M[..., 0:1] * f + M[..., 1:2] * g + M[..., 2:3] * Q


def _transformed_common_flux(eq, QL, QR, M):
    """Common flux scaled by the face's unnormalized space-time vector M.

    Equals ||M|| times the unit-normal common flux; advection avoids the
    normalization entirely (the upwind sign is scale invariant).
    """
    if isinstance(eq, (Advection1D, Advection2D)):
        if isinstance(eq, Advection1D):
            lam = eq.c * M[..., 0] + M[..., 1]
        else:
            lam = eq.c1 * M[..., 0] + eq.c2 * M[..., 1] + M[..., 2]
        return (np.maximum(lam, 0.0)[..., None] * QL
                + np.minimum(lam, 0.0)[..., None] * QR)
    from stfr.physics import _roe_ale

    sig = np.hypot(M[..., 0], M[..., 1])
    mx = M[..., 0] / sig
    my = M[..., 1] / sig
    vgn = -M[..., 2] / sig
    return sig[..., None] * _roe_ale(eq, QL, QR, mx, my, vgn)


class SlabOperator:
    """Precomputed residual operator for one slab.

    Holds geometry tables, face-plan gather indices, and frozen analytic
    boundary states, so pseudo-time iterations reduce to einsums and
    vectorized flux evaluations.
    """

    def __init__(self, mesh: Mesh, geom: SlabGeometry, eq: EquationSet,
                 inflow: np.ndarray, bc: ExactSolution | None = None):
        self.mesh = mesh
        self.geom = geom
        self.eq = eq
        self.inflow = inflow
        self.dim = mesh.dim
        self.bs = make_basis(geom.ks)
        self.bt = make_basis(geom.kt)
        self.nV = eq.n_vars
        self.nE = mesh.n_elems
        self.nT = self.bt.n
        self.nS = self.bs.n ** self.dim

        f = mesh.faces
        self.f_eL, self.f_edgeL = f.elem_l, f.edge_l
        self.f_eR, self.f_edgeR = f.elem_r, f.edge_r
        self.f_flip = f.flip
        self.face_M = geom.face_m[self.f_eL, self.f_edgeL]
        self.d_e = mesh.dirichlet[:, 0] if len(mesh.dirichlet) else np.empty(0, int)
        self.d_edge = mesh.dirichlet[:, 1] if len(mesh.dirichlet) else np.empty(0, int)
        if len(self.d_e):
            if bc is None:
                raise ValueError("mesh has dirichlet faces but no analytic bc")
            fc = geom.face_coords[self.d_e, self.d_edge]
            self.d_ext = _exact_at(bc, fc, self.dim)
            self.d_M = geom.face_m[self.d_e, self.d_edge]
        # advection fast path: pointwise characteristic weights per direction
        if isinstance(eq, (Advection1D, Advection2D)):
            c = (eq.c,) if self.dim == 1 else (eq.c1, eq.c2)
            self.w_xi = sum(c[i] * geom.m_xi[..., i] for i in range(self.dim)) \
                + geom.m_xi[..., self.dim]
            if self.dim == 2:
                self.w_eta = sum(c[i] * geom.m_eta[..., i] for i in range(self.dim)) \
                    + geom.m_eta[..., self.dim]
        self._corr_lift_cache = None

    # -- interior divergence ------------------------------------------------

    def _interior(self, u):
        """|J| * div_st(F) at solution points, chain-rule form.

        Derivative contractions run as batched matmuls (BLAS) rather than
        einsum, which does not dispatch small high-rank contractions well.
        """
        Ds, Dt = self.bs.diff, self.bt.diff
        eq, dim = self.eq, self.dim
        nE, nT, nS, nV = self.nE, self.nT, self.nS, self.nV
        n1 = self.bs.n

        def d_tau(a, trail):
            return np.matmul(Dt, a.reshape(nE, nT, trail)).reshape(a.shape)

        if isinstance(eq, (Advection1D, Advection2D)):
            if dim == 1:
                du_xi = np.matmul(Ds, u.reshape(nE * nT, n1, nV)).reshape(u.shape)
                return self.w_xi[..., None] * du_xi \
                    + self.geom.js[..., None] * d_tau(u, nS * nV)
            du_xi = np.matmul(Ds, u.reshape(nE * nT * n1, n1, nV)).reshape(u.shape)
            du_eta = np.matmul(Ds, u.reshape(nE * nT, n1, n1 * nV)).reshape(u.shape)
            return (self.w_xi[..., None] * du_xi
                    + self.w_eta[..., None] * du_eta
                    + self.geom.js[..., None] * d_tau(u, nS * nV))
        # Euler: stack (f, g, Q) so each direction is one contraction
        fx, gy = flux(eq, u)
        F = np.stack([fx, gy, u], axis=-2)  # (nE, nT, nS, 3, nV)
        m_xi, m_eta, js = self.geom.m_xi, self.geom.m_eta, self.geom.js
        dF_xi = np.matmul(Ds, F.reshape(nE * nT * n1, n1, 3 * nV)).reshape(F.shape)
        Fy = F.reshape(nE * nT, n1, n1 * 3 * nV)
        dF_eta = np.matmul(Ds, Fy).reshape(F.shape)
        out = np.einsum("etsc,etscv->etsv", m_xi, dF_xi)
        out += np.einsum("etsc,etscv->etsv", m_eta, dF_eta)
        out += js[..., None] * d_tau(u, nS * nV)
        return out

    # -- face corrections ---------------------------------------------------

    def _side_deltas(self, u):
        """Outward-normal flux jumps per element edge, (nE, n_edges, nT, nFs, nV)."""
        tr = _traces_all_edges(u, self.bs, self.dim)
        n_edges = 2 * self.dim
        nFs = tr.shape[3]
        delta = np.zeros((self.nE, n_edges, self.nT, nFs, self.nV))
        QL = tr[self.f_eL, self.f_edgeL]
        QR = tr[self.f_eR, self.f_edgeR]
        if self.dim == 2 and np.any(self.f_flip):
            QR = np.where(self.f_flip[:, None, None, None],
                          QR[:, :, ::-1, :], QR)
        M = self.face_M
        com = _transformed_common_flux(self.eq, QL, QR, M)
        dL = com - _transformed_normal_flux(self.eq, QL, M)
        dR_here = com - _transformed_normal_flux(self.eq, QR, M)
        if self.dim == 2:
            dR = np.where(self.f_flip[:, None, None, None],
                          -dR_here[:, :, ::-1, :], -dR_here)
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
        """Correction field from edge jumps: -g'_L on minus faces, +g'_R on plus."""
        gl, gr = self.bs.corr_deriv_left, self.bs.corr_deriv_right
        if self.dim == 1:
            # the singleton face-point axis doubles as the x axis
            return (delta[:, 1] * gr[None, None, :, None]
                    - delta[:, 0] * gl[None, None, :, None])
        n1 = self.bs.n
        # delta[:, edge] has shape (nE, nT, nFs, nV); broadcast the
        # correction-derivative profile along the transverse axis
        south = -delta[:, 0][:, :, None, :, :] * gl[None, None, :, None, None]
        north = delta[:, 2][:, :, None, :, :] * gr[None, None, :, None, None]
        east = delta[:, 1][:, :, :, None, :] * gr[None, None, None, :, None]
        west = -delta[:, 3][:, :, :, None, :] * gl[None, None, None, :, None]
        corr = (south + north) + (east + west)
        return corr.reshape(self.nE, self.nT, self.nS, self.nV)

    def _temporal_correction(self, u):
        """Causal bottom-face correction from the slab inflow."""
        ubot = np.matmul(self.bt.extrap_left,
                         u.reshape(self.nE, self.nT, self.nS * self.nV))
        ubot = ubot.reshape(self.nE, self.nS, self.nV)
        d_out = self.geom.js_bot[..., None] * (ubot - self.inflow)
        gl = self.bt.corr_deriv_left
        return -d_out[:, None] * gl[None, :, None, None]

    def residual(self, u):
        """R_st = -(P(div_st F) + correction field) at the solution points."""
        total = self._interior(u)
        total += self._lift(self._side_deltas(u))
        total += self._temporal_correction(u)
        return -total / self.geom.jac[..., None]

    # -- pseudo-time stepping ----------------------------------------------

    def pseudo_dt(self, u, sigma: float) -> float:
        """Global pseudo step from a space-time wave-speed estimate."""
        geom, eq = self.geom, self.eq
        dirs = [geom.m_xi] if self.dim == 1 else [geom.m_xi, geom.m_eta]
        if isinstance(eq, (Advection1D, Advection2D)):
            c = (eq.c,) if self.dim == 1 else (eq.c1, eq.c2)
            speed = np.abs(geom.js)
            for M in dirs:
                lam = sum(c[i] * M[..., i] for i in range(self.dim)) + M[..., self.dim]
                speed = speed + np.abs(lam)
        else:
            from stfr.physics import euler_primitives

            rho, uu, vv, p = euler_primitives(eq, u)
            a = np.sqrt(eq.gamma * p / rho)
            speed = np.abs(geom.js)
            for M in dirs:
                lam = np.abs(uu * M[..., 0] + vv * M[..., 1] + M[..., 2])
                lam += a * np.hypot(M[..., 0], M[..., 1])
                speed = speed + lam
        return sigma * float(np.min(geom.jac / speed))

    def march(self, u0, controls: PseudoControls):
        """Iterate SSP-RK3 in pseudo time until the residual drop is reached.

        Returns (u, SlabStats).  Raises PseudoConvergenceError at max_iters.
        """
        sigma = controls.sigma_cfl
        if sigma is None:
            sigma = 0.8 / (2 * self.geom.ks + 1)
        u = u0.copy()
        dtau = self.pseudo_dt(u0, sigma)
        r = self.residual(u)
        r0 = float(np.sqrt(np.mean(r * r)))
        # round-off-aware absolute floor: the residual of an exact solution
        # assembles to eps times the operator's characteristic rate
        urms = float(np.sqrt(np.mean(u0 * u0)))
        floor = controls.abs_floor * max(1.0, urms * sigma / dtau)
        if r0 <= floor:
            return u, SlabStats(0, r0, r0, dtau)
        target = max(r0 * 10.0 ** (-controls.drop_orders), floor)
        rnorm = r0
        for it in range(1, controls.max_iters + 1):
            # unrolled SSP-RK3 cycle; the first stage residual doubles as
            # the convergence monitor of the current iterate
            u1 = u + dtau * r
            r2 = self.residual(u1)
            u2 = 0.75 * u + 0.25 * u1 + 0.25 * dtau * r2
            r3 = self.residual(u2)
            u = u / 3.0 + 2.0 / 3.0 * u2 + 2.0 / 3.0 * dtau * r3
            r = self.residual(u)
            rnorm = float(np.sqrt(np.mean(r * r)))
            if rnorm <= target:
                return u, SlabStats(it, r0, rnorm, dtau)
            if not np.isfinite(rnorm) or rnorm > 1e8 * r0:
                raise PseudoConvergenceError(
                    f"pseudo-time iteration diverged at iter {it} "
                    f"(residual {rnorm:.3e} from {r0:.3e})",
                    achieved_drop=np.log10(r0 / max(rnorm, 1e-300)),
                    iterations=it)
        raise PseudoConvergenceError(
            f"pseudo-time marching did not drop the residual by "
            f"{controls.drop_orders} orders within {controls.max_iters} "
            f"iterations (achieved {np.log10(r0 / rnorm):.2f})",
            achieved_drop=float(np.log10(r0 / rnorm)),
            iterations=controls.max_iters)


def _exact_at(sol: ExactSolution, coords, dim):
    """Exact conservative state at stacked (x[, y], t) coordinate arrays."""
    if dim == 1:
        return exact_state(sol, coords[..., 0], t=coords[..., 1])
    return exact_state(sol, coords[..., 0], coords[..., 1], coords[..., 2])


def st_residual(field: StateField, geom: SlabGeometry, inflow: np.ndarray,
                eq: EquationSet, mesh: Mesh,
                bc: ExactSolution | None = None) -> np.ndarray:
    """One residual evaluation (spec surface over SlabOperator)."""
    op = SlabOperator(mesh, geom, eq, inflow, bc)
    return op.residual(field.values)


def pseudo_march(field: StateField, geom: SlabGeometry, inflow: np.ndarray,
                 eq: EquationSet, mesh: Mesh, bc: ExactSolution | None = None,
                 controls: PseudoControls | None = None):
    """Drive one slab to pseudo-steady state; returns (StateField, SlabStats)."""
    controls = controls or PseudoControls()
    op = SlabOperator(mesh, geom, eq, inflow, bc)
    u, stats = op.march(field.values, controls)
    out = StateField(values=u, ks=field.ks, kt=field.kt,
                     slab_index=field.slab_index, t_n=field.t_n,
                     t_np1=field.t_np1)
    return out, stats


def advance_slab(inflow: np.ndarray, mesh: Mesh, coords_n, coords_n1,
                 dt: float, t_n: float, eq: EquationSet,
                 basis_s: BasisSet, basis_t: BasisSet,
                 bc: ExactSolution | None = None,
                 controls: PseudoControls | None = None,
                 slab_index: int = 0):
    """Build one slab, seed it from the inflow, converge it, and hand back
    (StateField, SlabGeometry, top-face values, SlabStats)."""
    controls = controls or PseudoControls()
    geom = slab_geometry(mesh, coords_n, coords_n1, dt, basis_s, basis_t, t_n)
    u0 = np.repeat(inflow[:, None], basis_t.n, axis=1)
    op = SlabOperator(mesh, geom, eq, inflow, bc)
    u, stats = op.march(u0, controls)
    top = np.einsum("t,etsv->esv", basis_t.extrap_right, u)
    fld = StateField(values=u, ks=basis_s.degree, kt=basis_t.degree,
                     slab_index=slab_index, t_n=t_n, t_np1=t_n + dt)
    return fld, geom, top, stats


@dataclass
class MarchResult:
    field: StateField
    geom: SlabGeometry
    top: np.ndarray
    stats: list = field(default_factory=list)
    coords_final: np.ndarray | None = None


def initial_condition(mesh: Mesh, coords0, basis_s: BasisSet,
                      sol: ExactSolution) -> np.ndarray:
    """Sample the exact solution at the spatial solution points at t = 0."""
    from stfr.geometry import eval_spatial_mapping, spatial_points

    xi, eta = spatial_points(basis_s, mesh.dim)
    v = eval_spatial_mapping(mesh.elem_corners(coords0), xi, eta)
    c = v["coords"]
    if mesh.dim == 1:
        return exact_state(sol, c[..., 0], t=0.0)
    return exact_state(sol, c[..., 0], c[..., 1], 0.0)


def march(mesh: Mesh, motion: MotionPrescription, eq: EquationSet,
          sol: ExactSolution, ks: int, kt: int, dt: float, n_steps: int,
          bc: ExactSolution | None = None,
          controls: PseudoControls | None = None,
          slab_callback=None) -> MarchResult:
    """March n_steps slabs from the exact initial condition at t = 0.

    bc supplies analytic boundary states where the mesh has dirichlet faces
    (defaults to `sol`).  slab_callback(field, geom, top) runs after each
    converged slab.
    """
    controls = controls or PseudoControls()
    bs, bt = make_basis(ks), make_basis(kt)
    path = motion_path(motion, mesh, dt, n_steps)
    inflow = initial_condition(mesh, path[0], bs, sol)
    if bc is None and len(mesh.dirichlet):
        bc = sol
    result = MarchResult(field=None, geom=None, top=inflow)
    for k in range(n_steps):
        fld, geom, top, stats = advance_slab(
            result.top, mesh, path[k], path[k + 1], dt, k * dt, eq,
            bs, bt, bc=bc, controls=controls, slab_index=k)
        result.field, result.geom, result.top = fld, geom, top
        result.stats.append(stats)
        if slab_callback is not None:
            slab_callback(fld, geom, top)
    result.coords_final = path[n_steps]
    return result


def temporal_amplification(kt: int, mu: complex) -> complex:
    """Amplification factor of one slab of the temporal scheme for the
    scalar ODE du/dtau = mu u on [-1, 1] (mu = lambda dt / 2).

    Assembled from the same tables the slab residual uses in its temporal
    direction (nodal derivative, causal bottom-face correction with g'_L,
    endpoint extrapolation), solved directly as a dense linear system.
    """
    b = make_basis(kt)
    n = b.n
    D = b.diff.astype(complex)
    gl = b.corr_deriv_left.astype(complex)
    ell_m = b.extrap_left.astype(complex)
    ell_p = b.extrap_right.astype(complex)
    A = D - np.outer(gl, ell_m) - mu * np.eye(n)
    rhs = -gl  # inflow value 1
    u = np.linalg.solve(A, rhs)
    return complex(ell_p @ u)
