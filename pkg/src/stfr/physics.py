"""Equation sets, physical and space-time fluxes, Riemann solvers, and
exact solutions for error measurement.

All operations are pure functions over trailing state axes: arrays of shape
(..., n_vars) go in, matching shapes come out.
"""

import math
from dataclasses import dataclass

import numpy as np


class NonPhysicalStateError(RuntimeError):
    """Euler state with non-positive density or pressure."""


@dataclass(frozen=True)
class Advection1D:
    c: float = 1.0
    n_vars: int = 1
    dim: int = 1


@dataclass(frozen=True)
class Advection2D:
    c1: float = 0.5
    c2: float = 0.5
    n_vars: int = 1
    dim: int = 2


@dataclass(frozen=True)
class Euler2D:
    gamma: float = 1.4
    n_vars: int = 4
    dim: int = 2

    def __post_init__(self):
        if self.gamma <= 1:
            raise ValueError("Euler2D requires gamma > 1")


EquationSet = Advection1D | Advection2D | Euler2D


def euler_primitives(eq: Euler2D, Q):
    """(rho, u, v, p) from conservative variables; validates admissibility."""
    rho = Q[..., 0]
    if np.any(rho <= 0) or not np.all(np.isfinite(rho)):
        raise NonPhysicalStateError(f"non-positive density (min {rho.min():.3e})")
    u = Q[..., 1] / rho
    v = Q[..., 2] / rho
    p = (eq.gamma - 1.0) * (Q[..., 3] - 0.5 * rho * (u * u + v * v))
    if np.any(p <= 0) or not np.all(np.isfinite(p)):
        raise NonPhysicalStateError(f"non-positive pressure (min {p.min():.3e})")
    return rho, u, v, p


def flux(eq: EquationSet, Q):
    """Spatial flux components: f in 1D, (f, g) in 2D; shapes match Q."""
    Q = np.asarray(Q, dtype=float)
    if isinstance(eq, Advection1D):
        return eq.c * Q
    if isinstance(eq, Advection2D):
        return eq.c1 * Q, eq.c2 * Q
    rho, u, v, p = euler_primitives(eq, Q)
    rhoE = Q[..., 3]
    f = np.stack([rho * u, rho * u * u + p, rho * u * v, u * (rhoE + p)], axis=-1)
    g = np.stack([rho * v, rho * u * v, rho * v * v + p, v * (rhoE + p)], axis=-1)
    return f, g


def st_normal_flux(eq: EquationSet, Q, n_st):
    """Space-time normal flux n . F_st with F_st = (F(Q), Q).

    n_st has dim+1 components (n_x [, n_y], n_t) on the trailing axis.
    """
    Q = np.asarray(Q, dtype=float)
    n_st = np.asarray(n_st, dtype=float)
    if isinstance(eq, Advection1D):
        return (eq.c * n_st[..., 0] + n_st[..., 1])[..., None] * Q
    if isinstance(eq, Advection2D):
        speed = eq.c1 * n_st[..., 0] + eq.c2 * n_st[..., 1] + n_st[..., 2]
        return speed[..., None] * Q
    f, g = flux(eq, Q)
    return (n_st[..., 0:1] * f + n_st[..., 1:2] * g + n_st[..., 2:3] * Q)


def _roe_ale(eq: Euler2D, QL, QR, mx, my, vgn):
    """Roe flux of the mesh-relative normal flux F.m - vgn Q.

    Face-normal grid speed vgn shifts the eigenvalues; eigenvectors are the
    static ones.  No entropy fix (smooth test problems only).
    """
    gm = eq.gamma
    rhoL, uL, vL, pL = euler_primitives(eq, QL)
    rhoR, uR, vR, pR = euler_primitives(eq, QR)
    HL = (QL[..., 3] + pL) / rhoL
    HR = (QR[..., 3] + pR) / rhoR

    sL, sR = np.sqrt(rhoL), np.sqrt(rhoR)
    wL = sL / (sL + sR)
    wR = 1.0 - wL
    u = wL * uL + wR * uR
    v = wL * vL + wR * vR
    H = wL * HL + wR * HR
    a2 = (gm - 1.0) * (H - 0.5 * (u * u + v * v))
    if np.any(a2 <= 0):
        raise NonPhysicalStateError("Roe-average state has non-positive a^2")
    a = np.sqrt(a2)
    qn = u * mx + v * my

    dQ = QR - QL
    drho = dQ[..., 0]
    dp = pR - pL
    du = uR - uL
    dv = vR - vL
    dqn = du * mx + dv * my
    rho_bar = np.sqrt(rhoL * rhoR)
    # wave strengths
    a1 = (dp - rho_bar * a * dqn) / (2 * a2)
    a2w = drho - dp / a2
    a3 = (dp + rho_bar * a * dqn) / (2 * a2)
    # shear strength (tangential velocity jump)
    dut = du * (-my) + dv * mx

    lam1 = np.abs(qn - vgn - a)
    lam2 = np.abs(qn - vgn)
    lam3 = np.abs(qn - vgn + a)

    def col(*comps):
        return np.stack(comps, axis=-1)

    r1 = col(np.ones_like(u), u - a * mx, v - a * my, H - a * qn)
    r2 = col(np.ones_like(u), u, v, 0.5 * (u * u + v * v))
    r3 = col(np.ones_like(u), u + a * mx, v + a * my, H + a * qn)
    r4 = col(np.zeros_like(u), -my, mx, u * (-my) + v * mx)

    diss = (lam1[..., None] * a1[..., None] * r1
            + lam2[..., None] * (a2w[..., None] * r2
                                 + (rho_bar * dut)[..., None] * r4)
            + lam3[..., None] * a3[..., None] * r3)

    def phi(Q, rho, uu, vv, p):
        qnl = uu * mx + vv * my
        rel = qnl - vgn
        return col(rho * rel,
                   Q[..., 1] * rel + p * mx,
                   Q[..., 2] * rel + p * my,
                   Q[..., 3] * rel + p * qnl)

    return 0.5 * (phi(QL, rhoL, uL, vL, pL) + phi(QR, rhoR, uR, vR, pR)) - 0.5 * diss


def common_flux(eq: EquationSet, QL, QR, n_st):
    """Single-valued interface flux for a unit space-time normal.

    Advection: exact upwind on the space-time characteristic speed.
    Euler: Roe in the frame of the face (grid speed from the temporal
    normal component), plus the n_t Q convective part; reduces to the
    standard static Roe flux when n_t = 0.
    """
    QL = np.asarray(QL, dtype=float)
    QR = np.asarray(QR, dtype=float)
    n_st = np.asarray(n_st, dtype=float)
    if isinstance(eq, Advection1D):
        lam = eq.c * n_st[..., 0] + n_st[..., 1]
        return (np.maximum(lam, 0.0)[..., None] * QL
                + np.minimum(lam, 0.0)[..., None] * QR)
    if isinstance(eq, Advection2D):
        lam = eq.c1 * n_st[..., 0] + eq.c2 * n_st[..., 1] + n_st[..., 2]
        return (np.maximum(lam, 0.0)[..., None] * QL
                + np.minimum(lam, 0.0)[..., None] * QR)
    ns = np.sqrt(n_st[..., 0] ** 2 + n_st[..., 1] ** 2)
    if np.any(ns < 1e-14):
        raise ValueError("Euler common flux needs a spatial normal component; "
                         "temporal faces use causal upwinding")
    mx = n_st[..., 0] / ns
    my = n_st[..., 1] / ns
    vgn = -n_st[..., 2] / ns
    return ns[..., None] * _roe_ale(eq, QL, QR, mx, my, vgn)


# ---------------------------------------------------------------------------
# exact solutions


@dataclass(frozen=True)
class SineWave1D:
    """u(x, t) = sin(2 pi (x - c t))."""

    c: float = 1.0


@dataclass(frozen=True)
class SineWave2D:
    """u(x, y, t) = sin(2 pi (x - c1 t)) sin(2 pi (y - c2 t))."""

    c1: float = 0.5
    c2: float = 0.5


@dataclass(frozen=True)
class IsentropicVortex:
    """Advecting isentropic vortex of the 2D Euler equations.

    `period` wraps the vortex center on a periodic square of that extent,
    so states near a wrapped boundary stay consistent with periodic runs.
    """

    U0: float = 0.5
    V0: float = 0.5
    u_max: float = 0.25
    b: float = 0.2
    gamma: float = 1.4
    period: float | None = None


@dataclass(frozen=True)
class Constant:
    """Uniform state, for free-stream preservation runs."""

    value: tuple = (1.0,)


ExactSolution = SineWave1D | SineWave2D | IsentropicVortex | Constant


def exact_state(sol: ExactSolution, x, y=None, t: float = 0.0):
    """Conservative variables of the exact solution at (x[, y], t).

    Returns shape x.shape + (n_vars,).
    """
    x = np.asarray(x, dtype=float)
    if isinstance(sol, SineWave1D):
        return np.sin(2 * np.pi * (x - sol.c * t))[..., None]
    if isinstance(sol, SineWave2D):
        return (np.sin(2 * np.pi * (x - sol.c1 * t))
                * np.sin(2 * np.pi * (np.asarray(y, dtype=float) - sol.c2 * t)))[..., None]
    if isinstance(sol, Constant):
        val = np.asarray(sol.value, dtype=float)
        return np.broadcast_to(val, x.shape + (val.size,)).copy()
    y = np.asarray(y, dtype=float)
    dx = x - sol.U0 * t
    dy = y - sol.V0 * t
    if sol.period is not None:
        L = sol.period
        dx = (dx + L / 2) % L - L / 2
        dy = (dy + L / 2) % L - L / 2
    r = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)
    gm = sol.gamma
    core = 1.0 - 0.5 * (gm - 1.0) * sol.u_max**2 * np.exp(1.0 - r**2 / sol.b**2)
    rho = core ** (1.0 / (gm - 1.0))
    p = core ** (gm / (gm - 1.0)) / gm
    swirl = (sol.u_max / sol.b) * r * np.exp(0.5 * (1.0 - r**2 / sol.b**2))
    u = sol.U0 - swirl * np.sin(theta)
    v = sol.V0 + swirl * np.cos(theta)
    rhoE = p / (gm - 1.0) + 0.5 * rho * (u * u + v * v)
    return np.stack([rho, rho * u, rho * v, rhoE], axis=-1)


def exact_for(eq: EquationSet, kind: str = "sine_wave", **params) -> ExactSolution:
    """Pick the exact solution matching the equation set."""
    if kind == "constant":
        default = (1.0,) if eq.n_vars == 1 else (1.0, 0.5, 0.5, 1.0 / (1.4 - 1) + 0.25)
        return Constant(tuple(params.get("value", default)))
    if isinstance(eq, Advection1D):
        return SineWave1D(c=eq.c)
    if isinstance(eq, Advection2D):
        return SineWave2D(c1=eq.c1, c2=eq.c2)
    return IsentropicVortex(gamma=eq.gamma, **params)
