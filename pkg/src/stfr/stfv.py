"""Desk-scale 1D space-time finite-volume reference schemes.

The explicit 2nd-order space-time FV step on a moving 1D mesh, the
finite-volume method-of-lines step it must coincide with, and the
Crank-Nicolson defect check for the implicit midpoint-flux variant on
stationary meshes.  Interfaces are periodic: interface i sits between
cells i-1 and i (mod n).
"""

from dataclasses import dataclass

import numpy as np


class CellInversionError(RuntimeError):
    """A cell's interfaces crossed during the step."""


@dataclass
class Fv1dState:
    """Cell averages plus interface coordinates at both time levels."""

    ubar: np.ndarray      # (n,)
    x_n: np.ndarray       # (n+1,) strictly increasing
    x_np1: np.ndarray     # (n+1,)
    dt: float

    def __post_init__(self):
        self.ubar = np.asarray(self.ubar, dtype=float)
        self.x_n = np.asarray(self.x_n, dtype=float)
        self.x_np1 = np.asarray(self.x_np1, dtype=float)
        if np.any(np.diff(self.x_n) <= 0) or np.any(np.diff(self.x_np1) <= 0):
            raise CellInversionError("interfaces must be strictly increasing "
                                     "at both time levels")
        if self.dt <= 0:
            raise ValueError("dt must be > 0")


def upwind_flux_rule(c: float = 1.0):
    """Explicit mesh-relative interface flux F = f(u*) - u* v_g for f = c u.

    The upwind state u* follows the sign of the relative speed c - v_g.
    """

    def rule(u_left, u_right, v_g):
        rel = c - v_g
        ustar = np.where(rel >= 0, u_left, u_right)
        return (c - v_g) * ustar

    return rule


def _interface_fluxes(state: Fv1dState, flux_rule):
    """Common fluxes at the n+1 interfaces (periodic neighbors)."""
    u = state.ubar
    v_g = (state.x_np1 - state.x_n) / state.dt
    u_left = np.concatenate([[u[-1]], u])     # cell left of interface i
    u_right = np.concatenate([u, [u[0]]])
    return flux_rule(u_left, u_right, v_g)


def stfv_step_explicit(state: Fv1dState, flux_rule=None) -> np.ndarray:
    """Explicit space-time FV update
    ubar^{n+1} (x~_2 - x~_1) = ubar^n (x_2 - x_1) - dt (F_2 - F_1)."""
    flux_rule = flux_rule or upwind_flux_rule()
    vol_new = np.diff(state.x_np1)
    if np.any(vol_new <= 0):
        raise CellInversionError("cell inversion at t + dt")
    F = _interface_fluxes(state, flux_rule)
    return (state.ubar * np.diff(state.x_n)
            - state.dt * (F[1:] - F[:-1])) / vol_new


def fvmol_step(state: Fv1dState, flux_rule=None) -> np.ndarray:
    """Forward-Euler FV method of lines on the moving mesh:
    d(ubar V)/dt + (F_2 - F_1) = 0 with V the cell volume."""
    flux_rule = flux_rule or upwind_flux_rule()
    V_n = np.diff(state.x_n)
    V_np1 = np.diff(state.x_np1)
    if np.any(V_np1 <= 0):
        raise CellInversionError("cell inversion at t + dt")
    F = _interface_fluxes(state, flux_rule)
    return (state.ubar * V_n - state.dt * (F[1:] - F[:-1])) / V_np1


def crank_nicolson_check(u_n, u_np1, dx: float, dt: float, c: float) -> float:
    """Defect of the stationary-mesh update with midpoint-averaged upwind
    fluxes f^{n+1/2} = (f^n + f^{n+1}) / 2; zero exactly when (u_n, u_np1)
    satisfy the Crank-Nicolson update of 1D upwind advection (periodic).

    Returns the max-norm defect of
    (u^{n+1} - u^n) dx + dt (F_{i+1}^{n+1/2} - F_i^{n+1/2}).
    """
    u_n = np.asarray(u_n, dtype=float)
    u_np1 = np.asarray(u_np1, dtype=float)

    def upwind(u):
        # interface i between cells i-1 and i; c > 0 takes the left value
        if c >= 0:
            return c * np.concatenate([[u[-1]], u])
        return c * np.concatenate([u, [u[0]]])

    F_half = 0.5 * (upwind(u_n) + upwind(u_np1))
    defect = (u_np1 - u_n) * dx + dt * (F_half[1:] - F_half[:-1])
    return float(np.max(np.abs(defect)))


def crank_nicolson_solve(u_n, dx: float, dt: float, c: float) -> np.ndarray:
    """Independent dense Crank-Nicolson solve for 1D upwind advection
    (periodic); oracle for crank_nicolson_check."""
    u_n = np.asarray(u_n, dtype=float)
    n = u_n.size
    r = c * dt / (2 * dx)
    A = np.eye(n)
    B = np.eye(n)
    for i in range(n):
        if c >= 0:
            A[i, i] += r
            A[i, (i - 1) % n] -= r
            B[i, i] -= r
            B[i, (i - 1) % n] += r
        else:
            A[i, (i + 1) % n] += r
            A[i, i] -= r
            B[i, (i + 1) % n] -= r
            B[i, i] += r
    return np.linalg.solve(A, B @ u_n)
