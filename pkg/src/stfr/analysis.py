"""Error norms, observed-order computation, spectral-slope extraction,
and convergence-report serialization.

Both L2 norms are volume-normalized: the final-time norm interpolates the
slab to its top face and integrates the squared pointwise error over the
deformed spatial domain; the slab norm integrates over the full space-time
slab.  Quadrature uses k+2 Gauss points per direction, enough that the
reported values are insensitive to further refinement for the smooth
fields measured here.
"""

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from stfr.basis import make_basis
from stfr.geometry import SlabGeometry, spatial_quadrature_data, st_quadrature_data
from stfr.mesh import Mesh
from stfr.physics import ExactSolution, exact_state
from stfr.st_solver import StateField


def l2_error_nodal(values: np.ndarray, ks: int, mesh: Mesh,
                   coords: np.ndarray, sol: ExactSolution, t: float,
                   n_q: int | None = None) -> float:
    """Volume-normalized spatial L2 error of nodal values (nE, nS, nV) on
    the mesh at position `coords`; first conservative variable."""
    n_q = n_q or ks + 2
    w, js, xq, interp = spatial_quadrature_data(mesh, coords, ks, n_q)
    uq = np.einsum("qs,esv->eqv", interp, values)
    if mesh.dim == 1:
        ue = exact_state(sol, xq[..., 0], t=t)
    else:
        ue = exact_state(sol, xq[..., 0], xq[..., 1], t)
    diff2 = (uq[..., 0] - ue[..., 0]) ** 2
    num = float(np.einsum("q,eq->", w, js * diff2))
    vol = float(np.einsum("q,eq->", w, js))
    return math.sqrt(num / vol)


def l2_error_final(fld: StateField, geom: SlabGeometry, mesh: Mesh,
                   coords_final: np.ndarray, sol: ExactSolution,
                   t_final: float, n_q: int | None = None) -> float:
    """Volume-normalized L2 error of the slab's top-face interpolant at
    t_final, measured on the deformed mesh; first conservative variable."""
    bt = make_basis(fld.kt)
    top = np.einsum("t,etsv->esv", bt.extrap_right, fld.values)
    return l2_error_nodal(top, fld.ks, mesh, coords_final, sol, t_final, n_q)


def l2_error_slab(fld: StateField, geom: SlabGeometry, sol: ExactSolution,
                  n_q: int | None = None) -> float:
    """Volume-normalized L2 error over the space-time slab."""
    n_q = n_q or max(fld.ks, fld.kt) + 2
    w, jac, coords, interp = st_quadrature_data(geom, n_q)
    nE = fld.values.shape[0]
    uq = np.einsum("qp,epv->eqv",
                   interp, fld.values.reshape(nE, -1, fld.values.shape[-1]))
    if geom.dim == 1:
        ue = exact_state(sol, coords[..., 0], t=coords[..., 1])
    else:
        ue = exact_state(sol, coords[..., 0], coords[..., 1], coords[..., 2])
    diff2 = (uq[..., 0] - ue[..., 0]) ** 2
    num = float(np.einsum("q,eq->", w, jac * diff2))
    vol = float(np.einsum("q,eq->", w, jac))
    return math.sqrt(num / vol)


def observed_orders(errors, sizes):
    """order_i = log(E_{i-1}/E_i) / log(s_{i-1}/s_i); NaN where undefined.

    First entry is NaN (no previous row); non-positive errors give NaN.
    """
    errors = np.asarray(errors, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    if errors.size != sizes.size or errors.size < 2:
        raise ValueError("need matching errors/sizes of length >= 2")
    if not (np.all(np.diff(sizes) > 0) or np.all(np.diff(sizes) < 0)):
        raise ValueError("sizes must be strictly monotone")
    out = np.full(errors.size, np.nan)
    for i in range(1, errors.size):
        if errors[i - 1] > 0 and errors[i] > 0:
            out[i] = math.log(errors[i - 1] / errors[i]) / math.log(
                sizes[i - 1] / sizes[i])
    return out


def spectral_slope(errors, degrees=None) -> float:
    """Least-squares slope of log10(E_m) against the nominal order m.

    Superconvergent behavior E_m ~ C (dt)^(2m-1) predicts a slope of
    2 log10(dt); see spectral_slope_prediction.
    """
    errors = np.asarray(errors, dtype=float)
    if errors.size < 2:
        raise ValueError("need at least 2 error values")
    if degrees is None:
        degrees = np.arange(2, 2 + errors.size, dtype=float)
    else:
        degrees = np.asarray(degrees, dtype=float)
    A = np.stack([degrees, np.ones_like(degrees)], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.log10(errors), rcond=None)
    return float(coef[0])


def spectral_slope_prediction(dt: float) -> float:
    """Optimal spectral slope 2 log10(dt) for a superconvergent scheme."""
    return 2.0 * math.log10(dt)


@dataclass
class ReportRow:
    resolution: float
    error_final: float
    error_slab: float
    order_final: float = math.nan
    order_slab: float = math.nan
    walltime_s: float = 0.0


@dataclass
class ConvergenceReport:
    """Rows of a refinement sweep plus case metadata."""

    case: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)

    def add(self, resolution, error_final, error_slab, walltime_s=0.0):
        row = ReportRow(resolution=float(resolution),
                        error_final=float(error_final),
                        error_slab=float(error_slab),
                        walltime_s=float(walltime_s))
        if self.rows:
            prev = self.rows[-1]
            ratio = math.log(prev.resolution / row.resolution)
            if ratio != 0:
                if prev.error_final > 0 and row.error_final > 0:
                    row.order_final = math.log(
                        prev.error_final / row.error_final) / ratio
                if prev.error_slab > 0 and row.error_slab > 0:
                    row.order_slab = math.log(
                        prev.error_slab / row.error_slab) / ratio
        self.rows.append(row)
        return row

    @property
    def errors_final(self):
        return [r.error_final for r in self.rows]

    @property
    def errors_slab(self):
        return [r.error_slab for r in self.rows]

    @property
    def orders_final(self):
        return [r.order_final for r in self.rows]

    @property
    def orders_slab(self):
        return [r.order_slab for r in self.rows]

    def to_csv(self, path: str) -> None:
        if not self.rows:
            raise ValueError("empty report")

        def fmt(v, spec):
            return "" if math.isnan(v) else format(v, spec)

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["resolution", "error_final", "error_slab",
                        "order_final", "order_slab", "walltime_s"])
            for r in self.rows:
                w.writerow([f"{r.resolution:.12g}",
                            fmt(r.error_final, ".12e"),
                            fmt(r.error_slab, ".12e"),
                            fmt(r.order_final, ".4f"),
                            fmt(r.order_slab, ".4f"),
                            f"{r.walltime_s:.3f}"])

    def to_plot_data(self, path: str) -> None:
        """Two-column log10(resolution) vs log10(error_final) file."""
        if not self.rows:
            raise ValueError("empty report")
        with open(path, "w") as fh:
            for r in self.rows:
                if r.error_final > 0:
                    fh.write(f"{math.log10(r.resolution):.8f} "
                             f"{math.log10(r.error_final):.8f}\n")


def write_spectral_data(path: str, degrees, errors) -> None:
    """Degree vs log10(error) file for spectral-convergence plots."""
    degrees = np.asarray(degrees, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if degrees.size == 0:
        raise ValueError("empty spectral data")
    with open(path, "w") as fh:
        for m, e in zip(degrees, errors):
            fh.write(f"{m:.4f} {math.log10(e):.8f}\n")


class Stopwatch:
    """Wall-time measurement for report rows."""

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0
        return False
