import numpy as np
import pytest

from stfr.basis import make_basis
from stfr.geometry import spatial_quadrature_data
from stfr.mesh import interval_mesh, rect_mesh
from stfr.motion import (
    RigidOscillation,
    SineDeformation,
    Stationary,
    motion_path,
)
from stfr.physics import (
    Advection1D,
    Advection2D,
    Constant,
    SineWave1D,
    SineWave2D,
    exact_state,
)
from stfr.mol_solver import (
    MolField,
    grid_velocity_step,
    march_mol,
    mol_residual,
    mol_stable_dt,
    rk3_physical_step,
)
from stfr.analysis import l2_error_nodal
from stfr.timestepping import ssp_rk3_step


def test_grid_velocity_trivia():
    c0 = np.array([[0.5], [1.0]])
    c1 = np.array([[0.52], [1.02]])
    v = grid_velocity_step(c0, c1, 0.1)
    assert np.allclose(v, 0.2)
    assert np.allclose(grid_velocity_step(c0, c0, 0.1), 0.0)
    with pytest.raises(ValueError):
        grid_velocity_step(c0, c1, 0.0)


def test_freestream_any_velocity_field():
    m = rect_mesh(5, 5)
    rng = np.random.default_rng(2)
    vel = 0.3 * rng.standard_normal(m.nodes.shape)
    fld = MolField(np.full((25, 9, 1), 4.0), ks=2, t=0.0, coords=m.nodes)
    r = mol_residual(fld, m, vel, Advection2D())
    assert np.abs(r).max() <= 1e-12


def _static_fr_residual_1d(u, ks, n_elems, h, c):
    """Independent 1D static upwind FR residual, plain loops."""
    b = make_basis(ks)
    D, gl, gr = b.diff, b.corr_deriv_left, b.corr_deriv_right
    el, er = b.extrap_left, b.extrap_right
    out = np.zeros_like(u)
    for e in range(n_elems):
        du = D @ u[e]
        uin = er @ u[(e - 1) % n_elems]  # upwind trace for c > 0
        corr = (c * uin - c * (el @ u[e])) * gl
        out[e] = -(2.0 / h) * (c * du + corr)
    return out


def test_static_mesh_matches_independent_fr_1d():
    n, ks, c = 7, 3, 1.0
    m = interval_mesh(n)
    rng = np.random.default_rng(8)
    u = rng.standard_normal((n, ks + 1, 1))
    fld = MolField(u, ks=ks, t=0.0, coords=m.nodes)
    r = mol_residual(fld, m, np.zeros_like(m.nodes), Advection1D(c))
    oracle = _static_fr_residual_1d(u[..., 0], ks, n, 1.0 / n, c)
    assert np.abs(r[..., 0] - oracle).max() <= 1e-13


def _static_fr_residual_2d(u4, ks, nx, ny, hx, hy, c1, c2):
    """Independent 2D static upwind FR residual on a uniform periodic grid."""
    b = make_basis(ks)
    D, gl, gr = b.diff, b.corr_deriv_left, b.corr_deriv_right
    el, er = b.extrap_left, b.extrap_right
    n1 = ks + 1
    out = np.zeros_like(u4)
    for ey in range(ny):
        for ex in range(nx):
            ue = u4[ey, ex]  # (ny_pts, nx_pts)
            dudx = ue @ D.T
            dudy = D @ ue
            # upwind inflow traces (c1, c2 > 0: from the left/south)
            left = u4[ey, (ex - 1) % nx] @ er
            south = el @ ue
            north_in = er @ u4[(ey - 1) % ny, ex]
            corr = np.zeros_like(ue)
            corr += c1 * np.outer(np.ones(n1), gl) * (left - ue @ el)[:, None]
            corr += c2 * np.outer(gl, np.ones(n1)) * (north_in - south)[None, :]
            out[ey, ex] = -(2.0 / hx) * c1 * dudx - (2.0 / hy) * c2 * dudy \
                - (2.0 / hx) * corr * 0  # placeholder, assembled below
            out[ey, ex] = -(c1 * dudx * (2 / hx) + c2 * dudy * (2 / hy)
                            + (2 / hx) * c1 * np.outer(np.ones(n1), gl)
                            * (left - ue @ el)[:, None]
                            + (2 / hy) * c2 * np.outer(gl, np.ones(n1))
                            * (north_in - south)[None, :])
    return out


def test_static_mesh_matches_independent_fr_2d():
    nx = ny = 3
    ks, c1, c2 = 2, 0.5, 0.5
    m = rect_mesh(nx, ny)
    rng = np.random.default_rng(12)
    n1 = ks + 1
    u = rng.standard_normal((nx * ny, n1 * n1, 1))
    fld = MolField(u, ks=ks, t=0.0, coords=m.nodes)
    r = mol_residual(fld, m, np.zeros_like(m.nodes), Advection2D(c1, c2))
    u4 = u[..., 0].reshape(ny, nx, n1, n1)
    oracle = _static_fr_residual_2d(u4, ks, nx, ny, 1 / nx, 1 / ny, c1, c2)
    r4 = r[..., 0].reshape(ny, nx, n1, n1)
    assert np.abs(r4 - oracle).max() <= 1e-13


def test_galilean_frame_shift_identity():
    # ALE residual with uniform V and speed c equals the static residual
    # with speed c - V on the same nodal data
    m = rect_mesh(4, 4)
    rng = np.random.default_rng(3)
    u = rng.standard_normal((16, 9, 1))
    V = np.array([0.3, -0.2])
    vel = np.tile(V, (m.n_nodes, 1))
    fld = MolField(u, ks=2, t=0.0, coords=m.nodes)
    r_ale = mol_residual(fld, m, vel, Advection2D(0.5, 0.5))
    r_static = mol_residual(fld, m, np.zeros_like(vel),
                            Advection2D(0.5 - 0.3, 0.5 + 0.2))
    assert np.abs(r_ale - r_static).max() <= 1e-12


def test_rk3_step_frozen_residual():
    rng = np.random.default_rng(1)
    u = rng.standard_normal((5, 4))
    r = rng.standard_normal((5, 4))
    out = ssp_rk3_step(u, lambda w, t: r, 0.2)
    assert np.allclose(out, u + 0.2 * r, atol=1e-14)


def test_freestream_deforming_100_steps():
    m = rect_mesh(6, 6)
    res = march_mol(m, SineDeformation(), Advection2D(), Constant((1.0,)),
                    ks=2, dt=0.002, n_steps=100)
    assert np.abs(res.field.values - 1.0).max() <= 1e-11


def test_freestream_rigid_oscillation():
    m = rect_mesh(4, 4)
    res = march_mol(m, RigidOscillation(), Advection2D(), Constant((1.0,)),
                    ks=3, dt=0.001, n_steps=50)
    assert np.abs(res.field.values - 1.0).max() <= 1e-11


def test_temporal_order_three():
    m = interval_mesh(12)
    sol = SineWave1D(1.0)
    errs = []
    for dt in (1 / 192, 1 / 384, 1 / 768):
        res = march_mol(m, Stationary(), Advection1D(1.0), sol, ks=5,
                        dt=dt, n_steps=int(round(1 / dt)))
        errs.append(l2_error_nodal(res.field.values, 5, m, res.coords_final,
                                   sol, 1.0))
    p = np.log(errs[0] / errs[1]) / np.log(2)
    q = np.log(errs[1] / errs[2]) / np.log(2)
    assert abs(p - 3.0) <= 0.2 and abs(q - 3.0) <= 0.2


@pytest.mark.parametrize("dt", [0.004, 0.002])
def test_conservation_on_moving_mesh(dt):
    # stage-frozen velocities with per-stage metrics make the RK3 stage
    # quadrature (Simpson) exact for the linear-geometry flux balance, so
    # mass drift sits at round-off; asserting 1e-12 subsumes the nominal
    # third-order-shrink expectation
    m = interval_mesh(10)
    presc = SineDeformation(amp=(0.1,), n=(4.0,))
    sol = SineWave1D(1.0)
    n = int(round(0.2 / dt))
    path = motion_path(presc, m, dt, n)
    masses = []

    def cb(fld):
        k = round(fld.t / dt)
        w, js, _, interp = spatial_quadrature_data(m, path[k], fld.ks,
                                                   fld.ks + 2)
        uq = np.einsum("qs,esv->eqv", interp, fld.values)
        masses.append(float(np.einsum("q,eq->", w, js * uq[..., 0])))

    march_mol(m, presc, Advection1D(1.0), sol, ks=3, dt=dt, n_steps=n,
              step_callback=cb)
    drift = np.abs(np.array(masses) - masses[0]).max()
    assert drift <= 1e-12


def test_mol_stable_dt_reasonable():
    m = interval_mesh(12)
    dt = mol_stable_dt(m, m.nodes, Advection1D(1.0), 5)
    assert 0 < dt < 0.01


def test_rk3_rejects_bad_dt():
    m = interval_mesh(4)
    fld = MolField(np.zeros((4, 3, 1)), ks=2, t=0.0, coords=m.nodes)
    with pytest.raises(ValueError):
        rk3_physical_step(fld, m, m.nodes, 0.0, Advection1D(1.0))
