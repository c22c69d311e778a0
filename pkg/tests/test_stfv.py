import numpy as np
import pytest

from stfr.stfv import (
    CellInversionError,
    Fv1dState,
    crank_nicolson_check,
    crank_nicolson_solve,
    fvmol_step,
    stfv_step_explicit,
    upwind_flux_rule,
)


def test_state_validation():
    with pytest.raises(CellInversionError):
        Fv1dState(np.zeros(2), np.array([0.0, 0.5, 0.4]),
                  np.array([0.0, 0.5, 1.0]), 0.1)
    with pytest.raises(ValueError):
        Fv1dState(np.zeros(2), np.array([0.0, 0.5, 1.0]),
                  np.array([0.0, 0.5, 1.0]), -0.1)


def test_hand_checked_single_cell():
    # x = (0, 1) -> (0.1, 1.05), dt = 0.1, c = 1; prescribed upwind values
    # 1 at the left interface and 0 at the right
    st = Fv1dState(np.array([1.0]), np.array([0.0, 1.0]),
                   np.array([0.1, 1.05]), 0.1)

    def rule(u_l, u_r, v_g):
        ustar = np.array([1.0, 0.0])
        return (1.0 - v_g) * ustar

    out = stfv_step_explicit(st, rule)
    expect = (1.0 * 1.0 - 0.1 * ((0 * 1 - 0 * 0.5) - (1 * 1 - 1 * 1))) / 0.95
    assert out[0] == pytest.approx(expect, abs=1e-15)


def test_stationary_reduces_to_forward_euler_upwind():
    n, c, dt = 16, 1.0, 0.01
    x = np.linspace(0, 1, n + 1)
    u = np.sin(2 * np.pi * (x[:-1] + x[1:]) / 2)
    st = Fv1dState(u, x, x, dt)
    out = stfv_step_explicit(st, upwind_flux_rule(c))
    dx = 1.0 / n
    expect = u - (dt / dx) * (c * u - c * np.roll(u, 1))
    assert np.allclose(out, expect, atol=1e-15)


def test_constant_preserved_any_motion():
    rng = np.random.default_rng(0)
    x = np.linspace(0, 1, 9)
    pert = 0.02 * rng.uniform(-1, 1, 9)
    pert[0] = pert[-1] = 0.0
    st = Fv1dState(np.full(8, 3.3), x, x + pert, 0.05)
    assert np.abs(stfv_step_explicit(st) - 3.3).max() <= 1e-14
    assert np.abs(fvmol_step(st) - 3.3).max() <= 1e-14


def test_equivalence_200_random_cases():
    rng = np.random.default_rng(42)
    worst = 0.0
    count = 0
    while count < 200:
        n = int(rng.integers(2, 14))
        x = np.sort(rng.uniform(0, 1, n + 1))
        x[0], x[-1] = 0.0, 1.0
        if np.diff(x).min() < 0.01:
            continue
        pert = 0.3 * np.diff(x).min() * rng.uniform(-1, 1, n + 1)
        pert[0] = pert[-1] = 0.0
        st = Fv1dState(rng.standard_normal(n), x, x + pert,
                       float(rng.uniform(0.01, 0.2)))
        rule = upwind_flux_rule(float(rng.uniform(-2, 2)))
        a = stfv_step_explicit(st, rule)
        b = fvmol_step(st, rule)
        worst = max(worst, float(np.abs(a - b).max()))
        count += 1
    assert worst <= 1e-14


def test_mass_conserved_periodic():
    rng = np.random.default_rng(1)
    n = 12
    x = np.linspace(0, 1, n + 1)
    pert = 0.02 * rng.uniform(-1, 1, n + 1)
    pert[0] = pert[-1] = 0.0
    u = rng.standard_normal(n)
    st = Fv1dState(u, x, x + pert, 0.03)
    out = stfv_step_explicit(st)
    m0 = np.sum(u * np.diff(x))
    m1 = np.sum(out * np.diff(x + pert))
    assert abs(m1 - m0) <= 1e-14


def test_first_order_convergence_moving_mesh():
    from stfr.mesh import interval_mesh
    from stfr.motion import SineDeformation, motion_path
    from stfr.physics import SineWave1D, exact_state
    from stfr.basis import gauss_legendre

    presc = SineDeformation(amp=(0.1,), n=(4.0,), t_max=0.2)
    sol = SineWave1D(1.0)
    xq, wq = gauss_legendre(3)

    def cell_avg(interfaces, t):
        xl, xr = interfaces[:-1], interfaces[1:]
        mid, half = (xl + xr) / 2, (xr - xl) / 2
        pts = mid[:, None] + half[:, None] * xq
        return 0.5 * np.einsum("q,cq->c", wq, exact_state(sol, pts, t=t)[..., 0])

    errs = []
    for n in (64, 128, 256):
        mesh = interval_mesh(n)
        dt = 0.2 / (4 * n)  # CFL-limited explicit steps
        nst = int(round(0.2 / dt))
        path = motion_path(presc, mesh, dt, nst)
        u = cell_avg(path[0][:, 0], 0.0)
        for k in range(nst):
            st = Fv1dState(u, path[k][:, 0], path[k + 1][:, 0], dt)
            u = stfv_step_explicit(st)
        vols = np.diff(path[nst][:, 0])
        diff = u - cell_avg(path[nst][:, 0], 0.2)
        errs.append(np.sqrt(np.sum(vols * diff**2) / np.sum(vols)))
    p = np.log(errs[0] / errs[1]) / np.log(2)
    q = np.log(errs[1] / errs[2]) / np.log(2)
    assert abs(p - 1.0) <= 0.2 and abs(q - 1.0) <= 0.2


def test_cn_check_against_independent_solve():
    n, dx, dt, c = 32, 1 / 32, 0.04, 1.0
    x = (np.arange(n) + 0.5) * dx
    u0 = np.sin(2 * np.pi * x) + 0.3 * np.cos(4 * np.pi * x)
    u1 = crank_nicolson_solve(u0, dx, dt, c)
    assert crank_nicolson_check(u0, u1, dx, dt, c) <= 1e-13


def test_cn_check_rejects_inconsistent_pair():
    n, dx, dt, c = 16, 1 / 16, 0.05, 1.0
    x = (np.arange(n) + 0.5) * dx
    u0 = np.sin(2 * np.pi * x)
    assert crank_nicolson_check(u0, u0, dx, dt, c) > 1e-6


def test_cn_check_zero_field():
    assert crank_nicolson_check(np.zeros(8), np.zeros(8), 0.1, 0.05, 1.0) == 0.0


def test_cell_inversion_detected():
    st = Fv1dState(np.ones(2), np.array([0.0, 0.5, 1.0]),
                   np.array([0.0, 0.5, 1.0]), 0.1)
    st.x_np1 = np.array([0.6, 0.5, 1.0])  # mutate past validation
    with pytest.raises(CellInversionError):
        stfv_step_explicit(st)
