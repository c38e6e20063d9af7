import numpy as np
import numpy.testing as npt
import pytest
from scipy.linalg import expm

from slhnet import (
    SLH,
    ClassicalLinearSystem,
    ClassicalSystemError,
    Grid,
    Registry,
    c_concatenate,
    c_series,
    classical_generator,
    dmz_filter,
    embed_sde_grid,
    embedded_generator,
    evolve_zakai,
    normalized,
    series,
)
from slhnet.classical import euler_maruyama
from slhnet.dynamics import reference_record


def random_system(rng, nx, nu, ny):
    A = rng.normal(size=(nx, nx)) - 2 * np.eye(nx)
    return ClassicalLinearSystem(A, rng.normal(size=(nx, nu)), rng.normal(size=(ny, nx)), rng.normal(size=(ny, nu)))


def test_transfer_function_products():
    rng = np.random.default_rng(0)
    g1, g2 = random_system(rng, 3, 2, 2), random_system(rng, 2, 2, 1)
    ser, con = c_series(g2, g1), c_concatenate(g1, g2)
    for s in rng.normal(size=5) + 1j * rng.normal(size=5):
        npt.assert_allclose(ser.transfer(s), g2.transfer(s) @ g1.transfer(s), atol=1e-10)
        blk = np.zeros((3, 4), complex)
        blk[:2, :2], blk[2:, 2:] = g1.transfer(s), g2.transfer(s)
        npt.assert_allclose(con.transfer(s), blk, atol=1e-10)


def test_series_dimension_check_and_gain():
    rng = np.random.default_rng(1)
    with pytest.raises(ClassicalSystemError):
        c_series(random_system(rng, 2, 3, 1), random_system(rng, 2, 1, 2))
    k = ClassicalLinearSystem.gain([[2.0]])
    assert k.n_states == 0
    npt.assert_allclose(k.transfer(1j), [[2.0]])


def ou(sigma=0.7):
    return (lambda x: -x), (lambda x: sigma + 0 * x)


def test_generator_is_second_order_accurate():
    ft, g = ou()
    phi = lambda x: np.exp(-x**2)
    exact = lambda x: -x * (-2 * x * phi(x)) + 0.5 * 0.49 * (4 * x**2 - 2) * phi(x)
    errs = []
    for n in (41, 81, 161):
        grid = Grid(-6, 6, n)
        emb = embed_sde_grid(grid, ft, g, lambda x: x, registry=Registry())
        inner = np.abs(grid.x) <= 3
        errs.append(np.abs(embedded_generator(emb, phi) - exact(grid.x))[inner].max())
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    npt.assert_allclose(ratios, 4.0, rtol=0.2)


def test_embedded_and_classical_generators_agree_inside():
    grid = Grid(-5, 5, 61)
    ft = lambda x: -x + 0.3 * np.sin(x)
    g = lambda x: 0.5 + 0.2 * np.cos(x)
    emb = embed_sde_grid(grid, ft, g, lambda x: x, registry=Registry())
    phi = lambda x: np.exp(-x**2 / 2)
    inner = emb.interior(3)
    diff = embedded_generator(emb, phi) - classical_generator(ft, g, grid)(phi)
    assert np.abs(diff[inner]).max() < 0.05


def test_boundary_non_hermiticity_is_confined():
    grid = Grid(-4, 4, 21)
    emb = embed_sde_grid(grid, lambda x: -x, 0.5, lambda x: x, registry=Registry())
    H = emb.H_c.data
    defect = np.abs(H - H.conj().T)
    assert emb.hermiticity_defect > 0
    assert defect[2:-2, 2:-2].max() < 1e-12


def test_only_the_real_quadrature_drives_the_diffusion():
    reg = Registry()
    grid = Grid(-5, 5, 41)
    emb = embed_sde_grid(grid, lambda x: -x, 0.6, 0.0, registry=reg)
    phi = np.exp(-grid.x**2)
    base = SLH([[1]], [emb.L_c1], emb.H_c, validate=False)
    inner = emb.interior(3)

    def drift(c):
        g = series(base, SLH([[1]], [c], 0))
        from slhnet import heisenberg_generator
        return (heisenberg_generator(g, emb.function(phi)).data @ np.ones(grid.points)).real

    plain = drift(0.0)
    npt.assert_allclose(drift(0.4j)[inner], plain[inner], atol=1e-12)
    dphi = np.gradient(phi, grid.x)
    shift = drift(0.4)[inner] - plain[inner]
    npt.assert_allclose(shift, 2 * 0.4 * 0.6 * dphi[inner], atol=0.02)


def test_euler_maruyama_matches_backward_kolmogorov():
    """E[phi(x_T)] from Monte Carlo versus exp(T A) phi with A the embedded generator."""
    grid = Grid(-6, 6, 81)
    ft, g = ou(0.7)
    emb = embed_sde_grid(grid, ft, g, 0.0, registry=Registry())
    A = np.column_stack([embedded_generator(emb, e) for e in np.eye(grid.points)])
    phi = np.exp(-grid.x**2)
    T, x0 = 0.5, 0.5
    u = expm(T * A) @ phi
    oracle = np.interp(x0, grid.x, u)
    # closed form: x_T is Gaussian with mean x0 e^{-T}, variance s^2 (1 - e^{-2T}) / 2
    m, v = x0 * np.exp(-T), 0.49 * (1 - np.exp(-2 * T)) / 2
    assert oracle == pytest.approx(np.exp(-m**2 / (1 + 2 * v)) / np.sqrt(1 + 2 * v), abs=3e-3)
    xs = euler_maruyama(ft, g, x0, 1e-3, 500, 20000, np.random.default_rng(2))
    vals = np.exp(-xs**2)
    se = vals.std() / np.sqrt(len(vals))
    assert abs(vals.mean() - oracle) < 4 * se + 5e-3


def test_quantum_filter_matches_grid_dmz():
    grid = Grid(-5, 5, 31)
    ft, g = ou(0.7)
    h = lambda x: x
    emb = embed_sde_grid(grid, ft, g, h, registry=Registry())
    psi = np.exp(-((grid.x - 1) ** 2) / (4 * 0.3**2))
    psi /= np.linalg.norm(psi)
    dt, T = 1e-3, 0.3
    dy = 0.2 * dt + reference_record(dt, T, seed=4)
    q = evolve_zakai(emb.triple, 1, np.outer(psi, psi), dy, dt, {"x": emb.q})
    p = dmz_filter(ft, g, h, grid, psi**2, dy, dt)
    mean_dmz = p @ grid.x / p.sum(axis=1)
    err = np.abs(normalized(q)["x"].real - mean_dmz).max()
    assert err < 0.2
