"""Moment projections, Burnett functions, weighted norms and decay fits.

Oracle notes
------------
The Burnett normalization <B_1, B_1> = 1 is checked against the closed-form
Gaussian moments int v1^2 |v|^2 mu = 5, int v1^2 |v|^4 mu = 35, so
(35 - 2*5*5 + 25*1)/10 = 1.  The nu-weighted norm of sqrt(mu) is checked
against a 1-D radial quadrature of nu(r) done with scipy, independent of the
velocity lattice.  The boundary seminorm is cross-checked by a second
implementation built from the wall projection operator.
"""

import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy import integrate

from kinetic_slab.boundary import pgamma_project
from kinetic_slab.collision import GridMismatch, collision_frequency
from kinetic_slab.diagnostics import (
    DecayReport,
    IndexOutOfRange,
    MissingSnapshots,
    NonPositiveNorm,
    WindowTooSmall,
    burnett,
    fit_decay,
    moments,
    weak_form_residual,
    weighted_norms,
)


def _mesh(nx1=6, nx2=4, L=1.0, H=2.0):
    dx1 = 2.0 * L / nx1
    dx2 = H / nx2
    return SimpleNamespace(dx1=dx1, dx2=dx2, cell_volume=dx1 * dx2,
                           nx1=nx1, nx2=nx2)


# ------------------------------------------------------------------ moments


def test_moments_of_invariants_are_unit_coefficients(grid12):
    chi = grid12.chi_basis()
    mom = moments(chi[:, 0], grid12)
    eps = 5e-3
    assert abs(mom.a - 1.0) < eps
    assert np.all(np.abs(mom.b) < eps)
    assert abs(mom.c) < eps
    mom4 = moments(chi[:, 4], grid12)
    assert abs(mom4.c - 1.0) < eps
    assert abs(mom4.a) < eps


def test_moments_batch_shapes_and_linearity(grid8, rng):
    f = rng.standard_normal((grid8.n_nodes, 5, 3))
    g = rng.standard_normal((grid8.n_nodes, 5, 3))
    mf, mg, msum = moments(f, grid8), moments(g, grid8), moments(f + g, grid8)
    assert mf.a.shape == (5, 3) and mf.b.shape == (3, 5, 3)
    np.testing.assert_allclose(msum.a, mf.a + mg.a, rtol=0, atol=1e-12)
    np.testing.assert_allclose(msum.b, mf.b + mg.b, rtol=0, atol=1e-12)
    np.testing.assert_allclose(msum.c, mf.c + mg.c, rtol=0, atol=1e-12)


# ------------------------------------------------------------------ burnett


def test_burnett_a12_orthogonal_to_invariants(grid12):
    # every invariant pairing is odd in v1 or v2, so the lattice sum
    # vanishes identically, not just to quadrature accuracy
    a12 = burnett("A", 1, 0, grid=grid12)
    chi = grid12.chi_basis()
    ips = (chi.T * grid12.weights) @ a12
    assert np.max(np.abs(ips)) < 1e-13


def test_burnett_trace_free(grid8):
    total = sum(burnett("A", i, i, grid=grid8) for i in range(3))
    assert np.max(np.abs(total)) < 1e-12


def test_burnett_b_normalization(grid12, grid16):
    # continuum value <B_1, B_1> = 1 from Gaussian moments; the lattice sum
    # approaches it as the lattice refines
    errs = []
    for g in (grid12, grid16):
        b1 = burnett("B", 0, grid=g)
        errs.append(abs(float(np.sum(b1 * b1 * g.weights)) - 1.0))
    assert errs[-1] < 5e-3
    assert errs[1] <= errs[0] + 1e-12


def test_burnett_bad_indices_raise(grid8):
    with pytest.raises(IndexOutOfRange):
        burnett("A", 3, 0, grid=grid8)
    with pytest.raises(IndexOutOfRange):
        burnett("A", 0, None, grid=grid8)
    with pytest.raises(IndexOutOfRange):
        burnett("B", -1, grid=grid8)
    with pytest.raises(IndexOutOfRange):
        burnett("C", 0, 0, grid=grid8)


# ------------------------------------------------------------------- norms


def test_weighted_norms_zero_field(grid8):
    out = weighted_norms(np.zeros(grid8.n_nodes), grid8)
    assert out == (0.0, 0.0, 0.0, 0.0)


def test_weighted_norms_grid_mismatch(grid8):
    with pytest.raises(GridMismatch):
        weighted_norms(np.zeros(10), grid8)


def test_weighted_norms_of_sqrt_mu(grid12):
    f = grid12.sqrt_mu
    l2, linf_w, l2_nu, _ = weighted_norms(f, grid12, theta=0.125)
    assert abs(l2 - 1.0) < 5e-3

    # sup of e^{theta |v|^2} sqrt(mu) sits at the node closest to the origin
    h = grid12.h
    expected_sup = (2 * np.pi) ** (-0.75) * math.exp((0.125 - 0.25) * 0.75 * h * h)
    assert abs(linf_w - expected_sup) < 1e-12

    # independent radial quadrature of int nu mu dv
    val, _ = integrate.quad(
        lambda r: collision_frequency(np.array([r, 0.0, 0.0]))
        * 4 * np.pi * r * r * (2 * np.pi) ** -1.5 * np.exp(-r * r / 2),
        0, 12)
    assert abs(l2_nu**2 - val) / val < 5e-3


def test_weighted_norms_uniform_cell_volume(grid8):
    mesh = _mesh(nx1=6, nx2=4, L=1.5, H=2.0)
    chi0 = grid8.chi_basis()[:, 0]
    f = np.broadcast_to(chi0[:, None, None], (grid8.n_nodes, 6, 4)).copy()
    l2, _, _, _ = weighted_norms(f, grid8, mesh)
    area = 2 * 1.5 * 2.0
    norm_chi0 = math.sqrt(float(np.sum(chi0**2 * grid8.weights)))
    assert abs(l2 - norm_chi0 * math.sqrt(area)) < 1e-12


def test_boundary_seminorm_kills_wall_maxwellian(grid12):
    mesh = _mesh()
    f = np.broadcast_to(grid12.sqrt_mu[:, None, None],
                        (grid12.n_nodes, mesh.nx1, mesh.nx2)).copy()
    *_, bdry = weighted_norms(f, grid12, mesh)
    assert bdry < 1e-12


def test_boundary_seminorm_against_projection_operator(grid12, rng):
    mesh = _mesh(nx1=5, nx2=3)
    f = rng.standard_normal((grid12.n_nodes, mesh.nx1, mesh.nx2))
    *_, bdry = weighted_norms(f, grid12, mesh)

    total = 0.0
    for side, normal in ((0, np.array([0.0, -1.0, 0.0])),
                         (-1, np.array([0.0, 1.0, 0.0]))):
        comp = normal[1] * grid12.nodes[:, 1]
        out = comp > 0
        for cell in range(mesh.nx1):
            tr = f[:, cell, side]
            resid = tr - pgamma_project(tr, normal, grid12)
            total += float(np.sum(resid[out] ** 2 * comp[out]
                                  * grid12.weights[out])) * mesh.dx1
    assert abs(bdry - math.sqrt(total)) < 1e-12


# --------------------------------------------------------------- fit_decay


def test_fit_decay_exact_exponential():
    ts = np.linspace(0.0, 10.0, 40)
    rep = fit_decay(ts, 3.0 * np.exp(-0.7 * ts))
    assert abs(rep.lambda_ - 0.7) < 1e-12
    assert abs(rep.prefactor - 3.0) < 1e-10
    assert rep.r_squared > 1.0 - 1e-12
    assert not rep.no_decay
    assert rep.norm_name == "l2"


def test_fit_decay_constant_series_flagged():
    ts = np.linspace(0.0, 10.0, 40)
    rep = fit_decay(ts, np.full(40, 2.5))
    assert abs(rep.lambda_) < 1e-12
    assert rep.no_decay


def test_fit_decay_window_errors():
    ts = np.linspace(0.0, 10.0, 40)
    ys = np.exp(-ts)
    with pytest.raises(WindowTooSmall):
        fit_decay(ts, ys, window=(4.0, 4.5))
    ys2 = ys.copy()
    ys2[20] = 0.0
    with pytest.raises(NonPositiveNorm):
        fit_decay(ts, ys2)


def test_fit_decay_shift_equivariant():
    ts = np.linspace(0.0, 8.0, 30)
    ys = 1.7 * np.exp(-0.42 * ts) * (1 + 0.01 * np.sin(9 * ts))
    r1 = fit_decay(ts, ys, window=(1.0, 7.0))
    r2 = fit_decay(ts + 5.0, ys, window=(6.0, 12.0))
    assert abs(r1.lambda_ - r2.lambda_) < 1e-12
    assert abs(r1.r_squared - r2.r_squared) < 1e-12


def test_fit_decay_noisy_rate_recovered(rng):
    ts = np.linspace(0.0, 12.0, 80)
    ys = 2.0 * np.exp(-0.9 * ts) * np.exp(0.02 * rng.standard_normal(80))
    rep = fit_decay(ts, ys)
    assert abs(rep.lambda_ - 0.9) / 0.9 < 0.05
    assert rep.r_squared > 0.98
    assert isinstance(rep, DecayReport)


# ------------------------------------------------------------- weak form


def test_weak_form_needs_snapshots():
    stub = SimpleNamespace(snapshots=None)
    with pytest.raises(MissingSnapshots):
        weak_form_residual(stub, phi=1.0, dphi=(0.0, 0.0))
    stub2 = SimpleNamespace(snapshots=[np.zeros(3)])
    with pytest.raises(MissingSnapshots):
        weak_form_residual(stub2, phi=1.0, dphi=(0.0, 0.0))
