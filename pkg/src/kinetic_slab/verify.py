"""Property battery: cross-module identities with explicit numeric bounds.

Each check compares a computed quantity against an independent reference
(closed-form moment, symmetry, conservation law, or an alternative code
path) and reports ``(check_id, value, bound, status)``.  The battery is
deterministic: every stochastic check draws from a fixed-seed generator.

``run_battery(quick=True)`` shrinks grids and sample counts so the whole
battery runs in seconds; the full battery is sized for a couple of
minutes on one core.
"""

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .boundary import WallModel, _flux_constant, apply_wall, sample_diffuse, wall_flux
from .collision import (
    KernelTable,
    VelocityGrid,
    apply_L,
    collision_frequency,
    null_space_defects,
    project_P,
)
from .cycles import REACHED_TIME_ZERO, eval_XV, trace_cycles, trace_specular_chain, unfold_axial
from .gamma import GammaTable, gamma_bilinear
from .geometry import DIFFUSE, SPECULAR, Domain

SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass
class CheckResult:
    check_id: str
    value: float
    bound: float
    status: str


def _le(check_id, value, bound):
    status = "pass" if value <= bound else "fail"
    return CheckResult(check_id, float(value), float(bound), status)


def _ge(check_id, value, bound):
    status = "pass" if value >= bound else "fail"
    return CheckResult(check_id, float(value), float(bound), status)


# -------------------------------------------------------------- the checks


def _check_gaussian_moments(grid, bound):
    """Lattice sums of polynomial moments of mu against closed forms."""
    V, w, mu = grid.nodes, grid.weights, grid.mu
    v1, s2 = V[:, 0], np.sum(V * V, axis=1)
    facts = (
        (np.ones_like(v1), 1.0),
        (v1**2, 1.0),
        (s2, 3.0),
        (v1**4, 3.0),
        (s2**2, 15.0),
        (v1**2 * V[:, 1] ** 2, 1.0),
    )
    err = max(abs(float(np.sum(p * mu * w)) - ref) / ref for p, ref in facts)
    return _le("gaussian-moments", err, bound)


def _check_nu_zero():
    ref = 4.0 * SQRT_2PI
    val = abs(float(collision_frequency(np.zeros(3))) / ref - 1.0)
    return _le("nu-analytic-zero", val, 1e-10)


def _check_kernel_symmetry(table):
    val = float(np.max(np.abs(table.K - table.K.T)))
    return _le("kernel-symmetry", val, 1e-12)


def _check_null_defects(grid):
    d = null_space_defects(grid)
    return _le("null-defect-corrected", float(np.max(d["corrected"])), 1e-10)


def _check_dissipation(table, rng, n_draws=40):
    grid = table.grid
    w = grid.weights
    q_min = np.inf
    ratio_min = np.inf
    for _ in range(n_draws):
        f = rng.standard_normal(grid.n_nodes)
        Lf = apply_L(f, table)
        q = float(np.sum(w * f * Lf)) / float(np.sum(w * f * f))
        q_min = min(q_min, q)
        g = f - project_P(f, grid)[3]
        denom = float(np.sum(w * table.nu * g * g))
        if denom > 1e-12:
            ratio_min = min(ratio_min, float(np.sum(w * f * Lf)) / denom)
    yield _le("L-psd", max(0.0, -q_min), 1e-8)
    yield _ge("L-coercivity", ratio_min, 0.01)


def _check_gamma_moments(rng):
    grid = VelocityGrid.midpoint(n_per_axis=6, v_max=6.0)
    gt = GammaTable.build(grid)
    w = grid.weights
    chi = grid.chi_basis()
    worst = 0.0
    for _ in range(4):
        g = grid.sqrt_mu * rng.standard_normal(grid.n_nodes)
        f = grid.sqrt_mu * rng.standard_normal(grid.n_nodes)
        gam = gamma_bilinear(g, f, gt)
        mom = np.abs((gam * w) @ chi)
        scale = np.sqrt(float(np.sum(gam * gam * w))) + 1e-300
        worst = max(worst, float(np.max(mom)) / scale)
    return _le("gamma-conserved-moments", worst, 1e-10)


def _check_wall_sigma_continuum():
    # the wall emission density sqrt(2 pi) mu (n.v) over the incoming
    # half-space, as a product of three 1-D quadratures
    gauss = integrate.quad(lambda t: np.exp(-t * t / 2) / SQRT_2PI, -12, 12)[0]
    half = integrate.quad(lambda c: c * np.exp(-c * c / 2) / SQRT_2PI, 0, 12)[0]
    total = SQRT_2PI * half * gauss * gauss
    return _le("wall-sigma-continuum", abs(total - 1.0), 1e-10)


def _check_wall_flux_constant():
    # the half-space flux integrand mu (n.u)_+ has a kink at n.u = 0, so
    # the lattice constant D carries a second-order defect (~4.6% at
    # h = 1).  The wall closure renormalizes by the lattice D, which is
    # what makes the balance exact anyway; here we pin the defect size
    # and its second-order decay under grid refinement.
    grid12 = VelocityGrid.midpoint(n_per_axis=12, v_max=6.0)
    grid24 = VelocityGrid.midpoint(n_per_axis=24, v_max=6.0)
    d12 = max(
        abs(_flux_constant(grid12, axis, sign) - 1.0)
        for axis in (0, 1)
        for sign in (-1.0, 1.0)
    )
    d24 = abs(_flux_constant(grid24, 0, 1.0) - 1.0)
    yield _le("wall-flux-constant", d12, 0.06)
    yield _le("wall-flux-order", abs(d12 / d24 / 4.0 - 1.0), 0.25)


def _check_wall_balance(grid, rng):
    normal = np.array([0.0, 1.0, 0.0])
    out = grid.nodes[:, 1] > 0
    worst = 0.0
    for alpha in (0.0, 0.37, 1.0):
        wm = WallModel(alphas={SPECULAR: alpha, DIFFUSE: alpha})
        f_out = np.zeros(grid.n_nodes)
        f_out[out] = rng.random(int(np.sum(out))) + 0.5
        f_in = apply_wall(f_out, normal, wm, DIFFUSE, grid)
        leaving = wall_flux(f_out, normal, grid)
        entering = wall_flux(f_in, -normal, grid)
        worst = max(worst, abs(leaving - entering) / leaving)
    return _le("wall-balance", worst, 1e-12)


def _check_diffuse_sampler(rng, n):
    normal = np.array([0.0, 0.0, 1.0])
    V = sample_diffuse(normal, rng, size=n)
    vn = V @ normal
    mean_ref = np.sqrt(np.pi / 2.0)
    sd_n = np.sqrt(2.0 - np.pi / 2.0)
    z = [abs(np.mean(vn) - mean_ref) / (sd_n / np.sqrt(n))]
    for k in range(3):
        if normal[k] == 0.0:
            z.append(abs(np.mean(V[:, k])) / (1.0 / np.sqrt(n)))
    return _le("diffuse-sampler-mean", float(max(z)), 3.0)


def _check_unfold(rng, n_pairs):
    dom = Domain.cylinder(L=1.0, R=1.0)
    worst = 0.0
    checked = 0
    while checked < n_pairs:
        v = rng.normal(size=3)
        if np.linalg.norm(v) < 0.1:
            continue
        rec = trace_cycles(dom, np.zeros(3), v, t0=15.0, rng=rng, k_max=1000)
        floor = (0.0 if rec.terminal == REACHED_TIME_ZERO
                 else rec.chains[-1].arrival_t)
        for chain in rec.chains:
            leg_end = chain.arrival_t if chain.arrival_t is not None else floor
            lo, hi = max(leg_end, floor) + 1e-9, chain.ts[0] - 1e-9
            if hi <= lo:
                continue
            s = rng.uniform(lo, hi, size=500)
            X, V = eval_XV(rec, s)
            x0, t0, v0 = chain.xs[0], chain.ts[0], chain.vs[0]
            x1f, signf = unfold_axial(x0[0] - (t0 - s) * v0[0], L=dom.L)
            worst = max(worst, float(np.max(np.abs(X[:, 0] - x1f))) / dom.L,
                        float(np.max(np.abs(V[:, 0] - signf * v0[0]))))
            checked += len(s)
    return _le("unfold-equivalence", worst, 1e-9)


def _chain_sample(rng, n_chains, t):
    dom = Domain.cylinder(L=1.0, R=1.0)
    for _ in range(n_chains):
        x = np.array([rng.uniform(-0.9, 0.9), 0.0, 0.0])
        v = rng.normal(size=3)
        if np.linalg.norm(v) < 0.1:
            continue
        yield trace_specular_chain(dom, x, v, t)


def _check_chain_energy(rng, n_chains):
    worst = 0.0
    for chain in _chain_sample(rng, n_chains, t=8.0):
        speeds = np.linalg.norm(chain.vs, axis=1)
        worst = max(worst, float(np.max(np.abs(speeds / speeds[0] - 1.0))))
    return _le("chain-energy", worst, 1e-12)


def _check_bounce_tail(rng, n_chains):
    counts = np.zeros(256, dtype=int)
    for chain in _chain_sample(rng, n_chains, t=10.0):
        counts[min(chain.n_bounces, 255)] += 1
    k = np.nonzero(counts)[0]
    # fit the tail beyond the mode; geometric decay shows as a straight
    # line in log counts with a clearly negative slope
    start = int(k[np.argmax(counts[k])]) + 1
    k = k[(k >= start) & (counts[k] >= 3)]
    slope = np.polyfit(k, np.log(counts[k]), 1)[0]
    return _le("bounce-tail-logslope", float(slope), -0.05)


def run_battery(quick=False, seed=20260823):
    """Run every check; returns a list of CheckResult."""
    rng = np.random.default_rng(seed)
    n_mom = 12 if quick else 16
    n_tab = 8 if quick else 12
    grid_m = VelocityGrid.midpoint(n_per_axis=n_mom, v_max=6.0)
    grid_t = VelocityGrid.midpoint(n_per_axis=n_tab, v_max=6.0)
    table = KernelTable.build(grid_t)

    results = [
        _check_gaussian_moments(grid_m, bound=1e-5 if quick else 1e-6),
        _check_nu_zero(),
        _check_kernel_symmetry(table),
        _check_null_defects(grid_t),
        *_check_dissipation(table, rng, n_draws=10 if quick else 40),
        _check_gamma_moments(rng),
        _check_wall_sigma_continuum(),
        *_check_wall_flux_constant(),
        _check_wall_balance(grid_t, rng),
        _check_diffuse_sampler(rng, n=100_000 if quick else 1_000_000),
        _check_unfold(rng, n_pairs=2_000 if quick else 100_000),
        _check_chain_energy(rng, n_chains=200 if quick else 2_000),
    ]
    if not quick:
        results.append(_check_bounce_tail(rng, n_chains=20_000))
    return results
