"""Macroscopic diagnostics: moments, Burnett functions, norms, decay fits.

All quadratures use the velocity lattice weights; spatial integrals use the
uniform cell volume of the rectangular mesh.  The boundary seminorm
integrates |f|^2 (n.v) over outgoing velocities on the diffuse (lateral)
walls only, after removing the wall-Maxwellian emission component.
"""

import math
from dataclasses import dataclass

import numpy as np

from .boundary import SQRT_2PI
from .collision import GridMismatch, collision_frequency, velocity_weight


class IndexOutOfRange(IndexError):
    pass


class NonPositiveNorm(ValueError):
    pass


class WindowTooSmall(ValueError):
    pass


class MissingSnapshots(ValueError):
    pass


@dataclass
class MomentField:
    """Hydrodynamic coefficients per spatial cell: density a, momentum b,
    temperature c (coefficients against the orthonormal invariants)."""

    a: np.ndarray
    b: np.ndarray  # leading axis 3
    c: np.ndarray


@dataclass
class DecayReport:
    lambda_: float
    prefactor: float
    r_squared: float
    window: tuple
    norm_name: str
    no_decay: bool = False


def _check_grid(f, grid):
    f = np.asarray(f, float)
    if f.shape[0] != grid.n_nodes:
        raise GridMismatch(
            f"field has {f.shape[0]} velocity entries, grid has {grid.n_nodes}")
    return f


def moments(f, grid):
    """Project f onto the five collision invariants, cell by cell."""
    f = _check_grid(f, grid)
    chi = grid.chi_basis()  # (Nv, 5)
    coef = np.tensordot(chi * grid.weights[:, None], f, axes=(0, 0))
    return MomentField(a=coef[0], b=coef[1:4], c=coef[4])


def burnett(kind, i, j=None, *, grid):
    """Burnett velocity functions on the lattice.

    kind "A": A_ij = (v_i v_j - delta_ij |v|^2 / 3) sqrt(mu), i, j in 0..2.
    kind "B": B_i = v_i (|v|^2 - 5) / sqrt(10) sqrt(mu), j unused.
    """
    V = grid.nodes
    sq = grid.sqrt_mu
    if kind == "A":
        if j is None or not (0 <= i < 3 and 0 <= j < 3):
            raise IndexOutOfRange(f"A indices out of range: {(i, j)}")
        out = V[:, i] * V[:, j] * sq
        if i == j:
            out = out - np.sum(V * V, axis=1) / 3.0 * sq
        return out
    if kind == "B":
        if not 0 <= i < 3:
            raise IndexOutOfRange(f"B index out of range: {i}")
        return V[:, i] * (np.sum(V * V, axis=1) - 5.0) / math.sqrt(10.0) * sq
    raise IndexOutOfRange(f"unknown Burnett kind {kind!r}")


def _wall_seminorm_sq(trace, sign, grid, cell_len):
    """One diffuse wall's share of |(1 - P_gamma) f|^2 on outgoing nodes.

    trace is (Nv, m) boundary-cell values; sign picks the outward normal
    (0, sign, 0).  Outgoing means n.v > 0, i.e. sign * v2 > 0.
    """
    v2 = grid.nodes[:, 1]
    comp = sign * v2
    out = comp > 0
    w = grid.weights
    sq = grid.sqrt_mu
    D = SQRT_2PI * np.sum(grid.mu[out] * comp[out] * w[out])
    Phi = np.tensordot(sq[out] * comp[out] * w[out], trace[out], axes=(0, 0))
    resid = trace[out] - (SQRT_2PI / D) * np.outer(sq[out], Phi)
    dens = np.sum(resid * resid * (comp[out] * w[out])[:, None], axis=0)
    return float(np.sum(dens)) * cell_len


def weighted_norms(f, grid, mesh=None, theta=0.125):
    """(l2, linf_w, l2_nu, boundary_2plus) of a distribution field.

    f is (Nv,) or (Nv, nx1, nx2).  With a spatial mesh the L2 norms carry
    the cell volume and the boundary seminorm is taken over the lateral
    (diffuse) walls; without one the field is treated as a single cell of
    unit volume and the boundary term is zero.
    """
    f = _check_grid(f, grid)
    w = grid.weights
    vol = mesh.cell_volume if mesh is not None else 1.0
    f2w = np.tensordot(w, f * f, axes=(0, 0))
    l2 = math.sqrt(float(np.sum(f2w)) * vol)
    wth = velocity_weight(grid.nodes, theta)
    linf_w = float(np.max(np.abs(f) * wth.reshape((-1,) + (1,) * (f.ndim - 1))))
    nu = collision_frequency(grid.nodes)
    l2_nu = math.sqrt(float(np.sum(np.tensordot(nu * w, f * f, axes=(0, 0)))) * vol)
    bdry = 0.0
    if mesh is not None and f.ndim == 3:
        bdry = math.sqrt(
            _wall_seminorm_sq(f[:, :, 0], -1.0, grid, mesh.dx1)
            + _wall_seminorm_sq(f[:, :, -1], +1.0, grid, mesh.dx1))
    return l2, linf_w, l2_nu, bdry


def fit_decay(ts, norms, window=None, norm_name="l2"):
    """Least-squares exponential fit norm ~ prefactor * exp(-lambda t).

    The default window [0.2 T, 0.9 T] skips the initial transient.  A fit
    whose rate is indistinguishable from zero (within two standard errors
    of the slope) is flagged no_decay.
    """
    ts = np.asarray(ts, float)
    norms = np.asarray(norms, float)
    if window is None:
        window = (0.2 * ts[-1], 0.9 * ts[-1])
    lo, hi = window
    m = (ts >= lo) & (ts <= hi)
    if m.sum() < 10:
        raise WindowTooSmall(
            f"only {int(m.sum())} points in window [{lo:.4g}, {hi:.4g}]")
    if np.any(norms[m] <= 0.0):
        raise NonPositiveNorm("norms must be positive inside the fit window")
    t, y = ts[m], np.log(norms[m])
    A = np.vstack([t, np.ones(len(t))]).T
    (slope, icpt), res, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ [slope, icpt]
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    dof = max(len(t) - 2, 1)
    var_t = float(np.sum((t - t.mean()) ** 2))
    slope_se = math.sqrt(ss_res / dof / var_t) if var_t > 0 else math.inf
    lam = -slope
    return DecayReport(lambda_=lam, prefactor=math.exp(icpt), r_squared=r2,
                       window=(lo, hi), norm_name=norm_name,
                       no_decay=bool(lam < 2.0 * slope_se))


def weak_form_residual(output, phi, dphi, j=0):
    """Imbalance of the weak-form balance law for psi = phi(x) chi_j(v).

    For each snapshot interval [t_k, t_{k+1}] this assembles
        [psi f]_{t_k}^{t_{k+1}}  -  int v.grad(psi) f  +  int_wall psi f (n.v)
        + int <L f, psi>  -  int psi g,
    with time integrals by the trapezoid rule and the wall flux evaluated
    with the same ghost closure the solver uses, and returns the interval
    residuals.  For phi = 1, j = 0 this is the discrete mass ledger.
    """
    snaps = getattr(output, "snapshots", None)
    if not snaps or len(snaps) < 2:
        raise MissingSnapshots("run output carries fewer than 2 snapshots")
    ts = np.asarray(output.snap_ts, float)
    grid, mesh = output.grid, output.mesh
    table, wall = output.table, output.wall
    chi = grid.chi_basis()[:, j]
    w = grid.weights
    vol = mesh.cell_volume
    phi_c = np.asarray(phi, float)
    d1, d2 = (np.asarray(d, float) for d in dphi)
    V = grid.nodes
    nu = table.nu

    def inner_mass(f):
        return float(np.sum(phi_c * np.tensordot(chi * w, f, axes=(0, 0)))) * vol

    def transport_term(f):
        mom = np.tensordot(chi * w * V[:, 0], f, axes=(0, 0)) * d1
        mom += np.tensordot(chi * w * V[:, 1], f, axes=(0, 0)) * d2
        return float(np.sum(mom)) * vol

    def collision_term(f):
        F = f.reshape(grid.n_nodes, -1)
        Lf = nu[:, None] * F - table.K @ F
        val = np.tensordot(chi * w, Lf.reshape(f.shape), axes=(0, 0))
        return float(np.sum(phi_c * val)) * vol

    def wall_term(f):
        # net outward flux of psi f through all four walls, using the same
        # upwind closure as the solver: cell value out, ghost value in
        from .dvm_solver import wall_ghost
        total = 0.0
        for axis, side, sign in ((0, 0, -1.0), (0, -1, +1.0),
                                 (1, 0, -1.0), (1, -1, +1.0)):
            tr = f[:, side, :] if axis == 0 else f[:, :, side]
            ghost = wall_ghost(tr, axis, sign, grid, wall)
            comp = sign * V[:, axis]
            up = np.where(comp[:, None] > 0, tr, ghost)
            contrib = np.tensordot(chi * w * comp, up, axes=(0, 0))
            cl = mesh.dx2 if axis == 0 else mesh.dx1
            # phi evaluated on the matching boundary cells
            pb = phi_c[side, :] if axis == 0 else phi_c[:, side]
            total += float(np.sum(pb * contrib)) * cl
        return total

    g = getattr(output, "source", None)
    res = np.empty(len(snaps) - 1)
    for k in range(len(snaps) - 1):
        f0, f1 = snaps[k], snaps[k + 1]
        dt = ts[k + 1] - ts[k]
        trap = lambda fn: 0.5 * dt * (fn(f0) + fn(f1))
        lhs = inner_mass(f1) - inner_mass(f0)
        rhs = trap(transport_term) - trap(wall_term) - trap(collision_term)
        if g is not None:
            rhs += trap(lambda f: float(
                np.sum(phi_c * np.tensordot(chi * w, g, axes=(0, 0)))) * vol)
        res[k] = lhs - rhs
    return res
