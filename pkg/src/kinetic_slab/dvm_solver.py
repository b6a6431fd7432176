"""Deterministic solver on the rectangular analog domain.

Space is the rectangle (-L, L) x (0, H) with specular caps at x1 = +-L and
(by default) diffuse lateral walls at x2 = 0, H; velocity is the cubic
midpoint lattice shared with the collision tables.  One step is Strang
split: half a transport step, a collision step, half a transport step.

Transport is flux-form upwind (optionally MUSCL with the minmod limiter),
so interior fluxes telescope and the only mass exchange happens at wall
interfaces, where the ghost closure reuses the renormalized Maxwell
condition -- together they conserve mass to rounding for every
accommodation coefficient.  The collision step is explicit Euler in
L f = nu f - K f (optionally Gamma(f, f) and a source on the right-hand
side); explicit Euler needs nu_max dt < 2, so automatic step selection
caps dt at 1.5 / nu_max next to the advective CFL bound.  The optional
nu-implicit update (f + dt K f) / (1 + dt nu) lifts that cap at the price
of a small O(dt^2) mass drift.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .boundary import SQRT_2PI, WallModel, _flux_constant
from .collision import (
    KernelTable,
    VelocityGrid,
    collision_frequency,
    project_P,
)
from .geometry import DIFFUSE, SPECULAR

__all__ = [
    "CFLViolation",
    "NonFinite",
    "DivergenceDetected",
    "Mesh2D",
    "RunConfig",
    "SolverState",
    "RunOutput",
    "PicardResult",
    "wall_ghost",
    "transport_sweep",
    "field_mass",
    "init_state",
    "step",
    "run",
    "picard_iterate",
]

DIAG_COLUMNS = ("t", "l2", "linf_w", "norm_a", "norm_b", "norm_c",
                "norm_IP_nu", "bdry_2plus", "mass")

_IC_NAMES = ("zero", "cos-chi0", "cos-chi4", "bump")
_SCHEMES = ("upwind", "minmod")


class CFLViolation(ValueError):
    pass


class NonFinite(RuntimeError):
    def __init__(self, msg, cell=None, velocity_index=None):
        super().__init__(msg)
        self.cell = cell
        self.velocity_index = velocity_index


class DivergenceDetected(RuntimeError):
    pass


@dataclass(frozen=True)
class Mesh2D:
    """Uniform cell-centered mesh on (-L, L) x (0, H)."""

    L: float
    H: float
    nx1: int
    nx2: int

    @property
    def dx1(self):
        return 2.0 * self.L / self.nx1

    @property
    def dx2(self):
        return self.H / self.nx2

    @property
    def cell_volume(self):
        return self.dx1 * self.dx2

    @property
    def x1_centers(self):
        return -self.L + (np.arange(self.nx1) + 0.5) * self.dx1

    @property
    def x2_centers(self):
        return (np.arange(self.nx2) + 0.5) * self.dx2


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs: domain, lattices, walls, data and cadence.

    kind = "cylinder" (with radius R) is meaningful only to the stochastic
    backends; this solver integrates the rectangular analog.
    """

    kind: str = "rect"
    L: float = 1.0
    R: float = 0.0
    H: float = 2.0
    nx1: int = 32
    nx2: int = 32
    n_v: int = 16
    v_max: float = 6.0
    theta: float = 0.125
    alpha_specular: float = 0.0
    alpha_diffuse: float = 1.0
    ic: str = "cos-chi0"
    ic_amplitude: float = 1e-3
    source: str = "none"
    nonlinear: bool = False
    transport: bool = True
    t_end: float = 20.0
    dt: float = 0.0
    output_every: int = 5
    snapshot_every: int = 0
    seed: int = 0
    cfl_safety: float = 0.9
    scheme: str = "upwind"
    semi_implicit: bool = False

    def __post_init__(self):
        if self.kind not in ("rect", "cylinder"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.L <= 0 or self.H <= 0:
            raise ValueError("domain half-width and height must be positive")
        if self.kind == "cylinder" and self.R <= 0:
            raise ValueError("cylinder radius R must be positive")
        if self.nx1 < 4 or self.nx2 < 4:
            raise ValueError("need at least 4 cells per spatial axis")
        if self.n_v < 4 or self.n_v % 2:
            raise ValueError("n_v must be even and at least 4")
        if self.v_max <= 0:
            raise ValueError("v_max must be positive")
        if not 0.0 <= self.theta < 0.25:
            raise ValueError("theta must lie in [0, 1/4)")
        for name in ("alpha_specular", "alpha_diffuse"):
            a = getattr(self, name)
            if not 0.0 <= a <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {a}")
        if self.ic not in _IC_NAMES:
            raise ValueError(f"unknown initial condition {self.ic!r}; "
                             f"choose from {_IC_NAMES}")
        if self.source != "none":
            raise ValueError(f"unknown source spec {self.source!r}")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.dt < 0:
            raise ValueError("dt must be nonnegative (0 selects automatically)")
        if self.output_every < 1 or self.snapshot_every < 0:
            raise ValueError("output cadence must be >= 1, snapshots >= 0")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; "
                             f"choose from {_SCHEMES}")

    def wall_model(self):
        return WallModel({SPECULAR: self.alpha_specular,
                          DIFFUSE: self.alpha_diffuse})


@dataclass
class SolverState:
    f: np.ndarray  # (n_nodes, nx1, nx2)
    t: float
    dt: float
    n_total: int
    grid: VelocityGrid
    mesh: Mesh2D
    cfl_safety: float
    n_steps: int = 0
    mass_history: list = field(default_factory=list)


@dataclass
class RunOutput:
    columns: tuple
    series: np.ndarray
    state: SolverState
    grid: VelocityGrid
    mesh: Mesh2D
    table: KernelTable
    wall: WallModel
    config: RunConfig
    snapshots: list = None
    snap_ts: list = None
    source: np.ndarray = None


@dataclass
class PicardResult:
    output: RunOutput
    distances: list
    ratios: list


# -------------------------------------------------------------- wall ghosts


def wall_ghost(trace, axis, sign, grid, wall):
    """Ghost-cell values behind the wall with outward normal sign * e_axis.

    trace is (n_nodes, m), the boundary-cell values along the wall.  On
    nodes entering the domain the ghost carries the Maxwell condition,
    alpha parts emission and (1 - alpha) parts reflected trace; on exiting
    nodes it carries the reflected trace (only reconstruction stencils
    ever look at those).  Caps (axis 0) use the specular region's
    accommodation, lateral walls (axis 1) the diffuse region's.
    """
    region = SPECULAR if axis == 0 else DIFFUSE
    alpha = wall.alpha_for(region)
    flip = grid.flip_index(axis)
    ghost = (1.0 - alpha) * trace[flip]
    if alpha > 0.0:
        comp = sign * grid.nodes[:, axis]
        out = comp > 0
        sq = grid.sqrt_mu
        D = _flux_constant(grid, axis, 1.0 if sign > 0 else -1.0)
        phi = (sq[out] * comp[out] * grid.weights[out]) @ trace[out]
        ghost[~out] += alpha * (SQRT_2PI / D) * np.outer(sq[~out], phi)
    return ghost


# ---------------------------------------------------------------- transport


def _minmod(a, b):
    return np.where(a * b > 0.0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)),
                    0.0)


def transport_sweep(f, axis, dts, grid, mesh, wall, scheme="upwind"):
    """One flux-form upwind sweep of duration dts along a spatial axis.

    Interface fluxes telescope, so mass moves but is never created; the
    cells adjacent to a wall always use the first-order flux, which keeps
    the wall's ghost balance exact under the minmod reconstruction too.
    """
    v = grid.nodes[:, axis]
    dx = mesh.dx1 if axis == 0 else mesh.dx2
    arr = np.moveaxis(f, 1 + axis, 1)
    ghost_lo = wall_ghost(np.ascontiguousarray(arr[:, 0, :]), axis, -1.0,
                          grid, wall)
    ghost_hi = wall_ghost(np.ascontiguousarray(arr[:, -1, :]), axis, 1.0,
                          grid, wall)
    if scheme == "minmod":
        ext = np.concatenate([ghost_lo[:, None], arr, ghost_hi[:, None]],
                             axis=1)
        d = np.diff(ext, axis=1)
        slope = _minmod(d[:, :-1], d[:, 1:])
        slope[:, 0] = 0.0
        slope[:, -1] = 0.0
        fL = np.concatenate([ghost_lo[:, None], arr + 0.5 * slope], axis=1)
        fR = np.concatenate([arr - 0.5 * slope, ghost_hi[:, None]], axis=1)
    else:
        fL = np.concatenate([ghost_lo[:, None], arr], axis=1)
        fR = np.concatenate([arr, ghost_hi[:, None]], axis=1)
    flux = np.maximum(v, 0.0)[:, None, None] * fL
    flux += np.minimum(v, 0.0)[:, None, None] * fR
    out = arr - (dts / dx) * (flux[:, 1:] - flux[:, :-1])
    return np.ascontiguousarray(np.moveaxis(out, 1, 1 + axis))


# ---------------------------------------------------------------- stepping


def field_mass(f, grid, mesh):
    """Total mass int <f, sqrt(mu)> dx on the lattice."""
    dens = np.tensordot(grid.sqrt_mu * grid.weights, f, axes=(0, 0))
    return float(np.sum(dens)) * mesh.cell_volume


def _advective_limit(grid, mesh, cfl_safety):
    vmax = float(np.max(np.abs(grid.axis_nodes)))
    return cfl_safety * min(mesh.dx1, mesh.dx2) / vmax


def _initial_field(config, grid, mesh):
    n = grid.n_nodes
    f = np.zeros((n, config.nx1, config.nx2))
    if config.ic == "zero":
        return f
    amp = config.ic_amplitude
    chi = grid.chi_basis()
    if config.ic == "cos-chi0":
        prof = np.cos(np.pi * mesh.x2_centers / config.H)
        f[:] = amp * chi[:, 0][:, None, None] * prof[None, None, :]
    elif config.ic == "cos-chi4":
        prof = np.cos(np.pi * mesh.x2_centers / config.H)
        f[:] = amp * chi[:, 4][:, None, None] * prof[None, None, :]
    elif config.ic == "bump":
        r2 = ((mesh.x1_centers[:, None]) ** 2
              + (mesh.x2_centers[None, :] - 0.5 * config.H) ** 2)
        width = 0.15 * min(2.0 * config.L, config.H)
        prof = np.exp(-r2 / width**2)
        f[:] = amp * chi[:, 0][:, None, None] * prof[None]
    return f


def init_state(config, grid=None):
    if config.kind != "rect":
        raise ValueError("the deterministic solver integrates the "
                         "rectangular analog; use the stochastic backends "
                         "for the cylinder")
    if grid is None:
        grid = VelocityGrid.midpoint(n_per_axis=config.n_v, v_max=config.v_max)
    elif grid.n_per_axis != config.n_v:
        raise ValueError(f"grid has {grid.n_per_axis} nodes per axis, "
                         f"config asks for {config.n_v}")
    mesh = Mesh2D(config.L, config.H, config.nx1, config.nx2)
    if config.dt > 0:
        dt = config.dt
    else:
        caps = []
        if config.transport:
            caps.append(_advective_limit(grid, mesh, config.cfl_safety))
        if not config.semi_implicit:
            nu_max = float(np.max(collision_frequency(grid.nodes)))
            caps.append(1.5 / nu_max)
        if not caps:
            raise ValueError("no stability cap applies; set dt explicitly")
        dt = min(caps)
    n = max(1, math.ceil(config.t_end / dt - 1e-12))
    dt = config.t_end / n
    f = _initial_field(config, grid, mesh)
    state = SolverState(f=f, t=0.0, dt=dt, n_total=n, grid=grid, mesh=mesh,
                        cfl_safety=config.cfl_safety)
    state.mass_history.append(field_mass(f, grid, mesh))
    return state


def _check_finite(f):
    if not np.all(np.isfinite(f)):
        jv, i1, i2 = (int(k) for k in np.argwhere(~np.isfinite(f))[0])
        raise NonFinite(
            f"non-finite value at cell ({i1}, {i2}), velocity node {jv}",
            cell=(i1, i2), velocity_index=jv)


def _collide(F, dt, table, gamma_table=None, source=None, semi_implicit=False):
    gain = table.K @ F
    if gamma_table is not None:
        from .gamma import gamma_bilinear

        gain += gamma_bilinear(F, F, gamma_table)
    if source is not None:
        gain += source
    if semi_implicit:
        return (F + dt * gain) / (1.0 + dt * table.nu)[:, None]
    return F - dt * (table.nu[:, None] * F - gain)


def step(state, table, wall, *, scheme="upwind", transport=True,
         gamma_table=None, source=None, semi_implicit=False,
         collide_inputs=None):
    """Advance one Strang step in place; returns the state.

    collide_inputs, if a list, receives a copy of the field entering the
    collision stage (the quantity the Picard iteration contracts on).
    """
    _check_finite(state.f)
    grid, mesh = state.grid, state.mesh
    dt = state.dt
    f = state.f
    if transport:
        limit = _advective_limit(grid, mesh, state.cfl_safety)
        if dt > limit * (1.0 + 1e-12):
            raise CFLViolation(
                f"dt = {dt:.6g} exceeds the advective bound {limit:.6g}")
        half = 0.5 * dt
        f = transport_sweep(f, 0, half, grid, mesh, wall, scheme)
        f = transport_sweep(f, 1, half, grid, mesh, wall, scheme)
    F = f.reshape(grid.n_nodes, -1)
    if collide_inputs is not None:
        collide_inputs.append(F.copy())
    F = _collide(F, dt, table, gamma_table, source, semi_implicit)
    f = F.reshape(state.f.shape)
    if transport:
        f = transport_sweep(f, 0, half, grid, mesh, wall, scheme)
        f = transport_sweep(f, 1, half, grid, mesh, wall, scheme)
    state.f = f
    state.t += dt
    state.n_steps += 1
    state.mass_history.append(field_mass(f, grid, mesh))
    return state


# ------------------------------------------------------------- full runs


def _diag_row(state, table, theta):
    from .diagnostics import moments, weighted_norms

    f, grid, mesh = state.f, state.grid, state.mesh
    l2, linf_w, _, bdry = weighted_norms(f, grid, mesh, theta)
    mom = moments(f, grid)
    dA = mesh.cell_volume
    norm_a = math.sqrt(float(np.sum(mom.a**2)) * dA)
    norm_b = math.sqrt(float(np.sum(mom.b**2)) * dA)
    norm_c = math.sqrt(float(np.sum(mom.c**2)) * dA)
    F = f.reshape(grid.n_nodes, -1)
    *_, Pf = project_P(F, grid)
    ip = F - Pf
    nu_w = table.nu * grid.weights
    norm_ip = math.sqrt(float(np.sum(nu_w @ (ip * ip))) * dA)
    return (state.t, l2, linf_w, norm_a, norm_b, norm_c, norm_ip, bdry,
            state.mass_history[-1])


def _drive(config, grid, table, gamma_table, wall, source_steps,
           record_collide):
    state = init_state(config, grid)
    n = state.n_total
    rows = []
    snaps, snap_ts = [], []
    inputs = [] if record_collide else None

    def maybe_record(k):
        if k % config.output_every == 0 or k == n:
            rows.append(_diag_row(state, table, config.theta))
        if config.snapshot_every > 0 and (
                k % config.snapshot_every == 0 or k == n):
            snaps.append(state.f.copy())
            snap_ts.append(state.t)

    maybe_record(0)
    for k in range(n):
        src = source_steps[k] if source_steps is not None else None
        step(state, table, wall, scheme=config.scheme,
             transport=config.transport, gamma_table=gamma_table, source=src,
             semi_implicit=config.semi_implicit, collide_inputs=inputs)
        if k + 1 < n:
            maybe_record(k + 1)
    _check_finite(state.f)
    maybe_record(n)
    out = RunOutput(columns=DIAG_COLUMNS, series=np.array(rows), state=state,
                    grid=grid, mesh=state.mesh, table=table, wall=wall,
                    config=config,
                    snapshots=snaps if config.snapshot_every > 0 else None,
                    snap_ts=snap_ts if config.snapshot_every > 0 else None)
    return out, inputs


def _resolve(config, grid, table, gamma_table, need_gamma):
    if grid is None:
        grid = VelocityGrid.midpoint(n_per_axis=config.n_v,
                                     v_max=config.v_max)
    elif grid.n_per_axis != config.n_v:
        raise ValueError(f"grid has {grid.n_per_axis} nodes per axis, "
                         f"config asks for {config.n_v}")
    if table is None:
        table = KernelTable.build(grid, theta=config.theta)
    if need_gamma and gamma_table is None:
        from .gamma import GammaTable

        gamma_table = GammaTable.build(grid)
    return grid, table, gamma_table


def run(config, *, grid=None, table=None, gamma_table=None):
    """Integrate to t_end and return the diagnostics series and final state."""
    grid, table, gamma_table = _resolve(config, grid, table, gamma_table,
                                        config.nonlinear)
    wall = config.wall_model()
    out, _ = _drive(config, grid, table,
                    gamma_table if config.nonlinear else None, wall, None,
                    False)
    return out


def picard_iterate(config, n_iters, *, grid=None, table=None,
                   gamma_table=None):
    """Solve the nonlinear problem by iterating the linear solver.

    Iterate l+1 runs the linear scheme with the frozen source
    Gamma(f_l, f_l), evaluated on iterate l's collision-stage fields so
    the direct nonlinear scheme is the exact fixed point.  Distances are
    sup norms between consecutive iterates; three consecutive increases
    abort with DivergenceDetected.
    """
    from .gamma import gamma_bilinear

    grid, table, gamma_table = _resolve(config, grid, table, gamma_table,
                                        True)
    wall = config.wall_model()
    prev = None
    distances = []
    growing = 0
    output = None
    for _ in range(int(n_iters)):
        if prev is None:
            sources = None
        else:
            sources = [gamma_bilinear(F, F, gamma_table) for F in prev]
        output, inputs = _drive(config, grid, table, None, wall, sources,
                                True)
        if prev is None:
            d = max(float(np.max(np.abs(F))) for F in inputs)
        else:
            d = max(float(np.max(np.abs(a - b)))
                    for a, b in zip(inputs, prev))
        if distances and d > distances[-1]:
            growing += 1
            if growing >= 3:
                raise DivergenceDetected(
                    f"iterate distances grew 3 times in a row: "
                    f"{distances[-3:] + [d]}")
        else:
            growing = 0
        distances.append(d)
        prev = inputs
    ratios = [distances[i + 1] / distances[i]
              for i in range(len(distances) - 1) if distances[i] > 0]
    return PicardResult(output=output, distances=distances, ratios=ratios)
