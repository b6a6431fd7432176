"""Backward characteristic cycles: specular chains broken by diffuse events.

Tracing runs backward in time from a phase point (x, v) at time t0.  Between
wall interactions the backward position is X(s) = x - (t - s) v.  Cap hits
(x1 = +-L) reflect the axial velocity and the chain continues; a hit on the
lateral wall is a diffuse event, where a fresh incoming velocity is drawn
from the wall's flux-weighted half-space measure and a new chain starts.
A full record of chains and events supports pointwise evaluation of the
trajectory (X(s), V(s)) and serialization.

The axial motion inside one chain is a folded free flight: unfolding the
reflections gives a straight line in the coordinate y1, and `unfold_axial`
maps it back with the orientation sign of the axial velocity.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .boundary import sample_diffuse, specular_reflect
from .geometry import DIFFUSE, ZeroVelocity, exit_time

REACHED_TIME_ZERO = "reached_time_zero"
EXHAUSTED_K = "exhausted_k"

_HARD_CAP = 1_000_000


class ChainOverflow(RuntimeError):
    """Specular chain would exceed the hard bounce limit."""


class TimeOutOfRange(ValueError):
    """Evaluation time outside the record's covered interval."""


@dataclass
class SpecularChain:
    """One backward chain of cap reflections.

    Leg j runs backward from (xs[j], ts[j]) with velocity vs[j]:
    X(s) = xs[j] - (ts[j] - s) vs[j].  Entries 1.. are cap bounce points.
    A chain ends either at the diffuse lateral wall (arrival_* set) or
    truncated once its bounces provably cover the backward horizon -- a
    purely axial ray never leaves the caps, and a ray that misses every
    wall (no transverse motion in the rectangle) truncates immediately.
    """

    xs: np.ndarray  # (M+1, ndim) leg start positions
    ts: np.ndarray  # (M+1,) leg start times, strictly decreasing
    vs: np.ndarray  # (M+1, 3) leg velocities
    truncated: bool
    arrival_x: np.ndarray | None = None
    arrival_t: float | None = None
    arrival_normal: np.ndarray | None = None
    arrival_region: str | None = None

    @property
    def n_bounces(self):
        return len(self.ts) - 1

    @property
    def tilde_v(self):
        """Velocity on the final leg (the pre-arrival velocity)."""
        return self.vs[-1]


@dataclass
class CycleEvent:
    """A diffuse wall event: arrival state plus the freshly drawn velocity."""

    t: float
    x: np.ndarray
    v: np.ndarray  # sampled incoming velocity (points out of the wall)
    chain_len: int  # bounce count of the chain that led here


@dataclass
class CycleRecord:
    """Full backward trajectory: alternating chains and diffuse events."""

    domain: object
    x0: np.ndarray
    v0: np.ndarray
    t0: float
    chains: list = field(default_factory=list)
    events: list = field(default_factory=list)
    terminal: str = REACHED_TIME_ZERO
    terminal_leg: int = 0

    @property
    def n_diffuse(self):
        return len(self.events)

    @property
    def coverage_floor(self):
        """Earliest time at which (X, V) is defined by this record."""
        if self.terminal == REACHED_TIME_ZERO:
            return 0.0
        return self.events[-1].t


def trace_specular_chain(domain, x, v, t):
    """Trace the backward specular chain from (x, v) at time t.

    Bounce times are allowed to run past zero; the chain stops at a diffuse
    arrival or after ceil(|v1| t / 2L) + 2 bounces, which is sufficient to
    cover [0, t] when no diffuse arrival exists.
    """
    x = np.asarray(x, float).copy()
    v = np.asarray(v, float).copy()
    if not np.any(v):
        raise ZeroVelocity("zero velocity cannot be traced")
    n_cut = math.ceil(abs(v[0]) * t / (2.0 * domain.L)) + 2
    if n_cut > _HARD_CAP:
        raise ChainOverflow(
            f"chain would need up to {n_cut} bounces (limit {_HARD_CAP})")

    xs, ts, vs = [x], [float(t)], [v]
    while True:
        hit = exit_time(domain, xs[-1], vs[-1])
        if not np.isfinite(hit.t_b):
            # no wall contact at all (e.g. motion purely along x3 in the
            # rectangle): the single leg covers the whole horizon
            return SpecularChain(np.array(xs), np.array(ts), np.array(vs),
                                 truncated=True)
        t_next = ts[-1] - hit.t_b
        if hit.region == DIFFUSE:
            return SpecularChain(
                np.array(xs), np.array(ts), np.array(vs), truncated=False,
                arrival_x=hit.x_b, arrival_t=t_next,
                arrival_normal=hit.normal, arrival_region=DIFFUSE)
        xs.append(hit.x_b)
        ts.append(t_next)
        vs.append(specular_reflect(hit.normal, vs[-1]))
        if len(ts) - 1 >= n_cut:
            return SpecularChain(np.array(xs), np.array(ts), np.array(vs),
                                 truncated=True)


def trace_cycles(domain, x, v, t0, rng, k_max=100):
    """Trace the full backward trajectory until time zero or k_max events.

    At each diffuse arrival a new incoming velocity is drawn from the
    flux-weighted half-space Gaussian at the local outward normal; it points
    out of the wall, so the backward flight re-enters the domain.
    """
    rec = CycleRecord(domain=domain, x0=np.asarray(x, float),
                      v0=np.asarray(v, float), t0=float(t0))
    x_cur, v_cur, t_cur = rec.x0, rec.v0, rec.t0
    while True:
        chain = trace_specular_chain(domain, x_cur, v_cur, t_cur)
        rec.chains.append(chain)
        if chain.truncated or chain.arrival_t <= 0.0:
            rec.terminal = REACHED_TIME_ZERO
            break
        v_new = sample_diffuse(chain.arrival_normal, rng)
        rec.events.append(CycleEvent(t=chain.arrival_t, x=chain.arrival_x,
                                     v=v_new, chain_len=chain.n_bounces))
        if len(rec.events) >= k_max:
            rec.terminal = EXHAUSTED_K
            break
        x_cur, v_cur, t_cur = chain.arrival_x, v_new, chain.arrival_t
    rec.terminal_leg = len(rec.chains) - 1
    return rec


def _flatten(rec):
    """Concatenate all chain legs into decreasing (start, x, v) arrays."""
    starts, xs, vs = [], [], []
    for chain in rec.chains:
        starts.append(chain.ts)
        xs.append(chain.xs)
        vs.append(chain.vs)
    return np.concatenate(starts), np.vstack(xs), np.vstack(vs)


def eval_XV(rec, s):
    """Evaluate the backward trajectory (X(s), V(s)) at time(s) s.

    s must lie within [coverage_floor, t0] up to the domain tolerance.
    At a breakpoint the leg starting there (the later one in trace order)
    is used, so X is continuous and V takes its post-event value.
    """
    s_arr = np.atleast_1d(np.asarray(s, float))
    tol = rec.domain.tol
    floor = rec.coverage_floor
    if np.any(s_arr > rec.t0 + tol) or np.any(s_arr < floor - tol):
        raise TimeOutOfRange(
            f"time outside covered interval [{floor}, {rec.t0}]")
    starts, xs, vs = _flatten(rec)
    # starts is strictly decreasing; find the last leg with start >= s
    idx = np.searchsorted(-starts, -s_arr, side="right") - 1
    idx = np.clip(idx, 0, len(starts) - 1)
    ndim = rec.domain.ndim
    back = (starts[idx] - s_arr)[:, None]
    X = xs[idx] - back * vs[idx, :ndim]
    V = vs[idx]
    if np.isscalar(s) or np.ndim(s) == 0:
        return X[0], V[0]
    return X, V


def unfold_axial(y1, L):
    """Fold the unfolded axial coordinate y1 back into [-L, L].

    Returns (x1, sign): the folded position and the orientation of the
    axial velocity relative to the unfolded straight line.  The map has
    period 4L and is the identity (sign +1) on [-L, L].
    """
    y1 = np.asarray(y1, float)
    z = np.mod(y1 + L, 4.0 * L)
    x1 = L - np.abs(z - 2.0 * L)
    sign = np.where(z < 2.0 * L, 1, -1)
    if y1.ndim == 0:
        return float(x1), int(sign)
    return x1, sign


def as_jsonable(rec, seed=None):
    """Flatten a record into plain types for JSON-lines serialization."""
    return {
        "seed": seed,
        "x0": rec.x0.tolist(),
        "v0": rec.v0.tolist(),
        "t0": rec.t0,
        "events": [
            {"t": ev.t, "x": ev.x.tolist(), "v": ev.v.tolist(),
             "chain_len": ev.chain_len}
            for ev in rec.events
        ],
        "terminal": rec.terminal,
        "n_diffuse": rec.n_diffuse,
    }
