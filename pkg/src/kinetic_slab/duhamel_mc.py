"""Backward Monte Carlo point estimator for the linear kinetic equation.

Estimates w(v) f(t, x, v) for
    d_t f + v . grad_x f + nu(v) f = K f + g
with specular caps and an accommodating lateral wall, by simulating the
backward characteristic path: free flight along specular chains, an
exponential collision clock in nu, importance sampling of the signed
collision-kernel row at the nearest lattice node, and flux-measure
resampling at diffuse wall events.  Initial data f0 is scored when a path
reaches time zero; the source g is integrated along every leg with one
stratified time sample.

The estimator is analog (unbiased) up to three documented truncations:
Russian roulette beyond the per-kind depth budget, a hard stop at four
times the budget (counted, continuation scored as zero), and truncation of
continuously sampled wall velocities to the speed cap (counted, folded
into the reported standard error).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .boundary import GridAsymmetry, _axis_of, sample_diffuse, specular_reflect
from .collision import collision_frequency, sqrt_maxwellian, velocity_weight
from .cycles import trace_specular_chain


class NonFiniteWeight(RuntimeError):
    """A path weight or score left the finite float range."""


@dataclass(frozen=True)
class EstimatorConfig:
    """Knobs of the backward estimator.

    `table` supplies the collision kernel rows (required when collisions
    are on); `grid` defaults to the table's velocity lattice and switches
    wall resampling to the discrete renormalized flux measure, matching
    the deterministic solver's wall treatment.  `alpha` mixes diffuse
    re-emission (probability alpha) with specular bounce at the lateral
    wall.  `theta` weights the reported estimate by e^{theta |v|^2}.
    """

    domain: object
    depth_max: int = 20
    samples: int = 400
    roulette_p: float = 0.8
    theta: float = 0.0
    collisions: bool = True
    source: bool = True
    table: object = None
    grid: object = None
    alpha: float = 1.0
    v_cap: float = None

    def __post_init__(self):
        if self.depth_max < 1:
            raise ValueError("depth_max must be at least 1")
        if not 0.0 < self.roulette_p <= 1.0:
            raise ValueError("roulette_p must lie in (0, 1]")
        if self.samples < 1:
            raise ValueError("samples must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 <= self.theta < 0.25:
            raise ValueError("theta must lie in [0, 1/4)")
        if self.collisions and self.table is None:
            raise ValueError("collision sampling requires a kernel table")
        if self.grid is None and self.table is not None:
            object.__setattr__(self, "grid", self.table.grid)
        if self.v_cap is None:
            cap = self.grid.v_max if self.grid is not None else 8.0
            object.__setattr__(self, "v_cap", float(cap))

    @property
    def hard_cap(self):
        return 4 * self.depth_max


@dataclass
class PointEstimate:
    mean: float
    stderr: float
    n_effective: int
    depth_histogram: np.ndarray
    n_truncated: int = 0
    n_hard_stopped: int = 0


class _TiltedRows:
    """Cumulative tables for drawing post-collision velocities.

    A collision at lattice row i draws the next velocity with probability
    proportional to |K_ij| sqrt(mu_j) and multiplies the path weight by
    sign(K_ij) T_i / (nu sqrt(mu_j)), T_i = sum_j |K_ij| sqrt(mu_j).  The
    sqrt(mu) tilt makes each draw's 1/sqrt(mu) cancel against the next
    event's sqrt(mu) factor, so weights stay O(1) per event; sampling the
    plain |K_ij| instead leaves the expectation dominated by rare paths
    with exponentially large weights.
    """

    def __init__(self, table):
        self.K = table.K
        self.sqrt_mu = table.grid.sqrt_mu
        self._cum = {}

    def draw(self, i, rng):
        cum = self._cum.get(i)
        if cum is None:
            cum = np.cumsum(np.abs(self.K[i]) * self.sqrt_mu)
            self._cum[i] = cum
        j = int(np.searchsorted(cum, rng.random() * cum[-1]))
        mult = float(cum[-1]) / self.sqrt_mu[j]
        return j, math.copysign(mult, self.K[i, j])


class _WallSampler:
    """Draws incoming wall velocities from the flux-weighted measure.

    On an axis-aligned wall with a velocity lattice present, the draw uses
    the discrete renormalized measure sigma_j ~ mu_j (n.u_j)_+ w_j, so the
    estimator sees exactly the wall the deterministic solver applies.
    Otherwise (cylindrical wall, or no lattice) it falls back to the
    continuous half-space Gaussian, redrawing any sample beyond the speed
    cap and counting the rejections.
    """

    def __init__(self, cfg):
        self.grid = cfg.grid
        self.v_cap = cfg.v_cap
        self.n_draws = 0
        self.n_truncated = 0
        self._cum = {}

    def _continuous(self, normal, rng):
        for _ in range(100):
            u = sample_diffuse(normal, rng)
            if u @ u <= self.v_cap**2:
                return u
            self.n_truncated += 1
        raise NonFiniteWeight("wall resampling failed to land inside the "
                              f"speed cap {self.v_cap}")

    def draw(self, normal, rng):
        self.n_draws += 1
        if self.grid is None:
            return self._continuous(normal, rng)
        try:
            axis, sgn = _axis_of(normal)
        except GridAsymmetry:
            return self._continuous(normal, rng)
        key = (axis, sgn)
        if key not in self._cum:
            comp = sgn * self.grid.nodes[:, axis]
            sigma = np.where(comp > 0,
                             self.grid.mu * comp * self.grid.weights, 0.0)
            self._cum[key] = np.cumsum(sigma)
        cum = self._cum[key]
        j = int(np.searchsorted(cum, rng.random() * cum[-1]))
        return self.grid.nodes[j].copy()


def _chain_state(chain, s):
    """Position and velocity along one specular chain at time s."""
    idx = int(np.searchsorted(-chain.ts, -s, side="right")) - 1
    idx = max(idx, 0)
    ndim = chain.xs.shape[1]
    x = chain.xs[idx] - (chain.ts[idx] - s) * chain.vs[idx, :ndim]
    return x, chain.vs[idx]


def _sample_path(t, x, v, f0, g, cfg, rng, wall, rows):
    """Score one backward path.  Returns (score, depth, hard_stopped)."""
    w_path = 1.0
    score = 0.0
    d_coll = d_diff = 0
    t_cur = float(t)
    x_cur = np.asarray(x, float)
    v_cur = np.asarray(v, float)

    while True:
        nu_v = collision_frequency(v_cur)
        chain = trace_specular_chain(cfg.domain, x_cur, v_cur, t_cur)
        reaches_zero = chain.truncated or chain.arrival_t <= 0.0
        leg_end = 0.0 if reaches_zero else chain.arrival_t
        delta = t_cur - leg_end

        if cfg.source and g is not None and delta > 0.0:
            s_src = leg_end + rng.random() * delta
            Xs, Vs = _chain_state(chain, s_src)
            score += (w_path * delta * math.exp(-nu_v * (t_cur - s_src))
                      * g(s_src, Xs, Vs))

        s_coll = None
        if cfg.collisions:
            xi = rng.exponential(1.0 / nu_v)
            if xi < delta:
                s_coll = t_cur - xi

        if s_coll is not None:
            Xc, Vc = _chain_state(chain, s_coll)
            j, mult = rows.draw(cfg.grid.nearest_index(Vc), rng)
            w_path *= mult / nu_v
            d_coll += 1
            if d_coll + d_diff >= cfg.hard_cap:
                return score, cfg.hard_cap, True
            if d_coll > cfg.depth_max:
                if rng.random() >= cfg.roulette_p:
                    break
                w_path /= cfg.roulette_p
            if not math.isfinite(w_path):
                raise NonFiniteWeight(
                    f"path weight diverged at t={s_coll:.4g} after "
                    f"{d_coll} collisions / {d_diff} wall events")
            t_cur, x_cur, v_cur = s_coll, Xc, cfg.grid.nodes[j].copy()
            continue

        if not cfg.collisions:
            w_path *= math.exp(-nu_v * delta)

        if reaches_zero:
            if f0 is not None:
                X0, V0 = _chain_state(chain, 0.0)
                score += w_path * f0(X0, V0)
            break

        v_arr = chain.vs[-1]
        diffuse = cfg.alpha >= 1.0 or (cfg.alpha > 0.0
                                       and rng.random() < cfg.alpha)
        if diffuse:
            u = wall.draw(chain.arrival_normal, rng)
            w_path *= sqrt_maxwellian(v_arr) / sqrt_maxwellian(u)
            d_diff += 1
            if d_coll + d_diff >= cfg.hard_cap:
                return score, cfg.hard_cap, True
            if d_diff > cfg.depth_max:
                if rng.random() >= cfg.roulette_p:
                    break
                w_path /= cfg.roulette_p
            if not math.isfinite(w_path):
                raise NonFiniteWeight(
                    f"path weight diverged at wall event {d_diff} "
                    f"(arrival speed {np.linalg.norm(v_arr):.4g})")
            t_cur, x_cur, v_cur = leg_end, chain.arrival_x, u
        else:
            t_cur = leg_end
            x_cur = chain.arrival_x
            v_cur = specular_reflect(chain.arrival_normal, v_arr)

    if not math.isfinite(score):
        raise NonFiniteWeight(
            f"path score diverged ({d_coll} collisions, {d_diff} wall events)")
    return score, d_coll + d_diff, False


def _estimate_with_streams(t, x, v, f0, g, cfg, base, key):
    wall = _WallSampler(cfg)
    rows = _TiltedRows(cfg.table) if cfg.collisions else None
    scores = np.empty(cfg.samples)
    hist = np.zeros(cfg.hard_cap + 1, dtype=np.int64)
    n_hard = 0
    for i in range(cfg.samples):
        r = _rng.sample_stream(base, key, i)
        s, depth, hard = _sample_path(t, x, v, f0, g, cfg, r, wall, rows)
        scores[i] = s
        hist[min(depth, cfg.hard_cap)] += 1
        n_hard += hard
    scores *= velocity_weight(v, cfg.theta)
    mean = math.fsum(scores) / cfg.samples
    var = math.fsum((scores - mean) ** 2) / max(cfg.samples - 1, 1)
    stderr = math.sqrt(var / cfg.samples)
    if wall.n_truncated:
        # crude accounting of mass lost to the wall speed cap
        stderr += wall.n_truncated / wall.n_draws * abs(mean)
    return PointEstimate(mean=mean, stderr=stderr,
                         n_effective=cfg.samples - n_hard,
                         depth_histogram=hist,
                         n_truncated=wall.n_truncated,
                         n_hard_stopped=n_hard)


def estimate_f(t, x, v, f0, g, cfg, rng):
    """Monte Carlo estimate of w(v) f(t, x, v) from cfg.samples paths.

    f0(x, v) supplies the initial data, g(t, x, v) the source; either may
    be None.  Per-sample streams derive from a base seed (drawn once from
    rng) and the probe content, so estimates are reproducible.
    """
    if t <= 0.0:
        raise ValueError("t must be positive")
    base = _rng.base_seed_from(rng)
    return _estimate_with_streams(t, x, v, f0, g, cfg, base,
                                  _rng.probe_key(x, v))


def field_scan(t, probes, cfg, rng, f0=None, g=None):
    """Independent estimates at each (x, v) probe.

    Streams are keyed by probe content, so permuting the probe list
    permutes the results without changing any of them.
    """
    probes = list(probes)
    if not probes:
        raise ValueError("probes must be nonempty")
    base = _rng.base_seed_from(rng)
    return [
        _estimate_with_streams(t, px, pv, f0, g, cfg, base,
                               _rng.probe_key(px, pv))
        for px, pv in probes
    ]
