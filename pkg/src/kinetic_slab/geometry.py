"""Spatial domains: finite cylinder and its 2-D rectangular analog.

Both domains are slabs between two flat caps at x1 = -L and x1 = +L, closed
transversely by a lateral wall (a cylinder of radius R, or the lines x2 = 0
and x2 = H in the rectangle).  The caps reflect specularly, the lateral wall
diffusely, so boundary classification is part of the geometry.

Backward exit times follow the ray x - s*v: the cap crossing is a linear
solve, the lateral crossing the positive root of |x_perp - s v_perp|^2 = R^2.
Exit points are re-projected onto the boundary to keep long reflection chains
from drifting off the surface.
"""

from dataclasses import dataclass, field

import numpy as np

SPECULAR = "specular"
DIFFUSE = "diffuse"
GRAZING = "grazing"

# region codes used by the vectorized path
_SPEC_CODE, _DIFF_CODE = 0, 1


class NotOnBoundary(ValueError):
    pass


class ZeroVelocity(ValueError):
    pass


@dataclass(frozen=True)
class Domain:
    """Slab domain with specular caps at x1 = +-L and a diffuse lateral wall.

    kind is "cylinder3d" (positions in R^3, lateral wall x2^2+x3^2 = R^2) or
    "rect2d" (positions in R^2, lateral walls x2 in {0, H}).  Velocities are
    3-D in both cases; the rectangle simply transports v3 trivially.
    """

    kind: str
    L: float
    R: float = 0.0
    H: float = 0.0
    tol: float = field(init=False)

    def __post_init__(self):
        if self.kind not in ("cylinder3d", "rect2d"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.L <= 0:
            raise ValueError("half-length L must be positive")
        if self.kind == "cylinder3d" and self.R <= 0:
            raise ValueError("cylinder radius R must be positive")
        if self.kind == "rect2d" and self.H <= 0:
            raise ValueError("rectangle height H must be positive")
        object.__setattr__(self, "tol", 1e-9 * max(self.L, self.transverse))

    @classmethod
    def cylinder(cls, L, R):
        return cls(kind="cylinder3d", L=float(L), R=float(R))

    @classmethod
    def rect(cls, L, H):
        return cls(kind="rect2d", L=float(L), H=float(H))

    @property
    def transverse(self):
        """Transverse extent: R for the cylinder, H for the rectangle."""
        return self.R if self.kind == "cylinder3d" else self.H

    @property
    def ndim(self):
        return 3 if self.kind == "cylinder3d" else 2


@dataclass
class BoundaryHit:
    """One backward boundary crossing of the ray x - s*v."""

    t_b: float
    x_b: np.ndarray
    normal: np.ndarray  # unit outward normal, always length 3
    region: str
    grazing: bool = False


@dataclass
class BatchBoundaryHit:
    """Vectorized boundary crossings; region is an int code array."""

    t_b: np.ndarray
    x_b: np.ndarray
    normal: np.ndarray
    region: np.ndarray  # 0 = specular cap, 1 = diffuse lateral
    grazing: np.ndarray


def classify_boundary(dom, x):
    """Classify a boundary point into (region, grazing_flag).

    Cap membership (|x1 -+ L| within tolerance) wins over the lateral wall;
    points on the edge circle / corners are classified specular with the
    grazing flag set.  Raises NotOnBoundary for points off the surface.
    """
    x = np.asarray(x, float)
    on_cap = abs(abs(x[0]) - dom.L) <= dom.tol
    if dom.kind == "cylinder3d":
        on_lat = abs(np.hypot(x[1], x[2]) - dom.R) <= dom.tol
        interior_ax = abs(x[0]) <= dom.L + dom.tol
        interior_tr = np.hypot(x[1], x[2]) <= dom.R + dom.tol
    else:
        on_lat = min(abs(x[1]), abs(x[1] - dom.H)) <= dom.tol
        interior_ax = abs(x[0]) <= dom.L + dom.tol
        interior_tr = -dom.tol <= x[1] <= dom.H + dom.tol
    if not (interior_ax and interior_tr) or not (on_cap or on_lat):
        raise NotOnBoundary(f"point {x} is not on the boundary")
    if on_cap:
        return SPECULAR, bool(on_lat)
    return DIFFUSE, False


def outward_normal(dom, x, region):
    """Unit outward normal (3-vector) at a boundary point."""
    x = np.asarray(x, float)
    if region == SPECULAR:
        return np.array([np.sign(x[0]), 0.0, 0.0])
    if dom.kind == "cylinder3d":
        r = np.hypot(x[1], x[2])
        return np.array([0.0, x[1] / r, x[2] / r])
    return np.array([0.0, 1.0 if x[1] > 0.5 * dom.H else -1.0, 0.0])


def exit_times(dom, X, V):
    """Vectorized backward exit solve for rays X[i] - s*V[i].

    X has shape (n, ndim), V has shape (n, 3).  Returns a BatchBoundaryHit
    with exit points re-projected exactly onto the boundary surface.
    """
    X = np.atleast_2d(np.asarray(X, float))
    V = np.atleast_2d(np.asarray(V, float))
    n = X.shape[0]
    if np.any(np.sum(V * V, axis=1) == 0.0):
        raise ZeroVelocity("zero velocity has no exit time")

    v1 = V[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        # backward cap crossing: x1 - s*v1 = -sign(v1)*L
        s_cap = np.where(
            v1 > 0, (X[:, 0] + dom.L) / v1,
            np.where(v1 < 0, (X[:, 0] - dom.L) / v1, np.inf),
        )

    if dom.kind == "cylinder3d":
        a = V[:, 1] ** 2 + V[:, 2] ** 2
        b = X[:, 1] * V[:, 1] + X[:, 2] * V[:, 2]
        c = X[:, 1] ** 2 + X[:, 2] ** 2 - dom.R**2
        disc = b * b - a * c
        with np.errstate(divide="ignore", invalid="ignore"):
            s_lat = np.where(a > 0, (b + np.sqrt(np.maximum(disc, 0.0))) / a, np.inf)
        tangent = (a > 0) & (disc < (dom.tol * dom.R) ** 2)
    else:
        v2 = V[:, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            s_lat = np.where(
                v2 > 0, X[:, 1] / v2,
                np.where(v2 < 0, (X[:, 1] - dom.H) / v2, np.inf),
            )
        tangent = np.zeros(n, bool)

    hits_cap = s_cap <= s_lat
    t_b = np.where(hits_cap, s_cap, s_lat)
    x_b = X - t_b[:, None] * V[:, : dom.ndim]

    normal = np.zeros((n, 3))
    region = np.where(hits_cap, _SPEC_CODE, _DIFF_CODE)
    grazing = (np.abs(s_cap - s_lat) <= dom.tol) | (tangent & ~hits_cap)

    # re-project onto the exact surface and fill normals
    cap = hits_cap
    x_b[cap, 0] = np.sign(x_b[cap, 0]) * dom.L
    normal[cap, 0] = np.sign(x_b[cap, 0])
    lat = ~hits_cap
    if dom.kind == "cylinder3d":
        r = np.hypot(x_b[lat, 1], x_b[lat, 2])
        scale = np.where(r > 0, dom.R / np.where(r > 0, r, 1.0), 0.0)
        x_b[lat, 1] *= scale
        x_b[lat, 2] *= scale
        normal[lat, 1] = x_b[lat, 1] / dom.R
        normal[lat, 2] = x_b[lat, 2] / dom.R
    else:
        top = lat & (V[:, 1] < 0)
        bot = lat & (V[:, 1] > 0)
        x_b[top, 1] = dom.H
        x_b[bot, 1] = 0.0
        normal[top, 1] = 1.0
        normal[bot, 1] = -1.0

    return BatchBoundaryHit(t_b=t_b, x_b=x_b, normal=normal,
                            region=region, grazing=grazing)


def exit_time(dom, x, v):
    """Backward exit of the single ray x - s*v as a BoundaryHit."""
    batch = exit_times(dom, np.asarray(x, float)[None, :], np.asarray(v, float)[None, :])
    region = SPECULAR if batch.region[0] == _SPEC_CODE else DIFFUSE
    return BoundaryHit(
        t_b=float(batch.t_b[0]),
        x_b=batch.x_b[0],
        normal=batch.normal[0],
        region=region,
        grazing=bool(batch.grazing[0]),
    )
