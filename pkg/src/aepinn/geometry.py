"""Level sets, subdomain classification, interface normals, jump operators.

A scalar field is any callable ``field(x, order) -> Jet`` taking an (n, d)
point batch.  Level sets are fields with an optional surface
parametrization used by the interface samplers.

Sign convention, applied uniformly: phi < 0 inside (side 1), phi > 0
outside (side 2); the unit normal grad(phi)/|grad(phi)| therefore points
from side 1 into side 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import jets

INTERFACE_TOL = 1e-12


class OutOfDomainError(ValueError):
    pass


class NotOnInterfaceError(ValueError):
    pass


class DegenerateGradientError(ValueError):
    pass


class MissingParametrizationError(ValueError):
    pass


def as_points(x, dim=None):
    """Coerce to a float64 (n, d) point batch; a single point may be 1-D."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ValueError(f"expected points of shape (n, d), got {x.shape}")
    if dim is not None and x.shape[1] != dim:
        raise ValueError(f"expected dimension {dim}, got {x.shape[1]}")
    return x


@dataclass(frozen=True)
class LevelSet:
    """Closed-form level-set function with jet evaluation.

    ``parametrization`` maps (n, k) parameter rows onto the surface; k = 0
    marks a single-point interface (1-D problems) and ``param_ranges`` then
    is empty.  ``area_params`` flags parameters sampled uniformly in an
    area-preserving variable (cos of the polar angle for spheres).
    """

    name: str
    dim: int
    field: object
    parametrization: object = None
    param_ranges: tuple = ()
    point: tuple = ()

    def __call__(self, x, order=0):
        return self.field(as_points(x, self.dim), order)

    def phi(self, x):
        return self(x, 0).value

    def grad_phi(self, x):
        return self(x, 1).grad

    def map_params(self, t):
        if self.parametrization is None:
            if self.point:
                return np.tile(np.asarray(self.point, dtype=np.float64), (len(t), 1))
            raise MissingParametrizationError(self.name)
        return self.parametrization(np.asarray(t, dtype=np.float64))


def normal(ls, x):
    """Unit outward normal grad(phi)/|grad(phi)| at interface points."""
    g = ls.grad_phi(x)
    norms = np.sqrt((g * g).sum(axis=1))
    if np.any(norms <= 1e-12):
        raise DegenerateGradientError(f"level set {ls.name!r} has a degenerate gradient")
    return g / norms[:, None]


@dataclass
class DomainSpec:
    """Axis-aligned box partitioned by one or more level sets.

    ``interface_sides[k]`` gives the (negative-side, positive-side)
    subdomain indices of interface k; ``transmitter_levelsets[i]`` is the
    scalar field fed to subdomain i's transmitter network.
    """

    bounds: np.ndarray
    interfaces: list
    n_subdomains: int
    subdomain_rule: object
    interface_sides: list
    transmitter_levelsets: list = dataclass_field(default_factory=list)

    def __post_init__(self):
        self.bounds = np.asarray(self.bounds, dtype=np.float64)
        if not self.transmitter_levelsets:
            # default: every subdomain listens to the single interface
            self.transmitter_levelsets = [self.interfaces[0]] * self.n_subdomains

    @property
    def dim(self):
        return self.bounds.shape[0]

    def contains(self, x):
        x = as_points(x, self.dim)
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return np.all((x >= lo) & (x <= hi), axis=1)

    def phi_values(self, x):
        x = as_points(x, self.dim)
        return np.stack([ls.phi(x) for ls in self.interfaces], axis=1)

    def subdomain_of(self, x):
        """Sign-based subdomain index per point; exact zeros fall to side 1."""
        return self.subdomain_rule(self.phi_values(x))

    def classify(self, x, tol=INTERFACE_TOL):
        """Subdomain indices plus an interface mark (-1 when off-interface).

        Points whose |phi_k| <= tol are reported as on interface k; the
        subdomain index still carries the sign-based side for convenience.
        """
        x = as_points(x, self.dim)
        if not np.all(self.contains(x)):
            raise OutOfDomainError("point outside the computational box")
        phis = self.phi_values(x)
        sub = self.subdomain_rule(phis)
        on = np.full(len(x), -1, dtype=np.intp)
        for k in range(phis.shape[1] - 1, -1, -1):
            on[np.abs(phis[:, k]) <= tol] = k
        return sub, on

    def classify_point(self, x):
        """('subdomain', i) or ('interface', k) for a single point."""
        sub, on = self.classify(np.asarray(x, dtype=np.float64)[None, :])
        if on[0] >= 0:
            return ("interface", int(on[0]))
        return ("subdomain", int(sub[0]))


def two_sided_rule(phis):
    # phi <= 0 -> side 1 (index 0); exact zeros land on side 1
    return np.where(phis[:, 0] > 0.0, 1, 0).astype(np.intp)


def jump(ls, f1, f2, x, tol=INTERFACE_TOL):
    """[[f]] = f1 - f2 at interface points of ``ls`` (side-1 minus side-2)."""
    x = as_points(x)
    if np.any(np.abs(ls.phi(x)) > tol):
        raise NotOnInterfaceError("jump requested away from the interface")
    return f1(x, 0).value - f2(x, 0).value


def flux_jump(ls, fields, alphas, x, n=None, tol=INTERFACE_TOL):
    """[[alpha grad(f)]] . n at interface points.

    ``fields`` and ``alphas`` are the (side-1, side-2) scalar fields; the
    normal defaults to the level-set normal (side 1 toward side 2).
    """
    x = as_points(x)
    if np.any(np.abs(ls.phi(x)) > tol):
        raise NotOnInterfaceError("flux jump requested away from the interface")
    if n is None:
        n = normal(ls, x)
    f1, f2 = fields
    a1, a2 = alphas
    g1 = f1(x, 1).grad * a1(x, 0).value[:, None]
    g2 = f2(x, 1).grad * a2(x, 0).value[:, None]
    return ((g1 - g2) * n).sum(axis=1)


# ---------------------------------------------------------------------------
# built-in level sets
# ---------------------------------------------------------------------------


def _plane_third_field(x, order):
    cs = jets.coord_jets(x, order)
    return cs[0] + (-1.0 / 3.0)


def _radial_field(radius_of_theta):
    """sqrt(x^2 + y^2) - r(theta) with theta = atan2(y, x)."""

    def field(x, order):
        cx, cy = jets.coord_jets(x, order)
        r = jets.sqrt(cx * cx + cy * cy)
        theta = jets.atan2(cy, cx)
        return r - radius_of_theta(theta)

    return field


def _flower_radius(theta):
    return jets.sin(theta * 20.0) * 0.2 + 0.4


_STAR_COEFFS = ((0.3, 3.0, 0.5), (-0.1, 4.0, 1.8), (0.15, 7.0, 0.0))
_STAR_R0 = 0.483


def _star_radius(theta):
    total = None
    for beta_k, eta_k, theta_k in _STAR_COEFFS:
        term = jets.cos((theta - theta_k) * eta_k) * beta_k
        total = term if total is None else total + term
    return (total + 1.0) * _STAR_R0


def _ellipsoid_field(x, order):
    cx, cy, cz = jets.coord_jets(x, order)
    return cx * cx * 2.0 + cy * cy * 3.0 + cz * cz * 6.0 + (-1.69)


def _sphere_field(center, radius):
    cx0, cy0, cz0 = center

    def field(x, order):
        cx, cy, cz = jets.coord_jets(x, order)
        dx, dy, dz = cx + (-cx0), cy + (-cy0), cz + (-cz0)
        return dx * dx + dy * dy + dz * dz + (-(radius * radius))

    return field


def product_levelset(name, components):
    """Level set vanishing on the union of the components' zero sets."""

    def field(x, order):
        out = None
        for ls in components:
            j = ls.field(x, order)
            out = j if out is None else jets.mul(out, j)
        return out

    return LevelSet(name=name, dim=components[0].dim, field=field)


def _curve_parametrization(radius_fn):
    def mapper(t):
        theta = t[:, 0]
        tj = jets.Jet(theta, np.ones((len(theta), 1)), None, dim=1)
        r = radius_fn(tj).value
        return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)

    return mapper


def _ellipsoid_parametrization(t):
    theta, c = t[:, 0], t[:, 1]
    s = np.sqrt(1.0 - c * c)
    a, b, cc = 1.3 / np.sqrt(2.0), 1.3 / np.sqrt(3.0), 1.3 / np.sqrt(6.0)
    return np.stack([a * s * np.cos(theta), b * s * np.sin(theta), cc * c], axis=1)


def _sphere_parametrization(center, radius):
    def mapper(t):
        theta, c = t[:, 0], t[:, 1]
        s = np.sqrt(1.0 - c * c)
        return np.stack(
            [
                center[0] + radius * s * np.cos(theta),
                center[1] + radius * s * np.sin(theta),
                center[2] + radius * c,
            ],
            axis=1,
        )

    return mapper


_TWO_PI = 2.0 * np.pi

LEVELSETS = {}


def _register(ls):
    LEVELSETS[ls.name] = ls
    return ls


PLANE_THIRD = _register(
    LevelSet("plane_third", 1, _plane_third_field, point=(1.0 / 3.0,))
)
FLOWER = _register(
    LevelSet(
        "flower",
        2,
        _radial_field(_flower_radius),
        parametrization=_curve_parametrization(_flower_radius),
        param_ranges=((0.0, _TWO_PI),),
    )
)
STAR = _register(
    LevelSet(
        "star",
        2,
        _radial_field(_star_radius),
        parametrization=_curve_parametrization(_star_radius),
        param_ranges=((0.0, _TWO_PI),),
    )
)
ELLIPSOID = _register(
    LevelSet(
        "ellipsoid",
        3,
        _ellipsoid_field,
        parametrization=_ellipsoid_parametrization,
        param_ranges=((0.0, _TWO_PI), (-1.0, 1.0)),
    )
)

_BUBBLES = (
    ((0.25, 0.25, 0.0), 0.2),
    ((0.5, -0.25, 0.0), 0.15),
    ((0.0, -0.25, 0.25), 0.1),
)
BUBBLE_SPHERES = tuple(
    _register(
        LevelSet(
            f"bubble{k + 1}",
            3,
            _sphere_field(center, radius),
            parametrization=_sphere_parametrization(center, radius),
            param_ranges=((0.0, _TWO_PI), (-1.0, 1.0)),
        )
    )
    for k, (center, radius) in enumerate(_BUBBLES)
)


def two_subdomain_domain(bounds, interface):
    return DomainSpec(
        bounds=bounds,
        interfaces=[interface],
        n_subdomains=2,
        subdomain_rule=two_sided_rule,
        interface_sides=[(0, 1)],
    )


def bubble_domain():
    """[-1,1]^3 split by three disjoint spheres into four subdomains."""
    for a in range(3):
        for b in range(a + 1, 3):
            ca, ra = _BUBBLES[a]
            cb, rb = _BUBBLES[b]
            gap = np.linalg.norm(np.subtract(ca, cb))
            if gap <= ra + rb:
                raise ValueError("bubble interfaces must be pairwise disjoint")

    def rule(phis):
        sub = np.full(len(phis), 3, dtype=np.intp)
        for k in range(2, -1, -1):
            sub[phis[:, k] <= 0.0] = k
        return sub

    spheres = list(BUBBLE_SPHERES)
    return DomainSpec(
        bounds=[[-1.0, 1.0]] * 3,
        interfaces=spheres,
        n_subdomains=4,
        subdomain_rule=rule,
        interface_sides=[(0, 3), (1, 3), (2, 3)],
        transmitter_levelsets=spheres + [product_levelset("bubble_union", spheres)],
    )
