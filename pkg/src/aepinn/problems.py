"""Built-in benchmark problems with exact solutions and manufactured data.

Every problem supplies closed-form piecewise exact solutions and diffusion
coefficients as jet-evaluable fields; the right-hand sides are manufactured
from them: f = alpha*lap(u) + grad(alpha).grad(u) inside each subdomain,
beta/rho are the value/flux jumps of the exact solution across each
interface, and h traces the exact solution on the box boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import geometry, jets
from .geometry import DomainSpec, NotOnInterfaceError, as_points
from .networks import Model, ParamLayout


class UnknownProblemError(ValueError):
    pass


def constant_field(value, dim):
    def field(x, order):
        return jets.constant_jet(np.full(len(x), float(value)), dim, order)

    return field


@dataclass
class ProblemSpec:
    """Geometry plus exact solution/coefficient fields and derived data."""

    id: str
    domain: DomainSpec
    exact: list
    alpha: list
    test_grid_shape: tuple
    kappa: int = None
    params: dict = dataclass_field(default_factory=dict)

    @property
    def dim(self):
        return self.domain.dim

    @property
    def n_subdomains(self):
        return self.domain.n_subdomains

    @property
    def n_interfaces(self):
        return len(self.domain.interfaces)

    # -- exact solution -----------------------------------------------------
    def u_exact(self, x):
        """Piecewise exact values; interface points evaluate on side 1."""
        x = as_points(x, self.dim)
        sub = self.domain.subdomain_of(x)
        out = np.empty(len(x))
        for i in range(self.n_subdomains):
            mask = sub == i
            if np.any(mask):
                out[mask] = self.exact[i](x[mask], 0).value
        return out

    # -- manufactured data ----------------------------------------------------
    def source(self, x):
        """f = div(alpha grad u) at interior points, from the closed forms."""
        x = as_points(x, self.dim)
        sub, on = self.domain.classify(x)
        if np.any(on >= 0):
            raise NotOnInterfaceError("source term is undefined on the interface")
        out = np.empty(len(x))
        for i in range(self.n_subdomains):
            mask = sub == i
            if not np.any(mask):
                continue
            u = self.exact[i](x[mask], 2)
            a = self.alpha[i](x[mask], 1)
            out[mask] = a.value * jets.laplacian(u) + jets.dot_grads(a, u)
        return out

    def interface_data(self, k, x):
        """(beta, rho): value jump and flux jump of the exact solution."""
        x = as_points(x, self.dim)
        ls = self.domain.interfaces[k]
        i, j = self.domain.interface_sides[k]
        beta = geometry.jump(ls, self.exact[i], self.exact[j], x)
        rho = geometry.flux_jump(
            ls, (self.exact[i], self.exact[j]), (self.alpha[i], self.alpha[j]), x
        )
        return beta, rho

    def boundary_values(self, x):
        x = as_points(x, self.dim)
        lo, hi = self.domain.bounds[:, 0], self.domain.bounds[:, 1]
        on_boundary = np.any((x == lo) | (x == hi), axis=1)
        if not np.all(on_boundary):
            raise ValueError("boundary data requested at an interior point")
        return self.u_exact(x)

    # -- evaluation grid --------------------------------------------------------
    def test_grid(self, per_axis=None):
        shape = tuple(per_axis for _ in self.test_grid_shape) if per_axis else self.test_grid_shape
        axes = [
            np.linspace(lo, hi, num)
            for (lo, hi), num in zip(self.domain.bounds, shape)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


class ExactSolutionModel(Model):
    """The exact solution wearing the model interface (zero parameters)."""

    kind = "exact"

    def __init__(self, spec):
        super().__init__(ParamLayout([]), spec.dim, spec.n_subdomains)
        self.spec = spec

    def domain_subdomains(self, x):
        return self.spec.domain.subdomain_of(x)

    def side_field(self, i, params=None):
        return self.spec.exact[i]

    def to_config(self):
        return {"kind": self.kind, "problem": self.spec.id}


# ---------------------------------------------------------------------------
# problem definitions
# ---------------------------------------------------------------------------

_X_GAMMA = 1.0 / 3.0


def _ex1():
    def u_left(x, order):
        (c,) = jets.coord_jets(x, order)
        return c * (_X_GAMMA - 1.0)

    def u_right(x, order):
        (c,) = jets.coord_jets(x, order)
        return (c + (-1.0)) * _X_GAMMA

    domain = geometry.two_subdomain_domain([[0.0, 1.0]], geometry.PLANE_THIRD)
    return ProblemSpec(
        id="ex1",
        domain=domain,
        exact=[u_left, u_right],
        alpha=[constant_field(1.0, 1), constant_field(1.0, 1)],
        test_grid_shape=(1000,),
    )


def _ex2(kappa):
    if kappa not in (2, 3, 4):
        raise UnknownProblemError(f"ex2 kappa must be 2, 3 or 4, got {kappa}")
    big, small = 10.0**kappa, 10.0**-kappa

    def u_in(x, order):
        cx, cy = jets.coord_jets(x, order)
        return jets.exp(cx * cy) * big

    def u_out(x, order):
        cx, cy = jets.coord_jets(x, order)
        return jets.mul(jets.sin(cx), jets.sin(cy)) * small

    domain = geometry.two_subdomain_domain([[-1.0, 1.0]] * 2, geometry.FLOWER)
    return ProblemSpec(
        id="ex2",
        domain=domain,
        exact=[u_in, u_out],
        alpha=[constant_field(1.0, 2), constant_field(1.0, 2)],
        test_grid_shape=(200, 200),
        kappa=kappa,
    )


def _ex3():
    def u_in(x, order):
        cx, cy = jets.coord_jets(x, order)
        return cx * cx + cy * cy

    def u_out(x, order):
        cx, cy = jets.coord_jets(x, order)
        s = cx * cx + cy * cy
        return s * s * 0.1 - jets.log(jets.sqrt(s) * 2.0) * 0.01

    domain = geometry.two_subdomain_domain([[-1.0, 1.0]] * 2, geometry.STAR)
    return ProblemSpec(
        id="ex3",
        domain=domain,
        exact=[u_in, u_out],
        alpha=[constant_field(4.0, 2), constant_field(10.0, 2)],
        test_grid_shape=(200, 200),
    )


def _ex4():
    def u_in(x, order):
        cx, cy, cz = jets.coord_jets(x, order)
        return jets.mul(jets.mul(jets.sin(cx * 2.0), jets.cos(cy * 2.0)), jets.exp(cz))

    def u_out(x, order):
        cx, cy, cz = jets.coord_jets(x, order)
        t = (cy - cx) * (1.0 / 3.0)
        t2 = t * t
        t3 = t2 * t
        t5 = t3 * t2
        poly = t5 * 16.0 - t3 * 20.0 + t * 5.0
        return jets.mul(jets.mul(poly, jets.log(cx + cy + 3.0)), jets.cos(cz))

    def alpha_in(x, order):
        cx, cy, cz = jets.coord_jets(x, order)
        two_pi = 2.0 * np.pi
        wave = jets.mul(
            jets.cos((cx + cy) * two_pi), jets.sin((cx - cy) * two_pi)
        )
        return (jets.mul(wave, jets.cos(cz)) * 0.2 + 1.0) * 10.0

    domain = geometry.two_subdomain_domain([[-1.0, 1.0]] * 3, geometry.ELLIPSOID)
    return ProblemSpec(
        id="ex4",
        domain=domain,
        exact=[u_in, u_out],
        alpha=[alpha_in, constant_field(1.0, 3)],
        test_grid_shape=(50, 50, 50),
    )


def _ex5():
    def u1(x, order):
        cx, cy, cz = jets.coord_jets(x, order)
        return jets.exp(jets.mul(cx * cy, cz))

    def u2(x, order):
        cx, cy, cz = jets.coord_jets(x, order)
        return jets.mul(jets.sin((cx + cy) * np.pi), jets.exp(jets.mul(cx * cy, cz))) * 0.1

    def u3(x, order):
        cx, cy, cz = jets.coord_jets(x, order)
        return cx * cx * 4.0 + cy * cy + cz * cz * 2.0

    def u4(x, order):
        cx, cy, cz = jets.coord_jets(x, order)
        return jets.mul(jets.exp(cx - cz), jets.cos(cy * (0.5 * np.pi)))

    domain = geometry.bubble_domain()
    return ProblemSpec(
        id="ex5",
        domain=domain,
        exact=[u1, u2, u3, u4],
        alpha=[constant_field(1.0, 3) for _ in range(4)],
        test_grid_shape=(100, 100, 100),
    )


PROBLEM_IDS = ("ex1", "ex2", "ex3", "ex4", "ex5")


def builtin(problem_id):
    """Problem by id; ex2 accepts a parameter suffix, e.g. 'ex2:k=3'."""
    name, _, suffix = str(problem_id).partition(":")
    kwargs = {}
    if suffix:
        for part in suffix.split(","):
            key, _, value = part.partition("=")
            kwargs[key.strip()] = value.strip()
    if name == "ex1":
        spec = _ex1()
    elif name == "ex2":
        spec = _ex2(int(kwargs.pop("k", 2)))
    elif name == "ex3":
        spec = _ex3()
    elif name == "ex4":
        spec = _ex4()
    elif name == "ex5":
        spec = _ex5()
    else:
        raise UnknownProblemError(
            f"unknown problem {problem_id!r}; valid ids: {', '.join(PROBLEM_IDS)}"
        )
    if kwargs:
        raise UnknownProblemError(f"unrecognized parameters for {name}: {kwargs}")
    return spec
