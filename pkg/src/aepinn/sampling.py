"""Collocation-point generation: Latin hypercube, interior/boundary/interface.

Randomness comes from an in-package SplitMix64 generator so streams are
identical across platforms and numpy versions; everything downstream of a
seed is bit-for-bit reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import MissingParametrizationError

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MAX = (1 << 64) - 1

INTERIOR_TUBE = 1e-6
MIN_ACCEPT_RATE = 1e-4


class ExhaustionError(RuntimeError):
    """Rejection sampling accepted too small a fraction of candidates."""


class Rng:
    """SplitMix64: state_i = seed + i * 0x9E3779B97F4A7C15 (mod 2^64), each
    state finalized by the standard xor-shift/multiply mix.  Doubles take
    the top 53 bits; permutations are Fisher-Yates with rejection-free-bias
    bounded draws."""

    def __init__(self, seed=1234):
        self.seed = int(seed) & _U64_MAX
        self._count = 0

    def _raw(self, n):
        n = int(n)
        idx = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + _GAMMA * idx
            z = (z ^ (z >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
            return z ^ (z >> np.uint64(31))

    def _raw_one(self):
        # same stream as _raw, scalar path in python integers
        self._count += 1
        z = (self.seed + 0x9E3779B97F4A7C15 * self._count) & _U64_MAX
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64_MAX
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64_MAX
        return z ^ (z >> 31)

    def uniform(self, n):
        """n doubles in [0, 1)."""
        return (self._raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def below(self, bound):
        """One integer uniform in [0, bound), by rejection."""
        limit = (_U64_MAX + 1) - ((_U64_MAX + 1) % bound)
        while True:
            value = self._raw_one()
            if value < limit:
                return value % bound

    def permutation(self, n):
        perm = np.arange(n, dtype=np.intp)
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm


@dataclass
class PointSet:
    """Tagged collocation points.

    kind is 'interior', 'boundary', or 'interface'; subdomain is the
    0-based subdomain index for interior sets, interface the 0-based
    interface index for interface sets.
    """

    points: np.ndarray
    kind: str
    subdomain: int = None
    interface: int = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)

    def __len__(self):
        return len(self.points)


def lhs(n, bounds, rng):
    """Latin hypercube sample: exactly one point per axis stratum.

    Axes are processed in order 0..d-1; per axis one permutation then one
    batch of uniforms is drawn.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    bounds = np.asarray(bounds, dtype=np.float64)
    d = bounds.shape[0]
    out = np.empty((n, d))
    for axis in range(d):
        lo, hi = bounds[axis]
        strata = rng.permutation(n).astype(np.float64)
        offsets = rng.uniform(n)
        out[:, axis] = lo + (hi - lo) * ((strata + offsets) / n)
    return out


def sample_interior(domain, counts, rng, tube=INTERIOR_TUBE, batch=1024):
    """Per-subdomain interior points by rejection-filtering LHS candidates.

    Candidates within ``tube`` of any interface (measured by raw phi value)
    are discarded so the strong-form residual is never evaluated on a kink.
    """
    counts = list(counts)
    if len(counts) != domain.n_subdomains:
        raise ValueError("one count per subdomain required")
    buckets = [[] for _ in counts]
    drawn = 0
    while any(len(b) < c for b, c in zip(buckets, counts)):
        cand = lhs(batch, domain.bounds, rng)
        drawn += batch
        phis = domain.phi_values(cand)
        clear = np.all(np.abs(phis) > tube, axis=1)
        sub = domain.subdomain_rule(phis)
        for i, c in enumerate(counts):
            need = c - len(buckets[i])
            if need > 0:
                hits = cand[clear & (sub == i)]
                buckets[i].extend(hits[:need])
        for i, c in enumerate(counts):
            if len(buckets[i]) < c and drawn * MIN_ACCEPT_RATE > max(c, len(buckets[i]) + 1) * 10:
                raise ExhaustionError(
                    f"subdomain {i}: {len(buckets[i])}/{c} points after {drawn} candidates"
                )
    return [
        PointSet(np.array(b[:c]).reshape(c, domain.dim), "interior", subdomain=i)
        for i, (b, c) in enumerate(zip(buckets, counts))
    ]


def _face_quotas(n, measures):
    quotas = np.floor(n * measures / measures.sum()).astype(int)
    short = n - quotas.sum()
    fractions = n * measures / measures.sum() - quotas
    for k in np.argsort(-fractions, kind="stable")[:short]:
        quotas[k] += 1
    return [int(q) for q in quotas]


def sample_boundary(domain, n, rng):
    """Points on the box faces, split proportionally to face measure, LHS
    within each face.  Face order: (axis 0 low, axis 0 high, axis 1 low, ...)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    bounds = domain.bounds
    d = bounds.shape[0]
    extents = bounds[:, 1] - bounds[:, 0]
    measures = []
    for axis in range(d):
        others = np.delete(extents, axis)
        m = float(np.prod(others)) if others.size else 1.0
        measures.extend([m, m])
    quotas = _face_quotas(n, np.asarray(measures, dtype=np.float64))
    chunks = []
    for face, quota in enumerate(quotas):
        if quota == 0:
            continue
        axis, side = divmod(face, 2)
        pts = np.empty((quota, d))
        pts[:, axis] = bounds[axis, side]
        free = [a for a in range(d) if a != axis]
        if free:
            pts[:, free] = lhs(quota, bounds[free], rng)
        chunks.append(pts)
    return PointSet(np.concatenate(chunks, axis=0), "boundary")


def sample_interface(ls, n, rng, index=0, tol=1e-12):
    """Interface points from the registered parametrization (LHS in the
    parameter space), all satisfying |phi| <= tol."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if ls.parametrization is None and not ls.point:
        raise MissingParametrizationError(ls.name)
    if ls.parametrization is None:
        pts = ls.map_params(np.zeros((n, 0)))
    else:
        params = lhs(n, np.asarray(ls.param_ranges, dtype=np.float64), rng)
        pts = ls.map_params(params)
    residual = np.abs(ls.phi(pts))
    if np.any(residual > tol):
        raise ValueError(
            f"parametrization of {ls.name!r} missed the surface by {residual.max():.2e}"
        )
    return PointSet(pts, "interface", interface=index)


def dump_points_csv(pointsets, path):
    """CSV schema: x[,y[,z]],tag,subdomain.

    The subdomain column is the 1-based subdomain for interior points, 0
    for boundary points, and the 1-based interface index for interface
    points.
    """
    pointsets = list(pointsets)
    dim = pointsets[0].points.shape[1]
    header = ",".join("xyz"[:dim]) + ",tag,subdomain"
    lines = [header]
    for ps in pointsets:
        if ps.kind == "interior":
            label = ps.subdomain + 1
        elif ps.kind == "interface":
            label = ps.interface + 1
        else:
            label = 0
        for row in ps.points:
            coords = ",".join(repr(float(c)) for c in row)
            lines.append(f"{coords},{ps.kind},{label}")
    text = "\n".join(lines) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    return text


def load_points_csv(path):
    """Inverse of :func:`dump_points_csv`, regrouping rows into PointSets."""
    with open(path) as fh:
        lines = fh.read().strip().split("\n")
    dim = len(lines[0].split(",")) - 2
    groups = {}
    for line in lines[1:]:
        cells = line.split(",")
        coords = tuple(float(c) for c in cells[:dim])
        kind, label = cells[dim], int(cells[dim + 1])
        groups.setdefault((kind, label), []).append(coords)
    out = []
    for (kind, label), rows in groups.items():
        pts = np.asarray(rows, dtype=np.float64)
        if kind == "interior":
            out.append(PointSet(pts, kind, subdomain=label - 1))
        elif kind == "interface":
            out.append(PointSet(pts, kind, interface=label - 1))
        else:
            out.append(PointSet(pts, kind))
    return out
