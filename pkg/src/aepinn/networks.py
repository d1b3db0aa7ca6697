"""Network architectures and parameter handling.

Three forward rules are implemented on second-order jets so the PDE
residual can differentiate through them exactly:

* a fully connected network (hidden affine+activation layers, affine head),
* a gated interface-attention network whose modules blend the hidden state
  with a transmitter embedding of the level-set value, and
* the composite piecewise model: one continuous network over the whole
  domain plus one interface-attention network per subdomain.

Parameters live in a single flat float64 vector in a documented canonical
order (network by network, layer-major, weight before bias); named views
or tape segments are materialized on demand.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import jets, tape

# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------

ACTIVATIONS = {
    "tanh": jets._rule_tanh,
    "sin": jets._rule_sin,
    "cos": jets._rule_cos,
    "sigmoid": jets._rule_sigmoid,
    "identity": jets._rule_identity,
}


def register_activation(name, rule):
    """Add an elementwise rule(value, order) -> (f, f', f'') by name."""
    ACTIVATIONS[name] = rule


def activation_rule(name):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise KeyError(
            f"unknown activation {name!r}; known: {sorted(ACTIVATIONS)}"
        ) from None


# ---------------------------------------------------------------------------
# parameter bookkeeping
# ---------------------------------------------------------------------------


class ParamLayout:
    """Canonical flat layout for a list of (name, shape) slots."""

    def __init__(self, slots):
        self.slots = [(name, tuple(shape)) for name, shape in slots]
        self.offsets = {}
        total = 0
        for name, shape in self.slots:
            size = int(np.prod(shape)) if shape else 1
            self.offsets[name] = (total, total + size, shape)
            total += size
        self.size = total

    def unflatten(self, theta):
        """Named views of a flat vector (ndarray) or tape segments (Tensor)."""
        out = {}
        if isinstance(theta, tape.Tensor):
            for name, (a, b, shape) in self.offsets.items():
                out[name] = tape.reshape(tape.segment(theta, a, b), shape)
        else:
            theta = np.asarray(theta, dtype=np.float64)
            for name, (a, b, shape) in self.offsets.items():
                out[name] = theta[a:b].reshape(shape)
        return out

    def init(self, rng):
        """Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases."""
        theta = np.zeros(self.size)
        for name, (a, b, shape) in self.offsets.items():
            if len(shape) == 2:
                fan_out, fan_in = shape
                bound = np.sqrt(6.0 / (fan_in + fan_out))
                theta[a:b] = (2.0 * rng.uniform(b - a) - 1.0) * bound
        return theta


def fcn_slots(in_dim, width, hidden, prefix=""):
    slots = []
    prev = in_dim
    for n in range(1, hidden + 1):
        slots.append((f"{prefix}w{n}", (width, prev)))
        slots.append((f"{prefix}b{n}", (width,)))
        prev = width
    slots.append((f"{prefix}w{hidden + 1}", (1, prev)))
    slots.append((f"{prefix}b{hidden + 1}", (1,)))
    return slots


def ia_slots(in_dim, width, modules, prefix=""):
    m = width
    slots = [(f"{prefix}lift_w", (m, in_dim)), (f"{prefix}lift_b", (m,))]
    slots += [(f"{prefix}t_w", (m, 1)), (f"{prefix}t_b", (m,))]
    for n in range(1, modules + 1):
        for gate in ("q", "k", "v", "z"):
            slots.append((f"{prefix}{gate}_w{n}", (m, m)))
            slots.append((f"{prefix}{gate}_b{n}", (m,)))
    slots += [(f"{prefix}head_w", (1, m)), (f"{prefix}head_b", (1,))]
    return slots


def fcn_param_count(in_dim, width, hidden):
    if hidden == 0:
        return in_dim + 1
    return width * (in_dim + 1) + (hidden - 1) * width * (width + 1) + (width + 1)


def ia_param_count(in_dim, width, modules):
    m = width
    return m * (in_dim + 1) + 4 * modules * m * (m + 1) + 2 * m + (m + 1)


# ---------------------------------------------------------------------------
# architectures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FcnArch:
    in_dim: int
    width: int
    hidden: int
    activation: str = "tanh"

    def slots(self, prefix=""):
        return fcn_slots(self.in_dim, self.width, self.hidden, prefix)

    def to_config(self):
        return {
            "kind": "fcn",
            "in_dim": self.in_dim,
            "width": self.width,
            "hidden": self.hidden,
            "activation": self.activation,
        }


@dataclass(frozen=True)
class IaArch:
    in_dim: int
    width: int
    modules: int
    activation: str

    def __post_init__(self):
        if self.modules < 1:
            raise ValueError("at least one interface-attention module is required")

    def slots(self, prefix=""):
        return ia_slots(self.in_dim, self.width, self.modules, prefix)

    def to_config(self):
        return {
            "kind": "ia",
            "in_dim": self.in_dim,
            "width": self.width,
            "modules": self.modules,
            "activation": self.activation,
        }


def arch_from_config(cfg):
    cfg = dict(cfg)
    kind = cfg.pop("kind")
    if kind == "fcn":
        return FcnArch(**cfg)
    if kind == "ia":
        return IaArch(**cfg)
    raise ValueError(f"unknown architecture kind {kind!r}")


# ---------------------------------------------------------------------------
# forward rules
# ---------------------------------------------------------------------------


def fcn_forward(params, arch, x_jet, prefix=""):
    """Hidden layers activation(W h + b), affine head; returns a scalar jet."""
    rule = activation_rule(arch.activation)
    h = x_jet
    for n in range(1, arch.hidden + 1):
        h = jets.apply_unary(
            jets.affine(params[f"{prefix}w{n}"], params[f"{prefix}b{n}"], h), rule
        )
    head = arch.hidden + 1
    out = jets.affine(params[f"{prefix}w{head}"], params[f"{prefix}b{head}"], h)
    return jets.payload_to_scalar(out)


def transmitter_forward(params, arch, phi_jet, prefix=""):
    """One affine+activation layer lifting the level-set value to width m."""
    rule = activation_rule(arch.activation)
    p = jets.scalar_to_payload(phi_jet)
    return jets.apply_unary(
        jets.affine(params[f"{prefix}t_w"], params[f"{prefix}t_b"], p), rule
    )


def ia_forward(params, arch, x_jet, phi_jet, prefix="", trace=None):
    """Gated interface-attention forward pass; returns a scalar jet.

    The transmitter embedding is computed once per point and fused into
    every module: h <- (1 - z) * t + z * h with z the module's gate.
    ``trace``, if given, collects per-module values for inspection.
    """
    rule = activation_rule(arch.activation)
    h = jets.apply_unary(
        jets.affine(params[f"{prefix}lift_w"], params[f"{prefix}lift_b"], x_jet), rule
    )
    t = transmitter_forward(params, arch, phi_jet, prefix)
    for n in range(1, arch.modules + 1):
        q = jets.affine(params[f"{prefix}q_w{n}"], params[f"{prefix}q_b{n}"], h)
        k = jets.affine(params[f"{prefix}k_w{n}"], params[f"{prefix}k_b{n}"], h)
        v = jets.affine(params[f"{prefix}v_w{n}"], params[f"{prefix}v_b{n}"], h)
        attended = jets.mul(jets.apply_unary(jets.mul(q, k), rule), v)
        z = jets.apply_unary(
            jets.affine(params[f"{prefix}z_w{n}"], params[f"{prefix}z_b{n}"], attended),
            rule,
        )
        h_prev = h
        # (1 - z) * t + z * h, factored to spend one jet product
        h = t + jets.mul(z, h - t)
        if trace is not None:
            trace.append(
                {
                    "t": t,
                    "t_value": jets._data(t.value),
                    "h_prev": jets._data(h_prev.value),
                    "z": jets._data(z.value),
                    "h": jets._data(h.value),
                }
            )
    out = jets.affine(params[f"{prefix}head_w"], params[f"{prefix}head_b"], h)
    return jets.payload_to_scalar(out)


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


class Model:
    """Piecewise scalar field with a flat trainable parameter vector.

    Subclasses define ``side_field(i, params)`` returning the globally
    defined expression of subdomain i as a ``field(x, order)`` callable.
    """

    def __init__(self, layout, dim, n_subdomains):
        self.layout = layout
        self.dim = dim
        self.n_subdomains = n_subdomains
        self.theta = np.zeros(layout.size)

    @property
    def n_params(self):
        return self.layout.size

    def init(self, rng):
        self.theta = self.layout.init(rng)
        return self

    def bind(self, theta=None):
        return self.layout.unflatten(self.theta if theta is None else theta)

    def side_field(self, i, params=None):
        raise NotImplementedError

    def predict(self, x, subdomains=None, chunk=65536):
        """Piecewise value evaluation on an (n, d) batch (numpy path)."""
        from .geometry import as_points

        x = as_points(x, self.dim)
        if subdomains is None:
            subdomains = self.domain_subdomains(x)
        params = self.bind()
        out = np.empty(len(x))
        for i in range(self.n_subdomains):
            mask = subdomains == i
            if not np.any(mask):
                continue
            field = self.side_field(i, params)
            pts = x[mask]
            for a in range(0, len(pts), chunk):
                block = pts[a : a + chunk]
                out[np.flatnonzero(mask)[a : a + chunk]] = field(block, 0).value
        return out

    def domain_subdomains(self, x):
        raise NotImplementedError("model has no geometry; pass subdomains explicitly")

    def to_config(self):
        raise NotImplementedError


class CompositeModel(Model):
    """Continuous network plus one interface-attention network per subdomain."""

    kind = "composite"

    def __init__(self, continuous, pieces, geometry):
        if len(pieces) != geometry.n_subdomains:
            raise ValueError("one interface-attention network per subdomain required")
        slots = continuous.slots("mu.")
        for i, arch in enumerate(pieces):
            slots += arch.slots(f"ia{i + 1}.")
        super().__init__(ParamLayout(slots), continuous.in_dim, geometry.n_subdomains)
        self.continuous = continuous
        self.pieces = list(pieces)
        self.geometry = geometry

    def domain_subdomains(self, x):
        return self.geometry.subdomain_of(x)

    def continuous_field(self, params=None):
        params = self.bind() if params is None else params

        def field(x, order):
            return fcn_forward(params, self.continuous, jets.input_jet(x, order), "mu.")

        return field

    def piece_field(self, i, params=None):
        params = self.bind() if params is None else params
        ls = self.geometry.transmitter_levelsets[i]

        def field(x, order):
            x_jet = jets.input_jet(x, order)
            phi_jet = ls.field(x, order)
            return ia_forward(params, self.pieces[i], x_jet, phi_jet, f"ia{i + 1}.")

        return field

    def side_field(self, i, params=None):
        params = self.bind() if params is None else params
        mu = self.continuous_field(params)
        omega = self.piece_field(i, params)

        def field(x, order):
            return jets.add(mu(x, order), omega(x, order))

        return field

    def to_config(self):
        return {
            "kind": self.kind,
            "continuous": self.continuous.to_config(),
            "pieces": [a.to_config() for a in self.pieces],
        }


MODEL_KINDS = {}


def register_model_kind(kind, builder):
    MODEL_KINDS[kind] = builder


def _build_composite(cfg, geometry):
    return CompositeModel(
        arch_from_config(cfg["continuous"]),
        [arch_from_config(c) for c in cfg["pieces"]],
        geometry,
    )


register_model_kind("composite", _build_composite)


def model_from_config(cfg, geometry):
    try:
        builder = MODEL_KINDS[cfg["kind"]]
    except KeyError:
        raise ValueError(f"unknown model kind {cfg['kind']!r}") from None
    return builder(cfg, geometry)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_FORMAT = "aepinn-checkpoint"


def save_checkpoint(model, path, seed=None, iterations=None):
    """JSON checkpoint: architecture header plus the canonical-order vector."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": 1,
        "model": model.to_config(),
        "seed": seed,
        "iterations": iterations,
        "theta": [float(v) for v in model.theta],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_checkpoint(path, geometry):
    """Rebuild a model (and its parameters) from a checkpoint file."""
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a checkpoint file")
    model = model_from_config(payload["model"], geometry)
    theta = np.asarray(payload["theta"], dtype=np.float64)
    if theta.size != model.n_params:
        raise ValueError(
            f"checkpoint has {theta.size} parameters, model expects {model.n_params}"
        )
    model.theta = theta
    return model, payload
