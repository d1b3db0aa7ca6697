"""Reference methods trained through the same loop and loss.

* pinn: one fully connected network over the whole domain.
* mpinn: an independent network per subdomain, coupled only through the
  interface loss terms.
* ipinn: a single shared parameter vector; only the activation function
  differs per subdomain.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import jets
from .networks import (
    Model,
    ParamLayout,
    arch_from_config,
    fcn_forward,
    register_model_kind,
)


class PinnModel(Model):
    kind = "pinn"

    def __init__(self, arch, geometry):
        super().__init__(ParamLayout(arch.slots("net.")), arch.in_dim, geometry.n_subdomains)
        self.arch = arch
        self.geometry = geometry

    def domain_subdomains(self, x):
        return self.geometry.subdomain_of(x)

    def side_field(self, i, params=None):
        params = self.bind() if params is None else params

        def field(x, order):
            return fcn_forward(params, self.arch, jets.input_jet(x, order), "net.")

        return field

    def to_config(self):
        return {"kind": self.kind, "net": self.arch.to_config()}


class MpinnModel(Model):
    kind = "mpinn"

    def __init__(self, archs, geometry):
        archs = list(archs)
        if len(archs) != geometry.n_subdomains:
            raise ValueError("mpinn needs one sub-network per subdomain")
        slots = []
        for i, arch in enumerate(archs):
            slots += arch.slots(f"net{i + 1}.")
        super().__init__(ParamLayout(slots), archs[0].in_dim, geometry.n_subdomains)
        self.archs = archs
        self.geometry = geometry

    def domain_subdomains(self, x):
        return self.geometry.subdomain_of(x)

    def side_field(self, i, params=None):
        params = self.bind() if params is None else params
        arch = self.archs[i]

        def field(x, order):
            return fcn_forward(params, arch, jets.input_jet(x, order), f"net{i + 1}.")

        return field

    def to_config(self):
        return {"kind": self.kind, "subnets": [a.to_config() for a in self.archs]}


class IpinnModel(Model):
    """Shared weights, per-subdomain activation; exactly one parameter copy."""

    kind = "ipinn"

    def __init__(self, base, activations, geometry):
        activations = list(activations)
        if len(activations) != geometry.n_subdomains:
            raise ValueError("ipinn needs one activation per subdomain")
        super().__init__(ParamLayout(base.slots("net.")), base.in_dim, geometry.n_subdomains)
        self.base = base
        self.activations = activations
        self.geometry = geometry

    def domain_subdomains(self, x):
        return self.geometry.subdomain_of(x)

    def side_field(self, i, params=None):
        params = self.bind() if params is None else params
        arch = replace(self.base, activation=self.activations[i])

        def field(x, order):
            return fcn_forward(params, arch, jets.input_jet(x, order), "net.")

        return field

    def to_config(self):
        return {
            "kind": self.kind,
            "net": self.base.to_config(),
            "activations": list(self.activations),
        }


# ---------------------------------------------------------------------------
# builders (arch configs come from presets or config files)
# ---------------------------------------------------------------------------


def build_pinn(arch_cfg, spec):
    return PinnModel(arch_from_config(arch_cfg["net"]), spec.domain)


def build_mpinn(arch_cfg, spec):
    return MpinnModel([arch_from_config(c) for c in arch_cfg["subnets"]], spec.domain)


def build_ipinn(arch_cfg, spec):
    subnets = [arch_from_config(c) for c in arch_cfg["subnets"]]
    shapes = {(a.in_dim, a.width, a.hidden) for a in subnets}
    if len(shapes) != 1:
        raise ValueError("ipinn subnets must share one shape (weights are shared)")
    base = subnets[0]
    return IpinnModel(base, [a.activation for a in subnets], spec.domain)


register_model_kind("pinn", lambda cfg, geo: PinnModel(arch_from_config(cfg["net"]), geo))
register_model_kind(
    "mpinn", lambda cfg, geo: MpinnModel([arch_from_config(c) for c in cfg["subnets"]], geo)
)
register_model_kind(
    "ipinn",
    lambda cfg, geo: IpinnModel(arch_from_config(cfg["net"]), cfg["activations"], geo),
)
