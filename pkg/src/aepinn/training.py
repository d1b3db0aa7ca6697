"""Loss assembly, Adam, and the deterministic full-batch training loop.

The composite loss has four mean-squared terms: interior PDE residual
(alpha*lap(u) + grad(alpha).grad(u) - f), boundary misfit, interface value
jump and interface flux jump, each weighted by its tau.  Collocation
points are sampled once up front and the loss graph is built once; every
iteration replays the graph with updated parameters, so a run is a pure
function of its config.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import baselines, geometry, jets, networks, tape
from .jets import check_gradient_fd
from .networks import CompositeModel, arch_from_config
from .problems import builtin
from .sampling import Rng, sample_boundary, sample_interface, sample_interior
from .tape import NonFiniteError, Tape, Tensor


@dataclass(frozen=True)
class LossWeights:
    tau: float = 1.0
    tau_b: float = 1.0
    tau_gamma1: float = 1.0
    tau_gamma2: float = 1.0

    def __post_init__(self):
        if min(self.tau, self.tau_b, self.tau_gamma1, self.tau_gamma2) < 0:
            raise ValueError("loss weights must be non-negative")

    def to_config(self):
        return {
            "tau": self.tau,
            "tau_b": self.tau_b,
            "tau_gamma1": self.tau_gamma1,
            "tau_gamma2": self.tau_gamma2,
        }


@dataclass(frozen=True)
class LossBreakdown:
    pde: float
    boundary: float
    jump_value: float
    jump_flux: float
    total: float


class TrainingDiverged(RuntimeError):
    def __init__(self, message, iteration, term, last_theta, history):
        super().__init__(message)
        self.iteration = iteration
        self.term = term
        self.last_theta = last_theta
        self.history = history


def _scalar_sum(x):
    return tape.sum_all(x) if isinstance(x, Tensor) else np.asarray(x.sum())


# ---------------------------------------------------------------------------
# loss graph
# ---------------------------------------------------------------------------


def prepare_loss_data(spec, points):
    """Precompute every parameter-independent array the loss needs."""
    data = {"interior": [], "boundary": None, "interface": []}
    for ps in points:
        if ps.kind == "interior":
            i = ps.subdomain
            alpha = spec.alpha[i](ps.points, 1)
            data["interior"].append(
                {
                    "subdomain": i,
                    "x": ps.points,
                    "f": spec.source(ps.points),
                    "alpha_value": alpha.value,
                    "alpha_grad": alpha.grad,
                }
            )
        elif ps.kind == "boundary":
            sub = spec.domain.subdomain_of(ps.points)
            groups = []
            for i in range(spec.n_subdomains):
                mask = sub == i
                if np.any(mask):
                    groups.append({"subdomain": i, "x": ps.points[mask]})
            data["boundary"] = {
                "n": len(ps.points),
                "h": spec.boundary_values(ps.points),
                "sub": sub,
                "groups": groups,
            }
        elif ps.kind == "interface":
            k = ps.interface
            ls = spec.domain.interfaces[k]
            beta, rho = spec.interface_data(k, ps.points)
            n_vec = geometry.normal(ls, ps.points)
            i, j = spec.domain.interface_sides[k]
            a_i = spec.alpha[i](ps.points, 0).value
            a_j = spec.alpha[j](ps.points, 0).value
            data["interface"].append(
                {
                    "interface": k,
                    "sides": (i, j),
                    "x": ps.points,
                    "beta": beta,
                    "rho": rho,
                    "weight_i": a_i[:, None] * n_vec,
                    "weight_j": a_j[:, None] * n_vec,
                }
            )
    return data


def loss_terms(model, data, params, weights):
    """Build the four loss terms from a parameter binding.

    Works identically for ndarray bindings (plain evaluation) and Tensor
    bindings on an active tape (training / parameter gradients).  Second
    derivatives run in diagonal-Hessian mode: the residual only consumes
    the Laplacian, and diagonal propagation is closed under the network's
    affine/elementwise primitives.
    """
    with jets.hessian_mode("diag"):
        return _loss_terms(model, data, params, weights)


def _loss_terms(model, data, params, weights):
    fields = [model.side_field(i, params) for i in range(model.n_subdomains)]

    pde_sq = None
    n_interior = 0
    residuals = {}
    for block in data["interior"]:
        u = fields[block["subdomain"]](block["x"], 2)
        flux_div = block["alpha_value"] * jets.laplacian(u) + jets._sum1(
            block["alpha_grad"] * u.grad
        )
        r = flux_div - block["f"]
        residuals.setdefault("pde", []).append(r)
        s = _scalar_sum(r * r)
        pde_sq = s if pde_sq is None else pde_sq + s
        n_interior += len(block["x"])
    pde = pde_sq * (1.0 / n_interior)

    bdata = data["boundary"]
    b_sq = None
    for group in bdata["groups"]:
        u = fields[group["subdomain"]](group["x"], 0)
        r = u.value - model_boundary_targets(bdata, group)
        residuals.setdefault("boundary", []).append(r)
        s = _scalar_sum(r * r)
        b_sq = s if b_sq is None else b_sq + s
    boundary = b_sq * (1.0 / bdata["n"])

    jv_sq = None
    jf_sq = None
    n_iface = 0
    for block in data["interface"]:
        i, j = block["sides"]
        u_i = fields[i](block["x"], 1)
        u_j = fields[j](block["x"], 1)
        r_v = (u_i.value - u_j.value) - block["beta"]
        flux_i = jets._sum1(u_i.grad * block["weight_i"])
        flux_j = jets._sum1(u_j.grad * block["weight_j"])
        r_f = (flux_i - flux_j) - block["rho"]
        residuals.setdefault("jump_value", []).append(r_v)
        residuals.setdefault("jump_flux", []).append(r_f)
        sv = _scalar_sum(r_v * r_v)
        sf = _scalar_sum(r_f * r_f)
        jv_sq = sv if jv_sq is None else jv_sq + sv
        jf_sq = sf if jf_sq is None else jf_sq + sf
        n_iface += len(block["x"])
    jump_value = jv_sq * (1.0 / n_iface)
    jump_flux = jf_sq * (1.0 / n_iface)

    total = (
        weights.tau * pde
        + weights.tau_b * boundary
        + weights.tau_gamma1 * jump_value
        + weights.tau_gamma2 * jump_flux
    )
    terms = {
        "pde": pde,
        "boundary": boundary,
        "jump_value": jump_value,
        "jump_flux": jump_flux,
        "total": total,
        "residuals": residuals,
    }
    for name in ("pde", "boundary", "jump_value", "jump_flux", "total"):
        if isinstance(terms[name], Tensor):
            terms[name].name = name
    return terms


def model_boundary_targets(bdata, group):
    mask = bdata["sub"] == group["subdomain"]
    return bdata["h"][mask]


def assemble_loss(model, spec, points, weights=LossWeights()):
    """Loss breakdown of a model on tagged point sets (plain evaluation)."""
    data = prepare_loss_data(spec, points)
    terms = loss_terms(model, data, model.bind(), weights)
    breakdown = LossBreakdown(
        pde=float(terms["pde"]),
        boundary=float(terms["boundary"]),
        jump_value=float(terms["jump_value"]),
        jump_flux=float(terms["jump_flux"]),
        total=float(terms["total"]),
    )
    _raise_if_nonfinite(terms, iteration=None)
    return breakdown


def loss_functional(model, spec, points, weights=LossWeights()):
    """A theta -> total loss callable for gradients and gradient checks."""
    data = prepare_loss_data(spec, points)

    def fn(theta):
        params = model.layout.unflatten(theta)
        return loss_terms(model, data, params, weights)["total"]

    return fn


def _raise_if_nonfinite(terms, iteration):
    for name in ("pde", "boundary", "jump_value", "jump_flux"):
        value = terms[name]
        value = float(value.data) if isinstance(value, Tensor) else float(value)
        if not np.isfinite(value):
            index = None
            for r in terms["residuals"].get(name, []):
                arr = r.data if isinstance(r, Tensor) else r
                bad = np.flatnonzero(~np.isfinite(arr))
                if bad.size:
                    index = int(bad[0])
                    break
            where = f" at iteration {iteration}" if iteration is not None else ""
            raise NonFiniteError(
                f"loss term {name!r} became non-finite{where} (first point index {index})",
                term=name,
                index=index,
            )


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, n, lr=0.001):
        return cls(m=np.zeros(n), v=np.zeros(n), lr=lr)


def adam_step(theta, grad, state):
    """One bias-corrected Adam update; mutates theta and state in place."""
    state.t += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grad
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    theta -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return theta, state


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    problem: str
    method: str
    iterations: int
    architectures: dict
    interior: tuple
    boundary: int
    interface: tuple
    seed: int = 1234
    lr: float = 0.001
    weights: LossWeights = LossWeights()
    history_every: int = 100
    checkpoint_every: int = 0  # 0 = final checkpoint only

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    def to_config(self):
        return {
            "problem": self.problem,
            "method": self.method,
            "iterations": self.iterations,
            "architectures": self.architectures,
            "interior": list(self.interior),
            "boundary": self.boundary,
            "interface": list(self.interface),
            "seed": self.seed,
            "lr": self.lr,
            "weights": self.weights.to_config(),
            "history_every": self.history_every,
            "checkpoint_every": self.checkpoint_every,
        }


@dataclass
class HistoryRecord:
    iteration: int
    pde: float
    boundary: float
    jump_value: float
    jump_flux: float
    total: float
    seconds: float


class TrainHistory:
    """Loss breakdown snapshots; iteration k records the loss computed
    before the k-th Adam update (so the first record is the initial loss)."""

    def __init__(self):
        self.records = []

    def append(self, record):
        if self.records and record.iteration <= self.records[-1].iteration:
            raise ValueError("history iterations must be strictly increasing")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def totals(self):
        return np.array([r.total for r in self.records])

    def to_csv(self, path):
        lines = ["iter,pde,boundary,jump_value,jump_flux,total,seconds"]
        for r in self.records:
            lines.append(
                f"{r.iteration},{r.pde!r},{r.boundary!r},{r.jump_value!r},"
                f"{r.jump_flux!r},{r.total!r},{r.seconds:.3f}"
            )
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def build_model(cfg, spec):
    try:
        builder = MODEL_BUILDERS[cfg.method]
    except KeyError:
        raise ValueError(
            f"unknown method {cfg.method!r}; valid: {', '.join(sorted(MODEL_BUILDERS))}"
        ) from None
    return builder(cfg.architectures, spec)


def _build_ae(arch_cfg, spec):
    return CompositeModel(
        arch_from_config(arch_cfg["continuous"]),
        [arch_from_config(c) for c in arch_cfg["pieces"]],
        spec.domain,
    )


MODEL_BUILDERS = {
    "ae": _build_ae,
    "pinn": baselines.build_pinn,
    "mpinn": baselines.build_mpinn,
    "ipinn": baselines.build_ipinn,
}


def sample_training_points(cfg, spec, rng):
    """Interior per subdomain, then boundary, then each interface, in order."""
    points = list(sample_interior(spec.domain, cfg.interior, rng))
    points.append(sample_boundary(spec.domain, cfg.boundary, rng))
    for k, count in enumerate(cfg.interface):
        points.append(sample_interface(spec.domain.interfaces[k], count, rng, index=k))
    return points


def train(cfg, spec=None, callback=None):
    """Run the full training loop; a pure function of the config.

    Draw order from the seed: model initialization, then collocation
    sampling.  Returns (model, history, points).
    """
    spec = spec or builtin(cfg.problem)
    rng = Rng(cfg.seed)
    model = build_model(cfg, spec).init(rng)
    points = sample_training_points(cfg, spec, rng)
    data = prepare_loss_data(spec, points)

    history = TrainHistory()
    start = time.perf_counter()
    last_good = model.theta.copy()
    state = AdamState.for_params(model.n_params, lr=cfg.lr)

    with Tape() as tp:
        theta = tape.leaf(model.theta.copy(), name="theta")
        params = model.layout.unflatten(theta)
        terms = loss_terms(model, data, params, cfg.weights)
        total = terms["total"]

        for k in range(1, cfg.iterations + 1):
            if k > 1:
                tp.forward()
            record = (
                k == 1 or k % cfg.history_every == 0 or k == cfg.iterations
            )
            if record or not np.isfinite(float(total.data)):
                try:
                    _raise_if_nonfinite(terms, iteration=k)
                except NonFiniteError as err:
                    raise TrainingDiverged(
                        str(err), k, err.term, last_good, history
                    ) from err
            taken = None
            if record:
                taken = HistoryRecord(
                    iteration=k,
                    pde=float(terms["pde"].data),
                    boundary=float(terms["boundary"].data),
                    jump_value=float(terms["jump_value"].data),
                    jump_flux=float(terms["jump_flux"].data),
                    total=float(total.data),
                    seconds=time.perf_counter() - start,
                )
                history.append(taken)
                last_good = theta.data.copy()
            tp.backward(total)
            adam_step(theta.data, theta.grad, state)
            if callback is not None:
                callback(k, taken, theta.data)

    model.theta = theta.data
    return model, history, points


def gradcheck(model, spec, points, weights=LossWeights(), step=1e-5):
    """Max relative discrepancy of the full-loss gradient vs central
    differences, at the model's current parameters."""
    fn = loss_functional(model, spec, points, weights)
    return check_gradient_fd(fn, model.theta, step)
