"""Network forward rules, initialization, parameter counts, checkpoints."""

import json

import numpy as np
import pytest

from aepinn import jets, networks
from aepinn.geometry import PLANE_THIRD, two_subdomain_domain
from aepinn.networks import (
    CompositeModel,
    FcnArch,
    IaArch,
    ParamLayout,
    fcn_forward,
    fcn_param_count,
    ia_forward,
    ia_param_count,
    load_checkpoint,
    save_checkpoint,
    transmitter_forward,
)
from aepinn.sampling import Rng


def fcn_value(params, arch, x):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return fcn_forward(params, arch, jets.input_jet(x, 0)).value


# ---------------------------------------------------------------------------
# fully connected forward
# ---------------------------------------------------------------------------


def test_fcn_all_zero_params():
    arch = FcnArch(2, 8, 3, "tanh")
    layout = ParamLayout(arch.slots())
    params = layout.unflatten(np.zeros(layout.size))
    assert np.array_equal(fcn_value(params, arch, [[0.3, -0.7]]), [0.0])


def test_fcn_degenerate_affine():
    arch = FcnArch(1, 1, 0, "tanh")  # no hidden layers: single affine map
    layout = ParamLayout(arch.slots())
    theta = np.array([2.0, 1.0])  # w1, b1
    params = layout.unflatten(theta)
    assert np.array_equal(fcn_value(params, arch, [[3.0]]), [7.0])


def test_fcn_odd_symmetry_hand_eval():
    # one hidden layer, weights [1, -1], tanh: tanh(x) + tanh(-x) = 0
    arch = FcnArch(1, 2, 1, "tanh")
    layout = ParamLayout(arch.slots())
    theta = np.zeros(layout.size)
    views = layout.unflatten(theta)
    views["w1"][:] = [[1.0], [-1.0]]
    views["w2"][:] = [[1.0, 1.0]]
    params = layout.unflatten(theta)
    assert fcn_value(params, arch, [[0.5]])[0] == pytest.approx(0.0, abs=1e-16)


# ---------------------------------------------------------------------------
# transmitter
# ---------------------------------------------------------------------------


def _transmitter_params(w, b, m, activation):
    arch = IaArch(1, m, 1, activation)
    layout = ParamLayout(arch.slots())
    theta = np.zeros(layout.size)
    views = layout.unflatten(theta)
    views["t_w"][:] = np.asarray(w).reshape(m, 1)
    views["t_b"][:] = b
    return layout.unflatten(theta), arch


def _phi_jet(value, n=1):
    return jets.constant_jet(np.full(n, float(value)), dim=1, order=0)


def test_transmitter_zero_params():
    params, arch = _transmitter_params([0.0, 0.0], [0.0, 0.0], 2, "tanh")
    out = transmitter_forward(params, arch, _phi_jet(1.7))
    assert np.array_equal(out.value, [[0.0, 0.0]])


def test_transmitter_on_interface_gives_bias():
    params, arch = _transmitter_params([2.0, -1.0], [0.3, 0.6], 2, "tanh")
    out = transmitter_forward(params, arch, _phi_jet(0.0))
    assert np.allclose(out.value, np.tanh([[0.3, 0.6]]))


def test_transmitter_hand_eval_sin():
    params, arch = _transmitter_params([1.0, 2.0], [0.0, 0.0], 2, "sin")
    out = transmitter_forward(params, arch, _phi_jet(np.pi / 2))
    assert out.value[0, 0] == pytest.approx(1.0)
    assert out.value[0, 1] == pytest.approx(np.sin(np.pi), abs=1e-15)


def test_transmitter_equal_phi_equal_embedding():
    rng = Rng(3)
    arch = IaArch(2, 8, 1, "tanh")
    layout = ParamLayout(arch.slots())
    params = layout.unflatten(layout.init(rng))
    a = transmitter_forward(params, arch, _phi_jet(0.37))
    b = transmitter_forward(params, arch, _phi_jet(0.37))
    assert np.array_equal(a.value, b.value)


# ---------------------------------------------------------------------------
# interface-attention forward
# ---------------------------------------------------------------------------


def _ia_eval(params, arch, x, phi_value):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    phi = jets.constant_jet(np.full(len(x), float(phi_value)), dim=arch.in_dim, order=0)
    return ia_forward(params, arch, jets.input_jet(x, 0), phi).value


def test_ia_zero_head_gives_bias():
    arch = IaArch(2, 4, 2, "tanh")
    layout = ParamLayout(arch.slots())
    theta = layout.init(Rng(11))
    views = layout.unflatten(theta)
    views["head_w"][:] = 0.0
    views["head_b"][:] = 3.25
    params = layout.unflatten(theta)
    for x in ([0.1, 0.2], [-0.9, 0.5]):
        assert np.array_equal(_ia_eval(params, arch, [x], 0.4), [3.25])


def test_ia_gate_open_reduces_to_lift_plus_head():
    # sigma == 1 everywhere forces z == 1, so every module passes h through
    networks.register_activation("one", lambda v, order: (
        np.ones_like(jets._data(v)),
        np.zeros_like(jets._data(v)),
        np.zeros_like(jets._data(v)),
    ))
    try:
        arch = IaArch(1, 3, 2, "one")
        layout = ParamLayout(arch.slots())
        theta = layout.init(Rng(5))
        views = layout.unflatten(theta)
        views["head_w"][:] = [[1.0, 2.0, 3.0]]
        views["head_b"][:] = 0.5
        params = layout.unflatten(theta)
        got = _ia_eval(params, arch, [[0.7]], 0.2)
        # with sigma == 1 the lift output is the all-ones vector
        assert got[0] == pytest.approx(1.0 + 2.0 + 3.0 + 0.5)
        # module weights are irrelevant once the gate saturates
        views["q_w1"][:] = 17.0
        views["z_w2"][:] = -4.0
        assert _ia_eval(layout.unflatten(theta), arch, [[0.7]], 0.2)[0] == got[0]
    finally:
        networks.ACTIVATIONS.pop("one", None)


def test_ia_identity_activation_hand_eval():
    # one module, width one, unit weights, zero biases, identity activation:
    # h0 = 2, q = k = v = 2, z = (2*2)*2 = 8, t = 2, h1 = (1-8)*2 + 8*2 = 2
    arch = IaArch(1, 1, 1, "identity")
    layout = ParamLayout(arch.slots())
    theta = np.zeros(layout.size)
    views = layout.unflatten(theta)
    for name, (_, _, shape) in layout.offsets.items():
        if len(shape) == 2:
            views[name][:] = 1.0
    params = layout.unflatten(theta)
    assert np.array_equal(_ia_eval(params, arch, [[2.0]], 2.0), [2.0])


def test_ia_transmitter_computed_once_and_shared():
    arch = IaArch(1, 4, 3, "sigmoid")
    layout = ParamLayout(arch.slots())
    params = layout.unflatten(layout.init(Rng(2)))
    x = np.array([[0.5]])
    trace = []
    ia_forward(params, arch, jets.input_jet(x, 0), _phi_jet(0.3), trace=trace)
    assert len(trace) == 3
    t0 = trace[0]["t"]
    assert all(rec["t"] is t0 for rec in trace)


def test_gate_interpolation_with_sigmoid():
    # with sigmoid gates, every module output lies between t and h".
    rng = Rng(77)
    arch = IaArch(2, 8, 2, "sigmoid")
    layout = ParamLayout(arch.slots())
    npr = np.random.default_rng(123)
    checked = 0
    for trial in range(32):
        theta = layout.init(rng)
        theta += (rng.uniform(theta.size) - 0.5)  # nonzero biases too
        params = layout.unflatten(theta)
        x = npr.uniform(-1, 1, size=(20, 2))
        phi = jets.constant_jet(npr.uniform(-1, 1, size=20), dim=2, order=0)
        trace = []
        ia_forward(params, arch, jets.input_jet(x, 0), phi, trace=trace)
        for rec in trace:
            t, h_prev, z, h = (rec[k] for k in ("t_value", "h_prev", "z", "h"))
            assert np.all((z >= 0.0) & (z <= 1.0))
            lo = np.minimum(t, h_prev) - 1e-12
            hi = np.maximum(t, h_prev) + 1e-12
            assert np.all((h >= lo) & (h <= hi))
            checked += h.size
    assert checked >= 10_000


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------


def test_init_deterministic():
    arch = FcnArch(2, 8, 3, "tanh")
    layout = ParamLayout(arch.slots())
    assert np.array_equal(layout.init(Rng(1234)), layout.init(Rng(1234)))


def test_init_glorot_bounds_and_zero_biases():
    arch = IaArch(3, 8, 2, "sin")
    layout = ParamLayout(arch.slots())
    theta = layout.init(Rng(99))
    views = layout.unflatten(theta)
    for name, (_, _, shape) in layout.offsets.items():
        if len(shape) == 2:
            fan_out, fan_in = shape
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            assert np.abs(views[name]).max() <= bound
        else:
            assert np.array_equal(views[name], np.zeros(shape))


def test_init_weight_mean_near_zero():
    arch = FcnArch(1, 8, 3, "tanh")
    layout = ParamLayout(arch.slots())
    theta = layout.init(Rng(1234))
    weights = np.concatenate(
        [layout.unflatten(theta)[n].ravel() for n, (_, _, s) in layout.offsets.items() if len(s) == 2]
    )
    assert abs(weights.mean()) < 0.1


# ---------------------------------------------------------------------------
# parameter counting (structural assertions)
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("d,m,modules", [(1, 8, 1), (2, 16, 2), (3, 32, 1), (3, 16, 3)])
def test_ia_param_count_closed_form(d, m, modules):
    arch = IaArch(d, m, modules, "sin")
    layout = ParamLayout(arch.slots())
    expected = m * (d + 1) + 4 * modules * m * (m + 1) + 2 * m + (m + 1)
    assert layout.size == expected == ia_param_count(d, m, modules)


@pytest.mark.parametrize("d,m,hidden", [(1, 8, 3), (2, 16, 3), (3, 48, 2), (2, 4, 0)])
def test_fcn_param_count_closed_form(d, m, hidden):
    arch = FcnArch(d, m, hidden, "tanh")
    layout = ParamLayout(arch.slots())
    assert layout.size == fcn_param_count(d, m, hidden)


def test_canonical_order_layer_major_weight_before_bias():
    arch = FcnArch(2, 4, 2, "tanh")
    names = [name for name, _ in arch.slots()]
    assert names == ["w1", "b1", "w2", "b2", "w3", "b3"]
    ia = IaArch(2, 4, 2, "sin")
    ia_names = [name for name, _ in ia.slots()]
    assert ia_names[:4] == ["lift_w", "lift_b", "t_w", "t_b"]
    assert ia_names[-2:] == ["head_w", "head_b"]
    assert ia_names[4:12] == ["q_w1", "q_b1", "k_w1", "k_b1", "v_w1", "v_b1", "z_w1", "z_b1"]


# ---------------------------------------------------------------------------
# composite model
# ---------------------------------------------------------------------------


def _small_composite():
    domain = two_subdomain_domain([[0.0, 1.0]], PLANE_THIRD)
    return CompositeModel(
        FcnArch(1, 4, 1, "tanh"),
        [IaArch(1, 4, 1, "sin"), IaArch(1, 4, 1, "cos")],
        domain,
    )


def test_composite_zero_pieces_equals_continuous():
    model = _small_composite()
    model.init(Rng(4))
    views = model.bind()
    for name in model.layout.offsets:
        if name.startswith("ia"):
            views[name][:] = 0.0
    x = np.array([[0.1], [0.9]])
    mu = model.continuous_field()(x, 0).value
    for side in (0, 1):
        got = model.side_field(side)(x, 0).value
        assert np.array_equal(got, mu)


def test_composite_zero_continuous_equals_piece():
    model = _small_composite()
    model.init(Rng(4))
    views = model.bind()
    for name in model.layout.offsets:
        if name.startswith("mu."):
            views[name][:] = 0.0
    x = np.array([[0.2]])
    piece = model.piece_field(0)(x, 0).value
    assert np.array_equal(model.side_field(0)(x, 0).value, piece)


def test_composite_predict_routes_by_subdomain():
    model = _small_composite().init(Rng(8))
    x = np.array([[0.1], [0.5], [0.9]])
    vals = model.predict(x)
    side0 = model.side_field(0)(x[:1], 0).value
    side1 = model.side_field(1)(x[1:], 0).value
    assert vals[0] == side0[0]
    assert np.array_equal(vals[1:], side1)


def test_networks_differentiable_end_to_end():
    model = _small_composite().init(Rng(21))
    from aepinn.jets import eval_jet

    for side in (0, 1):
        field = model.side_field(side)
        vj = eval_jet(field, [0.6])

        def scalar(p):
            return field(np.atleast_2d(p), 0).value[0]

        h = 1e-5
        fd_g = (scalar([0.6 + h]) - scalar([0.6 - h])) / (2 * h)
        fd_h = (scalar([0.6 + h]) - 2 * scalar([0.6]) + scalar([0.6 - h])) / h**2
        assert vj.grad[0] == pytest.approx(fd_g, rel=1e-7)
        assert vj.hess[0, 0] == pytest.approx(fd_h, rel=1e-4)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path):
    model = _small_composite().init(Rng(1234))
    path = tmp_path / "ck.json"
    save_checkpoint(model, path, seed=1234, iterations=42)
    loaded, payload = load_checkpoint(path, model.geometry)
    assert np.array_equal(loaded.theta, model.theta)
    assert payload["seed"] == 1234 and payload["iterations"] == 42
    assert loaded.to_config() == model.to_config()
    # byte-identical re-save
    path2 = tmp_path / "ck2.json"
    save_checkpoint(loaded, path2, seed=1234, iterations=42)
    assert path.read_bytes() == path2.read_bytes()


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"format": "something-else"}))
    with pytest.raises(ValueError):
        load_checkpoint(path, _small_composite().geometry)
