"""Run orchestration: artifact directories, manifests, and config files.

Every training run lands in one directory with four artifacts:

    manifest.json    config echo + environment + artifact paths
    history.csv      loss breakdown stream (iter,pde,...,seconds)
    checkpoint.json  architecture header + canonical parameter vector
    errors.csv       error metrics on the problem's test grid

The manifest's ``config`` block is a complete TrainConfig, so re-running
``train --config <manifest.json>`` reproduces the run bit-for-bit (modulo
wall-clock columns).  Configs can also be written by hand in an INI-style
file with one section per network.
"""

from __future__ import annotations

import configparser
import datetime
import json
import os

from . import __version__ as _version
from .metrics import ResultRow, compute_errors, rows_to_csv
from .networks import save_checkpoint
from .presets import preset
from .problems import builtin
from .training import LossWeights, TrainConfig, train

MANIFEST_FORMAT = "aepinn-manifest"


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def default_run_dir(cfg, mode=None):
    tag = cfg.problem.replace(":", "_").replace("=", "")
    parts = [tag, cfg.method]
    if mode:
        parts.append(mode)
    parts.append(f"s{cfg.seed}")
    return os.path.join("runs", "-".join(parts))


def run_training(cfg, out_dir, mode=None, spec=None):
    """Train per config and write the four run artifacts; returns the row."""
    spec = spec or builtin(cfg.problem)
    os.makedirs(out_dir, exist_ok=True)
    started = _now()

    callback = None
    if cfg.checkpoint_every > 0:
        probe = None

        def callback(iteration, record, theta):
            nonlocal probe
            if iteration % cfg.checkpoint_every == 0:
                if probe is None:
                    from .training import build_model

                    probe = build_model(cfg, spec)
                probe.theta = theta.copy()
                save_checkpoint(
                    probe,
                    os.path.join(out_dir, f"checkpoint-{iteration:07d}.json"),
                    seed=cfg.seed,
                    iterations=iteration,
                )

    model, history, points = train(cfg, spec, callback=callback)

    history_path = os.path.join(out_dir, "history.csv")
    checkpoint_path = os.path.join(out_dir, "checkpoint.json")
    errors_path = os.path.join(out_dir, "errors.csv")
    manifest_path = os.path.join(out_dir, "manifest.json")

    history.to_csv(history_path)
    save_checkpoint(model, checkpoint_path, seed=cfg.seed, iterations=cfg.iterations)
    report = compute_errors(model, spec)
    row = ResultRow(
        method=cfg.method,
        problem=cfg.problem,
        report=report,
        kappa=spec.kappa,
        seed=cfg.seed,
        iterations=cfg.iterations,
    )
    with open(errors_path, "w") as fh:
        fh.write(rows_to_csv([row]))

    manifest = {
        "format": MANIFEST_FORMAT,
        "library_version": _version,
        "config": cfg.to_config(),
        "preset_mode": mode,
        "initialization": "glorot-uniform, zero biases",
        "rng": "splitmix64",
        "point_counts": {
            "interior": list(cfg.interior),
            "boundary": cfg.boundary,
            "interface": list(cfg.interface),
        },
        "test_grid_shape": list(spec.test_grid_shape),
        "started": started,
        "finished": _now(),
        "final_loss": history.records[-1].total,
        "errors": {
            "E_M": report.e_max,
            "E_R": report.e_rms,
            "E_R_conventional": report.e_rms_conventional,
            "E_L": report.e_l2rel,
            "n_test": report.n_test,
        },
        "artifacts": {
            "manifest": "manifest.json",
            "history": "history.csv",
            "checkpoint": "checkpoint.json",
            "errors": "errors.csv",
        },
    }
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return model, history, row


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

_RUN_KEYS = {
    "problem",
    "method",
    "iterations",
    "seed",
    "lr",
    "interior",
    "boundary",
    "interface",
    "tau",
    "tau_b",
    "tau_gamma1",
    "tau_gamma2",
    "history_every",
    "checkpoint_every",
}


class ConfigError(ValueError):
    pass


def _ints(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def _net_section(parser, name, kind):
    if not parser.has_section(name):
        raise ConfigError(f"missing [{name}] section")
    sec = parser[name]
    try:
        if kind == "fcn":
            return {
                "kind": "fcn",
                "in_dim": None,  # filled from the problem dimension
                "width": sec.getint("width"),
                "hidden": sec.getint("hidden"),
                "activation": sec.get("activation"),
            }
        return {
            "kind": "ia",
            "in_dim": None,
            "width": sec.getint("width"),
            "modules": sec.getint("modules"),
            "activation": sec.get("activation"),
        }
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad value in [{name}]: {err}") from None


def config_from_ini(path):
    """Parse the INI run-config format into a TrainConfig."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path!r}")
    if not parser.has_section("run"):
        raise ConfigError("missing [run] section")
    run = parser["run"]
    unknown = set(run) - _RUN_KEYS
    if unknown:
        raise ConfigError(f"unknown [run] keys: {sorted(unknown)}")
    for key in ("problem", "method", "iterations", "interior", "boundary", "interface"):
        if key not in run:
            raise ConfigError(f"[run] is missing required key {key!r}")

    problem = run.get("problem")
    spec = builtin(problem)
    d = spec.dim
    method = run.get("method")
    n_sub = spec.n_subdomains

    if method == "ae":
        pieces = []
        for i in range(n_sub):
            cfg = _net_section(parser, f"piece{i + 1}", "ia")
            cfg["in_dim"] = d
            pieces.append(cfg)
        cont = _net_section(parser, "continuous", "fcn")
        cont["in_dim"] = d
        arch = {"continuous": cont, "pieces": pieces}
    elif method == "pinn":
        net = _net_section(parser, "net", "fcn")
        net["in_dim"] = d
        arch = {"net": net}
    elif method in ("mpinn", "ipinn"):
        subnets = []
        for i in range(n_sub):
            cfg = _net_section(parser, f"subnet{i + 1}", "fcn")
            cfg["in_dim"] = d
            subnets.append(cfg)
        arch = {"subnets": subnets}
    else:
        raise ConfigError(f"unknown method {method!r}")

    interior = _ints(run.get("interior"))
    if len(interior) != n_sub:
        raise ConfigError(
            f"interior needs {n_sub} counts for {problem}, got {len(interior)}"
        )
    interface = _ints(run.get("interface"))
    if len(interface) != spec.n_interfaces:
        raise ConfigError(
            f"interface needs {spec.n_interfaces} counts for {problem}, got {len(interface)}"
        )
    return TrainConfig(
        problem=problem,
        method=method,
        iterations=run.getint("iterations"),
        architectures=arch,
        interior=interior,
        boundary=run.getint("boundary"),
        interface=interface,
        seed=run.getint("seed", fallback=1234),
        lr=run.getfloat("lr", fallback=0.001),
        weights=LossWeights(
            tau=run.getfloat("tau", fallback=1.0),
            tau_b=run.getfloat("tau_b", fallback=1.0),
            tau_gamma1=run.getfloat("tau_gamma1", fallback=1.0),
            tau_gamma2=run.getfloat("tau_gamma2", fallback=1.0),
        ),
        history_every=run.getint("history_every", fallback=100),
        checkpoint_every=run.getint("checkpoint_every", fallback=0),
    )


def config_from_manifest(path):
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != MANIFEST_FORMAT:
        raise ConfigError(f"{path} is not a run manifest")
    return config_from_dict(payload["config"])


def config_from_dict(cfg):
    weights = cfg.get("weights", {})
    return TrainConfig(
        problem=cfg["problem"],
        method=cfg["method"],
        iterations=cfg["iterations"],
        architectures=cfg["architectures"],
        interior=tuple(cfg["interior"]),
        boundary=cfg["boundary"],
        interface=tuple(cfg["interface"]),
        seed=cfg.get("seed", 1234),
        lr=cfg.get("lr", 0.001),
        weights=LossWeights(**weights) if weights else LossWeights(),
        history_every=cfg.get("history_every", 100),
        checkpoint_every=cfg.get("checkpoint_every", 0),
    )


def load_config(path):
    """Config from an INI file or a previous run's manifest.json."""
    with open(path) as fh:
        head = fh.read(1)
    if head == "{":
        return config_from_manifest(path)
    return config_from_ini(path)


def resolve_config(args_problem, args_method, mode, seed, iterations, config_path=None):
    """CLI config resolution: explicit file wins, else the preset tables."""
    if config_path:
        cfg = load_config(config_path)
        if iterations:
            from dataclasses import replace

            cfg = replace(cfg, iterations=iterations)
        return cfg
    return preset(args_problem, args_method, mode=mode, seed=seed, iterations=iterations)
