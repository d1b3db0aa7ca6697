"""Shared fixtures: the benchmark training runs used by the acceptance suite.

Heavy runs execute through the CLI in subprocesses (two at a time), so the
acceptance criteria also exercise the shipped entry point end to end.  Each
run's artifacts (manifest, history, checkpoint, errors) are parsed back and
shared across criteria.
"""

import json
import os
import subprocess
import sys
import time

import pytest

from aepinn.metrics import rows_from_csv

# (problem, method, preset-mode, directory tag), longest first
ACCEPTANCE_RUNS = [
    ("ex3", "ae", "desk", "ex3-ae"),
    ("ex4", "ae", "desk", "ex4-ae"),
    ("ex5", "ae", "desk", "ex5-ae"),
    ("ex2", "ae", "paper", "ex2-ae"),  # table preset: 50000 iterations
    ("ex3", "ipinn", "desk", "ex3-ipinn"),
    ("ex3", "mpinn", "desk", "ex3-mpinn"),
    ("ex4", "ipinn", "desk", "ex4-ipinn"),
    ("ex4", "mpinn", "desk", "ex4-mpinn"),
    ("ex5", "ipinn", "desk", "ex5-ipinn"),
    ("ex5", "mpinn", "desk", "ex5-mpinn"),
    ("ex1", "ae", "paper", "ex1-ae-a"),
    ("ex1", "ae", "paper", "ex1-ae-b"),  # determinism twin
    ("ex1", "pinn", "paper", "ex1-pinn"),
    ("ex1", "mpinn", "paper", "ex1-mpinn"),
]

MAX_PARALLEL = 2


def parse_history(path):
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            cells = line.strip().split(",")
            rows.append({k: (int(v) if k == "iter" else float(v)) for k, v in zip(header, cells)})
    return rows


class RunResult:
    def __init__(self, directory):
        self.directory = directory
        self.history = parse_history(os.path.join(directory, "history.csv"))
        self.errors = rows_from_csv(open(os.path.join(directory, "errors.csv")).read())[0]
        self.manifest = json.load(open(os.path.join(directory, "manifest.json")))
        self.checkpoint_path = os.path.join(directory, "checkpoint.json")
        self.history_path = os.path.join(directory, "history.csv")

    @property
    def e_l2rel(self):
        return self.errors.report.e_l2rel

    @property
    def initial_loss(self):
        return self.history[0]["total"]

    @property
    def final_loss(self):
        return self.history[-1]["total"]


def _launch(run, base_dir):
    problem, method, mode, tag = run
    out = os.path.join(base_dir, tag)
    env = dict(os.environ)
    env.update(OPENBLAS_NUM_THREADS="1", OMP_NUM_THREADS="1", MKL_NUM_THREADS="1")
    proc = subprocess.Popen(
        [
            sys.executable,
            "-m",
            "aepinn.cli",
            "train",
            "--problem",
            problem,
            "--method",
            method,
            "--preset",
            mode,
            "--seed",
            "1234",
            "--out",
            out,
        ],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
        env=env,
    )
    return proc, out


@pytest.fixture(scope="session")
def benchmark_runs(tmp_path_factory):
    """All acceptance training runs, executed via the CLI, two at a time."""
    base = str(tmp_path_factory.mktemp("acceptance-runs"))
    pending = list(ACCEPTANCE_RUNS)
    active = []
    results = {}
    failures = []
    while pending or active:
        while pending and len(active) < MAX_PARALLEL:
            run = pending.pop(0)
            active.append((run, *_launch(run, base)))
        finished = [entry for entry in active if entry[1].poll() is not None]
        if not finished:
            time.sleep(2.0)
            continue
        for entry in finished:
            active.remove(entry)
            run, proc, out = entry
            stdout, stderr = proc.communicate()
            if proc.returncode != 0:
                failures.append(f"{run}: exit {proc.returncode}\n{stderr[-2000:]}")
            else:
                results[run[3]] = RunResult(out)
    if failures:
        pytest.fail("acceptance training runs failed:\n" + "\n".join(failures))
    return results
