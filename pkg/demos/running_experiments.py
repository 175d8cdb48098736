"""
Experiments from JSON configs
=============================

The same configs accepted by the ``lmdiff`` command can be run from Python.
Each run lands in a directory named by a hash of its config, and a rerun
reproduces the payload byte for byte.
"""

# %%
import json
import tempfile
from pathlib import Path

from lmdiff.cli import main, parse_config, run_experiment

cfg = parse_config(json.dumps({"kind": "survival", "gamma": 0.5, "t": [1, 10, 100], "m": 200_000}))
with tempfile.TemporaryDirectory() as root:
    report = run_experiment(cfg, root)
    print(report.directory.name)
    print((report.directory / "survival.csv").read_text())

# %%
# The command-line entry point takes the same document
# ----------------------------------------------------
with tempfile.TemporaryDirectory() as root:
    path = Path(root) / "limit.json"
    path.write_text(json.dumps({"kind": "limit-law", "sigma": 1, "gamma": 0.0, "t": [1e4], "m": 20_000}))
    code = main(["limit-law", "--config", str(path), "--out", root, "--threads", "2"])
    (run_dir,) = Path(root).glob("limit-law-*")
    print("exit code", code)
    print((run_dir / "ks.csv").read_text())
