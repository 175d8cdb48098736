"""Command-line driver: validated JSON configs in, CSV/JSON reports out.

Each run writes into ``<root>/<kind>-<hash>`` where ``hash`` is a digest of
the canonical config, so identical configs land in the same directory with
byte-identical payloads.  Wall-clock data lives only in ``provenance.json``.

Exit codes: 0 success, 2 invalid config, 3 numerical guard tripped.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .flow import FlowError, PowerLawDrive
from .limits import VARIANTS, GeneratorProbe, bump, generator_check, ks_two_sample, limit_law, rescaled_empirical
from .pde import (
    SCHEME_VERSION,
    GridSpec,
    NumericalGuardError,
    absorbed_mass,
    blowup_probe,
    closed_form_density,
    point_source,
    smooth_initial,
    solve_pde,
    write_run,
)
from .process import (
    classify_regime,
    limit_law_applies,
    sample_exact,
    sample_from_general_start,
    simulate_discrete_terminal,
    survival_probability,
)
from .rng import PRNG_ALGORITHM, RngStream

KINDS = ("sample", "discrete", "survival", "limit-law", "generator", "pde", "blowup-scan")
OUTPUT_ENV = "LMDIFF_OUTPUT_ROOT"
DEFAULT_ROOT = "lmdiff-runs"
CHUNK = 100_000

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_COMMON = {"kind", "sigma", "gamma", "a0", "seed", "output_dir"}
_KEYS = {
    "sample": _COMMON | {"x0", "t", "m"},
    "discrete": _COMMON | {"t", "m", "n", "mode"},
    "survival": _COMMON | {"t", "m"},
    "limit-law": _COMMON | {"t", "m"},
    "generator": _COMMON | {"tests", "t_small", "n_samples"},
    "pde": _COMMON | {"grid", "initial", "output_times"},
    "blowup-scan": _COMMON | {"gammas", "grid", "initial"},
}
_GRID_KEYS = {"x_max", "nx", "a_min", "a_max", "na", "dt", "t_end"}
_INITIAL_KEYS = {"type", "x_width", "a_lo", "a_hi"}
GENERATOR_TESTS = ("constant", "x2", "a")

REGIME_TABLE = (
    "sigma=-1: gamma<3/2 trapped in finite time; 3/2<=gamma<2 decays, never trapped; gamma>=2 recurrent. "
    "sigma=+1: gamma<=3/2 grows forever; 3/2<gamma<2 explodes oscillating; gamma>=2 explodes with x->0. "
    "Rescaled limit laws: sigma=-1 with gamma>3/2, or sigma=+1 with gamma<1."
)


class ConfigError(ValueError):
    """Collects every field error found in a config."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("; ".join(errors))


@dataclass
class ExperimentConfig:
    kind: str
    sigma: int = -1
    gamma: float = 0.0
    a0: float = 1.0
    x0: float = 0.0
    t: list[float] = field(default_factory=lambda: [1.0])
    m: int = 10_000
    n: int = 10_000
    mode: str = "sde"
    tests: list[str] = field(default_factory=lambda: list(GENERATOR_TESTS))
    t_small: float = 1e-3
    n_samples: int = 1_000_000
    grid: dict | None = None
    initial: dict = field(default_factory=lambda: {"type": "point"})
    output_times: list[float] = field(default_factory=list)
    gammas: list[float] = field(default_factory=lambda: [1.0, 1.6])
    seed: int = 0
    output_dir: str | None = None

    @property
    def drive(self) -> PowerLawDrive:
        return PowerLawDrive(self.sigma, self.gamma)

    def canonical(self) -> dict:
        """Config fields that determine the numeric payload."""
        data = dataclasses.asdict(self)
        data.pop("output_dir")
        return data

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _number(errors, name, value, *, positive=False, nonneg=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append(f"{name}: expected a number, got {value!r}")
        return None
    if integer and int(value) != value:
        errors.append(f"{name}: expected an integer, got {value!r}")
        return None
    if not math.isfinite(value):
        errors.append(f"{name}: must be finite")
        return None
    if positive and not value > 0:
        errors.append(f"{name}: must be > 0, got {value!r}")
        return None
    if nonneg and value < 0:
        errors.append(f"{name}: must be >= 0, got {value!r}")
        return None
    return int(value) if integer else float(value)


def _number_list(errors, name, value, **kw):
    items = value if isinstance(value, list) else [value]
    if not items:
        errors.append(f"{name}: must not be empty")
    return [_number(errors, f"{name}[{i}]", v, **kw) for i, v in enumerate(items)]


def parse_config(text: str, kind: str | None = None) -> ExperimentConfig:
    """Parse and validate a JSON config.

    ``kind`` (from the subcommand) fills or must match the ``"kind"`` key.
    Raises :class:`ConfigError` listing every problem found.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"malformed JSON: {exc}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError(["top level must be a JSON object"])
    errors: list[str] = []
    kind = kind or raw.get("kind")
    if raw.get("kind", kind) != kind:
        errors.append(f"kind: config says {raw['kind']!r} but the subcommand is {kind!r}")
    if kind not in KINDS:
        raise ConfigError([f"kind: must be one of {', '.join(KINDS)}, got {kind!r}"])
    unknown = sorted(set(raw) - _KEYS[kind])
    if unknown:
        errors.append(f"unknown keys for {kind}: {', '.join(unknown)}")
    cfg = ExperimentConfig(kind)

    if "sigma" in raw:
        if raw["sigma"] not in (-1, 0, 1) or isinstance(raw["sigma"], bool):
            errors.append(f"sigma: must be -1, 0 or +1, got {raw['sigma']!r}")
        else:
            cfg.sigma = int(raw["sigma"])
    if "gamma" in raw:
        g = _number(errors, "gamma", raw["gamma"])
        if g is not None and g < 0:
            errors.append(f"gamma: must satisfy gamma >= 0, got {g!r}")
        elif g is not None:
            cfg.gamma = g
    for key, kw in {
        "a0": {"positive": True},
        "x0": {},
        "m": {"integer": True, "nonneg": True},
        "n": {"integer": True, "positive": True},
        "t_small": {"positive": True},
        "n_samples": {"integer": True, "positive": True},
        "seed": {"integer": True, "nonneg": True},
    }.items():
        if key in raw:
            v = _number(errors, key, raw[key], **kw)
            if v is not None:
                setattr(cfg, key, v)
    if cfg.seed >= 1 << 64:
        errors.append("seed: must fit in 64 bits")
    if "t" in raw:
        cfg.t = _number_list(errors, "t", raw["t"], positive=True)
    if "mode" in raw:
        if raw["mode"] not in ("sde", "literal"):
            errors.append(f"mode: must be 'sde' or 'literal', got {raw['mode']!r}")
        else:
            cfg.mode = raw["mode"]
    if "tests" in raw:
        bad = [v for v in raw["tests"] if v not in GENERATOR_TESTS] if isinstance(raw["tests"], list) else [raw["tests"]]
        if bad:
            errors.append(f"tests: unknown entries {bad}; choose from {', '.join(GENERATOR_TESTS)}")
        else:
            cfg.tests = list(raw["tests"])
    if "output_times" in raw:
        cfg.output_times = _number_list(errors, "output_times", raw["output_times"], nonneg=True)
    if "gammas" in raw:
        cfg.gammas = _number_list(errors, "gammas", raw["gammas"], nonneg=True)
    if "output_dir" in raw:
        cfg.output_dir = str(raw["output_dir"])
    if "initial" in raw:
        init = raw["initial"]
        if not isinstance(init, dict) or init.get("type") not in ("point", "smooth"):
            errors.append("initial: expected an object with type 'point' or 'smooth'")
        else:
            extra = sorted(set(init) - _INITIAL_KEYS)
            if extra:
                errors.append(f"initial: unknown keys {', '.join(extra)}")
            cfg.initial = dict(init)
    if "grid" in raw:
        grid = raw["grid"]
        if not isinstance(grid, dict):
            errors.append("grid: expected an object")
        else:
            extra = sorted(set(grid) - _GRID_KEYS)
            missing = sorted({"x_max", "nx", "na", "t_end"} - set(grid))
            if extra:
                errors.append(f"grid: unknown keys {', '.join(extra)}")
            if missing:
                errors.append(f"grid: missing keys {', '.join(missing)}")
            cfg.grid = dict(grid)

    _check_kind(cfg, errors)
    if errors:
        raise ConfigError(errors)
    return cfg


def _check_kind(cfg: ExperimentConfig, errors: list[str]):
    drive_ok = not any(e.startswith(("sigma", "gamma")) for e in errors)
    if cfg.kind == "survival" and drive_ok and not (cfg.sigma == -1 and cfg.gamma < 1.5):
        errors.append(f"survival needs sigma=-1 and gamma<3/2 (regimes: {REGIME_TABLE})")
    if cfg.kind == "limit-law" and drive_ok:
        if cfg.sigma == 0 or not limit_law_applies(PowerLawDrive(cfg.sigma, cfg.gamma)):
            errors.append(
                f"limit-law needs gamma>3/2 with sigma=-1 or gamma<1 with sigma=+1, got sigma={cfg.sigma}, "
                f"gamma={cfg.gamma} (regimes: {REGIME_TABLE})"
            )
    if cfg.kind == "blowup-scan" and cfg.sigma != -1:
        errors.append("blowup-scan studies absorption and needs sigma = -1")
    if cfg.kind in ("pde", "blowup-scan") and cfg.grid is None:
        errors.append("grid: required for this experiment")
    if cfg.kind == "generator" and cfg.sigma == 0:
        errors.append("generator checks need sigma = -1 or +1")


def _grid_for(cfg: ExperimentConfig, sigma: int) -> GridSpec:
    g = dict(cfg.grid)
    nx, na, x_max = int(g["nx"]), int(g["na"]), float(g["x_max"])
    if "a_min" in g and "a_max" in g:
        a_min, a_max = float(g["a_min"]), float(g["a_max"])
    else:
        default = GridSpec.for_point_source(cfg.a0, nx, na, x_max, float(g["t_end"]), sigma if sigma else -1)
        a_min, a_max = g.get("a_min", default.a_min), g.get("a_max", default.a_max)
    dx = 2 * x_max / (nx - 1)
    dt = float(g.get("dt", 0.4 * dx * dx / a_max))
    return GridSpec(x_max, nx, float(a_min), float(a_max), na, dt, float(g["t_end"]))


def _initial(cfg: ExperimentConfig, grid: GridSpec) -> np.ndarray:
    init = cfg.initial
    if init["type"] == "point":
        return point_source(grid, cfg.a0)
    return smooth_initial(
        grid, float(init.get("x_width", 0.2)), float(init.get("a_lo", grid.a_min)), float(init.get("a_hi", cfg.a0))
    )


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(rows[0]))
        for row in rows:
            writer.writerow([_fmt(v) for v in row.values()])
    return buf.getvalue()


def _chunks(m: int, threads: int, job):
    """Run ``job(stream_index, size)`` over fixed-size chunks, merged in order."""
    sizes = [min(CHUNK, m - k) for k in range(0, m, CHUNK)]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(job, range(len(sizes)), sizes))


@dataclass
class ExperimentReport:
    config: dict
    summary: dict
    files: dict[str, str]
    directory: Path | None = None
    provenance: dict = field(default_factory=dict)
    exit_code: int = EXIT_OK


def _run_sample(cfg, threads):
    drive = cfg.drive
    rows, summary = [], {"per_t": []}
    for ti, t in enumerate(cfg.t):
        def job(k, size, t=t, ti=ti):
            stream = RngStream(cfg.seed, 1000 * ti + k)
            if cfg.x0 == 0:
                return sample_exact(drive, cfg.a0, t, stream, size)
            return sample_from_general_start(drive, cfg.x0, cfg.a0, t, stream, size)

        parts = _chunks(cfg.m, threads, job)
        x = np.concatenate([p.x for p in parts]) if parts else np.empty(0)
        a = np.concatenate([p.a for p in parts]) if parts else np.empty(0)
        st = np.concatenate([p.status for p in parts]) if parts else np.empty(0, dtype=np.int8)
        rows += [{"t": t, "x": float(xi), "a": float(ai), "status": int(si)} for xi, ai, si in zip(x, a, st)]
        rates = [p.acceptance_rate for p in parts if p.acceptance_rate is not None]
        summary["per_t"].append(
            {
                "t": t,
                "trapped_fraction": float(np.mean(st == 1)) if st.size else None,
                "exploded_fraction": float(np.mean(st == 2)) if st.size else None,
                "mean_x2": float(np.mean(x * x)) if x.size else None,
                "acceptance_rate": float(np.mean(rates)) if rates else None,
            }
        )
    return summary, {"samples.csv": _csv(rows)}


def _run_discrete(cfg, threads):
    drive = cfg.drive
    rows, summary = [], {"per_t": []}
    for ti, t in enumerate(cfg.t):
        disc = simulate_discrete_terminal(drive, cfg.a0, t, cfg.n, cfg.m, RngStream(cfg.seed, 2 * ti), cfg.mode)
        exact = sample_exact(drive, cfg.a0, t, RngStream(cfg.seed, 2 * ti + 1), cfg.m)
        ks = ks_two_sample(disc.x, exact.x) if cfg.m else None
        rows += [{"t": t, "x": float(xi), "a": float(ai), "status": int(si)} for xi, ai, si in zip(disc.x, disc.a, disc.status)]
        summary["per_t"].append(
            {
                "t": t,
                "trapped_fraction_discrete": disc.trapped_fraction,
                "trapped_fraction_exact": exact.trapped_fraction,
                "ks_x": ks.d_statistic if ks else None,
                "ks_critical_5pct": ks.critical_5pct if ks else None,
            }
        )
    return summary, {"terminal.csv": _csv(rows)}


def _run_survival(cfg, threads):
    drive = cfg.drive
    l_star = drive.blowup_threshold(cfg.a0)
    rows = []
    for ti, t in enumerate(cfg.t):
        def job(k, size, t=t, ti=ti):
            return int(np.count_nonzero(sample_exact(drive, cfg.a0, t, RngStream(cfg.seed, 1000 * ti + k), size).status == 1))

        hits = sum(_chunks(cfg.m, threads, job))
        frac = hits / cfg.m if cfg.m else math.nan
        err = math.sqrt(frac * (1 - frac) / cfg.m) if cfg.m else math.nan
        rows.append(
            {
                "t": t,
                "survival_analytic": float(survival_probability(drive, t, cfg.a0)),
                "survival_mc": 1 - frac,
                "survival_mc_stderr": err,
                "asymptotic": 2 * cfg.a0**drive.exponent / (drive.exponent * math.sqrt(math.pi * t)),
            }
        )
    return {"l_star": l_star, "rows": rows}, {"survival.csv": _csv(rows)}


def _run_limit_law(cfg, threads):
    drive = cfg.drive
    laws = {v: limit_law(drive, v) for v in VARIANTS}
    refs = {v: law.sample(cfg.m, RngStream(cfg.seed, 10_000 + i)) for i, (v, law) in enumerate(laws.items())}
    rows = []
    for ti, t in enumerate(cfg.t):
        emp = rescaled_empirical(drive, t, cfg.m, RngStream(cfg.seed, ti), cfg.a0)
        for v in VARIANTS:
            rep = ks_two_sample(emp, refs[v])
            rows.append({"t": t, "variant": v, "ks": rep.d_statistic, "critical_5pct": rep.critical_5pct,
                         "rejected": rep.rejects()})
    summary = {
        "laws": {v: {"constant": law.constant, "l_exponent": law.l_exponent} for v, law in laws.items()},
        "time_exponent": laws["derived"].time_exponent,
        "regime": classify_regime(drive).regime.value,
        "rows": rows,
    }
    return summary, {"ks.csv": _csv(rows)}


def _probes(cfg):
    zero = lambda x, a: np.zeros_like(np.asarray(x, dtype=float))
    one = lambda x, a: np.ones_like(np.asarray(x, dtype=float))
    return {
        "constant": GeneratorProbe(one, zero, zero, bump, t_small=cfg.t_small, n_samples=cfg.n_samples),
        "x2": GeneratorProbe(lambda x, a: np.asarray(x) ** 2, lambda x, a: 2 * one(x, a), zero, bump,
                             t_small=cfg.t_small, n_samples=cfg.n_samples),
        "a": GeneratorProbe(lambda x, a: a * one(x, a), zero, one, bump, t_small=cfg.t_small, n_samples=cfg.n_samples),
    }


def _run_generator(cfg, threads):
    probes = _probes(cfg)
    rows = []
    for i, name in enumerate(cfg.tests):
        res = generator_check(probes[name], cfg.drive, cfg.a0, RngStream(cfg.seed, i))
        rows.append({"test": name, "lhs": res.lhs, "lhs_stderr": res.lhs_stderr, "rhs": res.rhs})
    return {"rows": rows}, {"generator.csv": _csv(rows)}


def _run_pde(cfg, threads):
    drive = cfg.drive
    grid = _grid_for(cfg, drive.sigma)
    run = solve_pde(drive, _initial(cfg, grid), grid, output_times=cfg.output_times)
    final = run.final
    summary = {
        "p": final.p,
        "q": final.q,
        "mass": final.total_mass,
        "min_value": run.min_value,
        "steps": run.steps,
        "substeps": run.substeps,
        "scheme": SCHEME_VERSION,
    }
    if drive.sigma != 0 and cfg.initial["type"] == "point":
        exact = closed_form_density(drive, cfg.a0, grid.t_end, grid.x[None, :], grid.a[:, None])
        w = grid.x_weights[None, :] * grid.da
        summary["relative_l1_error"] = float(np.sum(np.abs(final.n - exact) * w) / np.sum(exact * w))
        summary["absorbed_mass_closed_form"] = absorbed_mass(drive, cfg.a0, grid.t_end)
    return summary, {"__run__": run}


def _run_blowup_scan(cfg, threads):
    rows, verdicts = [], []
    for g_val in cfg.gammas:
        drive = PowerLawDrive(cfg.sigma, g_val)
        grid = _grid_for(cfg, cfg.sigma)
        times = np.linspace(0, grid.t_end, 51)[1:]
        run = solve_pde(drive, _initial(cfg, grid), grid, output_times=times)
        probe = blowup_probe(run, g_val)
        for k in range(probe.t.size):
            rows.append({"gamma": g_val, "t": float(probe.t[k]), "p": float(probe.p_curve[k]),
                         "Y": float(probe.y_curve[k]), "l1": float(probe.l1_curve[k]), "l2": float(probe.l2_curve[k])})
        verdicts.append({"gamma": g_val, "M": probe.M, "eta": probe.eta, "constraint_ok": probe.constraint_ok,
                         "verdict": probe.verdict, "p_final": float(probe.p_curve[-1]),
                         "l2_ratio": float(probe.l2_curve.max() / probe.l2_curve[0]),
                         "y_growth_exponent": probe.y_growth_exponent, "note": probe.note})
    return {"runs": verdicts}, {"blowup.csv": _csv(rows)}


_RUNNERS = {
    "sample": _run_sample,
    "discrete": _run_discrete,
    "survival": _run_survival,
    "limit-law": _run_limit_law,
    "generator": _run_generator,
    "pde": _run_pde,
    "blowup-scan": _run_blowup_scan,
}


def _build_id() -> str:
    digest = hashlib.sha1()
    for path in sorted(Path(__file__).parent.rglob("*.py")):
        digest.update(path.read_bytes())
    return digest.hexdigest()[:12]


def output_root(cli_out: str | None = None, cfg: ExperimentConfig | None = None) -> Path:
    """``--out`` beats ``$LMDIFF_OUTPUT_ROOT`` beats the config's ``output_dir``."""
    return Path(cli_out or os.environ.get(OUTPUT_ENV) or (cfg.output_dir if cfg else None) or DEFAULT_ROOT)


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None, threads: int = 1) -> ExperimentReport:
    """Run ``cfg`` and write its artifacts under ``out`` (see :func:`output_root`)."""
    start = time.time()
    summary, payloads = _RUNNERS[cfg.kind](cfg, threads)
    directory = output_root(str(out) if out else None, cfg) / f"{cfg.kind}-{cfg.digest()}"
    directory.mkdir(parents=True, exist_ok=True)
    files = {}
    (directory / "config.json").write_text(json.dumps(cfg.canonical(), indent=2, sort_keys=True) + "\n")
    files["config"] = "config.json"
    for name, body in payloads.items():
        if name == "__run__":
            csv_path, json_path = write_run(directory, body)
            files["field"] = csv_path.name
            files["sidecar"] = json_path.name
        else:
            (directory / name).write_text(body)
            files[name.rsplit(".", 1)[0]] = name
    (directory / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    files["summary"] = "summary.json"
    provenance = {
        "prng": PRNG_ALGORITHM,
        "scheme": SCHEME_VERSION,
        "package_version": __version__,
        "build_id": _build_id(),
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(start)),
        "wall_seconds": round(time.time() - start, 3),
        "threads": threads,
        "default_start": "x0 = 0 unless set",
    }
    (directory / "provenance.json").write_text(json.dumps(provenance, indent=2, sort_keys=True) + "\n")
    return ExperimentReport(cfg.canonical(), summary, files, directory, provenance)


def _jsonable(obj: Any):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lmdiff", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", required=True, help="path to a JSON config ('-' for stdin)")
        p.add_argument("--seed", type=int, help="override the config seed (unsigned 64-bit)")
        p.add_argument("--out", help=f"output root (default ${OUTPUT_ENV} or ./{DEFAULT_ROOT})")
        p.add_argument("--threads", type=int, default=1, help="worker threads for Monte Carlo chunks")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = sys.stdin.read() if args.config == "-" else Path(args.config).read_text()
        cfg = parse_config(text, args.kind)
        if args.seed is not None:
            if not 0 <= args.seed < 1 << 64:
                raise ConfigError(["--seed: must be an unsigned 64-bit integer"])
            cfg.seed = args.seed
        if args.threads < 1:
            raise ConfigError(["--threads: must be >= 1"])
        report = run_experiment(cfg, args.out, args.threads)
    except (ConfigError, ValueError, OSError) as exc:
        errors = exc.errors if isinstance(exc, ConfigError) else [str(exc)]
        for e in errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalGuardError, FlowError, ArithmeticError) as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(report.directory)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
