"""Command-line front end.

    tstfnbp <command> [--config FILE] [--alpha A] [--beta B] [--beta1 B1]
                      [--lambda1 L1] [--mu MU] [--lambda LAM] [--seed S]
                      [--workers W] [--samples N] [--grid T,T,...]
                      [--out DIR] [--format csv|json]

Values are layered: built-in defaults, then the JSON config file, then the
``TSTFNBP_SEED`` environment variable (seed only), then flags.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field, asdict, fields
from pathlib import Path

import numpy as np

from . import __version__
from . import analytics as an
from .errors import DivergenceError, DomainError, NumericalError, TstfnbpError
from .montecarlo import run_streams
from .samplers import ProcessParams, sample_tstfnbp_paths

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 2, 3, 4
COMMANDS = ("simulate", "pmf", "moments", "lrd", "fpt", "levy", "verify")
# commands whose formulas need the series density (lambda1 > mu**alpha)
PDF_COMMANDS = {"pmf", "fpt", "levy"}
PARAM_KEYS = ("alpha", "beta", "beta1", "lambda1", "mu", "lam")
MAX_SEED = 2 ** 64 - 1


class ConfigError(TstfnbpError):
    """Invalid configuration; maps to exit code 2."""


@dataclass
class RunConfig:
    params: ProcessParams = field(default_factory=ProcessParams)
    seed: int = 42
    workers: int = 1
    n_samples: int = 100_000
    grid: tuple = (1.0,)
    output_format: str = "csv"
    out: str = "out"
    n_max: int = 10
    k: int = 3
    s: float = 1.0
    u_grid: tuple = (0.5, 1.0, 2.0)
    q: tuple = ()
    checks: tuple = ()

    def __post_init__(self):
        if not 0 <= self.seed <= MAX_SEED:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.n_samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.output_format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.output_format!r}")
        if self.n_max < 0 or self.k < 1:
            raise ConfigError("n_max must be >= 0 and k >= 1")
        _check_increasing("grid", self.grid)

    def as_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "params"}
        d["params"] = self.params.as_dict()
        for key, v in d.items():
            if isinstance(v, tuple):
                d[key] = list(v)
        return d

    def run_id(self) -> str:
        d = self.as_dict()
        d.pop("out")
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _check_increasing(name, values):
    bad = [f"{a} -> {b}" for a, b in zip(values[:-1], values[1:]) if not b > a]
    if bad:
        raise ConfigError(f"{name} must be strictly increasing; offending entries: {', '.join(bad)}")
    if values and values[0] <= 0 and name == "grid":
        raise ConfigError(f"grid times must be positive; offending entry: {values[0]}")


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {f.name for f in fields(RunConfig)} | {"samples", "format", "lambda"} | set(PARAM_KEYS)


def _float_list(text: str, flag: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"{flag}: cannot parse {text!r} as a comma-separated list of numbers") from None


def load_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if exc.lineno - 1 < len(text.splitlines()) else ""
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {line}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    flat = dict(data)
    nested = flat.pop("params", {})
    if not isinstance(nested, dict):
        raise ConfigError(f"{path}: 'params' must be an object")
    for key in nested:
        if key not in PARAM_KEYS and key != "lambda":
            raise ConfigError(f"{path}: unknown parameter key {key!r} in 'params'")
    flat.update(nested)
    unknown = sorted(set(flat) - _CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {', '.join(map(repr, unknown))}")
    return flat


def _normalise(raw: dict) -> dict:
    out = dict(raw)
    if "lambda" in out:
        out["lam"] = out.pop("lambda")
    if "samples" in out:
        out["n_samples"] = out.pop("samples")
    if "format" in out:
        out["output_format"] = out.pop("format")
    return out


def build_config(command: str, file_values: dict, flag_values: dict, env=None) -> RunConfig:
    env = os.environ if env is None else env
    merged = _normalise(file_values)
    if "TSTFNBP_SEED" in env:
        try:
            merged["seed"] = int(env["TSTFNBP_SEED"])
        except ValueError:
            raise ConfigError(f"TSTFNBP_SEED={env['TSTFNBP_SEED']!r} is not an integer") from None
    merged.update(_normalise({k: v for k, v in flag_values.items() if v is not None}))
    pkw = {k: merged.pop(k) for k in PARAM_KEYS if k in merged}
    try:
        params = ProcessParams(**{k: float(v) for k, v in pkw.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid parameters: {exc}") from None
    for key in ("grid", "u_grid", "q", "checks"):
        if key in merged and not isinstance(merged[key], tuple):
            v = merged[key]
            merged[key] = tuple(v) if isinstance(v, list) else _float_list(str(v), key)
    if merged.get("checks"):
        merged["checks"] = tuple(int(c) for c in merged["checks"])
    for key in ("seed", "workers", "n_samples", "n_max", "k"):
        if key in merged:
            v = merged[key]
            if isinstance(v, bool) or not float(v).is_integer():
                raise ConfigError(f"{key} must be an integer, got {v!r}")
            merged[key] = int(v)
    try:
        cfg = RunConfig(params=params, **merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    if command in PDF_COMMANDS and not params.pdf_ok:
        raise ConfigError(
            f"command {command!r} needs lambda1 > mu**alpha; got lambda1={params.lambda1}, "
            f"mu**alpha={params.mu ** params.alpha:.6g}")
    if command == "levy" and params.beta != 1.0:
        raise ConfigError("command 'levy' applies to beta = 1; pass --beta 1")
    return cfg


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tstfnbp", description="TSTFNBP sampling, series and checks")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON config file")
    for name in ("alpha", "beta", "beta1", "lambda1", "mu"):
        ap.add_argument(f"--{name}", type=float)
    ap.add_argument("--lambda", dest="lam", type=float, help="Poisson rate")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--samples", dest="n_samples", type=int)
    ap.add_argument("--grid", help="comma-separated increasing times")
    ap.add_argument("--out", help="output directory (default ./out)")
    ap.add_argument("--format", dest="output_format", choices=("csv", "json"))
    ap.add_argument("--n-max", dest="n_max", type=int, help="largest count for pmf")
    ap.add_argument("--k", type=int, help="level for fpt, largest jump for levy")
    ap.add_argument("--s", type=float, help="reference time for lrd")
    ap.add_argument("--u-grid", dest="u_grid", help="transform arguments for moments")
    ap.add_argument("--q", help="extra fractional moment orders for moments")
    ap.add_argument("--checks", help="subset of acceptance checks for verify, e.g. 1,4,11")
    return ap


def parse_config(argv=None, env=None) -> tuple[str, RunConfig]:
    args = make_parser().parse_args(argv)
    file_values = load_config_file(args.config) if args.config else {}
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    for key in ("grid", "u_grid", "q", "checks"):
        if flags.get(key) is not None:
            flags[key] = _float_list(flags[key], f"--{key.replace('_', '-')}")
    return args.command, build_config(args.command, file_values, flags, env)


# ---------------------------------------------------------------------------
# commands: each returns (columns, rows, extra manifest fields)
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig):
    p, grid = cfg.params, np.asarray(cfg.grid)

    def task(stream, count):
        q, m = sample_tstfnbp_paths(p, grid, stream, count, return_subordinator=True)
        return np.stack([m, q.astype(float)], axis=-1)

    res = run_streams(task, cfg.n_samples, cfg.seed, cfg.workers)
    rows = [[i, float(t), float(res[i, j, 0]), int(res[i, j, 1])]
            for i in range(res.shape[0]) for j, t in enumerate(grid)]
    return ["path_id", "time", "M_value", "Q_count"], rows, {}


def cmd_pmf(cfg: RunConfig):
    rows, tails = [], {}
    for t in cfg.grid:
        vec = an.tstfnbp_pmf_vector(cfg.n_max, t, cfg.params, method="auto")
        rows += [[float(t), n, float(pr)] for n, pr in enumerate(vec.probs)]
        tails[repr(float(t))] = vec.tail_bound
    method = "series" if an.pmf_series_converges(cfg.params) else "conditioning"
    return ["time", "n", "probability"], rows, {"tail_bound": tails, "method": method}


def cmd_moments(cfg: RunConfig):
    p = cfg.params
    cols = ["time", "mean", "variance", "dispersion_gap", "E_M_beta", "E_M_2beta"]
    cols += [f"E_M_{q:g}" for q in cfg.q]
    rows = []
    for t in cfg.grid:
        row = [float(t), an.tstfnbp_mean(t, p), an.tstfnbp_variance(t, p), an.dispersion_gap(t, p),
               an.tmllp_fractional_moment(p.beta, t, p), an.tmllp_fractional_moment(2 * p.beta, t, p)]
        row += [an.tmllp_fractional_moment(q, t, p) for q in cfg.q]
        rows.append(row)
    return cols, rows, {}


def cmd_lrd(cfg: RunConfig):
    from .samplers import RngStream
    grid = cfg.grid if len(cfg.grid) > 1 else (10.0, 30.0, 100.0, 300.0, 1000.0)
    fit = an.lrd_slope(cfg.s, grid, cfg.params, RngStream(cfg.seed, 0), cfg.n_samples)
    rows = [[t, c] for t, c in zip(fit.t_grid, fit.correlations)]
    extra = {"slope": fit.slope, "intercept": fit.intercept, "slope_se_mc": fit.slope_se_mc,
             "slope_se_fit": fit.slope_se_fit, "noisy": fit.noisy, "s": cfg.s}
    return ["time", "correlation"], rows, extra


def cmd_fpt(cfg: RunConfig):
    rows = []
    for t in cfg.grid:
        s = an.first_passage(cfg.k, t, cfg.params, mode="survival")
        d, err = an.first_passage(cfg.k, t, cfg.params, mode="density", return_error=True)
        rows.append([float(t), s, 1.0 - s, d, err])
    return ["time", "survival", "cdf", "density", "density_error"], rows, {"k": cfg.k}


def cmd_levy(cfg: RunConfig):
    rows = [[k, an.levy_measure_beta1(k, cfg.params)] for k in range(1, cfg.k + 1)]
    return ["k", "levy_measure"], rows, {}


def cmd_verify(cfg: RunConfig):
    from .verification import run_checks
    results = run_checks(cfg.checks or None, seed=cfg.seed)
    for r in results:
        print(r.line(), file=sys.stderr)
    rows = [[r.number, r.name, "pass" if r.passed else "fail", r.summary] for r in results]
    return ["check", "name", "status", "summary"], rows, {"report": [r.to_dict() for r in results]}


HANDLERS = {c: globals()[f"cmd_{c}"] for c in COMMANDS}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def write_outputs(command: str, cfg: RunConfig, cols, rows, extra, wall: float) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rid = cfg.run_id()
    manifest = {"run_id": rid, "command": command, "version": __version__,
                "config": cfg.as_dict(), "wall_time_s": wall, "results": _jsonable(extra)}
    (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    if command == "verify":
        # the report itself is the artifact
        path = out / "verify.json"
        report = {"manifest": "manifest.json", "run_id": rid,
                  "passed": all(r[2] == "pass" for r in rows), "checks": _jsonable(extra["report"])}
        path.write_text(json.dumps(report, indent=2) + "\n")
        return path
    if cfg.output_format == "json":
        path = out / f"{command}.json"
        body = {"manifest": "manifest.json", "run_id": rid, "columns": cols, "rows": _jsonable(rows)}
        path.write_text(json.dumps(body, indent=1) + "\n")
        return path
    path = out / f"{command}.csv"
    with path.open("w", newline="") as fh:
        fh.write(f"# manifest=manifest.json run_id={rid}\n")
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return path


def main(argv=None) -> int:
    try:
        command, cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    t0 = time.perf_counter()
    try:
        cols, rows, extra = HANDLERS[command](cfg)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError) as exc:
        hint = " (series outside its convergence region)" if isinstance(exc, DivergenceError) else ""
        print(f"numerical failure{hint}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    path = write_outputs(command, cfg, cols, rows, extra, time.perf_counter() - t0)
    print(path)
    if command == "verify" and not all(r[2] == "pass" for r in rows):
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
