"""Command-line front end: config parsing, dispatch, and provenance.

Config files are plain ``key = value`` lines (``#`` comments allowed);
keys mirror the long flag names with underscores. Flags override file
values. Every run writes its effective config (``config_used.cfg``) and
a ``manifest.json`` next to the data outputs.

Exit codes: 0 success, 2 usage error, 3 aborted optimization traces,
4 numerical error, 5 I/O error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__, runtime
from .ansatz import realization_from_json, realization_to_json, run
from .costgrad import projective_cost
from .errors import BracketError, ContractError, ConvergenceError, StateCorruptionError
from .experiments import (
    OptimizeConfig,
    VarianceConfig,
    landscape_slice,
    optimize_ensemble,
    variance_sweep,
    write_landscape_csv,
    write_traces_csv,
    write_variance_csv,
)
from .infochannel import MISweepConfig, mi_depth_sweep, write_mutualinfo_csv
from .mipt import (
    EntropyConfig,
    collapse_fit,
    collapse_to_json,
    entropy_sweep,
    read_entropy_csv,
    write_entropy_csv,
)
from .observables import Observable, exact_ground_energy

OUT_DIR_ENV = "MONIVQA_OUT_DIR"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ABORTED = 3
EXIT_NUMERICAL = 4
EXIT_IO = 5


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# option grammar
# ---------------------------------------------------------------------------

def parse_int_list(text) -> tuple[int, ...]:
    return tuple(int(tok) for tok in str(text).split(",") if tok != "")


def parse_float_grid(text) -> tuple[float, ...]:
    """Either a comma list or an inclusive start:stop:step range."""
    text = str(text)
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid {text!r} must be start:stop:step")
        start, stop, step = (float(t) for t in parts)
        if step <= 0:
            raise UsageError("grid step must be positive")
        values = []
        k = 0
        while start + k * step <= stop + 1e-12:
            values.append(start + k * step)
            k += 1
        return tuple(values)
    return tuple(float(tok) for tok in text.split(",") if tok != "")


@dataclass(frozen=True)
class Opt:
    name: str
    parse: object
    default: object = None
    required: bool = False
    help: str = ""


_COMMON = [
    Opt("out_dir", str, "runs", help="output directory"),
    Opt("seed", int, 0, help="master seed"),
    Opt("workers", int, None, help="parallel sample pool size (default: cores)"),
]

_OPTIONS: dict[str, list[Opt]] = {
    "variance": [
        Opt("ansatz", str, required=True),
        Opt("n", parse_int_list, required=True),
        Opt("depth", int, 16),
        Opt("p", parse_float_grid, required=True),
        Opt("variant", str, "projective"),
        Opt("ns", int, 1000),
        Opt("grad_index", int, None),
        Opt("obs", str, "zz01"),
        Opt("delta", float, 0.5),
    ],
    "optimize": [
        Opt("ansatz", str, required=True),
        Opt("n", int, required=True),
        Opt("depth", int, 20),
        Opt("p", float, required=True),
        Opt("obs", str, "zz01"),
        Opt("delta", float, 0.5),
        Opt("traces", int, 10),
        Opt("max_iters", int, 500),
    ],
    "landscape": [
        Opt("ansatz", str, required=True),
        Opt("n", int, required=True),
        Opt("depth", int, 20),
        Opt("p", float, required=True),
        Opt("obs", str, "zz01"),
        Opt("delta", float, 0.5),
        Opt("extent", float, float(np.pi)),
        Opt("resolution", int, 51),
        Opt("max_iters", int, 500),
    ],
    "entropy": [
        Opt("ansatz", str, required=True),
        Opt("n", parse_int_list, required=True),
        Opt("p", parse_float_grid, required=True),
        Opt("depth", int, None),
        Opt("depth_rule", str, "4n"),
        Opt("ns", int, 1000),
        Opt("delta", float, 0.5),
    ],
    "collapse": [
        Opt("entropy_csv", str, required=True),
        Opt("pc0", float, None),
        Opt("nu0", float, 1.3),
        Opt("restarts", int, 5),
    ],
    "mutualinfo": [
        Opt("ansatz", str, "hea2"),
        Opt("n", parse_int_list, required=True),
        Opt("depths", parse_int_list, None),
        Opt("na", int, 2000),
        Opt("nb", int, 2000),
        Opt("obs", str, "zz01"),
        Opt("delta", float, 0.5),
    ],
    "replay": [
        Opt("realization", str, required=True),
        Opt("obs", str, "zz01"),
        Opt("delta", float, 0.5),
    ],
}


@dataclass(frozen=True)
class ExperimentConfig:
    subcommand: str
    params: dict

    def echo_text(self) -> str:
        lines = [f"subcommand = {self.subcommand}"]
        for key in sorted(self.params):
            val = self.params[key]
            if isinstance(val, tuple):
                val = ",".join(runtime.fmt(v) for v in val)
            lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"


def _read_config_file(path) -> dict[str, str]:
    values = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{lineno}: expected key = value")
                key, val = (part.strip() for part in line.split("=", 1))
                values[key] = val
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}")
    return values


def parse_config(argv) -> ExperimentConfig:
    parser = argparse.ArgumentParser(
        prog="monivqa",
        description="Monitored variational quantum circuit experiments")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, opts in _OPTIONS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="key = value file")
        for opt in opts + _COMMON:
            flag = "--" + opt.name.replace("_", "-")
            sp.add_argument(flag, dest=opt.name, default=None, help=opt.help)
    ns = parser.parse_args(argv)
    opts = _OPTIONS[ns.subcommand] + _COMMON
    known = {o.name: o for o in opts}

    file_values = _read_config_file(ns.config) if ns.config else {}
    for key in file_values:
        if key not in known:
            raise UsageError(f"unknown config key {key!r} for "
                             f"{ns.subcommand!r}")

    params = {}
    for opt in opts:
        raw = getattr(ns, opt.name)
        if raw is None:
            raw = file_values.get(opt.name)
        if raw is None:
            if opt.required:
                raise UsageError(f"missing required option --"
                                 f"{opt.name.replace('_', '-')}")
            params[opt.name] = opt.default
            continue
        try:
            params[opt.name] = opt.parse(raw)
        except UsageError:
            raise
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for {opt.name}: {exc}")
    if params.get("out_dir") == "runs" and OUT_DIR_ENV in os.environ:
        params["out_dir"] = os.environ[OUT_DIR_ENV]
    if params.get("workers") is None:
        params["workers"] = runtime.default_workers()
    return ExperimentConfig(ns.subcommand, params)


# ---------------------------------------------------------------------------
# experiment dispatch
# ---------------------------------------------------------------------------

def _dispatch(cfg: ExperimentConfig, out_dir: str):
    """Returns (output file names, manifest extras, exit code)."""
    p = cfg.params
    seed, workers = p["seed"], p["workers"]
    if cfg.subcommand == "variance":
        rows = variance_sweep(VarianceConfig(
            p["ansatz"], p["n"], p["depth"], p["p"], p["variant"], p["ns"],
            p["grad_index"], p["obs"], p["delta"], seed, workers))
        write_variance_csv(rows, os.path.join(out_dir, "variance.csv"))
        return ["variance.csv"], {}, EXIT_OK

    if cfg.subcommand == "optimize":
        ocfg = OptimizeConfig(p["ansatz"], p["n"], p["depth"], p["p"],
                              p["obs"], p["delta"], p["traces"], seed,
                              workers, p["max_iters"])
        traces = optimize_ensemble(ocfg)
        outputs = ["traces.csv"]
        write_traces_csv(traces, os.path.join(out_dir, "traces.csv"))
        for tid, tr in enumerate(traces):
            name = f"realization_{tid:03d}.json"
            with open(os.path.join(out_dir, name), "w") as fh:
                fh.write(realization_to_json(tr.realization))
            outputs.append(name)
        extras = {
            "exact_ground_energy": exact_ground_energy(
                Observable(p["obs"], p["n"], p["delta"])),
            "final_costs": [tr.final_cost for tr in traces],
            "aborted_traces": [tid for tid, tr in enumerate(traces)
                               if tr.aborted],
        }
        code = EXIT_ABORTED if extras["aborted_traces"] else EXIT_OK
        return outputs, extras, code

    if cfg.subcommand == "landscape":
        ocfg = OptimizeConfig(p["ansatz"], p["n"], p["depth"], p["p"],
                              p["obs"], p["delta"], 1, seed, workers,
                              p["max_iters"])
        trace = optimize_ensemble(ocfg)[0]
        obs = Observable(p["obs"], p["n"], p["delta"])

        def cost_fn(theta):
            return projective_cost(trace.realization, theta, trace.record,
                                   obs).value

        sl = landscape_slice(cost_fn, trace.theta_final, p["extent"],
                             p["resolution"],
                             runtime.derive_rng(seed, runtime.STREAM_LANDSCAPE))
        write_landscape_csv(sl, os.path.join(out_dir, "landscape.csv"))
        extras = {"center_cost": trace.final_cost,
                  "aborted": bool(trace.aborted)}
        return ["landscape.csv"], extras, (EXIT_ABORTED if trace.aborted
                                           else EXIT_OK)

    if cfg.subcommand == "entropy":
        depth = p["depth"]
        factor = 4
        if depth is None:
            rule = p["depth_rule"].lower()
            if not rule.endswith("n"):
                raise UsageError("depth_rule must look like '4n'")
            factor = int(rule[:-1])
        table = entropy_sweep(EntropyConfig(
            p["ansatz"], p["n"], p["p"], depth, factor, p["ns"], p["delta"],
            seed, workers))
        write_entropy_csv(table, os.path.join(out_dir, "entropy.csv"))
        return ["entropy.csv"], {}, EXIT_OK

    if cfg.subcommand == "collapse":
        table = read_entropy_csv(p["entropy_csv"])
        init = None if p["pc0"] is None else (p["pc0"], p["nu0"])
        fit = collapse_fit(table, init, p["restarts"], seed)
        with open(os.path.join(out_dir, "collapse.json"), "w") as fh:
            fh.write(collapse_to_json(fit))
        return ["collapse.json"], {"p_c": fit.p_c, "nu": fit.nu}, EXIT_OK

    if cfg.subcommand == "mutualinfo":
        rows = mi_depth_sweep(MISweepConfig(
            p["ansatz"], p["n"], p["depths"], p["na"], p["nb"], p["obs"],
            p["delta"], seed))
        write_mutualinfo_csv(rows, os.path.join(out_dir, "mutualinfo.csv"))
        return ["mutualinfo.csv"], {}, EXIT_OK

    if cfg.subcommand == "replay":
        with open(p["realization"]) as fh:
            real = realization_from_json(fh.read())
        state, record = run(real, rng=np.random.default_rng(real.seed))
        obs = Observable(p["obs"], real.template.n_qubits, p["delta"])
        from .observables import expectation
        doc = {
            "cost": expectation(state, obs),
            "joint_probability": record.joint_probability,
            "outcomes": list(record.outcomes),
        }
        with open(os.path.join(out_dir, "replay.json"), "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
        return ["replay.json"], {"cost": doc["cost"]}, EXIT_OK

    raise UsageError(f"unknown subcommand {cfg.subcommand!r}")


def run_experiment(cfg: ExperimentConfig) -> int:
    """Execute one experiment; writes outputs, config echo, and manifest."""
    out_dir = cfg.params["out_dir"]
    started = time.time()
    try:
        os.makedirs(out_dir, exist_ok=True)
        probe = os.path.join(out_dir, ".write_probe")
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as exc:
        print(f"error: cannot write to {out_dir}: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        outputs, extras, code = _dispatch(cfg, out_dir)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ContractError, BracketError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, StateCorruptionError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

    with open(os.path.join(out_dir, "config_used.cfg"), "w") as fh:
        fh.write(cfg.echo_text())
    manifest = {
        "version": f"monivqa-{__version__}",
        "subcommand": cfg.subcommand,
        "seed": cfg.params["seed"],
        "wall_time_s": time.time() - started,
        "outputs": outputs + ["config_used.cfg"],
        "extras": extras,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    for name in outputs:
        print(f"wrote {os.path.join(out_dir, name)}")
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run_experiment(cfg)


if __name__ == "__main__":
    sys.exit(main())
