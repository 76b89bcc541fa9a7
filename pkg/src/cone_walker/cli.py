"""``cone-walker`` command line.

Exit codes: 0 success, 1 usage / configuration / IO error, 2 a verification
did not meet its criterion.  Reports embed the resolved configuration and
the library version.  ``--threads`` is left out of the embedded
configuration because it never changes a reported value.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import asymptotics as asy
from . import brownian_reference as bm
from . import exact_engine as ex
from . import monte_carlo as mc
from .cone_geometry import ShrunkenConeQuery, in_shrunken, load_cone
from .errors import ConeWalkerError, ConfigError, VerificationFailure
from .reduite import check_harmonic, reduite_for
from .walk_model import decorrelate, load_model, reverse, validate_model

SCHEMA = "cone-walker-report/1"


@dataclass
class RunConfig:
    command: tuple
    model_path: str | None = None
    cone_path: str | None = None
    params: dict = field(default_factory=dict)
    threads: int | None = None
    output_path: str | None = None
    output_format: str | None = None

    def __post_init__(self):
        eps = self.params.get("epsilon")
        if eps is not None and not 0.0 < eps < 0.5:
            raise ConfigError("epsilon must lie in (0, 1/2)")
        samples = self.params.get("samples")
        if samples is not None and samples < 1:
            raise ConfigError("samples must be at least 1")
        n = self.params.get("n")
        if n is not None and n < 0:
            raise ConfigError("n must be nonnegative")

    def resolved(self) -> dict:
        return {
            "command": " ".join(self.command),
            "model": self.model_path,
            "cone": self.cone_path,
            **{k: _plain(v) for k, v in sorted(self.params.items())},
        }


@dataclass
class Report:
    summary: str
    columns: list | None = None
    rows: list | None = None
    result: dict | None = None
    passed: bool | None = None
    default_format: str = "json"


# -- helpers ------------------------------------------------------------------

def _plain(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_plain(a) for a in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_plain(a) for a in v]
    if isinstance(v, dict):
        return {str(k): _plain(a) for k, a in v.items()}
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def _ints(text: str) -> tuple:
    try:
        return tuple(int(c) for c in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def _floats(text: str) -> tuple:
    try:
        return tuple(float(c) for c in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def _points(text: str) -> list:
    return [_ints(p) for p in text.split(";") if p.strip()]


def _need(cfg: RunConfig, key: str):
    v = cfg.params.get(key)
    if v is None:
        raise ConfigError(f"--{key.replace('_', '-')} is required for '{' '.join(cfg.command)}'")
    return v


def _model(cfg):
    if not cfg.model_path:
        raise ConfigError("--model is required")
    return load_model(cfg.model_path)


def _cone(cfg):
    if not cfg.cone_path:
        raise ConfigError("--cone is required")
    return load_cone(cfg.cone_path)


def _trunc(cfg):
    return ex.TruncationPolicy.parse(cfg.params.get("window") or "auto")


def _flatten(prefix, value, out):
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    else:
        out.append((prefix, json.dumps(_plain(value)) if isinstance(value, (list, tuple)) else _plain(value)))


# -- handlers -----------------------------------------------------------------

def _model_cmd(cfg):
    model = _model(cfg)
    if cfg.command[1] == "validate":
        cone = load_cone(cfg.cone_path) if cfg.cone_path else None
        rep = validate_model(model, cone, cfg.params.get("max_word_length"))
        return Report(f"valid model: period {rep.period}, aperiodic {rep.aperiodic}", result=rep.to_dict())
    new, t = decorrelate(model)
    return Report(
        "decorrelated",
        result={"transform": t.matrix.tolist(), "inverse": t.inverse.tolist(), "model": new.to_dict()},
    )


def _cone_cmd(cfg):
    cone = _cone(cfg)
    res = {"cone": cone.to_dict()}
    pt = cfg.params.get("point")
    if pt is not None:
        res["contains"] = cone.contains(pt)
        res["dist_boundary"] = cone.dist_boundary(pt) if res["contains"] else None
        if cfg.params.get("n") is not None:
            q = ShrunkenConeQuery(cfg.params["n"], cfg.params.get("epsilon") or 0.1)
            res["in_shrunken"] = in_shrunken(cone, pt, q)
            res["threshold"] = q.threshold
    return Report(f"cone {cone.to_dict()['variant']}", result=res)


def _reduite_cmd(cfg):
    cone = _cone(cfg)
    u = reduite_for(cone)
    if cfg.command[1] == "eval":
        pt = _need(cfg, "point")
        res = {"p": u.p, "value": u(pt)}
        if cone.contains(pt):
            res["gradient"] = u.gradient(pt).tolist()
        return Report(f"u = {res['value']!r}", result=res)
    r = check_harmonic(u, cfg.params.get("samples") or 100, cfg.params.get("h") or 1e-3, cfg.params.get("seed") or 0)
    return Report(f"max harmonic residual {r:.3e}", result={"p": u.p, "residual": r})


def _exact_cmd(cfg):
    action = cfg.command[1]
    if action == "count":
        cone = _cone(cfg)
        steps = [tuple(v) for v in (_model(cfg).int_vectors.tolist() if cfg.model_path else _points(_need(cfg, "steps")))]
        n = _need(cfg, "n")
        c = ex.excursion_count(steps, cone, _need(cfg, "start"), _need(cfg, "end"), n, bool(cfg.params.get("closed")))
        return Report(f"count {c}", ["n", "count"], [[n, c]], default_format="csv")
    model, cone = _model(cfg), _cone(cfg)
    x, n = _need(cfg, "start"), _need(cfg, "n")
    mode = cfg.params.get("mode") or "float"
    trunc = _trunc(cfg)
    if action == "survival":
        s = ex.survival(model, cone, x, n, mode, trunc)
        rows = [[k, v, loss] for k, (v, loss) in enumerate(zip(s.values, s.truncation_loss))]
        return Report(f"P(tau > {n}) = {float(s.values[-1])!r}", ["n", "value", "truncation_loss"], rows, default_format="csv")
    if action == "local":
        vals, losses = ex.local_series(model, cone, x, _need(cfg, "end"), n, mode, trunc)
        rows = [[k, v, loss] for k, (v, loss) in enumerate(zip(vals, losses))]
        return Report(f"P(x+S({n})=y, tau>{n}) = {float(vals[-1])!r}", ["n", "value", "truncation_loss"], rows, default_format="csv")
    if action == "green":
        g = ex.green_partial(model, cone, x, _need(cfg, "end"), n, mode, trunc)
        return Report(
            f"partial Green sum {float(g.value)!r}",
            ["n", "value", "tail_estimate", "truncation_loss"],
            [[n, g.value, g.tail_estimate, g.truncation_loss]],
            default_format="csv",
        )
    m, dcone, u, _ = asy.decorrelated_setup(model, cone)
    if u is None:
        raise ConfigError("harmonic-v needs a cone with a closed-form réduite")
    hv = ex.harmonic_V(model, cone, u, x, n, transform=m, mode=mode, trunc=trunc)
    rows = [[k, v] for k, v in enumerate(hv.values)]
    return Report(f"v_{n} = {hv.values[-1]!r}, diagnostic {hv.diagnostic:.3e}", ["n", "value"], rows, default_format="csv")


def _mc_cmd(cfg):
    action = cfg.command[1]
    p = cfg.params
    model = _model(cfg)
    samples, seed = p.get("samples") or 100_000, p.get("seed") or 0
    if action == "fuk-nagaev":
        dmodel, _ = decorrelate(model)
        est, rhs = mc.mc_fuk_nagaev(dmodel, _need(cfg, "x_thresh"), _need(cfg, "y_thresh"), _need(cfg, "n"), samples, seed, cfg.threads)
        return Report(
            f"LHS {est.mean!r} <= RHS {rhs!r}: {est.mean <= rhs}",
            ["lhs", "se", "rhs", "samples", "seed", "holds"],
            [[est.mean, est.std_error, rhs, est.samples, est.seed, int(est.mean <= rhs)]],
            default_format="csv",
        )
    cone = _cone(cfg)
    x, n = _need(cfg, "start"), _need(cfg, "n")
    eps = p.get("epsilon") or 0.1
    m, _, u, _ = asy.decorrelated_setup(model, cone)
    cols = ["mean", "se", "samples", "seed", "substreams", "censored_fraction"]
    if action == "survival":
        est = mc.mc_survival(model, cone, x, n, samples, seed, cfg.threads)
    elif action == "boundary-functional":
        walk = model if p.get("walk") == "forward" else reverse(model)
        if u is None:
            raise ConfigError("boundary-functional needs a cone with a closed-form réduite")
        est = mc.mc_boundary_functional(walk, cone, u, x, n, eps, samples, seed, m, cfg.threads)
    elif action == "stopping-tail":
        tail = mc.mc_stopping_time_tail(model, cone, x, n, eps, samples, seed, m, cfg.threads)
        d = tail.to_dict()
        return Report(
            f"tail frequency {tail.frequency!r}",
            list(d),
            [list(d.values())],
            default_format="csv",
        )
    else:
        est = mc.mc_max_displacement_moment(model, cone, x, n, eps, p.get("alpha") or 0.0, samples, seed, m, cfg.threads)
    d = est.to_dict()
    return Report(f"mean {est.mean!r} +- {est.std_error!r}", cols, [[d[c] if c != "substreams" else d["substreams"] for c in cols]], default_format="csv")


def _bm_cmd(cfg):
    action = cfg.command[1]
    cone = _cone(cfg)
    ev = bm.KernelEvaluator(cone, cfg.params.get("terms") or 200)
    if action == "kernel":
        x, y = _need(cfg, "xf"), _need(cfg, "yf")
        rows = [[t, ev.kernel(x, y, t)] for t in _need(cfg, "t")]
        return Report(f"K_t(x,y) = {rows[-1][1]!r}", ["t", "value"], rows, default_format="csv")
    if action == "survival":
        x = _need(cfg, "xf")
        rows = [[t, ev.survival(x, t)] for t in _need(cfg, "t")]
        return Report(f"k_t(x) = {rows[-1][1]!r}", ["t", "value"], rows, default_format="csv")
    if action == "fit-constants":
        c = bm.fit_asymptotic_constants(cone, evaluator=ev)
        return Report(f"chi {c.chi!r}, chi0 {c.chi0!r}", result=c.to_dict())
    rep = bm.check_gaussian_bounds(cone, cfg.params.get("samples") or 200, cfg.params.get("seed") or 0, evaluator=ev)
    ok = rep.passed()
    return Report(f"gaussian bounds {'PASS' if ok else 'FAIL'}", result=rep.to_dict(), passed=ok)


def _verify_cmd(cfg):
    action = cfg.command[1]
    p = cfg.params
    model, cone = _model(cfg), _cone(cfg)
    trunc = _trunc(cfg)
    series = None
    if action in ("survival", "llt-exponent"):
        x = _need(cfg, "start")
        lo, hi = _need(cfg, "window_n")
        tol = p.get("tolerance")
        tol = (0.08 if action == "survival" else 0.15) if tol is None else tol
        fn = asy.verify_survival_exponent if action == "survival" else asy.verify_llt_exponent
        chk = fn(model, cone, x, (lo, hi), tol, trunc=trunc)
        res, ok, series = chk.to_dict(), chk.passed, chk.series
        summary = f"slope {chk.fit.slope:.4f} vs {chk.expected:.4f} (tol {tol})"
    elif action == "interior":
        rep = asy.verify_interior_llt(
            model, cone, _need(cfg, "start"), _need(cfg, "n"), p.get("A") or 2.0, p.get("epsilon") or 0.1,
            max_spread=p.get("tolerance") if p.get("tolerance") is not None else 0.15, trunc=trunc,
        )
        res, ok = rep.to_dict(), rep.passed
        summary = f"spread {rep.ratio_spread:.4f} over {rep.grid_size} points"
    elif action == "boundary":
        x = _need(cfg, "start")
        eps = p.get("epsilon") or 0.1
        cal = asy.verify_interior_llt(model, cone, x, p.get("calibration_n") or 400, p.get("A") or 2.0, eps, trunc=trunc)
        lo_hi = (0.8, 1.25) if p.get("tolerance") is None else (1 - p["tolerance"], 1 / (1 - p["tolerance"]))
        rep = asy.verify_boundary_llt(
            model, cone, x, _need(cfg, "n_grid"), cal, eps, p.get("samples") or 100_000, p.get("seed") or 0,
            bounds=lo_hi, threads=cfg.threads, trunc=trunc,
        )
        res, ok = {"calibration": cal.to_dict(), "boundary": rep.to_dict()}, rep.passed
        summary = "ratios " + ", ".join(f"{n}: {r:.4f}" for n, r in rep.ratios.items())
    elif action == "harmonic-v":
        tol = p.get("tolerance") if p.get("tolerance") is not None else 0.02
        rep = asy.verify_harmonicity_V(model, cone, _points(_need(cfg, "points")), p.get("n") or 512, trunc=trunc)
        res, ok = {**rep.to_dict(), "tolerance": tol}, rep.max_defect <= tol
        summary = f"max defect {rep.max_defect:.3e}"
    else:
        floor = p.get("tolerance") if p.get("tolerance") is not None else 0.01
        rep = asy.verify_uniform_lower_bound(
            model, cone, _points(_need(cfg, "points")), _need(cfg, "n_grid"), p.get("samples") or 20_000,
            p.get("seed") or 0, cfg.threads,
        )
        res, ok = {**rep.to_dict(), "floor": floor}, rep.minimum >= floor
        summary = f"min normalised survival {rep.minimum:.4f}"
    res = {**res, "passed": bool(ok)}
    rep = Report(f"verify {action}: {'PASS' if ok else 'FAIL'} ({summary})", result=res, passed=bool(ok))
    if series is not None and p.get("series_csv"):
        with open(p["series_csv"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "value"])
            w.writerows([[n, repr(v)] for n, v in series])
    return rep


HANDLERS = {"model": _model_cmd, "cone": _cone_cmd, "reduite": _reduite_cmd, "exact": _exact_cmd,
            "mc": _mc_cmd, "bm": _bm_cmd, "verify": _verify_cmd}


# -- rendering ----------------------------------------------------------------

def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, Fraction):
        return str(v)
    return v


def render(cfg: RunConfig, rep: Report) -> str:
    fmt = cfg.output_format or rep.default_format
    header = {"schema": SCHEMA, "version": __version__, "config": cfg.resolved()}
    if fmt == "json":
        body = {**header}
        if rep.columns is not None:
            body["columns"] = rep.columns
            body["rows"] = _plain(rep.rows)
        if rep.result is not None:
            body["result"] = _plain(rep.result)
        return json.dumps(body, sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    buf.write(f"# {SCHEMA} cone-walker {__version__}\n")
    buf.write("# config: " + json.dumps(header["config"], sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    if rep.columns is not None:
        w.writerow(rep.columns)
        w.writerows([[_cell(c) for c in row] for row in rep.rows])
    else:
        flat: list = []
        _flatten("", rep.result, flat)
        w.writerow(["key", "value"])
        w.writerows([[k, _cell(v)] for k, v in flat])
    return buf.getvalue()


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the process exit code."""
    try:
        rep = HANDLERS[cfg.command[0]](cfg)
        text = render(cfg, rep)
        if cfg.output_path:
            Path(cfg.output_path).write_text(text)
            print(rep.summary)
        else:
            sys.stdout.write(text)
            print(rep.summary, file=sys.stderr)
        if rep.passed is False:
            raise VerificationFailure(rep.summary)
    except VerificationFailure:
        return 2
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return 1
    except (ConeWalkerError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


# -- argument parsing ---------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


_COMMANDS = {
    "model": ["validate", "decorrelate"],
    "cone": ["info"],
    "reduite": ["eval", "check"],
    "exact": ["survival", "local", "green", "harmonic-v", "count"],
    "mc": ["survival", "boundary-functional", "stopping-tail", "fuk-nagaev", "max-moment"],
    "bm": ["kernel", "survival", "fit-constants", "check-bounds"],
    "verify": ["survival", "llt-exponent", "interior", "boundary", "harmonic-v", "lower-bound"],
}


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--model", dest="model_path")
    p.add_argument("--cone", dest="cone_path")
    p.add_argument("--start", "--x", dest="start", type=_ints, help="start point, e.g. 1,1")
    p.add_argument("--end", "--y", dest="end", type=_ints, help="end point for local quantities")
    p.add_argument("--point", type=_floats)
    p.add_argument("--points", help="semicolon-separated lattice points, e.g. '3,3;4,5'")
    p.add_argument("--steps", help="semicolon-separated step vectors for counting")
    p.add_argument("--n", "--N", dest="n", type=int)
    p.add_argument("--n-grid", type=_ints)
    p.add_argument("--window-n", type=_ints, help="fit window n_min,n_max")
    p.add_argument("--mode", choices=["float", "rational"])
    p.add_argument("--window", help="truncation: auto | full | radius:R")
    p.add_argument("--closed", action="store_true", help="count boundary points as inside")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--A", dest="A", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--x-thresh", type=float)
    p.add_argument("--y-thresh", type=float)
    p.add_argument("--walk", choices=["forward", "reversed"])
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--t", type=_floats, help="time(s), comma separated")
    p.add_argument("--xf", type=_floats, help="real point x for Brownian commands")
    p.add_argument("--yf", type=_floats, help="real point y for Brownian commands")
    p.add_argument("--terms", type=int)
    p.add_argument("--h", type=float)
    p.add_argument("--max-word-length", type=int)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--calibration-n", type=int)
    p.add_argument("--series-csv")
    p.add_argument("--output", "-o", dest="output_path")
    p.add_argument("--format", dest="output_format", choices=["csv", "json"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cone-walker", description="Killed lattice walks in cones: exact, Monte Carlo and Brownian references.")
    parser.add_argument("--version", action="version", version=f"cone-walker {__version__}")
    groups = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)
    for group, actions in _COMMANDS.items():
        gp = groups.add_parser(group)
        sub = gp.add_subparsers(dest="action", required=True, parser_class=_Parser)
        for action in actions:
            _add_common(sub.add_parser(action))
    return parser


_NON_PARAMS = {"group", "action", "model_path", "cone_path", "threads", "output_path", "output_format"}


def config_from_args(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    params = {k: v for k, v in vars(ns).items() if k not in _NON_PARAMS and v is not None and v is not False}
    return RunConfig(
        command=(ns.group, ns.action),
        model_path=ns.model_path,
        cone_path=ns.cone_path,
        params=params,
        threads=ns.threads or mc.default_threads(),
        output_path=ns.output_path,
        output_format=ns.output_format,
    )


def main(argv=None) -> int:
    try:
        cfg = config_from_args(sys.argv[1:] if argv is None else argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
