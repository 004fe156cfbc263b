"""Command-line front end.

Every flag can also be set in a flat ``key = value`` config file passed via
``--config``; list values are comma-separated and flags win over the file.

Exit codes: 0 success, 1 verification failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import re
import sys
import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import consistency, domains, osband, scores
from .distributions import format_distribution, parse_distribution
from .functionals import FunctionalSpec, evaluate_T

COMMANDS = ("functional", "score", "counterexample", "path", "certify", "wsweep",
            "consistency", "figure1", "osband")
DEFAULT_WS = (-25.0, -19.0, -10.0, -1.0, 0.0, 0.5, 1.0, 2.0)

_LISTS = {"q", "p", "dist", "G", "x", "t", "z", "W", "box", "constraint"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = ""
    alpha: float | None = None
    q: list[float] = field(default_factory=list)
    p: list[float] = field(default_factory=list)
    dist: list[str] = field(default_factory=list)
    score: str = ""
    G: list[str] = field(default_factory=list)
    Gk: str = ""
    a: str = "zero"
    domain: str = ""
    constraint: list[str] = field(default_factory=list)
    x: list[float] = field(default_factory=list)
    t: list[float] = field(default_factory=list)
    z: list[float] = field(default_factory=list)
    y: float | None = None
    W: list[float] = field(default_factory=list)
    n: int = 0  # 0 selects the per-command default
    seed: int = 0
    box: list[float] = field(default_factory=list)
    resolution: int = 41
    tol: float = 1e-9
    mode: str = "h"
    expect: str = ""
    assert_consistent: bool = False
    extrapolate: bool = True
    threads: int = 1
    out: str = ""

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None or v == [] or v == "":
                continue
            if isinstance(v, list):
                v = ", ".join(_scalar_text(e) for e in v)
            else:
                v = _scalar_text(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        cfg = cls()
        types = {f.name: f.type for f in fields(cls)}
        for key, raw in data.items():
            key = key.replace("-", "_")
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, _coerce(key, raw, getattr(cls(), key)))
        return cfg

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        data = {}
        for ln, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {ln}: expected 'key = value'")
            key, _, value = line.partition("=")
            data[key.strip()] = value.strip()
        return cls.from_mapping(data)


def _scalar_text(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(key, raw, default):
    try:
        if key in _LISTS:
            items = raw if isinstance(raw, list) else [s.strip() for s in str(raw).split(",") if s.strip()]
            if key in ("dist", "G", "constraint"):
                return [str(s) for s in items]
            return [float(s) for s in items]
        if isinstance(default, bool):
            if isinstance(raw, bool):
                return raw
            return str(raw).strip().lower() in ("1", "true", "yes", "on")
        if key in ("alpha", "y"):
            return None if raw in (None, "") else float(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return str(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None


# -- builders -------------------------------------------------------------------

def _functional(cfg: RunConfig) -> FunctionalSpec:
    if cfg.q:
        p = cfg.p or [1.0 / len(cfg.q)] * len(cfg.q)
        return FunctionalSpec(tuple(cfg.q), tuple(p))
    return FunctionalSpec.var_es(cfg.alpha if cfg.alpha is not None else 0.05)


def _score(cfg: RunConfig) -> scores.ScoreSpec:
    if cfg.score:
        tag, _, arg = cfg.score.partition(":")
        if tag not in scores.PRESETS:
            raise ConfigError(f"unknown score preset {cfg.score!r}; choose from {sorted(scores.PRESETS)}")
        alpha = float(arg) if arg else (cfg.alpha if cfg.alpha is not None else 0.05)
        return scores.PRESETS[tag](alpha)
    if not cfg.Gk:
        raise ConfigError("give --score PRESET or --Gk (with --G per quantile level)")
    fs = _functional(cfg)
    G = [scores.parse_score_fn(g) for g in cfg.G] or [scores.zero()] * (fs.k - 1)
    return scores.ScoreSpec(fs, tuple(G), scores.parse_score_fn(cfg.Gk), scores.parse_score_fn(cfg.a))


def _domain(cfg: RunConfig, fs: FunctionalSpec) -> domains.Domain:
    if cfg.constraint:
        cons = tuple(domains.parse_constraint(c) for c in cfg.constraint)
        dom = domains.Domain(fs.k, cons, "custom")
        if cfg.domain:
            dom = domains.preset(cfg.domain, fs).intersect(dom)
        return dom
    return domains.preset(cfg.domain or "A0", fs)


def _dists(cfg: RunConfig):
    if not cfg.dist:
        raise ConfigError("at least one --dist is required")
    return [parse_distribution(s) for s in cfg.dist]


def _vec(name, values, k):
    if len(values) != k:
        raise ConfigError(f"--{name} needs {k} comma-separated numbers")
    return np.asarray(values, dtype=float)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if dataclasses.is_dataclass(o):
        return dataclasses.asdict(o)
    raise TypeError(type(o))


def _round(o):
    if isinstance(o, float):
        return o if not math.isfinite(o) else float(consistency.fmt(o))
    if isinstance(o, dict):
        return {k: _round(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_round(v) for v in o]
    return o


def _dump(obj) -> str:
    obj = json.loads(json.dumps(obj, default=_json_default))
    return json.dumps(_round(obj), indent=2, sort_keys=True) + "\n"


def _emit(cfg: RunConfig, text: str, name: str | None = None):
    if cfg.out:
        path = cfg.out
        if name:
            os.makedirs(cfg.out, exist_ok=True)
            path = os.path.join(cfg.out, name)
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- subcommands ------------------------------------------------------------------

def cmd_functional(cfg):
    fs = _functional(cfg)
    rows = [{"dist": format_distribution(d), "t": evaluate_T(fs, d).tolist()} for d in _dists(cfg)]
    _emit(cfg, _dump({"q": list(fs.q), "p": list(fs.p), "results": rows}))
    return 0


def cmd_score(cfg):
    sc = _score(cfg)
    x = _vec("x", cfg.x, sc.k)
    if cfg.y is not None:
        out = {"x": x.tolist(), "y": cfg.y, "score": scores.eval_score(sc, x, cfg.y)}
    else:
        out = {"x": x.tolist(), "results": [
            {"dist": format_distribution(d), "expected_score": scores.expected_score(sc, x, d, cfg.tol)}
            for d in _dists(cfg)]}
    _emit(cfg, _dump(out))
    return 0


def cmd_counterexample(cfg):
    alpha = cfg.alpha if cfg.alpha is not None else 0.05
    table = consistency.reproduce_counterexample(alpha)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["quantity", "value"])
    writer.writerows((name, consistency.fmt(v)) for name, v in table.rows())
    _emit(cfg, buf.getvalue())
    return 0


def cmd_path(cfg):
    fs = _functional(cfg)
    dom = _domain(cfg, fs)
    x, t = _vec("x", cfg.x, fs.k), _vec("t", cfg.t, fs.k)
    res = domains.construct_path(dom, fs, x, t)
    check = domains.verify_path(dom, fs, res.path, x, t)
    out = {"domain": dom.name, "ok": res.ok, "N": res.path.N,
           "path": [p.tolist() for p in res.path.points], "trace": res.trace,
           "verification": check.as_dict()}
    _emit(cfg, _dump(out))
    return 0 if res.ok and check.ok else 1


def _box(cfg):
    return (cfg.box[0], cfg.box[1]) if cfg.box else (-10.0, 10.0)


def cmd_certify(cfg):
    fs = _functional(cfg)
    dom = _domain(cfg, fs)
    extra = [(cfg.x, cfg.t)] if cfg.x and cfg.t else []
    rep = domains.certify_domain(dom, fs, n=cfg.n or 500, box=_box(cfg), seed=cfg.seed,
                                 extra_pairs=extra, workers=cfg.threads, extrapolate=cfg.extrapolate)
    _emit(cfg, _dump(rep.as_dict()))
    return 1 if cfg.expect and rep.verdict != cfg.expect else 0


def cmd_wsweep(cfg):
    alpha = cfg.alpha if cfg.alpha is not None else 0.05
    rows = domains.w_sweep(alpha, cfg.W or DEFAULT_WS, n=cfg.n or 200,
                           seed=cfg.seed, workers=cfg.threads, extrapolate=cfg.extrapolate)
    lines = ["W,verdict,expected,agrees"]
    lines += [f"{consistency.fmt(r['W'])},{r['verdict']},{r['expected']},{str(r['agrees']).lower()}" for r in rows]
    _emit(cfg, "\n".join(lines) + "\n")
    return 0 if all(r["agrees"] for r in rows) else 1


def cmd_consistency(cfg):
    sc = _score(cfg)
    dom = _domain(cfg, sc.functional)
    box = None
    if cfg.box:
        if len(cfg.box) != 2 * sc.k:
            raise ConfigError(f"--box needs {2 * sc.k} numbers (lo,hi per coordinate)")
        box = tuple((cfg.box[2 * i], cfg.box[2 * i + 1]) for i in range(sc.k))
    conf = consistency.SearchConfig(resolution=cfg.resolution, box=box)
    probes = [cfg.x] if cfg.x else []
    rep = consistency.check_consistency(sc, dom, _dists(cfg), conf, probes)
    _emit(cfg, _dump(rep.as_dict()))
    if cfg.assert_consistent and rep.verdict != "consistent":
        return 1
    return 0


def cmd_figure1(cfg):
    sc = _score(cfg) if (cfg.score or cfg.Gk) else scores.figure1(cfg.alpha if cfg.alpha is not None else 0.05)
    d = _dists(cfg)[0] if cfg.dist else parse_distribution("normal:0:1")
    box = ((cfg.box[0], cfg.box[1]), (cfg.box[2], cfg.box[3])) if len(cfg.box) == 4 else ((-4.0, 1.0), (-4.0, -0.05))
    data = consistency.figure1_grid(sc, d, box, cfg.resolution)
    if cfg.out:
        _emit(cfg, data.curves_csv, "curves.csv")
        _emit(cfg, data.grid_csv, "grid.csv")
    else:
        sys.stdout.write(data.curves_csv)
    return 0


def cmd_osband(cfg):
    sc = _score(cfg)
    fs = sc.functional
    if cfg.mode == "h":
        x = _vec("x", cfg.x, fs.k)
        dists = _dists(cfg) if cfg.dist else None
        H = osband.recover_h(sc, x, dists)
        out = {"x": x.tolist(), "h": H.h.tolist(), "cond": H.cond,
               "min_eig": H.min_eig, "analytic": osband.analytic_h(sc, x).tolist()}
    elif cfg.mode == "path":
        x, z = _vec("x", cfg.x, fs.k), _vec("z", cfg.z, fs.k)
        d = _dists(cfg)[0]
        path = osband.PathPolyline([z, x])
        rebuilt = osband.path_integral_diff(sc, path, d)
        direct = scores.expected_score(sc, x, d, 1e-12) - scores.expected_score(sc, z, d, 1e-12)
        out = {"z": z.tolist(), "x": x.tolist(), "path_integral": rebuilt, "direct": direct}
    elif cfg.mode == "psd":
        dom = _domain(cfg, fs)
        lo, hi = _box(cfg)
        axes = [np.linspace(lo, hi, cfg.resolution)] * fs.k
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, fs.k)
        grid = [g for g in grid if sc.in_domain(g)]
        out = osband.psd_scan(sc, dom, grid).as_dict()
    else:
        raise ConfigError("--mode must be h, path or psd")
    _emit(cfg, _dump(out))
    return 0


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    common.add_argument("--alpha", type=float)
    common.add_argument("--q", help="quantile levels, comma-separated")
    common.add_argument("--p", help="spectral weights, comma-separated")
    common.add_argument("--dist", action="append",
                        help="point:C | normal:MU:SIGMA | discrete:Y@W;... | mixture:W*DIST+...")
    common.add_argument("--score", help="preset: counterexample_cone[:alpha] | figure1[:alpha]")
    common.add_argument("--G", action="append", help="quantile-component function, e.g. exp:-1:20")
    common.add_argument("--Gk", help="convex last-coordinate function, e.g. neg_log_neg")
    common.add_argument("--a", help="offset function (default zero)")
    common.add_argument("--domain", help="A0 | full | A0_plus | A0_minus | half_strip | A0_neg_last | "
                                         "band:C | cone_counterexample | W_cone:W")
    common.add_argument("--constraint", action="append", help='raw constraint, e.g. "1 -1 <= 0"')
    for name in ("x", "t", "z", "W", "box"):
        common.add_argument(f"--{name}", help="comma-separated numbers")
    common.add_argument("--y", type=float)
    common.add_argument("--n", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--resolution", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--mode", choices=("h", "path", "psd"))
    common.add_argument("--expect", choices=("holds", "fails", "vacuous"))
    common.add_argument("--assert-consistent", action="store_true", default=None)
    common.add_argument("--no-extrapolate", dest="extrapolate", action="store_false", default=None,
                        help="count staircases cut off by the sweep budget as failures")
    common.add_argument("--threads", type=int)
    common.add_argument("--out", help="output file (directory for figure1)")

    parser = argparse.ArgumentParser(prog="elicit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    data = {}
    if ns.config:
        with open(ns.config) as fh:
            data.update(vars(RunConfig.from_text(fh.read())))
        data = {k: v for k, v in data.items() if v not in (None, "", [])}
    env_threads = os.environ.get("ELICIT_THREADS")
    if env_threads:
        data.setdefault("threads", env_threads)
    for key, value in vars(ns).items():
        if key == "config" or value is None:
            continue
        if key in ("dist", "G", "constraint"):
            value = [s for v in value for s in (v.split(",") if key != "dist" else [v])]
        data[key] = value
    return RunConfig.from_mapping(data)


_NUMERIC = re.compile(r"^-[\d.]")


def _join_negative_values(argv):
    """``--x -1,2`` -> ``--x=-1,2``: argparse would read ``-1,2`` as a flag."""
    out = []
    for tok in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and _NUMERIC.match(tok):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _join_negative_values(sys.argv[1:] if argv is None else list(argv))
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = resolve_config(ns)
        return HANDLERS[cfg.command](cfg)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"elicit: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
