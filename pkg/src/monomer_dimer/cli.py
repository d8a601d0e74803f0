"""Command-line front end.

Every run resolves a configuration (defaults < --config file < explicit
flags), executes one experiment and writes a single result document. CSV
outputs start with a ``#`` header block carrying the config hash, seed and
version; JSON outputs embed the same fields.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import fluctuations as fl
from . import gaussian_repr as gr
from . import graph_core as gc
from . import matching_polynomial as mp
from . import meanfield as mf
from . import quenched as qu
from .reference import ReferenceValues, StaleReferenceError, atomic_write_text, compute_reference

GLOBAL_DEFAULTS = {
    "seed": 0,
    "out": None,
    "format": None,
    "threads": 1,
    "strict_determinism": False,
}
DEFAULT_REF = "reference.json"


class ConfigError(ValueError):
    pass


def _int_list(text: str) -> list[int]:
    return [int(float(v)) for v in str(text).split(",") if v.strip()]


# ------------------------------------------------------------------ parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


_DEFAULTS: dict[tuple, dict] = {}


def _arg(p: argparse.ArgumentParser, key: tuple, flag: str, default, **kw):
    dest = flag.lstrip("-").replace("-", "_")
    _DEFAULTS.setdefault(key, {})[dest] = default
    p.add_argument(flag, dest=dest, default=argparse.SUPPRESS, **kw)


def _globals() -> argparse.ArgumentParser:
    g = _Parser(add_help=False)
    s = argparse.SUPPRESS
    g.add_argument("--seed", type=int, default=s, help="64-bit seed")
    g.add_argument("--out", default=s, help="output path (stdout if omitted)")
    g.add_argument("--format", choices=("csv", "json"), default=s)
    g.add_argument("--threads", type=int, default=s, help="worker threads")
    g.add_argument("--strict-determinism", dest="strict_determinism", action="store_true", default=s)
    g.add_argument("--config", default=s, help="JSON config document")
    return g


def build_parser() -> argparse.ArgumentParser:
    common = _globals()
    top = _Parser(prog="monomer-dimer", parents=[common], description=__doc__.splitlines()[0])
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def leaf(parent, name, key, help_):
        p = parent.add_parser(name, parents=[common], help=help_)
        p.set_defaults(_key=key)
        _DEFAULTS.setdefault(key, {})
        return p

    p = leaf(sub, "exact", ("exact",), "partition function of a graph file")
    _arg(p, ("exact",), "--graph", None, required=False, help=".json or edge-list file")

    p = leaf(sub, "gaussian", ("gaussian",), "Monte Carlo Gaussian representation")
    k = ("gaussian",)
    _arg(p, k, "--graph", None)
    _arg(p, k, "--samples", 100_000, type=lambda s: int(float(s)))
    _arg(p, k, "--vertex", None, type=int, help="estimate this vertex's monomer probability")

    p = leaf(sub, "zeros", ("zeros",), "matching polynomial zeros")
    k = ("zeros",)
    _arg(p, k, "--graph", None, help="graph file, or a directory of graph files")
    _arg(p, k, "--vertex", 0, type=int, help="vertex deleted for the interlacing check")
    _arg(p, k, "--tol", 1e-8, type=float)

    mfp = sub.add_parser("meanfield", help="mean-field phase diagram")
    msub = mfp.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = leaf(msub, "analyze", ("meanfield", "analyze"), "maximisers of psi")
    _arg(p, ("meanfield", "analyze"), "--h", 0.0, type=float)
    _arg(p, ("meanfield", "analyze"), "--J", 0.0, type=float)
    p = leaf(msub, "gamma", ("meanfield", "gamma"), "trace the coexistence curve")
    k = ("meanfield", "gamma")
    _arg(p, k, "--jmin", None, type=float)
    _arg(p, k, "--jmax", None, type=float)
    _arg(p, k, "--steps", 20, type=int)
    p = leaf(msub, "critical", ("meanfield", "critical"), "critical point / reference values")
    _arg(p, ("meanfield", "critical"), "--tol", 1e-8, type=float)
    p = leaf(msub, "exponents", ("meanfield", "exponents"), "critical exponent fit")
    k = ("meanfield", "exponents")
    _arg(p, k, "--direction", "tangent", choices=mf.DIRECTIONS)
    _arg(p, k, "--steps", 13, type=int)
    _arg(p, k, "--lo", 1e-5, type=float)
    _arg(p, k, "--hi", 1e-2, type=float)
    _arg(p, k, "--slope", None, type=float)

    fp = sub.add_parser("fluct", help="finite-N monomer-number law on K_N")
    fsub = fp.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = leaf(fsub, "pmf", ("fluct", "pmf"), "exact pmf")
    k = ("fluct", "pmf")
    _arg(p, k, "--N", 100, type=lambda s: int(float(s)))
    _arg(p, k, "--h", 0.0, type=float)
    _arg(p, k, "--J", 0.0, type=float)
    p = leaf(fsub, "clt", ("fluct", "clt"), "Kolmogorov distance to the Gaussian limit")
    k = ("fluct", "clt")
    _arg(p, k, "--N", 100_000, type=lambda s: int(float(s)))
    _arg(p, k, "--h", 0.0, type=float)
    _arg(p, k, "--J", 0.0, type=float)
    _arg(p, k, "--table", False, action="store_true", help="emit (x, empirical CDF, limit CDF)")
    p = leaf(fsub, "critical", ("fluct", "critical"), "quartic law at the critical point")
    k = ("fluct", "critical")
    _arg(p, k, "--Ns", "1e4,1e5,1e6", type=str)
    _arg(p, k, "--ref", DEFAULT_REF)

    ep = sub.add_parser("er", help="Erdos-Renyi population dynamics")
    esub = ep.add_subparsers(dest="action", required=True, parser_class=_Parser)
    for name in ("density", "pressure"):
        p = leaf(esub, name, ("er", name), f"monomer {name}")
        k = ("er", name)
        _arg(p, k, "--c", 2.0, type=float)
        _arg(p, k, "--x", 1.0, type=float)
        _arg(p, k, "--r", 6 if name == "density" else 30, type=int)
        _arg(p, k, "--K", 100_000, type=lambda s: int(float(s)))
        if name == "density":
            _arg(p, k, "--preset", None, choices=("fig2",))
    p = leaf(esub, "oracle", ("er", "oracle"), "brute-force quenched pressure")
    k = ("er", "oracle")
    _arg(p, k, "--N", 14, type=int)
    _arg(p, k, "--c", 2.0, type=float)
    _arg(p, k, "--x", 1.0, type=float)
    _arg(p, k, "--samples", 500, type=int)

    rp = sub.add_parser("rf", help="random monomer field on K_N")
    rsub = rp.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = leaf(rsub, "solve", ("rf", "solve"), "fixed point, pressure and dimer density")
    _arg(p, ("rf", "solve"), "--w", 1.0, type=float)
    _arg(p, ("rf", "solve"), "--dist", "degenerate:1.0")

    p = leaf(sub, "selfavg", ("selfavg",), "self-averaging experiment")
    k = ("selfavg",)
    _arg(p, k, "--dist", "lognormal:0.0,0.5")
    _arg(p, k, "--w", 1.0, type=float)
    _arg(p, k, "--Ns", "50,100,200,400", type=str)
    _arg(p, k, "--reps", 30, type=int)
    return top


# ----------------------------------------------------------- configuration


def _section(doc: dict, key: tuple) -> dict:
    node = doc
    for part in key:
        node = node.get(part, {}) if isinstance(node, dict) else {}
    return dict(node)


def validate_config(doc: dict) -> None:
    """Reject any key that is neither a global flag nor a known parameter."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    tree: dict = {}
    for key, params in _DEFAULTS.items():
        node = tree
        for part in key[:-1]:
            node = node.setdefault(part, {})
        node[key[-1]] = set(params)

    def walk(node, spec, path):
        for k, v in node.items():
            where = ".".join(path + [k])
            if k not in spec:
                raise ConfigError(f"unknown config key: {where}")
            sub = spec[k]
            if isinstance(sub, set):
                if not isinstance(v, dict):
                    raise ConfigError(f"config section {where} must be an object")
                bad = sorted(set(v) - sub)
                if bad:
                    raise ConfigError(f"unknown config key: {where}.{bad[0]}")
            else:
                if not isinstance(v, dict):
                    raise ConfigError(f"config section {where} must be an object")
                walk(v, sub, path + [k])

    walk({k: v for k, v in doc.items() if k not in GLOBAL_DEFAULTS}, tree, [])


def resolve(argv) -> tuple[tuple, dict]:
    parser = build_parser()
    ns = vars(parser.parse_args(argv))
    key = ns.pop("_key")
    ns.pop("command", None)
    ns.pop("action", None)
    doc = {}
    if "config" in ns:
        path = ns.pop("config")
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        validate_config(doc)
    cfg = dict(GLOBAL_DEFAULTS)
    cfg.update({k: v for k, v in doc.items() if k in GLOBAL_DEFAULTS})
    cfg.update(_DEFAULTS[key])
    cfg.update(_section(doc, key))
    cfg.update(ns)
    if cfg["strict_determinism"]:
        cfg["threads"] = 1
    if cfg["threads"] < 1:
        raise ConfigError("--threads must be >= 1")
    cfg["seed"] = int(cfg["seed"]) & ((1 << 64) - 1)
    return key, cfg


# ----------------------------------------------------------------- commands


def _need(cfg, name):
    if cfg.get(name) is None:
        raise ConfigError(f"missing required parameter --{name}")
    return cfg[name]


def _scalar(d: dict):
    return "json", d


def _rows(rows: list[dict]):
    return "csv", rows


def cmd_exact(cfg):
    m = gc.load_model(_need(cfg, "graph"))
    out = {"n": m.n}
    if isinstance(m, gc.ImitativeModel):
        out["log_z_hl"] = gc.imitative_partition_hl(m)
        if m.n <= gc.ENUM_CAP:
            out["log_z_enum"] = gc.imitative_partition_enum(m)
        if m.n <= gr.IMITATIVE_CAP:
            out["log_z_gaussian"] = math.log(gr.imitative_gaussian_enum(m))
    else:
        out["log_z_hl"] = gc.partition_hl(m)
        if m.n <= gc.ENUM_CAP:
            out["log_z_enum"] = gc.partition_enum(m)
        if m.n <= gr.EXACT_CAP:
            out["log_z_gaussian"] = math.log(gr.gaussian_partition_exact(m))
    out["log_z"] = out["log_z_hl"]
    return _scalar(out)


def cmd_gaussian(cfg):
    m = gc.load_model(_need(cfg, "graph"))
    if isinstance(m, gc.ImitativeModel):
        raise ConfigError("gaussian: Monte Carlo is for models without imitation")
    n, seed, workers = cfg["samples"], cfg["seed"], cfg["threads"]
    if cfg["vertex"] is None:
        est = gr.gaussian_partition_mc(m, n, seed, workers)
        out = {"z_estimate": est.estimate, "stderr": est.stderr, "samples": n}
        if m.n <= gr.EXACT_CAP:
            out["z_exact"] = gr.gaussian_partition_exact(m)
    else:
        est = gr.monomer_prob_gaussian(m, cfg["vertex"], n, seed, workers)
        out = {"vertex": cfg["vertex"], "p_estimate": est.estimate, "stderr": est.stderr, "samples": n}
        out["p_exact"] = gc.monomer_probability(m, cfg["vertex"])
    return _scalar(out)


def _zeros_corpus(folder: Path, cfg):
    rows = []
    for f in sorted(folder.iterdir()):
        if f.suffix not in (".json", ".txt", ".edges"):
            continue
        m = gc.load_model(f)
        m = m.base if isinstance(m, gc.ImitativeModel) else m
        rep = mp.certify_imaginary(m.graph, dict(m.w), cfg["tol"])
        inter = mp.certify_interlacing(m.graph, dict(m.w), cfg["vertex"]) if m.n > 1 else None
        rows.append(
            {
                "graph": f.name,
                "n": m.n,
                "max_abs_real": rep.max_abs_real,
                "min_gap": inter.min_gap if inter else math.inf,
                "imaginary": rep.passed,
                "interlacing": inter.weak if inter else True,
            }
        )
    return _rows(rows)


def cmd_zeros(cfg):
    path = Path(_need(cfg, "graph"))
    if path.is_dir():
        return _zeros_corpus(path, cfg)
    m = gc.load_model(path)
    if isinstance(m, gc.ImitativeModel):
        m = m.base
    w = dict(m.w)
    roots = mp.graph_roots(m.graph, w, cfg["tol"])
    rep = mp.imaginary_report(roots, cfg["tol"])
    inter = mp.certify_interlacing(m.graph, w, cfg["vertex"]) if m.n > 1 else None
    if cfg["format"] == "csv":
        return _rows([{"k": k, "re": float(z.real), "im": float(z.imag)} for k, z in enumerate(roots)])
    out = {
        "roots_im": [float(z.imag) for z in roots],
        "max_abs_real": rep.max_abs_real,
        "imaginary": rep.passed,
    }
    if inter is not None:
        out.update(interlacing_weak=inter.weak, interlacing_strict=inter.strict, interlacing_min_gap=inter.min_gap)
    return _scalar(out)


def cmd_mf_analyze(cfg):
    a = mf.analyze(cfg["h"], cfg["J"])
    return _scalar(
        {
            "classification": a.classification,
            "maximizers": list(a.maximizers),
            "values": list(a.values),
            "lambda2": list(a.lambda2),
            "lambda4": list(a.lambda4),
            "stationary": list(a.stationary),
        }
    )


def cmd_mf_gamma(cfg):
    pts = mf.trace_gamma(_need(cfg, "jmin"), _need(cfg, "jmax"), cfg["steps"])
    return _rows(
        [{"J": p.J, "gamma": p.h, "m1": p.m1, "m2": p.m2, "rho1": p.rho1, "rho2": p.rho2} for p in pts]
    )


def cmd_mf_critical(cfg):
    return "reference", compute_reference(cfg["tol"])


def cmd_mf_exponents(cfg):
    f = mf.critical_exponents(cfg["direction"], cfg["steps"], cfg["lo"], cfg["hi"], cfg["slope"])
    if cfg["format"] == "csv":
        return _rows([{"offset": o, "deviation": d} for o, d in zip(f.offsets, f.deviations)])
    return _scalar(
        {"direction": f.direction, "exponent": f.exponent, "residual": f.residual, "warning": f.warning}
    )


def cmd_fl_pmf(cfg):
    pmf = fl.exact_pmf(cfg["N"], cfg["h"], cfg["J"])
    p = pmf.probabilities()
    return _rows(
        [{"M": int(M), "density": M / pmf.N, "prob": float(q)} for M, q in zip(pmf.support, p)]
    )


def cmd_fl_clt(cfg):
    N, h, J = cfg["N"], cfg["h"], cfg["J"]
    if cfg["table"]:
        s2 = fl.clt_variance(h, J)
        m = mf.analyze(h, J).m_star
        x, emp, lim = fl.cdf_table(N, h, J, m, 0.5, fl.LimitLaw("gaussian", {"sigma2": s2}))
        return _rows([{"x": a, "empirical_cdf": b, "limit_cdf": c} for a, b, c in zip(x, emp, lim)])
    r = fl.clt_check(N, h, J)
    return _scalar({"N": r.N, "m_star": r.m_star, "sigma2": r.sigma2, "distance": r.distance})


def _load_ref(path) -> ReferenceValues:
    if not Path(path).exists():
        raise ConfigError(
            f"reference values file {path} not found; create it with "
            f"`monomer-dimer meanfield critical --out {path}`"
        )
    return ReferenceValues.read(path)


def cmd_fl_critical(cfg):
    ref = _load_ref(cfg["ref"])
    rows = []
    for N in _int_list(cfg["Ns"]):
        r = fl.critical_scaling_check(N, ref)
        rows.append(
            {"N": N, "quartic_distance": r.quartic_distance, "gaussian_distance": r.gaussian_distance}
        )
    return _rows(rows)


def cmd_er_density(cfg):
    if cfg["preset"] == "fig2":
        rows = qu.fig2_table(qu.FIG2["xs"], qu.FIG2["c"], qu.FIG2["K"], cfg["seed"])
        return _rows([dict(zip(("x", "M3", "M4", "M5", "M6"), r)) for r in rows])
    res = qu.er_monomer_density(qu.ERParams(cfg["c"], cfg["x"]), cfg["r"], cfg["K"], cfg["seed"])
    if cfg["format"] == "json":
        return _scalar({"estimate": res.estimate, "stderr": res.stderr, "ordered": res.ordered})
    return _rows([{"generation": g, "mean": m, "stderr": s} for g, m, s in res.ladder])


def cmd_er_pressure(cfg):
    res = qu.er_pressure(qu.ERParams(cfg["c"], cfg["x"]), cfg["r"], cfg["K"], cfg["seed"])
    return _scalar({"estimate": res.estimate, "stderr": res.stderr, "converged": res.converged, "gap": res.gap})


def cmd_er_oracle(cfg):
    res = qu.er_quenched_oracle(cfg["N"], qu.ERParams(cfg["c"], cfg["x"]), cfg["samples"], cfg["seed"])
    return _scalar({"N": cfg["N"], "mean": res.mean, "stderr": res.stderr, "std": res.std})


def cmd_rf_solve(cfg):
    dist = qu.ActivityDistribution.parse(cfg["dist"])
    xi = qu.rf_fixed_point(cfg["w"], dist)
    p, d = qu.rf_pressure_and_density(cfg["w"], dist)
    return _scalar({"xi_star": xi, "pressure": p, "dimer_density": d})


def cmd_selfavg(cfg):
    dist = qu.ActivityDistribution.parse(cfg["dist"])
    rows = qu.self_averaging_experiment(_int_list(cfg["Ns"]), dist, cfg["w"], cfg["reps"], cfg["seed"])
    return _rows([{"N": r.N, "mean": r.mean, "std": r.std, "reps": r.reps} for r in rows])


COMMANDS = {
    ("exact",): cmd_exact,
    ("gaussian",): cmd_gaussian,
    ("zeros",): cmd_zeros,
    ("meanfield", "analyze"): cmd_mf_analyze,
    ("meanfield", "gamma"): cmd_mf_gamma,
    ("meanfield", "critical"): cmd_mf_critical,
    ("meanfield", "exponents"): cmd_mf_exponents,
    ("fluct", "pmf"): cmd_fl_pmf,
    ("fluct", "clt"): cmd_fl_clt,
    ("fluct", "critical"): cmd_fl_critical,
    ("er", "density"): cmd_er_density,
    ("er", "pressure"): cmd_er_pressure,
    ("er", "oracle"): cmd_er_oracle,
    ("rf", "solve"): cmd_rf_solve,
    ("selfavg",): cmd_selfavg,
}


# ------------------------------------------------------------------ output


def _plain(v):
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def record_config(key: tuple, cfg: dict) -> dict:
    """The resolved config as embedded in outputs; the output path is left
    out so that the same run written to two places is byte-identical."""
    rec = {k: v for k, v in cfg.items() if k != "out"}
    rec["command"] = " ".join(key)
    return _plain(rec)


def config_hash(rec: dict) -> str:
    return hashlib.sha256(json.dumps(rec, sort_keys=True).encode()).hexdigest()


def render(key: tuple, cfg: dict, kind: str, payload) -> str:
    rec = record_config(key, cfg)
    h = config_hash(rec)
    if kind == "reference":
        return payload.to_json()
    fmt = cfg["format"] or kind
    if fmt == "json":
        doc = {"version": __version__, "seed": cfg["seed"], "config_hash": h, "config": rec, "result": _plain(payload)}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    rows = payload if isinstance(payload, list) else [payload]
    rows = [_plain(r) for r in rows]
    buf = io.StringIO()
    buf.write(f"# config_hash: {h}\n# seed: {cfg['seed']}\n# version: {__version__}\n")
    buf.write(f"# config: {json.dumps(rec, sort_keys=True)}\n")
    if rows:
        flat = [{k: json.dumps(v) if isinstance(v, list) else v for k, v in r.items()} for r in rows]
        w = csv.DictWriter(buf, fieldnames=list(flat[0]), lineterminator="\n")
        w.writeheader()
        w.writerows({k: repr(v) if isinstance(v, float) else v for k, v in r.items()} for r in flat)
    return buf.getvalue()


def run(argv=None) -> int:
    try:
        key, cfg = resolve(argv)
        kind, payload = COMMANDS[key](cfg)
        text = render(key, cfg, kind, payload)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, RuntimeError, OSError, StaleReferenceError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if cfg["out"]:
        atomic_write_text(cfg["out"], text)
    else:
        sys.stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
