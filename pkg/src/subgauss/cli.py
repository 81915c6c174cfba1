"""Command-line front end.

    subgauss <command> [key=value ...] [--seed N] [--trials N] [--threads N]
             [--out FILE] [--format json|csv] [--constants FILE]
             [--config FILE] [--no-timestamp]

Exit codes: 0 success, 1 usage error, 2 a checked bound or property failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from datetime import datetime, timezone
from typing import Callable

import numpy as np

from . import (constants, geometry, inequalities, montecarlo, nullspace, orlicz,
               sketch)
from .ensembles import EnsembleSpec, MultiplierSpec
from .errors import SubGaussError
from .geometry import SetSpec
from .laws import PARAM_NAMES, DistributionSpec

DEFAULT_SEED = 20240101
LAW_KEYS = sorted({v for v in PARAM_NAMES.values() if v})

EXIT_OK, EXIT_USAGE, EXIT_CHECK = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# parameter handling


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


_TYPES: dict[str, Callable[[str], object]] = {"float": float, "int": int, "str": str, "floats": _floats}


def _law_params(**defaults):
    d = {"dist": ("str", defaults.get("dist", "gaussian"))}
    d.update({k: ("float", None) for k in LAW_KEYS})
    return d


COMMANDS: dict[str, dict] = {
    "psi": {**_law_params(), "alpha": ("float", 2.0), "method": ("str", "auto")},
    "width": {"set": ("str", "sparse_sphere"), "n": ("int", 10), "s": ("int", 2), "points": ("str", None)},
    "tail": {**_law_params(), "m": ("int", 50), "a": ("str", "uniform"),
             "c": ("float", None)},
    "hw": {**_law_params(), "n": ("int", 20), "matrix": ("str", "dense"), "c": ("float", None),
           "matrix_seed": ("int", 0)},
    "concentrate": {**_law_params(), "m": ("int", 30), "n": ("int", 10), "set": ("str", "sparse_sphere"),
                    "s": ("int", 2), "points": ("str", None), "B": ("str", "identity"), "u": ("float", 1.5)},
    "scaling": {"Ks": ("floats", [4.0, 6.0, 8.0, 12.0])},
    "tightness": {"K": ("float", 4.0), "m": ("int", None)},
    "jl": {**_law_params(dist="rademacher"), "mode": ("str", "probe"), "points": ("int", 100),
           "dim": ("int", 256), "eps": ("float", 0.2), "delta": ("float", 0.05), "m": ("int", None),
           "p_sparse": ("float", 0.1), "points_seed": ("int", 0)},
    "sketch": {**_law_params(), "n": ("int", 400), "d": ("int", 10), "B": ("str", None), "y": ("str", None),
               "constraint": ("str", "unconstrained"), "delta": ("float", 0.1), "m": ("int", None),
               "instance_seed": ("int", 0)},
    "nsp": {"mode": ("str", "rip"), "n": ("int", 12), "s": ("int", 2), "p": ("float", 0.5),
            "rho": ("float", 0.5), "m": ("int", None), "matrix": ("str", None)},
    "binom": {"m": ("int", 50), "p": ("float", 0.1), "k": ("float", 10.0)},
    "appendixc": {"grid": ("int", 100_000)},
}

DEFAULT_TRIALS = {"psi": 100_000, "width": 10_000, "tail": 100_000, "hw": 100_000, "concentrate": 20_000,
                  "scaling": 200_000, "tightness": 1_000_000, "jl": 200, "sketch": 200, "nsp": 100,
                  "binom": 0, "appendixc": 0}


def parse_params(command: str, items: list[str]) -> dict:
    spec = COMMANDS[command]
    out = {k: v[1] for k, v in spec.items()}
    for item in items:
        key, eq, value = item.partition("=")
        key = key.strip()
        if not eq:
            raise UsageError(f"expected key=value, got {item!r}")
        if key not in spec:
            raise UsageError(f"unknown parameter {key!r} for command {command!r}")
        try:
            out[key] = _TYPES[spec[key][0]](value.strip())
        except ValueError:
            raise UsageError(f"bad value for {key!r}: {value!r}") from None
    return out


def read_config(path) -> list[str]:
    items = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                items.append(line)
    return items


def law_from(params: dict) -> DistributionSpec:
    given = {k: params[k] for k in LAW_KEYS if params.get(k) is not None}
    try:
        return DistributionSpec.parse(params["dist"], **given)
    except SubGaussError as e:
        raise UsageError(str(e)) from None


def set_from(params: dict, n: int) -> SetSpec:
    kind = params["set"]
    if kind == "sparse_sphere":
        return SetSpec.sparse_sphere(n, params["s"])
    if kind == "finite":
        if not params.get("points"):
            raise UsageError("set=finite needs points=<csv file>")
        return SetSpec.from_csv(params["points"])
    raise UsageError(f"unknown set {kind!r} (use sparse_sphere or finite)")


# ---------------------------------------------------------------------------
# commands; each returns (result dict, passed, optional csv text)


def cmd_psi(p, ctx):
    law = law_from(p)
    alpha, method = p["alpha"], p["method"]
    if method == "auto":
        res = orlicz.psi_norm(law, alpha)
    elif method == "analytic":
        res = orlicz.psi_norm_analytic(law, alpha)
    elif method == "mgf":
        res = orlicz.psi_norm_from_mgf(orlicz.mgf_of_power(law, alpha), alpha)
    elif method == "samples":
        xs = law.sample(np.random.default_rng(ctx.seed), ctx.trials)
        res = orlicz.psi_norm_from_samples(xs, alpha, seed=ctx.seed)
    else:
        raise UsageError("method must be auto, analytic, mgf or samples")
    return {"law": str(law), **res.to_dict()}, True, None


def cmd_width(p, ctx):
    T = set_from(p, p["n"])
    est, ci = geometry.gaussian_width(T, ctx.trials, ctx.seed)
    out = {"set": T.variant, "n": T.n, "estimate": est, "ci": list(ci), "radius": geometry.radius(T)}
    if T.variant == "sparse_sphere":
        out["width_sq_bound"] = geometry.sparse_width_bound(T.n, T.s)
        if T.s == T.n:
            out["chi_mean"] = geometry.chi_mean(T.n)
    return out, True, None


def _coeffs(spec: str, m: int) -> np.ndarray:
    if spec == "uniform":
        return np.full(m, 1.0 / math.sqrt(m))
    if spec == "e1":
        a = np.zeros(m)
        a[0] = 1.0
        return a
    return np.loadtxt(spec, delimiter=",", dtype=float, ndmin=1)


def cmd_tail(p, ctx):
    a = _coeffs(p["a"], p["m"])
    b = montecarlo.empirical_tail(a, law_from(p), ctx.trials, seed=ctx.seed, threads=ctx.threads, c=p["c"])
    dom = b.domination()
    return b.to_dict(), dom["holds"], b.to_csv()


def _hw_matrix(spec: str, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if spec == "identity":
        return np.eye(n)
    if spec == "dense":
        return rng.standard_normal((n, n))
    if spec == "rank1":
        u = rng.standard_normal(n)
        return np.outer(u, u) / (u @ u)
    return np.loadtxt(spec, delimiter=",", dtype=float, ndmin=2)


def cmd_hw(p, ctx):
    A = _hw_matrix(p["matrix"], p["n"], p["matrix_seed"])
    b = montecarlo.empirical_hw_tail(A, law_from(p), ctx.trials, seed=ctx.seed, threads=ctx.threads,
                                     c=p["c"], constants_file=ctx.constants)
    dom = b.domination()
    return b.to_dict(), dom["holds"], b.to_csv()


def cmd_concentrate(p, ctx):
    T = set_from(p, p["n"])
    ens = EnsembleSpec(p["m"], T.n, law_from(p))
    if p["B"] == "identity":
        B = MultiplierSpec.identity(ens.m)
    elif p["B"] == "projection":
        B = MultiplierSpec.ortho_projection(ens.m)
    else:
        B = MultiplierSpec.dense(np.loadtxt(p["B"], delimiter=",", dtype=float, ndmin=2))
    r = montecarlo.concentration_report(ens, B, T, p["u"], ctx.trials, ctx.seed, ctx.threads,
                                        constants_file=ctx.constants)
    return r, r["holds"], None


def cmd_scaling(p, ctx):
    f = montecarlo.scaling_fit(p["Ks"], trials=ctx.trials, seed=ctx.seed, threads=ctx.threads)
    return f.to_dict(), f.prefers_klogk, None


def cmd_tightness(p, ctx):
    ok, r = montecarlo.tightness_check(p["K"], p["m"], ctx.trials, ctx.seed, ctx.threads)
    return r, ok, None


def cmd_jl(p, ctx):
    if p["mode"] == "probe":
        pts = np.random.default_rng(p["points_seed"]).standard_normal((p["points"], p["dim"]))
        r = montecarlo.jl_probe(pts, law_from(p), p["eps"], p["delta"], ctx.trials, ctx.seed,
                                ctx.threads, m=p["m"], constants_file=ctx.constants)
    elif p["mode"] == "optimality":
        r = montecarlo.jl_optimality_probe(p["p_sparse"], p["m"], ctx.trials, ctx.seed, threads=ctx.threads)
    else:
        raise UsageError("mode must be probe or optimality")
    return r, r["holds"], None


def cmd_sketch(p, ctx):
    law = law_from(p)
    if p["B"] or p["y"]:
        if not (p["B"] and p["y"]):
            raise UsageError("B and y must be given together")
        prob = sketch.load_problem(p["B"], p["y"], p["constraint"], law)
    else:
        rng = np.random.default_rng(p["instance_seed"])
        B = rng.standard_normal((p["n"], p["d"]))
        y = B @ rng.standard_normal(p["d"]) + rng.standard_normal(p["n"])
        prob = sketch.SketchProblem(B, y, sketch.Constraint.parse(p["constraint"]), law)
    prob.m = p["m"] or sketch.sketch_dimension_for(prob, p["delta"], constants_file=ctx.constants)
    xs, fs = sketch.solve_original(prob)
    ds, lemma_ok = [], True
    for k in range(ctx.trials):
        _, _, cert = sketch.solve_sketched(prob, seed=int(np.random.SeedSequence(ctx.seed, spawn_key=(k,))
                                                          .generate_state(1)[0]), x_star=xs, f_star=fs)
        ds.append(cert.delta_achieved)
        lemma_ok &= cert.lemma_holds() or not cert.certified
    ds = np.array(ds)
    frac = float(np.mean(ds <= p["delta"]))
    r = {"n": prob.n, "d": prob.d, "m": prob.m, "constraint": str(prob.constraint), "f_star": fs,
         "seeds": ctx.trials, "delta_target": p["delta"], "success_fraction": frac,
         "median_delta": float(np.median(ds)), "max_delta": float(ds.max()),
         "lemma_certificate_holds": bool(lemma_ok), "certified": prob.constraint.kind == "unconstrained"}
    return r, bool(lemma_ok and frac >= 0.9), None


def cmd_nsp(p, ctx):
    mode = p["mode"]
    if mode == "rip":
        if p["matrix"]:
            A = nullspace.read_01_csv(p["matrix"])
            rep = nullspace.projected_rip(A, p["p"], p["s"])
            out = rep.to_dict()
            if rep.delta_achieved < 0.5:
                out["rnsp"] = nullspace.rnsp_certificate(rep, p["rho"])
                return out, out["rnsp"]["holds"], None
            return out, False, None
        r = nullspace.nsp_trials(p["n"], p["s"], p["p"], p["rho"], ctx.trials, ctx.seed, p["m"],
                                 threads=ctx.threads, constants_file=ctx.constants)
        return r, r["holds"], None
    if mode == "probe":
        if p["m"] is None:
            raise UsageError("mode=probe needs m")
        r = nullspace.failure_probe(p["m"], p["p"], ctx.trials, ctx.seed, ctx.threads)
        return r, r["holds"], None
    raise UsageError("mode must be rip or probe")


def cmd_binom(p, ctx):
    m, pr, k = p["m"], p["p"], p["k"]
    bound = inequalities.binom_tail_lower(m, pr, k)
    exact = inequalities.binom_tail_exact(m, pr, k - 1)
    r = {"m": m, "p": pr, "k": k, "kl": inequalities.kl_bernoulli(k / m, pr), "bound": bound,
         "exact_tail": exact, "holds": bool(exact >= bound)}
    return r, r["holds"], None


def cmd_appendixc(p, ctx):
    r = inequalities.appendix_c_check(p["grid"])
    return r, r["holds"], None


HANDLERS = {"psi": cmd_psi, "width": cmd_width, "tail": cmd_tail, "hw": cmd_hw, "concentrate": cmd_concentrate,
            "scaling": cmd_scaling, "tightness": cmd_tightness, "jl": cmd_jl, "sketch": cmd_sketch,
            "nsp": cmd_nsp, "binom": cmd_binom, "appendixc": cmd_appendixc}


# ---------------------------------------------------------------------------
# driver


class Context:
    def __init__(self, seed, trials, threads, constants_path):
        self.seed, self.trials, self.threads, self.constants = seed, trials, threads, constants_path


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def _flat_csv(result: dict) -> str:
    """Fallback CSV: two columns, key and value, nested keys joined by '.'."""
    rows = []

    def walk(prefix, v):
        if isinstance(v, dict):
            for k in sorted(v):
                walk(f"{prefix}.{k}" if prefix else k, v[k])
        elif isinstance(v, list):
            rows.append((prefix, json.dumps(v)))
        else:
            rows.append((prefix, v))

    walk("", result)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    w.writerows(rows)
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="subgauss", description=__doc__.split("\n\n")[0] if __doc__ else None)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("params", nargs="*", help="key=value parameters")
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ap.add_argument("--trials", type=int, default=None)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default=None)
    ap.add_argument("--format", choices=("json", "csv"), default="json")
    ap.add_argument("--constants", default=None)
    ap.add_argument("--config", default=None, help="file of key=value lines; command-line values win")
    ap.add_argument("--no-timestamp", action="store_true")
    return ap


def run(argv=None) -> tuple[int, str]:
    ap = build_parser()
    try:
        args = ap.parse_intermixed_args(argv)
    except SystemExit as e:
        return (EXIT_OK if e.code == 0 else EXIT_USAGE), ""
    try:
        items = (read_config(args.config) if args.config else []) + list(args.params)
        params = parse_params(args.command, items)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        trials = DEFAULT_TRIALS[args.command] if args.trials is None else args.trials
        if trials < 0:
            raise UsageError("--trials must be >= 0")
        if args.constants:
            constants.load(args.constants)  # fail early on a bad file
        ctx = Context(args.seed, trials, args.threads, args.constants)
        result, passed, table = HANDLERS[args.command](params, ctx)
    except (UsageError, SubGaussError, OSError) as e:
        print(f"subgauss {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE, ""
    if args.format == "csv":
        text = table if table is not None else _flat_csv(_jsonable(result))
    else:
        doc = {"command": args.command, "params": params, "seed": args.seed, "trials": trials,
               "result": result, "passed": bool(passed)}
        if not args.no_timestamp:
            doc["timestamp"] = datetime.now(timezone.utc).isoformat()
        text = json.dumps(_jsonable(doc), sort_keys=True, indent=1) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return (EXIT_OK if passed else EXIT_CHECK), text


def main(argv=None) -> int:
    return run(argv)[0]


if __name__ == "__main__":
    sys.exit(main())
