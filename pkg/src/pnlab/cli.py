"""Command-line frontend: ``pnlab <subcommand> [options] [inputs]``.

Every subcommand reads matrices as {"n": n, "entries": [...]} JSON from a
file argument or stdin and writes a versioned JSON report. Exit codes: 0 ok,
1 input error, 2 numerical failure, 3 inconclusive.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import report as rp
from .core import (distance, full_iwasawa, geodesic, laplace_beltrami_oracle, partial_iwasawa,
                   unit_det)
from .eisenstein import (cuspidality_defect, eisenstein_field, eisenstein_series,
                         fourier_coefficient, grenier_operator, k_bessel_rank1,
                         stable_chain_check)
from .errors import InputError, PnlabError
from .operators import OperatorSpec, apply_Dk, eigenvalue_lambda, laplacian_paper
from .parallel import set_threads
from .reduction import (grenier_membership, grenier_reduce, is_minkowski_reduced,
                        minkowski_reduce, sandwich_probe)
from .selberg import as_param, power_function, spherical_function
from .tori import (GammaStarElem, HgPoint, gamma_star_action, hg_equivalent,
                   polarizability_check, tori_isomorphic)
from .volume import gamma_index, lambda_product, siegel_volume, volume_mc


@dataclass
class RunConfig:
    seed: int = 0
    threads: int | None = None
    tolerances: dict = field(default_factory=dict)
    truncation: dict = field(default_factory=lambda: {"H": 50})
    output: str | None = None
    csv: str | None = None

    @classmethod
    def load(cls, path: str | None) -> "RunConfig":
        if not path:
            return cls()
        raw = rp.load_json(path)
        if not isinstance(raw, dict):
            raise InputError("config must be a JSON object")
        cfg = cls()
        cfg.seed = int(raw.get("seed", cfg.seed))
        th = raw.get("threads", "auto")
        cfg.threads = None if th in (None, "auto") else int(th)
        cfg.tolerances = dict(raw.get("tolerances", {}))
        cfg.truncation = {**cfg.truncation, **raw.get("truncation", {})}
        out = raw.get("output", {})
        cfg.output = out.get("json")
        cfg.csv = out.get("csv")
        return cfg

    def tol(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))


def _resolve(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.output is not None:
        cfg.output = args.output
    if args.csv is not None:
        cfg.csv = args.csv
    # --threads wins, then PNLAB_THREADS (read by the pool), then the config file
    if args.threads is not None:
        cfg.threads = args.threads
    elif os.environ.get("PNLAB_THREADS"):
        cfg.threads = None
    if cfg.threads is not None and cfg.threads < 1:
        raise InputError("threads must be positive")
    set_threads(cfg.threads)
    return cfg


def _matrix(path: str | None) -> np.ndarray:
    return rp.matrix_from_json(rp.load_json(path))


def _s(args) -> list[complex]:
    if args.s is None:
        raise InputError("--s is required")
    return rp.parse_complex_list(args.s, "s")


def _H(args, cfg: RunConfig) -> int:
    H = args.H if args.H is not None else int(cfg.truncation.get("H", 50))
    if H < 1:
        raise InputError("H must be positive")
    return H


def _cplx(z: complex) -> dict:
    return {"re": float(z.real), "im": float(z.imag)}


def _field(args, n: int, H: int):
    """The test function for operator subcommands."""
    s = _s(args)
    if args.field == "power":
        return (lambda Y: power_function(s, Y)), {"field": "power", "s": s}
    if args.field == "eisenstein":
        if len(s) != n - 1:
            raise InputError(f"eisenstein field needs {n - 1} parameters")
        return eisenstein_field(s, H), {"field": "eisenstein", "s": s, "H": H}
    raise InputError(f"unknown field {args.field!r}")


# -- subcommands ---------------------------------------------------------------


def cmd_iwasawa(args, cfg):
    Y = _matrix(args.input)
    p = partial_iwasawa(Y)
    f = full_iwasawa(Y)
    res = {
        "partial": {"v": p.v, "x": p.x, "W": p.W},
        "full": {"y": f.y, "ys": f.ys, "N": f.N},
        "reconstruction_error": float(np.max(np.abs(p.matrix() - Y))),
    }
    return rp.make_report("iwasawa", "partial and full Iwasawa coordinates",
                          {"Y": Y}, res, tolerance={"det_one": 1e-8})


def cmd_geodesic(args, cfg):
    Y = _matrix(args.input)
    res = {"distance_from_identity": distance(Y), "point": geodesic(Y, args.t)}
    if args.to:
        res["distance"] = distance(Y, _matrix(args.to))
    return rp.make_report("geodesic", "geodesic through the identity and Riemannian distance",
                          {"Y": Y, "t": args.t}, res)


def cmd_reduce(args, cfg):
    Y = _matrix(args.input)
    if args.domain == "minkowski":
        r = minkowski_reduce(Y)
        check = is_minkowski_reduced(r.R)
    else:
        r = grenier_reduce(Y, max_iter=args.max_iter)
        check = grenier_membership(r.R)
    res = r.to_json(Y)
    res["membership"] = {"ok": check.ok, "condition": check.condition}
    return rp.make_report("reduce", f"{args.domain} reduction", {"domain": args.domain}, res,
                          tolerance={"relative": 1e-10})


def cmd_power(args, cfg):
    Y = _matrix(args.input)
    s = _s(args)
    return rp.make_report("power", "Selberg power function", {"s": s, "Y": Y},
                          {"value": _cplx(power_function(s, Y))})


def cmd_spherical(args, cfg):
    Y = _matrix(args.input)
    s = _s(args)
    r = spherical_function(s, Y, samples=args.samples, seed=cfg.seed, threads=cfg.threads)
    return rp.make_report("spherical", "spherical function (Monte Carlo over O(n))",
                          {"s": s, "Y": Y, "samples": args.samples, "seed": cfg.seed},
                          {"value": _cplx(r.estimate), "stderr": r.stderr},
                          tolerance={"stderr": r.stderr})


def cmd_dk(args, cfg):
    Y = _matrix(args.input)
    f, fp = _field(args, len(Y), _H(args, cfg))
    spec = OperatorSpec(h=args.h, tol=cfg.tol("fd", 1e-4))
    val = apply_Dk(f, Y, args.k, spec)
    f0 = complex(f(Y))
    return rp.make_report("dk", "trace operator tr((Y d/dY)^k)",
                          {"k": args.k, "h": args.h, **fp, "Y": Y},
                          {"value": _cplx(val), "ratio": _cplx(val / f0) if f0 else None},
                          tolerance={"richardson": spec.tol})


def cmd_laplacian(args, cfg):
    Y = unit_det(_matrix(args.input))
    H = _H(args, cfg)
    f, fp = _field(args, len(Y), H)
    p = partial_iwasawa(Y)
    tol = cfg.tol("fd", 1e-4)
    if args.mode == "oracle":
        val = laplace_beltrami_oracle(f, p)
    else:
        val = laplacian_paper(f, p, OperatorSpec(h=args.h, tol=tol), args.mode)
    f0 = complex(f(Y))
    res = {"value": _cplx(val), "ratio": _cplx(val / f0)}
    if args.field == "eisenstein":
        res["lambda"] = _cplx(eigenvalue_lambda(fp["s"]))
    return rp.make_report("laplacian", f"invariant Laplacian ({args.mode})",
                          {"mode": args.mode, **fp, "Y": Y}, res, tolerance={"richardson": tol})


def cmd_lambda(args, cfg):
    s = _s(args)
    return rp.make_report("lambda", "Laplacian eigenvalue of the Eisenstein series",
                          {"s": s}, {"n": as_param(s).n, "value": _cplx(eigenvalue_lambda(s))})


def cmd_eisenstein(args, cfg):
    Y = _matrix(args.input)
    s = _s(args)
    H = _H(args, cfg)
    ev = eisenstein_series(s, Y, H, tail=args.tail, threads=cfg.threads)
    res = ev.to_json()
    return rp.make_report("eisenstein", "truncated Selberg Eisenstein series",
                          {"s": s, "Y": Y, "H": H, "tail": args.tail}, res,
                          tolerance={"tail_estimate": ev.tail_estimate})


def cmd_fourier(args, cfg):
    W = _matrix(args.input)
    n = len(W) + 1
    H = _H(args, cfg)
    s = _s(args)
    if len(s) != n - 1:
        raise InputError(f"expected {n - 1} parameters")
    N = rp.parse_json_arg(args.N, "N")
    tol = cfg.tolerances.get("quadrature")
    val = fourier_coefficient(eisenstein_field(s, H, cfg.threads), N, args.v, W, args.M, tol)
    return rp.make_report("fourier", "Fourier coefficient of the Eisenstein series in x",
                          {"s": s, "H": H, "N": N, "v": args.v, "W": W, "M": args.M},
                          {"value": _cplx(val)}, tolerance={"quadrature": tol})


def cmd_kbessel(args, cfg):
    s = rp.parse_complex_list(args.s, "s")
    if len(s) != 1:
        raise InputError("kbessel takes a single s")
    rtol = cfg.tol("kbessel", 1e-13)
    val = k_bessel_rank1(s[0], args.a, args.b, rtol=rtol)
    return rp.make_report("kbessel", "rank-one K-Bessel function",
                          {"s": s[0], "a": args.a, "b": args.b}, {"value": _cplx(val)},
                          tolerance={"relative": rtol})


def cmd_grenier_limit(args, cfg):
    W = _matrix(args.input)
    n = len(W) + 1
    s = _s(args)
    if len(s) != n - 1:
        raise InputError(f"expected {n - 1} parameters")
    H = _H(args, cfg)
    sched = rp.parse_json_arg(args.schedule, "schedule")
    x = None if args.x is None else rp.parse_json_arg(args.x, "x")
    tol = cfg.tol("limit", 1e-2)
    r = grenier_operator(eisenstein_field(s, H, cfg.threads), s, W, sched, x, tol)
    series = ("v", "re", "im"), [(v, z.real, z.imag) for v, z in zip(r.schedule, r.scaled)]
    return rp.make_report("grenier-limit", "scaled v -> infinity limit of the Eisenstein series",
                          {"s": s, "H": H, "W": W, "schedule": sched, "x": x}, r.to_json(),
                          tolerance={"relative": tol}), series


def cmd_stable_chain(args, cfg):
    s = _s(args)
    n_max = len(s) + 1
    H = _H(args, cfg)
    probes = None
    if args.input:
        probes = {n_max: [_matrix(args.input)]}
    tol = cfg.tol("chain", 1e-2)
    r = stable_chain_check(s, n_max, probes, H=H, v=args.v, tol=tol, threads=cfg.threads)
    series = (("n", "v", "rel_error"), [(lv["n"], lv["v"], lv["rel_error"]) for lv in r.levels])
    return rp.make_report("stable-chain", "stable tower of Eisenstein series",
                          {"s": s, "H": H, "v": args.v}, r.to_json(),
                          tolerance={"relative": tol}), series


def cmd_cusp_defect(args, cfg):
    Y = _matrix(args.input)
    s = _s(args)
    H = _H(args, cfg)
    tol = cfg.tolerances.get("quadrature")
    val = cuspidality_defect(eisenstein_field(s, H, cfg.threads), args.j, Y, args.M, tol)
    return rp.make_report("cusp-defect", "block integral of the Eisenstein series",
                          {"s": s, "H": H, "j": args.j, "M": args.M, "Y": Y},
                          {"value": _cplx(val)}, tolerance={"quadrature": tol})


def cmd_volume(args, cfg):
    n = args.n
    if args.mode == "formula":
        res = {"value": siegel_volume(n), "group": "SL(n,Z)", "index": gamma_index(n),
               "gamma_n_value": siegel_volume(n) / gamma_index(n),
               "lambda_product": lambda_product(n)}
        return rp.make_report("volume", "volume of SL(n,Z) quotient (closed form)",
                              {"n": n, "mode": "formula"}, res, tolerance={"absolute": 1e-12})
    if n not in (2, 3):
        raise InputError("Monte Carlo volume supports n in {2, 3}")
    r = volume_mc(n, args.samples, cfg.seed, cfg.threads, cfg.tolerances.get("volume_rel_stderr"))
    return rp.make_report("volume", "invariant volume of the Grenier domain (Monte Carlo)",
                          {"n": n, "mode": "mc", "samples": args.samples, "seed": cfg.seed},
                          r.to_json(), tolerance={"stderr": r.stderr})


def cmd_tori(args, cfg):
    if args.action == "polarize":
        Q = _matrix(args.inputs[0] if args.inputs else None)
        return rp.make_report("tori polarize", "principal polarizability", {"Q": Q},
                              polarizability_check(Q).to_json())
    if len(args.inputs) != 2:
        raise InputError("tori isom needs two matrix files")
    Y1, Y2 = (_matrix(p) for p in args.inputs)
    A = tori_isomorphic(Y1, Y2, search_bound=args.search_bound)
    res = {"isomorphic": A is not None, "witness": None if A is None else A}
    return rp.make_report("tori isom", "real torus isomorphism",
                          {"Y1": Y1, "Y2": Y2, "search_bound": args.search_bound}, res)


def _hg_point(path: str | None) -> HgPoint:
    obj = rp.load_json(path)
    if not isinstance(obj, dict) or "im" not in obj:
        raise InputError('HgPoint JSON needs "two_re" (or "re") and "im"')
    im = rp.matrix_from_json(obj["im"])
    if "two_re" in obj:
        return HgPoint.make(rp.matrix_from_json(obj["two_re"]), im)
    if "re" in obj:
        return HgPoint.from_omega(rp.matrix_from_json(obj["re"]), im)
    raise InputError('HgPoint JSON needs "two_re" or "re"')


def cmd_hg(args, cfg):
    if args.action == "act":
        if not args.gamma:
            raise InputError("hg act needs --gamma")
        om = _hg_point(args.inputs[0] if args.inputs else None)
        g = rp.load_json(args.gamma)
        gam = GammaStarElem.make(rp.matrix_from_json(g["A"]), rp.matrix_from_json(g["B"]))
        out = gamma_star_action(gam, om)
        return rp.make_report("hg act", "parabolic action on normal forms",
                              {"omega": om.to_json(), "A": gam.A, "B": gam.B}, out.to_json())
    if len(args.inputs) != 2:
        raise InputError("hg equiv needs two HgPoint files")
    om1, om2 = (_hg_point(p) for p in args.inputs)
    A = hg_equivalent(om1, om2, search_bound=args.search_bound)
    return rp.make_report("hg equiv", "equivalence of normal forms",
                          {"omega1": om1.to_json(), "omega2": om2.to_json()},
                          {"equivalent": A is not None, "witness": A})


def cmd_sandwich(args, cfg):
    r = sandwich_probe(args.N, args.n, seed=cfg.seed, threads=cfg.threads)
    return rp.make_report("sandwich", "Siegel set sandwich of the Grenier domain",
                          {"N": args.N, "n": args.n, "seed": cfg.seed}, r.to_json())


# -- parser ------------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=None, help="RNG seed (overrides config)")
    g.add_argument("--threads", type=int, default=None, help="worker threads")
    g.add_argument("--output", "-o", default=None, help="JSON report path (default stdout)")
    g.add_argument("--csv", default=None, help="also write series data as CSV")
    g.add_argument("--config", default=None, help="RunConfig JSON file")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="pnlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, matrix=True):
        sp = sub.add_parser(name, parents=[common], help=help_)
        if matrix:
            sp.add_argument("input", nargs="?", default=None, help="matrix JSON (default stdin)")
        sp.set_defaults(fn=fn)
        return sp

    def with_s(sp, required=True):
        sp.add_argument("--s", required=required, help='JSON list, e.g. "[2.5]" or "[[1,0.5]]"')
        return sp

    def with_H(sp):
        sp.add_argument("--H", type=int, default=None, help="truncation height")
        return sp

    add("iwasawa", cmd_iwasawa, "partial and full Iwasawa coordinates")
    sp = add("geodesic", cmd_geodesic, "geodesic from I and distance")
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--to", default=None, help="second matrix for the distance")
    sp = add("reduce", cmd_reduce, "reduce into a fundamental domain")
    sp.add_argument("--domain", choices=["minkowski", "grenier"], required=True)
    sp.add_argument("--max-iter", type=int, default=10_000)
    with_s(add("power", cmd_power, "Selberg power function"))
    sp = with_s(add("spherical", cmd_spherical, "spherical function by Monte Carlo"))
    sp.add_argument("--samples", type=int, default=10_000)
    for name, fn, help_ in (("dk", cmd_dk, "trace operator tr((Y d/dY)^k)"),
                            ("laplacian", cmd_laplacian, "invariant Laplacian")):
        sp = with_H(with_s(add(name, fn, help_)))
        sp.add_argument("--field", choices=["power", "eisenstein"], default="power")
        sp.add_argument("--h", type=float, default=None, help="relative FD step")
        if name == "dk":
            sp.add_argument("--k", type=int, default=1)
        else:
            sp.add_argument("--mode", choices=["paper", "oracle", "verbatim"], default="paper")
    with_s(add("lambda", cmd_lambda, "Eisenstein Laplacian eigenvalue", matrix=False))
    sp = with_H(with_s(add("eisenstein", cmd_eisenstein, "truncated Eisenstein series")))
    sp.add_argument("--tail", choices=["none", "heuristic"], default="none")
    sp = with_H(with_s(add("fourier", cmd_fourier, "Fourier coefficient in x (input is W)")))
    sp.add_argument("--N", required=True, help="JSON integer vector")
    sp.add_argument("--v", type=float, required=True)
    sp.add_argument("--M", type=int, default=16)
    sp = with_s(add("kbessel", cmd_kbessel, "rank-one K-Bessel function", matrix=False))
    sp.add_argument("--a", type=float, required=True)
    sp.add_argument("--b", type=float, required=True)
    sp = with_H(with_s(add("grenier-limit", cmd_grenier_limit,
                           "scaled limit v -> infinity (input is W); CSV columns v,re,im")))
    sp.add_argument("--schedule", default="[10, 100, 1000]", help="JSON list of v values")
    sp.add_argument("--x", default=None, help="JSON x probe")
    sp = with_H(with_s(add("stable-chain", cmd_stable_chain,
                           "stable tower check (optional W probe); CSV columns n,v,rel_error")))
    sp.add_argument("--v", type=float, default=1e3)
    sp = with_H(with_s(add("cusp-defect", cmd_cusp_defect, "block integral over (R/Z)^{j x (n-j)}")))
    sp.add_argument("--j", type=int, default=1)
    sp.add_argument("--M", type=int, default=16)
    sp = add("volume", cmd_volume, "volume: closed form or Monte Carlo", matrix=False)
    sp.add_argument("--mode", choices=["formula", "mc"], default="formula")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--samples", type=int, default=10**6)
    for name, fn, acts in (("tori", cmd_tori, ["polarize", "isom"]),
                           ("hg", cmd_hg, ["act", "equiv"])):
        sp = sub.add_parser(name, parents=[common], help=f"{name} {{{','.join(acts)}}}")
        sp.add_argument("action", choices=acts)
        sp.add_argument("inputs", nargs="*")
        sp.add_argument("--search-bound", type=int, default=10**6)
        if name == "hg":
            sp.add_argument("--gamma", default=None, help='JSON file {"A": ..., "B": ...}')
        sp.set_defaults(fn=fn)
    sp = add("sandwich", cmd_sandwich, "Siegel set sandwich probe", matrix=False)
    sp.add_argument("--N", type=int, default=10_000)
    sp.add_argument("--n", type=int, default=2)
    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        cfg = _resolve(args)
        out = args.fn(args, cfg)
        series = None
        if isinstance(out, tuple):
            out, series = out
        rp.write_text(rp.dumps(out), cfg.output)
        if cfg.csv:
            if series is None:
                raise InputError(f"{args.command} has no series output")
            rp.write_text(rp.csv_text(list(series[0]), series[1]), cfg.csv)
        return 0
    except PnlabError as exc:
        print(f"pnlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, KeyError, TypeError) as exc:
        print(f"pnlab: input error: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"pnlab: numerical error: {exc}", file=sys.stderr)
        return 2
    finally:
        set_threads(None)


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
