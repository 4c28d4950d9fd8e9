"""Command-line entry point: ``delaystab <subcommand> ...``.

Subcommands: parse, sweep, stability, verify-lemma, bounds, coeffs.
Sweep and stability read a YAML config (``--config``) and let flags
override individual keys.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from . import bounds as B
from .dataset import LibsvmParseError, load_libsvm, make_spectrum, serialize_libsvm
from .genfun import pi_coeffs, weighted_partial_sums
from .harness import (
    LEMMA_COLUMNS, ExperimentConfig, coefficient_rows, emit_results, estimate_avg_stability,
    run_gen_sweep, to_csv, verify_lemma_grid,
)


def _int_list(text: str) -> list[int]:
    """'1,4,8' or '0-32' (inclusive) or a mix: '0-3,8'."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _spectrum(text: str, dim: int | None):
    """'uniform:a_min:a_max', 'geometric:a_max:ratio' or a comma list of eigenvalues."""
    kind, _, rest = text.partition(":")
    if kind in ("uniform", "geometric"):
        if dim is None:
            raise SystemExit("--dim is required for a generated spectrum")
        return make_spectrum([kind, *map(float, rest.split(":"))], dim)
    vals = _float_list(text)
    return make_spectrum(vals, len(vals))


def _experiment_config(args, mode: str) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    over = {"mode": mode}
    if args.seed is not None:
        over["seeds"] = [args.seed]
    if args.seeds is not None:
        over["seeds"] = _int_list(args.seeds)
    if args.delays is not None:
        over["delays"] = _int_list(args.delays)
    if args.eta is not None:
        over["eta"] = args.eta
    if args.iters is not None:
        over["T"] = args.iters
    if args.out is not None:
        over["out"] = args.out
    if args.format is not None:
        over["format"] = args.format
    if args.dataset is not None:
        over["dataset"] = args.dataset
    if getattr(args, "replacements", None) is not None:
        over["num_replacements"] = args.replacements
    return replace(cfg, **over)


def cmd_parse(args) -> int:
    try:
        ds = load_libsvm(args.path, n_features=args.n_features)
    except LibsvmParseError as exc:
        print(f"{args.path}: {exc}", file=sys.stderr)
        return 1
    labels = sorted(set(ds.y.tolist()))
    info = {"path": args.path, "n": ds.n, "d": ds.d, "nnz": int(ds.X.nnz),
            "labels": labels if len(labels) <= 10 else f"{len(labels)} distinct"}
    print(json.dumps(info))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(serialize_libsvm(ds))
    return 0


def _run_experiment(args, mode: str) -> int:
    cfg = _experiment_config(args, mode)
    if mode == "gen-sweep":
        result = run_gen_sweep(cfg)
    else:
        result = estimate_avg_stability(cfg)
    for p in emit_results(result):
        print(p)
    print(f"config_digest={cfg.digest}", file=sys.stderr)
    if mode == "gen-sweep":
        for k, v in result.summary["final_gen_error_mean"].items():
            print(f"delay={k} final_gen_error_mean={v:.6g}", file=sys.stderr)
        for f in result.summary["diverged"]:
            print(f"diverged: {f}", file=sys.stderr)
    else:
        for k, v in result.summary["by_delay"].items():
            prop = v["bound_prop1"]["total"] if v["bound_prop1"] else float("nan")
            print(f"delay={k} estimate={v['estimate']:.6g} stderr={v['stderr']:.3g} "
                  f"bound_prop1={prop:.6g} bound_thm={v['bound_thm']['total']:.6g}", file=sys.stderr)
    return 0


def cmd_verify_lemma(args) -> int:
    spec = _spectrum(args.spectrum, args.dim)
    if args.etas:
        grid, relative = _float_list(args.etas), False
    else:
        grid, relative = _float_list(args.eta_fractions), True
    rows, ok = verify_lemma_grid(spec, grid, _int_list(args.taus), args.iters, relative=relative)
    text = to_csv(LEMMA_COLUMNS, rows) if args.format == "csv" else json.dumps(rows, indent=1) + "\n"
    _write(text, args.out)
    print(f"{sum(r['status'] == 'pass' for r in rows)} pass, "
          f"{sum(r['status'] == 'fail' for r in rows)} fail, "
          f"{sum(r['status'] == 'not applicable' for r in rows)} not applicable", file=sys.stderr)
    return 0 if ok else 1


def cmd_bounds(args) -> int:
    inp = B.BoundInputs(n=args.n, T=args.iters, tau=args.tau, eta=args.eta, mu=args.mu, lam=args.lam,
                        r=args.r, sigma=args.sigma, rho=args.rho, w0_norm=args.w0_norm)
    kind = args.kind
    if kind == "auto":
        kind = "corollary" if args.rho is not None else ("thm2" if args.lam > 0 else "thm1")
    if kind == "thm1":
        rep = B.thm1_bound(inp)
    elif kind == "thm2":
        rep = B.thm2_bound(inp)
    elif kind == "corollary":
        rep = B.corollary_random_bound(inp, relaxed=args.relaxed)
    else:
        if not args.spectrum:
            raise SystemExit("prop1 needs --spectrum to compute coefficient sums")
        tab = pi_coeffs(_spectrum(args.spectrum, args.dim), args.eta, args.tau, args.iters)
        S1, S2 = weighted_partial_sums(tab, args.iters)
        rep = B.prop1_bound(inp, S1, S2, float(tab.weighted_norms[args.iters]))
    _write(rep.to_json() + "\n", args.out)
    return 0


def cmd_coeffs(args) -> int:
    rows = coefficient_rows(_spectrum(args.spectrum, args.dim), args.eta, args.tau, args.iters)
    _write(to_csv(list(rows[0]), rows), args.out)
    return 0


def _write(text: str, path: str | None):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="delaystab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("parse", help="parse a LIBSVM file and report its shape")
    q.add_argument("path")
    q.add_argument("--n-features", type=int)
    q.add_argument("--out", help="write the normalised file here")
    q.set_defaults(func=cmd_parse)

    for name, mode in (("sweep", "gen-sweep"), ("stability", "stability")):
        q = sub.add_parser(name, help=f"run a {mode} experiment")
        q.add_argument("--config")
        q.add_argument("--seed", type=int)
        q.add_argument("--seeds", help="comma list, overrides --seed")
        q.add_argument("--delays")
        q.add_argument("--eta", type=float)
        q.add_argument("--iters", type=int)
        q.add_argument("--out")
        q.add_argument("--format", choices=("csv", "json"))
        q.add_argument("--dataset", help="LIBSVM file (otherwise synthetic)")
        if mode == "stability":
            q.add_argument("--replacements", type=int)
        q.set_defaults(func=lambda a, m=mode: _run_experiment(a, m))

    q = sub.add_parser("verify-lemma", help="check coefficient bounds over a (tau, eta) grid")
    q.add_argument("--spectrum", default="uniform:0.01:1")
    q.add_argument("--dim", type=int, default=20)
    q.add_argument("--taus", default="0-32")
    q.add_argument("--eta-fractions", default="1,0.5,0.1",
                   help="multiples of 1/(20 mu (tau+1))")
    q.add_argument("--etas", help="absolute step sizes (overrides --eta-fractions)")
    q.add_argument("--iters", type=int, help="horizon (default 10*ceil(t0)+1000 per tau)")
    q.add_argument("--out")
    q.add_argument("--format", choices=("csv", "json"), default="csv")
    q.set_defaults(func=cmd_verify_lemma)

    q = sub.add_parser("bounds", help="evaluate a closed-form bound as JSON")
    q.add_argument("--kind", choices=("auto", "prop1", "thm1", "thm2", "corollary"), default="auto")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--iters", type=int, required=True)
    q.add_argument("--tau", type=int, required=True)
    q.add_argument("--eta", type=float, required=True)
    q.add_argument("--mu", type=float, required=True)
    q.add_argument("--lam", type=float, default=0.0)
    q.add_argument("--r", type=float, default=0.0)
    q.add_argument("--sigma", type=float, default=0.0)
    q.add_argument("--rho", type=float)
    q.add_argument("--w0-norm", type=float, default=0.0)
    q.add_argument("--relaxed", action="store_true")
    q.add_argument("--spectrum")
    q.add_argument("--dim", type=int)
    q.add_argument("--out")
    q.set_defaults(func=cmd_bounds)

    q = sub.add_parser("coeffs", help="dump the coefficient table as CSV")
    q.add_argument("--spectrum", required=True)
    q.add_argument("--dim", type=int)
    q.add_argument("--eta", type=float, required=True)
    q.add_argument("--tau", type=int, required=True)
    q.add_argument("--iters", type=int, required=True)
    q.add_argument("--out")
    q.set_defaults(func=cmd_coeffs)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
