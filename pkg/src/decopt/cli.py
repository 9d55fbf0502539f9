"""Command-line entry point: ``decopt run|compare|validate|bound``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import runner
from .algorithms import dmbfgs_stepsize_bound, ndcg_stepsize_bound

EXIT_OK = 0
EXIT_DIVERGENCE = 2
EXIT_CONFIG = 3
EXIT_IO = 4


def _load(path: str) -> runner.ExperimentConfig:
    return runner.load_config_file(path)


def _print_result(res: runner.RunResult) -> None:
    last = res.trace.last
    print(f"{res.label}: {res.termination} after {res.iterations} iterations (alpha={res.alpha:.6g})")
    print(f"  sigma={res.sigma:.6g} |E|={res.edges} L={res.L:.6g} mu={res.mu:.6g}")
    for key in ("optimality_error", "relative_error", "consensus_error", "comm_volume"):
        if last[key] is not None:
            print(f"  {key}={last[key]:.6g}" if isinstance(last[key], float) else f"  {key}={last[key]}")
    if res.verification:
        print("  verification:")
        for name, rep in res.verification.items():
            flag = "PASS" if rep.get("passed") else "FAIL"
            extra = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in rep.items() if k != "passed")
            print(f"    {flag} {name} {extra}")
    if res.output_path:
        print(f"  trace written to {res.output_path}")


def cmd_run(args) -> int:
    cfg = _load(args.config)
    res = runner.run(cfg)
    _print_result(res)
    return EXIT_DIVERGENCE if res.termination == "divergence" else EXIT_OK


def cmd_compare(args) -> int:
    cfgs = [_load(p) for p in args.configs]
    table = runner.compare(cfgs)
    print(table.format())
    return EXIT_DIVERGENCE if any(r.termination == "divergence" for r in table.rows) else EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args.config)
    print(f"{args.config}: ok ({cfg.label}, {cfg.problem.kind}, n={cfg.network.n})")
    return EXIT_OK


def cmd_bound(args) -> int:
    if args.algo == "ndcg":
        if args.n is None:
            raise runner.ConfigError("--n", "required for ndcg")
        alpha = ndcg_stepsize_bound(args.L, args.sigma, args.n)
    else:
        if args.mu is None:
            raise runner.ConfigError("--mu", "required for dmbfgs")
        alpha = dmbfgs_stepsize_bound(args.L, args.mu, args.sigma, args.l, args.u)
    if args.json:
        print(json.dumps({"algorithm": args.algo, "alpha_max": alpha}))
    else:
        print(f"{alpha:.12g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="decopt", description="Decentralized optimization experiments.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment config")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run several configs on a shared problem")
    p.add_argument("configs", nargs="+")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bound", help="print the theoretical stepsize bound")
    p.add_argument("algo", choices=("ndcg", "dmbfgs"))
    p.add_argument("--L", type=float, required=True)
    p.add_argument("--mu", type=float)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--l", type=float, default=1e-4)
    p.add_argument("--u", type=float, default=1e4)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bound)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except runner.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # bad numeric arguments to bound, bad data in a problem file
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
