"""Command-line entry point: ``icelicit <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerically degenerate
version space.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from ..belief import DegenerateVersionSpace
from .config import ConfigError, ExperimentConfig
from .experiments import AUDITS, Result, budgets_demo, run_experiment, run_sweep
from .report import emit_report, summarize

OUT_ENV = "ICELICIT_OUT"


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file; flags override its fields")
    common.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV} or ./icelicit-out)")
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    common.add_argument("--record-timing", action="store_true", help="fill the ms column (not reproducible)")

    p = argparse.ArgumentParser(prog="icelicit", description="Incentive-compatible elicitation experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("mpl", parents=[common], help="multiple price list search")
    m.add_argument("--search", choices=("seq", "bin"), default=None)
    m.add_argument("--grid", type=int)
    m.add_argument("--schedule")
    m.add_argument("--ce", type=float, help="fixed true certainty equivalent")
    m.add_argument("--agent", choices=("truthful", "strategic", "misreport"))
    m.add_argument("--misreport", type=float)
    m.add_argument("--eps", type=float)

    c = sub.add_parser("cover", parents=[common], help="exhaustive cover search")
    c.add_argument("--cover")
    c.add_argument("--type", type=_floats)
    c.add_argument("--misreport", type=_floats)
    c.add_argument("--eps", type=float)

    b = sub.add_parser("belief", parents=[common], help="belief elicitation")
    b.add_argument("--naive", action="store_true", help="run the per-state binary search baseline")
    b.add_argument("--n", type=int)
    b.add_argument("--eps", type=float)
    b.add_argument("--T", type=int)
    b.add_argument("--c", type=float, dest="budget_c")
    b.add_argument("--type", type=_floats)
    b.add_argument("--misreport", type=_floats)
    b.add_argument("--ground-truth", type=_floats)

    a = sub.add_parser("audit", parents=[common], help="incentive audits and worked examples")
    a.add_argument("name", choices=sorted(AUDITS))
    a.add_argument("--n", type=int)
    a.add_argument("--eps", type=float)
    a.add_argument("--T", type=int)
    a.add_argument("--type", type=_floats)
    a.add_argument("--cover")
    a.add_argument("--grid", type=int)

    d = sub.add_parser("budgets-demo", parents=[common], help="two-question convex budgets example")
    d.add_argument("--alpha", type=_floats, default=[0.3, 0.7])

    s = sub.add_parser("sweep", parents=[common], help="success rate and queries over n and eps")
    s.add_argument("--mechanism", choices=("belief", "naive"), default=None)
    s.add_argument("--n-values", type=_ints, default=[2, 3, 4])
    s.add_argument("--eps-values", type=_floats, default=[0.05])
    s.add_argument("--c", type=float, dest="budget_c")
    return p


def load_config(args) -> ExperimentConfig:
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        cfg = ExperimentConfig.from_json(text)
    else:
        cfg = ExperimentConfig()
    over = {"seed": args.seed, "trials": args.trials}
    if args.record_timing:
        over["record_timing"] = True
    for name in ("n", "eps", "T", "budget_c", "type", "misreport", "cover", "grid", "schedule", "agent"):
        if hasattr(args, name):
            over[name] = getattr(args, name)
    if getattr(args, "ground_truth", None) is not None:
        over["ground_truth"] = args.ground_truth
    cmd = args.command
    if cmd == "mpl":
        over["mechanism"] = "mpl-bin" if args.search == "bin" else "mpl-seq" if args.search else (
            cfg.mechanism if cfg.mechanism.startswith("mpl") else "mpl-seq")
        if args.ce is not None:
            over["type"] = [args.ce]
        if args.misreport is not None:
            over["misreport"] = [args.misreport]
    elif cmd == "cover":
        over["mechanism"] = "cover"
    elif cmd == "belief":
        over["mechanism"] = "naive" if args.naive else (cfg.mechanism if cfg.mechanism in ("belief", "naive") else "belief")
    elif cmd == "sweep":
        over["mechanism"] = args.mechanism or (cfg.mechanism if cfg.mechanism in ("belief", "naive") else "belief")
    if over.get("misreport") is not None and over.get("agent") is None and cmd != "mpl":
        over["agent"] = "misreport"
    try:
        return cfg.replace(**over)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _outdir(args, name: str) -> Path:
    base = args.out or Path(os.environ.get(OUT_ENV, "icelicit-out"))
    return Path(base) / name


def _print(label: str, value) -> None:
    if isinstance(value, float):
        print(f"{label} {value:.12g}")
    else:
        print(f"{label} {value}")


def _finish(args, cfg: ExperimentConfig, res: Result, name: str) -> None:
    out = _outdir(args, name)
    csv_path, json_path = emit_report(res.rows, out, cfg, res.details)
    if not args.no_figures and res.figures:
        from .figures import render

        render(res.figures, out)
    summ = summarize(res.rows, cfg.eps)
    if summ["success_rate"] is not None and name in ("mpl", "cover", "belief", "naive"):
        _print("success_rate", summ["success_rate"])
        _print("mean_queries", summ["mean_queries"])
    if summ["max_gain"] is not None and name in ("mpl", "cover", "belief", "naive"):
        _print("max_gain", summ["max_gain"])
    print(f"report {csv_path}")
    print(f"summary {json_path}")


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command in ("mpl", "cover", "belief"):
            res = run_experiment(cfg)
            name = cfg.mechanism if args.command == "belief" else args.command
            _finish(args, cfg, res, name)
        elif args.command == "audit":
            res = AUDITS[args.name](cfg)
            for k, v in res.details.items():
                if not isinstance(v, (list, dict)):
                    _print(k, v)
                elif args.name == "mpl-counterexample":
                    _print(k, " ".join(v))
            _finish(args, cfg, res, f"audit-{args.name}")
        elif args.command == "budgets-demo":
            res = budgets_demo(cfg, args.alpha)
            for k in ("truthful", "manipulation", "gain"):
                _print(k, res.details[k])
            _finish(args, cfg, res, "budgets-demo")
        elif args.command == "sweep":
            res = run_sweep(cfg, args.n_values, args.eps_values)
            for r in res.details["sweep"]:
                print(f"n={r['n']} eps={r['eps']:g} success_rate={r['success_rate']:.4g} "
                      f"mean_queries={r['mean_queries']:.4g}")
            _finish(args, cfg, res, "sweep")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DegenerateVersionSpace as exc:
        print(f"degenerate version space: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        # invalid beliefs, covers or lotteries supplied on the command line
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run_cli())
