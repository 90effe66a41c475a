"""Command line entry point: ``vtne run|compare|eval|bound``.

Exit codes: 0 on success, 2 on configuration errors, 3 on numerical integrity errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, NumericalIntegrityError
from .experiments import (
    RunConfig,
    emit_csv,
    evaluate_parameters,
    gradient_call_savings,
    load_checkpoint,
    mean_trajectory,
    read_checkpoint,
    run_vtne,
    run_warmstart_comparison,
    save_checkpoint,
    write_record_json,
)
from .oracle import cnot_upper_bound, qsd_cnot_count

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _layers(text: str) -> int | str:
    return text if text == "table1" else int(text)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON RunConfig; flags override its fields")
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--t", type=float)
    p.add_argument("--u", type=float)
    p.add_argument("--layers", type=_layers, help="integer or 'table1'")
    p.add_argument("--chi-b", type=int, nargs="+")
    p.add_argument("--chi-a", type=int, nargs="+")
    p.add_argument("--mode", choices=("warm", "direct"))
    p.add_argument("--optimizer", choices=("bfgs", "adam"))
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", type=int, help="number of seeds (0..n-1)")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--reference-energy", type=float)
    p.add_argument("--out", type=Path, help="CSV output path")
    p.add_argument("--checkpoint", type=Path, nargs="+", help="checkpoint file(s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vtne", description="Tensor-network pre-optimization of Hubbard-model circuits.")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("run", help="optimize at chi_b and evaluate at chi_a"))
    cmp_ = sub.add_parser("compare", help="cold vs warm-started Adam with exact energies")
    _common(cmp_)
    cmp_.add_argument("--steps", type=int, default=1000)
    cmp_.add_argument("--direct", action="store_true", help="also run per-seed direct-mode pre-optimization")
    _common(sub.add_parser("eval", help="re-evaluate a checkpoint at chi_a"))
    b = sub.add_parser("bound", help="CNOT-count bound table")
    b.add_argument("--chi", type=int, nargs="+", default=[2, 4, 8, 16, 32, 64])
    b.add_argument("--out", type=Path)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if getattr(args, "config", None):
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from None
        data = RunConfig.from_json(text).to_dict()
    for key in ("nx", "ny", "t", "u", "layers", "mode"):
        if getattr(args, key) is not None:
            data[key] = getattr(args, key)
    if args.chi_b is not None:
        data["chi_b"] = args.chi_b[0]
    if args.chi_a is not None:
        data["chi_a"] = args.chi_a
    if args.reference_energy is not None:
        data["reference_energy"] = args.reference_energy
    if args.seeds is not None:
        if args.seeds < 1:
            raise ConfigError("--seeds must be >= 1")
        data["seeds"] = list(range(args.seeds))
    if args.seed is not None:
        data["seeds"] = [args.seed]
    opt = dict(data.get("optimizer") or {})
    if args.optimizer is not None:
        opt["kind"] = args.optimizer
    if args.max_iters is not None:
        opt["max_iters"] = args.max_iters
    data["optimizer"] = opt
    if args.out is not None:
        data["out"] = str(args.out)
    return RunConfig.from_dict(data)


def _cmd_run(args) -> int:
    cfg = config_from_args(args)
    caps = args.chi_b or [cfg.chi_b]
    for cap in caps:
        c = replace(cfg, chi_b=cap)
        for seed in c.seeds:
            rec = run_vtne(c, seed)
            tag = f"_chi{cap}" if len(caps) > 1 else ""
            tag += f"_seed{seed}" if len(c.seeds) > 1 else ""
            if c.out:
                out = Path(c.out)
                emit_csv(rec.trajectory, out.with_name(out.stem + tag + ".csv"), rec.reference_energy)
                write_record_json(rec, out.with_name(out.stem + tag + ".json"))
            if args.checkpoint:
                ck = args.checkpoint[0]
                save_checkpoint(rec, ck.with_name(ck.stem + tag + ck.suffix))
            print(json.dumps(rec.summary(), sort_keys=True))
    return 0


def _cmd_compare(args) -> int:
    cfg = config_from_args(args)
    warm = {}
    for path in args.checkpoint or []:
        ck = read_checkpoint(path)
        _, theta = load_checkpoint(path, cfg)
        warm[f"chi{ck.chi_b}"] = theta
    n_seeds = len(cfg.seeds) if args.seeds is not None else 10
    direct = tuple(args.chi_b) if args.direct and args.chi_b else ()
    records = run_warmstart_comparison(cfg, warm, n_seeds=n_seeds, n_steps=args.steps, direct_caps=direct)
    groups: dict[str, list] = {}
    for r in records:
        groups.setdefault(r.label, []).append(r)
    means = {label: mean_trajectory(rs) for label, rs in groups.items()}
    ref = records[0].reference_energy
    out = Path(cfg.out or "compare.csv")
    summary = {}
    for label, traj in means.items():
        emit_csv(traj, out.with_name(f"{out.stem}_{label}.csv"), ref)
        if label != "cold" and args.steps >= 1000:
            summary[label] = gradient_call_savings(means["cold"], traj, 1000)
    print(json.dumps({"reference_energy": ref, "gradient_call_savings": summary}, sort_keys=True))
    return 0


def _cmd_eval(args) -> int:
    if not args.checkpoint:
        raise ConfigError("eval needs --checkpoint")
    path = args.checkpoint[0]
    ck = read_checkpoint(path)
    base = {"nx": ck.lattice.nx, "ny": ck.lattice.ny, "t": ck.lattice.t, "u": ck.lattice.u, "layers": ck.layers, "chi_b": ck.chi_b}
    for key in ("chi_a", "reference_energy"):
        if getattr(args, key) is not None:
            base[key] = getattr(args, key)
    cfg = RunConfig.from_dict(base)
    circuit, theta = load_checkpoint(path, cfg)
    ev = evaluate_parameters(cfg, circuit, theta)
    ev["energy_chi_a"] = {str(k): v for k, v in ev["energy_chi_a"].items()}
    ev["relative_error_chi_a"] = {str(k): v for k, v in ev["relative_error_chi_a"].items()}
    print(json.dumps(ev, sort_keys=True))
    return 0


def _cmd_bound(args) -> int:
    lines = ["chi,delta,cnot_bound,qsd_cnots"]
    for chi in args.chi:
        r = cnot_upper_bound(chi)
        lines.append(f"{chi},{r.delta:.17g},{r.bound:.17g},{qsd_cnot_count(math.ceil(math.log2(2 * chi))):.17g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "compare": _cmd_compare, "eval": _cmd_eval, "bound": _cmd_bound}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"vtne: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalIntegrityError as exc:
        print(f"vtne: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
