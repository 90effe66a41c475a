"""Long-running studies behind the heavy acceptance checks.

Each study writes into ``results/<study>/`` and skips any run whose output
files already exist, so an interrupted study resumes where it stopped.

    python scripts/studies.py caps      # 4x2, chi_b in {8, 16, 32, 64}
    python scripts/studies.py compare   # 4x2 cold vs warm-started Adam (needs caps)
    python scripts/studies.py smoke     # 16x1 at chi_b = 16
    python scripts/studies.py all
    python scripts/studies.py caps --caps 8 16   # a subset
"""

from __future__ import annotations

import argparse
import json
import logging
import time
from dataclasses import replace
from pathlib import Path
from types import SimpleNamespace

from vtne.experiments import (
    RunConfig,
    emit_csv,
    gradient_call_savings,
    load_checkpoint,
    mean_trajectory,
    read_csv,
    reference_for,
    run_vtne,
    run_warmstart_comparison,
    save_checkpoint,
    write_record_json,
)

RESULTS = Path(__file__).resolve().parent.parent / "results"
CAPS_4X2 = (8, 16, 32, 64)
WARM_CAPS = (16, 32, 64)
N_SEEDS = 10
N_STEPS = 1000

log = logging.getLogger("studies")


def _run_once(cfg: RunConfig, out: Path, stem: str) -> dict:
    summary = out / f"{stem}.json"
    if summary.exists():
        return json.loads(summary.read_text())
    t0 = time.perf_counter()
    rec = run_vtne(cfg)
    emit_csv(rec.trajectory, out / f"{stem}.csv", rec.reference_energy)
    save_checkpoint(rec, out / f"{stem}_checkpoint.json")
    write_record_json(rec, summary)
    log.info("%s done in %.0f s: %s", stem, time.perf_counter() - t0, rec.summary())
    return json.loads(summary.read_text())


def caps_config(cap: int) -> RunConfig:
    return RunConfig(nx=4, ny=2, layers=10, chi_b=cap, chi_a=(cap, 256))


def cap_sweep(out: Path = RESULTS / "4x2", caps=CAPS_4X2) -> dict[int, dict]:
    """One warm-mode run per bond cap, each evaluated at its own cap and at 256."""
    out.mkdir(parents=True, exist_ok=True)
    return {cap: _run_once(caps_config(cap), out, f"chi{cap}") for cap in caps}


def warmstart_comparison(
    out: Path = RESULTS / "compare", caps_dir: Path = RESULTS / "4x2", caps=WARM_CAPS, n_seeds=N_SEEDS, n_steps=N_STEPS
) -> dict:
    """Cold Adam from N(0, 1e-3) per seed and warm Adam from each cap's optimum."""
    out.mkdir(parents=True, exist_ok=True)
    cfg = RunConfig(nx=4, ny=2, layers=10)
    for seed in range(n_seeds):
        path = out / f"cold_seed{seed}.csv"
        if not path.exists():
            (rec,) = run_warmstart_comparison(cfg, {}, n_steps=n_steps, seeds=[seed])
            emit_csv(rec.trajectory, path, rec.reference_energy)
            log.info("cold seed %d: E=%.10f", seed, rec.energy_chi_b)
    for cap in caps:
        path = out / f"warm_chi{cap}.csv"
        if not path.exists():
            _, theta = load_checkpoint(caps_dir / f"chi{cap}_checkpoint.json", replace(cfg, chi_b=cap))
            (rec,) = run_warmstart_comparison(cfg, {f"chi{cap}": theta}, n_seeds=0, n_steps=n_steps)
            emit_csv(rec.trajectory, path, rec.reference_energy)
            log.info("warm chi=%d: E=%.10f", cap, rec.energy_chi_b)
    cold = [SimpleNamespace(trajectory=read_csv(out / f"cold_seed{s}.csv")) for s in range(n_seeds)]
    cold_mean = mean_trajectory(cold)
    ref = reference_for(cfg.lattice).energy
    emit_csv(cold_mean, out / "cold_mean.csv", ref)
    summary = {"reference_energy": ref, "cold_energy_at_step": {}, "savings": {}, "warm_start_energy": {}}
    target = next(p for p in cold_mean if p.step == n_steps)
    summary["cold_energy_at_step"][str(n_steps)] = target.energy
    for cap in caps:
        warm = read_csv(out / f"warm_chi{cap}.csv")
        summary["savings"][f"chi{cap}"] = gradient_call_savings(cold_mean, warm, n_steps)
        summary["warm_start_energy"][f"chi{cap}"] = warm[0].energy
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return summary


def smoke_16x1(out: Path = RESULTS / "16x1") -> dict:
    """32-qubit chain at chi_b = 16; no exact reference exists at this size."""
    out.mkdir(parents=True, exist_ok=True)
    cfg = RunConfig(nx=16, ny=1, chi_b=16, chi_a=(16,))
    return _run_once(cfg, out, "chi16")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("study", choices=("caps", "compare", "smoke", "all"))
    parser.add_argument("--caps", type=int, nargs="+", help="restrict caps/compare to these bond caps")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    if args.study in ("caps", "all"):
        cap_sweep(caps=args.caps or CAPS_4X2)
    if args.study in ("compare", "all"):
        print(json.dumps(warmstart_comparison(caps=args.caps or WARM_CAPS), indent=1))
    if args.study in ("smoke", "all"):
        smoke_16x1()


if __name__ == "__main__":
    main()
