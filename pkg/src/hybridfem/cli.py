"""``hybridfem`` command-line driver.

Every subcommand reads defaults that a ``--config`` JSON file may override,
writes CSV tables plus a ``manifest.json`` into ``--out``, and exits with a
nonzero status only when the study could not be carried out (bad input,
unreadable files). A diverged structural run is a result and exits with 0.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (
    TrainingRegion,
    build_training_set,
    layered_grid_samples,
    lhd_samples,
    load_training_set,
    rve_source,
    save_training_set,
)
from .errors import HybridFemError
from .fem.export import write_gauss_csv, write_gauss_jsonl
from .hybrid import HybridLaw, Mode
from .kriging import fit_training_set, save_model
from .pso import PsoConfig
from .rve import RveSpec
from .studies import designs, benchmarks, calibration, patch, sweeps
from .studies.common import CLOUD_SEED, CLOUD_SIZE, N_LAYERS_SWEEP, REFERENCE_RVE, Workspace, default_cache_dir

logger = logging.getLogger("hybridfem")

DEFAULTS = {
    "rve-sample": {"rve": REFERENCE_RVE.to_dict(), "design": "grid", "width": 0.25, "n_layers": 10, "n": 100,
                   "c1": 0.0, "dataset": "dataset.jsonl"},
    "train": {"dataset": "dataset.jsonl", "c1": None, "model": "model.json", "pso": {}},
    "calibrate-c1": {"rve": REFERENCE_RVE.to_dict(), "n": 10, "scan": [0.0, 20.0, 201]},
    "patch": {"path": "uniaxial", "range": [0.75, 1.25, 21], "modes": ["model", "data", "hybrid"],
              "width": 0.25, "n_layers": 10, "c1": None, "rve": REFERENCE_RVE.to_dict(), "reference": False},
    "compression": {"modes": ["model", "data", "hybrid"], "width": 0.05, "n_layers": 10, "c1": None,
                    "target": 1.5, "steps": 20, "program": "adaptive", "n_el": 30, "rve": REFERENCE_RVE.to_dict(),
                    "fields": True},
    "cook": {"modes": ["model", "data", "hybrid"], "width": 0.25, "n_layers": 10, "c1": None,
             "target": 1.5, "steps": 20, "program": "adaptive", "n_el": 30, "rve": REFERENCE_RVE.to_dict(),
             "fields": True},
    "errors": {"study": "density", "width": 0.25, "n_layers": list(N_LAYERS_SWEEP), "c1": None,
               "modes": ["hybrid", "data"], "n_ref": CLOUD_SIZE, "lambdas": None,
               "factors": [0.0, 0.5, 1.0, 2.0, 5.0, 10.0], "rve": REFERENCE_RVE.to_dict()},
    "appendix-b": {"scenarios": [1, 2, 3, 4, 5], "n_path": 201, "lambdas": None},
}


def _write_csv(rows: list[dict], path: Path) -> None:
    keys: list[str] = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        w.writerows(rows)


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    """Output directory bookkeeping for one subcommand invocation."""

    def __init__(self, command: str, cfg: dict, seed: int, out: Path):
        self.command, self.cfg, self.seed, self.out = command, cfg, seed, out
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: dict[str, str] = {}
        self.results: dict = {}

    def table(self, name: str, rows: list[dict]) -> None:
        path = self.out / name
        _write_csv(rows, path)
        self.outputs[name] = _sha(path)

    def file(self, path: Path) -> None:
        self.outputs[path.name] = _sha(path)

    def manifest(self) -> None:
        doc = {"command": self.command, "version": __version__, "seed": self.seed, "config": self.cfg,
               "results": self.results, "outputs": self.outputs}
        with open(self.out / "manifest.json", "w") as fh:
            json.dump(doc, fh, indent=2, default=float)


def _workspace(cfg: dict, seed: int, cache: Path) -> Workspace:
    spec = RveSpec.from_dict(cfg.get("rve", REFERENCE_RVE.to_dict()))
    return Workspace(spec=spec, cache_dir=cache, kriging_seed=seed)


def _c1(cfg: dict, ws: Workspace, run: Run) -> float:
    if cfg.get("c1") is not None:
        return float(cfg["c1"])
    c1 = calibration.calibrate_c1(ws.ground_truth).c1
    run.results["C1_fit"] = c1
    return c1


def cmd_rve_sample(run: Run, ws: Workspace) -> None:
    cfg = run.cfg
    region = TrainingRegion(cfg["width"], cfg["n_layers"])
    if cfg["design"] == "grid":
        f = layered_grid_samples(region)
    elif cfg["design"] == "lhd":
        f = lhd_samples(region, cfg["n"], run.seed)
    else:
        raise ValueError(f"unknown design {cfg['design']!r}")
    prov = {"rve": ws.spec.to_dict(), "rve_digest": ws.spec.digest(), "design": cfg["design"],
            "seed": run.seed, **region.to_dict()}
    ts = build_training_set(f, rve_source(ws.homogenizer, ws.truth), cfg["c1"], prov,
                            require_reference=cfg["design"] == "grid")
    path = run.out / cfg["dataset"]
    save_training_set(ts, path)
    run.file(path)
    run.results["n_samples"] = len(ts)


def cmd_train(run: Run, ws: Workspace) -> None:
    cfg = run.cfg
    ts = load_training_set(cfg["dataset"])
    if cfg["c1"] is not None and float(cfg["c1"]) != ts.macro_c1:
        ts = ts.rebased(float(cfg["c1"]))
    model = fit_training_set(ts, seed=run.seed, config=PsoConfig(**cfg["pso"]))
    path = run.out / cfg["model"]
    save_model(model, path)
    run.file(path)
    run.results.update({"n_train": len(ts), "macro_c1": ts.macro_c1, "theta": model.theta.tolist()})


def cmd_calibrate(run: Run, ws: Workspace) -> None:
    cal = calibration.calibrate_c1(ws.ground_truth, n=run.cfg["n"])
    lo, hi, m = run.cfg["scan"]
    grid = np.linspace(lo, hi, int(m))
    run.table("fobj_scan.csv", [{"C1": float(g), "fobj": float(v)} for g, v in zip(grid, cal.scan(grid))])
    run.table("samples.csv", [{"F11": f[0], "F22": f[1], "F12": f[2], "S11": s[0], "S22": s[1], "S12": s[2]}
                              for f, s in zip(cal.samples, cal.S_ref)])
    run.results.update({"C1_fit": cal.c1, "fobj": cal.fobj, "rve_digest": ws.spec.digest()})


def _laws(run: Run, ws: Workspace) -> dict[str, HybridLaw]:
    cfg = run.cfg
    c1 = _c1(cfg, ws, run)
    return {m: ws.law(m, cfg["width"], cfg["n_layers"], c1) for m in cfg["modes"]}


def cmd_patch(run: Run, ws: Workspace) -> None:
    cfg = run.cfg
    lo, hi, m = cfg["range"]
    values = np.linspace(lo, hi, int(m))
    path = patch.uniaxial_path(values) if cfg["path"] == "uniaxial" else patch.multiaxial_path(values)
    ref = (lambda f: ws.ground_truth(f)[0][0]) if cfg["reference"] else None
    for mode, law in _laws(run, ws).items():
        rows = patch.patch_sweep(path, law, reference=ref, bands=(mode == "hybrid"))
        run.table(f"patch_{cfg['path']}_{mode}.csv", rows)
        run.results[mode] = {"max_spread": max((r.get("spread", 0.0) for r in rows), default=0.0),
                             "diverged": [r["F11"] for r in rows if not r["converged"]]}


def cmd_benchmark(run: Run, ws: Workspace) -> None:
    cfg = run.cfg
    results = {}
    for mode, law in _laws(run, ws).items():
        res = benchmarks.run_benchmark(run.command, law, target=cfg["target"], steps=cfg["steps"],
                                       mode=cfg["program"], n_el=cfg["n_el"], keep_fields=cfg["fields"])
        results[mode] = res
        run.table(f"{run.command}_{mode}_trace.csv", res.traces)
        if res.fields is not None:
            path = run.out / f"{run.command}_{mode}_fields.csv"
            write_gauss_csv(res.fields, path)
            run.file(path)
            jpath = path.with_suffix(".jsonl")
            write_gauss_jsonl(res.fields, jpath)
            run.file(jpath)
        run.results[mode] = {"last_converged_load": res.last_load, "completed": res.report.completed,
                             "mean_iterations": res.report.mean_iterations}
    if "model" in results:
        ref = results["model"].report
        for mode, res in results.items():
            try:
                run.results[mode]["ipi"] = benchmarks.ipi_at(res.report, ref, res.last_load)
            except ValueError:
                run.results[mode]["ipi"] = None
            run.table(f"{run.command}_{mode}_variation.csv",
                      benchmarks.relative_variation(res.traces, results["model"].traces))


def cmd_errors(run: Run, ws: Workspace) -> None:
    cfg = run.cfg
    c1 = _c1(cfg, ws, run)
    if cfg["study"] == "density":
        rows = sweeps.density_sweep(ws, cfg["width"], cfg["n_layers"], c1, [Mode(m) for m in cfg["modes"]],
                                    cfg["n_ref"], CLOUD_SEED, cfg["lambdas"])
    elif cfg["study"] == "c1":
        n_layers = cfg["n_layers"] if isinstance(cfg["n_layers"], int) else 10
        rows = sweeps.c1_sweep(ws, c1, cfg["factors"], cfg["width"], n_layers, cfg["n_ref"], CLOUD_SEED)
    else:
        raise ValueError(f"unknown error study {cfg['study']!r}")
    run.table(f"errors_{cfg['study']}.csv", rows)
    run.results["n_ref"] = cfg["n_ref"]


def cmd_design_study(run: Run, ws: Workspace) -> None:
    cfg = run.cfg
    res = designs.run_design_study(cfg["scenarios"], seed=run.seed, n_path=cfg["n_path"], lambdas=cfg["lambdas"])
    for s, r in res.items():
        rows = r.errors.rows()
        run.table(f"design_scenario{s}.csv", rows)
        run.results[f"scenario{s}"] = {"design": r.design, "width": r.width, "n_train": r.n_train,
                                       "stress_at_identity": r.stress_at_identity}


COMMANDS = {
    "rve-sample": cmd_rve_sample,
    "train": cmd_train,
    "calibrate-c1": cmd_calibrate,
    "patch": cmd_patch,
    "compression": cmd_benchmark,
    "cook": cmd_benchmark,
    "errors": cmd_errors,
    "appendix-b": cmd_design_study,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybridfem", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="JSON file overriding the defaults")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--out", type=Path, default=Path("out") / name)
        s.add_argument("--cache", type=Path, default=None, help="ground-truth and model cache directory")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    cfg = json.loads(json.dumps(DEFAULTS[args.command]))
    try:
        if args.config is not None:
            override = json.loads(args.config.read_text())
            unknown = set(override) - set(cfg)
            if unknown:
                raise ValueError(f"unknown config keys {sorted(unknown)}")
            cfg.update(override)
        run = Run(args.command, cfg, args.seed, args.out)
        ws = _workspace(cfg, args.seed, args.cache or default_cache_dir())
        COMMANDS[args.command](run, ws)
        run.manifest()
    except (OSError, ValueError, HybridFemError) as exc:
        print(f"hybridfem {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
