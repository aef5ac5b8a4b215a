"""Command line entry point: ``hddcm {run,sweep,rod-examples,check,robust}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import diagnostics
from .experiments import OBSTACLES, ExperimentSpec
from .nlp import ROBUST_VARIANTS, build_robust
from .quickshot import SCHEMA_VERSION, QuickShotReport, run
from .sqp import SqpSettings, solve


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(v: float) -> str:
    return f"{v:.10g}"


def deformation_csv(spec: ExperimentSpec, report: QuickShotReport) -> str:
    model = spec.model()
    pos = model.structure.positions(report.last.q)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node", "x", "y", "z"])
    for i, p in enumerate(pos):
        w.writerow([i, *map(_fmt, p)])
    return buf.getvalue()


SWEEP_COLUMNS = [
    "gamma",
    "final_status",
    "stage_reached",
    "objective",
    "xi_active",
    "complementarity",
    "feasibility_inf",
    "bound_violation_inf",
    "active_sets",
    "tol_sqp",
    "tol_qp",
    "iterations",
]


def sweep_row(spec: ExperimentSpec, report: QuickShotReport) -> dict:
    last = report.last
    nodes = spec.contact().node_indices
    xi = ";".join(f"{nodes[i]}:{_fmt(v)}" for i, v in enumerate(last.xi) if i in last.contact_rows)
    sets = "|".join(f"{o.stage}:{{{','.join(map(str, o.contact_set))}}}" for o in report.outcomes)
    return {
        "gamma": _fmt(spec.gamma),
        "final_status": report.final_status,
        "stage_reached": last.stage,
        "objective": _fmt(last.verdict.objective_value),
        "xi_active": xi,
        "complementarity": _fmt(last.verdict.complementarity_product),
        "feasibility_inf": _fmt(last.verdict.feasibility_inf_norm),
        "bound_violation_inf": _fmt(last.verdict.bound_violation_inf),
        "active_sets": sets,
        "tol_sqp": _fmt(last.tolerances_used[0]),
        "tol_qp": _fmt(last.tolerances_used[1]),
        "iterations": "+".join(str(o.solve.iterations) for o in report.outcomes),
    }


def sweep(spec: ExperimentSpec, gammas) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for g in gammas:
        s = spec.with_gamma(g)
        try:
            rep = run(s.model(), s.settings())
            w.writerow(sweep_row(s, rep))
        except Exception as exc:  # record and continue with the next gamma
            w.writerow({"gamma": _fmt(g), "final_status": f"error: {type(exc).__name__}: {exc}"})
    return buf.getvalue()


# ---------------------------------------------------------------------------


def _spec_from_args(args) -> ExperimentSpec:
    overrides = {
        "obstacle": args.obstacle,
        "material": args.material,
        "gamma": getattr(args, "gamma", None),
        "tol_sqp": args.tol_sqp,
        "tol_qp": args.tol_qp,
        "out": args.out,
    }
    if args.config:
        return ExperimentSpec.from_json(args.config, **overrides)
    return ExperimentSpec(**{k: v for k, v in overrides.items() if v is not None})


def _cmd_run(args) -> int:
    spec = _spec_from_args(args)
    report = run(spec.model(), spec.settings())
    payload = report.to_dict()
    payload["experiment"] = spec.to_dict()
    out = Path(spec.out or ".")
    stem = f"{spec.obstacle}_{spec.material}_g{spec.gamma:g}"
    _atomic_write(out / f"{stem}.json", json.dumps(payload, indent=1, sort_keys=True))
    _atomic_write(out / f"{stem}_deformation.csv", deformation_csv(spec, report))
    summary = {
        "schema_version": SCHEMA_VERSION,
        "final_status": report.final_status,
        "stage_reached": report.last.stage,
        "objective": report.last.verdict.objective_value,
        "complementarity": report.last.verdict.complementarity_product,
        "contact_set": list(report.last.contact_set),
        "xi": {str(n): float(v) for n, v in zip(spec.contact().node_indices, report.last.xi) if v != 0},
        "report": str(out / f"{stem}.json"),
    }
    if not report.valid:
        summary["error"] = "run did not produce a valid MPCC solution"
    print(json.dumps(summary, indent=1))
    return 0 if report.valid else 1


def _cmd_sweep(args) -> int:
    spec = _spec_from_args(args)
    text = sweep(spec, args.gammas)
    if spec.out:
        _atomic_write(Path(spec.out), text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_rods(args) -> int:
    result = diagnostics.rod_examples(f2=args.f2, length=args.length, stiffness=args.stiffness)
    print(json.dumps(result, indent=1))
    return 0 if result["ok"] else 1


def _cmd_check(args) -> int:
    result = diagnostics.check(n_elements=args.n_elements, seed=args.seed, expect_defaults=args.n_elements == 20)
    print(json.dumps(result, indent=1))
    return 0 if result["ok"] else 1


def _cmd_robust(args) -> int:
    spec = _spec_from_args(args)
    model = spec.model()
    xi = None
    if args.xi_from:
        xi = np.asarray(json.loads(Path(args.xi_from).read_text())["outcomes"][-1]["xi"])
    prob = build_robust(args.variant, model, xi=xi)
    rep = solve(prob, SqpSettings(tol_sqp=spec.tol_sqp, tol_qp=spec.tol_qp))
    x = rep.x
    slacks = {name: float(np.abs(prob.slack(x, name)).max()) for name in prob.slack_groups}
    print(
        json.dumps(
            {
                "schema_version": SCHEMA_VERSION,
                "variant": args.variant,
                "status": rep.status,
                "iterations": rep.iterations,
                "objective": rep.objective_value,
                "slack_inf": slacks,
            },
            indent=1,
        )
    )
    return 0 if rep.converged else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hddcm", description=__doc__)
    p.add_argument("--trace", action="store_true", help="log SQP iterations to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def experiment_flags(sp, gamma=True):
        sp.add_argument("--obstacle", choices=sorted(OBSTACLES))
        sp.add_argument("--material", choices=["symmetric", "asymmetric"])
        if gamma:
            sp.add_argument("--gamma", type=float)
        sp.add_argument("--tol-sqp", type=float)
        sp.add_argument("--tol-qp", type=float)
        sp.add_argument("--config", help="JSON experiment file; flags override its values")
        sp.add_argument("--out")
        sp.add_argument("--trace", action="store_true", default=argparse.SUPPRESS)

    sp = sub.add_parser("run", help="quick-shot run of one experiment")
    experiment_flags(sp)
    sp.set_defaults(func=_cmd_run)

    sp = sub.add_parser("sweep", help="CSV summary over several load factors")
    experiment_flags(sp, gamma=False)
    sp.add_argument("--gammas", type=float, nargs="+", required=True)
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser("rod-examples", help="closed-form rod checks through the full pipeline")
    sp.add_argument("--f2", type=float, default=20.0)
    sp.add_argument("--length", type=float, default=1.0)
    sp.add_argument("--stiffness", type=float, default=1.0)
    sp.set_defaults(func=_cmd_rods)

    sp = sub.add_parser("check", help="dimension, rank and derivative diagnostics")
    sp.add_argument("--n-elements", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=_cmd_check)

    sp = sub.add_parser("robust", help="solve an l1-robust reformulation")
    experiment_flags(sp)
    sp.add_argument("--variant", choices=ROBUST_VARIANTS, default="residual_l1")
    sp.add_argument("--xi-from", help="run report whose final contact forces enter as data")
    sp.set_defaults(func=_cmd_robust)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "trace", False) else logging.WARNING,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )
    if not getattr(args, "trace", False):
        logging.getLogger("hddcm").setLevel(logging.WARNING)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(json.dumps({"schema_version": SCHEMA_VERSION, "error": str(exc)}), file=sys.stdout)
        return 2


if __name__ == "__main__":
    sys.exit(main())
