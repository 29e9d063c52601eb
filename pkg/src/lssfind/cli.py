"""Command-line entry point.

Subcommands: gen, fit, dwp, find, simulate, check-bounds.  Every command that
writes files also writes a <out>.manifest.json capturing the full parameter
set, seed, and content digests, so a run can be reproduced bit-exactly.

Exit codes: 0 success, 2 validation/input error, 1 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dwp import dwp_exact
from .evaluate import FindParams, check_theorem_bounds, run_scenario
from .forest import fit_forest, forest_from_dict, forest_to_dict
from .generate import (
    ScenarioConfig,
    gen_dataset,
    sample_from_spec,
    scenario_from_dict,
    scenario_to_dict,
)
from .mining import lssfind, maximal_sets
from .model import (
    Dataset,
    RfConfig,
    SignedSet,
    spec_from_dict,
    spec_to_dict,
    validate_lss_spec,
)


class CliError(Exception):
    """User-facing validation failure; exits with status 2."""


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out: Path, command: str, params: dict,
                    inputs: list[Path], outputs: list[Path]) -> None:
    manifest = {
        "command": command,
        "params": params,
        "version": __version__,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(p): _sha256(p) for p in outputs},
    }
    _write_json(out.with_suffix(out.suffix + ".manifest.json"), manifest)


def _load_json(path: Path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise CliError(f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}")


def write_dataset_csv(path: Path, dataset: Dataset) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{j}" for j in range(1, dataset.p + 1)] + ["y"])
        for i in range(dataset.n):
            writer.writerow([repr(float(v)) for v in dataset.x[i]]
                            + [repr(float(dataset.y[i]))])


def read_dataset_csv(path: Path) -> Dataset:
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except FileNotFoundError:
        raise CliError(f"no such file: {path}")
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CliError(f"{path}: empty CSV")
        p = len(header) - 1
        if p < 1 or header[-1] != "y" or header[:-1] != [f"x{j}" for j in range(1, p + 1)]:
            raise CliError(f"{path}: header must be x1,...,xp,y")
        xs, ys = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != p + 1:
                raise CliError(f"{path}:{lineno}: expected {p + 1} fields, got {len(row)}")
            try:
                values = [float(v) for v in row]
            except ValueError as exc:
                raise CliError(f"{path}:{lineno}: {exc}")
            xs.append(values[:-1])
            ys.append(values[-1])
    if not xs:
        raise CliError(f"{path}: no data rows")
    return Dataset(np.asarray(xs), np.asarray(ys))


def _parse_set(text: str) -> SignedSet:
    try:
        return SignedSet.parse(text)
    except ValueError as exc:
        raise CliError(str(exc))


def _config_from_args(args, seed: int) -> RfConfig:
    return RfConfig(
        n_trees=args.trees,
        mtry=args.mtry,
        epsilon=args.epsilon,
        min_child_samples=args.min_child_samples,
        bootstrap=args.bootstrap,
        min_child_fraction=args.min_child_fraction,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Subcommands


def cmd_gen(args) -> int:
    out = Path(args.out)
    inputs = []
    if args.scenario:
        doc = _load_json(Path(args.scenario))
        inputs.append(Path(args.scenario))
        try:
            scenario = scenario_from_dict(doc)
        except ValueError as exc:
            raise CliError(str(exc))
        if args.n is not None or args.seed is not None:
            scenario = scenario_from_dict({
                **scenario_to_dict(scenario),
                **({"n": args.n} if args.n is not None else {}),
                **({"seed": args.seed} if args.seed is not None else {}),
            })
        dataset, spec = gen_dataset(scenario)
        params = scenario_to_dict(scenario)
    elif args.spec:
        doc = _load_json(Path(args.spec))
        inputs.append(Path(args.spec))
        try:
            spec = spec_from_dict(doc)
        except ValueError as exc:
            raise CliError(str(exc))
        violations = validate_lss_spec(spec)
        if violations:
            raise CliError("invalid spec: " + "; ".join(violations))
        if args.n is None:
            raise CliError("--n is required with --spec")
        p = args.p if args.p is not None else spec.max_feature_index()
        seed = args.seed if args.seed is not None else 0
        dataset = sample_from_spec(spec, args.n, p, seed)
        params = {"spec": str(args.spec), "n": args.n, "p": p, "seed": seed}
    else:
        raise CliError("one of --scenario or --spec is required")

    data_path = out.with_suffix(".csv") if out.suffix != ".csv" else out
    spec_path = Path(str(data_path)[: -len(".csv")] + ".spec.json")
    write_dataset_csv(data_path, dataset)
    _write_json(spec_path, spec_to_dict(spec))
    _write_manifest(data_path, "gen", params, inputs, [data_path, spec_path])
    print(f"wrote {data_path} ({dataset.n} rows, {dataset.p} features) and {spec_path}")
    return 0


def cmd_fit(args) -> int:
    data_path = Path(args.data)
    dataset = read_dataset_csv(data_path)
    seed = args.seed if args.seed is not None else 0
    config = _config_from_args(args, seed)
    if args.mtry is None:
        print(f"mtry not given; defaulting to ceil(p/2) = {config.resolve_mtry(dataset.p)}",
              file=sys.stderr)
    forest = fit_forest(dataset, config, threads=args.threads)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(forest_to_dict(forest), fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")
    _write_manifest(out, "fit",
                    {"data": str(data_path), "trees": config.n_trees,
                     "mtry": config.mtry, "epsilon": config.epsilon,
                     "min_child_samples": config.min_child_samples,
                     "bootstrap": config.bootstrap,
                     "min_child_fraction": config.min_child_fraction,
                     "seed": seed, "threads": args.threads},
                    [data_path], [out])
    print(f"wrote {out} ({forest.n_trees} trees)")
    return 0


def _load_forest(path: str):
    doc = _load_json(Path(path))
    try:
        return forest_from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"{path}: malformed forest document: {exc}")


def cmd_dwp(args) -> int:
    forest = _load_forest(args.forest)
    s = _parse_set(args.set)
    epsilon = args.epsilon if args.epsilon is not None else forest.config.epsilon
    estimate = dwp_exact(forest, s, epsilon, first_rule=args.first_rule)
    doc = {
        "set": str(s),
        "epsilon": epsilon,
        "value": estimate.value,
        "bound": 2.0 ** -len(s),
        "method": estimate.method,
    }
    _emit(doc, args.out, "dwp",
          {"forest": args.forest, "set": str(s), "epsilon": epsilon,
           "first_rule": args.first_rule},
          [Path(args.forest)])
    return 0


def cmd_find(args) -> int:
    if args.forest:
        forest = _load_forest(args.forest)
        dataset = None
        config = None
        inputs = [Path(args.forest)]
    elif args.data:
        dataset = read_dataset_csv(Path(args.data))
        forest = None
        config = _config_from_args(args, args.seed if args.seed is not None else 0)
        inputs = [Path(args.data)]
    else:
        raise CliError("one of --data or --forest is required")
    results = lssfind(dataset=dataset, config=config, eta=args.eta,
                      s_max=args.s_max, forest=forest, epsilon=args.epsilon,
                      threads=args.threads, first_rule=args.first_rule)
    doc = {
        "params": {"eta": args.eta, "epsilon": args.epsilon, "s_max": args.s_max,
                   "first_rule": args.first_rule},
        "sets": [{"set": str(fs.set), "support": fs.support,
                  "scaled": 2.0 ** fs.size * fs.support} for fs in results],
        "maximal": [{"set": str(fs.set), "support": fs.support}
                    for fs in maximal_sets(results)],
    }
    _emit(doc, args.out, "find", doc["params"], inputs)
    return 0


def cmd_simulate(args) -> int:
    scenario = scenario_from_dict(_load_json(Path(args.scenario)))
    if args.seed is not None:
        scenario = scenario_from_dict({**scenario_to_dict(scenario), "seed": args.seed})
    params = FindParams(eta=args.eta, epsilon=args.epsilon, s_max=args.s_max,
                        n_trees=args.trees, mtry=args.mtry,
                        bootstrap=not args.no_bootstrap)
    result = run_scenario(scenario, args.runs, params, threads=args.threads)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        # wall time stays out of the file so re-runs are byte-identical
        writer.writerow(["run_index", "score", "n_sets_found"])
        for r in result.runs:
            writer.writerow([r.run_index, repr(r.score), r.n_sets_found])
    summary_path = Path(str(out) + ".summary.json")
    _write_json(summary_path, {
        "scenario": scenario_to_dict(scenario),
        "runs": args.runs,
        "mean_score": result.mean_score,
        "sd_score": result.sd_score,
    })
    _write_manifest(out, "simulate",
                    {"scenario": scenario_to_dict(scenario), "runs": args.runs,
                     "eta": args.eta, "epsilon": args.epsilon, "s_max": args.s_max,
                     "trees": args.trees, "mtry": args.mtry,
                     "bootstrap": not args.no_bootstrap,
                     "threads": args.threads},
                    [Path(args.scenario)], [out, summary_path])
    print(f"mean score {result.mean_score:.4f} over {args.runs} runs -> {out}")
    return 0


def cmd_check_bounds(args) -> int:
    forest = _load_forest(args.forest)
    spec = spec_from_dict(_load_json(Path(args.spec)))
    violations = validate_lss_spec(spec)
    if violations:
        raise CliError("invalid spec: " + "; ".join(violations))
    epsilon = args.epsilon if args.epsilon is not None else forest.config.epsilon
    extra = [_parse_set(s) for s in args.set] if args.set else None
    report = check_theorem_bounds(forest, spec, epsilon, query_sets=extra)
    doc = {
        "epsilon": epsilon,
        "constants": {
            "c_beta": report.constants.c_beta,
            "c_gamma": report.constants.c_gamma,
            "c_m": report.constants.c_m,
            "s": report.constants.s,
            "violations": list(report.constants.violations),
        },
        "entries": [{
            "set": str(e.signed_set),
            "union_interaction": e.is_union_interaction,
            "dwp": e.dwp,
            "cap": e.cap,
            "floor": e.floor,
            "ceiling": e.ceiling,
            "warning": e.warning,
        } for e in report.entries],
        "warnings": report.warnings,
    }
    _emit(doc, args.out, "check-bounds",
          {"forest": args.forest, "spec": args.spec, "epsilon": epsilon},
          [Path(args.forest), Path(args.spec)])
    return 0


def _emit(doc, out, command, params, inputs) -> None:
    if out:
        path = Path(out)
        _write_json(path, doc)
        _write_manifest(path, command, params, inputs, [path])
    else:
        json.dump(doc, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")


# ---------------------------------------------------------------------------
# Argument parsing


def _add_fit_flags(sub) -> None:
    sub.add_argument("--trees", type=int, default=100)
    sub.add_argument("--mtry", type=int, default=None)
    sub.add_argument("--epsilon", type=float, default=0.01)
    sub.add_argument("--min-child-samples", type=int, default=1, dest="min_child_samples")
    sub.add_argument("--min-child-fraction", type=float, default=0.0,
                     dest="min_child_fraction")
    sub.add_argument("--bootstrap", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lssfind",
        description="Train forests, compute signed-set prevalences on decision "
                    "paths, and mine Boolean interactions.")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("gen", help="generate a synthetic dataset")
    gen.add_argument("--scenario", help="scenario JSON file")
    gen.add_argument("--spec", help="model spec JSON file")
    gen.add_argument("--n", type=int, default=None)
    gen.add_argument("--p", type=int, default=None)
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--out", required=True, help="output CSV path")
    gen.set_defaults(func=cmd_gen)

    fit = subs.add_parser("fit", help="train a forest on a dataset CSV")
    fit.add_argument("--data", required=True)
    fit.add_argument("--out", required=True)
    fit.add_argument("--seed", type=int, default=None)
    fit.add_argument("--threads", type=int, default=1)
    _add_fit_flags(fit)
    fit.set_defaults(func=cmd_fit)

    dwp = subs.add_parser("dwp", help="exact prevalence of one signed set")
    dwp.add_argument("--forest", required=True)
    dwp.add_argument("--set", required=True, help='signed set, e.g. "1-,2-"')
    dwp.add_argument("--epsilon", type=float, default=None)
    dwp.add_argument("--first-rule", default="strict_first", dest="first_rule",
                     choices=["strict_first", "first_above_threshold"])
    dwp.add_argument("--out", default=None)
    dwp.set_defaults(func=cmd_dwp)

    find = subs.add_parser("find", help="mine high-prevalence signed sets")
    find.add_argument("--data")
    find.add_argument("--forest")
    find.add_argument("--eta", type=float, default=0.01)
    find.add_argument("--s-max", type=int, default=3, dest="s_max")
    find.add_argument("--seed", type=int, default=None)
    find.add_argument("--threads", type=int, default=1)
    find.add_argument("--first-rule", default="strict_first", dest="first_rule",
                      choices=["strict_first", "first_above_threshold"])
    find.add_argument("--out", default=None)
    _add_fit_flags(find)
    find.set_defaults(func=cmd_find)

    sim = subs.add_parser("simulate", help="Monte-Carlo recovery benchmark")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--runs", type=int, default=40)
    sim.add_argument("--eta", type=float, default=0.01)
    sim.add_argument("--epsilon", type=float, default=0.01)
    sim.add_argument("--s-max", type=int, default=None, dest="s_max")
    sim.add_argument("--trees", type=int, default=100)
    sim.add_argument("--mtry", type=int, default=None,
                     help="candidate features per split (default: all)")
    sim.add_argument("--no-bootstrap", action="store_true", dest="no_bootstrap")
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--threads", type=int, default=1)
    sim.add_argument("--out", required=True, help="results CSV path")
    sim.set_defaults(func=cmd_simulate)

    chk = subs.add_parser("check-bounds", help="compare prevalences to the "
                          "cap/floor/ceiling bounds")
    chk.add_argument("--forest", required=True)
    chk.add_argument("--spec", required=True)
    chk.add_argument("--epsilon", type=float, default=None)
    chk.add_argument("--set", action="append", default=None,
                     help="extra non-interaction query set (repeatable)")
    chk.add_argument("--out", default=None)
    chk.set_defaults(func=cmd_check_bounds)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
