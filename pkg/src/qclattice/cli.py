"""Command-line interface: ``qclattice {gen-data,train,eval,sweep,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io, training
from .data import TrainingSet, preprocess
from .lattice import Configuration, ConfigurationError
from .model import MeasurementOperator, predict_energies, sensitivity_sweep, single_substitution_configs
from .optimizers import OptimizationError
from .surrogate import (
    OracleError,
    ReplayOracle,
    SurrogateOracle,
    SurrogateSpec,
    generate_instances,
    sample_configurations,
)

log = logging.getLogger("qclattice")

EXIT_OK = 0
EXIT_UNCONVERGED = 2
EXIT_INPUT = 3
EXIT_ORACLE = 4

SWEEP_PRESETS = {"appendixC8": lambda: single_substitution_configs(8)}


class InputError(Exception):
    pass


# helpers --------------------------------------------------------------------


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def _prediction_rows(p, m, ts: TrainingSet, e0_li, e0_co):
    pred_c = predict_energies(p, ts.sigma(), m)
    x = ts.li_fractions()
    e_raw = ts.raw_energies()
    e_c = preprocess(e_raw, x, e0_li, e0_co)
    pred_raw = pred_c + (e_raw - e_c)
    rows = [
        (inst.id, inst.config.to_signs(), x[i], e_raw[i], pred_raw[i], e_c[i], pred_c[i], pred_c[i] - e_c[i])
        for i, inst in enumerate(ts)
    ]
    return rows, pred_raw, e_raw, pred_c, e_c


PRED_HEADER = ["id", "config", "li_fraction", "energy", "predicted", "energy_centered",
               "predicted_centered", "residual"]


def _metrics(pred_raw, e_raw, pred_c, e_c) -> dict:
    out = training.metrics(pred_raw, e_raw)
    out["r2_centered"] = training.metrics(pred_c, e_c)["r2"]
    out["n"] = int(len(e_raw))
    return out


# gen-data -------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    spec = SurrogateSpec(n_sites=args.n_sites, seed=args.seed)
    if args.config:
        cfg = io.read_run_config(args.config)
        if cfg.oracle is not None:
            spec = cfg.oracle
            if spec.n_sites != args.n_sites:
                raise InputError(f"config oracle has {spec.n_sites} sites, --n-sites is {args.n_sites}")
    if args.anomaly_rate is not None:
        spec = replace(spec, anomaly_rate=args.anomaly_rate)
    exclude = []
    if args.exclude:
        exclude = [inst.config for inst in io.read_dataset(args.exclude).instances]
    count = args.count
    if count != "all":
        try:
            count = int(count)
        except ValueError:
            raise InputError(f"--count must be an integer or 'all', got {count!r}") from None
    try:
        configs = sample_configurations(args.n_sites, count, args.seed, exclude)
        oracle = SurrogateOracle(spec, id_prefix=args.id_prefix)
        instances = generate_instances(oracle, configs, inject=args.inject, seed=args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    try:
        io.write_dataset(args.out, instances, args.n_sites, spec,
                         provenance=f"gen-data count={args.count} seed={args.seed} inject={args.inject}")
    except OSError as exc:
        raise InputError(f"cannot write {args.out}: {exc.strerror}") from None
    print(f"wrote {len(instances)} instances to {args.out}")
    return EXIT_OK


# train ----------------------------------------------------------------------


def cmd_train(args) -> int:
    ds = io.read_dataset(args.dataset)
    cfg = io.read_run_config(args.config) if args.config else io.RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    spec = cfg.oracle or ds.oracle
    if spec is not None and spec.n_sites != ds.n_sites:
        raise InputError(f"oracle has {spec.n_sites} sites, dataset has {ds.n_sites}")
    if spec is not None:
        oracle = SurrogateOracle(spec, id_prefix="t", stream=(cfg.seed,))
    else:
        oracle = ReplayOracle(list(ds.instances))
    m = MeasurementOperator.parse(cfg.measurement) if cfg.measurement else MeasurementOperator.default(ds.n_sites)
    if len(m) != ds.n_sites:
        raise InputError(f"measurement operator {m.ops} does not match {ds.n_sites} sites")
    out = _out_dir(args.out)

    result = training.run_training(
        ds.instances, oracle, cfg.tolerances, cfg.optimizer, seed=cfg.seed, m=m,
        n_starts=cfg.n_starts, max_donors=cfg.max_donors, e0_li=cfg.e0_li, e0_co=cfg.e0_co,
    )
    write_run_outputs(out, result, cfg, m, ds, args)
    status = "converged" if result.converged else "unconverged"
    print(f"{status}: cost {result.final_cost:.6f} after {result.rounds} rounds, "
          f"{len(result.training_set)} instances")
    return EXIT_OK if result.converged else EXIT_UNCONVERGED


def write_run_outputs(out: Path, result, cfg, m, ds, args=None) -> dict:
    p = result.params
    io.write_model(out / "model.json", p, m)
    io.write_run_config(out / "run_config.json", cfg)
    io.write_dataset(out / "training_set.jsonl", result.training_set, ds.n_sites, ds.oracle,
                     provenance=f"training output of {Path(args.dataset).name if args else 'dataset'}")
    io.write_csv(out / "rounds.csv",
                 ["round", "cost_before", "cost_after", "tol3", "flagged", "replaced",
                  "not_replaced", "added", "set_size"],
                 [(r.round, r.cost_before, r.cost_after, r.tol3, r.flagged, r.replaced,
                   r.not_replaced, r.added, r.set_size) for r in result.reports])
    io.write_csv(out / "anomalies.csv",
                 ["round", "id", "discrepancy", "action", "details", "old_energy", "new_energy",
                  "new_id", "warning"],
                 [(r.round, a.instance_id, a.discrepancy, a.action, a.details, a.old_energy,
                   a.new_energy, a.new_id, a.warning) for r in result.reports for a in r.actions])
    io.write_csv(out / "mutations.csv",
                 ["round", "kind", "id", "old_energy", "new_energy", "moments", "converged",
                  "config", "provenance"],
                 [(mu.round, mu.kind, mu.instance_id, mu.old_energy, mu.new_energy,
                   " ".join(io.fmt(v) for v in mu.moments), mu.converged, mu.config, mu.provenance)
                  for mu in result.mutations])
    io.write_csv(out / "moment_histograms.csv", ["round", "moment", "count"],
                 [(r.round, k, v) for r in result.reports for k, v in r.moment_histogram.items()])
    trace_dir = out / "traces"
    trace_dir.mkdir(exist_ok=True)
    for rnd, traces in enumerate(result.traces, start=1):
        for k, tr in enumerate(traces):
            (trace_dir / f"round{rnd:02d}_{k}_{tr.method}.csv").write_text(tr.to_csv(), encoding="utf-8")

    rows, pred_raw, e_raw, pred_c, e_c = _prediction_rows(p, m, result.training_set, cfg.e0_li, cfg.e0_co)
    io.write_csv(out / "predictions_train.csv", PRED_HEADER, rows)
    summary = {
        "converged": result.converged,
        "final_cost": training.cost(p, result.training_set, m, cfg.e0_li, cfg.e0_co),
        "rounds": result.rounds,
        "set_sizes": [r.set_size for r in result.reports],
        "round1_start_costs": result.start_costs,
        "metrics": {"train": _metrics(pred_raw, e_raw, pred_c, e_c)},
        "artifacts": {
            "model": "model.json",
            "training_set": "training_set.jsonl",
            "rounds": "rounds.csv",
            "anomalies": "anomalies.csv",
            "mutations": "mutations.csv",
            "moment_histograms": "moment_histograms.csv",
            "predictions_train": "predictions_train.csv",
            "traces": "traces",
        },
    }
    if cfg.test_dataset:
        test = io.read_dataset(cfg.test_dataset)
        rows, *vals = _prediction_rows(p, m, test.instances, cfg.e0_li, cfg.e0_co)
        io.write_csv(out / "predictions_test.csv", PRED_HEADER, rows)
        summary["metrics"]["test"] = _metrics(*vals)
        summary["artifacts"]["predictions_test"] = "predictions_test.csv"
    (out / "summary.json").write_text(io.dumps(summary) + "\n", encoding="utf-8")
    return summary


# eval -----------------------------------------------------------------------


def cmd_eval(args) -> int:
    p, m = io.read_model(args.model)
    ds = io.read_dataset(args.dataset)
    if ds.n_sites != p.n_sites:
        raise InputError(f"model has {p.n_sites} sites, dataset has {ds.n_sites}")
    cfg = io.read_run_config(args.config) if args.config else io.RunConfig()
    rows, *vals = _prediction_rows(p, m, ds.instances, cfg.e0_li, cfg.e0_co)
    met = _metrics(*vals)
    text = io.dumps(met)
    if args.out:
        out = _out_dir(args.out)
        io.write_csv(out / "predictions.csv", PRED_HEADER, rows)
        (out / "metrics.json").write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


# sweep ----------------------------------------------------------------------


def cmd_sweep(args) -> int:
    if args.preset:
        configs = SWEEP_PRESETS[args.preset]()
    elif args.configs:
        configs = [Configuration.parse(t) for t in args.configs.split(",")]
    else:
        raise InputError("give --preset or --configs")
    n = configs[0].n_sites
    if any(c.n_sites != n for c in configs):
        raise InputError("all sweep configurations need the same site count")
    if n % 2:
        raise InputError(f"the measurement operator needs an even site count, got {n}")
    if args.grid < 1:
        raise InputError("--grid must be at least 1")
    res = sensitivity_sweep(configs, args.grid)
    rows = [
        (k, res.names[k], res.grid[a], c.to_signs(), res.table[k, a, ci])
        for k in range(len(res.names))
        for a in range(res.grid.size)
        for ci, c in enumerate(configs)
    ]
    out = Path(args.out)
    io.write_csv(out, ["param_index", "param", "angle", "config", "energy"], rows)
    const = res.constant_params
    report = {
        "n_params": len(res.names),
        "grid": int(res.grid.size),
        "configs": [c.to_signs() for c in configs],
        "constant_params": const,
        "constant_names": [res.names[k] for k in const],
        "constant_values": [list(v) for v in res.constant_values()],
    }
    (out.parent / (out.stem + "_constants.json")).write_text(io.dumps(report) + "\n", encoding="utf-8")
    print(f"{len(const)} constant parameters of {len(res.names)}: "
          + ", ".join(res.names[k] for k in const))
    return EXIT_OK


# report ---------------------------------------------------------------------


def cmd_report(args) -> int:
    run = Path(args.run_dir)
    needed = ["rounds.csv", "predictions_train.csv", "moment_histograms.csv"]
    missing = [f for f in needed if not (run / f).is_file()]
    if missing:
        raise InputError(f"{run}: missing {', '.join(missing)}")
    out = _out_dir(args.out) if args.out else run
    rounds = io.read_csv(run / "rounds.csv")
    preds = io.read_csv(run / "predictions_train.csv")
    hist = io.read_csv(run / "moment_histograms.csv")

    cost_rows = [(int(r["round"]), float(r["cost_after"]), int(r["set_size"])) for r in rounds]
    io.write_csv(out / "report_cost_per_round.csv", ["round", "cost", "set_size"], cost_rows)
    scatter = [(r["id"], float(r["energy"]), float(r["predicted"])) for r in preds]
    io.write_csv(out / "report_scatter_train.csv", ["id", "energy", "predicted"], scatter)
    by_round: dict[int, dict[str, int]] = {}
    for r in hist:
        by_round.setdefault(int(r["round"]), {})[r["moment"]] = int(r["count"])
    hist_rows = []
    for rnd, counts in sorted(by_round.items()):
        total = sum(counts.values()) or 1
        hist_rows += [(rnd, k, v, v / total) for k, v in counts.items()]
    io.write_csv(out / "report_moment_probability.csv", ["round", "moment", "count", "probability"], hist_rows)

    if args.plot:
        (out / "cost_per_round.svg").write_text(io.svg_line(
            [c[0] for c in cost_rows], [c[1] for c in cost_rows],
            "cost after each round", "round", "RMSE (eV/cation)"), encoding="utf-8")
        (out / "scatter_train.svg").write_text(io.svg_scatter(
            [s[1] for s in scatter], [s[2] for s in scatter],
            "training set", "oracle energy (eV/cation)", "model energy (eV/cation)"), encoding="utf-8")
        test_csv = run / "predictions_test.csv"
        if test_csv.is_file():
            tp = io.read_csv(test_csv)
            (out / "scatter_test.svg").write_text(io.svg_scatter(
                [float(r["energy"]) for r in tp], [float(r["predicted"]) for r in tp],
                "test set", "oracle energy (eV/cation)", "model energy (eV/cation)"), encoding="utf-8")
        for rnd in sorted({min(by_round), max(by_round)}):
            counts = by_round[rnd]
            total = sum(counts.values()) or 1
            (out / f"moments_round{rnd:02d}.svg").write_text(io.svg_histogram(
                list(counts), [v / total for v in counts.values()],
                f"Co moments, round {rnd}", "moment", "probability"), encoding="utf-8")
    print(f"report written to {out}")
    return EXIT_OK


# entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qclattice", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic dataset")
    g.add_argument("--n-sites", type=int, required=True)
    g.add_argument("--count", default="all", help="'all' or a number of distinct random configurations")
    g.add_argument("--anomaly-rate", type=float, default=None)
    g.add_argument("--inject", type=int, default=0, help="forced metastable duplicates to append")
    g.add_argument("--exclude", help="dataset whose configurations must not be drawn")
    g.add_argument("--id-prefix", default="s")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--config", help="run config supplying oracle settings")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train the circuit model with anomaly treatment")
    t.add_argument("dataset")
    t.add_argument("--config")
    t.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a model on a dataset")
    e.add_argument("model")
    e.add_argument("dataset")
    e.add_argument("--config")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="one-at-a-time angle sensitivity sweep")
    s.add_argument("--preset", choices=sorted(SWEEP_PRESETS))
    s.add_argument("--configs", help="comma-separated configurations, e.g. '+--+,-+-+'")
    s.add_argument("--grid", type=int, default=64)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="tables and plots from a training run")
    r.add_argument("run_dir")
    r.add_argument("--out")
    r.add_argument("--plot", action="store_true")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except OracleError as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except OptimizationError as exc:
        print(f"optimisation error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, io.FormatError, ConfigurationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
