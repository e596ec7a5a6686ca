"""Command-line entry point: ``netgp {simulate,distances,classify,occ,survival}``.

Every subcommand accepts ``--config FILE`` (``key = value`` lines) and
explicit flags, which override the file.  CSV outputs hold results only;
timings go to stderr so repeated runs give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from .classifier import ClassifierConfig
from .distances import KINDS, distance_matrix, spectral_kind_for
from .evaluation import CVSpec, METHODS, SCHEMES, gp_fit_predict, kernel_input, run_cv, run_occ
from .io import Dataset, DatasetError, load_dataset, read_config, save_dataset, substream
from .sim import MODELS, PA_EDGES_PER_STEP, SMALL_WORLD_RADIUS, SimDesign, gen_survival_case, simulate_classification
from .survival import SurvivalConfig, SurvivalDataset, fit_survival, kaplan_meier, survival_surface

log = logging.getLogger("netgp")

SAMPLER_KEYS = ("ns", "burn_in", "thin", "n_ess", "alpha_sigma", "beta_sigma",
                "alpha_ell", "beta_ell", "alpha_omega", "beta_omega")

DEFAULTS = {
    "seed": 0,
    "model": "sbm",
    "m": 100,
    "n": 100,
    "plus_fraction": 0.5,
    "case": "easy",
    "p0": 0.3,
    "p1": 0.7,
    "kind": "spectral-normalized",
    "kernel": "gp-lambda",
    "variant": "normalized",
    "scheme": "split",
    "train_fraction": 0.75,
    "folds": 5,
    "replicates": 1,
    "predict": "plugin",
    "rw_steps": 3,
    "rw_decay": 0.01,
    "rw_normalize": False,
    "binarize": None,
    "normal_class": None,
    "max_draws": 200,
}


def _write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def _sampler(opts, cls):
    names = {f.name for f in fields(cls)}
    kw = {k: opts[k] for k in SAMPLER_KEYS if k in names and opts.get(k) is not None}
    return cls(**kw)


def _companion(out: Path, suffix: str) -> Path:
    return out.with_name(f"{out.stem}_{suffix}{out.suffix or '.csv'}")


def cmd_simulate(o):
    rng = substream(o["seed"], "generator")
    if o["model"].startswith("survival"):
        case = o["model"].split("-", 1)[1] if "-" in o["model"] else o["case"]
        s = gen_survival_case(case, o["m"], o["n"], o["p0"], o["p1"], rng)
        ds = Dataset(s.graphs, times=s.times, groups=s.groups)
        meta = {"task": "survival", "case": case}
    else:
        design = SimDesign(o["model"], o["m"], o["n"], o["seed"], plus_fraction=o["plus_fraction"])
        graphs, labels = simulate_classification(design, rng)
        ds = Dataset(graphs, labels=labels)
        meta = {"task": "classify", "model": o["model"], "params": design.resolved_params,
                "policy": {"small_world_radius": SMALL_WORLD_RADIUS,
                           "pa_edges_per_step": PA_EDGES_PER_STEP}}
    save_dataset(ds, o["out"], dict(meta, seed=o["seed"]))


def _graph_kind(graphs, kind):
    if kind.startswith("spectral") and any(g.has_negative for g in graphs):
        return spectral_kind_for(graphs, kind.split("-", 1)[1])
    return kind


def cmd_distances(o):
    ds = load_dataset(o["dataset"])
    distance_matrix(ds.graphs, _graph_kind(ds.graphs, o["kind"])).to_csv(o["out"])


def _kernel(ds, o):
    return kernel_input(ds.graphs, o["kernel"], o["variant"], o["rw_steps"], o["rw_decay"],
                        o["rw_normalize"], o["binarize"])


def cmd_classify(o):
    ds = load_dataset(o["dataset"])
    if ds.labels is None:
        raise DatasetError(f"{o['dataset']}: classification needs labels.csv")
    spec = CVSpec(o["scheme"], o["train_fraction"], o["folds"], o["replicates"], o["seed"])
    run = gp_fit_predict(_kernel(ds, o), ds.labels, _sampler(o, ClassifierConfig), o["predict"])
    report = run_cv(spec, ds.labels, run)
    _write_rows(o["out"], report.rows())
    if report.skipped:
        print(f"skipped folds (single class in training): {report.skipped}", file=sys.stderr)
    print(f"mean accuracy {report.mean_accuracy:.4f}, runtime {report.runtime:.1f}s",
          file=sys.stderr)


def cmd_occ(o):
    ds = load_dataset(o["dataset"])
    if ds.labels is None:
        raise DatasetError(f"{o['dataset']}: OCC needs labels.csv")
    normal = o["normal_class"]
    if normal is None:
        normal = 1 if np.sum(ds.labels == 1) >= np.sum(ds.labels == -1) else -1
    res = run_occ(_kernel(ds, o), ds.labels, int(normal), _sampler(o, ClassifierConfig),
                  substream(o["seed"], "sampler"), substream(o["seed"], "split"),
                  o["train_fraction"], o["predict"])
    s = res.scores
    rows = [("index", "label", "mu", "var", "prob", "H")]
    for k, i in enumerate(res.test_idx):
        rows.append((str(i), str(int(ds.labels[i])),
                     *(repr(float(v[k])) for v in (s.mu, s.var, s.prob, s.H))))
    _write_rows(o["out"], rows)
    summary = [("score", "threshold", "split", "anomalous_side", "degenerate")]
    for name, e in res.elbows.items():
        if e is None:
            summary.append((name, "", "", "", "insufficient"))
        else:
            side = {1: "above", -1: "below", 0: ""}[res.sides[name]]
            summary.append((name, repr(e.threshold), str(e.split), side, str(e.degenerate).lower()))
    _write_rows(_companion(Path(o["out"]), "thresholds"), summary)


def cmd_survival(o):
    ds = load_dataset(o["dataset"])
    if ds.times is None:
        raise DatasetError(f"{o['dataset']}: survival needs times.csv")
    D = distance_matrix(ds.graphs, _graph_kind(ds.graphs, o["kind"]))
    data = SurvivalDataset(ds.times, D, ds.covariates, ds.groups)
    cfg = _sampler(o, SurvivalConfig)
    post = fit_survival(data, cfg, substream(o["seed"], "sampler"))
    surf = survival_surface(post, data, max_draws=o["max_draws"])
    rows = [("curve", "id", *(repr(float(t)) for t in surf.grid))]
    for i, curve in enumerate(surf.curves):
        rows.append(("subject", str(i), *(repr(float(v)) for v in curve)))
    for g, curve in surf.groups.items():
        rows.append(("group", str(g), *(repr(float(v)) for v in curve)))
    _write_rows(o["out"], rows)
    km_rows = [("group", "t", "S")]
    groups = ds.groups if ds.groups is not None else np.zeros(ds.m, int)
    for g in sorted(set(groups.tolist())):
        km = kaplan_meier(ds.times[groups == g], surf.grid)
        km_rows += [(str(g), repr(float(t)), repr(float(v))) for t, v in zip(surf.grid, km)]
    _write_rows(_companion(Path(o["out"]), "km"), km_rows)


COMMANDS = {
    "simulate": cmd_simulate,
    "distances": cmd_distances,
    "classify": cmd_classify,
    "occ": cmd_occ,
    "survival": cmd_survival,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netgp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", required=True, help="output CSV (dataset directory for simulate)")
    common.add_argument("-v", "--verbose", action="store_true")
    sampler = argparse.ArgumentParser(add_help=False)
    for key in ("ns", "burn_in", "thin", "n_ess"):
        sampler.add_argument("--" + key.replace("_", "-"), dest=key, type=int)
    for key in ("alpha_sigma", "beta_sigma", "alpha_ell", "beta_ell"):
        sampler.add_argument("--" + key.replace("_", "-"), dest=key, type=float)
    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--dataset", help="dataset directory (manifest.json, graphs/, labels or times)")
    kern = argparse.ArgumentParser(add_help=False)
    kern.add_argument("--kernel", choices=METHODS)
    kern.add_argument("--variant", choices=("laplacian", "normalized", "signed"))
    kern.add_argument("--rw-steps", dest="rw_steps", type=int)
    kern.add_argument("--rw-decay", dest="rw_decay", type=float)
    kern.add_argument("--binarize", type=float, help="edge iff |weight| > cutoff (gp-rw)")
    kern.add_argument("--predict", choices=("plugin", "mc"))
    kern.add_argument("--train-fraction", dest="train_fraction", type=float)

    s = sub.add_parser("simulate", parents=[common], help="write a simulated dataset directory")
    s.add_argument("--model", help=f"one of {', '.join(MODELS)}, survival-easy, survival-hard")
    s.add_argument("--m", type=int, help="graphs in total (per group for survival)")
    s.add_argument("--n", type=int, help="nodes per graph")
    s.add_argument("--plus-fraction", dest="plus_fraction", type=float)

    d = sub.add_parser("distances", parents=[common, data], help="pairwise graph distance CSV")
    d.add_argument("--kind", choices=KINDS)

    c = sub.add_parser("classify", parents=[common, data, kern, sampler],
                       help="cross-validated GP classification")
    c.add_argument("--scheme", choices=SCHEMES)
    c.add_argument("--folds", type=int)
    c.add_argument("--replicates", type=int)

    oc = sub.add_parser("occ", parents=[common, data, kern, sampler],
                        help="one-class anomaly scores with elbow thresholds")
    oc.add_argument("--normal-class", dest="normal_class", type=int, choices=(-1, 1))

    sv = sub.add_parser("survival", parents=[common, data, sampler],
                        help="GP survival surfaces and Kaplan-Meier curves")
    sv.add_argument("--kind", choices=KINDS)
    sv.add_argument("--max-draws", dest="max_draws", type=int)
    return p


def resolve(args) -> dict:
    opts = dict(DEFAULTS)
    if args.command == "survival":
        opts["ns"], opts["burn_in"] = 1000, 400
    if args.config:
        opts.update(read_config(args.config))
    opts.update({k: v for k, v in vars(args).items() if v is not None})
    return opts


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        opts = resolve(args)
        if args.command != "simulate" and not opts.get("dataset"):
            raise ValueError("--dataset is required")
        t0 = time.perf_counter()
        COMMANDS[args.command](opts)
        print(f"{args.command}: done in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    except (ValueError, OSError, RuntimeError, np.linalg.LinAlgError) as e:
        print(f"netgp {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
