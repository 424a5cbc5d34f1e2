"""Batch entry points. Subcommands: train, ablate, theory, mc, oracle, report.

Each experiment writes a self-contained artifact directory: result CSVs, a
summary, and a manifest with the resolved config and its hash. Exit code 0
on success; on failure a JSON error record goes to stderr and, when an
artifact directory exists already, into failure.json inside it.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    SCHEMA_VERSION,
    ConfigError,
    config_hash,
    load_config,
)
from .data import (
    ImbalanceProfile,
    LabeledDataset,
    MixtureSpec,
    circle_mixture,
    load_csv_dataset,
    make_imbalance_counts,
    sample_mixture,
    three_gaussians_1d,
    two_gaussians_1d,
)
from .mc import mc_ega_mse, mc_worst_class_failure
from .metrics import inter_intra_ratio
from .minimax import AscentConfig, MinimaxConfig, run_minimax, swap_components
from .model import TrainConfig, extract_features, save_checkpoint
from .oracle import adversarial_prior_search, bayes_class_risks
from .reports import (
    curve_csv,
    epochs_csv,
    fmt,
    summary_dict,
    trajectory_csv,
    value_table_csv,
    write_csv,
    write_json,
)
from .theory import ega_estimate_mse, prob_find_worst


def build_mixture(ds_cfg: dict) -> MixtureSpec:
    benchmark = ds_cfg["benchmark"]
    if benchmark == "two_gaussians_1d":
        return two_gaussians_1d(ds_cfg["separation"], ds_cfg["sigma"])
    if benchmark == "three_gaussians_1d":
        return three_gaussians_1d(ds_cfg["spacing"], ds_cfg["sigma"])
    return circle_mixture(ds_cfg["class_count"], ds_cfg["radius"])


def build_dataset(ds_cfg: dict):
    """Returns (dataset, mixture-or-None). CSV datasets have no oracle."""
    if ds_cfg["source"] == "csv":
        return load_csv_dataset(ds_cfg["csv_path"], ds_cfg["csv_header"]), None
    spec = build_mixture(ds_cfg)
    if ds_cfg["counts"] is not None:
        counts = np.asarray(ds_cfg["counts"], dtype=np.int64)
    elif ds_cfg["imbalance"] is not None:
        imb = ds_cfg["imbalance"]
        profile = ImbalanceProfile(imb["kind"], imb["ratio"], imb["base_count"])
        counts = make_imbalance_counts(profile, spec.class_count)
    else:
        counts = np.full(spec.class_count, 1000, dtype=np.int64)
    return sample_mixture(spec, counts, ds_cfg["seed"]), spec


def build_eval_set(spec: MixtureSpec, eval_cfg: dict) -> LabeledDataset:
    counts = np.full(spec.class_count, eval_cfg["per_class"], dtype=np.int64)
    return sample_mixture(spec, counts, eval_cfg["seed"])


def minimax_config(config: dict) -> MinimaxConfig:
    model = config["model"]
    mm = config["minimax"]
    loss = config["loss"]
    asc = config["ascent"]
    train = TrainConfig(
        learning_rate=model["learning_rate"],
        momentum=model["momentum"],
        weight_decay=model["weight_decay"],
        batch_size=model["batch_size"],
        epochs=mm["warmup_epochs"] + mm["minimax_epochs"] + mm["finetune_epochs"],
        warmup_epochs=model["lr_warmup_epochs"],
        decay_epochs=tuple(model["decay_epochs"]),
        decay_factor=model["decay_factor"],
        seed=model["seed"],
    )
    return MinimaxConfig(
        warmup_epochs=mm["warmup_epochs"],
        minimax_epochs=mm["minimax_epochs"],
        finetune_epochs=mm["finetune_epochs"],
        loss_variant=loss["variant"],
        tau=loss["tau"],
        gamma=loss["gamma"],
        drw_epoch=loss["drw_epoch"],
        ascent=AscentConfig(
            method=asc["method"],
            alpha=asc["alpha"],
            m_worst=asc["m_worst"],
            use_auto_m=asc["auto_m"],
            tie_seed=asc["tie_seed"],
        ),
        train=train,
        model_fraction=mm["model_fraction"],
        partition_seed=mm["partition_seed"],
        init_seed=model["seed"],
        architecture=model["architecture"],
        hidden_width=model["hidden_width"],
        fixed_target=None if mm["fixed_target"] is None else tuple(mm["fixed_target"]),
    )


def _reseed(config: dict, seed: int) -> dict:
    """One repetition seed drives every stochastic choice of a run."""
    out = json.loads(json.dumps(config))
    out["dataset"]["seed"] = seed
    out["model"]["seed"] = seed
    out["minimax"]["partition_seed"] = seed
    out["ascent"]["tie_seed"] = seed
    out["eval"]["seed"] = config["eval"]["seed"]  # evaluation set stays shared
    return out


def _write_manifest(out_dir: Path, config: dict) -> None:
    write_json(
        out_dir / "manifest.json",
        {
            "config": config,
            "config_hash": config_hash(config),
            "schema_version": SCHEMA_VERSION,
            "package_version": __version__,
        },
    )


def run_train(config: dict, out_dir: Path) -> None:
    dataset, spec = build_dataset(config["dataset"])
    eval_set = build_eval_set(spec, config["eval"]) if spec is not None else None
    report = run_minimax(minimax_config(config), dataset, eval_set)
    epochs_csv(report, out_dir / "epochs.csv")
    trajectory_csv(report, out_dir / "trajectory.csv")
    summary = summary_dict(report)
    if eval_set is not None:
        features = extract_features(report.params, eval_set.instances)
        ratios = inter_intra_ratio(features, eval_set.labels)
        summary["inter_intra_ratio"] = [float(v) for v in ratios]
    write_json(out_dir / "summary.json", summary)
    save_checkpoint(out_dir / "checkpoint.npz", report.params, config_hash(config), config["model"]["seed"])


def run_ablate(config: dict, out_dir: Path) -> None:
    """{TLA, TWCE} x {linear, ega} over the repetition seeds. All four cells
    of one repetition share the same dataset, partition, init and tie seeds."""
    seeds = config["ablate"]["seeds"]
    results = {key: [] for key in (("TLA", "linear"), ("TLA", "ega"), ("TWCE", "linear"), ("TWCE", "ega"))}
    for seed in seeds:
        run_cfg = _reseed(config, seed)
        dataset, spec = build_dataset(run_cfg["dataset"])
        eval_set = build_eval_set(spec, run_cfg["eval"]) if spec is not None else None
        for (variant, method), cell in swap_components(minimax_config(run_cfg)).items():
            report = run_minimax(cell, dataset, eval_set)
            cell_dir = out_dir / f"cell-{variant}-{method}" / f"seed-{seed}"
            epochs_csv(report, cell_dir / "epochs.csv")
            trajectory_csv(report, cell_dir / "trajectory.csv")
            write_json(cell_dir / "summary.json", summary_dict(report))
            worst = report.final_worst_class
            prior_val = float(report.final_prior.p[worst]) if worst is not None else None
            results[(variant, method)].append(
                [seed, report.final_worst_class_acc, prior_val, report.final_balanced_acc]
            )
    cell_rows = []
    median_rows = []
    for (variant, method), rows in results.items():
        for seed, acc, prior_val, bal in rows:
            cell_rows.append([variant, method, seed, acc, prior_val, bal])
        cols = list(zip(*[(acc, prior_val, bal) for _, acc, prior_val, bal in rows if acc is not None]))
        medians = [statistics.median(c) for c in cols] if cols else [None, None, None]
        median_rows.append([variant, method] + medians)
    write_csv(
        out_dir / "cells.csv",
        ["loss", "ascent", "seed", "worst_class_acc", "worst_class_prior_value", "balanced_acc"],
        cell_rows,
    )
    write_csv(
        out_dir / "comparison.csv",
        ["loss", "ascent", "worst_class_acc_median", "worst_class_prior_value_median", "balanced_acc_median"],
        median_rows,
    )


def run_theory(config: dict, out_dir: Path) -> None:
    t_cfg = config["theory"]
    vec = np.sort(np.asarray(t_cfg["error_vector"], dtype=np.float64))[::-1]
    m = t_cfg["m_worst"]
    p_mse = t_cfg["mse_probability"]
    if p_mse is None:
        p_mse = float(vec[0])
    failure_rows = []
    mse_rows = []
    for n in t_cfg["sample_sizes"]:
        failure_rows.append([n, 1.0 - prob_find_worst(vec, m, n)])
        mse_rows.append([n, ega_estimate_mse(p_mse, n)])
    value_table_csv(out_dir / "failure_bound.csv", failure_rows)
    value_table_csv(out_dir / "mse.csv", mse_rows)


def run_mc(config: dict, out_dir: Path) -> None:
    mc_cfg = config["mc"]
    vec = np.asarray(mc_cfg["error_vector"], dtype=np.float64)
    sorted_vec = np.sort(vec)[::-1]
    m = mc_cfg["m_worst"]
    trials = mc_cfg["trials"]
    seed = mc_cfg["master_seed"]
    p_worst = float(vec.max())
    failure_rows = []
    mse_rows = []
    for n in mc_cfg["sample_sizes"]:
        bound = 1.0 - prob_find_worst(sorted_vec, m, n)
        est = mc_worst_class_failure(vec, m, n, trials, seed)
        failure_rows.append([n, bound, est.value, est.ci_low, est.ci_high])
        exact = ega_estimate_mse(p_worst, n)
        mse_est = mc_ega_mse(p_worst, n, trials, seed)
        mse_rows.append([n, exact, mse_est.value, mse_est.ci_low, mse_est.ci_high])
    curve_csv(out_dir / "failure_curve.csv", failure_rows)
    curve_csv(out_dir / "mse_curve.csv", mse_rows)


def run_oracle(config: dict, out_dir: Path) -> None:
    ds_cfg = config["dataset"]
    if ds_cfg["source"] != "synthetic":
        raise ConfigError("oracle.search: dataset.source must be 'synthetic'")
    spec = build_mixture(ds_cfg)
    o = config["oracle"]
    result = adversarial_prior_search(
        spec,
        method=o["method"],
        resolution=o["resolution"],
        iterations=o["iterations"],
        step_scale=o["step_scale"],
        mc_samples=o["mc_samples"],
        seed=o["seed"],
    )
    risks = bayes_class_risks(spec, result.prior, mc_samples=o["mc_samples"], seed=o["seed"])
    write_json(
        out_dir / "adversarial_prior.json",
        {
            "prior": [float(v) for v in result.prior.p],
            "risk": result.risk,
            "method": result.method,
            "converged": result.converged,
            "iterations": result.iterations,
        },
    )
    write_csv(
        out_dir / "risks_at_adversarial_prior.csv",
        ["class", "risk"],
        [[y + 1, risks.estimates[y]] for y in range(risks.class_count)],
    )


def run_experiment(config: dict, out_dir=None) -> Path:
    """Dispatch one validated config; returns the artifact directory."""
    name = config.get("name", "run")
    if out_dir is None:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        out_dir = Path("artifacts") / f"{name}-{stamp}"
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(out_dir, config)
    runner = {
        "train": run_train,
        "ablate": run_ablate,
        "theory": run_theory,
        "mc": run_mc,
        "oracle": run_oracle,
    }[config["experiment"]]
    try:
        runner(config, out_dir)
    except Exception as err:
        write_json(
            out_dir / "failure.json",
            {"error": str(err), "type": type(err).__name__, "experiment": config["experiment"]},
        )
        raise
    return out_dir


def run_report(run_dir: Path) -> None:
    """Print the summary of an existing run directory."""
    run_dir = Path(run_dir)
    summary_path = run_dir / "summary.json"
    if not summary_path.exists():
        raise FileNotFoundError(f"{summary_path} not found; is this a train run directory?")
    summary = json.loads(summary_path.read_text())
    for key in sorted(summary):
        value = summary[key]
        if isinstance(value, list):
            value = "[" + ", ".join(fmt(v) for v in value) + "]"
        print(f"{key}: {value}")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minimaxclf",
        description="Minimax training experiments on imbalanced Gaussian benchmarks",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("train", "one minimax training run"),
        ("ablate", "the 4-way loss x ascent ablation grid"),
        ("theory", "analytic failure-bound and MSE tables"),
        ("mc", "Monte Carlo validation curves against the analytic values"),
        ("oracle", "adversarial prior search with the Bayes oracle"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", type=Path, default=None, help="JSON config file")
        cmd.add_argument("--preset", default=None, help="named preset to start from")
        cmd.add_argument("--seed", type=int, default=None, help="override every run seed")
        cmd.add_argument("--trials", type=int, default=None, help="override mc.trials")
        cmd.add_argument("--out", type=Path, default=None, help="artifact directory")
    rep = sub.add_parser("report", help="print the summary of a run directory")
    rep.add_argument("run_dir", type=Path)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "report":
            run_report(args.run_dir)
            return 0
        overrides = {"experiment": args.command}
        if args.trials is not None:
            overrides["mc.trials"] = args.trials
        config = load_config(args.config, preset=args.preset, overrides=overrides)
        if args.seed is not None:
            config = _reseed(config, args.seed)
            config["mc"]["master_seed"] = args.seed
            config["oracle"]["seed"] = args.seed
        out = run_experiment(config, args.out)
        print(out)
        return 0
    except ConfigError as err:
        json.dump({"error": {"kind": "config", "message": str(err)}}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except Exception as err:  # runtime failure: partial artifacts already on disk
        json.dump({"error": {"kind": type(err).__name__, "message": str(err)}}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
