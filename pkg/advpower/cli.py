# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

"""Command-line front end: generate, train, attack, transfer, report and verify.

Output layout under --out::

    dataset/<precoder>/dataset.csv, dataset.meta.json, dataset.gains_{a,b}.npy
    models/<arch>_<precoder>_<mode>/cell<j>.ckpt, history.csv, train_meta.json
    attacks/<arch>_<precoder>_<mode>/attack_report.csv, report_meta.json, adversarial/
    transfer/<surrogate>_to_<victim>_<precoder>/transfer_report.csv, report_meta.json
    report/whitebox_standard.csv, whitebox_adversarial.csv, blackbox.csv, se_<arch>_<precoder>/

Every output directory also gets resolved_config.json. Exit codes: 0 success,
1 usage or configuration error, 2 data error, 3 numerical failure.
"""

from glob import glob
import json
import os

import click
import numpy as np
import pandas as pd

from . import helpers
from .attacks import ATTACK_KINDS, check_ball, evaluate_attack
from .channel import PRECODERS
from .dataset import (
    DatasetMeta,
    PowerDataset,
    generate_dataset,
    normalization_stats,
    split,
)
from .defense import AdvDataset, adversarial_train, generate_adv_dataset
from .evalreport import (
    emit_report,
    power_sources,
    read_report,
    sum_se_cdf,
    transfer_eval,
)
from .external.console import ReportRenderer
from .neuralnet import ModelParams, train_cells
from .runconfig import RunConfig
from .utils import (
    BudgetViolationError,
    CheckpointError,
    DataError,
    InvalidConfigError,
    InvalidDatasetError,
    MissingInputError,
    NumericalError,
)
from .version import __version__

ARCH_CHOICES = ("m1", "m2")
MODES = ("standard", "adversarial")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


def _parse_eps(ctx, param, value):
    if value is None:
        return None
    try:
        eps = tuple(float(v) for v in value.split(",") if v.strip())
    except ValueError:
        raise click.BadParameter(
            f"expected a comma-separated list of numbers, got '{value}'."
        )
    if len(eps) == 0:
        raise click.BadParameter("expected at least one epsilon.")
    return eps


def _write_json(path, data):
    with open(path, "w") as f:
        json.dump(data, f, indent=1, sort_keys=True)
        f.write("\n")


def _write_resolved(directory, run, command, **options):
    os.makedirs(directory, exist_ok=True)
    _write_json(
        os.path.join(directory, "resolved_config.json"),
        {
            "command": command,
            "options": options,
            "config": run.to_dict(),
            "version": __version__,
            "code_hash": helpers._code_version_hash(),
        },
    )


def _dataset_path(run, precoder):
    return os.path.join(run.paths.out, "dataset", precoder, "dataset.csv")


def _meta_path(dataset_path):
    return os.path.splitext(dataset_path)[0] + ".meta.json"


def _model_tag(arch, precoder, mode):
    return f"{arch}_{precoder}_{mode}"


def _model_dir(run, arch, precoder, mode):
    return os.path.join(run.paths.out, "models", _model_tag(arch, precoder, mode))


def _has_models(run, arch, precoder, mode):
    directory = _model_dir(run, arch, precoder, mode)
    return all(
        os.path.exists(os.path.join(directory, f"cell{j}.ckpt"))
        for j in range(run.network.n_cells)
    )


def _load_splits(run, precoder, load_gains=False):
    """Dataset, its meta and the train, validation and test splits."""
    path = _dataset_path(run, precoder)
    if not os.path.exists(path):
        raise MissingInputError(
            f"No {precoder} dataset at {path}; run 'advpower generate' first."
        )
    dataset = PowerDataset.from_csv(path, load_gains=load_gains)
    meta = DatasetMeta.from_json(_meta_path(path))
    if meta.config_hash != run.network.config_hash():
        raise InvalidDatasetError(
            f"{path} was generated with a different network config."
        )
    return (
        dataset,
        meta,
        dataset.select_ids(meta.train_ids),
        dataset.select_ids(meta.val_ids),
        dataset.select_ids(meta.test_ids),
    )


def _load_models(run, arch, precoder, mode):
    directory = _model_dir(run, arch, precoder, mode)
    models = []
    for j in range(run.network.n_cells):
        path = os.path.join(directory, f"cell{j}.ckpt")
        if not os.path.exists(path):
            raise MissingInputError(
                f"Missing checkpoint {path}; run 'advpower train --arch {arch} "
                f"--precoder {precoder} --mode {mode}' first."
            )
        model = ModelParams.from_checkpoint(path)
        if model.arch != arch.upper():
            raise CheckpointError(
                f"{path} holds a {model.arch} model, expected {arch.upper()}."
            )
        if model.cell_index != j:
            raise CheckpointError(
                f"{path} holds the model of cell {model.cell_index}, expected {j}."
            )
        if model.config_hash != run.network.config_hash():
            raise CheckpointError(f"{path} was trained for a different network config.")
        models.append(model)
    return models


def _attack_grid(run, kinds, epsilons):
    kinds = kinds or run.attack.kinds
    epsilons = epsilons or run.attack.epsilons
    return [run.attack_config(kind, eps) for kind in kinds for eps in epsilons]


def _render(frames, title):
    return ReportRenderer().render(
        pd.concat(frames, ignore_index=True), title=title, only_aggregate=True
    )


def common_options(func):
    """--config, --seed and --out, shared by every command."""
    func = click.option(
        "--out",
        type=click.Path(file_okay=False),
        default=None,
        help="Output root, overrides paths.out of the config.",
    )(func)
    func = click.option(
        "--seed", type=int, default=None, help="Root seed, overrides the config."
    )(func)
    func = click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False),
        required=True,
        help="JSON run configuration.",
    )(func)
    return func


def _run_config(config_path, seed, out):
    return RunConfig.load(config_path).override(seed=seed, out=out)


@click.group()
@click.option(
    "-q", "--quiet", is_flag=True, help="Disable progress bars and the report banner."
)
@click.version_option(__version__, prog_name="advpower")
@click.pass_context
def cli(ctx, quiet):
    """Adversarial attacks on DNN-based downlink power allocation."""
    ctx.obj = {"quiet": quiet}


@cli.command()
@common_options
@click.option(
    "--precoder", type=click.Choice(PRECODERS), default="mr", show_default=True
)
@click.option(
    "--verify/--no-verify",
    "run_verify",
    default=False,
    help="Scan the written dataset for invariant violations.",
)
@click.pass_obj
def generate(obj, config_path, seed, out, precoder, run_verify):
    """Generate the labeled dataset and its train/validation/test split."""
    run = _run_config(config_path, seed, out)
    path = _dataset_path(run, precoder)
    _write_resolved(os.path.dirname(path), run, "generate", precoder=precoder)

    dataset = generate_dataset(
        run.network,
        run.dataset.n,
        precoder,
        run.sub_seed("dataset"),
        max_regen_rate=run.dataset.max_regen_rate,
        disable_tqdm=obj["quiet"],
    )
    train, val, test = split(dataset, run.dataset.fractions, run.sub_seed("split"))
    meta = DatasetMeta(
        config_hash=run.network.config_hash(),
        dataset_hash=dataset.dataset_hash(),
        precoder=precoder,
        seed=run.seed,
        train_ids=train.ids.tolist(),
        val_ids=val.ids.tolist(),
        test_ids=test.ids.tolist(),
        stats=normalization_stats(train),
    )
    dataset.to_csv(path)
    meta.to_json(_meta_path(path))
    click.echo(
        f"dataset {meta.dataset_hash}: {meta.n_train}/{meta.n_val}/{meta.n_test} "
        f"records written to {path}"
    )
    if run_verify:
        _verify_dataset(path)
        click.echo(f"verified {path}")


@cli.command()
@common_options
@click.option("--arch", type=click.Choice(ARCH_CHOICES), required=True)
@click.option(
    "--precoder", type=click.Choice(PRECODERS), default="mr", show_default=True
)
@click.option(
    "--mode", type=click.Choice(MODES), default="standard", show_default=True
)
@click.option(
    "--eps",
    "epsilon",
    type=float,
    default=None,
    help="PGDM budget of adversarial training, defaults to defense.epsilon.",
)
@click.pass_obj
def train(obj, config_path, seed, out, arch, precoder, mode, epsilon):
    """Train the per-cell models, standard or adversarial."""
    run = _run_config(config_path, seed, out)
    _, meta, train_set, val_set, _ = _load_splits(run, precoder)
    tc = run.train_config()
    L = run.network.n_cells
    info = {
        "arch": arch,
        "precoder": precoder,
        "mode": mode,
        "config_hash": meta.config_hash,
        "dataset_hash": meta.dataset_hash,
        "stats_hash": meta.stats.stats_hash(),
    }

    if mode == "standard":
        directory = _model_dir(run, arch, precoder, mode)
        _write_resolved(
            directory, run, "train", arch=arch, precoder=precoder, mode=mode
        )
        models, histories = train_cells(
            arch,
            run.network,
            meta.stats,
            [(train_set.positions, train_set.cell_targets(j)) for j in range(L)],
            [(val_set.positions, val_set.cell_targets(j)) for j in range(L)],
            tc,
            disable_tqdm=obj["quiet"],
        )
    else:
        epsilon = run.defense.epsilon if epsilon is None else epsilon
        cfg = run.attack_config("pgdm", epsilon)
        source = _load_models(run, arch, precoder, "standard")
        directory = _model_dir(run, arch, precoder, mode)
        _write_resolved(
            directory,
            run,
            "train",
            arch=arch,
            precoder=precoder,
            mode=mode,
            epsilon=epsilon,
        )
        adv = generate_adv_dataset(source, train_set, cfg, disable_tqdm=obj["quiet"])
        adv_val = generate_adv_dataset(source, val_set, cfg, disable_tqdm=obj["quiet"])
        adv.to_csv(directory, prefix="adv_train")
        adv_val.to_csv(directory, prefix="adv_val")
        models, histories = adversarial_train(
            adv, adv_val, arch, run.network, meta.stats, tc, disable_tqdm=obj["quiet"]
        )
        info.update(epsilon=epsilon, source_models=adv.provenance["source_models"])

    for j, model in enumerate(models):
        model.to_checkpoint(os.path.join(directory, f"cell{j}.ckpt"))
    pd.concat(histories, ignore_index=True).to_csv(
        os.path.join(directory, "history.csv"), index=False
    )
    info["best_val_loss"] = [float(h["best_val_loss"].iloc[-1]) for h in histories]
    info["epochs"] = [int(h["epoch"].iloc[-1]) for h in histories]
    info["model_hashes"] = [model.model_hash() for model in models]
    _write_json(os.path.join(directory, "train_meta.json"), info)
    for j, loss in enumerate(info["best_val_loss"]):
        click.echo(
            f"cell {j}: best val loss {loss:.6g} after {info['epochs'][j]} epochs"
        )


@cli.command()
@common_options
@click.option("--arch", type=click.Choice(ARCH_CHOICES), required=True)
@click.option(
    "--precoder", type=click.Choice(PRECODERS), default="mr", show_default=True
)
@click.option(
    "--mode", type=click.Choice(MODES), default="standard", show_default=True
)
@click.option(
    "--attack",
    "kinds",
    type=click.Choice(ATTACK_KINDS),
    multiple=True,
    help="Attack to run, repeatable. Defaults to attack.kinds.",
)
@click.option(
    "--eps",
    "epsilons",
    callback=_parse_eps,
    default=None,
    help="Comma-separated budgets in meters. Defaults to attack.epsilons.",
)
@click.pass_obj
def attack(obj, config_path, seed, out, arch, precoder, mode, kinds, epsilons):
    """White-box attack campaign on the test split."""
    run = _run_config(config_path, seed, out)
    grid = _attack_grid(run, kinds, epsilons)
    models = _load_models(run, arch, precoder, mode)
    _, meta, _, _, test = _load_splits(run, precoder)

    tag = _model_tag(arch, precoder, mode)
    directory = os.path.join(run.paths.out, "attacks", tag)
    _write_resolved(
        directory,
        run,
        "attack",
        arch=arch,
        precoder=precoder,
        mode=mode,
        attacks=[cfg.kind for cfg in grid],
        epsilons=[cfg.epsilon for cfg in grid],
    )
    os.makedirs(os.path.join(directory, "adversarial"), exist_ok=True)

    reports, examples = [], []
    for cfg in grid:
        report = evaluate_attack(
            models,
            test.positions,
            cfg,
            run.network,
            model_id=tag,
            disable_tqdm=obj["quiet"],
        )
        name = f"{cfg.kind}_eps{cfg.epsilon:g}.csv"
        report.adversarial_frame(ids=test.ids).to_csv(
            os.path.join(directory, "adversarial", name),
            index=False,
            float_format="%.17g",
        )
        examples.append({"file": name, "attack": cfg.kind, "epsilon": cfg.epsilon})
        reports.append(report)

    emit_report(
        directory,
        attack_reports=reports,
        meta={
            "model": tag,
            "arch": arch,
            "precoder": precoder,
            "mode": mode,
            "dataset_hash": meta.dataset_hash,
            "model_hashes": [model.model_hash() for model in models],
            "n_test": len(test),
            "examples": examples,
        },
    )
    click.echo(_render([r.to_dataframe() for r in reports], f"white-box {tag}"))


@cli.command()
@common_options
@click.option("--surrogate", type=click.Choice(ARCH_CHOICES), required=True)
@click.option("--victim", type=click.Choice(ARCH_CHOICES), required=True)
@click.option(
    "--precoder", type=click.Choice(PRECODERS), default="mr", show_default=True
)
@click.option(
    "--attack",
    "kinds",
    type=click.Choice(ATTACK_KINDS),
    multiple=True,
    help="Attack to run, repeatable. Defaults to attack.kinds.",
)
@click.option(
    "--eps",
    "epsilons",
    callback=_parse_eps,
    default=None,
    help="Comma-separated budgets in meters. Defaults to attack.epsilons.",
)
@click.pass_obj
def transfer(obj, config_path, seed, out, surrogate, victim, precoder, kinds, epsilons):
    """Black-box transfer from surrogate to victim models."""
    run = _run_config(config_path, seed, out)
    grid = _attack_grid(run, kinds, epsilons)
    surrogates = _load_models(run, surrogate, precoder, "standard")
    victims = _load_models(run, victim, precoder, "standard")
    _, meta, _, _, test = _load_splits(run, precoder)

    surrogate_id = _model_tag(surrogate, precoder, "standard")
    victim_id = _model_tag(victim, precoder, "standard")
    directory = os.path.join(
        run.paths.out, "transfer", f"{surrogate}_to_{victim}_{precoder}"
    )
    _write_resolved(
        directory,
        run,
        "transfer",
        surrogate=surrogate,
        victim=victim,
        precoder=precoder,
        attacks=[cfg.kind for cfg in grid],
        epsilons=[cfg.epsilon for cfg in grid],
    )
    reports = [
        transfer_eval(
            surrogates,
            victims,
            cfg,
            test.positions,
            run.network,
            surrogate_id=surrogate_id,
            victim_id=victim_id,
        )
        for cfg in grid
    ]
    emit_report(
        directory,
        transfer_reports=reports,
        meta={
            "direction": f"{surrogate}->{victim}",
            "surrogate": surrogate_id,
            "victim": victim_id,
            "surrogate_hashes": [m.model_hash() for m in surrogates],
            "victim_hashes": [m.model_hash() for m in victims],
            "precoder": precoder,
            "dataset_hash": meta.dataset_hash,
            "n_test": len(test),
        },
    )
    click.echo(
        _render(
            [r.to_dataframe() for r in reports], f"black-box {surrogate}->{victim}"
        )
    )


def _collect(pattern, filename, column):
    frames = []
    for directory in sorted(glob(pattern)):
        path = os.path.join(directory, filename)
        if os.path.exists(path):
            df = read_report(path)
            df.insert(0, column, os.path.basename(directory))
            frames.append(df)
    return pd.concat(frames, ignore_index=True) if frames else None


@cli.command()
@common_options
@click.pass_obj
def report(obj, config_path, seed, out):
    """Consolidate attack and transfer reports and build sum-SE CDFs."""
    run = _run_config(config_path, seed, out)
    root = run.paths.out
    tables = {}
    for mode in MODES:
        df = _collect(
            os.path.join(root, "attacks", f"*_{mode}"), "attack_report.csv", "model"
        )
        if df is not None:
            tables[f"whitebox_{mode}.csv"] = df
    df = _collect(os.path.join(root, "transfer", "*"), "transfer_report.csv", "run")
    if df is not None:
        tables["blackbox.csv"] = df

    se_runs = [
        (arch, precoder)
        for arch in ARCH_CHOICES
        for precoder in PRECODERS
        if _has_models(run, arch, precoder, "standard")
        and os.path.exists(_dataset_path(run, precoder))
    ]
    if not tables and not se_runs:
        raise MissingInputError(f"No attack, transfer or model outputs under {root}.")

    report_dir = os.path.join(root, "report")
    _write_resolved(report_dir, run, "report")
    renderer = ReportRenderer()
    if not obj["quiet"]:
        click.echo(renderer.render_preamble())
    for name in sorted(tables):
        tables[name].to_csv(os.path.join(report_dir, name), index=False)
        click.echo(renderer.render(tables[name], title=name, only_aggregate=True))

    se_cfg = run.se_config()
    cfg = run.attack_config("pgdm", run.se.epsilon, objective=run.se.objective)
    for arch, precoder in se_runs:
        _, meta, _, _, test = _load_splits(run, precoder, load_gains=True)
        std = _load_models(run, arch, precoder, "standard")
        adv = (
            _load_models(run, arch, precoder, "adversarial")
            if _has_models(run, arch, precoder, "adversarial")
            else None
        )
        cdfs = sum_se_cdf(test, power_sources(test, std, cfg, adv_models=adv), se_cfg)
        emit_report(
            os.path.join(report_dir, f"se_{arch}_{precoder}"),
            cdfs=cdfs,
            meta={
                "arch": arch,
                "precoder": precoder,
                "dataset_hash": meta.dataset_hash,
                "attack": cfg.to_dict(),
                "se": se_cfg.to_dict(),
                "sources": sorted(cdfs),
                "medians": {
                    name: float(np.median(df["sum_se_bps_hz"]))
                    for name, df in sorted(cdfs.items())
                },
            },
        )
        click.echo(f"sum-SE CDFs of {arch} {precoder}: {', '.join(sorted(cdfs))}")


def _verify_dataset(path):
    """Reload a dataset file and check it against its meta sidecar."""
    dataset = PowerDataset.from_csv(path, load_gains=False)
    meta = DatasetMeta.from_json(_meta_path(path))
    if meta.config_hash != dataset.config.config_hash():
        raise InvalidDatasetError(f"{path} and its meta disagree on the config hash.")
    if meta.dataset_hash != dataset.dataset_hash():
        raise InvalidDatasetError(f"{path} does not match the dataset hash in its meta.")
    parts = [set(meta.train_ids), set(meta.val_ids), set(meta.test_ids)]
    if sum(len(p) for p in parts) != len(dataset) or set.union(*parts) != set(
        dataset.ids.tolist()
    ):
        raise InvalidDatasetError(f"The split of {path} is not disjoint and exhaustive.")
    if meta.stats != normalization_stats(dataset.select_ids(meta.train_ids)):
        raise InvalidDatasetError(
            f"Normalization stats of {path} differ from its train split."
        )
    return dataset


def _verify_examples(run, directory):
    """Check persisted white-box examples against their epsilon balls."""
    with open(os.path.join(directory, "report_meta.json")) as f:
        meta = json.load(f)
    dataset = PowerDataset.from_csv(
        _dataset_path(run, meta["precoder"]), load_gains=False
    )
    for example in meta["examples"]:
        df = pd.read_csv(
            os.path.join(directory, "adversarial", example["file"]),
            float_precision="round_trip",
        )
        columns = [c for c in df.columns if c.startswith("x_")]
        for _, group in df.groupby("cell"):
            clean = dataset.select_ids(group["id"])
            check_ball(group[columns].to_numpy(), clean.positions, example["epsilon"])
    return len(meta["examples"])


def _verify_adv_training(run, directory):
    """Check stored adversarial training files against their epsilon balls."""
    with open(os.path.join(directory, "train_meta.json")) as f:
        meta = json.load(f)
    dataset = PowerDataset.from_csv(
        _dataset_path(run, meta["precoder"]), load_gains=False
    )
    for prefix in ("adv_train", "adv_val"):
        paths = [
            os.path.join(directory, f"{prefix}_cell{j}.csv")
            for j in range(dataset.config.n_cells)
        ]
        first = PowerDataset.from_csv(paths[0], load_gains=False)
        adv = AdvDataset.from_csv(dataset.select_ids(first.ids), paths)
        adv.check_budget()


@cli.command()
@common_options
@click.pass_obj
def verify(obj, config_path, seed, out):
    """Scan datasets and persisted adversarial examples for invariant violations."""
    run = _run_config(config_path, seed, out)
    root = run.paths.out
    checked = 0
    for path in sorted(glob(os.path.join(root, "dataset", "*", "dataset.csv"))):
        _verify_dataset(path)
        click.echo(f"ok  {path}")
        checked += 1
    pattern = os.path.join(root, "attacks", "*", "report_meta.json")
    for meta_path in sorted(glob(pattern)):
        n = _verify_examples(run, os.path.dirname(meta_path))
        click.echo(f"ok  {os.path.dirname(meta_path)} ({n} example files)")
        checked += 1
    for directory in sorted(glob(os.path.join(root, "models", "*_adversarial"))):
        _verify_adv_training(run, directory)
        click.echo(f"ok  {directory}")
        checked += 1
    if checked == 0:
        raise MissingInputError(f"Nothing to verify under {root}.")


def main(argv=None):
    """Run the CLI and map errors to exit codes.

    Arguments:
        argv (list, optional): arguments, defaults to sys.argv[1:]

    Returns:
        (int): exit code
    """
    try:
        cli.main(args=argv, prog_name="advpower", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except click.Abort:
        click.echo("Aborted!", err=True)
        return EXIT_USAGE
    except InvalidConfigError as e:
        click.echo(f"Error: {e}", err=True)
        return EXIT_USAGE
    except (DataError, BudgetViolationError, OSError) as e:
        click.echo(f"Error: {e}", err=True)
        return EXIT_DATA
    except NumericalError as e:
        click.echo(f"Error: {e}", err=True)
        return EXIT_NUMERICAL
    return EXIT_OK
