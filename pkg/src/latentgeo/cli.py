"""Command-line entry point.

Exit codes: 0 success, 2 bad arguments, 3 I/O or format error, 4 training
divergence, 5 missing checkpoint.

Every command except ``report`` writes ``run_config.json`` (the fully
resolved parameters) before doing any work; ``<command> --config
run_config.json`` reruns it. Precedence: command-line flags, then the config
file, then built-in defaults. ``LATENTGEO_SEED`` replaces the default seed.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .datasets import DatasetFormatError, generate_citation_graph, generate_image_dataset, load_dataset, save_dataset
from .eval import (
    ExperimentConfig,
    evaluate_suite,
    export_report,
    label_budget_study,
    load_report,
    median_over_seeds,
    reports_of,
    run_iat_experiment,
    sweep_rank_dim,
    write_reports,
)
from .interp import InterpolationKind
from .models import CheckpointError, TrainConfig, TrainingDiverged, load_checkpoint, save_checkpoint, train
from .models.checkpoint import build_model

log = logging.getLogger("latentgeo")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DIVERGED, EXIT_NO_CHECKPOINT = 0, 2, 3, 4, 5
ALL_KINDS = [k.value for k in InterpolationKind]
IAT_CHOICES = ["none", "latent", "decode", "mlp_latent", "mlp_decode"]


class UsageError(Exception):
    pass


class MissingCheckpoint(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _optional_int(text: str):
    return None if text.lower() == "none" else int(text)


# -- parameter resolution ------------------------------------------------------


def _default_seed() -> int:
    env = os.environ.get("LATENTGEO_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"LATENTGEO_SEED must be an integer, got {env!r}") from None


def _load_config(path, command: str) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}: not valid JSON ({e.msg})") from None
    if data.get("command") not in (None, command):
        raise UsageError(f"{path} was written by '{data['command']}', not '{command}'")
    return data.get("params", {})


def _resolve(args, names, defaults: dict) -> dict:
    """Flags that were given override the config file, which overrides ``defaults``."""
    cfg = _load_config(args.config, args.command)
    out = {}
    for name in names:
        flag = getattr(args, name, None)
        if flag is not None:
            out[name] = flag
        elif name in cfg:
            out[name] = cfg[name]
        else:
            out[name] = defaults.get(name)
    return out


def _run_dir(args) -> Path:
    name = args.run_name or f"{args.command}-{_dt.datetime.now().strftime('%Y%m%d-%H%M%S-%f')}"
    path = Path(args.out) / name
    path.mkdir(parents=True, exist_ok=False)
    return path


def _write_run_config(path: Path, command: str, params: dict) -> None:
    doc = {"command": command, "version": __version__, "params": params}
    (path / "run_config.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _load_data(path):
    if path is None:
        raise UsageError("--data is required")
    if not (Path(path) / "manifest.json").exists():
        raise FileNotFoundError(f"no dataset at {path} (manifest.json missing)")
    return load_dataset(path)


def _load_ckpt(path):
    if path is None:
        raise UsageError("--checkpoint is required")
    if not Path(path).is_file():
        raise MissingCheckpoint(f"checkpoint not found: {path}")
    return load_checkpoint(path)


MODEL_KEYS = ("latent_dim", "rank", "hidden", "gcn_hidden")
TRAIN_KEYS = ("lr", "batch", "iters", "seed", "iat", "interp", "lambda_iat", "triplet_batch", "labeled_budget", "pretrain_iters", "kl_weight", "log_every")


def _model_defaults(domain: str) -> dict:
    return {"latent_dim": 32 if domain == "image" else 16, "rank": None, "hidden": 256, "gcn_hidden": 32}


def _train_defaults(domain: str, iat) -> dict:
    return TrainConfig.defaults(domain, iat=iat, seed=_default_seed()).to_dict()


def _train_config(p: dict) -> TrainConfig:
    cfg = TrainConfig(**{k: p[k] for k in TRAIN_KEYS})
    cfg.iat = None if cfg.iat == "none" else cfg.iat
    cfg.validate()
    return cfg


def _experiment(p: dict, domain: str) -> ExperimentConfig:
    return ExperimentConfig(
        domain=domain,
        latent_dim=p["latent_dim"],
        rank=p["rank"],
        hidden=p["hidden"],
        gcn_hidden=p["gcn_hidden"],
        train=_train_config(p),
        kind=p["kind"],
        n_triplets=p["triplets"],
        eval_seed=p["eval_seed"],
    )


def _abspath(p):
    return None if p is None else str(Path(p).resolve())


# -- commands ------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    names = ("kind", "seed", "objects", "angles", "size", "nodes", "stamps", "attach_exponent")
    p = _resolve(args, names, {"seed": _default_seed(), "objects": 20, "angles": 60, "size": 32, "nodes": 120, "stamps": 50, "attach_exponent": 1.0})
    if p["kind"] not in ("image", "graph"):
        raise UsageError("--kind must be 'image' or 'graph'")
    out = Path(args.out)
    if out.exists() and any(out.iterdir()):
        raise UsageError(f"{out} exists and is not empty")
    if p["kind"] == "image":
        ds = generate_image_dataset(p["objects"], p["angles"], p["seed"], p["size"])
    else:
        ds = generate_citation_graph(p["nodes"], p["stamps"], p["seed"], p["attach_exponent"])
    out.mkdir(parents=True, exist_ok=True)
    _write_run_config(out, "gen-data", p)
    save_dataset(ds, out)
    counts = {name: ds.view(name).n_samples for name in ("train", "val", "test")}
    print(f"{p['kind']} dataset: {len(ds.sequences)} sequence(s), {ds.n_samples} samples, split {counts} -> {out}")
    return EXIT_OK


def _train_params(args, ds) -> dict:
    iat_flag = args.iat if args.iat is not None else _load_config(args.config, args.command).get("iat")
    defaults = dict(_model_defaults(ds.kind), **_train_defaults(ds.kind, iat_flag))
    return _resolve(args, ("data",) + MODEL_KEYS + TRAIN_KEYS, defaults)


def cmd_train(args) -> int:
    data = args.data or _load_config(args.config, args.command).get("data")
    ds = _load_data(data)
    p = _train_params(args, ds)
    p["data"] = _abspath(data)
    tcfg = _train_config(p)
    run = _run_dir(args)
    _write_run_config(run, args.command, p)
    cfg = ExperimentConfig(ds.kind, p["latent_dim"], p["rank"], p["hidden"], p["gcn_hidden"], tcfg)
    from .eval.harness import build_model as build

    model = build(cfg, ds, tcfg.seed)
    try:
        result = train(model, ds, tcfg)
    except TrainingDiverged as e:
        _write_trace(run / "loss.csv", e.trace)
        print(f"training diverged at iteration {e.iteration}; partial trace in {run / 'loss.csv'}", file=sys.stderr)
        return EXIT_DIVERGED
    save_checkpoint(run / "model.ckpt", model, result.interp_mlp, extra={"train": tcfg.to_dict()})
    _write_trace(run / "loss.csv", result.trace)
    last = result.trace[-1]["elbo"] if result.trace else float("nan")
    print(f"trained {model.kind} for {tcfg.iters} iterations (final ELBO loss {last:.4f}) -> {run}")
    return EXIT_OK


def _write_trace(path: Path, trace: list[dict]) -> None:
    cols = ["iter", "loss", "elbo", "recon", "kl", "iat"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in trace:
            w.writerow([repr(row[c]) if c in row else "" for c in cols])


def cmd_eval(args) -> int:
    cfg = _load_config(args.config, args.command)
    default_kinds = ALL_KINDS if args.command == "compare" else None
    ckpt_path = args.checkpoint or cfg.get("checkpoint")
    model, mlp, header = _load_ckpt(ckpt_path)
    data = args.data or cfg.get("data")
    ds = _load_data(data)
    domain_kind = "norm" if ds.kind == "image" else "slerp"
    p = _resolve(args, ("kinds", "triplets", "eval_seed"), {"kinds": default_kinds or [domain_kind], "triplets": 2000, "eval_seed": 0})
    for k in p["kinds"]:
        if k not in ALL_KINDS:
            raise UsageError(f"unknown interpolation kind {k!r}")
    p.update(checkpoint=_abspath(ckpt_path), data=_abspath(data))
    run = _run_dir(args)
    _write_run_config(run, args.command, p)
    train_cfg = header.get("extra", {}).get("train", {})
    keys = {
        "dim": model.latent_dim,
        "rank": model.rank,
        "iat": train_cfg.get("iat") or "none",
        "budget": train_cfg.get("labeled_budget"),
        "seed": getattr(model, "seed", None),
    }
    reports, raw = evaluate_suite(model, ds.view("test"), p["kinds"], p["triplets"], p["eval_seed"], mlp, keys)
    write_reports(reports, {"eval": (raw, keys)}, run)
    _print_reports(reports)
    print(f"reports -> {run}")
    return EXIT_OK


def _experiment_params(args, ds, extra_names=(), extra_defaults=None) -> dict:
    iat_flag = getattr(args, "iat", None)
    defaults = dict(_model_defaults(ds.kind), **_train_defaults(ds.kind, iat_flag))
    defaults.update(kind="norm" if ds.kind == "image" else "slerp", triplets=2000, eval_seed=0, seeds=[defaults["seed"]], jobs=1)
    defaults.update(extra_defaults or {})
    names = ("data",) + MODEL_KEYS + TRAIN_KEYS + ("kind", "triplets", "eval_seed", "seeds", "jobs") + tuple(extra_names)
    return _resolve(args, names, defaults)


def _run_grid(args, runner) -> int:
    data = args.data or _load_config(args.config, args.command).get("data")
    ds = _load_data(data)
    p = _experiment_params(args, ds, *runner.param_spec(ds))
    p["data"] = _abspath(data)
    exp = _experiment(p, ds.kind)
    run = _run_dir(args)
    _write_run_config(run, args.command, p)
    cells = runner(exp, ds, p)
    reports = reports_of(cells)
    summary = median_over_seeds(reports)
    raw = {}
    for n, c in enumerate(cells):
        keys = dict(c.reports[0].keys)
        raw[f"{n:03d}"] = (c.raw, keys)
    write_reports(reports + summary, raw, run)
    _print_reports(summary)
    print(f"reports -> {run}")
    return EXIT_OK if any(r.status == "ok" for r in reports) else EXIT_DIVERGED


class _Sweep:
    @staticmethod
    def param_spec(ds):
        return ("dims", "ranks"), {"dims": [], "ranks": []}

    def __call__(self, exp, ds, p):
        if not p["dims"] and not p["ranks"]:
            raise UsageError("sweep needs --dims and/or --ranks")
        return sweep_rank_dim(exp, ds, p["dims"], p["ranks"], p["seeds"], p["jobs"])


class _IatTable:
    @staticmethod
    def param_spec(ds):
        return ("variants",), {"variants": IAT_CHOICES}

    def __call__(self, exp, ds, p):
        return run_iat_experiment(exp, ds, p["variants"], p["kind"], p["lambda_iat"], p["seeds"], p["jobs"])


class _LabelStudy:
    @staticmethod
    def param_spec(ds):
        return ("budgets",), {"budgets": [3, 5, 10, 15, 25, 30]}

    def __call__(self, exp, ds, p):
        return label_budget_study(exp, ds, p["budgets"], p["seeds"], p["jobs"])


def cmd_sweep(args) -> int:
    return _run_grid(args, _Sweep())


def cmd_iat(args) -> int:
    """Without ``--variants`` this is ``train --iat`` (default mlp_decode); with it, the variant table."""
    if args.variants is None and "variants" not in _load_config(args.config, args.command):
        if args.iat is None:
            args.iat = "mlp_decode"
        return cmd_train(args)
    return _run_grid(args, _IatTable())


def cmd_label_study(args) -> int:
    return _run_grid(args, _LabelStudy())


def cmd_report(args) -> int:
    reports = [r for path in args.inputs for r in load_report(path)]
    if args.median:
        reports = median_over_seeds([r for r in reports if r.keys.get("seed") != "median"])
    _print_reports(reports)
    if args.out:
        export_report(reports, args.out)
        print(f"written {args.out}")
    return EXIT_OK


def _print_reports(reports) -> None:
    for r in reports:
        keys = " ".join(f"{k}={v}" for k, v in r.keys.items() if v is not None)
        if r.status == "diverged":
            print(f"{keys}  DIVERGED")
            continue
        vals = " ".join(f"{m}={r.means[m]:.4g}" for m in r.metrics)
        print(f"{keys}  n={r.n_triplets} {vals}" + ("" if r.status == "ok" else f" [{r.status}]"))


# -- parser ----------------------------------------------------------------------


def _add_run_flags(p: argparse.ArgumentParser, out_required: bool = True) -> None:
    p.add_argument("--config", help="run_config.json to rerun (flags given here still win)")
    p.add_argument("--out", required=out_required, help="base output directory")
    p.add_argument("--run-name", help="subdirectory name (default: command plus timestamp)")


def _add_model_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="dataset directory")
    p.add_argument("--latent-dim", type=int)
    p.add_argument("--rank", type=_optional_int, help="rank of the posterior-mean head (default: full)")
    p.add_argument("--hidden", type=int, help="image MLP width")
    p.add_argument("--gcn-hidden", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--interp", choices=ALL_KINDS, help="interpolation used inside the IAT loss")
    p.add_argument("--lambda-iat", type=float)
    p.add_argument("--triplet-batch", type=int)
    p.add_argument("--labeled-budget", type=_optional_int)
    p.add_argument("--pretrain-iters", type=int, help="ELBO-only iterations before the IAT term switches on")
    p.add_argument("--kl-weight", type=float, help="KL multiplier in the training loss (1 is the plain ELBO)")
    p.add_argument("--log-every", type=int)


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=ALL_KINDS, help="interpolation used for evaluation")
    p.add_argument("--triplets", type=int)
    p.add_argument("--eval-seed", type=int)
    p.add_argument("--seeds", type=_int_list, help="comma-separated training seeds")
    p.add_argument("--jobs", type=int, help="parallel training processes (1 keeps runs bit-reproducible)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="latentgeo", description="Latent-space interpolation experiments.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic dataset")
    g.add_argument("--kind", choices=["image", "graph"])
    g.add_argument("--seed", type=int)
    g.add_argument("--objects", type=int)
    g.add_argument("--angles", type=int)
    g.add_argument("--size", type=int)
    g.add_argument("--nodes", type=int)
    g.add_argument("--stamps", type=int)
    g.add_argument("--attach-exponent", type=float)
    g.add_argument("--config")
    g.add_argument("--out", required=True, help="dataset directory (created)")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a model")
    _add_model_train_flags(t)
    t.add_argument("--iat", choices=IAT_CHOICES)
    _add_run_flags(t)
    t.set_defaults(func=cmd_train)

    i = sub.add_parser("iat", help="train with an IAT variant, or run the variant table with --variants")
    _add_model_train_flags(i)
    i.add_argument("--iat", choices=IAT_CHOICES[1:])
    i.add_argument("--variants", type=_str_list)
    _add_grid_flags(i)
    _add_run_flags(i)
    i.set_defaults(func=cmd_iat)

    for name, kinds_help in (("eval", "interpolation kinds"), ("compare", "interpolation kinds (default: all four)")):
        e = sub.add_parser(name, help=f"score a checkpoint on test triplets ({name})")
        e.add_argument("--checkpoint")
        e.add_argument("--data")
        e.add_argument("--kinds", type=_str_list, help=f"comma-separated {kinds_help}")
        e.add_argument("--triplets", type=int)
        e.add_argument("--eval-seed", type=int)
        _add_run_flags(e)
        e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="latent-size and rank grid")
    _add_model_train_flags(s)
    s.add_argument("--dims", type=_int_list)
    s.add_argument("--ranks", type=_int_list)
    _add_grid_flags(s)
    _add_run_flags(s)
    s.set_defaults(func=cmd_sweep, iat=None)

    ls = sub.add_parser("label-study", help="mlp_decode IAT under a per-sequence labelled budget")
    _add_model_train_flags(ls)
    ls.add_argument("--budgets", type=_int_list)
    _add_grid_flags(ls)
    _add_run_flags(ls)
    ls.set_defaults(func=cmd_label_study, iat="mlp_decode")

    r = sub.add_parser("report", help="print or merge report files")
    r.add_argument("inputs", nargs="+")
    r.add_argument("--median", action="store_true", help="collapse per-seed rows to medians")
    r.add_argument("--out", help="write merged report (.csv or .json)")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"latentgeo: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except MissingCheckpoint as e:
        print(f"latentgeo: {e}", file=sys.stderr)
        return EXIT_NO_CHECKPOINT
    except TrainingDiverged as e:
        print(f"latentgeo: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, DatasetFormatError, CheckpointError) as e:
        print(f"latentgeo: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"latentgeo: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
