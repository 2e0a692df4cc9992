"""Command-line pipeline: synth -> split -> train -> predict -> eval.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure
(a fit whose objective decreased beyond tolerance). Diagnostics go to
standard error; machine-readable output goes to files, or to standard
output for the eval commands when no output path is given.

Metrics JSON documents always carry format_version, the command name,
the seed and an echo of the resolved configuration, so results are
reproducible byte for byte from the same inputs. The LFBM_THREADS
environment variable caps worker threads used for repeated runs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .core import DataError, HyperParams, NumericError, validate
from .metrics import auc as auc_metric
from .metrics import nmi as nmi_metric
from .metrics import reconstruct, roc
from .optim import AblationMode, fit, predict
from .synth import BlockSpec, generate, split, three_cluster_spec
from . import io as lfbm_io

FORMAT_VERSION = lfbm_io.FORMAT_VERSION

_ABLATE_MODES = (AblationMode.FULL, AblationMode.FACTOR_ONLY, AblationMode.BLOCK_ONLY)


class UsageError(Exception):
    """Bad flags or flag combinations; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings for a training or ablation run."""

    hyper: HyperParams
    data_path: str
    side_path: Optional[str] = None
    out_dir: Optional[str] = None
    holdout_frac: float = 0.1
    repeats: int = 1
    mode: AblationMode = AblationMode.FULL
    emit_roc: bool = False
    emit_reconstruction: bool = False

    def __post_init__(self):
        if not self.data_path:
            raise UsageError("a data path is required")
        if self.repeats < 1:
            raise UsageError("repeats must be >= 1")
        if self.emit_reconstruction and not self.out_dir:
            raise UsageError("--emit-reconstruction requires --outdir")


def _add_hyper_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--d", type=int, default=2, help="latent feature dimension")
    p.add_argument("--k", type=int, default=3, help="number of latent clusters")
    p.add_argument("--eta0", type=float, default=0.2, help="initial step size")
    p.add_argument("--lambda-u", type=float, default=1.0, dest="lambda_u")
    p.add_argument("--lambda-v", type=float, default=1.0, dest="lambda_v")
    p.add_argument("--lambda-c", type=float, default=1.0, dest="lambda_c")
    p.add_argument("--lambda-beta", type=float, default=1.0, dest="lambda_beta")
    p.add_argument("--armijo-shrink", type=float, default=0.5, dest="armijo_shrink")
    p.add_argument("--armijo-slope", type=float, default=0.01, dest="armijo_slope")
    p.add_argument("--max-sweeps", type=int, default=50, dest="max_sweeps")
    p.add_argument("--rel-tol", type=float, default=1e-6, dest="rel_tol")


def _hyper_from_args(args) -> HyperParams:
    try:
        return HyperParams(
            d=args.d,
            k=args.k,
            lambda_u=args.lambda_u,
            lambda_v=args.lambda_v,
            lambda_c=args.lambda_c,
            lambda_beta=args.lambda_beta,
            eta0=args.eta0,
            armijo_shrink=args.armijo_shrink,
            armijo_slope=args.armijo_slope,
            max_sweeps=args.max_sweeps,
            rel_tol=args.rel_tol,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc))


def _config_echo(args) -> dict:
    skip = {"func"}
    echo = {}
    for key in sorted(vars(args)):
        if key in skip:
            continue
        value = vars(args)[key]
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, AblationMode):
            value = value.value
        echo[key] = value
    return echo


def _metrics_doc(args, command: str) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "command": command,
        "seed": getattr(args, "seed", None),
        "config": _config_echo(args),
    }


def _emit_json(doc: dict, out: Optional[str]) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _parse_sizes(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"bad --sizes value {text!r}, expected e.g. 67,67,66")


def _parse_matrix(text: str) -> np.ndarray:
    try:
        rows = [[float(x) for x in row.split(",")] for row in text.split(";")]
        return np.asarray(rows, dtype=np.float64)
    except ValueError:
        raise UsageError(
            f"bad --link-prob value {text!r}, expected e.g. '1,0;0,1' (rows ; separated)"
        )


def _block_spec_from_args(args) -> BlockSpec:
    if args.preset == "paper-3cluster":
        return three_cluster_spec(noise=args.noise, seed=args.seed)
    if args.preset is not None:
        raise UsageError(f"unknown preset {args.preset!r}")
    if not args.sizes or not args.link_prob:
        raise UsageError("provide --preset or both --sizes and --link-prob")
    try:
        return BlockSpec(
            sizes=_parse_sizes(args.sizes),
            link_prob=_parse_matrix(args.link_prob),
            noise=args.noise,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc))


def cmd_synth(args) -> int:
    spec = _block_spec_from_args(args)
    data, labels = generate(spec)
    lfbm_io.write_edge_list(data, Path(args.out))
    if args.labels_out:
        lfbm_io.write_labels(labels, Path(args.labels_out))
    print(f"wrote {len(data.entries)} entries over {data.n} objects", file=sys.stderr)
    return 0


def cmd_split(args) -> int:
    data = lfbm_io.parse_edge_list(Path(args.data))
    result = split(data, args.holdout, args.seed)
    lfbm_io.write_edge_list(result.train, Path(args.train_out))
    from .core import RelationData

    test_rel = RelationData(n=data.n, entries=result.test, directed=True)
    lfbm_io.write_edge_list(test_rel, Path(args.test_out))
    print(
        f"train {len(result.train.entries)} entries, test {len(result.test)} entries",
        file=sys.stderr,
    )
    return 0


def _load_side(path) -> Optional[object]:
    if not path:
        return None
    return lfbm_io.read_side_info(Path(path))


def cmd_train(args) -> int:
    config = RunConfig(
        hyper=_hyper_from_args(args),
        data_path=args.data,
        side_path=args.side,
        mode=AblationMode(args.mode),
    )
    data = lfbm_io.parse_edge_list(Path(config.data_path))
    side = _load_side(config.side_path)

    def report(sweep, value):
        print(f"sweep {sweep + 1} objective {value:.10f}", file=sys.stderr)

    state, trace = fit(data, config.hyper, side=side, mode=config.mode, progress=report)
    lfbm_io.save_checkpoint(state, trace, Path(args.checkpoint_out))
    if args.labels_out:
        lfbm_io.write_labels(state.z, Path(args.labels_out))
    return 0


def cmd_predict(args) -> int:
    state, _ = lfbm_io.load_checkpoint(Path(args.checkpoint))
    pairs = lfbm_io.read_pairs(Path(args.pairs))
    side = _load_side(args.side)
    scores = predict(state, pairs, side)
    lfbm_io.write_scores(pairs, scores, Path(args.scores_out))
    return 0


def cmd_eval_auc(args) -> int:
    pairs, values = lfbm_io.read_scores(Path(args.scores))
    test = lfbm_io.parse_edge_list(Path(args.test))
    by_pair = dict(zip(pairs, values.tolist()))
    scores, labels = [], []
    for i, j, s in test.entries:
        if (i, j) not in by_pair:
            raise DataError(f"no score for test pair ({i}, {j})")
        scores.append(by_pair[(i, j)])
        labels.append(s)
    try:
        auc_value = auc_metric(scores, labels)
        roc_points = roc(scores, labels)
    except ValueError as exc:
        raise DataError(str(exc))
    doc = _metrics_doc(args, "eval-auc")
    doc["n_test"] = len(labels)
    doc["auc"] = auc_value
    doc["roc"] = [[f, t] for f, t in roc_points]
    _emit_json(doc, args.out)
    return 0


def cmd_eval_nmi(args) -> int:
    a = lfbm_io.read_labels(Path(args.labels_a))
    b = lfbm_io.read_labels(Path(args.labels_b))
    if a.size != b.size:
        raise DataError(f"label files have different lengths: {a.size} vs {b.size}")
    doc = _metrics_doc(args, "eval-nmi")
    doc["n"] = int(a.size)
    doc["nmi"] = nmi_metric(a, b)
    _emit_json(doc, args.out)
    return 0


def cmd_reconstruct(args) -> int:
    state, _ = lfbm_io.load_checkpoint(Path(args.checkpoint))
    side = _load_side(args.side)
    matrix = reconstruct(state, side)
    np.savetxt(Path(args.out), matrix, delimiter=",", fmt="%.17g")
    return 0


def _ablate_one(data, config: RunConfig, repeat: int):
    seed = config.hyper.seed + repeat
    result = split(data, config.holdout_frac, seed)
    pairs = [(i, j) for i, j, _ in result.test]
    labels = [s for _, _, s in result.test]
    hyper = replace(config.hyper, seed=seed)
    side = _load_side(config.side_path)
    out = {}
    for mode in _ABLATE_MODES:
        state, trace = fit(result.train, hyper, side=side, mode=mode)
        scores = predict(state, pairs, side)
        out[mode.value] = {
            "auc": auc_metric(scores, labels),
            "final_objective": trace.objective_per_sweep[-1],
            "sweeps": len(trace.objective_per_sweep) - 1,
            "state": state,
            "scores": scores,
            "labels": labels,
        }
    return out


def _worker_count(repeats: int) -> int:
    cap = os.environ.get("LFBM_THREADS")
    if cap is not None:
        try:
            cap_value = max(1, int(cap))
        except ValueError:
            raise UsageError(f"LFBM_THREADS must be an integer, got {cap!r}")
    else:
        cap_value = os.cpu_count() or 1
    return max(1, min(repeats, cap_value))


def cmd_ablate(args) -> int:
    config = RunConfig(
        hyper=_hyper_from_args(args),
        data_path=args.data,
        side_path=args.side,
        out_dir=args.outdir,
        holdout_frac=args.holdout,
        repeats=args.repeats,
        emit_roc=args.emit_roc,
        emit_reconstruction=args.emit_reconstruction,
    )
    data = lfbm_io.parse_edge_list(Path(config.data_path))
    workers = _worker_count(config.repeats)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(lambda r: _ablate_one(data, config, r), range(config.repeats))
            )
    else:
        results = [_ablate_one(data, config, r) for r in range(config.repeats)]

    doc = _metrics_doc(args, "ablate")
    doc["modes"] = {}
    for mode in _ABLATE_MODES:
        aucs = [res[mode.value]["auc"] for res in results]
        doc["modes"][mode.value] = {
            "mean_auc": float(np.mean(aucs)),
            "auc_per_repeat": aucs,
            "final_objective_per_repeat": [
                res[mode.value]["final_objective"] for res in results
            ],
        }
        if config.emit_roc:
            first = results[0][mode.value]
            doc["modes"][mode.value]["roc"] = [
                [f, t] for f, t in roc(first["scores"], first["labels"])
            ]
        if config.emit_reconstruction:
            out_dir = Path(config.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            matrix = reconstruct(results[0][mode.value]["state"])
            np.savetxt(
                out_dir / f"reconstruction-{mode.value}.csv",
                matrix,
                delimiter=",",
                fmt="%.17g",
            )
    doc["delta_auc_full_minus_block_only"] = (
        doc["modes"]["full"]["mean_auc"] - doc["modes"]["block-only"]["mean_auc"]
    )
    _emit_json(doc, args.out)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(
        prog="lfbm",
        description="Latent factor blockmodel: synthesis, training and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate planted-block synthetic data")
    p.add_argument("--preset", choices=["paper-3cluster"], default=None)
    p.add_argument("--sizes", default=None, help="comma-separated cluster sizes")
    p.add_argument("--link-prob", default=None, dest="link_prob",
                   help="K x K probabilities, rows ';' separated, e.g. '1,0;0,1'")
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="edge list output path")
    p.add_argument("--labels-out", default=None, dest="labels_out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="hold out a test fraction of an edge list")
    p.add_argument("--data", required=True)
    p.add_argument("--holdout", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-out", required=True, dest="train_out")
    p.add_argument("--test-out", required=True, dest="test_out")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="fit the model on a training edge list")
    p.add_argument("--data", required=True)
    p.add_argument("--side", default=None, help="optional side-information file")
    p.add_argument("--mode", choices=[m.value for m in _ABLATE_MODES], default="full")
    p.add_argument("--checkpoint-out", required=True, dest="checkpoint_out")
    p.add_argument("--labels-out", default=None, dest="labels_out",
                   help="also write the fitted cluster labels")
    _add_hyper_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score pairs with a fitted checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--pairs", required=True, help="file of i<TAB>j pairs")
    p.add_argument("--side", default=None)
    p.add_argument("--scores-out", required=True, dest="scores_out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval-auc", help="AUC/ROC of scores against labeled pairs")
    p.add_argument("--scores", required=True)
    p.add_argument("--test", required=True, help="labeled held-out edge list")
    p.add_argument("--out", default=None, help="metrics JSON path (default stdout)")
    p.set_defaults(func=cmd_eval_auc)

    p = sub.add_parser("eval-nmi", help="NMI between two label files")
    p.add_argument("labels_a")
    p.add_argument("labels_b")
    p.add_argument("--out", default=None, help="metrics JSON path (default stdout)")
    p.set_defaults(func=cmd_eval_nmi)

    p = sub.add_parser("reconstruct", help="dense probability matrix from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--side", default=None)
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("ablate", help="compare full/factor-only/block-only on one split")
    p.add_argument("--data", required=True)
    p.add_argument("--side", default=None)
    p.add_argument("--holdout", type=float, default=0.1)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--emit-roc", action="store_true", dest="emit_roc")
    p.add_argument("--emit-reconstruction", action="store_true", dest="emit_reconstruction")
    p.add_argument("--outdir", default=None, help="directory for emitted artifacts")
    p.add_argument("--out", required=True, help="comparison JSON path")
    _add_hyper_flags(p)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    try:
        return int(args.func(args) or 0)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
