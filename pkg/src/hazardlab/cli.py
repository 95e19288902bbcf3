"""``hazardlab`` command line.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
error (for example a diverging training run), 1 anything else raised by
the package.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import _kernels
from ._version import __version__
from .config import RunConfig, load_config
from .errors import ConfigError, HazardLabError, InvalidInputError, NumericError
from .fileio import (
    Checkpoint,
    load_checkpoint,
    provenance_line,
    read_cohort,
    read_csv,
    read_oracle,
    save_checkpoint,
    with_provenance,
    write_cohort,
    write_csv,
    write_oracle,
)

log = logging.getLogger("hazardlab")

EXIT_OK = 0
EXIT_CONFIG = ConfigError.exit_code
EXIT_DATA = InvalidInputError.exit_code
EXIT_NUMERIC = NumericError.exit_code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, out_required: bool = True) -> None:
    p.add_argument("--config", help="INI run configuration")
    p.add_argument("--seed", type=int, help="overrides [run] seed")
    p.add_argument("--out", required=out_required, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hazardlab", description="Discrete-time survival toolkit")
    parser.add_argument("--version", action="version", version=f"hazardlab {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-cohort", help="synthetic cohort, oracle and optional stitched bags")
    _common(p)
    p.add_argument("--count", type=int, help="overrides [cohort] subject_count")
    p.add_argument("--name", default="cohort", help="file stem (default: cohort)")
    p.add_argument("--stitched", type=int, default=0, help="also write this many stitched probe bags")

    p = sub.add_parser("train", help="fit a model, keep the best-validation snapshot")
    _common(p)
    p.add_argument("--train", required=True, help="training cohort (JSON lines)")
    p.add_argument("--val", required=True, help="validation cohort (JSON lines)")
    p.add_argument("--pretrain", help="instance-labelled cohort for encoder pretraining")
    p.add_argument("--variant", help="named ablation variant (overrides [run] variant)")
    p.add_argument("--epochs", type=int, help="overrides [train] epochs")
    p.add_argument("--no-mil", action="store_true")
    p.add_argument("--no-self-attention", action="store_true")
    p.add_argument("--no-binary-feature", action="store_true")

    p = sub.add_parser("eval", help="metrics and plot CSVs for a checkpoint on a cohort")
    _common(p)
    p.add_argument("--checkpoint", help="model checkpoint (.npz)")
    p.add_argument("--oracle", help="evaluate the generating model from this oracle file instead")
    p.add_argument("--cohort", required=True)

    p = sub.add_parser("stratify", help="risk groups, Kaplan-Meier curves and log-rank tests")
    _common(p)
    p.add_argument("--predictions", required=True, help="predictions.csv written by eval")
    p.add_argument("--search-val", help="validation predictions.csv; enables the boundary search")

    p = sub.add_parser("attention-report", help="MIL attention on instance-labelled bags")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--bags", required=True, help="bags with instance_labels (JSON lines)")

    p = sub.add_parser("preprocess-image", help="Otsu/ellipse crop of a spot image and tiling")
    p.add_argument("--in", dest="inputs", nargs="+", required=True, help="PNG file(s)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--side", type=int, default=2048)
    p.add_argument("--patch", type=int, default=256)

    p = sub.add_parser("gradcheck", help="finite-difference checks of the analytic gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--loss-cases", type=int, default=1000)
    p.add_argument("--model-draws", type=int, default=20)
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _config(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_overrides("run", seed=args.seed)
    return cfg


def _outdir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise HazardLabError(f"cannot create output directory {out}: {exc}") from None
    return out


def _read_cohort(path):
    try:
        return read_cohort(path)
    except OSError as exc:
        raise InvalidInputError(f"cannot read cohort {path}: {exc}") from None


def _outcomes(cohort):
    times = np.array([s.observed_time for s in cohort], dtype=np.float64)
    censored = np.array([s.censored for s in cohort], dtype=bool)
    return times, censored


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    from .synthcohort import generate_cohort, generate_stitched_bags

    cfg = _config(args)
    if args.count is not None:
        cfg = cfg.with_overrides("cohort", subject_count=args.count)
    ccfg = cfg.cohort()
    out = _outdir(args.out)
    subjects, oracle = generate_cohort(ccfg)
    write_cohort(out / f"{args.name}.jsonl", subjects)
    write_oracle(out / f"{args.name}.oracle.json", oracle)
    if args.stitched:
        write_cohort(out / f"{args.name}.stitched.jsonl", generate_stitched_bags(ccfg, args.stitched))
    cens = np.mean([s.censored for s in subjects])
    print(f"subjects={len(subjects)} censored_fraction={cens:.4f}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .model.training import train

    cfg = _config(args)
    if args.epochs is not None:
        cfg = cfg.with_overrides("train", epochs=args.epochs)
    if args.variant:
        cfg = cfg.with_overrides("run", variant=args.variant)
    toggles = {}
    if args.no_mil:
        toggles["use_mil"] = False
    if args.no_self_attention:
        toggles["use_self_attention"] = False
    if args.no_binary_feature:
        toggles["use_binary_feature"] = False
    if toggles:
        # recorded in the config (and its hash) and applied after any variant
        cfg = cfg.with_overrides("model", **toggles)
    mcfg = replace(cfg.model(), **toggles)
    grid = cfg.grid()
    cohort_train = _read_cohort(args.train)
    cohort_val = _read_cohort(args.val)
    pretrain = _read_cohort(args.pretrain) if args.pretrain else None
    dim = cohort_train[0].bag.shape[1]
    if dim != mcfg.feature_dim:
        raise InvalidInputError(f"cohort feature dimension {dim} != [model] feature_dim {mcfg.feature_dim}")
    out = _outdir(args.out)
    prov = provenance_line(cfg.seed, cfg.digest())
    try:
        params, tlog = train(cohort_train, cohort_val, grid, mcfg, cfg.loss(), cfg.train(),
                             pretrain_cohort=pretrain)
    except NumericError as exc:
        if exc.snapshot is not None:
            save_checkpoint(out / "checkpoint.diverged.npz", Checkpoint(exc.snapshot, mcfg, grid))
        raise
    extra = {"best_epoch": tlog.best_epoch, "best_val_loss": tlog.best_val_loss, "seed": cfg.seed,
             "config_hash": cfg.digest()}
    save_checkpoint(out / "checkpoint.npz", Checkpoint(params, mcfg, grid, tlog.binary_model, extra))
    rows = [(r["epoch"], r["train_loss"], r["val_loss"]) for r in tlog.rows]
    write_csv(out / "training_log.csv", ["epoch", "train_loss", "val_loss"], rows, prov)
    (out / "config.ini").write_text(cfg.dump(), encoding="utf-8")
    print(f"epochs={len(tlog.rows)} best_epoch={tlog.best_epoch} best_val_loss={tlog.best_val_loss!r}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .metrics import evaluate
    from .model.training import predict_arrays
    from .survival_core import risk_score
    from .synthcohort import oracle_predictions

    if bool(args.checkpoint) == bool(args.oracle):
        raise ConfigError("give exactly one of --checkpoint or --oracle")
    cfg = _config(args)
    ev = cfg.evaluation()
    cohort = _read_cohort(args.cohort)
    if args.checkpoint:
        ckpt = load_checkpoint(args.checkpoint)
        grid = ckpt.grid
        _, S, risks, _ = predict_arrays(cohort, ckpt.params, ckpt.config, ckpt.binary_model, grid)
    else:
        grid = cfg.grid()
        S = oracle_predictions(cohort, read_oracle(args.oracle), grid)
        risks = np.atleast_1d(risk_score(S, grid))
    times, censored = _outcomes(cohort)
    report = evaluate(S, times, censored, grid, risks, ev.dcal_bins, ev.significance, ev.interpolate)
    out = _outdir(args.out)
    prov = provenance_line(cfg.seed, cfg.digest())
    (out / "metrics.txt").write_text(report.to_record(), encoding="utf-8")
    (out / "auc_over_time.csv").write_text(with_provenance(report.auc_csv(), prov), encoding="utf-8")
    header = ["id"] + [f"S_{t:g}" for t in grid.boundaries]
    write_csv(out / "survival_curves.csv", header, ([s.id, *row] for s, row in zip(cohort, S)), prov)
    write_csv(out / "predictions.csv", ["id", "risk", "observed_time", "censored"],
              ((s.id, r, s.observed_time, s.censored) for s, r in zip(cohort, risks)), prov)
    sys.stdout.write(report.to_record())
    return EXIT_OK


def _read_predictions(path):
    try:
        header, rows = read_csv(path)
    except OSError as exc:
        raise InvalidInputError(f"cannot read predictions {path}: {exc}") from None
    need = ["risk", "observed_time", "censored"]
    if any(h not in header for h in need):
        raise InvalidInputError(f"{path}: expected columns {need}")
    cols = [header.index(h) for h in need]
    try:
        data = np.array([[float(r[c]) for c in cols] for r in rows if r])
    except (ValueError, IndexError) as exc:
        raise InvalidInputError(f"{path}: {exc}") from None
    if data.size == 0:
        raise InvalidInputError(f"{path}: no rows")
    return data[:, 0], data[:, 1], data[:, 2] != 0


def cmd_stratify(args) -> int:
    from .metrics import km_csv
    from .risk_strata import search_boundaries, search_log_csv, stratify_and_test

    cfg = _config(args)
    risks, times, censored = _read_predictions(args.predictions)
    out = _outdir(args.out)
    prov = provenance_line(cfg.seed, cfg.digest())
    if args.search_val:
        vr, vt, vc = _read_predictions(args.search_val)
        bounds, entries = search_boundaries(risks, (times, censored), vr, (vt, vc), cfg.search())
        (out / "search_log.csv").write_text(with_provenance(search_log_csv(entries), prov), encoding="utf-8")
    else:
        bounds = cfg.boundaries()
    rep = stratify_and_test(risks, times, censored, bounds, cfg.logrank())
    lines = [f"limits={','.join(repr(x) for x in bounds.limits)}",
             f"group_sizes={','.join(str(n) for n in rep.group_sizes)}",
             f"adjacent_pvalues={','.join(repr(p) for p in rep.adjacent_pvalues)}",
             f"passes={rep.passes}",
             f"tests={len(rep.adjacent_pvalues)}",
             f"empty_groups={','.join(str(g) for g in rep.empty_groups)}"]
    (out / "strata.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    km_rows = []
    for g, curve in enumerate(rep.km_curves):
        body = km_csv(curve)
        (out / f"km_group{g}.csv").write_text(with_provenance(body, prov), encoding="utf-8")
        if len(curve.event_times) or rep.group_sizes[g]:
            km_rows.append((g, 0.0, 1.0))
            km_rows.extend((g, float(t), float(s)) for t, s in zip(curve.event_times, curve.survival))
    write_csv(out / "km_curves.csv", ["group", "time", "survival"], km_rows, prov)
    print("\n".join(lines))
    return EXIT_OK


def cmd_attention(args) -> int:
    from scipy.stats import mannwhitneyu

    from .model.training import predict_arrays

    cfg = _config(args)
    ckpt = load_checkpoint(args.checkpoint)
    bags = _read_cohort(args.bags)
    missing = [s.id for s in bags if s.instance_labels is None]
    if missing:
        raise InvalidInputError(f"bags without instance_labels: {', '.join(missing[:5])}")
    _, _, _, att = predict_arrays(bags, ckpt.params, ckpt.config, ckpt.binary_model, ckpt.grid)
    rows, mal, ben = [], [], []
    for s, a in zip(bags, att):
        for i, (lab, w) in enumerate(zip(s.instance_labels, a)):
            rows.append((s.id, i, bool(lab), float(w)))
            (mal if lab else ben).append(float(w))
    if not mal or not ben:
        raise InvalidInputError("need both malignant and benign instances")
    test = mannwhitneyu(mal, ben, alternative="greater")
    out = _outdir(args.out)
    prov = provenance_line(cfg.seed, cfg.digest())
    write_csv(out / "attention.csv", ["subject", "instance", "label", "weight"], rows, prov)
    summary = [f"malignant_mean={np.mean(mal)!r}", f"benign_mean={np.mean(ben)!r}",
               f"malignant_count={len(mal)}", f"benign_count={len(ben)}",
               f"mannwhitney_u={float(test.statistic)!r}", f"pvalue_one_sided={float(test.pvalue)!r}"]
    (out / "attention_summary.txt").write_text("\n".join(summary) + "\n", encoding="utf-8")
    print("\n".join(summary))
    return EXIT_OK


def cmd_preprocess(args) -> int:
    from .preprocess import crop_origin, preprocess_spot, read_png, write_png

    out = _outdir(args.out_dir)
    for path in args.inputs:
        img = read_png(path)
        crop, patches, threshold, fit = preprocess_spot(img, args.side, args.patch)
        stem = Path(path).stem
        target = out / stem
        target.mkdir(parents=True, exist_ok=True)
        write_png(target / "crop.png", crop)
        for i, patch in enumerate(patches):
            write_png(target / f"patch_{i:03d}.png", patch)
        x0, y0 = crop_origin(img.shape, fit.center, args.side)
        sidecar = {
            "source": str(path), "tool_version": __version__, "image_shape": list(img.shape),
            "otsu_threshold": threshold, "ellipse": fit.to_dict(), "crop_origin": [x0, y0],
            "side": args.side, "patch": args.patch, "patch_count": len(patches),
            "patch_order": "row-major",
        }
        (target / "sidecar.json").write_text(json.dumps(sidecar, indent=1) + "\n", encoding="utf-8")
        print(f"{path}: threshold={threshold} center=({fit.center[0]:.2f},{fit.center[1]:.2f}) patches={len(patches)}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .gradcheck import check_loss, check_model

    results = [
        (check_loss(cases=args.loss_cases, seed=args.seed), 1e-4),
        (check_model(draws=args.model_draws, seed=args.seed), 1e-3),
    ]
    ok = True
    for res, tol in results:
        passed = res.max_rel_error < tol
        ok &= passed
        print(f"{res.line()} tolerance={tol:g} {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NUMERIC


COMMANDS = {
    "gen-cohort": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "stratify": cmd_stratify,
    "attention-report": cmd_attention,
    "preprocess-image": cmd_preprocess,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.debug("kernel backend: %s", _kernels.backend())
    try:
        return COMMANDS[args.command](args)
    except HazardLabError as exc:
        print(f"hazardlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"hazardlab: I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
