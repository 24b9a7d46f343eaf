"""Stage orchestration behind the CLI: synth, augment, train, compare, report.

Each stage reads its inputs from disk, computes deterministically from
(config, seed) and writes CSV/SVG outputs plus a manifest through the atomic
writer. `train` runs one model family on one property: it sweeps that
family's hyperparameter grid over the shared folds, picks the winning
variant (argmax mean validation R-square for linear/tree, Friedman mean
rank across variants for the NN and SVR menus), then reports the winner's
per-fold test scores and serialized fold models.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataset, linear, neural, reports, svr, tree
from .config import Config
from .dataset import (AugmentPolicy, EncodingPolicy, assign_folds,
                      feature_matrix, parse_records, samples_from_csv,
                      samples_to_csv)
from .errors import DataError, UsageError
from .evalstat import (EvalReport, ScoreMatrix, bonferroni_pairwise,
                       cross_validate, friedman)
from .manifest import atomic_write, write_manifest
from .synth import DEFAULT_NOISE_STD, GroundTruthSpec, generate

FAMILIES = ("linear", "nn", "svr", "tree")


def _read_text(path: Path | str) -> str:
    return Path(path).read_text(encoding="utf-8")


def augmented_paths(out_dir: Path, prop: str) -> tuple[Path, Path]:
    return (out_dir / f"augmented_{prop}_train_val.csv",
            out_dir / f"augmented_{prop}_test.csv")


def run_synth(cfg: Config, out_path: Path, seed: int | None = None) -> dict:
    noise = dict(DEFAULT_NOISE_STD)
    noise.update(cfg.synth_noise)
    spec = GroundTruthSpec(seed=seed if seed is not None else cfg.seed,
                           noise_std=noise)
    records = generate(cfg.synth_records, spec)
    atomic_write(out_path, dataset.records_to_csv(records))
    manifest = write_manifest(
        out_path.with_suffix(".manifest.json"), "synth", spec.seed,
        cfg.snapshot(), [out_path])
    return {"records": len(records), "path": str(out_path), "manifest": manifest}


def run_validate(data_path: Path) -> dict:
    records = parse_records(_read_text(data_path))
    n_ranged = sum(len(r.ranged_elements()) for r in records)
    return {"records": len(records), "ranged_elements": n_ranged}


def run_augment(cfg: Config, data_path: Path, out_dir: Path,
                properties=None) -> dict:
    records = parse_records(_read_text(data_path))
    encoding = EncodingPolicy(one_hot=(cfg.encoding == "one_hot"))
    process_codes = {r.record_id: r.process.code for r in records}
    outputs = []
    counts = {}
    for prop in (properties or cfg.properties):
        policy = AugmentPolicy(property=prop, encoding=encoding, cap=cfg.augment_cap)
        train_val, test = dataset.augment(records, policy)
        tv_path, test_path = augmented_paths(out_dir, prop)
        atomic_write(tv_path, samples_to_csv(train_val, process_codes))
        atomic_write(test_path, samples_to_csv(test, process_codes))
        outputs.extend([tv_path, test_path])
        counts[prop] = {"train_val": len(train_val), "test": len(test)}
    write_manifest(out_dir / "augment_manifest.json", "augment", cfg.seed,
                   cfg.snapshot(), outputs)
    return counts


def _load_augmented(cfg: Config, out_dir: Path, prop: str):
    tv_path, test_path = augmented_paths(out_dir, prop)
    for p in (tv_path, test_path):
        if not p.exists():
            raise UsageError(f"augmented CSV missing: {p} (run augment first)")
    encoding = EncodingPolicy(one_hot=(cfg.encoding == "one_hot"))
    train_val = samples_from_csv(_read_text(tv_path), encoding)
    test = samples_from_csv(_read_text(test_path), encoding)
    return train_val, test


@dataclass
class VariantResult:
    label: str
    report: EvalReport
    predictors: list
    extra: dict


def _select_by_rank(variants: list[VariantResult]) -> tuple[int, dict]:
    """Friedman mean ranks over per-fold validation scores; the stats-module
    route the NN and SVR menus use. Falls back to argmax mean validation
    R-square for a single variant."""
    if len(variants) == 1:
        return 0, {}
    matrix = np.column_stack([v.report.fold_val_r2 for v in variants])
    sm = ScoreMatrix(values=matrix, treatments=tuple(v.label for v in variants))
    result = friedman(sm)
    decisions = bonferroni_pairwise(result)
    ranks = result.mean_ranks
    best_rank = ranks.min()
    candidates = [i for i in range(len(variants))
                  if ranks[i] == best_rank]
    # break rank ties on mean validation score
    best = max(candidates,
               key=lambda i: float(np.mean(variants[i].report.fold_val_r2)))
    return best, {"friedman": result, "decisions": decisions}


def _fit_linear_factory(spec: linear.PolynomialSpec):
    def fit(X_tr, y_tr, X_val, y_val, scaler, seed):
        return linear.fit_linear_model(X_tr, y_tr, spec, scaler)
    return fit


def _fit_nn_factory(n_hidden: int, trainer: neural.TrainerSpec):
    def fit(X_tr, y_tr, X_val, y_val, scaler, seed):
        spec = neural.NetworkSpec(n_hidden=n_hidden, n_inputs=X_tr.shape[1],
                                  seed=seed)
        net = neural.init_network(spec)
        trained = neural.train(
            net,
            scaler.transform(X_tr), scaler.transform_targets(y_tr),
            scaler.transform(X_val), scaler.transform_targets(y_val),
            trainer)
        return neural.MlpPredictor(trained=trained, scaler=scaler)
    return fit


def _fit_svr_factory(kernel: svr.KernelSpec, params: svr.SvrParams,
                     max_train: int):
    def fit(X_tr, y_tr, X_val, y_val, scaler, seed):
        Xs = scaler.transform(X_tr)
        ys = scaler.transform_targets(y_tr)
        if max_train and Xs.shape[0] > max_train:
            # documented subsampling: seeded, sorted for stable row order
            rng = np.random.default_rng(seed)
            keep = np.sort(rng.choice(Xs.shape[0], size=max_train, replace=False))
            Xs, ys = Xs[keep], ys[keep]
        return svr.fit_svr(Xs, ys, kernel, params, scaler=scaler)
    return fit


def _fit_tree_factory(params: tree.TreeParams, gap_tol: float):
    def fit(X_tr, y_tr, X_val, y_val, scaler, seed):
        root = tree.grow(X_tr, y_tr, params)
        seq = tree.prune_sequence(root, X_tr, y_tr)
        chosen = tree.select_pruned(seq, X_tr, y_tr, X_val, y_val, gap_tol)
        return tree.TreePredictor(root=chosen, n_features=X_tr.shape[1])
    return fit


def run_train(cfg: Config, family: str, prop: str, out_dir: Path,
              jobs: int = 1, seed: int | None = None) -> dict:
    if family not in FAMILIES:
        raise UsageError(f"unknown family {family!r}, expected one of {FAMILIES}")
    seed = cfg.seed if seed is None else seed
    train_val, test = _load_augmented(cfg, out_dir, prop)
    folds = assign_folds(train_val, cfg.fold_k, seed, grouped=cfg.fold_grouped)
    X, y = feature_matrix(train_val)
    X_test, y_test = feature_matrix(test)

    extra_files: dict[str, str] = {}
    variants: list[VariantResult] = []

    if family == "linear":
        curve = linear.sweep(X, y, folds, cfg.linear_degrees, cfg.linear_lambdas,
                             cfg.linear_interactions)
        extra_files[f"linear_{prop}_curve.csv"] = curve.to_csv()
        spec = linear.PolynomialSpec(degree=curve.best.degree,
                                     lam=curve.best.lam,
                                     interactions=cfg.linear_interactions)
        label = f"deg{spec.degree}-lam{spec.lam:g}"
        report, predictors = cross_validate(
            "linear", prop, _fit_linear_factory(spec), X, y, X_test, y_test,
            folds, seed=seed, jobs=jobs)
        variants.append(VariantResult(label, report, predictors, {}))
        chosen_idx, selection = 0, {}
    elif family == "nn":
        for trainer_name in cfg.nn_trainers:
            trainer = neural.TrainerSpec(algorithm=trainer_name,
                                         max_epochs=cfg.nn_max_epochs,
                                         patience=cfg.nn_patience)
            for h in cfg.nn_hidden:
                report, predictors = cross_validate(
                    "nn", prop, _fit_nn_factory(h, trainer), X, y,
                    X_test, y_test, folds, seed=seed, jobs=jobs)
                variants.append(VariantResult(
                    f"{trainer_name}-h{h}", report, predictors, {}))
        chosen_idx, selection = _select_by_rank(variants)
    elif family == "svr":
        params = svr.SvrParams(C=cfg.svr_c, epsilon=cfg.svr_epsilon,
                               tolerance=cfg.svr_tolerance,
                               max_passes=cfg.svr_max_passes,
                               cache_mb=cfg.svr_cache_mb)
        for kind in cfg.svr_kernels:
            kernel = svr.KernelSpec(kind=kind)
            report, predictors = cross_validate(
                "svr", prop, _fit_svr_factory(kernel, params, cfg.svr_max_train),
                X, y, X_test, y_test, folds, seed=seed, jobs=jobs)
            variants.append(VariantResult(kind, report, predictors, {}))
        chosen_idx, selection = _select_by_rank(variants)
    else:
        params = tree.TreeParams(min_leaf=cfg.tree_min_leaf)
        report, predictors = cross_validate(
            "tree", prop, _fit_tree_factory(params, cfg.tree_gap_tol),
            X, y, X_test, y_test, folds, seed=seed, jobs=jobs)
        variants.append(VariantResult(f"gap{cfg.tree_gap_tol:g}", report,
                                      predictors, {}))
        chosen_idx, selection = 0, {}

    chosen = variants[chosen_idx]
    if "friedman" in selection:
        extra_files[f"selection_{prop}_{family}.csv"] = reports.friedman_csv(
            selection["friedman"], selection["decisions"], alpha=0.05)

    outputs = []
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / f"report_{prop}_{family}.csv"
    atomic_write(report_path, reports.report_column_csv(chosen.report))
    details_path = out_dir / f"details_{prop}_{family}.csv"
    atomic_write(details_path, chosen.report.to_csv())
    outputs.extend([report_path, details_path])

    # aggregate test predictions: mean over the k fold predictors
    preds = np.mean([p.predict(X_test) for p in chosen.predictors], axis=0)
    pairs = list(zip(y_test, preds))
    pred_path = out_dir / f"predictions_{prop}_{family}.csv"
    atomic_write(pred_path, reports.pairs_csv(pairs))
    outputs.append(pred_path)

    models_dir = out_dir / "models"
    for i, predictor in enumerate(chosen.predictors):
        model_path = models_dir / f"{family}_{prop}_fold{i}.txt"
        atomic_write(model_path, _serialize_predictor(family, predictor))
        outputs.append(model_path)
    if family == "nn":
        for i, predictor in enumerate(chosen.predictors):
            hist_path = out_dir / f"nn_{prop}_history_fold{i}.csv"
            atomic_write(hist_path, predictor.trained.history_csv())
            outputs.append(hist_path)

    for name, text in extra_files.items():
        path = out_dir / name
        atomic_write(path, text)
        outputs.append(path)

    write_manifest(out_dir / f"train_{prop}_{family}_manifest.json",
                   f"train {family} {prop}", seed, cfg.snapshot(), outputs)
    return {
        "family": family, "property": prop, "variant": chosen.label,
        "mean_test_r2": chosen.report.mean_r2,
        "mean_test_eqm": chosen.report.mean_eqm,
        "report": str(report_path),
    }


def _serialize_predictor(family: str, predictor) -> str:
    if family == "linear":
        return linear.serialize(predictor)
    if family == "nn":
        return neural.serialize(predictor)
    if family == "svr":
        return svr.serialize(predictor)
    return tree.serialize(predictor.root)


def _property_from_report_name(path: Path) -> str | None:
    parts = path.stem.split("_")
    if len(parts) >= 3 and parts[0] == "report":
        return parts[1]
    return None


def run_compare(report_paths: list[Path], out_dir: Path,
                alpha: float = 0.05, seed: int = 0,
                config_snapshot: dict | None = None) -> dict:
    """Merge single-family report columns and run the rank comparison.

    Consumes only the given report CSVs; never re-trains.
    """
    if len(report_paths) < 2:
        raise UsageError("compare needs at least 2 report CSVs")
    families, columns = [], []
    fold_counts = set()
    properties = set()
    for path in report_paths:
        family, scores, _ = reports.parse_report_column_csv(_read_text(path))
        families.append(family)
        columns.append(scores)
        fold_counts.add(len(scores))
        prop = _property_from_report_name(Path(path))
        if prop is not None:
            properties.add(prop)
    if len(fold_counts) != 1:
        raise DataError(f"reports disagree on fold count: {sorted(fold_counts)}")
    if len(properties) > 1:
        raise DataError(f"reports mix properties: {sorted(properties)}")
    prop = properties.pop() if properties else "scores"

    matrix = np.column_stack(columns)
    sm = ScoreMatrix(values=matrix, treatments=tuple(families))
    result = friedman(sm)
    decisions = bonferroni_pairwise(result, alpha=alpha)

    out_dir.mkdir(parents=True, exist_ok=True)
    matrix_path = out_dir / f"comparison_{prop}.csv"
    atomic_write(matrix_path, reports.comparison_matrix_csv(families, matrix))
    stats_path = out_dir / f"friedman_{prop}.csv"
    atomic_write(stats_path, reports.friedman_csv(result, decisions, alpha))
    write_manifest(out_dir / f"compare_{prop}_manifest.json", "compare", seed,
                   config_snapshot or {}, [matrix_path, stats_path])
    return {
        "property": prop,
        "families": families,
        "statistic": result.statistic,
        "p_value": result.p_value,
        "mean_ranks": {f: float(r) for f, r in zip(families, result.mean_ranks)},
        "significant_pairs": [d.pair for d in decisions if d.significant],
        "matrix": str(matrix_path),
        "stats": str(stats_path),
    }


def run_report(pairs_path: Path, out_svg: Path, title: str = "") -> dict:
    pairs = reports.parse_pairs_csv(_read_text(pairs_path))
    svg = reports.scatter_svg(pairs, title=title or pairs_path.stem)
    atomic_write(out_svg, svg)
    companion = out_svg.with_name(out_svg.stem + "_pairs.csv")
    atomic_write(companion, reports.pairs_csv(pairs))
    return {"points": len(pairs), "svg": str(out_svg), "csv": str(companion)}
