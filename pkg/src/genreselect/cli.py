"""Command-line pipeline: one binary, one config file, deterministic artifacts.

Exit codes: 0 ok, 2 configuration error, 3 missing prerequisite artifact,
4 data error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import yaml

from . import analysis, bootstrap, cluster, corpus as corpus_mod, embed, select
from .errors import ConfigError, DataError, GenreSelectError, MissingArtifactError

ENV_CORPUS_ROOT = "GENRESELECT_CORPUS_ROOT"

DEFAULT_CONFIG = {
    "corpus_root": None,
    "registry": None,  # None -> bundled registry
    "exclusions": sorted(corpus_mod.DEFAULT_EXCLUSIONS),
    "subsample_cap": None,
    "embeddings": {"path": "embeddings.gsem", "fallback": {"dim": 256, "seed": 7}},
    "targets": [],
    "strategies": ["rand", "sent", "meta", "boot", "gmm", "lda"],
    "seeds": [41, 42, 43],
    "output_dir": "out",
    "sample_n": 100,
    "train_ratio": 0.8,
    "gmm": {},
    "lda": {},
    "boot": {},
}


def bundled_registry_path() -> Path:
    return Path(resources.files("genreselect").joinpath("data/ud_v27_registry.tsv"))


_PARAM_KEYS = {
    "gmm": {"covariance", "reg_covar", "max_iter", "tol", "n_init"},
    "lda": {"alpha", "beta", "sweeps"},
    "boot": {
        "threshold", "max_rounds", "train_cap", "learning_rate", "batch_size",
        "max_epochs", "patience", "weight_decay", "validation_fraction",
    },
}


def load_config(path: str | None, overrides: Mapping | None = None) -> dict:
    config = json.loads(json.dumps(DEFAULT_CONFIG))
    if path is not None:
        if not Path(path).exists():
            raise ConfigError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as handle:
            loaded = yaml.safe_load(handle) or {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config root must be a mapping: {path}")
        for key, value in loaded.items():
            if key not in config:
                raise ConfigError(f"unknown config key: {key}")
            if isinstance(config[key], dict) and isinstance(value, dict):
                config[key].update(value)
            else:
                config[key] = value
    for key, value in (overrides or {}).items():
        if value is not None:
            config[key] = value
    if config["corpus_root"] is None:
        config["corpus_root"] = os.environ.get(ENV_CORPUS_ROOT)
    if not config["seeds"]:
        raise ConfigError("config requires at least one seed")
    if not config["strategies"]:
        raise ConfigError("config requires at least one strategy")
    for section, allowed in _PARAM_KEYS.items():
        unknown = set(config[section]) - allowed
        if unknown:
            raise ConfigError(f"unknown {section} parameter keys: {sorted(unknown)}")
    return config


def config_hash(config: Mapping) -> str:
    """Hash of the semantic run configuration.

    Filesystem locations (corpus root, registry path, output directory) are
    excluded so published manifests verify across machines.
    """
    semantic = {k: v for k, v in config.items() if k not in ("corpus_root", "registry", "output_dir")}
    canonical = json.dumps(semantic, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def _registry_path(config: Mapping) -> Path:
    return Path(config["registry"]) if config["registry"] else bundled_registry_path()


def _load_corpus(config: Mapping) -> corpus_mod.Corpus:
    root = config["corpus_root"]
    if not root:
        raise ConfigError(
            f"no corpus root configured (set corpus_root or ${ENV_CORPUS_ROOT})"
        )
    return corpus_mod.load_corpus(root, _registry_path(config), config["exclusions"])


def _seed_view(config: Mapping, full: corpus_mod.Corpus, seed: int) -> corpus_mod.Corpus:
    cap = config["subsample_cap"]
    if cap:
        return corpus_mod.subsample_corpus(full, int(cap), seed)
    return full


def _load_embeddings(config: Mapping) -> embed.EmbeddingMatrix:
    path = Path(config["output_dir"]) / config["embeddings"]["path"]
    if not path.exists():
        raise MissingArtifactError(
            f"embeddings file {path} not found; run 'featurize-fallback' or provide one"
        )
    return embed.load_embeddings(path)


def _target_spec(config: Mapping, code: str) -> select.TargetSpec:
    registry = corpus_mod.load_registry(_registry_path(config))
    return select.TargetSpec.from_registry(code, registry)


def _labels_path(config: Mapping, target: str, seed: int) -> Path:
    return Path(config["output_dir"]) / "boot" / target / f"seed{seed}" / "labels.tsv"


def _clusters_dir(config: Mapping, method: str, seed: int) -> Path:
    return Path(config["output_dir"]) / "clusters" / method / f"seed{seed}"


def _select_dir(config: Mapping, target: str, strategy: str, seed: int) -> Path:
    return Path(config["output_dir"]) / "select" / target / strategy / f"seed{seed}"


# --- subcommands ---


def cmd_analyze_genres(args: argparse.Namespace) -> int:
    config = load_config(args.config, {"registry": args.registry, "output_dir": args.output_dir})
    registry = corpus_mod.load_registry(_registry_path(config))
    bounds = analysis.genre_bounds(registry)
    total = analysis.registry_size(registry)
    out = Path(args.out) if args.out else Path(config["output_dir"]) / "genre_bounds.tsv"
    out.parent.mkdir(parents=True, exist_ok=True)
    analysis.bounds_to_tsv(bounds, total, out, config_hash=config_hash(config))
    print(f"wrote {out} ({len(bounds)} genres, {total} sentences, {len(registry)} treebanks)")
    return 0


def cmd_featurize_fallback(args: argparse.Namespace) -> int:
    config = load_config(args.config, {"corpus_root": args.corpus_root, "output_dir": args.output_dir})
    full = _load_corpus(config)
    fallback = config["embeddings"]["fallback"]
    matrix = embed.fallback_featurize(
        full.sentences(), dim=int(fallback["dim"]), seed=int(fallback["seed"])
    )
    out = Path(config["output_dir"]) / config["embeddings"]["path"]
    out.parent.mkdir(parents=True, exist_ok=True)
    embed.save_embeddings(matrix, out)
    print(f"wrote {out} ({len(matrix)} rows, dim {matrix.dim})")
    return 0


def cmd_cluster(args: argparse.Namespace) -> int:
    config = load_config(args.config, {"corpus_root": args.corpus_root, "output_dir": args.output_dir})
    digest = config_hash(config)
    full = _load_corpus(config)
    embeddings = _load_embeddings(config)
    seeds = [args.seed] if args.seed is not None else config["seeds"]
    params_key = "gmm_params" if args.method == "gmm" else "lda_params"
    for seed in seeds:
        view = _seed_view(config, full, seed)
        out_dir = _clusters_dir(config, args.method, seed)
        out_dir.mkdir(parents=True, exist_ok=True)
        for code in view.codes():
            try:
                assignment = cluster.cluster_treebank(
                    view.treebanks[code],
                    view.meta[code],
                    args.method,
                    embeddings,
                    seed,
                    **{params_key: config[args.method]},
                )
            except GenreSelectError as exc:
                raise DataError(f"{code}: {exc}") from exc
            cluster.write_assignment(
                assignment,
                out_dir / f"{code}.tsv",
                out_dir / f"{code}.means.gsem",
                config_hash=digest,
            )
        print(f"seed {seed}: wrote {len(view.codes())} assignment dumps to {out_dir}")
    return 0


def cmd_bootstrap(args: argparse.Namespace) -> int:
    config = load_config(args.config, {"corpus_root": args.corpus_root, "output_dir": args.output_dir})
    digest = config_hash(config)
    full = _load_corpus(config)
    embeddings = _load_embeddings(config)
    target = _target_spec(config, args.target)
    seeds = [args.seed] if args.seed is not None else config["seeds"]
    boot_cfg = dict(config["boot"])
    classifier_params = {
        key: boot_cfg.pop(key)
        for key in list(boot_cfg)
        if key in ("learning_rate", "batch_size", "max_epochs", "patience", "weight_decay",
                   "validation_fraction")
    }
    for seed in seeds:
        view = _seed_view(config, full, seed)
        state = bootstrap.bootstrap_labels(
            view,
            embeddings,
            excluded_languages=target.languages,
            seed=seed,
            classifier_params=classifier_params or None,
            **boot_cfg,
        )
        out_dir = _labels_path(config, args.target, seed).parent
        out_dir.mkdir(parents=True, exist_ok=True)
        bootstrap.write_labels(state, out_dir / "labels.tsv", config_hash=digest)
        if state.classifier is not None:
            state.classifier.save(out_dir / "classifier.bin")
        counts = state.source_counts
        print(
            f"seed {seed}: {len(state.labeled)} labels "
            f"(seed {counts['seed']}, threshold {counts['threshold']}, "
            f"last-remaining {counts['last-remaining']}, fallback {counts['fallback']}) "
            f"in {state.round} rounds"
        )
    return 0


def _strategy_manifest(
    config: Mapping,
    strategy: str,
    target: select.TargetSpec,
    seed: int,
    view: corpus_mod.Corpus,
    digest: str,
) -> select.SelectionManifest:
    pool = select.exclusion_pool(view, target)
    needs_mean = strategy in ("sent", "gmm", "lda")
    target_mean = None
    if needs_mean:
        embeddings = _load_embeddings(config)
        if target.treebank_code not in view.treebanks:
            raise DataError(f"target treebank {target.treebank_code} not in corpus")
        sample = select.sample_target(
            view.treebanks[target.treebank_code], n=int(config["sample_n"]), seed=seed
        )
        target_mean = embed.mean_embedding(embeddings, sample)

    if strategy == "meta":
        return select.select_meta(pool, target, seed=seed, config_hash=digest)
    if strategy == "target":
        return select.select_target(view, target, seed=seed, config_hash=digest)
    if strategy == "boot":
        labels_file = _labels_path(config, target.treebank_code, seed)
        if not labels_file.exists():
            raise MissingArtifactError(
                f"strategy boot requires {labels_file}; run 'bootstrap' first"
            )
        records = bootstrap.read_labels(labels_file)
        labels = {gid: record.genre for gid, record in records.items()}
        return select.select_boot(labels, pool, target, seed=seed, config_hash=digest)
    if strategy in ("gmm", "lda"):
        assignments = []
        directory = _clusters_dir(config, strategy, seed)
        for code in pool.codes():
            if target.genre not in pool.meta[code].genres:
                continue
            tsv = directory / f"{code}.tsv"
            if not tsv.exists():
                raise MissingArtifactError(
                    f"strategy {strategy} requires {tsv}; run 'cluster --method {strategy}' first"
                )
            assignments.append(cluster.read_assignment(tsv, directory / f"{code}.means.gsem"))
        return select.select_cluster(
            assignments, pool, target, target_mean, seed=seed, config_hash=digest
        )
    if strategy == "sent":
        gmm_manifest_file = _select_dir(config, target.treebank_code, "gmm", seed) / "manifest.tsv"
        if not gmm_manifest_file.exists():
            raise MissingArtifactError(
                f"strategy sent sizes its selection from {gmm_manifest_file}; "
                f"run 'select --strategy gmm' first"
            )
        k = len(select.read_manifest(gmm_manifest_file))
        embeddings = _load_embeddings(config)
        pool_matrix = embeddings.subset(pool.ids())
        return select.select_sent(pool_matrix, target_mean, k, target, seed=seed, config_hash=digest)
    if strategy == "rand":
        sizes = {}
        for other in ("boot", "gmm", "lda"):
            manifest_file = _select_dir(config, target.treebank_code, other, seed) / "manifest.tsv"
            if not manifest_file.exists():
                raise MissingArtifactError(
                    f"strategy rand sizes its sample from the boot/gmm/lda manifests; "
                    f"missing {manifest_file}"
                )
            sizes[other] = len(select.read_manifest(manifest_file))
        return select.select_rand(
            pool, sizes["boot"], sizes["gmm"], sizes["lda"], target, seed=seed, config_hash=digest
        )
    raise ConfigError(f"unknown strategy {strategy!r}")


def cmd_select(args: argparse.Namespace) -> int:
    config = load_config(args.config, {"corpus_root": args.corpus_root, "output_dir": args.output_dir})
    digest = config_hash(config)
    full = _load_corpus(config)
    target = _target_spec(config, args.target)
    seeds = [args.seed] if args.seed is not None else config["seeds"]
    for seed in seeds:
        view = _seed_view(config, full, seed)
        manifest = _strategy_manifest(config, args.strategy, target, seed, view, digest)
        out_dir = _select_dir(config, args.target, args.strategy, seed)
        out_dir.mkdir(parents=True, exist_ok=True)
        select.write_manifest(manifest, out_dir / "manifest.tsv")
        train_ids, dev_ids = corpus_mod.split_train_dev(
            list(manifest.ids), float(config["train_ratio"]), seed
        )
        corpus_mod.write_conllu((view.get(gid) for gid in train_ids), out_dir / "train.conllu")
        corpus_mod.write_conllu((view.get(gid) for gid in dev_ids), out_dir / "dev.conllu")
        print(
            f"seed {seed}: {args.strategy}/{args.target} selected {len(manifest)} ids "
            f"({len(train_ids)} train / {len(dev_ids)} dev) -> {out_dir}"
        )
    return 0


def _parse_system(spec: str) -> tuple[str, list[Path]]:
    if "=" not in spec:
        raise ConfigError(f"system spec must look like NAME=pred1.conllu[,pred2...]: {spec!r}")
    name, paths = spec.split("=", 1)
    files = [Path(p) for p in paths.split(",") if p]
    for f in files:
        if not f.exists():
            raise MissingArtifactError(f"prediction file not found: {f}")
    return name, files


def cmd_eval(args: argparse.Namespace) -> int:
    gold = corpus_mod.read_conllu_file(args.gold)
    systems = dict(_parse_system(s) for s in args.system)
    if len(systems) < 1:
        raise ConfigError("eval requires at least one --system")
    n_seeds = {name: len(files) for name, files in systems.items()}
    if len(set(n_seeds.values())) != 1:
        raise DataError(f"systems have mismatched seed counts: {n_seeds}")
    baselines = args.baseline or [next(iter(systems))]
    for base in baselines:
        if base not in systems:
            raise ConfigError(f"unknown baseline system {base!r}")

    predictions = {
        name: [corpus_mod.read_conllu_file(f) for f in files] for name, files in systems.items()
    }
    rows = []
    for name, preds in predictions.items():
        scores = [analysis.las_uas(gold, p) for p in preds]
        las_mean, las_std = analysis.aggregate_seeds([s.las for s in scores])
        uas_mean, uas_std = analysis.aggregate_seeds([s.uas for s in scores])
        rows.append((name, las_mean, las_std, uas_mean, uas_std))
    print("system\tlas\tlas_std\tuas\tuas_std")
    for name, las_mean, las_std, uas_mean, uas_std in rows:
        print(f"{name}\t{las_mean:.2f}\t{las_std:.2f}\t{uas_mean:.2f}\t{uas_std:.2f}")

    n_runs = next(iter(n_seeds.values()))
    print("\nsystem\tbaseline\tp_values\tadjusted_alpha\tsignificant")
    for name, preds in predictions.items():
        for base in baselines:
            if name == base:
                continue
            p_values = []
            for run in range(n_runs):
                result = analysis.paired_sign_test(
                    gold,
                    predictions[base][run],
                    preds[run],
                    resamples=args.resamples,
                    seed=args.seed + run,
                    alpha=args.alpha,
                )
                p_values.append(result.p_value)
            corrected = [analysis.bonferroni(p, n_runs, alpha=args.alpha) for p in p_values]
            significant = all(c.significant for c in corrected)
            formatted = ",".join(f"{p:.4f}" for p in p_values)
            print(f"{name}\t{base}\t{formatted}\t{corrected[0].adjusted_alpha:.4f}\t{significant}")
    return 0


def cmd_significance(args: argparse.Namespace) -> int:
    gold = corpus_mod.read_conllu_file(args.gold)
    pred_a = corpus_mod.read_conllu_file(args.pred_a)
    pred_b = corpus_mod.read_conllu_file(args.pred_b)
    result = analysis.paired_sign_test(
        gold, pred_a, pred_b, resamples=args.resamples, seed=args.seed, alpha=args.alpha
    )
    corrected = analysis.bonferroni(
        result.p_value, args.comparisons, alpha=args.alpha, resamples=result.resamples
    )
    print(f"p_value\t{corrected.p_value:.6f}")
    print(f"resamples\t{corrected.resamples}")
    print(f"adjusted_alpha\t{corrected.adjusted_alpha:.6f}")
    print(f"significant\t{corrected.significant}")
    return 0


def cmd_manifest_diff(args: argparse.Namespace) -> int:
    left = select.read_manifest(args.left)
    right = select.read_manifest(args.right)
    left_ids, right_ids = set(left.ids), set(right.ids)
    shared = left_ids & right_ids
    union = left_ids | right_ids
    jaccard = len(shared) / len(union) if union else 1.0
    print(f"left\t{args.left}\t{len(left_ids)} ids\tstrategy={left.strategy}\tseed={left.seed}")
    print(f"right\t{args.right}\t{len(right_ids)} ids\tstrategy={right.strategy}\tseed={right.seed}")
    print(f"shared\t{len(shared)}")
    print(f"only_left\t{len(left_ids - right_ids)}")
    print(f"only_right\t{len(right_ids - left_ids)}")
    print(f"jaccard\t{jaccard:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="genreselect",
        description="Genre-driven training-data selection for treebank collections",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default=None, help="YAML config file")
        p.add_argument("--corpus-root", default=None)
        p.add_argument("--output-dir", default=None)

    p = sub.add_parser("analyze-genres", help="genre-distribution bounds over a registry")
    p.add_argument("--config", default=None)
    p.add_argument("--registry", default=None)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_analyze_genres)

    p = sub.add_parser("featurize-fallback", help="write deterministic fallback embeddings")
    common(p)
    p.set_defaults(func=cmd_featurize_fallback)

    p = sub.add_parser("cluster", help="cluster every treebank into its genre count")
    common(p)
    p.add_argument("--method", choices=("gmm", "lda"), required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("bootstrap", help="iterative weakly supervised genre labeling")
    common(p)
    p.add_argument("--target", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("select", help="emit a selection manifest plus train/dev corpora")
    common(p)
    p.add_argument("--strategy", choices=select.STRATEGIES, required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("eval", help="score prediction runs and test significance")
    p.add_argument("--gold", required=True)
    p.add_argument("--system", action="append", required=True, metavar="NAME=PRED[,PRED...]")
    p.add_argument("--baseline", action="append", default=None)
    p.add_argument("--resamples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=41)
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("significance", help="paired bootstrap sign test for two systems")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred-a", required=True)
    p.add_argument("--pred-b", required=True)
    p.add_argument("--resamples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=41)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--comparisons", type=int, default=1)
    p.set_defaults(func=cmd_significance)

    p = sub.add_parser("manifest-diff", help="compare two selection manifests")
    p.add_argument("left")
    p.add_argument("right")
    p.set_defaults(func=cmd_manifest_diff)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except MissingArtifactError as exc:
        print(f"missing prerequisite: {exc}", file=sys.stderr)
        return 3
    except (DataError, GenreSelectError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
