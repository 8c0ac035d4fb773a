"""Command-line surface: prepare, train, eval, ablate, explain, gen-synthetic.

Heavy modules are imported inside the command handlers so that thread caps
(``--threads`` / ``CKGREC_THREADS``) can be applied to the BLAS environment
before numpy loads.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ckgrec",
        description="Collaborative knowledge-graph recommender pipeline",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS worker threads (default: leave unchanged)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None, help="run configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a configuration key (repeatable)")

    p = sub.add_parser("prepare", help="filter, split, and index the raw dataset")
    common(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a model on the prepared dataset")
    common(p)
    p.add_argument("--resume", type=Path, default=None, help="checkpoint to continue from")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--split", choices=("train", "test", "validation"), default="test")
    p.add_argument("--k", type=int, default=None, help="cutoff (default: eval.k)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="sweep one model axis, all else fixed")
    common(p)
    p.add_argument("--axis", choices=("fusion", "embed-mode", "layers", "aggregator"),
                   required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("explain", help="export attention paths for a recommendation")
    common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--user", type=int, required=True, help="original user id")
    p.add_argument("--item", type=int, default=None,
                   help="original item id (default: the user's top-1 recommendation)")
    p.add_argument("--max-hops", type=int, default=3)
    p.add_argument("--top-p", type=int, default=5)
    p.add_argument("--format", choices=("dot", "text"), default="dot")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("gen-synthetic", help="write the bundled synthetic dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--users", type=int, default=200)
    p.add_argument("--items", type=int, default=100)
    p.add_argument("--attributes", type=int, default=50)
    p.add_argument("--clusters", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_synthetic)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = args.threads
    if threads is None and os.environ.get("CKGREC_THREADS"):
        threads = int(os.environ["CKGREC_THREADS"])
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)
    try:
        return int(args.func(args) or 0)
    except Exception as exc:  # one-line machine-parsable failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


# --- shared helpers ------------------------------------------------------------

def _load_config(args):
    from .runconfig import load_run_config

    cfg = load_run_config(getattr(args, "config", None), list(getattr(args, "set", [])))
    env_out = os.environ.get("CKGREC_OUT_DIR")
    if env_out:
        cfg.values["output.dir"] = env_out
    return cfg


def _build_ckg(cfg):
    from .data import load_kg, read_split_manifest
    from .graph import build_ckg

    split_path = cfg.prepared_dir / "split.txt"
    if not split_path.exists():
        raise FileNotFoundError(f"prepared split not found: {split_path}; run prepare first")
    train, test, validation = read_split_manifest(split_path)
    kg_path = cfg.prepared_dir / "kg.txt"
    kg = None
    if kg_path.exists() and kg_path.stat().st_size > 0:
        kg = load_kg(kg_path, train.item_index())
    return build_ckg(
        train, kg, test=test, validation=validation,
        inverse=cfg["graph.inverse_relations"],
    )


def _manifest_hash(cfg) -> str:
    split_path = cfg.prepared_dir / "split.txt"
    return hashlib.sha256(split_path.read_bytes()).hexdigest()[:16]


def _write_history(path: Path, history) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in history:
            fh.write(json.dumps({
                "epoch": rec.epoch,
                "embed_loss": rec.embed_loss,
                "pred_loss": rec.pred_loss,
                "val_recall": rec.val_recall,
                "val_ndcg": rec.val_ndcg,
            }, sort_keys=True) + "\n")


# --- commands --------------------------------------------------------------------

def cmd_prepare(args) -> int:
    from .data import load_interactions, ncore_filter, split, write_split_manifest, load_kg

    cfg = _load_config(args)
    paths = cfg["data.interactions"]
    if not paths:
        raise ValueError("data.interactions is not set; point it at one or more files")
    raw = load_interactions(list(paths))
    filtered = ncore_filter(raw, cfg["prepare.n_core"])
    train, test, validation = split(filtered, cfg["split.ratios"], cfg["split.seed"])

    prepared = cfg.prepared_dir
    prepared.mkdir(parents=True, exist_ok=True)
    write_split_manifest(prepared / "split.txt", train, test, validation)

    kg = None
    kg_lines = 0
    if cfg["data.kg"]:
        kg = load_kg(cfg["data.kg"], filtered.item_index())
        with open(prepared / "kg.txt", "w", encoding="utf-8") as fh:
            for h, r, t in kg.triples:
                ho = filtered.item_ids[h] if h < kg.n_items else kg.attribute_ids[h - kg.n_items]
                to = filtered.item_ids[t] if t < kg.n_items else kg.attribute_ids[t - kg.n_items]
                fh.write(f"{ho} {kg.relation_ids[r]} {to}\n")
                kg_lines += 1
    else:
        (prepared / "kg.txt").write_text("", encoding="utf-8")

    n_users, n_items = filtered.n_users, filtered.n_items
    n_inter = len(filtered)
    n_attr = kg.n_attributes if kg else 0
    n_rel = kg.n_relations if kg else 0
    n_kg = len(kg) if kg else 0
    ckg_entities = n_users + n_items + n_attr
    ckg_relations = n_rel + 1
    ckg_triples = len(train) + n_kg
    stats = [
        ("raw_users", raw.n_users),
        ("raw_items", raw.n_items),
        ("raw_interactions", len(raw)),
        ("n_core", cfg["prepare.n_core"]),
        ("users", n_users),
        ("items", n_items),
        ("interactions", n_inter),
        ("interaction_density", n_inter / (n_users * n_items)),
        ("kg_entities", n_items + n_attr),
        ("kg_triplets", n_kg),
        ("kg_relations", n_rel),
        ("kg_density", n_kg / (n_items * n_rel * (n_items + n_attr)) if n_kg else 0.0),
        ("ckg_entities", ckg_entities),
        ("ckg_relations", ckg_relations),
        ("ckg_triplets", ckg_triples),
        ("ckg_density", ckg_triples / (ckg_entities**2 * ckg_relations)),
        ("train_pairs", len(train)),
        ("test_pairs", len(test)),
        ("validation_pairs", len(validation)),
        ("split_seed", cfg["split.seed"]),
    ]
    with open(prepared / "stats.txt", "w", encoding="utf-8") as fh:
        for key, val in stats:
            fh.write(f"{key}: {val!r}\n")
    for key, val in stats:
        print(f"{key}: {val}")
    print(f"prepared dataset written to {prepared}")
    return 0


def cmd_train(args) -> int:
    from .checkpoint import load_checkpoint
    from .estimator import CKGRecommender

    cfg = _load_config(args)
    ckg = _build_ckg(cfg)
    est = CKGRecommender(**cfg.estimator_kwargs())
    est.verbose = 1 if args.verbose else 0

    initial = None
    offset = 0
    if args.resume is not None:
        bundle = load_checkpoint(args.resume)
        initial = bundle.params
        offset = int(bundle.metrics.get("epochs_run", 0))
    est.fit(ckg, initial_params=initial, epoch_offset=offset)

    out = cfg.out_dir
    _write_history(out / "history.jsonl", est.history_)
    epochs_run = est.history_[-1].epoch if est.history_ else offset
    ckpt = est.save(out / "checkpoint.ckpt", extra_metrics={"epochs_run": epochs_run})
    print(
        f"trained {epochs_run - offset} epochs; best epoch {est.best_epoch_} "
        f"val_recall@{est.monitor_k}={est.best_recall_:.4f}"
    )
    print(f"checkpoint: {ckpt}")
    print(f"history: {out / 'history.jsonl'}")
    return 0


def cmd_eval(args) -> int:
    from .estimator import CKGRecommender
    from .evaluation import write_report

    cfg = _load_config(args)
    ckg = _build_ckg(cfg)
    est = CKGRecommender.load(args.checkpoint, ckg)
    k = args.k if args.k is not None else cfg["eval.k"]
    report = est.evaluate_split(split=args.split, k=k)
    prefix = cfg.out_dir / "eval" / f"{args.split}_k{k}"
    summary, records = write_report(report, ckg, prefix)
    print(f"split={args.split} k={k} users={report.n_users} "
          f"recall={report.recall:.4f} ndcg={report.ndcg:.4f}")
    print(f"summary: {summary}")
    print(f"per-user records: {records}")
    return 0


def _ablation_variants(axis: str, cfg):
    base = cfg.estimator_kwargs()
    if axis == "fusion":
        variants = [("without-fusion", {"fusion": "none"})]
        for kind in ("addition", "concatenation", "multiplication"):
            for shared in (True, False):
                label = f"{kind}-sw" if shared else kind
                variants.append((label, {"fusion": kind, "shared_weights": shared}))
        return base, variants
    if axis == "embed-mode":
        return base, [("transd", {"embed_mode": "transd"}),
                      ("transr", {"embed_mode": "transr"})]
    if axis == "layers":
        dim = base["embed_dim"]
        variants = []
        for depth in range(1, 6):
            dims = tuple(max(dim >> i, 1) for i in range(depth))
            variants.append((f"{depth}-layer", {"layer_dims": dims}))
        return base, variants
    if axis == "aggregator":
        return base, [(kind, {"aggregator": kind})
                      for kind in ("bi-interaction", "gcn", "graphsage")]
    raise ValueError(f"unknown ablation axis {axis!r}")


def cmd_ablate(args) -> int:
    from .estimator import CKGRecommender

    cfg = _load_config(args)
    ckg = _build_ckg(cfg)
    base, variants = _ablation_variants(args.axis, cfg)
    k = cfg["eval.k"]
    manifest = _manifest_hash(cfg)

    rows = []
    for label, overrides in variants:
        kwargs = dict(base)
        kwargs.update(overrides)
        est = CKGRecommender(**kwargs)
        est.fit(ckg)
        report = est.evaluate_split(split="test", k=k)
        rows.append((label, report.recall, report.ndcg, est.best_epoch_))
        print(f"{label}: recall@{k}={report.recall:.4f} ndcg@{k}={report.ndcg:.4f}")

    out = cfg.out_dir / f"ablation_{args.axis}.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(f"# axis={args.axis} split=test k={k} manifest=sha256:{manifest} "
                 f"seed={cfg['train.seed']}\n")
        fh.write(f"{'variant':<20} {'recall@' + str(k):<12} {'ndcg@' + str(k):<12} best_epoch\n")
        for label, recall, ndcg, best in rows:
            fh.write(f"{label:<20} {recall:<12.4f} {ndcg:<12.4f} {best}\n")
    print(f"ablation table: {out}")
    return 0


def _nearest_ids(target: int, known, limit: int = 5):
    return sorted(known, key=lambda x: (abs(x - target), x))[:limit]


def cmd_explain(args) -> int:
    from .estimator import CKGRecommender

    cfg = _load_config(args)
    ckg = _build_ckg(cfg)
    est = CKGRecommender.load(args.checkpoint, ckg)

    user_index = ckg.train.user_index()
    if args.user not in user_index:
        near = _nearest_ids(args.user, user_index)
        raise KeyError(f"unknown user id {args.user}; nearest known ids: {near}")
    user = user_index[args.user]

    item = None
    if args.item is not None:
        item_index = ckg.train.item_index()
        if args.item not in item_index:
            near = _nearest_ids(args.item, item_index)
            raise KeyError(f"unknown item id {args.item}; nearest known ids: {near}")
        item = item_index[args.item]

    report = est.explain(user, item, max_hops=args.max_hops, top_p=args.top_p)
    suffix = "dot" if args.format == "dot" else "txt"
    out = args.out or (
        cfg.out_dir / "explain" /
        f"user{args.user}_item{ckg.train.item_ids[report.item]}.{suffix}"
    )
    path = est.export_explanation(report, out, fmt=args.format)
    print(f"user {args.user} item {ckg.train.item_ids[report.item]} "
          f"prediction {report.prediction:.4f} paths {len(report.paths)}")
    print(f"exported: {path}")
    return 0


def cmd_gen_synthetic(args) -> int:
    from .runconfig import write_run_config
    from .synthetic import SyntheticSpec, generate, write_dataset

    spec = SyntheticSpec(
        n_users=args.users,
        n_items=args.items,
        n_attributes=args.attributes,
        n_clusters=args.clusters,
        seed=args.seed,
    )
    data = generate(spec)
    paths = write_dataset(data, args.out)
    out_dir = Path(args.out)
    config_path = write_run_config(out_dir / "config.txt", {
        "data.interactions": (str(paths["interactions"]),),
        "data.kg": str(paths["kg"]),
        "prepare.n_core": 10,
        "split.seed": spec.seed,
        "train.seed": spec.seed,
        # desk-scale schedule: small graph, larger steps, shorter patience
        "train.learning_rate": 1e-3,
        "train.batch_size": 1024,
        "train.max_epochs": 120,
        "train.patience": 20,
        "output.dir": str(out_dir / "run"),
    })
    print(f"interactions: {paths['interactions']}")
    print(f"kg: {paths['kg']}")
    print(f"config: {config_path}")
    print(f"users={spec.n_users} items={spec.n_items} attributes={spec.n_attributes} "
          f"interactions={len(data.interactions)} triples={len(data.kg_triples)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
