"""Collaborative knowledge-graph recommender.

Translational initial embeddings with dynamic projection vectors, explicit
entity-relation fusion, attention-weighted multi-layer propagation, pairwise
ranking training, top-K evaluation, and attention-path explanations.

Exports resolve lazily (PEP 562) so that ``import ckgrec`` stays cheap for
the command-line entry point, which may cap BLAS thread pools before any
numerical module loads.
"""

__version__ = "0.1.0"

_EXPORTS = {
    "CKGRecommender": "estimator",
    "EmbedConfig": "config",
    "FusionConfig": "config",
    "PropagationConfig": "config",
    "TrainConfig": "config",
    "ModelConfig": "config",
    "InteractionSet": "data",
    "KnowledgeTriples": "data",
    "load_interactions": "data",
    "load_kg": "data",
    "ncore_filter": "data",
    "split": "data",
    "CollaborativeKG": "graph",
    "EgoNetwork": "graph",
    "build_ckg": "graph",
    "ego": "graph",
    "sample_negative_tail": "graph",
    "sample_bpr_triple": "graph",
    "ModelParams": "params",
    "init_params": "params",
    "AttentionIndex": "propagation",
    "attention_index": "propagation",
    "FinalRepresentations": "recommender",
    "train": "recommender",
    "RankingResult": "evaluation",
    "MetricReport": "evaluation",
    "evaluate": "evaluation",
    "rank_items": "evaluation",
    "ExplanationPath": "explain",
    "ExplanationReport": "explain",
    "extract_paths": "explain",
    "export_graph": "explain",
    "save_checkpoint": "checkpoint",
    "load_checkpoint": "checkpoint",
    "SyntheticSpec": "synthetic",
}

__all__ = ["__version__", *sorted(_EXPORTS)]


def __getattr__(name):
    if name in _EXPORTS:
        import importlib

        module = importlib.import_module(f".{_EXPORTS[name]}", __name__)
        value = getattr(module, name)
        globals()[name] = value
        return value
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(set(globals()) | set(_EXPORTS))
