"""Single-file binary checkpoints with a sidecar manifest.

Layout (all integers little-endian):

    bytes 0..7    magic ``CKGRCKPT``
    bytes 8..11   format version (u32)
    bytes 12..19  metadata length in bytes (u64)
    ...           UTF-8 JSON metadata (config, dataset identity, metrics,
                  tensor name/shape table in payload order)
    ...           raw float64 tensor payloads, little-endian, in the order
                  declared by the tensor table

The sidecar ``<path>.manifest`` lists one ``name shape`` line per tensor.
Saving is canonical (sorted JSON keys, fixed tensor order), so identical
states produce identical bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import CheckpointError
from .params import EmbedParams, FusionParams, LayerParams, ModelParams

MAGIC = b"CKGRCKPT"
VERSION = 1


@dataclass
class CheckpointBundle:
    params: ModelParams
    config: dict
    dataset: dict
    metrics: dict


def save_checkpoint(path, params: ModelParams, config: dict, dataset: dict, metrics: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    groups = params.groups()
    tensor_table = [[name, list(arr.shape)] for name, arr in groups.items()]
    meta = {
        "config": config,
        "dataset": dataset,
        "metrics": metrics,
        "shared_fusion": params.fusion.shared,
        "tensors": tensor_table,
    }
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, arr in groups.items():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    with open(path.with_name(path.name + ".manifest"), "w", encoding="utf-8") as fh:
        for name, shape in tensor_table:
            fh.write(f"{name} {'x'.join(str(s) for s in shape)}\n")
    return path


def load_checkpoint(path) -> CheckpointBundle:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    data = path.read_bytes()
    if len(data) < 20 or data[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", data, 8)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack_from("<Q", data, 12)
    meta_end = 20 + meta_len
    if len(data) < meta_end:
        raise CheckpointError(f"{path}: truncated metadata block")
    meta = json.loads(data[20:meta_end].decode("utf-8"))

    tensors: dict[str, np.ndarray] = {}
    offset = meta_end
    for name, shape in meta["tensors"]:
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if len(data) < offset + nbytes:
            raise CheckpointError(f"{path}: truncated payload for tensor {name!r}")
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        tensors[name] = arr.astype(np.float64).reshape(shape)
        offset += nbytes
    if offset != len(data):
        raise CheckpointError(f"{path}: {len(data) - offset} trailing bytes")

    params = _assemble_params(tensors, shared_fusion=bool(meta.get("shared_fusion")))
    return CheckpointBundle(
        params=params,
        config=meta.get("config", {}),
        dataset=meta.get("dataset", {}),
        metrics=meta.get("metrics", {}),
    )


def _assemble_params(tensors: dict[str, np.ndarray], shared_fusion: bool) -> ModelParams:
    try:
        embed = EmbedParams(
            entity_emb=tensors["entity_emb"],
            relation_emb=tensors["relation_emb"],
            entity_proj=tensors.get("entity_proj"),
            relation_proj=tensors.get("relation_proj"),
            relation_mat=tensors.get("relation_mat"),
        )
        fusion = FusionParams(
            w_head=tensors["fusion_w_head"],
            w_tail=tensors["fusion_w_head"] if shared_fusion else tensors["fusion_w_tail"],
            bias=tensors["fusion_bias"],
            shared=shared_fusion,
        )
    except KeyError as exc:
        raise CheckpointError(f"checkpoint missing tensor {exc}") from None
    layers = []
    l = 1
    while f"agg_w1_l{l}" in tensors:
        layers.append(LayerParams(w1=tensors[f"agg_w1_l{l}"], w2=tensors.get(f"agg_w2_l{l}")))
        l += 1
    if not layers:
        raise CheckpointError("checkpoint holds no propagation layers")
    return ModelParams(embed=embed, fusion=fusion, layers=layers)


def check_dataset_match(bundle: CheckpointBundle, n_entities: int, n_relations: int) -> None:
    """Explicit shape error when a checkpoint is applied to the wrong graph."""
    got_ent = bundle.params.embed.entity_emb.shape[0]
    got_rel = bundle.params.embed.relation_emb.shape[0]
    if got_ent != n_entities or got_rel != n_relations:
        raise CheckpointError(
            f"checkpoint was trained on {got_ent} entities / {got_rel} relations, "
            f"dataset has {n_entities} / {n_relations}"
        )
