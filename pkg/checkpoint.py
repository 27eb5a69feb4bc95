# -*- coding: utf-8 -*-
"""
Versioned checkpoint files.

Layout: the magic bytes KVMEMCKPT, one format-version byte, then an
uncompressed numpy .npz payload holding A, B (absent when tied), R (H×d×d),
the serialized inverted index and a JSON metadata string (hyper-parameters,
model kind, experiment config, vocabulary, corpus fingerprint, epochs
completed and loss curve).
"""

import hashlib
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional

import numpy as np

from featurize import Vocabulary
from model import EpochRecord, HyperParams, ModelKind, ModelParams
from utils import ensure_dir, sha256_file

logger = logging.getLogger(__name__)

MAGIC = b"KVMEMCKPT"
FORMAT_VERSION = 1
INDEX_KEYS = ("index_tokens", "index_offsets", "index_postings")
FINGERPRINT_LENGTH = 16


class CheckpointError(ValueError):
    """Unreadable checkpoint, wrong magic/version, or a corpus it does not fit."""


@dataclass
class Checkpoint:
    params: ModelParams
    kind: ModelKind
    experiment: Dict[str, Any]
    vocab: Vocabulary
    index_arrays: Dict[str, np.ndarray]
    corpus_fingerprint: str = ""
    epochs_completed: int = 0
    history: List[Dict[str, Any]] = field(default_factory=list)
    content_hash: str = ""

    @property
    def fingerprint(self) -> str:
        """Short id of the checkpoint file's bytes, stamped on reports."""
        return self.content_hash[:FINGERPRINT_LENGTH]


def checkpoint_fingerprint(path: str) -> str:
    """Same id as Checkpoint.fingerprint, read straight from a saved file."""
    return sha256_file(path)[:FINGERPRINT_LENGTH]


def _hyper_to_json(hyper: HyperParams) -> Dict[str, Any]:
    data = hyper.to_dict()
    if math.isinf(data["hash_threshold"]):
        data["hash_threshold"] = "inf"
    return data


def _hyper_from_json(data: Mapping[str, Any]) -> HyperParams:
    data = dict(data)
    if data.get("hash_threshold") == "inf":
        data["hash_threshold"] = math.inf
    return HyperParams(**data)


def save_checkpoint(path: str, params: ModelParams, kind: ModelKind, experiment: Mapping[str, Any],
                    vocab: Vocabulary, index_arrays: Mapping[str, np.ndarray], corpus_fingerprint: str = "",
                    epochs_completed: int = 0, history: Optional[List[EpochRecord]] = None) -> str:
    """
    Writes the checkpoint atomically (temp file + rename).

    Raises:
        OSError: Unwritable destination.
    """
    meta = {
        "format_version": FORMAT_VERSION,
        "kind": ModelKind(kind).value,
        "hyper": _hyper_to_json(params.hyper),
        "experiment": dict(experiment),
        "vocab": {
            "tokens": list(vocab.id_to_token),
            "entities": sorted(vocab.entities),
            "center_encoded": vocab.center_encoded,
            "fingerprint": vocab.fingerprint(),
        },
        "corpus_fingerprint": corpus_fingerprint,
        "epochs_completed": epochs_completed,
        "history": [r.to_dict() for r in (history or [])],
        "tied": params.tied,
    }
    arrays = {
        "A": params.A,
        "R": np.stack(params.R) if params.R else np.zeros((0, params.d, params.d)),
        "meta": np.array(json.dumps(meta, allow_nan=False)),
    }
    if params.B is not None:
        arrays["B"] = params.B
    for key in INDEX_KEYS:
        arrays[key] = np.asarray(index_arrays[key], dtype=np.int64)

    buffer = io.BytesIO()
    np.savez(buffer, **arrays)
    ensure_dir(os.path.dirname(os.path.abspath(path)))
    tmp_path = path + ".tmp"
    with open(tmp_path, "wb") as handle:
        handle.write(MAGIC + bytes([FORMAT_VERSION]) + buffer.getvalue())
    os.replace(tmp_path, path)
    logger.info(f"Checkpoint saved to {path} (epochs completed: {epochs_completed})")
    return path


def load_checkpoint(path: str) -> Checkpoint:
    """
    Raises:
        FileNotFoundError: Missing file.
        CheckpointError: Bad magic, unsupported version, corrupt payload or a
            vocabulary whose hash does not match the stored one.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    with open(path, "rb") as handle:
        blob = handle.read()
    if not blob.startswith(MAGIC):
        raise CheckpointError(f"{path} is not a KV-MemNN checkpoint (bad magic header).")
    version = blob[len(MAGIC)] if len(blob) > len(MAGIC) else None
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path} has format version {version}; this build reads version {FORMAT_VERSION}.")
    try:
        with np.load(io.BytesIO(blob[len(MAGIC) + 1:]), allow_pickle=False) as payload:
            arrays = {k: payload[k] for k in payload.files}
        meta = json.loads(str(arrays["meta"]))
    except (OSError, ValueError, KeyError) as e:
        raise CheckpointError(f"{path} has a corrupt payload: {e}") from e

    vocab_meta = meta["vocab"]
    vocab = Vocabulary(vocab_meta["tokens"], entities=vocab_meta["entities"],
                       center_encoded=vocab_meta["center_encoded"])
    if vocab.fingerprint() != vocab_meta["fingerprint"]:
        raise CheckpointError(f"{path}: stored vocabulary does not match its recorded hash.")
    hyper = _hyper_from_json(meta["hyper"])
    params = ModelParams(arrays["A"], arrays.get("B"), [R for R in arrays["R"]], hyper)
    if params.dim != vocab.dim:
        raise CheckpointError(f"{path}: embedding width {params.dim} does not match the vocabulary ({vocab.dim}).")
    index_arrays = {k: arrays[k] for k in INDEX_KEYS}
    logger.info(f"Loaded checkpoint {path}: kind={meta['kind']}, d={params.d}, hops={params.hops}, "
                f"epochs={meta['epochs_completed']}")
    return Checkpoint(params, ModelKind(meta["kind"]), meta["experiment"], vocab, index_arrays,
                      meta.get("corpus_fingerprint", ""), meta["epochs_completed"], meta.get("history", []),
                      hashlib.sha256(blob).hexdigest())


def check_compatible(checkpoint: Checkpoint, corpus_vocab: Vocabulary):
    """
    Refuses a corpus whose rebuilt vocabulary differs from the checkpoint's.

    Raises:
        CheckpointError: Vocabulary hash mismatch.
    """
    if corpus_vocab.fingerprint() != checkpoint.vocab.fingerprint():
        raise CheckpointError(
            f"Vocabulary hash mismatch: checkpoint {checkpoint.vocab.fingerprint()} vs corpus "
            f"{corpus_vocab.fingerprint()}. The corpus differs from the one the model was trained on "
            f"(or the experiment's representation / number_feature settings changed).")
