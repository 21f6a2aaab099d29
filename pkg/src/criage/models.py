"""Embedding models: multiplicative (DistMult) and additive (TransE) scoring.

Scores follow the two standard conventions:
  * distmult: psi(s,r,o) = (e_s * e_r) . e_o, sign-unrestricted, higher is
    more plausible;
  * transe:   psi(s,r,o) = ||e_s + e_r - e_o||_2, a nonnegative distance,
    lower is more plausible.

`plausibility` folds the two into a single higher-is-better scale.
Checkpoints are a small binary format: magic + version header, row-major
little-endian f64 tables, then the name maps as JSON.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

DISTMULT = "distmult"
TRANSE = "transe"
KINDS = (DISTMULT, TRANSE)

_MAGIC = b"KGEMBED\x00"
_FORMAT_VERSION = 1


@dataclass
class EmbeddingModel:
    kind: str
    E: np.ndarray  # |entities| x d entity table
    R: np.ndarray  # |relations| x d relation table
    entities: tuple[str, ...] = ()
    relations: tuple[str, ...] = ()
    dataset_hash: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        self.E = np.ascontiguousarray(self.E, dtype=np.float64)
        self.R = np.ascontiguousarray(self.R, dtype=np.float64)
        if self.E.ndim != 2 or self.R.ndim != 2 or self.E.shape[1] != self.R.shape[1]:
            raise ValueError("embedding tables must be 2-D with a shared dimension")

    @property
    def dim(self) -> int:
        return self.E.shape[1]

    @property
    def n_entities(self) -> int:
        return self.E.shape[0]

    @property
    def n_relations(self) -> int:
        return self.R.shape[0]

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(
            self.kind, self.E.copy(), self.R.copy(),
            self.entities, self.relations, self.dataset_hash, dict(self.meta),
        )


def init_model(kind, n_entities, n_relations, dim, seed, scale=0.1,
               entities=(), relations=(), dataset_hash="") -> EmbeddingModel:
    """Uniform(-scale, scale) init from a seeded generator (deterministic)."""
    rng = np.random.default_rng(seed)
    E = rng.uniform(-scale, scale, size=(n_entities, dim))
    R = rng.uniform(-scale, scale, size=(n_relations, dim))
    return EmbeddingModel(kind, E, R, entities, relations, dataset_hash)


# -- scoring ------------------------------------------------------------------


def encode(model: EmbeddingModel, s: int, r: int) -> np.ndarray:
    """Subject-relation combination z_{s,r}: elementwise product for distmult,
    sum for transe."""
    e_s = model.E[s]
    e_r = model.R[r]
    return e_s * e_r if model.kind == DISTMULT else e_s + e_r


def encode_pairs(model: EmbeddingModel, s_idx: np.ndarray, r_idx: np.ndarray) -> np.ndarray:
    E_s = model.E[s_idx]
    E_r = model.R[r_idx]
    return E_s * E_r if model.kind == DISTMULT else E_s + E_r


def object_encode(model: EmbeddingModel, r: int, o: int) -> np.ndarray:
    """Relation-object combination x_{r,o} used by subject-side estimates."""
    if model.kind != DISTMULT:
        raise ValueError("subject-side encode is defined for multiplicative models")
    return model.R[r] * model.E[o]


def score(model: EmbeddingModel, s: int, r: int, o: int) -> float:
    z = encode(model, s, r)
    if model.kind == DISTMULT:
        return float(z @ model.E[o])
    return float(np.linalg.norm(z - model.E[o]))


def score_all_objects(model: EmbeddingModel, s: int, r: int) -> np.ndarray:
    """psi(s, r, o) for every object o."""
    z = encode(model, s, r)
    if model.kind == DISTMULT:
        return model.E @ z
    return np.linalg.norm(model.E - z, axis=1)


def score_matrix(model: EmbeddingModel, Z: np.ndarray) -> np.ndarray:
    """Scores of each encoded row in Z against every object: (n_pairs, n_entities)."""
    if model.kind == DISTMULT:
        return Z @ model.E.T
    diff = Z[:, None, :] - model.E[None, :, :]
    return np.linalg.norm(diff, axis=2)


def plausibility(model: EmbeddingModel, scores: np.ndarray | float):
    """Higher-is-better version of the raw score (negated distances for transe)."""
    return scores if model.kind == DISTMULT else -scores


def truth_probability(model: EmbeddingModel, scores: np.ndarray | float):
    """sigma(psi) for distmult, sigma(-psi) for transe."""
    from scipy.special import expit

    return expit(scores) if model.kind == DISTMULT else expit(-np.asarray(scores))


# -- checkpoint I/O -----------------------------------------------------------


def save_checkpoint(model: EmbeddingModel, path) -> None:
    kind_code = KINDS.index(model.kind)
    names = json.dumps(
        {
            "entities": list(model.entities),
            "relations": list(model.relations),
            "dataset_hash": model.dataset_hash,
            "meta": model.meta,
        },
        sort_keys=True,
    ).encode("utf-8")
    header = struct.pack(
        "<IBIII", _FORMAT_VERSION, kind_code, model.dim, model.n_entities, model.n_relations
    )
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(header)
        fh.write(np.ascontiguousarray(model.E, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.R, dtype="<f8").tobytes())
        fh.write(names)


def load_checkpoint(path) -> EmbeddingModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(_MAGIC)] != _MAGIC:
        raise DataError(f"{path}: not a checkpoint file (bad magic)")
    off = len(_MAGIC)
    version, kind_code, dim, n_ent, n_rel = struct.unpack_from("<IBIII", blob, off)
    if version != _FORMAT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    off += struct.calcsize("<IBIII")
    n_e = n_ent * dim * 8
    n_r = n_rel * dim * 8
    E = np.frombuffer(blob, dtype="<f8", count=n_ent * dim, offset=off).reshape(n_ent, dim)
    R = np.frombuffer(blob, dtype="<f8", count=n_rel * dim, offset=off + n_e).reshape(n_rel, dim)
    names = json.loads(blob[off + n_e + n_r :].decode("utf-8"))
    return EmbeddingModel(
        KINDS[kind_code],
        E.copy(),
        R.copy(),
        tuple(names["entities"]),
        tuple(names["relations"]),
        names.get("dataset_hash", ""),
        names.get("meta", {}),
    )
