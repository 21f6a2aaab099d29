"""Knowledge-graph data model: ingestion, indexing, and graph-edit bookkeeping.

A graph is immutable after construction; `apply_edit` returns a new value
sharing unmodified index buckets with the original, so attack experiments can
hold hundreds of perturbed graphs cheaply.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

from .errors import DataError, EditError, MalformedLineError

SPLITS = ("train", "valid", "test")


class Triple(NamedTuple):
    s: int
    r: int
    o: int


@dataclass(frozen=True)
class Edit:
    """A single-fact modification of the training split."""

    kind: str  # "add" | "remove"
    triple: Triple

    def __post_init__(self):
        if self.kind not in ("add", "remove"):
            raise ValueError(f"edit kind must be 'add' or 'remove', got {self.kind!r}")

    def inverse(self) -> "Edit":
        return Edit("remove" if self.kind == "add" else "add", self.triple)


def add_fact(triple: Triple) -> Edit:
    return Edit("add", triple)


def remove_fact(triple: Triple) -> Edit:
    return Edit("remove", triple)


class KnowledgeGraph:
    """Integer-indexed triple store with train/valid/test splits.

    Maintains two derived indexes over the train split:
      * the object-neighbor index mapping each entity ``o`` to the sorted
        ``(s, r)`` pairs of training facts with object ``o``;
      * the label table mapping each observed ``(s, r)`` pair to the set of
        objects with a positive label (all other objects are implicit
        negatives).

    Treat instances as immutable; edits go through :meth:`apply_edit`.
    """

    def __init__(
        self,
        entities: tuple[str, ...],
        relations: tuple[str, ...],
        train: tuple[Triple, ...],
        valid: tuple[Triple, ...],
        test: tuple[Triple, ...],
        duplicates_dropped: dict[str, int] | None = None,
        name: str = "unnamed",
    ):
        self.name = name
        self.entities = entities
        self.relations = relations
        self.entity_index = {e: i for i, e in enumerate(entities)}
        self.relation_index = {r: i for i, r in enumerate(relations)}
        self.train = train
        self.valid = valid
        self.test = test
        self.duplicates_dropped = dict(duplicates_dropped or {})
        self._train_set = frozenset(train)
        self._neighbors: dict[int, tuple[tuple[int, int], ...]] = {}
        self._label_table: dict[tuple[int, int], frozenset[int]] = {}
        self._build_indexes()
        self._validate()

    # -- construction ------------------------------------------------------

    def _build_indexes(self):
        nei: dict[int, list[tuple[int, int]]] = {}
        tab: dict[tuple[int, int], set[int]] = {}
        for t in self.train:
            nei.setdefault(t.o, []).append((t.s, t.r))
            tab.setdefault((t.s, t.r), set()).add(t.o)
        self._neighbors = {o: tuple(sorted(v)) for o, v in nei.items()}
        self._label_table = {p: frozenset(v) for p, v in tab.items()}

    def _validate(self):
        n, m = len(self.entities), len(self.relations)
        for split in SPLITS:
            triples = getattr(self, split)
            if len(set(triples)) != len(triples):
                raise DataError(f"duplicate triples within split {split!r}")
            for t in triples:
                if not (0 <= t.s < n and 0 <= t.o < n and 0 <= t.r < m):
                    raise DataError(f"triple {t} out of range (|entities|={n}, |relations|={m})")

    # -- basic queries -----------------------------------------------------

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    @property
    def label_table(self) -> dict[tuple[int, int], frozenset[int]]:
        """Positive objects per observed (s, r) training pair."""
        return self._label_table

    def neighbors_of_object(self, o: int) -> list[tuple[int, int]]:
        """All (s', r') with ⟨s', r', o⟩ in train, ascending."""
        if not 0 <= o < self.n_entities:
            raise IndexError(f"entity index {o} out of range [0, {self.n_entities})")
        return list(self._neighbors.get(o, ()))

    def has_train_triple(self, t: Triple) -> bool:
        return t in self._train_set

    def triple_names(self, t: Triple) -> tuple[str, str, str]:
        return (self.entities[t.s], self.relations[t.r], self.entities[t.o])

    # -- edits -------------------------------------------------------------

    def apply_edit(self, edit: Edit) -> "KnowledgeGraph":
        """Return a new graph with the edit applied to the train split."""
        t = edit.triple
        if not (0 <= t.s < self.n_entities and 0 <= t.o < self.n_entities and 0 <= t.r < self.n_relations):
            raise EditError(f"edit triple {t} out of range")
        if edit.kind == "add":
            if t in self._train_set:
                raise EditError(f"cannot add duplicate triple {self.triple_names(t)}")
            new_train = self.train + (t,)
        else:
            if t not in self._train_set:
                raise EditError(f"cannot remove absent triple {self.triple_names(t)}")
            new_train = tuple(x for x in self.train if x != t)
        return KnowledgeGraph(
            self.entities,
            self.relations,
            new_train,
            self.valid,
            self.test,
            duplicates_dropped=self.duplicates_dropped,
            name=self.name,
        )

    def apply_edits(self, edits: Iterable[Edit]) -> "KnowledgeGraph":
        kg = self
        for e in edits:
            kg = kg.apply_edit(e)
        return kg

    # -- identity ----------------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return (
            self.entities == other.entities
            and self.relations == other.relations
            and set(self.train) == set(other.train)
            and set(self.valid) == set(other.valid)
            and set(self.test) == set(other.test)
        )

    def __hash__(self):
        return hash(self.dataset_hash())

    def dataset_hash(self) -> str:
        """Content hash over name maps and sorted splits (order-insensitive)."""
        h = hashlib.sha256()
        for part in (self.entities, self.relations):
            for name in part:
                h.update(name.encode("utf-8"))
                h.update(b"\x00")
            h.update(b"\x01")
        for split in SPLITS:
            for t in sorted(getattr(self, split)):
                h.update(f"{t.s},{t.r},{t.o};".encode())
            h.update(b"\x01")
        return h.hexdigest()

    def __repr__(self):
        return (
            f"KnowledgeGraph({self.name!r}, entities={self.n_entities}, relations={self.n_relations}, "
            f"train={len(self.train)}, valid={len(self.valid)}, test={len(self.test)})"
        )


# -- file I/O ---------------------------------------------------------------


def _read_split(path: Path) -> list[tuple[str, str, str]]:
    if not path.is_file():
        raise DataError(f"missing split file: {path}")
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(parts):
                raise MalformedLineError(path, lineno, line)
            rows.append(tuple(parts))
    if not rows:
        raise DataError(f"empty split: {path}")
    return rows


def load_dataset(dir_path, name: str | None = None, write_manifest: bool = True) -> KnowledgeGraph:
    """Load train.txt/valid.txt/test.txt from a directory into an indexed graph.

    Entity and relation indices are assigned in first-appearance order over
    train, then valid, then test. Duplicate lines within a split are dropped
    (counted in ``duplicates_dropped``); cross-split duplicates are kept.
    A plain-text manifest with the counts is written beside the data unless
    disabled.
    """
    dir_path = Path(dir_path)
    raw = {split: _read_split(dir_path / f"{split}.txt") for split in SPLITS}

    entities: list[str] = []
    relations: list[str] = []
    ent_idx: dict[str, int] = {}
    rel_idx: dict[str, int] = {}

    def ent(nm: str) -> int:
        if nm not in ent_idx:
            ent_idx[nm] = len(entities)
            entities.append(nm)
        return ent_idx[nm]

    def rel(nm: str) -> int:
        if nm not in rel_idx:
            rel_idx[nm] = len(relations)
            relations.append(nm)
        return rel_idx[nm]

    splits: dict[str, tuple[Triple, ...]] = {}
    dropped: dict[str, int] = {}
    for split in SPLITS:
        seen: set[Triple] = set()
        out: list[Triple] = []
        n_dup = 0
        for s, r, o in raw[split]:
            t = Triple(ent(s), rel(r), ent(o))
            if t in seen:
                n_dup += 1
                continue
            seen.add(t)
            out.append(t)
        splits[split] = tuple(out)
        dropped[split] = n_dup

    kg = KnowledgeGraph(
        tuple(entities),
        tuple(relations),
        splits["train"],
        splits["valid"],
        splits["test"],
        duplicates_dropped=dropped,
        name=name or dir_path.name,
    )
    if write_manifest:
        try:
            write_dataset_manifest(kg, dir_path)
        except OSError:
            pass  # read-only data directories are fine
    return kg


def write_dataset_manifest(kg: KnowledgeGraph, dir_path) -> Path:
    dir_path = Path(dir_path)
    lines = [
        f"name={kg.name}",
        f"path={dir_path.resolve()}",
        f"entities={kg.n_entities}",
        f"relations={kg.n_relations}",
        f"train={len(kg.train)}",
        f"valid={len(kg.valid)}",
        f"test={len(kg.test)}",
        f"duplicates_dropped={sum(kg.duplicates_dropped.values())}",
        f"hash={kg.dataset_hash()}",
    ]
    out = dir_path / "manifest.txt"
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out


def save_dataset(kg: KnowledgeGraph, dir_path) -> None:
    """Write the splits back out as tab-separated files."""
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    for split in SPLITS:
        with open(dir_path / f"{split}.txt", "w", encoding="utf-8") as fh:
            for t in getattr(kg, split):
                s, r, o = kg.triple_names(t)
                fh.write(f"{s}\t{r}\t{o}\n")
