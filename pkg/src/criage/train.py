"""Binary cross-entropy training over 1-vs-all labels, and ranking evaluation.

The loss for a graph is the sum over observed (s, r) training pairs and over
ALL objects of BCE between the model's truth probability and the 0/1 label,
plus an L2 penalty on every embedding entry:

    L = sum_{(s,r)} sum_o BCE(p(s,r,o), y) + lam * (||E||_F^2 + ||R||_F^2)

where p = sigma(psi) for distmult and sigma(-psi) for transe (so larger
distance always means less plausible). Optimized with AdaGrad; runs are
bit-reproducible given the seed because all updates are plain deterministic
numpy ops.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.special import expit

from .errors import DivergenceError
from .kg import KnowledgeGraph
from .models import DISTMULT, EmbeddingModel, init_model, plausibility, score_all_objects

_PSI_FLOOR = 1e-12  # transe distance floor to keep unit directions defined


@dataclass
class TrainConfig:
    model: str = DISTMULT
    dim: int = 10
    lr: float = 0.5
    epochs: int = 200
    l2: float = 1e-3
    batch_size: int = 0  # 0 = full batch over (s, r) pair rows
    seed: int = 0
    init_scale: float = 0.1
    # optional deterministic full-batch refinement after the AdaGrad epochs;
    # the influence machinery assumes a stationary point, which plain AdaGrad
    # does not reach at desk-scale budgets
    refine: str = "none"  # "none" | "lbfgs"
    refine_gtol: float = 1e-8
    refine_maxiter: int = 20000
    # label construction is fixed: one row per observed (s, r) pair with the
    # full object vocabulary as 1-vs-all targets
    negative_handling: str = field(default="1-vs-all", repr=False)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RankingMetrics:
    mrr: float
    hits1: float
    hits3: float
    hits10: float
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


# -- label structure ---------------------------------------------------------


class LabelArrays:
    """Dense 1-vs-all label layout: one row per observed (s, r) train pair."""

    def __init__(self, kg: KnowledgeGraph):
        pairs = sorted(kg.label_table)
        self.pairs_s = np.array([p[0] for p in pairs], dtype=np.intp)
        self.pairs_r = np.array([p[1] for p in pairs], dtype=np.intp)
        self.Y = np.zeros((len(pairs), kg.n_entities))
        for i, p in enumerate(pairs):
            self.Y[i, list(kg.label_table[p])] = 1.0
        self.n_entities = kg.n_entities
        self.n_relations = kg.n_relations

    @property
    def n_pairs(self) -> int:
        return len(self.pairs_s)


def _bce_with_logits(logits: np.ndarray, y: np.ndarray) -> float:
    # max(x,0) - x*y + log(1 + exp(-|x|)), numerically stable
    return float(np.sum(np.maximum(logits, 0.0) - logits * y + np.log1p(np.exp(-np.abs(logits)))))


def _cell_logits(model: EmbeddingModel, Z: np.ndarray) -> np.ndarray:
    """Logits of the truth probability for each (pair row, object) cell."""
    if model.kind == DISTMULT:
        return Z @ model.E.T
    diff = Z[:, None, :] - model.E[None, :, :]
    return -np.sqrt(np.maximum(np.einsum("pnd,pnd->pn", diff, diff), _PSI_FLOOR**2))


def loss(model: EmbeddingModel, kg: KnowledgeGraph, lam: float, labels: LabelArrays | None = None) -> float:
    labels = labels or LabelArrays(kg)
    Z = _encode_rows(model, labels.pairs_s, labels.pairs_r)
    logits = _cell_logits(model, Z)
    reg = lam * (float(np.sum(model.E**2)) + float(np.sum(model.R**2)))
    return _bce_with_logits(logits, labels.Y) + reg


def _encode_rows(model, s_idx, r_idx):
    E_s = model.E[s_idx]
    E_r = model.R[r_idx]
    return E_s * E_r if model.kind == DISTMULT else E_s + E_r


def loss_gradients(
    model: EmbeddingModel,
    kg: KnowledgeGraph,
    lam: float,
    labels: LabelArrays | None = None,
    rows: np.ndarray | None = None,
    l2_fraction: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the loss w.r.t. the entity and relation tables.

    ``rows`` restricts to a subset of pair rows (minibatch); the L2 term is
    scaled by ``l2_fraction`` so per-epoch regularization matches the full loss.
    """
    labels = labels or LabelArrays(kg)
    s_idx, r_idx, Y = labels.pairs_s, labels.pairs_r, labels.Y
    if rows is not None:
        s_idx, r_idx, Y = s_idx[rows], r_idx[rows], Y[rows]

    dE = np.zeros_like(model.E)
    dR = np.zeros_like(model.R)
    if model.kind == DISTMULT:
        Z = model.E[s_idx] * model.R[r_idx]
        W = expit(Z @ model.E.T) - Y  # d loss / d logit per cell
        dE += W.T @ Z
        M = W @ model.E
        np.add.at(dE, s_idx, model.R[r_idx] * M)
        np.add.at(dR, r_idx, model.E[s_idx] * M)
    else:
        Z = model.E[s_idx] + model.R[r_idx]
        U = Z[:, None, :] - model.E[None, :, :]
        psi = np.sqrt(np.maximum(np.einsum("pnd,pnd->pn", U, U), _PSI_FLOOR**2))
        coef = (Y - expit(-psi)) / psi  # (d loss / d psi) / psi
        G = np.einsum("pn,pnd->pd", coef, U)
        np.add.at(dE, s_idx, G)
        np.add.at(dR, r_idx, G)
        dE -= np.einsum("pn,pnd->nd", coef, U)
    dE += (2.0 * lam * l2_fraction) * model.E
    dR += (2.0 * lam * l2_fraction) * model.R
    return dE, dR


# -- training ------------------------------------------------------------------


def train(
    kg: KnowledgeGraph,
    config: TrainConfig,
    on_epoch=None,
    init: EmbeddingModel | None = None,
) -> EmbeddingModel:
    """AdaGrad training; deterministic for a fixed config and graph.

    Raises DivergenceError if the epoch loss goes non-finite. ``on_epoch``
    receives (epoch, loss) after every epoch.
    """
    if not kg.train:
        raise ValueError("cannot train on an empty train split")
    init_seed, shuffle_seed = np.random.SeedSequence(config.seed).spawn(2)
    rng = np.random.default_rng(shuffle_seed)
    if init is not None:
        model = init.copy()
    else:
        model = init_model(
            config.model, kg.n_entities, kg.n_relations, config.dim, init_seed,
            scale=config.init_scale, entities=kg.entities, relations=kg.relations,
            dataset_hash=kg.dataset_hash(),
        )

    labels = LabelArrays(kg)
    P = labels.n_pairs
    batch = P if config.batch_size in (0, None) or config.batch_size >= P else config.batch_size
    accE = np.zeros_like(model.E)
    accR = np.zeros_like(model.R)
    eps = 1e-8

    for epoch in range(config.epochs):
        order = rng.permutation(P) if batch < P else np.arange(P)
        for start in range(0, P, batch):
            rows = order[start : start + batch]
            dE, dR = loss_gradients(model, kg, config.l2, labels, rows=rows, l2_fraction=len(rows) / P)
            accE += dE * dE
            accR += dR * dR
            model.E -= config.lr * dE / (np.sqrt(accE) + eps)
            model.R -= config.lr * dR / (np.sqrt(accR) + eps)
        epoch_loss = loss(model, kg, config.l2, labels)
        if not np.isfinite(epoch_loss):
            raise DivergenceError(
                f"non-finite loss {epoch_loss} at epoch {epoch} (lr={config.lr}, l2={config.l2})"
            )
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss)
    if config.refine == "lbfgs":
        refine_to_stationarity(model, kg, config.l2, labels,
                               gtol=config.refine_gtol, maxiter=config.refine_maxiter)
    elif config.refine != "none":
        raise ValueError(f"unknown refine mode {config.refine!r}")
    model.meta = {"train_config": config.to_dict()}
    return model


# -- stationarity refinement -----------------------------------------------------


def pack_params(model: EmbeddingModel) -> np.ndarray:
    return np.concatenate([model.E.ravel(), model.R.ravel()])


def unpack_params(model: EmbeddingModel, x: np.ndarray) -> None:
    n = model.n_entities * model.dim
    model.E[:] = x[:n].reshape(model.n_entities, model.dim)
    model.R[:] = x[n:].reshape(model.n_relations, model.dim)


def refine_to_stationarity(
    model: EmbeddingModel,
    kg: KnowledgeGraph,
    lam: float,
    labels: LabelArrays | None = None,
    gtol: float = 1e-8,
    maxiter: int = 20000,
    x0: np.ndarray | None = None,
):
    """Deterministic full-batch L-BFGS to a (near-)stationary point."""
    from scipy.optimize import minimize

    labels = labels or LabelArrays(kg)

    def fg(x):
        unpack_params(model, x)
        L = loss(model, kg, lam, labels)
        dE, dR = loss_gradients(model, kg, lam, labels)
        return L, np.concatenate([dE.ravel(), dR.ravel()])

    res = minimize(
        fg, x0 if x0 is not None else pack_params(model), jac=True, method="L-BFGS-B",
        options={"maxiter": maxiter, "ftol": 1e-16, "gtol": gtol, "maxcor": 30},
    )
    unpack_params(model, res.x)
    if not np.isfinite(res.fun):
        raise DivergenceError(f"refinement diverged: loss={res.fun}")
    return res


# -- ranking evaluation --------------------------------------------------------


def known_positives(kg: KnowledgeGraph) -> dict[tuple[int, int], set[int]]:
    """Objects known true for each (s, r) across all splits (filtered setting)."""
    known: dict[tuple[int, int], set[int]] = {}
    for split in ("train", "valid", "test"):
        for t in getattr(kg, split):
            known.setdefault((t.s, t.r), set()).add(t.o)
    return known


def ranks_for_triple(model, kg, triple, known=None) -> tuple[int, int]:
    """(filtered rank, raw rank) of the true object, pessimistic on ties."""
    known = known if known is not None else known_positives(kg)
    plaus = plausibility(model, score_all_objects(model, triple.s, triple.r))
    true_p = plaus[triple.o]
    others = np.ones(len(plaus), dtype=bool)
    others[triple.o] = False
    raw = 1 + int(np.sum(plaus[others] >= true_p))
    filtered_out = known.get((triple.s, triple.r), set()) - {triple.o}
    if filtered_out:
        others[list(filtered_out)] = False
    filt = 1 + int(np.sum(plaus[others] >= true_p))
    return filt, raw


def evaluate_ranking(model: EmbeddingModel, kg: KnowledgeGraph, split: str = "test") -> RankingMetrics:
    """Filtered object-ranking metrics over a split (MRR in [0,1], Hits in %)."""
    triples = getattr(kg, split)
    known = known_positives(kg)
    rr, h1, h3, h10 = 0.0, 0, 0, 0
    for t in triples:
        rank, _ = ranks_for_triple(model, kg, t, known)
        rr += 1.0 / rank
        h1 += rank <= 1
        h3 += rank <= 3
        h10 += rank <= 10
    n = len(triples)
    return RankingMetrics(rr / n, 100.0 * h1 / n, 100.0 * h3 / n, 100.0 * h10 / n, n)
