"""Ground truth and comparison methods: exact leave-one-out retraining,
influence functions over the full embedding parameter vector, and naive
attack baselines.

`exact_delta` retrains from scratch (cold protocol by default) with the same
seed and epochs as the reference model, so the identity edit gives exactly
zero and every delta reflects the edit alone. Results are cached on disk
keyed by (dataset hash, edit, config) so candidate sweeps are resumable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit

from .errors import NumericalError
from .kg import Edit, KnowledgeGraph, Triple
from .models import DISTMULT, EmbeddingModel, encode, score
from .train import (
    LabelArrays,
    TrainConfig,
    loss_gradients,
    pack_params,
    refine_to_stationarity,
    train,
    unpack_params,
)

IF_PARAMETER_CAP = 4096


@dataclass
class OracleConfig:
    """Retraining protocol for exact deltas.

    cold: fresh seed-fixed init, the configured trainer, full run.
    warm: start from the current model. With engine="newton" the edited loss
    is driven to stationarity by preconditioned Newton steps reusing the base
    Hessian factorization — the fast path for candidate sweeps around a
    converged model.
    """

    protocol: str = "cold"
    epochs: int | None = None  # None: reuse the train config's epochs
    seed: int | None = None  # None: reuse the train config's seed
    engine: str = "adagrad"  # "adagrad" | "newton" (warm only)
    gtol: float = 1e-7  # newton engine stationarity target

    def resolve(self, train_config: TrainConfig) -> TrainConfig:
        cfg = train_config
        if self.epochs is not None:
            cfg = replace(cfg, epochs=self.epochs)
        if self.seed is not None:
            cfg = replace(cfg, seed=self.seed)
        return cfg


class OracleCache:
    """Tiny JSON-per-key disk cache; safe to delete at any time."""

    def __init__(self, directory=None):
        self.directory = Path(directory) if directory else None
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._mem: dict[str, float] = {}

    @staticmethod
    def key(payload) -> str:
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    def get(self, key: str):
        if key in self._mem:
            return self._mem[key]
        if self.directory:
            f = self.directory / f"{key}.json"
            if f.is_file():
                val = json.loads(f.read_text())["value"]
                self._mem[key] = val
                return val
        return None

    def put(self, key: str, value: float):
        self._mem[key] = value
        if self.directory:
            (self.directory / f"{key}.json").write_text(json.dumps({"value": value}))


def oracle_base_model(kg: KnowledgeGraph, train_config: TrainConfig,
                      oracle_config: OracleConfig | None = None) -> EmbeddingModel:
    """Reference model trained under the oracle's resolved protocol."""
    oc = oracle_config or OracleConfig()
    return train(kg, oc.resolve(train_config))


class WarmRetrainer:
    """Drives the edited loss to stationarity starting at a converged base.

    Newton fixed-point iteration x <- x - H_base^{-1} grad L_edited(x): one
    edit barely changes the Hessian, so the base factorization is an almost
    exact Newton preconditioner and a handful of cheap steps converge. Falls
    back to L-BFGS whenever the iteration stalls. The returned model is a
    verified stationary point of the edited loss.
    """

    def __init__(self, base: EmbeddingModel, kg: KnowledgeGraph, lam: float,
                 gtol: float = 1e-7, max_steps: int = 80):
        self.base = base
        self.kg = kg
        self.lam = lam
        self.gtol = gtol
        self.max_steps = max_steps
        H = build_full_hessian(base, kg, lam)
        bump = 1e-9 * float(np.mean(np.diag(H)))
        self._chol = cho_factor(H + bump * np.eye(H.shape[0]))
        self._x_base = pack_params(base)

    def jumpstart(self, edits: list[Edit], cap: float = 0.25) -> np.ndarray:
        """First-order Newton guess for the edited optimum.

        The displacement is clipped: for poorly-fitting added facts the raw
        Newton guess badly overshoots (the true response is self-limiting as
        the sigmoid saturates, which a constant-coefficient step ignores).
        """
        g = np.zeros_like(self._x_base)
        for e in edits:
            sign = 1.0 if e.kind == "remove" else -1.0
            g += sign * triple_loss_gradient(self.base, e.triple)
        move = cho_solve(self._chol, g)
        biggest = float(np.max(np.abs(move)))
        if biggest > cap:
            move *= cap / biggest
        return self._x_base + move

    def retrain(self, edited: KnowledgeGraph, edits: list[Edit] | None = None) -> EmbeddingModel:
        labels = LabelArrays(edited)
        model = self.base.copy()
        x = self.jumpstart(edits) if edits else self._x_base.copy()
        if not np.all(np.isfinite(x)):
            x = self._x_base.copy()
        def grad_at(xv):
            unpack_params(model, xv)
            dE, dR = loss_gradients(model, edited, self.lam, labels)
            g = np.concatenate([dE.ravel(), dR.ravel()])
            return g, float(np.max(np.abs(g)))

        g, gmax = grad_at(x)
        if not np.isfinite(gmax):
            x = self._x_base.copy()
            g, gmax = grad_at(x)
        best_gmax, best_x = gmax, x.copy()
        stalled = 0
        alpha = 1.0  # persistent damping: edits add curvature the base
        streak = 0   # factorization does not know about, so steps may overshoot
        for _ in range(self.max_steps):
            if gmax < self.gtol:
                return model
            step = cho_solve(self._chol, g)
            for _bt in range(8):
                g_new, gmax_new = grad_at(x - alpha * step)
                if np.isfinite(gmax_new) and gmax_new < gmax:
                    break
                alpha *= 0.5
                streak = 0
            else:
                break  # no improving step along the preconditioned direction
            x = x - alpha * step
            g, gmax = g_new, gmax_new
            streak += 1
            if streak >= 3 and alpha < 1.0:
                alpha = min(1.0, 2.0 * alpha)
                streak = 0
            if gmax < 0.7 * best_gmax:
                stalled = 0
            elif gmax >= best_gmax:
                stalled += 1
                if stalled >= 8:
                    break
            if gmax < best_gmax:
                best_gmax, best_x = gmax, x.copy()
        refine_to_stationarity(model, edited, self.lam, labels,
                               gtol=self.gtol, maxiter=5000, x0=best_x)
        return model


def exact_delta(
    kg: KnowledgeGraph,
    target: Triple,
    edit,
    train_config: TrainConfig,
    oracle_config: OracleConfig | None = None,
    base_model: EmbeddingModel | None = None,
    cache: OracleCache | None = None,
    retrainer: WarmRetrainer | None = None,
) -> float:
    """psi(target; trained on G) - psi(target; retrained on edited G).

    ``edit`` may be a single Edit or a sequence (the empty sequence is the
    identity and yields exactly 0 under the cold protocol). For warm/newton
    sweeps pass a shared :class:`WarmRetrainer` to amortize the Hessian
    factorization.
    """
    oc = oracle_config or OracleConfig()
    cfg = oc.resolve(train_config)
    edits = [edit] if isinstance(edit, Edit) else list(edit)

    key = None
    if cache is not None:
        key = OracleCache.key(
            {
                "kg": kg.dataset_hash(),
                "target": list(target),
                "edits": [[e.kind, list(e.triple)] for e in edits],
                "config": cfg.to_dict(),
                "protocol": oc.protocol,
                "engine": oc.engine,
            }
        )
        hit = cache.get(key)
        if hit is not None:
            return hit

    if base_model is None:
        base_model = train(kg, cfg)
    edited = kg.apply_edits(edits)
    if oc.protocol == "cold":
        if oc.engine != "adagrad":
            raise ValueError("the newton engine requires the warm protocol")
        retrained = train(edited, cfg)
    elif oc.protocol == "warm":
        if oc.engine == "newton":
            if retrainer is None:
                retrainer = WarmRetrainer(base_model, kg, cfg.l2, gtol=oc.gtol)
            retrained = retrainer.retrain(edited, edits)
        else:
            retrained = train(edited, cfg, init=base_model)
    else:
        raise ValueError(f"unknown oracle protocol {oc.protocol!r}")
    value = score(base_model, *target) - score(retrained, *target)
    if cache is not None and key is not None:
        cache.put(key, value)
    return value


# -- influence functions -------------------------------------------------------


def _entity_slice(i: int, d: int) -> slice:
    return slice(i * d, (i + 1) * d)


def triple_loss_gradient(model: EmbeddingModel, triple: Triple) -> np.ndarray:
    """Gradient of a single triple's positive-cell BCE loss over the full
    flattened parameter vector (entity rows then relation rows)."""
    if model.kind != DISTMULT:
        raise NotImplementedError("influence functions are implemented for multiplicative models")
    n, m, d = model.n_entities, model.n_relations, model.dim
    s, r, o = triple
    z = encode(model, s, r)
    coef = expit(float(z @ model.E[o])) - 1.0  # d(-log sigma(psi)) / d psi
    g = np.zeros((n + m) * d)
    g[_entity_slice(s, d)] += coef * (model.R[r] * model.E[o])
    g[_entity_slice(o, d)] += coef * z
    g[_entity_slice(n + r, d)] += coef * (model.E[s] * model.E[o])
    return g


def build_full_hessian(model: EmbeddingModel, kg: KnowledgeGraph, lam: float,
                       labels: LabelArrays | None = None) -> np.ndarray:
    """Analytic Hessian of the full training loss over every embedding entry.

    Quadratic in the parameter count; only usable on small graphs and small
    dimensions, which is exactly the regime the comparison runs in.
    """
    if model.kind != DISTMULT:
        raise NotImplementedError("influence functions are implemented for multiplicative models")
    labels = labels or LabelArrays(kg)
    E, R = model.E, model.R
    N, M, d = model.n_entities, model.n_relations, model.dim
    Nd = N * d
    n_params = (N + M) * d
    H = np.zeros((n_params, n_params))
    H_EE = H[:Nd, :Nd].reshape(N, d, N, d)
    H_ER = H[:Nd, Nd:].reshape(N, d, M, d)
    H_RE = H[Nd:, :Nd].reshape(M, d, N, d)
    H_RR = H[Nd:, Nd:].reshape(M, d, M, d)

    s_idx, r_idx, Y = labels.pairs_s, labels.pairs_r, labels.Y
    Z = E[s_idx] * R[r_idx]
    S = Z @ E.T
    sig = expit(S)
    C = sig * (1.0 - sig)
    W = sig - Y

    # object-object diagonal blocks: sum_p c_pt z_p z_p^T for each object t
    Hoo = np.einsum("pt,pi,pj->tij", C, Z, Z)
    for t in range(N):
        H_EE[t, :, t, :] += Hoo[t]

    for p in range(len(s_idx)):
        s, r = int(s_idx[p]), int(r_idx[p])
        c, w, z = C[p], W[p], Z[p]
        A = (E * c[:, None]).T @ E  # sum_t c_t e_t e_t^T
        Ew = w @ E  # sum_t w_t e_t
        # subject-subject and relation-relation blocks
        H_EE[s, :, s, :] += np.outer(R[r], R[r]) * A
        H_RR[r, :, r, :] += np.outer(E[s], E[s]) * A
        # subject-relation cross block
        sr = (R[r][:, None] * A) * E[s][None, :] + np.diag(Ew)
        H_ER[s, :, r, :] += sr
        H_RE[r, :, s, :] += sr.T
        # subject-object and relation-object cross blocks, all objects at once
        gs = (R[r] * E) * c[:, None]  # c_t * x_{r,t}
        so = gs[:, :, None] * z[None, None, :]  # (t, d, d)
        so += w[:, None, None] * np.diag(R[r])[None, :, :]
        H_EE[s] += so.transpose(1, 0, 2)
        for t in range(N):
            H_EE[t, :, s, :] += so[t].T
        gr = (E[s] * E) * c[:, None]
        ro = gr[:, :, None] * z[None, None, :]
        ro += w[:, None, None] * np.diag(E[s])[None, :, :]
        H_RE[r] += ro.transpose(1, 0, 2)
        for t in range(N):
            H_ER[t, :, r, :] += ro[t].T

    H += 2.0 * lam * np.eye(n_params)
    return H


class InfluenceFunctions:
    """Scores candidate edits by their estimated effect on a target triple's
    loss, oriented like the retraining delta (positive = score drop).

    The full variant solves against the damped loss Hessian over every
    embedding parameter and is restricted to small parameter counts; the
    Hessian-free variant replaces the solve with the identity.
    """

    def __init__(
        self,
        model: EmbeddingModel,
        kg: KnowledgeGraph,
        lam: float,
        with_hessian: bool = True,
        parameter_cap: int = IF_PARAMETER_CAP,
        damping: float | None = None,
        hessian_override: np.ndarray | None = None,
    ):
        self.model = model
        self.with_hessian = with_hessian
        n_params = (model.n_entities + model.n_relations) * model.dim
        self._chol = None
        if with_hessian:
            if n_params > parameter_cap:
                raise NumericalError(
                    f"full influence functions need {n_params} parameters; "
                    f"cap is {parameter_cap} (use with_hessian=False)"
                )
            H = hessian_override if hessian_override is not None else build_full_hessian(model, kg, lam)
            damp = damping if damping is not None else 1e-3 * float(np.mean(np.diag(H)))
            self._chol = cho_factor(H + damp * np.eye(n_params))
        self._target_cache: dict[Triple, np.ndarray] = {}

    def _target_vector(self, target: Triple) -> np.ndarray:
        if target not in self._target_cache:
            g = triple_loss_gradient(self.model, target)
            self._target_cache[target] = cho_solve(self._chol, g) if self._chol is not None else g
        return self._target_cache[target]

    def delta(self, target: Triple, edit: Edit) -> float:
        u = self._target_vector(target)
        g_c = triple_loss_gradient(self.model, edit.triple)
        val = float(g_c @ u)
        return val if edit.kind == "remove" else -val


def influence_function_delta(
    model: EmbeddingModel,
    kg: KnowledgeGraph,
    target: Triple,
    edit: Edit,
    lam: float,
    with_hessian: bool = True,
    parameter_cap: int = IF_PARAMETER_CAP,
) -> float:
    """One-shot convenience wrapper around :class:`InfluenceFunctions`."""
    return InfluenceFunctions(
        model, kg, lam, with_hessian=with_hessian, parameter_cap=parameter_cap
    ).delta(target, edit)


# -- naive attack baselines ------------------------------------------------------


def naive_attack(model, kg, inverter, target: Triple, kind: str, seed: int = 0):
    """Baseline candidate generators: uniform random fake fact, the inverted
    negated target encoding, or the highest-scored existing neighbor."""
    if kind == "random":
        rng = np.random.default_rng(seed)
        for _ in range(10_000):
            sp = int(rng.integers(kg.n_entities))
            rp = int(rng.integers(kg.n_relations))
            if not kg.has_train_triple(Triple(sp, rp, target.o)):
                return (sp, rp)
        raise NumericalError("could not sample a fake fact; graph is saturated")
    if kind == "opposite":
        from .attack import decode_candidate

        return decode_candidate(inverter, -encode(model, target.s, target.r))
    if kind == "score_rank":
        neighbors = kg.neighbors_of_object(target.o)
        if not neighbors:
            raise ValueError(f"object {target.o} has no neighbors")
        scores = [score(model, sp, rp, target.o) for sp, rp in neighbors]
        return neighbors[int(np.argmax(scores))]
    raise ValueError(f"unknown naive attack kind {kind!r}")
