"""First-order estimates of how a single graph edit changes a target score.

For a target ⟨s,r,o⟩ and a candidate fact ⟨s',r',o⟩ sharing the object, the
retrained object embedding is approximated by expanding the stationarity
condition of the edited loss around the current solution, giving

    new_psi - psi  =  (1 - phi) * z_{s,r} . (H_o + phi(1-phi) z' z'^T)^{-1} z'

with z' the candidate's subject-relation encoding and phi its current truth
probability. The rank-one system is solved with the Sherman-Morrison
identity so one Hessian inverse serves thousands of candidates. Removal is
the exact negation. Subject-side (⟨s,r',o'⟩), relation-swap (⟨s,r',o⟩) and
additive-model variants follow the same pattern.

Sign convention: `score_change` is new_psi - psi; `DeltaEstimate.delta` is
the influence orientation psi - new_psi (positive when the edit hurts the
target).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit

from .errors import NumericalError, SingularHessianError
from .kg import KnowledgeGraph, Triple
from .models import DISTMULT, TRANSE, EmbeddingModel, encode, object_encode, score
from .train import LabelArrays

_SYMMETRY_TOL = 1e-10
_CONDITION_LIMIT = 1e12
_PSI_FLOOR = 1e-12


@dataclass
class ObjectHessian:
    """d x d second derivative of the training loss w.r.t. one embedding row."""

    entity: int
    H: np.ndarray
    lam: float
    side: str = "object"  # "object" for e_o, "subject" for e_s

    def __post_init__(self):
        asym = float(np.max(np.abs(self.H - self.H.T))) if self.H.size else 0.0
        if asym > _SYMMETRY_TOL:
            raise NumericalError(f"Hessian asymmetric by {asym:.2e}")
        try:
            self._chol = cho_factor(self.H)
        except np.linalg.LinAlgError:
            self._chol = None
        if self._chol is None and self.lam == 0.0:
            raise SingularHessianError(
                f"Hessian for entity {self.entity} is singular and lam=0; "
                "use lam > 0 to guarantee positive definiteness"
            )
        if self._chol is None:
            raise NumericalError(f"Hessian for entity {self.entity} not positive definite")
        self.H_inv = cho_solve(self._chol, np.eye(self.H.shape[0]))

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    def solve(self, v: np.ndarray) -> np.ndarray:
        return cho_solve(self._chol, v)


@dataclass
class DeltaEstimate:
    """Estimated effect of one candidate edit on one target triple."""

    target: Triple
    candidate: object  # (s', r'), (r', o'), r', or a raw vector
    score_change: float  # new_psi - psi
    phi: float  # candidate truth probability at the current model
    method: str  # taylor | exact | influence-function | baseline
    form: str = "add"  # add | remove | subject-side | sro | transe-add
    flag: str | None = None
    new_score: float | None = None

    @property
    def delta(self) -> float:
        """psi - new_psi: positive when the edit lowers the target score."""
        return -self.score_change


# -- Hessians -----------------------------------------------------------------


def _pair_encodings(model: EmbeddingModel, labels: LabelArrays) -> np.ndarray:
    E_s = model.E[labels.pairs_s]
    E_r = model.R[labels.pairs_r]
    return E_s * E_r if model.kind == DISTMULT else E_s + E_r


def _entity_hessian_distmult(model, labels, v: int) -> np.ndarray:
    """Full d^2 L / d e_v^2 for a multiplicative model: object-role cells,
    subject-role cells for pairs headed by v, and the quadratic self cells
    (pair headed by v scoring v itself)."""
    d = model.dim
    E, R = model.E, model.R
    Z = _pair_encodings(model, labels)
    subj_rows = labels.pairs_s == v

    # cells (p, v) with subject != v: psi linear in e_v with gradient z_p
    sig = expit(Z @ E[v])
    c = sig * (1.0 - sig)
    c_obj = np.where(subj_rows, 0.0, c)
    H = (Z * c_obj[:, None]).T @ Z

    for p in np.flatnonzero(subj_rows):
        r = labels.pairs_r[p]
        X = R[r] * E  # x_{r,t} for every object t
        s_row = expit(X @ E[v])
        c_row = s_row * (1.0 - s_row)
        keep = c_row.copy()
        keep[v] = 0.0  # self cell handled separately
        H += (X * keep[:, None]).T @ X
        # self cell psi = e_v . (R[r] * e_v): gradient 2 R*e_v, curvature 2 diag(R)
        g = 2.0 * R[r] * E[v]
        w = s_row[v] - labels.Y[p, v]
        H += c_row[v] * np.outer(g, g) + w * 2.0 * np.diag(R[r])
    return H


def _entity_hessian_transe(model, labels, v: int) -> np.ndarray:
    """Full d^2 L / d e_v^2 for an additive model. Object-role and
    subject-role cells share the same curvature form c*nn^T + (y-p)(I-nn^T)/psi;
    cells with subject == object == v do not depend on e_v."""
    d = model.dim
    E, R = model.E, model.R
    Z = _pair_encodings(model, labels)
    subj_rows = labels.pairs_s == v
    H = np.zeros((d, d))

    def accumulate(U, psi, p_prob, y, weights):
        Nv = U / psi[:, None]
        c = p_prob * (1.0 - p_prob) * weights
        coef = (y - p_prob) / psi * weights
        out = (Nv * c[:, None]).T @ Nv
        out += np.eye(d) * float(np.sum(coef))
        out -= (Nv * coef[:, None]).T @ Nv
        return out

    # v as object: cells (p, v) for pairs not headed by v
    U = Z - E[v]
    psi = np.sqrt(np.maximum(np.einsum("pd,pd->p", U, U), _PSI_FLOOR**2))
    H += accumulate(U, psi, expit(-psi), labels.Y[:, v], (~subj_rows).astype(float))

    # v as subject: cells (p, t) for pairs headed by v, excluding t == v
    for p in np.flatnonzero(subj_rows):
        r = labels.pairs_r[p]
        Uc = (E[v] + R[r]) - E
        psic = np.sqrt(np.maximum(np.einsum("nd,nd->n", Uc, Uc), _PSI_FLOOR**2))
        keep = np.ones(model.n_entities)
        keep[v] = 0.0
        H += accumulate(Uc, psic, expit(-psic), labels.Y[p], keep)
    return H


def hessian_matrix(
    model: EmbeddingModel,
    kg: KnowledgeGraph,
    v: int,
    lam: float,
    labels: LabelArrays | None = None,
) -> np.ndarray:
    """Raw full loss Hessian w.r.t. entity v's embedding row plus 2*lam*I.

    Matches a central-difference Hessian of the training loss at any point;
    positive definiteness is only expected near a trained optimum.
    """
    if not 0 <= v < model.n_entities:
        raise IndexError(f"entity index {v} out of range")
    labels = labels or LabelArrays(kg)
    if model.kind == DISTMULT:
        H = _entity_hessian_distmult(model, labels, v)
    else:
        H = _entity_hessian_transe(model, labels, v)
    H = 0.5 * (H + H.T)  # kill accumulation round-off asymmetry
    H += 2.0 * lam * np.eye(model.dim)
    return H


def entity_hessian(
    model: EmbeddingModel,
    kg: KnowledgeGraph,
    v: int,
    lam: float,
    labels: LabelArrays | None = None,
    side: str = "object",
) -> ObjectHessian:
    """Hessian packaged for the estimators; requires positive definiteness,
    which holds at converged models (diagonal blocks of a local minimum)."""
    return ObjectHessian(v, hessian_matrix(model, kg, v, lam, labels), lam, side=side)


def hessian_object(model, kg, o, lam, labels=None) -> ObjectHessian:
    """Hessian used when the edit is absorbed by the target's object."""
    return entity_hessian(model, kg, o, lam, labels, side="object")


def hessian_subject(model, kg, s, lam, labels=None) -> ObjectHessian:
    """Hessian used when the edit is absorbed by the target's subject."""
    return entity_hessian(model, kg, s, lam, labels, side="subject")


# -- Sherman-Morrison ---------------------------------------------------------


def sherman_morrison_solve(H_inv: np.ndarray, c: float, v: np.ndarray) -> np.ndarray:
    """(H + c v v^T)^{-1} v given H^{-1}, via the rank-one update identity."""
    w = H_inv @ v
    denom = 1.0 + c * float(v @ w)
    if abs(denom) < 1e-300 or not np.isfinite(denom):
        raise NumericalError("rank-one update made the system singular")
    return w / denom


# -- estimators -----------------------------------------------------------------


def _candidate_vector(model, candidate) -> np.ndarray:
    if isinstance(candidate, np.ndarray):
        z = np.asarray(candidate, dtype=np.float64)
    else:
        sp, rp = candidate
        z = encode(model, sp, rp)
    if not np.all(np.isfinite(z)):
        raise NumericalError("candidate encoding is not finite")
    return z


def estimate_delta_add(
    model: EmbeddingModel,
    hess: ObjectHessian,
    target: Triple,
    candidate,
) -> DeltaEstimate:
    """Score change of the target after adding ⟨s',r',o⟩ (object shared)."""
    if model.kind != DISTMULT:
        raise NotImplementedError("use estimate_delta_transe_add for additive models")
    z_c = _candidate_vector(model, candidate)
    phi = float(expit(z_c @ model.E[target.o]))
    w = sherman_morrison_solve(hess.H_inv, phi * (1.0 - phi), z_c)
    z_t = encode(model, target.s, target.r)
    change = (1.0 - phi) * float(z_t @ w)
    return DeltaEstimate(target, candidate, change, phi, "taylor", form="add")


def estimate_delta_remove(
    model: EmbeddingModel,
    kg: KnowledgeGraph,
    hess: ObjectHessian,
    target: Triple,
    neighbor: tuple[int, int],
) -> DeltaEstimate:
    """Score change after removing the training fact ⟨s',r',o⟩; the exact
    negation of the addition estimate at the same encoding."""
    sp, rp = neighbor
    if not kg.has_train_triple(Triple(sp, rp, target.o)):
        raise KeyError(f"neighbor {(sp, rp)} with object {target.o} not in train")
    est = estimate_delta_add(model, hess, target, neighbor)
    return DeltaEstimate(target, neighbor, -est.score_change, est.phi, "taylor", form="remove")


def estimate_delta_subject_side(
    model: EmbeddingModel,
    hess_s: ObjectHessian,
    target: Triple,
    candidate,
) -> DeltaEstimate:
    """Modification ⟨s,r',o'⟩: the target's subject embedding absorbs the
    edit; candidate is (r', o') or a raw x vector."""
    if model.kind != DISTMULT:
        raise NotImplementedError("subject-side estimate requires a multiplicative model")
    if isinstance(candidate, np.ndarray):
        x_c = _candidate_vector(model, candidate)
    else:
        rp, op = candidate
        x_c = object_encode(model, rp, op)
    if not np.all(np.isfinite(x_c)):
        raise NumericalError("candidate encoding is not finite")
    phi = float(expit(model.E[target.s] @ x_c))
    w = sherman_morrison_solve(hess_s.H_inv, phi * (1.0 - phi), x_c)
    x_t = object_encode(model, target.r, target.o)
    change = (1.0 - phi) * float(x_t @ w)
    return DeltaEstimate(target, candidate, change, phi, "taylor", form="subject-side")


def estimate_delta_sro(
    model: EmbeddingModel,
    hess_o: ObjectHessian,
    hess_s: ObjectHessian,
    target: Triple,
    r_prime: int,
) -> DeltaEstimate:
    """Modification ⟨s,r',o⟩: both endpoint embeddings move; the estimate is
    the sum of the object-side and subject-side single-edit terms."""
    if model.kind != DISTMULT:
        raise NotImplementedError("relation-swap estimate requires a multiplicative model")
    s, _, o = target
    phi = float(expit(score(model, s, r_prime, o)))
    c = phi * (1.0 - phi)

    z_c = encode(model, s, r_prime)
    w_o = sherman_morrison_solve(hess_o.H_inv, c, z_c)
    z_t = encode(model, target.s, target.r)
    object_term = (1.0 - phi) * float(z_t @ w_o)

    x_c = object_encode(model, r_prime, o)
    w_s = sherman_morrison_solve(hess_s.H_inv, c, x_c)
    x_t = object_encode(model, target.r, target.o)
    subject_term = (1.0 - phi) * float(x_t @ w_s)

    return DeltaEstimate(target, r_prime, object_term + subject_term, phi, "taylor", form="sro")


def estimate_delta_transe_add(
    model: EmbeddingModel,
    hess: ObjectHessian,
    target: Triple,
    candidate: tuple[int, int],
) -> DeltaEstimate:
    """Additive-model variant: the edited stationarity condition involves the
    candidate's unit direction and a three-term curvature correction."""
    if model.kind != TRANSE:
        raise NotImplementedError("transe estimator requires an additive model")
    sp, rp = candidate
    o = target.o
    z_c = encode(model, sp, rp)
    u = z_c - model.E[o]
    psi_c = float(np.linalg.norm(u))
    if psi_c < 1e-12:
        raise NumericalError(
            f"candidate {(sp, rp)} encodes exactly onto the object embedding; "
            "the update direction is undefined"
        )
    n = u / psi_c
    phi = float(expit(-psi_c))  # truth probability of the candidate
    d = model.dim
    nnT = np.outer(n, n)
    H_cand = (
        phi * (1.0 - phi) * nnT
        + (1.0 - phi) / psi_c * np.eye(d)
        - (1.0 - phi) / psi_c * nnT
    )
    M = hess.H + H_cand
    flag = None
    cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > _CONDITION_LIMIT:
        flag = "ill-conditioned"
    move = (1.0 - phi) * np.linalg.solve(M, n)
    e_o_new = model.E[o] + move
    psi_old = score(model, target.s, target.r, target.o)
    psi_new = float(np.linalg.norm(model.E[target.s] + model.R[target.r] - e_o_new))
    return DeltaEstimate(
        target, candidate, psi_new - psi_old, phi, "taylor",
        form="transe-add", flag=flag, new_score=psi_new,
    )
