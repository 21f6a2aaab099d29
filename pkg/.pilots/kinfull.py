import sys, time, numpy as np
from scipy.optimize import minimize
from scipy.stats import spearmanr
from criage.synth import make_kinship_graph
from criage.train import TrainConfig, train, loss, loss_gradients, LabelArrays, evaluate_ranking
from criage.models import score
from criage.kg import Triple, remove_fact, add_fact
from criage.influence import entity_hessian, estimate_delta_remove, estimate_delta_add
from criage.oracle import build_full_hessian, triple_loss_gradient

lam = 0.1; dim = 10
kk = make_kinship_graph()

def pack(m): return np.concatenate([m.E.ravel(), m.R.ravel()])
def unpack(m, x):
    n = m.n_entities * m.dim
    m.E[:] = x[:n].reshape(m.n_entities, m.dim); m.R[:] = x[n:].reshape(m.n_relations, m.dim)

def polish(m, kg, maxiter, gtol, x0=None):
    labels = LabelArrays(kg)
    def fg(x):
        unpack(m, x)
        return (loss(m, kg, lam, labels),
                np.concatenate([g.ravel() for g in loss_gradients(m, kg, lam, labels)]))
    res = minimize(fg, x0 if x0 is not None else pack(m), jac=True, method="L-BFGS-B",
                   options={"maxiter": maxiter, "ftol": 1e-16, "gtol": gtol, "maxcor": 30})
    unpack(m, res.x); return res

t0 = time.time()
base = train(kk, TrainConfig(dim=dim, lr=0.5, epochs=200, l2=lam, batch_size=0, seed=7))
res = polish(base, kk, 20000, 1e-8)
print(f"base: {time.time()-t0:.0f}s it={res.nit} gmax={np.max(np.abs(res.jac)):.1e} "
      f"vMRR={evaluate_ranking(base, kk, 'valid').mrr:.3f} tH1={evaluate_ranking(base, kk, 'test').hits1:.0f}", flush=True)
x_base = pack(base)
t0 = time.time()
Hf = build_full_hessian(base, kk, lam)
from scipy.linalg import cho_factor, cho_solve
CH = cho_factor(Hf + 1e-6*np.eye(Hf.shape[0]))
print(f"full H build+factor: {time.time()-t0:.1f}s", flush=True)

rng = np.random.default_rng(123)
for ti in range(2):
    tgt = kk.test[int(rng.integers(len(kk.test)))]
    nei = kk.neighbors_of_object(tgt.o)
    cands = [nei[i] for i in rng.choice(len(nei), size=min(15, len(nei)), replace=False)]
    hess = entity_hessian(base, kk, tgt.o, lam)
    est = np.array([estimate_delta_remove(base, kk, hess, tgt, c).delta for c in cands])
    warm, its, tw = [], [], time.time()
    for c in cands:
        tr = Triple(c[0], c[1], tgt.o)
        x0 = x_base + cho_solve(CH, triple_loss_gradient(base, tr))
        m2 = base.copy()
        r2 = polish(m2, kk.apply_edit(remove_fact(tr)), 3000, 1e-7, x0=x0)
        warm.append(score(base, *tgt) - score(m2, *tgt)); its.append(r2.nit)
    rho = spearmanr(est, np.array(warm)).statistic
    print(f"REMOVE target {tuple(tgt)}: rho={rho:.3f} iters~{int(np.mean(its))} {(time.time()-tw)/len(cands):.2f}s/ea", flush=True)

    # additions: random unobserved facts sharing the object
    adds = []
    while len(adds) < 15:
        sp = int(rng.integers(kk.n_entities)); rp = int(rng.integers(kk.n_relations))
        tr = Triple(sp, rp, tgt.o)
        if not kk.has_train_triple(tr) and (sp, rp) not in adds:
            adds.append((sp, rp))
    est_a = np.array([estimate_delta_add(base, hess, tgt, c).delta for c in adds])
    warm_a, its, tw = [], [], time.time()
    for c in adds:
        tr = Triple(c[0], c[1], tgt.o)
        x0 = x_base - cho_solve(CH, triple_loss_gradient(base, tr))
        m2 = base.copy()
        r2 = polish(m2, kk.apply_edit(add_fact(tr)), 3000, 1e-7, x0=x0)
        warm_a.append(score(base, *tgt) - score(m2, *tgt)); its.append(r2.nit)
    rho_a = spearmanr(est_a, np.array(warm_a)).statistic
    print(f"ADD    target {tuple(tgt)}: rho={rho_a:.3f} iters~{int(np.mean(its))} {(time.time()-tw)/len(adds):.2f}s/ea", flush=True)
