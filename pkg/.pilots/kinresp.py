import sys, time, numpy as np
from scipy.optimize import minimize
from scipy.stats import spearmanr
from criage.synth import make_kinship_graph
from criage.train import loss, loss_gradients, LabelArrays, evaluate_ranking
from criage.models import init_model, score
from criage.kg import Triple, remove_fact
from criage.influence import entity_hessian, estimate_delta_remove

lam = float(sys.argv[1])
kk = make_kinship_graph(); dim = 10

def pack(m): return np.concatenate([m.E.ravel(), m.R.ravel()])
def unpack(m, x):
    n = m.n_entities * m.dim
    m.E[:] = x[:n].reshape(m.n_entities, m.dim); m.R[:] = x[n:].reshape(m.n_relations, m.dim)

def lbfgs(kg, seed, x0=None, maxiter=4000, gtol=1e-9):
    m = init_model("distmult", kg.n_entities, kg.n_relations, dim, seed, scale=0.1)
    labels = LabelArrays(kg)
    def fg(x):
        unpack(m, x)
        return (loss(m, kg, lam, labels),
                np.concatenate([g.ravel() for g in loss_gradients(m, kg, lam, labels)]))
    res = minimize(fg, x0 if x0 is not None else pack(m), jac=True, method="L-BFGS-B",
                   options={"maxiter": maxiter, "ftol": 1e-16, "gtol": gtol, "maxcor": 30})
    unpack(m, res.x); return m, res

t0 = time.time()
base, res = lbfgs(kk, seed=7)
met = evaluate_ranking(base, kk, "valid")
print(f"lam={lam} base: {time.time()-t0:.1f}s it={res.nit} gmax={np.max(np.abs(res.jac)):.1e} "
      f"vMRR={met.mrr:.3f} vH1={met.hits1:.0f}", flush=True)
x_base = pack(base)

rng = np.random.default_rng(123)
tgt = kk.test[int(rng.integers(len(kk.test)))]
nei = kk.neighbors_of_object(tgt.o)
cands = [nei[i] for i in rng.choice(len(nei), size=10, replace=False)]
hess = entity_hessian(base, kk, tgt.o, lam)
est = np.array([estimate_delta_remove(base, kk, hess, tgt, c).delta for c in cands])
warm, its = [], []
t1 = time.time()
for c in cands:
    mw, rw = lbfgs(kk.apply_edit(remove_fact(Triple(c[0], c[1], tgt.o))), seed=7, x0=x_base)
    warm.append(score(base, *tgt) - score(mw, *tgt)); its.append(rw.nit)
warm = np.array(warm)
print(f"warm: {(time.time()-t1)/len(cands):.2f}s/ea iters {min(its)}-{max(its)}", flush=True)
print("  est :", np.round(est, 5), flush=True)
print("  warm:", np.round(warm, 5), flush=True)
print(f"rho(est,warm)={spearmanr(est, warm).statistic:.3f}", flush=True)
