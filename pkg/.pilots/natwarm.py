import sys, time, numpy as np
from scipy.optimize import minimize
from scipy.stats import spearmanr
from criage.synth import make_nations_graph
from criage.train import loss, loss_gradients, LabelArrays, evaluate_ranking
from criage.models import init_model, score
from criage.kg import Triple, remove_fact
from criage.influence import entity_hessian, estimate_delta_remove
from criage.oracle import build_full_hessian, triple_loss_gradient

lam = float(sys.argv[1])
nn = make_nations_graph(); dim = 10

def pack(m): return np.concatenate([m.E.ravel(), m.R.ravel()])
def unpack(m, x):
    n = m.n_entities * m.dim
    m.E[:] = x[:n].reshape(m.n_entities, m.dim); m.R[:] = x[n:].reshape(m.n_relations, m.dim)

def lbfgs(kg, seed, x0=None, maxiter=30000, gtol=1e-10):
    m = init_model("distmult", kg.n_entities, kg.n_relations, dim, seed, scale=0.1)
    labels = LabelArrays(kg)
    def fg(x):
        unpack(m, x)
        return (loss(m, kg, lam, labels),
                np.concatenate([g.ravel() for g in loss_gradients(m, kg, lam, labels)]))
    res = minimize(fg, x0 if x0 is not None else pack(m), jac=True, method="L-BFGS-B",
                   options={"maxiter": maxiter, "ftol": 1e-16, "gtol": gtol, "maxcor": 30})
    unpack(m, res.x); return m, res

base, res = lbfgs(nn, seed=7)
met = evaluate_ranking(base, nn, "valid")
print(f"lam={lam} gmax={np.max(np.abs(res.jac)):.1e} vMRR={met.mrr:.3f}", flush=True)
x_base = pack(base)
Hf = build_full_hessian(base, nn, lam)

rng = np.random.default_rng(123)
rhos = []
t0 = time.time()
for ti in range(4):
    tgt = nn.test[int(rng.integers(len(nn.test)))]
    nei = nn.neighbors_of_object(tgt.o)
    cands = [nei[i] for i in rng.choice(len(nei), size=15, replace=False)]
    hess = entity_hessian(base, nn, tgt.o, lam)
    est = np.array([estimate_delta_remove(base, nn, hess, tgt, c).delta for c in cands])
    warm = []
    for c in cands:
        g_tr = triple_loss_gradient(base, Triple(c[0], c[1], tgt.o))
        x0 = x_base + np.linalg.solve(Hf, g_tr)  # Newton jumpstart for the warm solve
        mw, rw = lbfgs(nn.apply_edit(remove_fact(Triple(c[0], c[1], tgt.o))), seed=7, x0=x0)
        warm.append(score(base, *tgt) - score(mw, *tgt))
    rho = spearmanr(est, np.array(warm)).statistic
    rhos.append(rho)
    print(f"  target {tuple(tgt)} |Nei|={len(nei)}: rho={rho:.3f}", flush=True)
print(f"mean rho {np.mean(rhos):.3f}  ({(time.time()-t0)/60:.1f} min)", flush=True)
