import sys, time, numpy as np
from scipy.optimize import minimize
from scipy.stats import spearmanr
from criage.synth import make_nations_graph
from criage.train import loss, loss_gradients, LabelArrays, evaluate_ranking
from criage.models import init_model, score
from criage.kg import Triple, remove_fact
from criage.influence import entity_hessian, estimate_delta_remove

lam = float(sys.argv[1]); maxiter = int(sys.argv[2])
nn = make_nations_graph(); dim = 10

def pack(m): return np.concatenate([m.E.ravel(), m.R.ravel()])
def unpack(m, x):
    n = m.n_entities * m.dim
    m.E[:] = x[:n].reshape(m.n_entities, m.dim); m.R[:] = x[n:].reshape(m.n_relations, m.dim)

def lbfgs_train(kg, seed, x0=None):
    m = init_model("distmult", kg.n_entities, kg.n_relations, dim, seed, scale=0.1)
    labels = LabelArrays(kg)
    def fg(x):
        unpack(m, x)
        return (loss(m, kg, lam, labels),
                np.concatenate([g.ravel() for g in loss_gradients(m, kg, lam, labels)]))
    res = minimize(fg, x0 if x0 is not None else pack(m), jac=True, method="L-BFGS-B",
                   options={"maxiter": maxiter, "ftol": 1e-15, "gtol": 1e-9})
    unpack(m, res.x); return m, res

rng = np.random.default_rng(123)
tgt = nn.test[int(rng.integers(len(nn.test)))]
nei = nn.neighbors_of_object(tgt.o)
cands = [nei[i] for i in rng.choice(len(nei), size=12, replace=False)]
t0 = time.time()
base, res = lbfgs_train(nn, seed=7)
t_base = time.time() - t0
met = evaluate_ranking(base, nn, "valid")
hess = entity_hessian(base, nn, tgt.o, lam)
est = np.array([estimate_delta_remove(base, nn, hess, tgt, c).delta for c in cands])
cold = []
t1 = time.time()
for c in cands:
    mc, rc = lbfgs_train(nn.apply_edit(remove_fact(Triple(c[0], c[1], tgt.o))), seed=7)
    cold.append(score(base, *tgt) - score(mc, *tgt))
cold = np.array(cold)
print(f"lam={lam} it={res.nit} base={t_base:.1f}s gmax={np.max(np.abs(res.jac)):.1e} "
      f"vMRR={met.mrr:.3f} vH1={met.hits1:.0f} rho={spearmanr(est, cold).statistic:.3f} "
      f"retrain {(time.time()-t1)/len(cands):.2f}s/ea", flush=True)
print("  est :", np.round(est, 4), flush=True)
print("  cold:", np.round(cold, 4), flush=True)
