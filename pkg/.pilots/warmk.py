import sys, time, numpy as np
from scipy.optimize import minimize
from scipy.stats import spearmanr
from criage.synth import make_nations_graph, make_kinship_graph
from criage.train import TrainConfig, train, loss, loss_gradients, LabelArrays, evaluate_ranking
from criage.models import init_model, score
from criage.kg import Triple, remove_fact
from criage.influence import entity_hessian, estimate_delta_remove

which = sys.argv[1]; lam = float(sys.argv[2]); K = int(sys.argv[3]); wlr = float(sys.argv[4])
kg = make_nations_graph() if which == "nations" else make_kinship_graph()
dim = 10

def pack(m): return np.concatenate([m.E.ravel(), m.R.ravel()])
def unpack(m, x):
    n = m.n_entities * m.dim
    m.E[:] = x[:n].reshape(m.n_entities, m.dim); m.R[:] = x[n:].reshape(m.n_relations, m.dim)

# converged base: adagrad warmup + lbfgs polish
t0 = time.time()
base = train(kg, TrainConfig(dim=dim, lr=0.5, epochs=100, l2=lam, batch_size=0, seed=7))
labels = LabelArrays(kg)
def fg(x):
    unpack(base, x)
    return (loss(base, kg, lam, labels),
            np.concatenate([g.ravel() for g in loss_gradients(base, kg, lam, labels)]))
res = minimize(fg, pack(base), jac=True, method="L-BFGS-B",
               options={"maxiter": 20000, "ftol": 1e-16, "gtol": 1e-9, "maxcor": 30})
unpack(base, res.x)
met = evaluate_ranking(base, kg, "valid")
print(f"{which} lam={lam} K={K} wlr={wlr}: base {time.time()-t0:.0f}s gmax={np.max(np.abs(res.jac)):.1e} vMRR={met.mrr:.3f}", flush=True)

wcfg = TrainConfig(dim=dim, lr=wlr, epochs=K, l2=lam, batch_size=0, seed=7)
rng = np.random.default_rng(123)
rhos = []
t0 = time.time()
for ti in range(4 if which == "nations" else 2):
    tgt = kg.test[int(rng.integers(len(kg.test)))]
    nei = kg.neighbors_of_object(tgt.o)
    cands = [nei[i] for i in rng.choice(len(nei), size=min(15, len(nei)), replace=False)]
    hess = entity_hessian(base, kg, tgt.o, lam)
    est = np.array([estimate_delta_remove(base, kg, hess, tgt, c).delta for c in cands])
    warm = np.array([score(base, *tgt) - score(train(kg.apply_edit(remove_fact(Triple(c[0], c[1], tgt.o))), wcfg, init=base), *tgt)
                     for c in cands])
    rho = spearmanr(est, warm).statistic
    rhos.append(rho)
    print(f"  target {tuple(tgt)}: rho={rho:.3f} est_rms={np.std(est):.4f} warm_rms={np.std(warm):.4f}", flush=True)
print(f"mean rho {np.mean(rhos):.3f} ({(time.time()-t0)/sum(min(15,1000) for _ in rhos):.2f}s/retrain)", flush=True)
