import sys, time, numpy as np
from scipy.optimize import minimize
from scipy.stats import spearmanr
from criage.synth import make_nations_graph
from criage.train import loss, loss_gradients, LabelArrays
from criage.models import init_model, score, encode
from criage.kg import Triple, remove_fact
from criage.influence import entity_hessian, estimate_delta_remove
from criage.oracle import build_full_hessian, triple_loss_gradient, _entity_slice

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

t0 = time.time()
base, res = lbfgs(nn, seed=7)
print(f"lam={lam} base: {time.time()-t0:.1f}s gmax={np.max(np.abs(res.jac)):.1e}", flush=True)
x_base = pack(base)

rng = np.random.default_rng(123)
tgt = nn.test[int(rng.integers(len(nn.test)))]
nei = nn.neighbors_of_object(tgt.o)
cands = [nei[i] for i in rng.choice(len(nei), size=10, replace=False)]
hess = entity_hessian(base, nn, tgt.o, lam)
est_local = np.array([estimate_delta_remove(base, nn, hess, tgt, c).delta for c in cands])

# full-parameter linear response
Hf = build_full_hessian(base, nn, lam)
n, d = base.n_entities, base.dim
g_psi = np.zeros((n + base.n_relations) * d)
s, r, o = tgt
g_psi[_entity_slice(s, d)] += base.R[r] * base.E[o]
g_psi[_entity_slice(o, d)] += encode(base, s, r)
g_psi[_entity_slice(n + r, d)] += base.E[s] * base.E[o]
u = np.linalg.solve(Hf, g_psi)
est_full = []
for c in cands:
    g_tr = triple_loss_gradient(base, Triple(c[0], c[1], tgt.o))
    est_full.append(-float(u @ g_tr))  # delta orientation: psi - psi_after_removal
est_full = np.array(est_full)

warm = []
t1 = time.time()
for c in cands:
    mw, rw = lbfgs(nn.apply_edit(remove_fact(Triple(c[0], c[1], tgt.o))), seed=7, x0=x_base)
    warm.append(score(base, *tgt) - score(mw, *tgt))
warm = np.array(warm)
print(f"warm: {(time.time()-t1)/len(cands):.2f}s/ea", flush=True)
print("  est_local:", np.round(est_local, 5), flush=True)
print("  est_full :", np.round(est_full, 5), flush=True)
print("  warm     :", np.round(warm, 5), flush=True)
print(f"rho(local,warm)={spearmanr(est_local, warm).statistic:.3f} "
      f"rho(full,warm)={spearmanr(est_full, warm).statistic:.3f} "
      f"rho(local,full)={spearmanr(est_local, est_full).statistic:.3f}", flush=True)
