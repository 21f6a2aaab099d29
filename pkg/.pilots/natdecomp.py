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

base, res = lbfgs(nn, seed=7)
print(f"lam={lam} gmax={np.max(np.abs(res.jac)):.1e}", flush=True)
x_base = pack(base)
Hf = build_full_hessian(base, nn, lam)
Hb_chol = np.linalg.cholesky(Hf + 0*np.eye(Hf.shape[0]))

rng = np.random.default_rng(123)
n, d = base.n_entities, base.dim
for ti in range(2):
    tgt = nn.test[int(rng.integers(len(nn.test)))]
    s, r, o = tgt
    nei = nn.neighbors_of_object(tgt.o)
    cands = [nei[i] for i in rng.choice(len(nei), size=12, replace=False)]
    hess = entity_hessian(base, nn, tgt.o, lam)
    est_local = np.array([estimate_delta_remove(base, nn, hess, tgt, c).delta for c in cands])
    parts = {"s": [], "r": [], "o": [], "full": []}
    for c in cands:
        g_tr = triple_loss_gradient(base, Triple(c[0], c[1], tgt.o))
        # removal Newton move: delta_theta = +H^-1 g_tr
        mv = np.linalg.solve(Hf, g_tr)
        # delta orientation (psi - psi_after) = -(gpsi . mv)
        gs = base.R[r] * base.E[o]; gr = base.E[s] * base.E[o]; go = encode(base, s, r)
        parts["s"].append(-float(gs @ mv[_entity_slice(s, d)]))
        parts["r"].append(-float(gr @ mv[_entity_slice(n + r, d)]))
        parts["o"].append(-float(go @ mv[_entity_slice(o, d)]))
        g_psi = np.zeros_like(g_tr)
        g_psi[_entity_slice(s, d)] += gs; g_psi[_entity_slice(o, d)] += go
        g_psi[_entity_slice(n + r, d)] += gr
        parts["full"].append(-float(g_psi @ mv))
    full = np.array(parts["full"])
    print(f"target {tuple(tgt)}: rms contributions "
          f"s={np.std(parts['s']):.4f} r={np.std(parts['r']):.4f} o={np.std(parts['o']):.4f}", flush=True)
    print(f"  rho(local, full-linear)={spearmanr(est_local, full).statistic:.3f} "
          f"rho(o-part, full)={spearmanr(parts['o'], full).statistic:.3f} "
          f"rho(local, o-part)={spearmanr(est_local, parts['o']).statistic:.3f}", flush=True)
