import time, numpy as np
from criage.synth import make_kinship_graph
from criage.train import TrainConfig, train, loss_gradients, LabelArrays, pack_params, unpack_params
from criage.kg import Triple, add_fact
from criage.oracle import WarmRetrainer
from scipy.linalg import cho_solve

lam = 0.1
kk = make_kinship_graph()
base = train(kk, TrainConfig(dim=10, lr=0.5, epochs=200, l2=lam, batch_size=0, seed=7,
                             refine="lbfgs", refine_gtol=1e-8))
rt = WarmRetrainer(base, kk, lam)
rng = np.random.default_rng(123)
tgt = kk.test[int(rng.integers(len(kk.test)))]

for k in range(4):
    while True:
        sp = int(rng.integers(kk.n_entities)); rp = int(rng.integers(kk.n_relations))
        tr = Triple(sp, rp, tgt.o)
        if not kk.has_train_triple(tr): break
    edit = add_fact(tr)
    edited = kk.apply_edit(edit)
    labels = LabelArrays(edited)
    model = base.copy()
    x = rt.jumpstart([edit])
    def grad_at(xv):
        unpack_params(model, xv)
        dE, dR = loss_gradients(model, edited, lam, labels)
        g = np.concatenate([dE.ravel(), dR.ravel()])
        return g, float(np.max(np.abs(g)))
    g, gmax = grad_at(x)
    traj = [gmax]; alpha = 1.0; streak = 0
    t0 = time.time()
    for it in range(80):
        if gmax < 1e-7: break
        step = cho_solve(rt._chol, g)
        for bt in range(8):
            g_new, gmax_new = grad_at(x - alpha * step)
            if np.isfinite(gmax_new) and gmax_new < gmax: break
            alpha *= 0.5; streak = 0
        else:
            traj.append("STUCK"); break
        x = x - alpha*step; g, gmax = g_new, gmax_new
        streak += 1
        if streak >= 3 and alpha < 1.0: alpha = min(1.0, 2*alpha); streak = 0
        traj.append(gmax)
    print(f"cand {(sp,rp)} new_pair={(sp,rp) not in kk.label_table} steps={it} t={time.time()-t0:.2f}s alpha={alpha:.3f}")
    print("  gmax:", " ".join(f"{v:.1e}" if isinstance(v, float) else v for v in traj[:40]), flush=True)
