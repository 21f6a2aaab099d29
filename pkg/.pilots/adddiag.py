import time, numpy as np
from criage.synth import make_kinship_graph
from criage.train import TrainConfig, train, loss_gradients, LabelArrays, pack_params, unpack_params
from criage.kg import Triple, add_fact
from criage.oracle import WarmRetrainer, build_full_hessian, triple_loss_gradient
from scipy.linalg import cho_solve

lam = 0.1
kk = make_kinship_graph()
base = train(kk, TrainConfig(dim=10, lr=0.5, epochs=200, l2=lam, batch_size=0, seed=7,
                             refine="lbfgs", refine_gtol=1e-8))
rt = WarmRetrainer(base, kk, lam)
rng = np.random.default_rng(123)
tgt = kk.test[int(rng.integers(len(kk.test)))]
x_base = pack_params(base)

for k in range(3):
    while True:
        sp = int(rng.integers(kk.n_entities)); rp = int(rng.integers(kk.n_relations))
        tr = Triple(sp, rp, tgt.o)
        if not kk.has_train_triple(tr): break
    edited = kk.apply_edit(add_fact(tr))
    labels = LabelArrays(edited)
    model = base.copy()
    is_new_pair = (sp, rp) not in kk.label_table
    x = rt.jumpstart([add_fact(tr)])
    def gmax_at(xv):
        unpack_params(model, xv)
        dE, dR = loss_gradients(model, edited, lam, labels)
        return np.concatenate([dE.ravel(), dR.ravel()])
    traj = []
    for it in range(12):
        g = gmax_at(x)
        traj.append(float(np.max(np.abs(g))))
        x = x - cho_solve(rt._chol, g)
    print(f"cand {(sp,rp)} new_pair={is_new_pair}: gmax trajectory {[f'{v:.1e}' for v in traj]}", flush=True)
