import sys, time, numpy as np
from scipy.stats import spearmanr
from criage.synth import make_nations_graph
from criage.train import TrainConfig, train, evaluate_ranking
from criage.models import score
from criage.kg import Triple, remove_fact
from criage.influence import entity_hessian, estimate_delta_remove

lam = float(sys.argv[1]); lr = float(sys.argv[2]); epochs = int(sys.argv[3])
nn = make_nations_graph()
cfg = TrainConfig(dim=10, lr=lr, epochs=epochs, l2=lam, batch_size=0, seed=7)
t0 = time.time()
base = train(nn, cfg)
met = evaluate_ranking(base, nn, "valid")
print(f"lam={lam} lr={lr} ep={epochs}: base {time.time()-t0:.1f}s vMRR={met.mrr:.3f} vH1={met.hits1:.0f}", flush=True)

rng = np.random.default_rng(123)
rhos = []
for ti in range(3):
    tgt = nn.test[int(rng.integers(len(nn.test)))]
    nei = nn.neighbors_of_object(tgt.o)
    cands = [nei[i] for i in rng.choice(len(nei), size=15, replace=False)]
    hess = entity_hessian(base, nn, tgt.o, lam)
    est = np.array([estimate_delta_remove(base, nn, hess, tgt, c).delta for c in cands])
    cold = np.array([score(base, *tgt) - score(train(nn.apply_edit(remove_fact(Triple(c[0], c[1], tgt.o))), cfg), *tgt)
                     for c in cands])
    rho = spearmanr(est, cold).statistic
    rhos.append(rho)
    print(f"  target {tuple(tgt)}: rho={rho:.3f} est_rms={np.std(est):.4f} cold_rms={np.std(cold):.4f}", flush=True)
print(f"mean rho {np.mean(rhos):.3f}", flush=True)
