import sys, time, numpy as np
from scipy.stats import spearmanr
from criage.synth import make_kinship_graph, make_nations_graph
from criage.train import TrainConfig, train, evaluate_ranking
from criage.models import score
from criage.kg import Triple, remove_fact, add_fact
from criage.influence import entity_hessian, estimate_delta_remove, estimate_delta_add
from criage.oracle import OracleConfig, WarmRetrainer, exact_delta

which = sys.argv[1]; lam = float(sys.argv[2])
kg = make_kinship_graph() if which == "kinship" else make_nations_graph()
cfg = TrainConfig(dim=10, lr=0.5, epochs=200, l2=lam, batch_size=0, seed=7,
                  refine="lbfgs", refine_gtol=1e-8)
t0 = time.time()
base = train(kg, cfg)
print(f"{which} lam={lam}: base {time.time()-t0:.0f}s "
      f"vMRR={evaluate_ranking(base, kg, 'valid').mrr:.3f} tH1={evaluate_ranking(base, kg, 'test').hits1:.0f}", flush=True)
t0 = time.time()
rt = WarmRetrainer(base, kg, lam)
print(f"retrainer setup {time.time()-t0:.1f}s", flush=True)
oc = OracleConfig(protocol="warm", engine="newton")

rng = np.random.default_rng(123)
for ti in range(2):
    tgt = kg.test[int(rng.integers(len(kg.test)))]
    nei = kg.neighbors_of_object(tgt.o)
    cands = [nei[i] for i in rng.choice(len(nei), size=min(15, len(nei)), replace=False)]
    hess = entity_hessian(base, kg, tgt.o, lam)
    est = np.array([estimate_delta_remove(base, kg, hess, tgt, c).delta for c in cands])
    t0 = time.time()
    ex = np.array([exact_delta(kg, tgt, remove_fact(Triple(c[0], c[1], tgt.o)), cfg, oc,
                               base_model=base, retrainer=rt) for c in cands])
    print(f"REMOVE {tuple(tgt)}: rho={spearmanr(est, ex).statistic:.3f} "
          f"{(time.time()-t0)/len(cands):.2f}s/retrain", flush=True)
    adds = []
    while len(adds) < 15:
        sp = int(rng.integers(kg.n_entities)); rp = int(rng.integers(kg.n_relations))
        if not kg.has_train_triple(Triple(sp, rp, tgt.o)) and (sp, rp) not in adds:
            adds.append((sp, rp))
    est_a = np.array([estimate_delta_add(base, hess, tgt, c).delta for c in adds])
    t0 = time.time()
    ex_a = np.array([exact_delta(kg, tgt, add_fact(Triple(c[0], c[1], tgt.o)), cfg, oc,
                                 base_model=base, retrainer=rt) for c in adds])
    print(f"ADD    {tuple(tgt)}: rho={spearmanr(est_a, ex_a).statistic:.3f} "
          f"{(time.time()-t0)/len(adds):.2f}s/retrain", flush=True)
