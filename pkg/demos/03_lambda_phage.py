# The stochastic lambda-phage switch: five species, ten reactions, a 65536-state box.
import numpy as np

from tamen import tt
from tamen.experiments import cme_reference_means, cme_run
from tamen.models import cme

model = cme.lambda_phage()
sizes = (8, 16, 8, 8, 8)
for r in model.reactions[:4]:
    print(f"{r.name:16s} change {r.change}")
print("...")

A = model.operator(sizes)
psi0 = cme.multinomial_initial(sizes)
print("generator ranks", A.ranks)
print("initial ranks  ", psi0.ranks, " psi(0,...,0) =", tt.to_dense(psi0)[0])

# Intervals grow like exp(0.05 j): the dynamics slow down as the switch settles.
model, intervals, rec = cme_run(sizes, steps=20)
ref = cme_reference_means(model, sizes, intervals)
means = np.array([cme.mean_copy_numbers(s) for s in rec.states])
print(f"T = {rec.t_end[-1]:.3f} after 20 steps, {rec.wall:.1f} s")
print("mean copy numbers", np.round(means[-1], 5))
print("sparse reference ", np.round(ref[-1], 5))
print(f"max mean error {np.abs(means - ref).max():.1e}")
print(f"probability drift with enrichment    {max(rec.mass_drift):.1e}")

_, _, bare = cme_run(sizes, steps=20, enrich=False, model=model)
print(f"probability drift without enrichment {max(bare.mass_drift):.1e}")
