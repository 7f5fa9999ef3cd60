# Transport of a Gaussian around a periodic square, stored as a quantized tensor train.
#
# With n = 2^L grid points per axis the state has 2L binary cores, so even
# n = 256 (65536 unknowns) is held in a few thousand numbers.
import numpy as np

from tamen import tt
from tamen.experiments import convection_reference, convection_run, relative_error
from tamen.models.convection import ConvectionModel

m = ConvectionModel(8)
print("grid", m.n, "x", m.n, " h =", m.h)
print("operator ranks", m.operator.ranks)
print("initial ranks ", m.initial.ranks, " stored numbers", m.initial.size)

# Twenty intervals of length 0.05. Mass and norm are conserved constraints.
m, rec = convection_run(L=8, steps=20, eps=1e-5, I=16)
ref = convection_reference(m, rec.t_end[-1])
print(f"T = {rec.t_end[-1]:.2f}  error vs semi-discrete reference "
      f"{relative_error(rec.trajectory.final_state, ref):.2e}")
print("max rank per step", rec.max_rank)
print(f"mass drift  {max(rec.mass_drift):.1e}")
print(f"norm drift  {max(rec.norm_drift):.1e}")
print(f"wall time   {rec.wall:.1f} s")

# The peak moves along the diagonal with unit speed.
u = m.to_grid(rec.trajectory.final_state)
i, j = np.unravel_index(np.argmax(u), u.shape)
q = -10 + m.h * np.arange(m.n)
print(f"peak at ({q[i]:.3f}, {q[j]:.3f}), nearest grid point to (-1, -1)")

# Dropping the constraints leaves drift at the level of the tolerance.
_, loose = convection_run(L=8, steps=20, eps=1e-5, I=16, conserve=False)
print(f"without constraints: mass drift {max(loose.mass_drift):.1e}, "
      f"norm drift {max(loose.norm_drift):.1e}")
