# A first look at the space-time solver on systems small enough to check by hand.
import numpy as np
import scipy.linalg as sla

from tamen import ChebyshevGrid, IntegratorConfig, InvariantSpec, TimeAffineOperator, tt
from tamen import extract_state, tamen_interval

# dx/dt = -x on [0, 1]. The 1x1 operator is a one-core train.
A = TimeAffineOperator.stationary(tt.TTOperator([np.full((1, 1, 1, 1), -1.0)]))
x0 = tt.TTVector([np.ones((1, 1, 1))])
grid = ChebyshevGrid(16, 1.0)
x, report = tamen_interval(A, None, x0, grid, cfg=IntegratorConfig(eps=1e-12, I=16))

# x is a space-time train: the last core runs over the Chebyshev nodes.
print("nodes        ", np.round(grid.nodes[:4], 4), "...")
print("x(T)         ", tt.to_dense(extract_state(x))[0], " exp(-1) =", np.exp(-1))
print("sweeps       ", report.sweeps, " residual", f"{report.residual:.1e}")

# The time discretization is spectral: doubling the number of Chebyshev
# nodes squares the error until round-off is reached.
R = np.array([[0.0, 1.0], [-1.0, 0.0]])
A = TimeAffineOperator.stationary(tt.op_from_dense(R, (2,)))
x0 = tt.TTVector([np.array([0.6, 0.8]).reshape(1, 2, 1)])
exact = sla.expm(R) @ [0.6, 0.8]
for I in (4, 8, 16):
    x, _ = tamen_interval(A, None, x0, ChebyshevGrid(I, 1.0), cfg=IntegratorConfig(eps=1e-14, I=I))
    xT = tt.to_dense(extract_state(x))
    print(f"I={I:2d}  error {np.linalg.norm(xT - exact):.2e}  |x(T)|-1 = {np.linalg.norm(xT) - 1:+.1e}")

# Norm conservation pays off once the solution is compressed. Here a random
# skew-symmetric operator on 2^6 states is integrated at a loose tolerance.
rng = np.random.default_rng(1)
M = rng.standard_normal((64, 64))
A = TimeAffineOperator.stationary(tt.op_from_dense(M - M.T, (2,) * 6))
x0 = tt.ones((2,) * 6)
for conserve in (False, True):
    x, rep = tamen_interval(A, None, x0, ChebyshevGrid(16, 0.2), InvariantSpec(conserve_norm=conserve),
                            IntegratorConfig(eps=1e-3, I=16))
    print(f"conserve_norm={conserve!s:5}  max rank {rep.max_rank:2d}  norm drift {rep.norm_drift:.1e}")
