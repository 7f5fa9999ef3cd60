# Driving the solver from the command line with a user-supplied operator.
#
# The same can be done from a shell:
#   tamen run-custom --operator a.tto --initial x.ttv --constraints mass --out run.csv
import csv
import tempfile
from pathlib import Path

import numpy as np

from tamen import tt, ttio
from tamen.cli import main

work = Path(tempfile.mkdtemp())

# A three-state Markov chain, lifted to two independent copies.
Q = np.array([[-1.0, 0.5, 0.0],
              [1.0, -1.0, 2.0],
              [0.0, 0.5, -2.0]])
A = tt.op_add(tt.kron_operator([Q, np.eye(3)]), tt.kron_operator([np.eye(3), Q]))
x0 = tt.rank_one([np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])])
ttio.save_operator(work / "a.tto", A)
ttio.save_vector(work / "x.ttv", x0)

status = main(["run-custom", "--operator", str(work / "a.tto"), "--initial", str(work / "x.ttv"),
               "--constraints", "mass", "--steps", "5", "--interval", "0.4",
               "--snapshots-every", "5", "--out", str(work / "run.csv")])
print("exit status", status, flush=True)
with open(work / "run.csv") as fh:
    for row in csv.reader(fh):
        print("  ".join(row[:7]))

# Snapshots are plain tensor-train files.
final = ttio.load_vector(work / "run_snapshots" / "step_00005.ttv")
print("state at t=2:", np.round(tt.to_dense(final).reshape(3, 3, order="F"), 4))

# Configuration errors exit with status 1 and name the offending field.
print("exit status", main(["run-custom", "--operator", str(work / "a.tto"),
                           "--initial", str(work / "x.ttv"), "--eps", "-1"]))
