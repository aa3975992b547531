"""
Sensitivity scenarios
=====================

Each scenario perturbs a synthetic tableau in a controlled way and records
one metric per trial.  Small sizes here; the CLI runs the full ones.
"""

from mobsim import GridSpec
from mobsim.experiments import ScenarioConfig, run_scenario, summarize

grid = GridSpec(10, 10)

# multiplying by phi plus per-flow noise of amplitude omega
cfg = ScenarioConfig("random_scaling", grid=grid, n_vectors=300, trials=10)
for row in summarize(run_scenario(cfg), "rrnsa"):
    print("phi=%.2f omega=%.2f  rrnsa %.4f" % (row["phi"], row["omega"], row["mean"]))

# k neighbouring swaps and 5-k arbitrary swaps of cells
cfg = ScenarioConfig("spatial_exchange", grid=grid, n_vectors=300, trials=10)
for row in summarize(run_scenario(cfg), "sp"):
    print("k=%d  sp %.4f" % (row["k"], row["mean"]))

# replacing k*10 of 100 individuals with new ones
cfg = ScenarioConfig("data_source", grid=grid, n_individuals=100, trips_per_individual=5, trials=10)
for row in summarize(run_scenario(cfg), "nma"):
    print("k=%d  nma %.4f" % (row["k"], row["mean"]))
