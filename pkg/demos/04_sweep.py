"""A small noise sweep through the library and through the command line.

Both routes seed every trial from (base seed, swept value, trial index), so
they write the same CSV apart from the wall-time column.
"""
import subprocess
import sys

from gridbp.experiment import ExperimentPlan, emit_csv, run_plan
from gridbp.sim import ScenarioConfig

base = ScenarioConfig(n_agents=15, n_anchors=5, arena=(40.0, 40.0), max_iter=8)
plan = ExperimentPlan(base, "noise_factor", (0.0, 0.1, 0.2), trials=3)
print("library:")
emit_csv(run_plan(plan), "-")
sys.stdout.flush()  # keep the two tables in order

print("\ncommand line:")
subprocess.run([sys.executable, "-m", "gridbp", "--set", "n_agents=15", "--set", "n_anchors=5",
                "--set", "arena=40,40", "--set", "max_iter=8", "--sweep", "noise_factor",
                "--values", "0,0.1,0.2", "--trials", "3"], check=True)
