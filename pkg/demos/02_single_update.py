"""One Grid-BP update for a single agent hearing three anchors.

Each anchor sends its belief (a point mass) and the agent has measured a
range to each. The agent samples candidate cells from every message,
estimates a sparse pmf from the samples and multiplies them into its prior.
"""
import numpy as np

from gridbp.belief import Belief, point_estimate
from gridbp.bp import BpParams, Message, RangeMeasurement, bp_round
from gridbp.grid import PlanarGrid, PlanarId


class Agent:
    def __init__(self, belief):
        self.id, self.belief, self.prior = 9, belief, belief


grid = PlanarGrid(shape=(30, 30))
truth = np.array([17.5, 11.5])
anchors = [(3, 4), (25, 2), (10, 26)]
ranges = [float(np.linalg.norm(np.add(a, 0.5) - truth)) for a in anchors]

agent = Agent(Belief.uniform(np.argwhere(np.ones((30, 30), bool)), grid))
inbox = [(Message(k, 9, Belief.point_mass(PlanarId(*a), grid)), RangeMeasurement(k, 9, r))
         for k, (a, r) in enumerate(zip(anchors, ranges))]
params = BpParams(n_particles=2000)

rng = np.random.default_rng(0)
for it in range(6):
    agent.belief, msgs = bp_round(agent, inbox, params, rng)
    est = point_estimate(agent.belief)
    print(f"round {it}: {len(agent.belief):4d} cells, estimate {est.round(2)}, "
          f"error {np.linalg.norm(est - truth):.2f} m, message sizes {[len(m.belief) for m in msgs]}")
