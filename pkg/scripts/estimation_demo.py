#!/usr/bin/env python3
"""Watch two agents learn each other's acceleration limits while avoiding
a head-on collision, starting from a deliberately pessimistic guess.

Usage: python scripts/estimation_demo.py
"""

import numpy as np

from safeswarm import AgentParams, AgentState
from safeswarm.sim import AgentSetup, Scenario, new_context, step_once

NIMBLE, SLUGGISH = 1.8, 0.6


def main():
    agents = [
        AgentSetup(
            AgentParams(1, NIMBLE, 0.6, 1.0, 0.2),
            AgentState(np.array([-1.6, 0.05]), np.zeros(2)),
            np.array([1.6, 0.05]),
        ),
        AgentSetup(
            AgentParams(2, SLUGGISH, 0.6, 1.0, 0.2),
            AgentState(np.array([1.6, -0.05]), np.zeros(2)),
            np.array([-1.6, -0.05]),
        ),
    ]
    scenario = Scenario(
        agents=agents, t_end=14.0, mode="decentralized_C_estimated",
        estimator_gain=1.5, alpha_floor=0.3,
    )
    ctx = new_context(scenario)
    print(f"true limits: agent1={NIMBLE}, agent2={SLUGGISH}; both start guessing 0.3")
    print(f"{'t':>6s} {'dist':>7s} {'h':>7s} {'est of agent2':>14s} {'est of agent1':>14s}")
    step = 0
    while ctx.t < scenario.t_end:
        rec = step_once(ctx)
        if step % 50 == 0:
            dist = rec.min_pair_dist
            h = min(rec.pair_h.values())
            print(
                f"{rec.t:6.2f} {dist:7.3f} {h:+7.3f} "
                f"{ctx.estimators[0].estimates[1]:14.4f} "
                f"{ctx.estimators[1].estimates[0]:14.4f}"
            )
        step += 1
    print("estimates only grow, and never past the true limit of the neighbor.")


if __name__ == "__main__":
    main()
