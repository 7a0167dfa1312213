#!/usr/bin/env python3
"""Belief tracking and opacity monitoring.

An observer that sees every action of the MDP (but never a state) keeps a
belief, a distribution over states, and updates it with the column-stochastic
transition matrix of each observed action.  The privacy question is whether
the probability mass on the secret states can ever climb above the model's
threshold.  This script runs a few action streams and watches that mass.
"""

from pathlib import Path

import belief_opacity as bo

model_path = Path(__file__).parent / "models" / "three_state.yaml"
m = bo.load_model(model_path)
print(bo.validate_mdp(m))
m, _ = bo.canonical_reorder(m)

print(f"\nmodel: {len(m.states)} states, secret = "
      f"{sorted(m.states[i] for i in m.secret)}, threshold = {m.threshold}")
print(f"initial secret mass: {m.secret_mass(m.pi0):.3f}\n")

# repeating the first action drains mass out of the secret states
print("stream 1: a1 forever")
trace = bo.simulate(m, ["a1"] * 8, 8)
for rec in trace:
    belief = ", ".join(f"{v:.4f}" for v in rec.belief)
    print(f"  step {rec.step}  action={rec.real_action or '-':3} "
          f"belief=({belief})  secret mass={rec.secret_mass:.4f}")
print(f"  violation step: {bo.opacity_monitor(trace, m.threshold)}")

# alternating pushes mass back toward the secret states but stays compliant
print("\nstream 2: alternating a2, a1")
trace = bo.simulate(m, ["a2", "a1"] * 4, 8)
for rec in trace:
    print(f"  step {rec.step}  action={rec.real_action or '-':3} "
          f"secret mass={rec.secret_mass:.4f}")
print(f"  violation step: {bo.opacity_monitor(trace, m.threshold)}")

# a2 forever pushes the mass up toward its stationary level; against a
# tighter threshold the monitor reports the first offending step
tight = 0.55
print(f"\nstream 3: a2 forever, monitored at {tight}")
trace = bo.simulate(m, ["a2"] * 8, 8)
for rec in trace:
    marker = "  <-- over threshold" if rec.secret_mass > tight else ""
    print(f"  step {rec.step}  action={rec.real_action or '-':3} "
          f"secret mass={rec.secret_mass:.4f}{marker}")
print(f"  violation step: {bo.opacity_monitor(trace, tight)}")
