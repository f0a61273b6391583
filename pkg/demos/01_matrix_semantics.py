"""Matrix semantics of a probabilistic reward machine.

The coffee machine: the agent picks up coffee ({c}) and delivers it to the
office ({o}); a delivery is accepted with reward 1 nine times out of ten.
Every probability below is a product of label/reward matrices — no sampling.
"""

import numpy as np

from prmlearn import coffee_prm, parse_label, prm_to_dot

m = coffee_prm()
print("states:", m.states)
print("reward values Γ:", m.gamma)

C = parse_label("c")
O = parse_label("o")

print("\nH({c}) — one-step transition matrix for the coffee label:")
print(np.round(m.label_matrix(C), 3))

print("\nH(1 | {o}) — same label, restricted to reward-1 edges:")
print(np.round(m.reward_conditional_matrix(1.0, O), 3))

# P(rewards) marginalizes over all label words of the same length
print("\nP(reward sequence (0, 1)) =", m.reward_sequence_probability((0.0, 1.0)))

# conditional next-reward distribution after a concrete label prefix
dist = m.next_reward_distribution((C,), O)
print("reward distribution for {o} after {c}:", dist)

print("\nDOT export (paste into graphviz):\n")
print(prm_to_dot(m))
