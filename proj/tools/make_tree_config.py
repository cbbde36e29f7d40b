#!/usr/bin/env python3
"""Writes configs/tree_random_q.yaml: scalar two-regime problem whose state
weight follows the Brownian path, Q = 1 + 0.5 tanh(W), on a binomial tree."""

import math
import sys

DEPTH = 64
T = 1.0


def q_levels(scale):
    dt = T / DEPTH
    levels = []
    for k in range(DEPTH + 1):
        nodes = []
        for j in range(k + 1):
            w = (2 * j - k) * math.sqrt(dt)
            nodes.append(f"{scale * (1.0 + 0.5 * math.tanh(w)):.17g}")
        levels.append("[" + ", ".join(nodes) + "]")
    return "\n".join(f"          - {lvl}" for lvl in levels)


def main(path):
    text = f"""# Generated by tools/make_tree_config.py. Scalar two-regime problem with a
# path-dependent state weight Q = 1 + 0.5 tanh(W) (regime 2 doubles it),
# sampled on the depth-{DEPTH} binomial tree used by the tree backend.
problem:
  n: 1
  m: 1
  T: {T}
  delta: 0.5
  generator: [[-1, 1], [2, -2]]
  defaults: {{A: 0.1, B: 1, C: 0.2, D: 0, S: 0, R: 1, G: 1}}
  regimes:
    - Q:
        tree:
{q_levels(1.0)}
    - Q:
        tree:
{q_levels(2.0)}

solver:
  backend: tree
  tree_depth: {DEPTH}

simulate:
  x0: [1]
  i0: 1
  n_paths: 20000
  dt: 0.001
  seed: 3
  perturbations:
    - {{name: const_0.5, value: [0.5]}}

verify:
  # The explicit tree scheme is first order; at depth {DEPTH} its bias on the
  # value is about 0.03.
  value_tol: 0.05
"""
    with open(path, "w") as f:
        f.write(text)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "configs/tree_random_q.yaml")
