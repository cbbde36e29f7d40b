#!/usr/bin/env python3
"""Independent reference values for tests/oracles.hpp, integrated with scipy's
DOP853 at tight tolerances in untransformed coordinates. Run it and paste the
printed constants if a reference case changes."""

import numpy as np
from scipy.integrate import solve_ivp

OPTS = dict(method="DOP853", rtol=1e-13, atol=1e-15)


def backward(rhs, y_T, t_from, t_to):
    return solve_ivp(rhs, [t_from, t_to], y_T, **OPTS).y[:, -1]


def scalar_cases():
    # E1, first Picard iterate: dP1/dt = P1 + P1^2 - 1, P1(1) = 1.
    p1 = backward(lambda t, y: [y[0] + y[0] ** 2 - 1], [1.0], 1.0, 0.0)[0]
    # Asymmetric weights Q = (1, 0): linear initial iterate and the full system.
    p0 = backward(lambda t, y: [-(1 - y[0] + y[1]), -(y[0] - y[1])], [1.0, 1.0], 1.0, 0.0)
    full = backward(lambda t, y: [-(1 - y[0] + y[1] - y[0] ** 2), -(y[0] - y[1] - y[1] ** 2)], [1.0, 1.0], 1.0, 0.0)
    print(f"inline constexpr double kE1FirstIterate = {p1:.17g};")
    print(f"inline constexpr double kAsymP0[2] = {{{p0[0]:.17g}, {p0[1]:.17g}}};")
    print(f"inline constexpr double kAsymP[2] = {{{full[0]:.17g}, {full[1]:.17g}}};")
    print(f"inline constexpr double kSwitchProbability = {(1 - np.exp(-2)) / 2:.17g};")


def two_state_case():
    # Mirrors configs/two_state.yaml.
    q = np.array([[-2.0, 2.0], [0.5, -0.5]])
    A = [np.array([[0.1, 0.2], [-0.3, 0.0]]), np.array([[-0.2, 0.0], [0.1, -0.1]])]
    B = np.array([[1.0], [0.5]])
    C = np.array([[0.2, 0.0], [0.0, 0.1]])
    D = np.array([[0.05], [0.0]])
    S = [np.array([[0.0, 0.0]]), np.array([[0.1, 0.0]])]
    R = np.array([[1.0]])
    G = [np.eye(2), np.array([[0.5, 0.1], [0.1, 0.8]])]
    q_early = np.array([[1.0, 0.2], [0.2, 0.5]])
    q_late = np.array([[2.0, 0.2], [0.2, 1.0]])

    def rhs(late):
        def f(t, y):
            P = [y[:4].reshape(2, 2), y[4:].reshape(2, 2)]
            out = []
            for i in range(2):
                Qi = (q_late if late else q_early) if i == 0 else q_early
                p = P[i]
                gain = p @ B + C.T @ p @ D + S[i].T
                w = R + D.T @ p @ D
                dp = A[i].T @ p + p @ A[i] + C.T @ p @ C + Qi + sum(q[i, j] * P[j] for j in range(2))
                dp = dp - gain @ np.linalg.solve(w, gain.T)
                out.append(-dp)
            return np.concatenate([o.ravel() for o in out])
        return f

    y = np.concatenate([G[0].ravel(), G[1].ravel()])
    y = backward(rhs(True), y, 1.0, 0.5)
    y = backward(rhs(False), y, 0.5, 0.0)
    for i in range(2):
        m = y[4 * i:4 * i + 4]
        print(f"inline constexpr double kTwoStateP{i + 1}[4] = {{" + ", ".join(f"{v:.17g}" for v in m) + "};")


if __name__ == "__main__":
    scalar_cases()
    two_state_case()
