"""Regenerates the golden oracle reports with numpy/scipy.

Each file holds the exact evaluation of the uniform policy under the reward
and cost utilities plus the constrained optimum from scipy's LP solver.
"""
import json
import pathlib

import numpy as np
from scipy.optimize import linprog

HERE = pathlib.Path(__file__).parent
CMDPS = HERE.parent / "cmdps"


def evaluate(P, g, pi, gamma, rho):
    S, A = g.shape
    P_pi = np.einsum("sa,sat->st", pi, P)
    g_pi = (pi * g).sum(1)
    V = np.linalg.solve(np.eye(S) - gamma * P_pi, g_pi)
    Q = g + gamma * P @ V
    d = (1 - gamma) * np.linalg.solve((np.eye(S) - gamma * P_pi).T, rho)
    return {
        "v": V.tolist(),
        "q": Q.tolist(),
        "adv": (Q - V[:, None]).tolist(),
        "occupancy_d": d.tolist(),
        "occupancy_nu": (d[:, None] * pi).tolist(),
        "j_value": float(rho @ V),
    }


def constrained_optimum(P, r, c, gamma, rho):
    S, A = r.shape
    A_eq = np.zeros((S, S * A))
    for s in range(S):
        for a in range(A):
            A_eq[s, s * A + a] += 1.0
            A_eq[:, s * A + a] -= gamma * P[s, a]
    res = linprog(-r.ravel(), A_ub=-c.ravel()[None, :], b_ub=[0.0], A_eq=A_eq, b_eq=rho,
                  bounds=(0, None), method="highs")
    assert res.status == 0
    jc = linprog(-c.ravel(), A_eq=A_eq, b_eq=rho, bounds=(0, None), method="highs")
    return -res.fun, -res.ineqlin.marginals[0], -jc.fun


for path in sorted(CMDPS.glob("*.json")):
    doc = json.loads(path.read_text())
    P = np.array(doc["transition"], dtype=float)
    r = np.array(doc["reward"], dtype=float)
    c = np.array(doc["cost"], dtype=float)
    rho = np.array(doc["rho"], dtype=float)
    gamma = doc["gamma"]
    pi = np.full(r.shape, 1.0 / r.shape[1])
    j_r_star, lambda_star, max_jc = constrained_optimum(P, r, c, gamma, rho)
    out = {
        "uniform_reward": evaluate(P, r, pi, gamma, rho),
        "uniform_cost": evaluate(P, c, pi, gamma, rho),
        "j_r_star": j_r_star,
        "lambda_star": lambda_star,
        "max_jc": max_jc,
    }
    (HERE / path.name).write_text(json.dumps(out, indent=2) + "\n")
    print(path.name, j_r_star, lambda_star, max_jc)
