"""Points of A_Q(R^n) and the matching distance.

A Q-valued function takes values in unordered Q-tuples. Two tuples are
compared by pairing their entries optimally, so the distance ignores
labels. This demo shows the label independence, the tie-break rule and
the switch from exhaustive search to an assignment solver for larger Q.
"""

import numpy as np

from qlab.qpoints import QPoint, best_matching, g_distance, mean, separation

rng = np.random.default_rng(0)

xa = np.array([[1.0, 0.0], [-1.0, 0.0]])
xb = np.array([[-1.0, 0.1], [1.0, -0.1]])
a, b = QPoint(xa), QPoint(xb)
print("a =", a)
print("b =", b)
print("matching a -> b:", best_matching(a, b))
print(f"G(a, b) = {g_distance(a, b):.4f}; pairing entries in input order would give {np.linalg.norm(xa - xb):.4f}")
print("mean of a:", mean(a), " separation of a:", separation(a))

# Equal distances to two targets: the lexicographically smallest permutation wins.
tied = QPoint([[0.0, 1.0], [0.0, -1.0]])
print("tie between identity and swap ->", best_matching(QPoint.zero(2, 2), tied).permutation)

for q in (3, 6):
    x, y = rng.normal(size=(q, 3)), rng.normal(size=(q, 3))
    m = best_matching(QPoint(x), QPoint(y))
    shuffled = QPoint(y[rng.permutation(q)])
    print(f"Q={q}: cost {m.cost:.6f}; after relabelling the target {best_matching(QPoint(x), shuffled).cost:.6f}")
