"""Cornered open books and the density bound.

A cornered open book is a sum of quarter planes, each joining one
positively oriented boundary half-plane to one negatively oriented one.
Its density is exactly Q/4. The census runs through all labelled
decompositions of small 2-d cones and confirms that every other
combination of pieces either has larger density or cannot be
minimizing. The uniqueness gap then tells whether two admissible books
can be told apart by the excess.
"""

import time

from qlab import cones as cn
from qlab.cones import BoundaryConfig, Verdict

for cfg in (BoundaryConfig((1,), (1,)), BoundaryConfig((2,), (1, 1)), BoundaryConfig((1, 1), (1, 1)),
            BoundaryConfig((2, 1), (1, 2))):
    books = cn.enumerate_admissible_books(cfg)
    gap = cn.uniqueness_gap(cfg)
    print(f"Q0={cfg.q0} Q1={cfg.q1}: {len(books)} book(s), gap {'INF' if gap == cn.INF else f'{gap:.4f}'}")
    for b in books:
        pairs = ", ".join(f"V0_{q.k0 + 1}-V1_{q.k1 + 1} x{q.multiplicity}" for q in b.quadrants)
        print(f"    [{pairs}]  density {cn.book_density(b)}")

start = time.perf_counter()
rows = cn.census(3, 2)
elapsed = time.perf_counter() - start
counts = {v: sum(r.classification.verdict is v for r in rows) for v in Verdict}
print(f"\ncensus Q <= 3, N0, N1 <= 2: {len(rows)} labelled decompositions in {elapsed:.2f} s")
for v, n in counts.items():
    print(f"  {v.value:18s} {n}")
equal = [r for r in rows if r.classification.density == r.classification.q / 4]
print(f"rows at density Q/4: {len(equal)}, all of them all-TYPE1: {all(r.all_type1 for r in equal)}")

print("\nexamples:")
for label, pieces in (("two TYPE1 + one TYPE3", [("TYPE1", 2), ("TYPE3", 1)]),
                      ("TYPE1 + full plane", [("TYPE1", 1), ("FULL_PLANE", 1)]),
                      ("three TYPE1", [("TYPE1", 3)])):
    c = cn.classify_2d_cone(pieces)
    print(f"  {label:22s} Q = {c.q}, density {c.density}, {c.verdict.value}")
