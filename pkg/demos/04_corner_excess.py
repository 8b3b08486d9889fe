"""Transport excess of a surface against a corner cone.

The excess compares the mass measure of a surface with that of a cone
near the corner. Mass may travel between the two measures at squared
distance cost, or be dumped onto the boundary wedge. A bent sheet that
agrees with the quadrant along both boundary rays has an excess that
shrinks as the ball does; a rotated quadrant does not.
"""

import math

import numpy as np

from qlab import transport as tr

e = np.eye(3)
wedge = tr.WedgeBoundary.from_rays([e[0], e[1]])
cone = tr.quadrant_measure(e[0], e[1], 1.0, 16)
print(f"quadrant measure: {len(cone)} atoms, mass {cone.total:.4f} (pi/4 = {math.pi / 4:.4f})")
print("excess of the cone against itself:", tr.strong_excess(cone, cone, wedge, 1.0, 2))

print("\nrotating the quadrant about the e1 axis:")
for psi in (0.0, math.pi / 32, math.pi / 16, math.pi / 8):
    u, v = tr.rotated_quadrant(psi)
    ex = tr.strong_excess(tr.quadrant_measure(u, v, 1.0, 16), cone, wedge, 1.0, 2)
    print(f"  psi = {psi:.4f}: excess {ex:.3e}")

print("\nbent sheet s e1 + t e2 + lam s t e3, lam = 0.01, shrinking balls:")
prev = None
for k in range(4):
    r = 0.5**k
    t_mu = tr.quadrant_measure(e[0], e[1], r, 16, bend=e[2], lam=0.01)
    c_mu = tr.quadrant_measure(e[0], e[1], r, 16)
    ex = tr.strong_excess(t_mu, c_mu, wedge, r, 2)
    ratio = f"{ex / prev:.3f}" if prev else "-"
    print(f"  r = {r:.4f}: excess {ex:.3e}, ratio to previous {ratio}")
    prev = ex

x = tr.DiscreteMeasure.dirac([3.0, 0.0, 0.2])
y = tr.DiscreteMeasure.dirac([0.0, 3.0, -0.1])
print(f"\ntwo far atoms near the wedge: transport {tr.w2_squared(x, y):.3f}, "
      f"with dumping {tr.corner_distance(x, y, wedge):.3f}")
