"""
Checking drift inequalities by hand
===================================

A walk through the closed-form layer: build the k=3 Langevin model, apply
its generator to a few power functions, and grid-check a Lyapunov triple.
Runs in well under a second.
"""
import numpy as np

from subgeom import genkit, ratefn, zoo

###############################################################################
# The model has drift -3/x outside the unit ball and unit diffusion, so its
# invariant density decays like |x|^-3 and the critical exponent is 4.

model = zoo.preset("ap-langevin-k3")
print(model.name, model.exponents())

###############################################################################
# Finite differences against the closed form. For p_m(x) = |x|^m the
# generator is -m (4 - m) |x|^(m-2) far out, so m = 2 gives -4 everywhere.

for m in (-2.0, 2.0, 4.5):
    fam = zoo.lyapunov("p_m", m=m)
    for x in (20.0, 50.0):
        fd = genkit.model_generator(model, fam, x).value
        cf = genkit.closed_form_generator(fam, model, x).value
        print(f"m={m:5.1f} x={x:5.1f}  fd={fd: .6e}  closed={cf: .6e}")

###############################################################################
# A triple (V, phi, Psi) with V = x^2, phi(u) = 12 u^2 and Psi(r) = r^(9/4).
# Both inequalities should hold on a geometric grid.

V = zoo.lyapunov("p_m", m=2.0)
triple = ratefn.LyapunovTriple(V, ratefn.power(2.0, 12.0, (0.0, 1.0)), ratefn.power(2.25))
grid = np.geomspace(2.0, 100.0, 20)
for which in ("super", "sub"):
    v = genkit.verify_drift(triple, model, grid, which)
    print(which, "satisfied" if v.satisfied else "violated", f"margin {v.margin:.2e}")

###############################################################################
# Halving phi breaks the super-martingale side, and the verdict says where.

weak = ratefn.LyapunovTriple(V, ratefn.power(2.0, 6.0, (0.0, 1.0)), ratefn.power(2.25))
v = genkit.verify_drift(weak, model, grid, "super")
print("halved phi:", v.satisfied, "worst point", v.worst_point, f"violation {v.max_violation:.3g}")
