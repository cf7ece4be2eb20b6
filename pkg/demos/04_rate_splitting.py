"""Rate splitting: one knob sweeps the whole dominant face.

The second user Y splits into virtual users U, V with Y = max(U, V).  As eps
runs over [0, 1] the rate R1 = I(X;Z|U) sweeps [I(X;Z), I(X;Z|Y)] while the
three split rates always sum to I(XY;Z) -- no time-sharing needed.
"""

import numpy as np

from macresolve import Dist, solve_eps, split_rates
from macresolve.probcore import Alphabet, MacChannel

transition = np.zeros((2, 2, 3))
for x in range(2):
    for y in range(2):
        transition[x, y, x + y] = 1.0
adder = MacChannel((Alphabet(2), Alphabet(2)), Alphabet(3), transition)
p_x = Dist.bernoulli(0.5)

print(" eps      a=P(U=1)  b=P(V=1)   R1      R_U     R_V     sum")
for eps in np.linspace(0, 1, 9):
    sp = split_rates(adder, p_x, 0.5, float(eps))
    print(f"{eps:5.3f}   {sp.p_u.pmf[1]:.4f}    {sp.p_v.pmf[1]:.4f}   "
          f"{sp.rates[0]:.4f}  {sp.rates[1]:.4f}  {sp.rates[2]:.4f}  "
          f"{sum(sp.rates):.4f}")

# hit an arbitrary point of the dominant face
target = 0.8
sp = solve_eps(adder, p_x, 0.5, target)
print(f"\nsolved eps={sp.eps:.6f} for R1={target}: "
      f"achieved {sp.r1:.8f}, R2={sp.r2:.8f}, sum={sum(sp.rates):.6f}")
