"""
Gluing and the small terms
==========================

The proof replaces g by a metric equal to b deep inside and to g far out.
Here we build that metric, audit it, and integrate cosh(r)^(1 - 2 tau) over
the four pieces I_1..I_4 the proof has to control.
"""

import numpy as np

from horomass.perturbations import TailFamily
from horomass.theorem import build_cutoff_metric, cutoff_audit, small_terms_report

tail = TailFamily(3)
for eps in (1e-2, 1e-3, 1e-4):
    cm = build_cutoff_metric(tail, eps)
    a = cutoff_audit(cm, tail)
    b = cm.bounds
    print(f"eps {eps:g}: = b inside {a['equals_b_inside']}, = g outside {a['equals_g_outside']}, "
          f"C {b['C']:.2f}, log(1/eps) sup|d chi1| {b['log_scaled_grad_chi1']:.2f}, "
          f"far slope {a['far_decay_slope']:.2f}")

# The logarithmic cutoff is what keeps the gradient bound from growing as eps -> 0.

# %%
rep = small_terms_report(2.1, 3)
print("decreasing:", rep.monotone)
print("eps1      k  integral    proof bound  corrected bound")
for r in rep.rows:
    flag = " <-" if r.value > r.literal_bound else ""
    print(f"{r.eps1:<9.4g} {r.k}  {r.value:.3e}  {r.literal_bound:.3e}    {r.corrected_bound:.3e}{flag}")

# Rows marked <- exceed the bound as written; the corrected chain holds throughout.
print(np.mean([r.value <= r.corrected_bound for r in rep.rows]))
