# Budget and cover selection: exhaustive search as ground truth, greedy with
# its certificates, and the one instance family where the stated greedy factor
# is too optimistic (the classical mixed bound still holds).

import math

from gmrf_select import (
    err,
    exact_budget,
    exact_cover,
    greedy_budget,
    greedy_cover,
    random_gff,
)

gff = random_gff(10, density=0.25, resistance_range=(0.5, 2.0), seed=12)

print("== budget problem ==")
for b in (0, 1, 2, 3):
    gr = greedy_budget(gff, b)
    ex = exact_budget(gff, b)
    print(f"  b={b}: greedy {gr.selected} err={gr.err_value:.5f}   "
          f"exact {ex.selected} err={ex.err_value:.5f}")
print(f"  greedy certificate factor: {greedy_budget(gff, 2).guarantee.factor:.4f}")

print("\n== cover problem ==")
alpha = 0.6 * err(gff, {gff.pin})
gc = greedy_cover(gff, alpha)
ec = exact_cover(gff, alpha)
print(f"  target alpha = {alpha:.5f}")
print(f"  greedy needs {len(gc.selected)} vertices, exact needs {len(ec.selected)}"
      f" (certificate factor {gc.guarantee.factor:.2f})")

print("\n== where the stated budget factor breaks ==")
# a star-ish tree: greedy grabs the hub first and can never un-choose it;
# the optimum leaves the hub unobserved once all its neighbors are covered
trap = random_gff(6, density=0.0, seed=949248862)
print("  edges:", [(u, v, round(r, 2)) for u, v, r in trap.edges])
gr = greedy_budget(trap, 4)
ex = exact_budget(trap, 4)
ratio = gr.err_value / ex.err_value
print(f"  greedy err {gr.err_value:.5f} vs exact {ex.err_value:.5f} "
      f"-> ratio {ratio:.3f} > 1/(1-1/e) = {1 / (1 - 1 / math.e):.3f}")
classical = err(trap, {trap.pin}) / math.e + (1 - 1 / math.e) * ex.err_value
print(f"  classical mixed bound (1/e) err(start) + (1-1/e) OPT = "
      f"{classical:.5f} >= {gr.err_value:.5f}  (holds)")
