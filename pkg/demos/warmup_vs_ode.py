"""One warm-up run at n=100000 next to its fluid limit."""
from semirandom.experiments import compare_warmup, warmup_reference

n = 100_000
cmp = compare_warmup(n, seed=1, sample_every=n // 10)
ref = warmup_reference()
print(" t/n     sim x    ode x    sim r    ode r")
for row in cmp.trajectory.rows:
    s = row["step"] / n
    x, r = ref.at(s)
    print(f"{s:5.2f}  {1 - row['unsaturated'] / n:7.4f}  {x:7.4f}  {row['red'] / n:7.4f}  {r:7.4f}")
print(f"sup deviations: x {cmp.max_dx:.4f}, r {cmp.max_dr:.4f}")
