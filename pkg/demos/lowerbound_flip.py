"""Where the no-matching certificate stops applying, under uniform circles."""
from semirandom import odelab
from semirandom.experiments import lowerbound_sweep

sweep = lowerbound_sweep(200_000, seed=3, grid=0.1, t_max=0.96)
for row in sweep.rows:
    print(f"t/n={row['t']:.2f}  lhs={row['lhs']:.4f}  rhs={row['rhs']:.4f}  "
          f"{'possible' if row['matching_possible'] else 'ruled out'}")
print(f"flip at t/n = {sweep.flip:.4f}; fluid value {odelab.find_alpha(1e-9):.5f}")
