"""Print the lower and upper bound constants.

A short cascade (k=50) keeps this under a few seconds; pass k=1100 for the
full value.
"""
import sys

from semirandom import odelab

k = int(sys.argv[1]) if len(sys.argv) > 1 else 50
rep = odelab.compute_bounds(k=k)
print(f"alpha            {rep.alpha:.8f}")
print(f"c_{k:<14} {rep.c_k:.8f}   (1 - x_k = {1 - rep.x_k:.2e})")
print(f"continuation     {rep.continuation_time:.8f}")
print(f"beta             {rep.beta:.8f}")
print(f"pure warm-up     {odelab.warmup_event_time():.8f}")
