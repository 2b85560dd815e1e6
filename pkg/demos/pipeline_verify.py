"""Full upper-bound strategy on a small graph, then an independent check."""
import math

from semirandom.matching import Digraph, check_certificate, construct_S, is_perfect_matching
from semirandom.strategies import upper_bound_pipeline

n = 2000
rep, state = upper_bound_pipeline(n, seed=7, k=30, continuation_eps=1e-2,
                                  cleanup_eps=1e-3, return_state=True)
print(rep.to_json(indent=1))
g = Digraph.from_state(state)
pm = state.matching()
print("simple graph:", g.is_simple())
print("perfect matching:", is_perfect_matching(g, pm))
cert = construct_S(g, pm, math.sqrt(n))
print("certificate:", cert.to_dict(), check_certificate(g, cert))
