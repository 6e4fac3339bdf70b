"""Two different species trees that produce identically distributed gene trees under heavy LGT."""
from lgtrecon.coupling import nonrecoverability_demo

rep = nonrecoverability_demo(n=16, lam=240.0, N=10, trials=20, seed=0)
for key, value in rep.summary().items():
    print(f"{key}: {value}")
