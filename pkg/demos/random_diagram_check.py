"""Transforming an Ito system directly versus through its Stratonovich form.

A random smooth Ito system is changed to new coordinates in two ways: with
the Ito chain rule, and by correcting to Stratonovich form, applying the plain
chain rule and correcting back. The two drifts are compared at sample points.

Run with ``python demos/random_diagram_check.py [seed]``.
"""
import sys

import numpy as np

from stoflin.randgen import random_diffeo, random_system
from stoflin.theorems import corr_diagram, ito_route, stratonovich_route

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
rng = np.random.default_rng(seed)
s = random_system(rng, 2, 2, box=0.3)
T = random_diffeo(rng, 2, 2)
print("drift     ", s.f.strings())
print("dispersion", s.sigma.strings())
print("map       ", [str(t) for t in T.to_dict()["T"]])

print("\nIto route drift          ", ito_route(s, T).f.strings())
print("Stratonovich route drift ", stratonovich_route(s, T).f.strings())
rep = corr_diagram(s, T)
print(f"\nworst relative gap {rep['residual']:.2e}, passed: {rep['passed']}")
