"""
The Grover walk as a two-level rotation
=======================================

Build the walk operator as a dense matrix for a random state and projector,
look at its spectrum, and compare the measured signals with their closed
forms.
"""
import math

import numpy as np

from eigengap_ae import exact_verifier as ev

rng = np.random.default_rng(1)
model = ev.random_model(8, rng)
print(f"dimension {model.dim}, hidden amplitude a = {model.a:.6f}")

# Two eigenvalues sit at exp(+-i arccos(1 - 2a)); everything else is +1 or -1.
w = np.linalg.eigvals(model.Q)
phases = np.sort(np.angle(w))
print("eigenphases:", np.round(phases, 6))
print("arccos(1-2a) =", round(math.acos(1 - 2 * model.a), 6))

rep = ev.verify_eigenphases(model)
print(f"eigenphase check: max error {rep.max_error:.2e}")

# Odd iteration counts come from measuring I - 2P after t walk steps,
# even ones from the echo observable.  Both trace cos(2 lam m).
lam = model.lam
for m in range(1, 9):
    print(f"m={m}: dense {ev.cos_signal(model, m):+.9f}   cos(2 lam m) {math.cos(2 * lam * m):+.9f}")

# A flag-qubit model also gives the sine signal from a Pauli-X readout.
flag = ev.flag_model(4, lam=0.3, rng=rng)
for m in (1, 3, -3, 5):
    print(f"m={m:+d}: dense {ev.sin_signal(flag, m):+.9f}   sin(2 lam m) {math.sin(0.6 * m):+.9f}")

print("all signal identities:", "ok" if ev.verify_signals(flag, 16).passed else "broken")
