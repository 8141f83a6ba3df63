"""
When is the rotation unique?
----------------------------

A tensor in the PMI subspace pins down its orthogonal basis only when the
binary slices of each coordinate pair avoid a few polynomial equations.
Here we check a few hand-made order-4 tensors and then confirm the answer
by brute force: rotate by every angle and look for a second basis that
also puts the tensor in the subspace.
"""

import numpy as np

import pmica


def binary(t0, t2, t4):
    return pmica.SymTensor.from_entries(
        {(0, 0, 0, 0): t0, (0, 0, 1, 1): t2, (1, 1, 1, 1): t4}, 4, 2)


def residual(T, theta):
    c, s = np.cos(theta), np.sin(theta)
    Q = np.array([[c, -s], [s, c]])
    return np.sqrt(pmica.objective(Q, T, pmica.PMI)) / pmica.frobenius(T)


thetas = np.linspace(0.05, np.pi / 2 - 0.05, 2001)
for t in [(1.0, 0.3, 2.0), (1.0, 0.3, 1.0), (-2.0, 5.0, -2.0)]:
    T = binary(*t)
    report = pmica.is_generic_pmi(T)
    scan = np.array([residual(T, th) for th in thetas])
    k = scan.argmin()
    print(f"t0, t2, t4 = {t}: generic={report.generic}, "
          f"smallest residual {scan[k]:.2e} at theta={thetas[k]:.3f}")

# With t0 = t4 the 45 degree rotation is a second valid basis, exactly as
# the certificate predicts.  Order 5 has a quadratic condition instead:
t = {0: 2 + np.sqrt(101), 2: 2.0, 3: 3.0, 5: 7.0}
T5 = pmica.SymTensor.from_entries({(0,) * (5 - k) + (1,) * k: v for k, v in t.items()}, 5, 2)
print("\norder 5 at the root:", pmica.is_generic_pmi(T5).to_dict())

# From order 7 on no certificate is implemented.
try:
    pmica.is_generic_pmi(pmica.SymTensor.zeros(7, 2))
except pmica.UnsupportedOrderError as exc:
    print("\norder 7:", exc)
