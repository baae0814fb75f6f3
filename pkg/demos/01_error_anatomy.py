"""How complex-field prediction error splits into amplitude and phase parts.

Builds random travel-time fields, verifies the exact regional decomposition
numerically, and shows how the phase term blows up with the spectral value
while the amplitude term stays put.
"""
import numpy as np

from wavex.field import (RegionMask, TravelTimeSpec, decompose_regional_error,
                         regional_error_bound)

rng = np.random.default_rng(42)
shape = (32, 32)

amp_true = rng.uniform(0.2, 1.0, shape)
tau_true = rng.uniform(0.0, 2.0, shape)
amp_pred = amp_true * rng.uniform(0.9, 1.1, shape)   # mild amplitude mismatch
tau_pred = tau_true + rng.normal(0.0, 0.05, shape)   # mild travel-time mismatch
region = RegionMask(mask=np.ones(shape, dtype=bool), cell_area=(10 / 32) ** 2)

print("exact split of the squared field error, same mismatch at rising nu")
print(f"{'nu':>6} {'total':>12} {'amplitude':>12} {'phase':>12} {'identity gap':>14}")
for nu in (0.5, 1.0, 2.0, 4.0, 8.0):
    truth = TravelTimeSpec(amp=amp_true, tau=tau_true, nu=nu)
    pred = TravelTimeSpec(amp=amp_pred, tau=tau_pred, nu=nu)
    out = decompose_regional_error(truth, pred, region)
    gap = abs(out["lhs"] - out["amp_term"] - out["phase_term"])
    print(f"{nu:>6.1f} {out['lhs']:>12.5f} {out['amp_term']:>12.5f} "
          f"{out['phase_term']:>12.5f} {gap:>14.2e}")

print()
print("the frequency-sensitive upper bound tracks the same growth")
dtau = tau_pred - tau_true
dtau_l2_sq = float(np.sum(dtau**2) * region.cell_area)
for nu in (0.5, 2.0, 8.0):
    truth = TravelTimeSpec(amp=amp_true, tau=tau_true, nu=nu)
    pred = TravelTimeSpec(amp=amp_pred, tau=tau_pred, nu=nu)
    out = decompose_regional_error(truth, pred, region)
    bound = regional_error_bound(out["amp_term"], dtau_l2_sq, nu,
                                 float(amp_true.max()), float(amp_pred.max()))
    print(f"nu={nu:>4.1f}: error {out['lhs']:.5f} <= bound {bound:.5f}")

print()
print("takeaway: with fixed mismatch, only the phase term scales like nu^2;")
print("higher spectral values punish propagation errors, not amplitude errors.")
