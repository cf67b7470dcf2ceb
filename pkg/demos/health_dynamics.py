"""
Health-state dynamics and calibration
=====================================

Each year a person moves between no condition, an acute condition and an
absorbing chronic condition. Recovery from acute conditions slows with age.
Acute onset rates for the young are then scaled so the share in good health
matches an age-band target.
"""

import numpy as np

from lhiem.health import calibrate_hazards, good_health_by_band, load_hazards, load_health_target, recovery_prob

print("recovery probability at ages 0, 10, 25, 50, 80:", np.round(recovery_prob([0, 10, 25, 50, 80]), 4))

hz = load_hazards()
target = load_health_target()
before = good_health_by_band(hz.uncalibrated(), target.bands)
cal = calibrate_hazards(hz, target)
after = good_health_by_band(cal, target.bands)

print("band      target  uncalibrated  calibrated")
for (lo, hi), t, b, a in zip(target.bands, target.p_good, before, after):
    print(f"{lo:>3}-{hi:<3}   {t:.4f}  {b:.4f}        {a:.4f}")
print("acute-onset multipliers:", {k: round(v, 3) for k, v in cal.band_multipliers().items()})
