"""Dev probe: theta advance per full oscillation vs Clairaut momentum.

Prints the advance curve for the bump and double-well surfaces, from both the
event-detecting integrator and an independent singular quadrature, to pin
down which (n_osc, q) closing targets are attainable.
"""

import math

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from revgeo import Metric, make_profile
from revgeo.flow import find_trapping_crest, turning_advance, _turning_point


def advance_quadrature(metric, a, z_crest):
    """2 * integral of a*sqrt(gzz)/(R*sqrt(R^2-a^2)) dz between turning points."""
    z_top = _turning_point(metric, a, z_crest, +1)
    z_bot = _turning_point(metric, a, z_crest, -1)
    if z_top is None or z_bot is None:
        return None
    zm, amp = 0.5 * (z_top + z_bot), 0.5 * (z_top - z_bot)

    def f(psi):
        z = zm + amp * math.sin(psi)
        gtt, _, gzz = metric.g_components(0.0, z)
        R2 = float(gtt)
        q = (R2 - a * a) / max((z - z_bot) * (z_top - z), 1e-300)
        return a * math.sqrt(float(gzz)) / (math.sqrt(R2) * math.sqrt(q))

    val, _ = quad(f, -math.pi / 2, math.pi / 2, limit=200)
    return 2.0 * val


def report(name, metric):
    z_c = find_trapping_crest(metric)
    r_c = float(metric.r_theta(z_c))
    print(f"\n=== {name}: crest z={z_c:.6f}, r={r_c:.6f} ===")
    r_lo = None
    for a in np.linspace(0.999 * r_c, None or 0.999 * r_c, 1):
        pass
    for frac in (0.999, 0.99, 0.97, 0.95, 0.9, 0.85, 0.8, 0.75, 0.7, 0.65, 0.6, 0.55):
        a = frac * r_c
        ode = turning_advance(metric, a, z_c, h=1e-3)
        quad_v = advance_quadrature(metric, a, z_c)
        ode_s = f"{ode[0]:.6f} (T={ode[1]:.3f})" if ode else "none"
        quad_s = f"{quad_v:.6f}" if quad_v else "none"
        print(f"a={a:.5f}  ODE dtheta={ode_s}   quad={quad_s}   pi={math.pi:.6f} 2pi={2*math.pi:.6f}")


bump = Metric.intrinsic(make_profile("gaussian-bump"))
dwell = Metric.intrinsic(make_profile("double-well"))
report("gaussian-bump intrinsic", bump)
report("double-well intrinsic", dwell)

# where does dtheta_osc hit 2*pi (one full oscillation per winding)?
for name, metric in (("gaussian-bump", bump), ("double-well", dwell)):
    z_c = find_trapping_crest(metric)
    r_c = float(metric.r_theta(z_c))

    def f(a):
        adv = turning_advance(metric, a, z_c, h=1e-3)
        return (adv[0] - 2 * math.pi) if adv else math.nan

    lo, hi = 0.55 * r_c, 0.995 * r_c
    flo, fhi = f(lo), f(hi)
    print(f"\n{name}: f({lo:.4f})={flo:.4f}  f({hi:.4f})={fhi:.4f}")
    if not math.isnan(flo) and not math.isnan(fhi) and flo * fhi < 0:
        a_root = brentq(f, lo, hi, xtol=1e-12)
        adv = turning_advance(metric, a_root, z_c, h=1e-3)
        length = adv[1]
        print(f"  root a*={a_root:.8f}  period/length={length:.8f}  energy={length**2:.6f}")
        print(f"  crest parallel energy = {(2*math.pi*r_c)**2:.6f}")
