"""
How a delay shapes the perturbation kernel
==========================================

A perturbation injected into delayed SGD on a quadratic is propagated by
the coefficients of pi(x) = (I - I x + eta A x^{tau+1})^{-1}.  On each
eigenvalue ``a`` they follow a scalar recurrence, so the whole kernel is
cheap to tabulate.
"""

import math

import numpy as np

from delaystab import pi_coeffs, t0, verify_lemma2
from delaystab.genfun import lemma_eta_max

# a spectrum with one stiff and many soft directions
spectrum = np.concatenate([[1.0], np.linspace(0.2, 0.01, 19)])
mu = spectrum.max()

# For each delay, use the largest step size of the geometric-decay regime
# and watch the coefficient norm: flat at 1 for the first tau+1 steps, then a
# slow start, then geometric decay after t0.
print(f"{'tau':>4} {'eta':>10} {'t0':>8} {'|c[t0]|':>9} {'|c[4 t0]|':>10} {'sum |c| to 3000':>16}")
for tau in (0, 1, 4, 16, 32):
    eta = lemma_eta_max(mu, tau)
    k = math.ceil(t0(tau))
    tab = pi_coeffs(spectrum, eta, tau, 3000)
    print(f"{tau:>4} {eta:>10.5f} {t0(tau):>8.2f} {tab.norms[k]:>9.4f} {tab.norms[4 * k]:>10.4f} "
          f"{tab.cum_norms[-1]:>16.1f}")

# The same tables certify the pointwise bounds: 1 before ceil(t0) and
# 3 (1 - eta a_min)^{t+1} afterwards.  Margins are bound minus value.
for tau in (2, 8, 32):
    tab = pi_coeffs(spectrum, lemma_eta_max(mu, tau), tau, 10 * math.ceil(t0(tau)) + 1000)
    rep = verify_lemma2(tab, mu)
    print(f"tau={tau:>2}: {rep.status}, min margin {rep.decay_margin:.3g}")

# Step sizes beyond the regime are simply "not applicable", never failures.
print(verify_lemma2(pi_coeffs(spectrum, 1.0 / mu, 4, 500), mu).status)
