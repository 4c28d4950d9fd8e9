"""Coefficients of pi(x) = (I - I x + eta A x^{tau+1})^{-1}.

A is symmetric, so pi(x) diagonalises with it: on an eigenvalue ``a`` the
coefficients c[t] = [x^t] 1/kappa(x) with kappa(x) = 1 - x + eta*a*x^{tau+1}
obey

    c[t] = 1                              0 <= t <= tau
    c[t] = c[t-1] - eta*a*c[t-tau-1]      t >= tau + 1

Operator norms of [x^t]pi(x) and sqrt(A)[x^t]pi(x) are then maxima over the
eigenvalue channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def t0(tau: int) -> float:
    """Phase boundary (tau+1) ln(2(tau+1)) after which coefficients decay geometrically."""
    return (tau + 1) * math.log(2 * (tau + 1))


def lemma_eta_max(mu: float, tau: int) -> float:
    """Largest step size of the geometric-decay regime, 1/(20 mu (tau+1))."""
    return 1.0 / (20.0 * mu * (tau + 1))


@dataclass(frozen=True, eq=False)
class CoeffTable:
    """Per-eigenvalue coefficient sequences plus norm sequences and prefix sums.

    ``partial`` marks tables built from an incomplete spectrum; their norms
    are then lower bounds on the true operator norms.
    """

    eta: float
    tau: int
    eigenvalues: np.ndarray
    coeffs: np.ndarray          # (m, T+1)
    norms: np.ndarray           # max_j |c_j[t]|
    weighted_norms: np.ndarray  # max_j sqrt(a_j) |c_j[t]|
    cum_norms: np.ndarray       # cum_norms[k] = sum_{i<k} norms[i]
    cum_weighted: np.ndarray
    partial: bool = False

    @property
    def T(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def t0(self) -> float:
        return t0(self.tau)


def pi_coeffs(spectrum, eta: float, tau: int, T: int, partial: bool = False) -> CoeffTable:
    a = np.atleast_1d(np.asarray(spectrum, dtype=np.float64))
    if eta <= 0 or tau < 0 or T < 1:
        raise ValueError("need eta > 0, tau >= 0, T >= 1")
    if a.size == 0 or np.any(a < 0):
        raise ValueError("spectrum must be a nonempty set of nonnegative values")
    ea = eta * a
    c = np.empty((T + 1, a.size))
    c[: min(tau, T) + 1] = 1.0
    for t in range(tau + 1, T + 1):
        c[t] = c[t - 1] - ea * c[t - tau - 1]
    c = c.T.copy()
    absc = np.abs(c)
    norms = absc.max(axis=0)
    weighted = (np.sqrt(a)[:, None] * absc).max(axis=0)
    zero = np.zeros(1)
    return CoeffTable(
        eta=float(eta), tau=int(tau), eigenvalues=a, coeffs=c, norms=norms, weighted_norms=weighted,
        cum_norms=np.concatenate([zero, np.cumsum(norms)]),
        cum_weighted=np.concatenate([zero, np.cumsum(weighted)]),
        partial=partial,
    )


def kappa_coeffs(eta: float, a: float, tau: int) -> np.ndarray:
    k = np.zeros(tau + 2)
    k[0] += 1.0
    k[1] -= 1.0
    k[tau + 1] += eta * a
    return k


def inversion_residual(table: CoeffTable) -> float:
    """max over channels and t <= T of |(kappa_j * c_j)[t] - delta_t| (Cauchy product)."""
    worst = 0.0
    unit = np.zeros(table.T + 1)
    unit[0] = 1.0
    for a, c in zip(table.eigenvalues, table.coeffs):
        prod = np.convolve(kappa_coeffs(table.eta, a, table.tau), c)[: table.T + 1]
        worst = max(worst, float(np.abs(prod - unit).max()))
    return worst


def weighted_partial_sums(table: CoeffTable, upto_t: int) -> tuple[float, float]:
    """S1 = sum_{i=0}^{t-tau-1} norms[i] and S2 = the same over weighted norms."""
    if upto_t <= table.tau:
        raise ValueError(f"t={upto_t} must exceed tau={table.tau}")
    k = upto_t - table.tau
    if k > table.T + 1:
        raise ValueError(f"table only covers t <= {table.T + table.tau + 1}")
    return float(table.cum_norms[k]), float(table.cum_weighted[k])


@dataclass
class VerificationReport:
    tau: int
    eta: float
    mu: float
    t0: float
    unit_regime: bool          # eta <= 1/(mu tau), tau >= 1
    decay_regime: bool         # eta <= 1/(20 mu (tau+1))
    unit_pass: bool | None = None
    decay_pass: bool | None = None
    unit_margin: float = float("nan")
    decay_margin: float = float("nan")
    failures: list[int] = field(default_factory=list)

    @property
    def applicable(self) -> bool:
        return self.unit_regime or self.decay_regime

    @property
    def passed(self) -> bool:
        return all(p is not False for p in (self.unit_pass, self.decay_pass))

    @property
    def status(self) -> str:
        if not self.applicable:
            return "not applicable"
        return "pass" if self.passed else "fail"


# float slack when a step size sits exactly on a regime boundary
_REGIME_RTOL = 1e-12


def verify_lemma2(table: CoeffTable, mu: float, tol: float = 1e-9) -> VerificationReport:
    """Check the coefficient bounds against ``table``.

    Margins are ``bound - value`` minimised over t (negative means violated).
    """
    a = table.eigenvalues
    if mu < a.max() * (1 - _REGIME_RTOL):
        raise ValueError("mu must dominate every eigenvalue")
    eta, tau = table.eta, table.tau
    rep = VerificationReport(
        tau=tau, eta=eta, mu=mu, t0=table.t0,
        unit_regime=tau >= 1 and eta <= (1 + _REGIME_RTOL) / (mu * tau),
        decay_regime=eta <= lemma_eta_max(mu, tau) * (1 + _REGIME_RTOL),
    )
    norms = table.norms
    ts = np.arange(table.T + 1)
    if rep.unit_regime:
        margin = 1.0 - norms
        rep.unit_margin = float(margin.min())
        rep.unit_pass = bool(np.all(margin >= -tol))
        rep.failures.extend(ts[margin < -tol].tolist())
    if rep.decay_regime:
        bound = lemma_bound_sequence(table)
        margin = bound - norms
        rep.decay_margin = float(margin.min())
        rep.decay_pass = bool(np.all(margin >= -tol))
        rep.failures.extend(t for t in ts[margin < -tol].tolist() if t not in rep.failures)
    return rep


def lemma_bound_sequence(table: CoeffTable) -> np.ndarray:
    """Pointwise bound on norms[t]: 1 before ceil(t0), 3 max_j(1-eta a_j)^{t+1} after."""
    k0 = math.ceil(table.t0)
    ts = np.arange(table.T + 1)
    out = np.ones(table.T + 1)
    out[k0:] = 3.0 * (1.0 - table.eta * table.eigenvalues.min()) ** (ts[k0:] + 1)
    return out
