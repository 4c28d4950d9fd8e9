"""Closed-form stability and generalisation bounds for delayed SGD on quadratics.

All functions are pure: they take a :class:`BoundInputs` (plus, for the
stability bound, coefficient sums from :mod:`delaystab.genfun`) and return a
:class:`BoundReport` listing every summand.  Step sizes outside
eta <= 1/(20 mu (tau+1)) are evaluated anyway and flagged ``out_of_regime``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from .genfun import lemma_eta_max, t0 as _t0


@dataclass(frozen=True)
class BoundInputs:
    n: int
    T: int
    tau: int
    eta: float
    mu: float
    lam: float = 0.0
    r: float = 0.0
    sigma: float = 0.0
    rho: float | None = None
    w0_norm: float = 0.0
    empirical: tuple[str, ...] = ()

    @property
    def t0(self) -> float:
        return _t0(self.tau)

    @property
    def in_regime(self) -> bool:
        return self.eta <= lemma_eta_max(self.mu, self.tau) * (1 + 1e-12)

    def replace(self, **kw) -> "BoundInputs":
        return BoundInputs(**{**asdict(self), **kw})


@dataclass
class BoundReport:
    name: str
    inputs: BoundInputs
    terms: dict[str, float]
    flags: list[str] = field(default_factory=list)

    @property
    def total(self) -> float:
        return math.fsum(self.terms.values())

    def to_dict(self) -> dict:
        inputs = asdict(self.inputs)
        inputs["empirical"] = list(self.inputs.empirical)
        inputs["t0"] = self.inputs.t0
        return {"bound": self.name, "inputs": inputs, "terms": dict(self.terms),
                "total": self.total, "flags": list(self.flags)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _flags(inp: BoundInputs) -> list[str]:
    flags = []
    if not inp.in_regime:
        flags.append("out_of_regime")
    if inp.T <= inp.tau:
        flags.append("T_not_greater_than_tau")
    return flags


def _w0_flag(inp: BoundInputs, noise: float, flags: list[str]) -> list[str]:
    # the closed forms fold sigma*|w0| terms into sigma*(r+sigma)*|w0|, which needs r+sigma >= 1
    if inp.w0_norm > 0 and inp.r + noise < 1:
        flags.append("w0_term_assumes_r_plus_sigma_ge_1")
    return flags


def eta_t0_fact(inp: BoundInputs) -> bool:
    """eta * t0 <= ln(2(tau+1)) / (20 mu), which holds whenever the step size is in regime."""
    return inp.eta * inp.t0 <= math.log(2 * (inp.tau + 1)) / (20 * inp.mu) * (1 + 1e-12)


def prop1_bound(inp: BoundInputs, S1: float, S2: float, weighted_norm_t: float) -> BoundReport:
    """Average-stability bound after t iterations from the coefficient sums.

    ``S1``/``S2`` are the sums of |[x^i]pi| and |sqrt(A)[x^i]pi| over
    i < t - tau; ``weighted_norm_t`` is |sqrt(A)[x^t]pi|.
    """
    n, eta, r, sig, w0 = inp.n, inp.eta, inp.r, inp.sigma, inp.w0_norm
    terms = {
        "noise_mean": 2 * eta * r * sig / n * S1,
        "initialisation": 2 * eta * sig * w0 / n * weighted_norm_t * S2,
        "noise_sum": 2 * eta**2 * sig * (r + sig) / n * S2**2,
    }
    return BoundReport("prop1", inp, terms, _flags(inp))


def _thm1_terms(inp: BoundInputs, k: float, tau: int, flags: list[str]) -> dict[str, float]:
    # k is the noise product sigma(r+sigma), or its random-delay analogue
    n, mu, T = inp.n, inp.mu, inp.T
    span = max(T - tau, 0)
    terms = {
        "sqrt_horizon": k / (n * mu) * math.sqrt(span),
        "initialisation": k / (n * mu) * 12 * mu * inp.w0_norm,
        "log_delay": k / (n * mu) * math.log(tau + 1) ** 2,
    }
    if tau == 0:
        flags.append("tau_zero_horizon_term_inapplicable")
    else:
        terms["horizon_over_delay"] = k / (n * mu * tau) * span
    return terms


def thm1_bound(inp: BoundInputs) -> BoundReport:
    """Convex case: depends on T only through sqrt(T-tau) and (T-tau)/tau."""
    flags = _w0_flag(inp, inp.sigma, _flags(inp))
    terms = _thm1_terms(inp, inp.sigma * (inp.r + inp.sigma), inp.tau, flags)
    return BoundReport("thm1", inp, terms, flags)


def _thm2_terms(inp: BoundInputs, k: float, noise: float, tau: int) -> dict[str, float]:
    n, mu, lam, eta, w0 = inp.n, inp.mu, inp.lam, inp.eta, inp.w0_norm
    t0 = _t0(tau)
    root = math.sqrt(mu / (math.e * lam))
    return {
        "transient": 2 * k * eta * t0 / n * (1 + 3 * mu * w0 + mu * eta * t0 + 12 * root),
        "curvature": 42 * k / (n * lam),
        "initialisation": 36 * noise * w0 * root / n,
    }


def thm2_bound(inp: BoundInputs) -> BoundReport:
    """Strongly convex case: independent of T."""
    if inp.lam <= 0:
        raise ValueError("thm2_bound requires strong convexity (lam > 0)")
    terms = _thm2_terms(inp, inp.sigma * (inp.r + inp.sigma), inp.sigma, inp.tau)
    return BoundReport("thm2", inp, terms, _w0_flag(inp, inp.sigma, _flags(inp)))


def corollary_random_bound(inp: BoundInputs, strongly_convex: bool | None = None,
                           relaxed: bool = False) -> BoundReport:
    """Random bounded delays: ``inp.tau`` is tau_bar and sigma(r+sigma) becomes
    (sigma+rho)(r+sigma+rho).

    The strongly convex form defaults to the step-size-explicit expression
    (so rho = 0 recovers :func:`thm2_bound`); ``relaxed=True`` instead uses
    eta*t0 <= ln(tau_bar+1)/(10 mu) to remove eta.
    """
    if inp.rho is None:
        raise ValueError("rho is required: estimate it from a pilot run or declare it")
    if inp.tau < 1:
        raise ValueError("tau_bar must be >= 1")
    sr = inp.sigma + inp.rho
    k = sr * (inp.r + sr)
    flags = _w0_flag(inp, sr, _flags(inp))
    if strongly_convex is None:
        strongly_convex = inp.lam > 0
    if not strongly_convex:
        return BoundReport("corollary_convex", inp, _thm1_terms(inp, k, inp.tau, flags), flags)
    if inp.lam <= 0:
        raise ValueError("strongly convex corollary requires lam > 0")
    if not relaxed:
        return BoundReport("corollary_strongly_convex", inp, _thm2_terms(inp, k, sr, inp.tau), flags)
    n, mu, lam, w0 = inp.n, inp.mu, inp.lam, inp.w0_norm
    L = math.log(inp.tau + 1)
    root = math.sqrt(mu / (math.e * lam))
    terms = {
        "transient": k * L / (5 * n * mu) * (1 + 3 * mu * w0 + L + 12 * root),
        "curvature": 42 * k / (n * lam),
        "initialisation": 36 * sr * w0 * root / n,
    }
    return BoundReport("corollary_strongly_convex_relaxed", inp, terms, flags)


def appendix_term_bounds(inp: BoundInputs, t: int) -> dict[str, float]:
    """Upper bounds on the three coefficient quantities entering the stability bound.

    c1..c3 hold for merely convex problems (c2 once t >= t0); sc1..sc3 need
    lam > 0.
    """
    eta, tau, mu, t0 = inp.eta, inp.tau, inp.mu, inp.t0
    out = {
        "c1": float(t - tau),
        "c2": 3 / math.sqrt(2 * eta * math.e * (t + 1)),
        "c3": t0 * math.sqrt(mu) + 6 * math.sqrt((t - tau) / (2 * math.e * eta)),
    }
    if inp.lam > 0:
        lam = inp.lam
        out["sc1"] = t0 + 3 / (eta * lam)
        out["sc2"] = 3 * math.sqrt(mu)
        out["sc3"] = t0 * math.sqrt(mu) + 6 / (eta * math.sqrt(math.e * lam))
    return out


def theorem_bound(inp: BoundInputs) -> BoundReport:
    """thm2 when lam > 0, otherwise thm1."""
    return thm2_bound(inp) if inp.lam > 0 else thm1_bound(inp)
