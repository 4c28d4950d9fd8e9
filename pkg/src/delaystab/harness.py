"""Experiment orchestration: generalisation sweeps, stability estimates, lemma grids.

Every experiment is described by an :class:`ExperimentConfig`; all
randomness derives from the seeds it carries, and its digest is stamped on
every emitted file so that outputs can be traced back and reproduced.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import bounds as B
from .dataset import QuadraticDistribution, SplitSpec, load_libsvm, make_distribution, split
from .engine import DivergenceError, FixedDelay, RandomDelay, RunConfig, run, twin_run
from .genfun import lemma_eta_max, pi_coeffs, t0, verify_lemma2, weighted_partial_sums
from .problem import QuadraticProblem, ridge_for_condition

MODES = ("gen-sweep", "stability", "verify-lemma", "bounds", "parse-check")


@dataclass
class ExperimentConfig:
    mode: str = "gen-sweep"
    # data: a LIBSVM file (split with train_fraction/split_seed) or synthetic
    dataset: str | None = None
    n_features: int | None = None
    train_fraction: float = 0.8
    split_seed: int = 0
    d: int = 10
    n: int = 100
    n_test: int = 1000
    spectrum: list | tuple = ("uniform", 0.1, 1.0)
    label_noise: float = 0.5
    data_seed: int = 0
    # objective
    ridge: float = 0.0
    ridge_ratio: float | None = None  # pick ridge so that lam ~= ridge_ratio * mu
    # algorithm
    delays: list[int] = field(default_factory=lambda: [1, 4, 8, 16])
    random_delays: bool = False
    eta: float | None = None          # None: 1/(20 mu (eta_delay + 1))
    eta_delay: int | None = None      # None: max(delays)
    T: int = 1000
    batch_size: int = 1
    seeds: list[int] = field(default_factory=lambda: [0])
    stride: int | None = None         # None: T // 100
    record_start: bool = False
    # stability
    num_replacements: int = 20
    # output
    out: str = "results"
    format: str = "csv"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        self.delays = [int(x) for x in self.delays]
        if len(set(self.delays)) != len(self.delays):
            raise ValueError("delays must be distinct")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        if isinstance(self.spectrum, tuple):
            self.spectrum = list(self.spectrum)

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        import yaml

        with open(path, encoding="utf-8") as fh:
            return cls.from_mapping(yaml.safe_load(fh) or {})

    def canonical(self) -> str:
        data = asdict(self)
        data.pop("out")
        data.pop("format")
        return json.dumps(data, sort_keys=True, separators=(",", ":"))

    @property
    def digest(self) -> str:
        return hashlib.blake2b(self.canonical().encode(), digest_size=8).hexdigest()

    @property
    def record_stride(self) -> int:
        return self.stride or max(self.T // 100, 1)


# ---------------------------------------------------------------------------
# data preparation


@dataclass
class PreparedData:
    train: QuadraticProblem
    test: QuadraticProblem
    distribution: QuadraticDistribution | None
    mu: float
    lam: float
    spectrum: np.ndarray | None
    name: str


def _seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint64)[0])


def prepare_data(cfg: ExperimentConfig) -> PreparedData:
    dist = None
    if cfg.dataset:
        ds = load_libsvm(cfg.dataset, n_features=cfg.n_features)
        train, test = split(ds, SplitSpec(cfg.train_fraction, cfg.split_seed))
        name = ds.name
    else:
        dist = make_distribution(cfg.d, cfg.spectrum, cfg.label_noise, cfg.data_seed)
        train = dist.draw(cfg.n, np.random.default_rng(_seed(cfg.data_seed, 1)), "synthetic:train")
        test = dist.draw(cfg.n_test, np.random.default_rng(_seed(cfg.data_seed, 2)), "synthetic:test")
        name = f"synthetic-d{cfg.d}-n{cfg.n}"
    ridge = cfg.ridge
    if cfg.ridge_ratio is not None:
        ridge = ridge_for_condition(train, cfg.ridge_ratio)
    prob = QuadraticProblem(train, ridge)
    spec = prob.estimate_spectral(seed=cfg.data_seed)
    return PreparedData(prob, QuadraticProblem(test), dist, spec.mu, spec.lam, spec.spectrum, name)


def resolve_eta(cfg: ExperimentConfig, mu: float) -> float:
    if cfg.eta is not None:
        return cfg.eta
    tau = cfg.eta_delay if cfg.eta_delay is not None else max(cfg.delays)
    return lemma_eta_max(mu, tau)


def make_schedule(cfg: ExperimentConfig, delay: int, seed: int, key: int = 0):
    if cfg.random_delays:
        return RandomDelay(delay, _seed(seed, key, 7))
    return FixedDelay(delay)


# ---------------------------------------------------------------------------
# generalisation sweep


@dataclass
class Result:
    mode: str
    config: ExperimentConfig
    columns: list[str]
    records: list[dict]
    summary: dict = field(default_factory=dict)
    summary_rows: list[dict] = field(default_factory=list)


GEN_COLUMNS = ["mode", "dataset", "delay", "seed", "t", "train_loss", "test_loss", "gen_error"]
STAB_COLUMNS = GEN_COLUMNS + ["replaced_index", "loss_gap", "bound_prop1", "bound_thm"]


def run_gen_sweep(cfg: ExperimentConfig, data: PreparedData | None = None) -> Result:
    data = data or prepare_data(cfg)
    eta = resolve_eta(cfg, data.mu)
    records, failures = [], []
    for delay in sorted(cfg.delays):
        for seed in sorted(cfg.seeds):
            rc = RunConfig(eta=eta, T=cfg.T, batch_size=cfg.batch_size, sampler_seed=seed,
                           record_stride=cfg.record_stride, record_start=cfg.record_start, noise_samples=0)
            try:
                traj = run(data.train, make_schedule(cfg, delay, seed), rc)
            except DivergenceError as exc:
                failures.append({"delay": delay, "seed": seed, "diverged_at": exc.iteration})
                continue
            for t, w, tr in zip(traj.checkpoints, traj.iterates, traj.train_loss):
                te = data.test.empirical_loss(w)
                records.append({"mode": "gen-sweep", "dataset": data.name, "delay": delay, "seed": seed,
                                "t": int(t), "train_loss": float(tr), "test_loss": te, "gen_error": te - float(tr)})

    summary_rows = []
    for delay in sorted(cfg.delays):
        rows = [r for r in records if r["delay"] == delay]
        for t in sorted({r["t"] for r in rows}):
            ge = np.array([r["gen_error"] for r in rows if r["t"] == t])
            summary_rows.append({"delay": delay, "t": t, "runs": ge.size, "gen_error_mean": float(ge.mean()),
                                 "gen_error_std": float(ge.std(ddof=1)) if ge.size > 1 else 0.0})
    final = {}
    for delay in sorted(cfg.delays):
        last = [r for r in summary_rows if r["delay"] == delay]
        if last:
            final[str(delay)] = last[-1]["gen_error_mean"]
    summary = {"eta": eta, "mu": data.mu, "lam": data.lam, "ridge": data.train.ridge,
               "final_gen_error_mean": final, "diverged": failures,
               "delay_distribution": "uniform-0-to-tau_bar" if cfg.random_delays else "fixed"}
    return Result("gen-sweep", cfg, GEN_COLUMNS, records, summary, summary_rows)


def final_gen_error_by_delay(result: Result) -> dict[int, float]:
    return {int(k): v for k, v in result.summary["final_gen_error_mean"].items()}


# ---------------------------------------------------------------------------
# average stability


def _replacement_pool(cfg: ExperimentConfig, data: PreparedData, m: int):
    if data.distribution is not None:
        fresh = data.distribution.draw(m, np.random.default_rng(_seed(cfg.data_seed, 3)))
        return fresh.X.toarray(), fresh.y
    test = data.test
    if test.n == 0:
        raise ValueError("empty replacement pool")
    rows = np.random.default_rng(_seed(cfg.data_seed, 3)).choice(test.n, size=m, replace=test.n < m)
    X = test.X[rows]
    return (X if isinstance(X, np.ndarray) else X.toarray()), test.y[rows]


def stability_bounds(data: PreparedData, cfg: ExperimentConfig, delay: int, eta: float,
                     sigma: float, rho: float | None = None) -> tuple[B.BoundReport | None, B.BoundReport]:
    """Stability bound from exact coefficient sums, and the matching theorem bound."""
    inp = B.BoundInputs(n=data.train.n, T=cfg.T, tau=delay, eta=eta, mu=data.mu, lam=data.lam,
                        r=data.train.b_norm, sigma=sigma, rho=rho, w0_norm=0.0,
                        empirical=("sigma", "r", "mu", "lam") + (("rho",) if rho is not None else ()))
    prop = None
    if data.spectrum is not None:
        tab = pi_coeffs(data.spectrum, eta, delay, cfg.T)
        S1, S2 = weighted_partial_sums(tab, cfg.T)
        if rho is not None:
            # random delays: sigma -> sigma + rho in every noise factor
            inp_p = inp.replace(sigma=sigma + rho)
            prop = B.prop1_bound(inp_p, S1, S2, float(tab.weighted_norms[cfg.T]))
        else:
            prop = B.prop1_bound(inp, S1, S2, float(tab.weighted_norms[cfg.T]))
    if rho is not None:
        thm = B.corollary_random_bound(inp)
    else:
        thm = B.theorem_bound(inp)
    return prop, thm


def estimate_rho(data: PreparedData, cfg: ExperimentConfig, tau_bar: int, eta: float, safety: float = 2.0) -> float:
    """Pilot-run estimate of the random-delay drift bound, max |A(w_{t-tau_t} - w_{t-tau_bar})|."""
    seed = min(cfg.seeds)
    rc = RunConfig(eta=eta, T=cfg.T, batch_size=cfg.batch_size, sampler_seed=_seed(seed, 99),
                   noise_samples=0, track_drift=True)
    traj = run(data.train, RandomDelay(tau_bar, _seed(seed, 99, 7)), rc)
    return safety * traj.drift_max


def estimate_avg_stability(cfg: ExperimentConfig, num_replacements: int | None = None,
                           data: PreparedData | None = None, identical_replacement: bool = False) -> Result:
    """|mean over (i, seed) of f(w_T'; z_i) - f(w_T; z_i)| from coupled twin runs.

    ``identical_replacement`` swaps each z_i for itself (a control whose
    estimate must be exactly zero).
    """
    data = data or prepare_data(cfg)
    m = cfg.num_replacements if num_replacements is None else num_replacements
    n = data.train.n
    if m < 1:
        raise ValueError("empty replacement pool: num_replacements must be >= 1")
    if m > n:
        raise ValueError(f"num_replacements={m} exceeds n={n}")
    eta = resolve_eta(cfg, data.mu)
    chosen = np.sort(np.random.default_rng(_seed(cfg.data_seed, 4)).choice(n, size=m, replace=False))
    pool_X, pool_y = _replacement_pool(cfg, data, m)

    records, per_delay = [], {}
    for delay in sorted(cfg.delays):
        rho = estimate_rho(data, cfg, delay, eta) if cfg.random_delays else None
        gaps, sigmas, cells = [], [], []
        for seed in sorted(cfg.seeds):
            for k, i in enumerate(chosen):
                i = int(i)
                if identical_replacement:
                    rep = (data.train.X[i], data.train.y[i])
                else:
                    rep = (pool_X[k], pool_y[k])
                rc = RunConfig(eta=eta, T=cfg.T, batch_size=cfg.batch_size, sampler_seed=_seed(seed, i))
                tw = twin_run(data.train, i, rep, make_schedule(cfg, delay, seed, i), rc)
                gaps.append(tw.loss_gap)
                sigmas.append(tw.trajectory.noise_mean)
                tr = data.train.empirical_loss(tw.w)
                te = data.test.empirical_loss(tw.w)
                cells.append({"mode": "stability", "dataset": data.name, "delay": delay, "seed": seed,
                              "t": cfg.T, "train_loss": tr, "test_loss": te, "gen_error": te - tr,
                              "replaced_index": i, "loss_gap": float(tw.loss_gap)})
        gaps = np.array(gaps)
        sigma = float(np.mean(sigmas))
        prop, thm = stability_bounds(data, cfg, delay, eta, sigma, rho)
        for c in cells:
            c["bound_prop1"] = prop.total if prop is not None else float("nan")
            c["bound_thm"] = thm.total
        records.extend(cells)
        per_delay[str(delay)] = {
            "estimate": float(abs(gaps.mean())),
            "signed_mean": float(gaps.mean()),
            "stderr": float(gaps.std(ddof=1) / math.sqrt(gaps.size)) if gaps.size > 1 else 0.0,
            "samples": int(gaps.size),
            "sigma": sigma,
            "r": data.train.b_norm,
            "rho": rho,
            "bound_prop1": prop.to_dict() if prop is not None else None,
            "bound_thm": thm.to_dict(),
        }
    summary = {"eta": eta, "mu": data.mu, "lam": data.lam, "ridge": data.train.ridge, "n": n,
               "replaced_indices": chosen.tolist(), "by_delay": per_delay}
    return Result("stability", cfg, STAB_COLUMNS, records, summary)


# ---------------------------------------------------------------------------
# lemma verification grid

LEMMA_COLUMNS = ["tau", "eta", "t0", "ceil_t0", "unit_regime", "decay_regime", "status",
                 "unit_margin", "decay_margin"]


def verify_lemma_grid(spectrum, eta_grid, tau_grid, T: int | None = None, relative: bool = False,
                      tol: float = 1e-9) -> tuple[list[dict], bool]:
    """Check the coefficient bounds over a (tau, eta) grid.

    With ``relative=True`` the eta grid holds multiples of 1/(20 mu (tau+1)).
    ``T`` defaults to 10*ceil(t0)+1000 per tau.  Returns the rows and whether
    every applicable point passed.
    """
    a = np.asarray(spectrum, dtype=np.float64)
    mu = float(a.max())
    rows, ok = [], True
    for tau in tau_grid:
        tau = int(tau)
        horizon = T or 10 * math.ceil(t0(tau)) + 1000
        for e in eta_grid:
            eta = float(e) * lemma_eta_max(mu, tau) if relative else float(e)
            rep = verify_lemma2(pi_coeffs(a, eta, tau, horizon), mu, tol)
            ok &= rep.passed
            rows.append({"tau": tau, "eta": eta, "t0": rep.t0, "ceil_t0": math.ceil(rep.t0),
                         "unit_regime": rep.unit_regime, "decay_regime": rep.decay_regime,
                         "status": rep.status, "unit_margin": rep.unit_margin,
                         "decay_margin": rep.decay_margin})
    return rows, ok


def coefficient_rows(spectrum, eta: float, tau: int, T: int) -> list[dict]:
    """Per-t coefficient norms, prefix sums and their bounds (CSV-ready)."""
    from .genfun import lemma_bound_sequence

    a = np.asarray(spectrum, dtype=np.float64)
    tab = pi_coeffs(a, eta, tau, T)
    lemma = lemma_bound_sequence(tab)
    inp = B.BoundInputs(n=1, T=T, tau=tau, eta=eta, mu=float(a.max()), lam=float(a.min()))
    rows = []
    for t in range(T + 1):
        row = {"t": t, "norm": tab.norms[t], "weighted_norm": tab.weighted_norms[t],
               "lemma_bound": lemma[t], "S1": "", "S2": "", "c1": "", "c2": "", "c3": ""}
        if tau < t <= T + tau + 1:
            S1, S2 = weighted_partial_sums(tab, t)
            ab = B.appendix_term_bounds(inp, t)
            row.update(S1=S1, S2=S2, c1=ab["c1"], c2=ab["c2"], c3=ab["c3"])
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return "" if v is None else str(v)


def to_csv(columns, rows, header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


def emit_results(result: Result, out_dir=None, fmt: str | None = None) -> list[Path]:
    """Write ``<mode>.csv`` (+ ``<mode>_summary.csv``) or ``<mode>.json``; returns the paths."""
    cfg = result.config
    out = Path(out_dir or cfg.out)
    fmt = fmt or cfg.format
    if fmt not in ("csv", "json"):
        raise ValueError("format must be csv or json")
    out.mkdir(parents=True, exist_ok=True)
    header = f"config_digest={cfg.digest} mode={result.mode}"
    paths = []
    if fmt == "csv":
        p = out / f"{result.mode}.csv"
        p.write_text(to_csv(result.columns, result.records, header), encoding="utf-8")
        paths.append(p)
        if result.summary_rows:
            q = out / f"{result.mode}_summary.csv"
            q.write_text(to_csv(list(result.summary_rows[0]), result.summary_rows, header), encoding="utf-8")
            paths.append(q)
    else:
        p = out / f"{result.mode}.json"
        doc = {"config_digest": cfg.digest, "mode": result.mode, "config": json.loads(cfg.canonical()),
               "records": result.records, "summary": result.summary, "summary_rows": result.summary_rows}
        p.write_text(json.dumps(_jsonable(doc), sort_keys=True, indent=1) + "\n", encoding="utf-8")
        paths.append(p)
    return paths
