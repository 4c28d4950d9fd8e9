"""Quadratic empirical risk over a dataset.

    F_S(w) = 1/(2n) sum_i (x_i.w - y_i)^2 + ridge/2 |w|^2
           = 1/2 w'(A + ridge I)w + b'w + c

with A = (1/n) sum x_i x_i', b = -(1/n) sum y_i x_i, c = 1/(2n) sum y_i^2.
A is formed densely only when d <= EXPLICIT_MAX_DIM; above that every
product goes through the sample matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .dataset import Dataset, Sample

EXPLICIT_MAX_DIM = 2048


class SpectralEstimationError(RuntimeError):
    def __init__(self, message: str, last_estimate: float):
        self.last_estimate = last_estimate
        super().__init__(f"{message} (last estimate {last_estimate:.6g})")


@dataclass(frozen=True)
class SpectralConstants:
    mu: float
    lam: float
    method: str
    iterations: int = 0
    tol: float = 0.0
    spectrum: np.ndarray | None = None


class QuadraticProblem:
    def __init__(self, dataset: Dataset, ridge: float = 0.0):
        if dataset.n == 0:
            raise ValueError("empty dataset")
        if ridge < 0:
            raise ValueError("ridge must be nonnegative")
        self.dataset = dataset
        self.ridge = float(ridge)
        self.n = dataset.n
        self.d = dataset.d
        self.explicit = self.d <= EXPLICIT_MAX_DIM
        self.X = dataset.X.toarray() if self.explicit else dataset.X
        self.y = dataset.y
        self.b = -np.asarray(self.X.T @ self.y).ravel() / self.n
        self.c = float(self.y @ self.y) / (2 * self.n)

    def __repr__(self):
        mode = "explicit" if self.explicit else "implicit"
        return f"QuadraticProblem({self.dataset.name!r}, n={self.n}, d={self.d}, ridge={self.ridge}, {mode})"

    @cached_property
    def A(self) -> np.ndarray:
        """Dense A + ridge*I (explicit regime only)."""
        if not self.explicit:
            raise RuntimeError(f"A is not materialised for d={self.d} > {EXPLICIT_MAX_DIM}")
        A = self.X.T @ self.X / self.n
        A = 0.5 * (A + A.T)
        A[np.diag_indices_from(A)] += self.ridge
        return A

    @property
    def b_norm(self) -> float:
        return float(np.linalg.norm(self.b))

    def matvec(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if self.explicit and "A" in self.__dict__:
            return self.A @ v
        return np.asarray(self.X.T @ (self.X @ v)).ravel() / self.n + self.ridge * v

    def _check_index(self, i: int):
        if not 0 <= i < self.n:
            raise IndexError(f"sample index {i} out of range for n={self.n}")

    def residuals(self, w) -> np.ndarray:
        return np.asarray(self.X @ w).ravel() - self.y

    def sample_loss(self, w, i: int) -> float:
        """1/2 (x_i.w - y_i)^2; the ridge term is not part of per-sample losses."""
        self._check_index(i)
        r = float(self.X[i] @ w) - self.y[i]
        return 0.5 * r * r

    def sample_gradient(self, w, i: int) -> np.ndarray:
        self._check_index(i)
        w = np.asarray(w, dtype=np.float64)
        xi = self.X[i] if self.explicit else self.X[i].toarray().ravel()
        g = xi * (float(xi @ w) - self.y[i])
        if self.ridge:
            g = g + self.ridge * w
        return g

    def empirical_loss(self, w) -> float:
        """Mean sample loss without ridge; the quantity compared across train and test."""
        r = self.residuals(w)
        return 0.5 * float(r @ r) / self.n

    def full_loss(self, w) -> float:
        w = np.asarray(w, dtype=np.float64)
        return self.empirical_loss(w) + 0.5 * self.ridge * float(w @ w)

    def full_gradient(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        g = np.asarray(self.X.T @ self.residuals(w)).ravel() / self.n
        if self.ridge:
            g = g + self.ridge * w
        return g

    def quadratic_form_loss(self, w) -> float:
        w = np.asarray(w, dtype=np.float64)
        return 0.5 * float(w @ self.matvec(w)) + float(self.b @ w) + self.c

    def replace_sample(self, i: int, sample: Sample | tuple) -> "QuadraticProblem":
        """Problem on the neighbouring dataset with sample ``i`` swapped out."""
        self._check_index(i)
        if isinstance(sample, Sample):
            x_new, y_new = sample.to_dense(self.d), sample.label
        else:
            x_new, y_new = np.asarray(sample[0], dtype=np.float64), float(sample[1])
        if x_new.shape != (self.d,):
            raise ValueError(f"replacement has dimension {x_new.shape}, expected ({self.d},)")
        X = self.dataset.X.tolil(copy=True)
        X[i] = x_new
        y = self.dataset.y.copy()
        y[i] = y_new
        ds = Dataset(sp.csr_matrix(X), y, f"{self.dataset.name}^({i})")
        return QuadraticProblem(ds, self.ridge)

    def estimate_spectral(self, tol: float = 1e-8, max_iter: int = 10_000, seed: int = 0,
                          rank_deficient: bool | None = None) -> SpectralConstants:
        """Smoothness ``mu`` and strong-convexity ``lam`` of A + ridge*I.

        Exact eigendecomposition in the explicit regime; otherwise power
        iteration for ``mu`` and shifted power iteration on mu*I - A for
        ``lam``.  Data with n < d (or ``rank_deficient=True``) gets ``lam = ridge``.
        """
        if self.explicit:
            A0 = self.X.T @ self.X / self.n
            eig = np.clip(np.linalg.eigvalsh(0.5 * (A0 + A0.T)), 0.0, None) + self.ridge
            eig = eig[::-1]
            lam = float(eig[-1])
            if rank_deficient or self.n < self.d:
                lam = self.ridge
            return SpectralConstants(float(eig[0]), lam, "explicit-eigen", 0, 0.0, eig)

        rng = np.random.default_rng(seed)
        mu, it_mu = _power_iteration(self.matvec, self.d, tol, max_iter, rng)
        if rank_deficient or (rank_deficient is None and self.n < self.d):
            return SpectralConstants(mu, self.ridge, "power-iteration", it_mu, tol)
        shift, it_lam = _power_iteration(lambda v: mu * v - self.matvec(v), self.d, tol, max_iter, rng)
        lam = max(mu - shift, self.ridge)
        return SpectralConstants(mu, min(lam, mu), "power-iteration", it_mu + it_lam, tol)


def _power_iteration(op, d: int, tol: float, max_iter: int, rng) -> tuple[float, int]:
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    est = 0.0
    for k in range(1, max_iter + 1):
        u = op(v)
        new = float(v @ u)
        nrm = np.linalg.norm(u)
        if nrm == 0.0:
            return 0.0, k
        v = u / nrm
        if k > 1 and abs(new - est) <= tol * max(abs(new), 1e-300):
            return new, k
        est = new
    raise SpectralEstimationError(f"power iteration did not converge in {max_iter} steps", est)


def build_problem(dataset: Dataset, ridge: float = 0.0) -> QuadraticProblem:
    return QuadraticProblem(dataset, ridge)


def ridge_for_condition(dataset: Dataset, ratio: float) -> float:
    """Ridge making lambda/mu of A + ridge*I equal ``ratio`` (0 if already at least that)."""
    A0 = QuadraticProblem(dataset).estimate_spectral()
    mu, lam = A0.mu, float(A0.spectrum[-1]) if A0.spectrum is not None else A0.lam
    return max((ratio * mu - lam) / (1.0 - ratio), 0.0)
