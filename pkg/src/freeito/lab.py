"""Random-matrix realization of free Lévy paths and Monte Carlo checks.

Increments over a grid of ``steps`` cells of width ``dt = T / steps`` are
independent ``N x N`` Hermitian matrices whose spectral law approximates
``mu_dt``:

``gaussian_hermitian``
    ``sqrt(r_2 dt) (G + G*) / sqrt(2N) + r_1 dt``, ``G`` complex Ginibre.
    Only for semicircular bases.
``haar_quantile``
    ``U diag(q) U*`` with ``U`` Haar and ``q`` the quantiles of ``mu_dt``.

Independent unitarily invariant matrices are asymptotically free, so the
paths realize free increments up to finite-``N`` error.

Every check runs ``trials`` independent paths.  Trial ``i`` draws from
``numpy.random.default_rng(SeedSequence(master_seed).spawn(trials)[i])``,
and results are reduced in trial order, so reports do not depend on how
trials are scheduled.  Large-``N`` checks stream the increments and work
with normalized traces (``mode="trace"``); ``mode="full"`` also forms the
matrices and reports operator-norm differences.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from .biprocess import (
    ONE,
    OperatorTensor,
    apply_sharp,
    from_polynomial,
    mul,
    inner,
    op_norm,
    otimes2,
    phi_contract,
    sharp_m,
    trace,
    trace_product,
)
from .cumulants import CumulantSequence, as_rational, catalog, moments_from_cumulants, semigroup_cumulants
from .errors import AdaptednessError, DomainError, SizeError, ValidationError
from .scalar import StepFunction, mixed_moment, mu_norm
from .tensor import as_polynomial, partial_k
from .transforms import cdf, quantiles

MODELS = ("gaussian_hermitian", "haar_quantile")


# ----------------------------------------------------------------------------
# configuration and sampling


def _base_from_json(obj) -> CumulantSequence:
    if isinstance(obj, str):
        return catalog(obj)
    if isinstance(obj, Mapping) and "name" in obj:
        return catalog(obj["name"], **dict(obj.get("params", {})))
    return CumulantSequence.from_json(obj)


@dataclass(frozen=True)
class MatrixModelConfig:
    """Parameters of a matrix-model experiment.

    ``model="auto"`` picks ``gaussian_hermitian`` for semicircular bases and
    ``haar_quantile`` otherwise.  ``calibrate`` applies an increasing affine
    map to the quantile eigenvalues so that their first two moments equal
    those of ``mu_dt`` exactly.
    """

    N: int
    steps: int
    T: Fraction = Fraction(1)
    base: CumulantSequence = field(default_factory=lambda: catalog("semicircular"))
    trials: int = 20
    master_seed: int = 0
    model: str = "auto"
    workers: int = 1
    calibrate: bool = True

    def __post_init__(self):
        if not isinstance(self.N, int) or self.N < 2:
            raise SizeError(f"N must be an integer >= 2, got {self.N!r}")
        if not isinstance(self.steps, int) or self.steps < 1:
            raise SizeError(f"steps must be a positive integer, got {self.steps!r}")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise SizeError(f"trials must be a positive integer, got {self.trials!r}")
        object.__setattr__(self, "T", as_rational(self.T, "T"))
        if self.T <= 0:
            raise DomainError(f"T must be positive, got {self.T}")
        if not isinstance(self.master_seed, int) or not 0 <= self.master_seed < 2**64:
            raise ValidationError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed!r}")
        model = self.model
        if model == "auto":
            model = "gaussian_hermitian" if self.base.is_semicircular else "haar_quantile"
        if model not in MODELS:
            raise ValidationError(f"model must be one of {MODELS}, got {self.model!r}")
        if model == "gaussian_hermitian" and not self.base.is_semicircular:
            raise ValidationError("gaussian_hermitian requires a semicircular base")
        object.__setattr__(self, "model", model)

    @property
    def dt(self) -> Fraction:
        return self.T / self.steps

    def times(self) -> list[Fraction]:
        """Left endpoints ``t_j = j dt``."""
        return [j * self.dt for j in range(self.steps)]

    def with_(self, **changes) -> "MatrixModelConfig":
        return replace(self, **changes)

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "steps": self.steps,
            "T": str(self.T),
            "dt": str(self.dt),
            "base": self.base.to_json(),
            "trials": self.trials,
            "master_seed": self.master_seed,
            "model": self.model,
            "calibrate": self.calibrate,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "MatrixModelConfig":
        if not isinstance(obj, Mapping):
            raise ValidationError("config: expected a JSON object")
        known = {"N", "steps", "T", "dt", "base", "trials", "master_seed", "seed", "model", "workers", "calibrate"}
        extra = set(obj) - known
        if extra:
            raise ValidationError(f"config: unknown fields {sorted(extra)}")
        for key in ("N", "steps"):
            if key not in obj:
                raise ValidationError(f"config: missing field {key!r}")
        T = as_rational(obj.get("T", 1), "T")
        if "dt" in obj and as_rational(obj["dt"], "dt") * obj["steps"] != T:
            raise ValidationError("config: steps * dt must equal T")
        return cls(
            N=obj["N"],
            steps=obj["steps"],
            T=T,
            base=_base_from_json(obj.get("base", "semicircular")),
            trials=obj.get("trials", 20),
            master_seed=obj.get("master_seed", obj.get("seed", 0)),
            model=obj.get("model", "auto"),
            workers=obj.get("workers", 1),
            calibrate=obj.get("calibrate", True),
        )


def trial_rngs(master_seed: int, trials: int) -> list[np.random.Generator]:
    """Independent generators, one per trial, split from ``master_seed``."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(master_seed).spawn(trials)]


def haar_unitary(N: int, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary: QR of a complex Ginibre matrix with the phases of ``diag(R)`` removed."""
    if not isinstance(N, int) or N < 1:
        raise SizeError(f"N must be a positive integer, got {N!r}")
    Z = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2.0)
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R)
    return Q * (d / np.abs(d))[None, :]


@lru_cache(maxsize=64)
def _eigenvalues(base: CumulantSequence, dt: Fraction, N: int, calibrate: bool) -> np.ndarray:
    law = semigroup_cumulants(base, dt)
    q = quantiles(law, N)
    if calibrate:
        m = moments_from_cumulants(law, 2)
        mean, var = float(m[1]), float(m[2] - m[1] ** 2)
        spread = q.std()
        if spread > 0 and var > 0:
            q = mean + (q - q.mean()) * (np.sqrt(var) / spread)
        else:
            q = q - q.mean() + mean
    q.setflags(write=False)
    return q


def quantile_eigenvalues(base: CumulantSequence, dt, N: int, calibrate: bool = True) -> np.ndarray:
    """Deterministic eigenvalues for ``mu_dt`` (cached)."""
    return _eigenvalues(base, as_rational(dt, "dt"), N, calibrate)


def sample_increment(base: CumulantSequence, dt, N: int, rng: np.random.Generator,
                     model: str = "auto", calibrate: bool = True) -> np.ndarray:
    """One Hermitian increment whose spectral law approximates ``mu_dt``."""
    dt = as_rational(dt, "dt")
    if dt < 0:
        raise DomainError(f"dt must be non-negative, got {dt}")
    if model == "auto":
        model = "gaussian_hermitian" if base.is_semicircular else "haar_quantile"
    if model not in MODELS:
        raise ValidationError(f"unknown model {model!r}")
    if dt == 0:
        return np.zeros((N, N), dtype=complex)
    if model == "gaussian_hermitian":
        if not base.is_semicircular:
            raise ValidationError("gaussian_hermitian requires a semicircular base")
        G = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2.0)
        H = (G + G.conj().T) * (np.sqrt(float(base[2] * dt)) / np.sqrt(2.0 * N))
        if base[1]:
            H[np.diag_indices(N)] += float(base[1] * dt)
        return H
    q = quantile_eigenvalues(base, dt, N, calibrate)
    U = haar_unitary(N, rng)
    X = (U * q[None, :]) @ U.conj().T
    return 0.5 * (X + X.conj().T)


def _increments(config: MatrixModelConfig, rng) -> Iterator[np.ndarray]:
    for _ in range(config.steps):
        yield sample_increment(config.base, config.dt, config.N, rng, config.model, config.calibrate)


@dataclass
class SamplePath:
    """Stored increments ``X_1..X_steps`` of one path; ``X(t_0) = 0``."""

    increments: list
    dt: Fraction
    _sums: list | None = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.increments[0].shape[0]

    @property
    def steps(self) -> int:
        return len(self.increments)

    @property
    def partial_sums(self) -> list:
        """``[X(t_0), ..., X(t_steps)]``, computed once."""
        if self._sums is None:
            sums = [np.zeros((self.N, self.N), dtype=complex)]
            for inc in self.increments:
                sums.append(sums[-1] + inc)
            self._sums = sums
        return self._sums

    def value(self, j: int) -> np.ndarray:
        return self.partial_sums[j]

    def hermiticity_error(self) -> float:
        return max(float(np.abs(x - x.conj().T).max()) for x in self.increments)


def sample_path(config: MatrixModelConfig, rng: np.random.Generator) -> SamplePath:
    """Sample and store one path (keep ``N * steps`` modest)."""
    return SamplePath(list(_increments(config, rng)), config.dt)


# ----------------------------------------------------------------------------
# biprocesses


class PathView:
    """What an adapted rule may see at step ``j``: ``X(t_i)`` for ``i <= j``, increments before ``j``."""

    def __init__(self, path: SamplePath, j: int):
        self._path, self.j = path, j

    @property
    def dt(self) -> Fraction:
        return self._path.dt

    @property
    def N(self) -> int:
        return self._path.N

    def X(self, i: int | None = None) -> np.ndarray:
        i = self.j if i is None else i
        if i > self.j:
            raise AdaptednessError(f"rule at step {self.j} read X(t_{i}) from the future")
        return self._path.value(i)

    def increment(self, i: int) -> np.ndarray:
        if i >= self.j:
            raise AdaptednessError(f"rule at step {self.j} read increment {i}, which is not yet complete")
        return self._path.increments[i]


class AdaptedBiprocess:
    """``u(j) = rule(j, view)``: an arity-2 tensor built from the path before ``t_j``."""

    def __init__(self, rule: Callable[[int, PathView], OperatorTensor]):
        self.rule = rule

    def at(self, j: int, view: PathView) -> OperatorTensor:
        value = self.rule(j, view)
        if not isinstance(value, OperatorTensor) or value.arity != 2:
            raise ValidationError("a biprocess rule must return an arity-2 OperatorTensor")
        return value


class SimpleBiprocess(AdaptedBiprocess):
    """Deterministic piecewise constant biprocess ``sum_i U_i 1_[a_i, b_i)``."""

    def __init__(self, pieces: Sequence[tuple]):
        self.pieces = [(as_rational(a, "a"), as_rational(b, "b"), u) for a, b, u in pieces]
        if not self.pieces:
            raise ValidationError("a simple biprocess needs at least one piece")
        self.N = self.pieces[0][2].N
        for a, b, u in self.pieces:
            if b <= a:
                raise ValidationError(f"empty interval [{a}, {b})")
            if u.arity != 2 or u.N != self.N:
                raise SizeError("pieces must be arity-2 tensors of a common dimension")
        super().__init__(lambda j, view: self.value_at(j * view.dt))

    @classmethod
    def constant(cls, u: OperatorTensor, a=0, b=1) -> "SimpleBiprocess":
        return cls([(a, b, u)])

    def value_at(self, t) -> OperatorTensor:
        t = as_rational(t, "t")
        out = OperatorTensor.zero(self.N)
        for a, b, u in self.pieces:
            if a <= t < b:
                out = out + u
        return out

    def breakpoints(self) -> set:
        return {a for a, _, _ in self.pieces} | {b for _, b, _ in self.pieces}

    def integral_of(self, fn: Callable[[OperatorTensor], complex], T) -> complex:
        """``int_0^T fn(U(s)) ds`` for ``fn`` additive over the pieces' overlap structure."""
        T = as_rational(T, "T")
        grid = sorted({Fraction(0), T} | {p for p in self.breakpoints() if 0 < p < T})
        return sum(float(b - a) * fn(self.value_at(a)) for a, b in zip(grid, grid[1:]))

    def norm_function(self) -> StepFunction:
        """``s -> ||U(s)||`` as a step function (rounded to double)."""
        grid = sorted(self.breakpoints())
        return StepFunction(grid, [op_norm(self.value_at(a)) for a in grid[:-1]])


def _value(u: AdaptedBiprocess, j: int, dt, path: SamplePath | None = None) -> OperatorTensor:
    if isinstance(u, SimpleBiprocess):
        return u.value_at(j * dt)
    if path is None:
        raise ValidationError("random biprocesses need a stored path")
    return u.at(j, PathView(path, j))


def integrate_biprocess(path: SamplePath, u: AdaptedBiprocess, k: int = 1) -> np.ndarray:
    """Left-point Riemann sum ``sum_j u(j) # X_j^k``."""
    out = np.zeros((path.N, path.N), dtype=complex)
    for j, inc in enumerate(path.increments):
        if isinstance(u, SimpleBiprocess):
            value = u.value_at(j * path.dt)
        else:
            value = u.at(j, PathView(path, j))
        d = inc if k == 1 else np.linalg.matrix_power(inc, k)
        out += apply_sharp(value, d)
    return out


def diagonal_measure(path: SamplePath, k: int) -> np.ndarray:
    """``Delta_k(T) ~ sum_j X_j^k`` over the path's partition."""
    if not isinstance(k, int) or k < 1:
        raise DomainError(f"k must be a positive integer, got {k!r}")
    out = np.zeros((path.N, path.N), dtype=complex)
    for inc in path.increments:
        out += inc if k == 1 else np.linalg.matrix_power(inc, k)
    return out


# ----------------------------------------------------------------------------
# reports and trial plumbing


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(x.real), "im": float(x.imag)}
    return x


@dataclass
class Report:
    """Outcome of one check."""

    check: str
    config: dict
    predicted: float
    estimate: float
    stderr: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return _plain({
            "check": self.check,
            "config": self.config,
            "predicted": self.predicted,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "pass": self.passed,
            "details": self.details,
        })

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.check}: estimate={self.estimate:.6g} predicted={self.predicted:.6g} stderr={self.stderr:.3g}"


def run_trials(config: MatrixModelConfig, trial: Callable[[np.random.Generator], object]) -> list:
    """Run ``trial`` once per substream; results come back in trial order."""
    rngs = trial_rngs(config.master_seed, config.trials)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(trial, rngs))
    return [trial(rng) for rng in rngs]


def _mean_stderr(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))


# Deterministic estimators (zero spread across trials) would otherwise have to
# match to the last bit; allow for floating-point roundoff only.
ROUNDOFF = 1e-9


def _within(estimate, predicted, stderr, k=3.0, atol=0.0) -> bool:
    return abs(estimate - predicted) <= k * stderr + atol + ROUNDOFF * max(1.0, abs(predicted))


def _check_same_N(config, *biprocesses):
    for u in biprocesses:
        if isinstance(u, SimpleBiprocess) and u.N != config.N:
            raise SizeError(f"biprocess over {u.N}x{u.N} matrices, config has N={config.N}")


def _phi_xy_star(X, Y) -> complex:
    """``phi[X Y*]``."""
    return np.vdot(Y, X) / X.shape[0]


# ----------------------------------------------------------------------------
# first-order checks


def verify_ito_isometry(config: MatrixModelConfig, v: SimpleBiprocess, u: SimpleBiprocess) -> Report:
    """``phi[N M*]`` against ``r_2 int <V, U> ds + r_1^2 phi[(int m(V))(int m(U))*]``."""
    _check_same_N(config, v, u)
    r, dt, T = config.base, config.dt, config.T

    def trial(rng):
        n_acc = np.zeros((config.N, config.N), dtype=complex)
        m_acc = np.zeros_like(n_acc)
        for j, inc in enumerate(_increments(config, rng)):
            n_acc += apply_sharp(v.value_at(j * dt), inc)
            m_acc += apply_sharp(u.value_at(j * dt), inc)
        return _phi_xy_star(n_acc, m_acc)

    values = run_trials(config, trial)
    estimate, stderr = _mean_stderr([z.real for z in values])
    grid = sorted({Fraction(0), T} | {p for p in v.breakpoints() | u.breakpoints() if 0 < p < T})
    quad = sum(float(b - a) * inner(v.value_at(a), u.value_at(a)) for a, b in zip(grid, grid[1:]))
    mv = sum(float(b - a) * v.value_at(a).multiply() for a, b in zip(grid, grid[1:]))
    mu_ = sum(float(b - a) * u.value_at(a).multiply() for a, b in zip(grid, grid[1:]))
    drift = _phi_xy_star(np.asarray(mv), np.asarray(mu_)) if np.ndim(mv) else 0.0
    predicted = complex(float(r[2]) * quad + float(r[1]) ** 2 * drift)
    return Report(
        "ito_isometry", config.to_json(), predicted.real, estimate, stderr,
        _within(estimate, predicted.real, stderr),
        {"imag_estimate": float(np.mean([z.imag for z in values])), "predicted_imag": predicted.imag},
    )


def verify_trace_formula(config: MatrixModelConfig, u: SimpleBiprocess) -> Report:
    """``phi[int U # dX]`` against ``r_1 int phi[m(U(s))] ds``."""
    _check_same_N(config, u)
    dt = config.dt

    def trial(rng):
        total = 0j
        for j, inc in enumerate(_increments(config, rng)):
            value = u.value_at(j * dt)
            total += sum(c * trace_product(mul(B, A), inc, config.N) for c, (A, B) in value.terms)
        return total

    values = run_trials(config, trial)
    estimate, stderr = _mean_stderr([z.real for z in values])
    predicted = float(config.base[1]) * u.integral_of(lambda w: w.trace_of_multiply(), config.T)
    predicted = complex(predicted)
    return Report(
        "trace_formula", config.to_json(), predicted.real, estimate, stderr,
        _within(estimate, predicted.real, stderr),
        {"imag_estimate": float(np.mean([z.imag for z in values]))},
    )


def verify_diagonal_measures(config: MatrixModelConfig, ks: Sequence[int] = (1, 2, 3),
                             tol: float = 0.05) -> list[Report]:
    """``phi[Delta_k(T)]`` against ``T r_k`` for several ``k`` on shared paths."""
    ks = list(ks)
    for k in ks:
        if not isinstance(k, int) or k < 1:
            raise DomainError(f"k must be a positive integer, got {k!r}")

    def trial(rng):
        totals = np.zeros(len(ks))
        for inc in _increments(config, rng):
            powers = _Powers(inc)
            totals += [powers.trace(k).real for k in ks]
        return totals

    values = np.array(run_trials(config, trial))
    reports = []
    for i, k in enumerate(ks):
        estimate, stderr = _mean_stderr(values[:, i])
        predicted = float(config.T * config.base[k])
        reports.append(Report(f"diagonal_measure_k{k}", config.to_json(), predicted, estimate, stderr,
                              abs(estimate - predicted) < tol,
                              {"tolerance": tol, "per_trial": values[:, i].tolist()}))
    return reports


def verify_diagonal_measure(config: MatrixModelConfig, k: int, tol: float = 0.05) -> Report:
    """``phi[Delta_k(T)]`` against ``T r_k``."""
    return verify_diagonal_measures(config, [k], tol)[0]


def spectrum_ks(config: MatrixModelConfig, tol: float = 0.05) -> Report:
    """Kolmogorov-Smirnov distance between the spectrum of ``X(T)`` and ``mu_T``."""
    law = semigroup_cumulants(config.base, config.T)

    def trial(rng):
        X = np.zeros((config.N, config.N), dtype=complex)
        for inc in _increments(config, rng):
            X += inc
        eig = np.sort(np.linalg.eigvalsh(X))
        F = cdf(law, eig)
        n = eig.size
        upper = np.arange(1, n + 1) / n - F
        lower = F - np.arange(0, n) / n
        return float(max(upper.max(), lower.max()))

    values = run_trials(config, trial)
    estimate, stderr = _mean_stderr(values)
    return Report("spectrum_ks", config.to_json(), 0.0, estimate, stderr, max(values) < tol,
                  {"tolerance": tol, "per_trial": values})


def spectrum(config: MatrixModelConfig, rng: np.random.Generator) -> np.ndarray:
    """Eigenvalues of ``X(T)`` for one path (for CSV dumps)."""
    X = np.zeros((config.N, config.N), dtype=complex)
    for inc in _increments(config, rng):
        X += inc
    return np.linalg.eigvalsh(X)


# ----------------------------------------------------------------------------
# product and functional Itô formulas


class _Powers:
    """Lazily cached powers of one matrix (``ONE``, diagonal or dense)."""

    def __init__(self, M):
        self.M = M
        self._p = {0: ONE, 1: M}

    def __getitem__(self, e: int):
        if e not in self._p:
            half = e // 2
            self._p[e] = mul(self[e - half], self[half])
        return self._p[e]

    def trace(self, e: int) -> complex:
        N = self.M.shape[0]
        if e == 0:
            return 1.0
        if e == 1:
            return trace(self.M, N)
        half = e // 2
        return trace_product(self[e - half], self[half], N)

    def trace_with(self, X, e: int) -> complex:
        """``phi[X M^e]``; for diagonal ``X`` only powers up to ``ceil(e/2)`` are formed."""
        N = self.M.shape[0]
        if X is ONE:
            return self.trace(e)
        if X.ndim == 1 and e >= 2:
            P, Q = self[e - e // 2], self[e // 2]
            if P is ONE or Q is ONE:
                return trace_product(X, self[e], N)
            return (X * np.einsum("ij,ji->i", P, Q)).sum() / N
        return trace_product(X, self[e], N)


def _trace_sharp(u: OperatorTensor, powers: _Powers, e: int) -> complex:
    """``phi[u # D^e] = sum c phi[B A D^e]``."""
    return sum(c * powers.trace_with(mul(B, A), e) for c, (A, B) in u.terms)


def verify_product_formula(config: MatrixModelConfig, i: int, j: int, v: AdaptedBiprocess, u: AdaptedBiprocess,
                           mode: str = "trace", tol: float = 0.05) -> Report:
    """Both sides of the Itô product formula on the same paths.

    With ``N = int V # dDelta_i`` and ``M = int U # dDelta_j`` the discrete
    product splits as ``NM = S_{k<l} + S_{l<k} + S_{k=l}``.  The diagonal
    block is kept raw (``sum (V_k # X_k^i)(U_k # X_k^j)``, an exact identity)
    and contracted (``sum (V_k (x)_2 U_k) # X_k^{i+j}``, the formula).  The
    check passes when the raw identity holds to ``1e-10`` and the contracted
    trace difference is below ``tol`` in every trial.
    """
    if mode not in ("trace", "full"):
        raise ValidationError("mode must be 'trace' or 'full'")
    for idx in (i, j):
        if not isinstance(idx, int) or idx < 1:
            raise DomainError(f"diagonal indices must be positive integers, got {idx!r}")
    _check_same_N(config, v, u)
    dt, N = config.dt, config.N
    full = mode == "full"

    def trial(rng):
        increments = list(_increments(config, rng)) if not (isinstance(v, SimpleBiprocess) and isinstance(u, SimpleBiprocess)) else None
        path = SamplePath(increments, dt) if increments is not None else None
        source = increments if increments is not None else _increments(config, rng)
        n_run = np.zeros((N, N), dtype=complex)
        m_run = np.zeros_like(n_run)
        t_before = t_after = t_raw = t_con = 0j
        s_before = np.zeros_like(n_run) if full else None
        s_after = np.zeros_like(n_run) if full else None
        s_raw = np.zeros_like(n_run) if full else None
        s_con = np.zeros_like(n_run) if full else None
        for k, inc in enumerate(source):
            powers = _Powers(inc)
            vk, uk = _value(v, k, dt, path), _value(u, k, dt, path)
            a = apply_sharp(vk, powers[i])
            b = apply_sharp(uk, powers[j])
            con = otimes2(vk, uk)
            t_before += trace_product(n_run, b, N)
            t_after += trace_product(a, m_run, N)
            t_raw += trace_product(a, b, N)
            t_con += _trace_sharp(con, powers, i + j)
            if full:
                s_before += n_run @ b
                s_after += a @ m_run
                s_raw += a @ b
                s_con += apply_sharp(con, powers[i + j])
            n_run += a
            m_run += b
        out = {
            "lhs": trace_product(n_run, m_run, N),
            "raw": t_before + t_after + t_raw,
            "contracted": t_before + t_after + t_con,
        }
        if full:
            lhs = n_run @ m_run
            out["raw_norm"] = float(np.linalg.norm(lhs - (s_before + s_after + s_raw), 2))
            out["contracted_norm"] = float(np.linalg.norm(lhs - (s_before + s_after + s_con), 2))
            out["scale"] = float(np.linalg.norm(lhs, 2))
        return out

    results = run_trials(config, trial)
    raw_err = [abs(r["lhs"] - r["raw"]) for r in results]
    diffs = [(r["lhs"] - r["contracted"]).real for r in results]
    scale = max(1.0, max(abs(r["lhs"]) for r in results))
    raw_ok = max(raw_err) <= 1e-10 * scale
    details = {
        "i": i, "j": j, "mode": mode, "tolerance": tol,
        "raw_identity_error": max(raw_err),
        "contracted_errors": [abs(d) for d in diffs],
        "median_error": float(np.median(np.abs(diffs))),
        "lhs_trace": [r["lhs"].real for r in results],
    }
    if full:
        details["raw_identity_norm_error"] = max(r["raw_norm"] for r in results)
        details["contracted_norm_error"] = [r["contracted_norm"] for r in results]
        raw_ok = raw_ok and details["raw_identity_norm_error"] <= 1e-10 * max(1.0, max(r["scale"] for r in results))
    estimate, stderr = _mean_stderr(diffs)
    passed = raw_ok and max(abs(d) for d in diffs) < tol
    return Report("product_formula", config.to_json(), 0.0, estimate, stderr, passed, details)


def _functional_terms(p) -> dict:
    poly = as_polynomial(p)
    degree = max(poly, default=0)
    if degree > 6:
        raise DomainError(f"polynomials of degree <= 6 are supported, got degree {degree}")
    out = {}
    for k in range(1, degree + 1):
        tp = partial_k(poly, k) / math.factorial(k)
        if not tp.is_zero():
            out[k] = tp
    return out


def _functional_rhs_trace(terms: dict, u: OperatorTensor, mpow: _Powers, dpow: _Powers, N: int) -> complex:
    # For Z = M^{i0} (x) ... (x) M^{ik} and U = A (x) B terms, the contracted
    # term is prod_l phi[B_l M^{i_l} A_{l+1}] * phi[B_k M^{i_k + i_0} A_1 D^k].
    total = 0j
    middle: dict = {}
    ends: dict = {}
    for k, tp in terms.items():
        for word, coeff in tp:
            for combo in product(u.terms, repeat=k):
                value = float(coeff)
                for c, _ in combo:
                    value *= c
                for l in range(1, k):
                    B, A = combo[l - 1][1][1], combo[l][1][0]
                    key = (id(B), word[l], id(A))
                    if key not in middle:
                        middle[key] = trace_product(mul(B, mpow[word[l]]), A, N)
                    value *= middle[key]
                    if value == 0:
                        break
                if value == 0:
                    continue
                B_last, A_first = combo[-1][1][1], combo[0][1][0]
                key = (id(B_last), word[-1] + word[0], id(A_first), k)
                if key not in ends:
                    X = mul(mul(B_last, mpow[word[-1] + word[0]]), A_first)
                    ends[key] = dpow.trace_with(X, k)
                total += value * ends[key]
    return total


def _functional_rhs_full(terms: dict, u: OperatorTensor, M, dpow: _Powers) -> np.ndarray:
    N = u.N
    total = np.zeros((N, N), dtype=complex)
    for k, tp in terms.items():
        z = from_polynomial(tp, M)
        contracted = phi_contract(sharp_m(z, [u] * k))
        total += apply_sharp(contracted, dpow[k])
    return total


def _poly_trace(poly: dict, powers: _Powers) -> complex:
    return sum(float(c) * powers.trace(e) for e, c in poly.items())


def verify_functional_ito(config: MatrixModelConfig, p, u: AdaptedBiprocess, mode: str = "trace",
                          tol: float = 0.05) -> Report:
    """``p(M(T))`` against the Riemann sums of the functional Itô formula.

    ``M(t) = int_0^t U # dX``.  The right side is
    ``p(0) + sum_j sum_k (1/k!) phi_{k+1}[d^k p(M(t_j)) # m_k(U, ..., U)] # X_j^k``.
    Passes when the trace difference is below ``tol`` in every trial.
    """
    if mode not in ("trace", "full"):
        raise ValidationError("mode must be 'trace' or 'full'")
    _check_same_N(config, u)
    terms = _functional_terms(p)
    poly = as_polynomial(p)
    dt, N = config.dt, config.N
    full = mode == "full"

    def trial(rng):
        increments = None if isinstance(u, SimpleBiprocess) else list(_increments(config, rng))
        path = SamplePath(increments, dt) if increments is not None else None
        source = increments if increments is not None else _increments(config, rng)
        M = np.zeros((N, N), dtype=complex)
        rhs = complex(poly.get(0, 0))
        rhs_full = float(poly.get(0, 0)) * np.eye(N, dtype=complex) if full else None
        for k, inc in enumerate(source):
            uk = _value(u, k, dt, path)
            mpow, dpow = _Powers(M), _Powers(inc)
            rhs += _functional_rhs_trace(terms, uk, mpow, dpow, N)
            if full:
                rhs_full += _functional_rhs_full(terms, uk, M, dpow)
            M = M + apply_sharp(uk, inc)
        lhs = _poly_trace(poly, _Powers(M))
        out = {"lhs": lhs, "rhs": rhs}
        if full:
            lhs_full = sum(float(c) * (np.linalg.matrix_power(M, e) if e else np.eye(N)) for e, c in poly.items())
            out["norm_error"] = float(np.linalg.norm(lhs_full - rhs_full, 2))
        return out

    results = run_trials(config, trial)
    diffs = [(r["lhs"] - r["rhs"]).real for r in results]
    estimate, stderr = _mean_stderr(diffs)
    details = {
        "mode": mode, "tolerance": tol,
        "errors": [abs(d) for d in diffs],
        "median_error": float(np.median(np.abs(diffs))),
        "lhs_trace": [r["lhs"].real for r in results],
    }
    if full:
        details["norm_errors"] = [r["norm_error"] for r in results]
    passed = max(abs(d) for d in diffs) < tol
    return Report("functional_ito", config.to_json(), 0.0, estimate, stderr, passed, details)


def convergence_trend(check: Callable[[MatrixModelConfig], Report], config: MatrixModelConfig,
                      sizes: Sequence[int] = (64, 128, 256, 512),
                      precomputed: Mapping[int, Report] | None = None,
                      trials: Mapping[int, int] | None = None) -> Report:
    """Median contracted error of ``check`` for each ``N``; passes if it decreases strictly.

    ``precomputed`` maps sizes to reports already run with this config, so an
    expensive large-``N`` run need not be repeated.  ``trials`` overrides the
    seed count per size; small sizes are cheap, and a median over few heavy
    tailed errors is noisy.
    """
    precomputed = dict(precomputed or {})
    trials = dict(trials or {})
    medians, reports = [], []
    for n in sizes:
        if n in precomputed:
            rep = precomputed[n]
        else:
            rep = check(config.with_(N=n, trials=trials.get(n, config.trials)))
        reports.append(rep)
        medians.append(rep.details["median_error"])
    decreasing = all(b < a for a, b in zip(medians, medians[1:]))
    return Report(
        f"{reports[0].check}_trend", config.to_json(), 0.0, medians[-1], 0.0, decreasing,
        {"sizes": list(sizes), "median_errors": medians, "all_passed": [r.passed for r in reports],
         "trials": [r.config["trials"] for r in reports]},
    )


# ----------------------------------------------------------------------------
# norm inequalities


def verify_moment_inequality(config: MatrixModelConfig, biprocesses: Sequence[SimpleBiprocess]) -> Report:
    """``|phi[M_1 ... M_n]| <= phi[N_1 ... N_n]`` with ``N_i = int ||V_i(s)|| dX``.

    The right side is exact (noncrossing sum over scalar cumulants).
    """
    n = len(biprocesses)
    if not 1 <= n <= 4:
        raise SizeError(f"between 1 and 4 biprocesses are supported, got {n}")
    _check_same_N(config, *biprocesses)
    config.base.require_nonnegative(n)
    dt, N = config.dt, config.N

    def trial(rng):
        accs = [np.zeros((N, N), dtype=complex) for _ in range(n)]
        for k, inc in enumerate(_increments(config, rng)):
            for acc, v in zip(accs, biprocesses):
                acc += apply_sharp(v.value_at(k * dt), inc)
        prod = accs[0]
        for acc in accs[1:]:
            prod = prod @ acc
        return trace(prod, N)

    values = run_trials(config, trial)
    re, se_re = _mean_stderr([z.real for z in values])
    im, se_im = _mean_stderr([z.imag for z in values])
    estimate = float(abs(complex(re, im)))
    stderr = float(np.hypot(se_re, se_im))
    norms = [v.norm_function() for v in biprocesses]
    predicted = float(mixed_moment(norms, config.base))
    return Report("moment_inequality", config.to_json(), predicted, estimate, stderr,
                  estimate <= predicted + 3 * stderr + ROUNDOFF * max(1.0, predicted),
                  {"slack": predicted - estimate})


def verify_contraction(config: MatrixModelConfig, f: StepFunction, n: int, rtol: float = 0.02) -> Report:
    """``phi[(int f dX)^n]^(1/n)`` against ``||f||_{n,mu}`` (equal for scalar integrands).

    Passes within three standard errors plus a relative finite-``N``
    allowance ``rtol``.
    """
    predicted = mu_norm(f, config.base, n)
    dt = config.dt

    def trial(rng):
        M = np.zeros((config.N, config.N), dtype=complex)
        for k, inc in enumerate(_increments(config, rng)):
            value = float(f.value_at(k * dt))
            if value:
                M += value * inc
        return _Powers(M).trace(n).real

    values = run_trials(config, trial)
    mean, se = _mean_stderr(values)
    estimate = max(mean, 0.0) ** (1.0 / n)
    stderr = se / (n * estimate ** (n - 1)) if estimate > 0 else se
    return Report("contraction", config.to_json(), predicted, estimate, stderr,
                  _within(estimate, predicted, stderr, atol=rtol * predicted), {"n": n, "rtol": rtol})
