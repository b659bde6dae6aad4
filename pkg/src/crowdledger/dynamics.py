"""Vote-stream dynamics: entropy, Lyapunov exponents, equilibrium decision.

Two Lyapunov estimators are provided.  ``lyapunov_from_jacobians`` propagates
a tangent basis along a known dynamical system and accumulates QR growth
factors (Benettin-style), which gives the per-step log growth rates the
stability test needs.  ``lyapunov_from_series`` is the data-driven largest
exponent estimate used on observed vote streams, where no Jacobian exists.

A story's voting is declared settled-ready ("equilibrium") when all exponents
are negative, the up/down entropy is below a threshold and enough votes have
accumulated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

DIVERGENCE_EPS = 1e-12  # guard for zero increments in the series estimator
QR_INTERVAL = 10  # tangent-basis re-orthonormalization cadence
MAX_STATE_DIM = 8


class DynamicsError(Exception):
    pass


class EmptyCountsError(DynamicsError):
    pass


class TooShortError(DynamicsError):
    pass


class BadHorizonError(DynamicsError):
    pass


class NumericalOverflowError(DynamicsError):
    pass


class LyapunovMethod(Enum):
    JACOBIAN_PRODUCT = "jacobian_product"
    SERIES_DIVERGENCE = "series_divergence"


@dataclass(frozen=True)
class LyapunovEstimate:
    exponents: tuple[float, ...]  # nats per step, descending
    method: LyapunovMethod

    def all_negative(self) -> bool:
        return all(lam < 0.0 for lam in self.exponents)


@dataclass(frozen=True)
class EquilibriumParams:
    tau: float = 0.9  # entropy threshold, bits
    c_min: int = 10  # minimum vote count

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        if self.c_min < 1:
            raise ValueError(f"c_min must be >= 1, got {self.c_min}")


@dataclass
class VoteSeries:
    """Ordered +-1 votes with their running mean."""

    values: list[int] = field(default_factory=list)

    def append(self, value: int) -> None:
        if value not in (-1, 1):
            raise ValueError(f"vote must be -1 or +1, got {value}")
        self.values.append(value)

    def __len__(self) -> int:
        return len(self.values)

    def running_mean(self) -> np.ndarray:
        v = np.asarray(self.values, dtype=np.float64)
        return np.cumsum(v) / np.arange(1, len(v) + 1)

    def direction_counts(self) -> dict[str, int]:
        up = sum(1 for v in self.values if v == 1)
        return {"up": up, "down": len(self.values) - up}


@dataclass(frozen=True)
class DynamicalSystem:
    """Discrete-time system x_{t+dt} = step(x_t, t) with a known Jacobian.

    ``jacobian_kind`` declares what ``jacobian`` returns: "map" means the
    derivative of the one-step map itself (the tangent propagator); "field"
    means the derivative of the increment field F with x_{t+dt} = x_t +
    F(x_t, t) dt, in which case the propagator is I + J dt.
    """

    state_dim: int
    step_fn: Callable[[np.ndarray, float], np.ndarray]
    jacobian: Callable[[np.ndarray, float], np.ndarray]
    dt: float = 1.0
    jacobian_kind: str = "map"

    def __post_init__(self):
        if not 1 <= self.state_dim <= MAX_STATE_DIM:
            raise ValueError(f"state_dim must be in [1, {MAX_STATE_DIM}]")
        if self.jacobian_kind not in ("map", "field"):
            raise ValueError(f"jacobian_kind must be 'map' or 'field', got {self.jacobian_kind!r}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


def shannon_entropy(counts: Mapping) -> float:
    """Entropy in bits of the empirical distribution given by ``counts``.

    Zero-count categories contribute nothing; the total must be positive.
    """
    values = [int(c) for c in counts.values()]
    if any(c < 0 for c in values):
        raise ValueError("counts must be non-negative")
    total = sum(values)
    if total == 0:
        raise EmptyCountsError("entropy of an empty count map is undefined")
    h = 0.0
    for c in values:
        if c > 0:
            p = c / total
            h -= p * math.log2(p)
    return h


def gram_schmidt_qr(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Modified Gram-Schmidt QR with a non-negative diagonal of R.

    Small and dependency-free so the growth-factor accumulation is fully
    specified; dimensions here never exceed MAX_STATE_DIM.
    """
    a = np.array(m, dtype=np.float64)
    d = a.shape[0]
    q = np.zeros_like(a)
    r = np.zeros_like(a)
    for j in range(d):
        v = a[:, j].copy()
        for i in range(j):
            r[i, j] = q[:, i] @ v
            v -= r[i, j] * q[:, i]
        norm = float(np.linalg.norm(v))
        r[j, j] = norm
        if norm > 0.0:
            q[:, j] = v / norm
        else:
            # degenerate column: complete with an arbitrary orthonormal direction
            basis = np.zeros(d)
            for k in range(d):
                basis[:] = 0.0
                basis[k] = 1.0
                for i in range(j):
                    basis -= (q[:, i] @ basis) * q[:, i]
                bn = float(np.linalg.norm(basis))
                if bn > 1e-10:
                    q[:, j] = basis / bn
                    break
    return q, r


def qr_eigenvalues(m: np.ndarray, sweeps: int = 50, tol: float = 1e-12) -> np.ndarray:
    """Eigenvalues of a small matrix by unshifted QR iteration.

    Converges to (quasi-)triangular form; complex-conjugate pairs are read
    off 2x2 diagonal blocks.  Returns complex values sorted by descending
    magnitude.  Unshifted iteration separates eigenvalues at a rate set by
    their modulus ratios, so clusters of (near-)equal modulus beyond a
    conjugate pair may not resolve within the sweep budget.
    """
    a = np.array(m, dtype=np.float64)
    d = a.shape[0]
    if a.shape != (d, d) or d > MAX_STATE_DIM:
        raise ValueError(f"expected a square matrix of dim <= {MAX_STATE_DIM}")
    scale = max(float(np.max(np.abs(a))), 1.0)
    for _ in range(sweeps):
        q, r = gram_schmidt_qr(a)
        nxt = r @ q
        if np.max(np.abs(np.tril(nxt, -1))) < tol * scale:
            a = nxt
            break
        a = nxt
    block_tol = max(tol, 1e-8) * scale
    eigs: list[complex] = []
    i = 0
    while i < d:
        if i + 1 < d and abs(a[i + 1, i]) > block_tol:
            # 2x2 block: eigenvalues of [[a,b],[c,e]]
            tr = a[i, i] + a[i + 1, i + 1]
            det = a[i, i] * a[i + 1, i + 1] - a[i, i + 1] * a[i + 1, i]
            disc = tr * tr / 4.0 - det
            if disc >= 0:
                root = math.sqrt(disc)
                eigs.extend([tr / 2.0 + root, tr / 2.0 - root])
            else:
                root = math.sqrt(-disc)
                eigs.extend([complex(tr / 2.0, root), complex(tr / 2.0, -root)])
            i += 2
        else:
            eigs.append(complex(a[i, i]))
            i += 1
    return np.array(sorted(eigs, key=lambda z: -abs(z)))


def _propagator(system: DynamicalSystem, x: np.ndarray, t: float) -> np.ndarray:
    jac = np.atleast_2d(np.asarray(system.jacobian(x, t), dtype=np.float64))
    if jac.shape != (system.state_dim, system.state_dim):
        raise ValueError(f"jacobian shape {jac.shape} != ({system.state_dim}, {system.state_dim})")
    if system.jacobian_kind == "map":
        return jac
    return np.eye(system.state_dim) + jac * system.dt


def lyapunov_from_jacobians(
    system: DynamicalSystem,
    x0,
    t0: float,
    t1: float,
    qr_interval: int = QR_INTERVAL,
) -> LyapunovEstimate:
    """Full Lyapunov spectrum by tangent-basis propagation with periodic QR.

    The tangent basis starts at the identity and is advanced by the one-step
    propagator; every ``qr_interval`` steps it is re-orthonormalized and the
    log of each diagonal growth factor is accumulated.  Exponents are the
    accumulated logs divided by (t1 - t0): negative means perturbations
    shrink (stable), positive means they grow (chaotic).
    """
    if t1 <= t0:
        raise BadHorizonError(f"t1 ({t1}) must exceed t0 ({t0})")
    d = system.state_dim
    x = np.atleast_1d(np.asarray(x0, dtype=np.float64)).copy()
    if x.shape != (d,):
        raise ValueError(f"x0 shape {x.shape} != ({d},)")
    v = np.eye(d)
    acc = np.zeros(d)
    n_steps = int(round((t1 - t0) / system.dt))
    t = t0
    since_qr = 0
    for _ in range(n_steps):
        v = _propagator(system, x, t) @ v
        x = np.atleast_1d(np.asarray(system.step_fn(x, t), dtype=np.float64))
        t += system.dt
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(v)):
            raise NumericalOverflowError("trajectory or tangent basis diverged")
        since_qr += 1
        if since_qr == qr_interval:
            q, r = gram_schmidt_qr(v)
            diag = np.abs(np.diag(r))
            acc += np.log(np.maximum(diag, 1e-300))
            v = q
            since_qr = 0
    if since_qr:
        q, r = gram_schmidt_qr(v)
        acc += np.log(np.maximum(np.abs(np.diag(r)), 1e-300))
    exponents = tuple(sorted((acc / (t1 - t0)).tolist(), reverse=True))
    return LyapunovEstimate(exponents, LyapunovMethod.JACOBIAN_PRODUCT)


def raw_tangent_eigenvalues(
    system: DynamicalSystem, x0, t0: float, t1: float
) -> np.ndarray:
    """Eigenvalues of the bare accumulated tangent matrix, no renormalization.

    Kept for comparison with the QR-accumulated exponents; useful only over
    short, well-conditioned horizons since the product matrix under- or
    overflows exponentially fast.
    """
    if t1 <= t0:
        raise BadHorizonError(f"t1 ({t1}) must exceed t0 ({t0})")
    d = system.state_dim
    x = np.atleast_1d(np.asarray(x0, dtype=np.float64)).copy()
    v = np.eye(d)
    n_steps = int(round((t1 - t0) / system.dt))
    t = t0
    for _ in range(n_steps):
        v = _propagator(system, x, t) @ v
        x = np.atleast_1d(np.asarray(system.step_fn(x, t), dtype=np.float64))
        t += system.dt
        if not np.all(np.isfinite(v)):
            raise NumericalOverflowError("tangent matrix overflowed; use the QR variant")
    return qr_eigenvalues(v)


def lyapunov_from_series(series: VoteSeries | Sequence[int]) -> LyapunovEstimate:
    """Largest-exponent estimate from an observed vote stream.

    Works on the running mean s_t of the votes: with increments
    d_t = s_{t+1} - s_t, the estimate is the mean of log(|d_{t+1}| / |d_t|),
    zero increments replaced by a small epsilon.  A settled stream has
    shrinking increments (negative estimate); a reversal makes them grow.
    """
    values = series.values if isinstance(series, VoteSeries) else list(series)
    if len(values) < 4:
        raise TooShortError(f"need at least 4 votes, got {len(values)}")
    s = np.cumsum(np.asarray(values, dtype=np.float64)) / np.arange(1, len(values) + 1)
    deltas = np.abs(np.diff(s))
    deltas = np.where(deltas == 0.0, DIVERGENCE_EPS, deltas)
    lam = float(np.mean(np.log(deltas[1:] / deltas[:-1])))
    return LyapunovEstimate((lam,), LyapunovMethod.SERIES_DIVERGENCE)


def equilibrium(
    estimate: LyapunovEstimate, entropy_bits: float, params: EquilibriumParams, count: int
) -> bool:
    """Stop-voting decision: stable exponents, low entropy, enough votes."""
    if entropy_bits < 0:
        raise ValueError("entropy must be non-negative")
    if count < 0:
        raise ValueError("count must be non-negative")
    return estimate.all_negative() and entropy_bits < params.tau and count >= params.c_min
