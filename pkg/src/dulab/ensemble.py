"""Seeded Monte Carlo experiments over Haar ensembles and perturbation
families: operator-state fidelities, purity moments, and the joint scan of
the entanglement deficit against the dual-unitarity defect.

Reproducibility: every experiment is a pure function of its parameters and
the master seed.  Per-sample generators come from the splittable
SeedSequence spawn of the master seed (one child per sample index), so the
sample stream is identical no matter how samples would be scheduled, and
aggregation uses numpy's pairwise summation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .circuit import four_party_report
from .gates import Gate, choi_defect, haar_unitary, nearest_dual_q2
from .qinfo import bell_state, kron_states

#: values whose magnitude is below this are rounding noise and reported as 0
NOISE_FLOOR = 1e-12


@dataclass(frozen=True)
class EnsembleStats:
    """Mean and standard error of one seeded Monte Carlo experiment."""

    n_samples: int
    mean: float
    standard_error: float
    master_seed: int
    values: tuple | None = None

    def to_json_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "mean": self.mean,
            "standard_error": self.standard_error,
            "seed": self.master_seed,
        }


def sample_rngs(master_seed: int, n: int):
    """One independent generator per sample, split from the master seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(master_seed).spawn(n)]


def _stats(values: np.ndarray, master_seed: int, keep_values: bool) -> EnsembleStats:
    values = np.asarray(values, dtype=float)
    n = values.size
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EnsembleStats(
        n_samples=n,
        mean=float(values.mean()),
        standard_error=se,
        master_seed=master_seed,
        values=tuple(values) if keep_values else None,
    )


def _choi_eigs(u: np.ndarray, q: int) -> np.ndarray:
    """Eigenvalues of the 4-qudit output state for a raw unitary.

    In-loop fast path: numerically identical to
    ``choi_output_state(Gate(q, u)).eigenvalues()`` without the wrapper
    validation cost (equality is unit-tested).
    """
    t = u.reshape(q, q, q, q).transpose(2, 0, 1, 3).reshape(q * q, q * q) / q
    return np.clip(np.linalg.eigvalsh(t @ t.conj().T), 0.0, None)


def haar_choi_fidelity(q: int, n_samples: int, seed: int, keep_values: bool = False) -> EnsembleStats:
    """Mean F(rho_AB', I/q^2) over Haar gates.

    Uses the pure-vs-identity shortcut F(rho, I/d) = tr(sqrt(rho))/sqrt(d)
    (the general fidelity routine agrees; see the cross-check tests).
    """
    vals = np.empty(n_samples)
    for k, rng in enumerate(sample_rngs(seed, n_samples)):
        ev = _choi_eigs(haar_unitary(q * q, rng), q)
        vals[k] = np.sqrt(ev).sum() / q
    return _stats(vals, seed, keep_values)


def catalan_number(n: int) -> int:
    return math.factorial(2 * n) // (math.factorial(n) * math.factorial(n + 1))


def haar_purity_moments(
    q: int, ns, n_samples: int, seed: int, keep_values: bool = False
) -> dict:
    """Means of tr(rho_AB'^n) for several n from one Haar sample stream.

    The stream depends only on (seed, sample index), so each entry equals
    the corresponding single-n experiment run with the same seed.
    """
    ns = tuple(int(n) for n in ns)
    for n in ns:
        if n not in (2, 3, 4):
            raise ValueError(f"moment order must be 2, 3 or 4, got {n}")
    vals = {n: np.empty(n_samples) for n in ns}
    for k, rng in enumerate(sample_rngs(seed, n_samples)):
        ev = _choi_eigs(haar_unitary(q * q, rng), q)
        for n in ns:
            vals[n][k] = (ev ** n).sum()
    return {n: _stats(vals[n], seed, keep_values) for n in ns}


def haar_purity_moment(
    q: int, n: int, n_samples: int, seed: int, keep_values: bool = False
) -> EnsembleStats:
    """Mean tr(rho_AB'^n) over Haar gates; compare with C_n / q^{2(n-1)}."""
    return haar_purity_moments(q, (n,), n_samples, seed, keep_values)[n]


def purity_moment_target(q: int, n: int) -> float:
    """Leading Haar average C_n / q^{2(n-1)}."""
    return catalan_number(n) / q ** (2 * (n - 1))


def haar_state_fidelity(q: int, n_samples: int, seed: int, keep_values: bool = False) -> EnsembleStats:
    """Mean F(rho_A, I/q) over Haar two-qudit pure states."""
    vals = np.empty(n_samples)
    for k, rng in enumerate(sample_rngs(seed, n_samples)):
        v = rng.standard_normal(q * q) + 1j * rng.standard_normal(q * q)
        v /= np.linalg.norm(v)
        sv = np.linalg.svd(v.reshape(q, q), compute_uv=False)
        vals[k] = sv.sum() / math.sqrt(q)
    return _stats(vals, seed, keep_values)


# ---------------------------------------------------------------------------
# entanglement deficit vs dual-unitarity defect
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpsDeltaPoint:
    """One point of the perturbation scan u(theta) = base exp(-i theta H)."""

    theta: float
    epsilon: float
    delta: float
    dist_to_projection: float | None

    @property
    def delta_unnormalized(self) -> float:
        """The q^2 * delta convention used by the snap certificate (q = 2)."""
        return 4.0 * self.delta if self.dist_to_projection is not None else float("nan")


def random_hermitian_direction(d: int, seed) -> np.ndarray:
    """Random Hermitian matrix normalized to unit spectral norm."""
    rng = np.random.default_rng(seed)
    h = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = (h + h.conj().T) / 2
    return h / np.linalg.norm(h, 2)


def _floor(x: float) -> float:
    return 0.0 if abs(x) < NOISE_FLOOR else float(x)


def eps_delta_scan(
    base: Gate,
    thetas,
    seed: int | None = None,
    direction: np.ndarray | None = None,
    with_projection: bool | None = None,
) -> list:
    """Scan u(theta) = base exp(-i theta H) along a Hermitian direction H.

    For each theta: epsilon from the four-party Bell (x) Bell experiment,
    delta = the choi-normalized dual defect, and at q = 2 the distance to
    the snapped dual gate.  ``direction`` defaults to a random unit-norm
    Hermitian drawn from ``seed``.  Values below the 1e-12 noise floor are
    reported as exact zeros (and excluded from any log-log regression).
    """
    q = base.q
    if choi_defect(base) > 1e-10:
        raise ValueError("base gate must be dual unitary")
    if direction is None:
        if seed is None:
            raise ValueError("need a seed when no direction is supplied")
        direction = random_hermitian_direction(q * q, seed)
    h = np.asarray(direction, dtype=complex)
    h = (h + h.conj().T) / 2
    nrm = np.linalg.norm(h, 2)
    if abs(nrm - 1.0) > 1e-9:
        h = h / nrm
    if with_projection is None:
        with_projection = q == 2
    state = kron_states(bell_state(q), bell_state(q))
    points = []
    for theta in thetas:
        theta = float(theta)
        u = Gate(q, base.matrix @ scipy.linalg.expm(-1j * theta * h))
        rep = four_party_report(u, state)
        dist = None
        if with_projection:
            _, dist = nearest_dual_q2(u)
            dist = _floor(dist)
        points.append(
            EpsDeltaPoint(
                theta=theta,
                epsilon=_floor(rep.epsilon),
                delta=_floor(choi_defect(u)),
                dist_to_projection=dist,
            )
        )
    return points


def loglog_slope(points) -> tuple[float, float]:
    """Least-squares slope and intercept of log(delta) against log(epsilon),
    skipping floored-to-zero points."""
    xs = np.array([p.epsilon for p in points])
    ys = np.array([p.delta for p in points])
    mask = (xs > 0) & (ys > 0)
    if mask.sum() < 3:
        raise ValueError("need at least 3 nonzero points for a slope")
    slope, intercept = np.polyfit(np.log(xs[mask]), np.log(ys[mask]), 1)
    return float(slope), float(intercept)


def sqrt_law_constant(points) -> float:
    """Largest delta / sqrt(epsilon) over nonzero points: the empirical C in
    delta <= C sqrt(epsilon).  Recorded for the log only; no reference value
    exists to assert against."""
    vals = [p.delta / math.sqrt(p.epsilon) for p in points if p.epsilon > 0 and p.delta > 0]
    return max(vals) if vals else 0.0
