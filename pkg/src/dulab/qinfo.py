"""Quantum states, entropies, divergences and purification tools.

Every quantity in this package is ultimately measured through the functions
here.  Conventions, fixed once:

* entropies and divergences are in nats (natural log);
* subsystems are an explicit ordered ``dims`` list, position-indexed from 0,
  with subsystem 0 the slowest (most significant) index of the flat vector,
  i.e. ``kron(a, b)`` puts ``a`` at position 0;
* ``trace_norm_distance`` returns the full 1-norm ``||rho - sigma||_1``; the
  halved convention is ``trace_distance``;
* fidelity is the square-root (Uhlmann) convention
  ``F = tr sqrt(sqrt(rho) sigma sqrt(rho))``, so ``F in [0, 1]`` and a pure
  state gives ``sqrt(<psi|sigma|psi>)``;
* an infinite relative entropy is the explicit ``math.inf`` sentinel.

All functions are pure and all values are immutable after construction, so
they are safe to share across threads without locking.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

#: eigenvalues of a density matrix in [EIG_CLAMP, 0) are rounding noise and
#: treated as 0; anything more negative is an invalid state.
EIG_CLAMP = -1e-10
HERM_TOL = 1e-12
TRACE_TOL = 1e-12
NORM_TOL = 1e-12
#: sigma eigenvalues below this count as outside the support.
SUPPORT_TOL = 1e-12
#: rho weight on sigma's null space above this triggers the +inf sentinel.
OVERLAP_TOL = 1e-10

INF = math.inf


def _as_complex(a) -> np.ndarray:
    out = np.array(a, dtype=complex, copy=True)
    out.setflags(write=False)
    return out


def _dims_tuple(dims) -> tuple:
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise ValueError(f"subsystem dimensions must be positive, got {dims}")
    return dims


@dataclass(frozen=True)
class Bipartition:
    """A sorted set of subsystem positions; the complement is implied."""

    keep: tuple

    def __init__(self, keep: Iterable[int]):
        keep = tuple(sorted(int(k) for k in keep))
        if len(set(keep)) != len(keep):
            raise ValueError(f"duplicate subsystem indices in {keep}")
        object.__setattr__(self, "keep", keep)

    @staticmethod
    def of(x: Union["Bipartition", Iterable[int]]) -> "Bipartition":
        return x if isinstance(x, Bipartition) else Bipartition(x)

    def validate(self, n_subsystems: int) -> None:
        if any(k < 0 or k >= n_subsystems for k in self.keep):
            raise ValueError(
                f"subsystem indices {self.keep} out of range for {n_subsystems} subsystems"
            )

    def complement(self, n_subsystems: int) -> tuple:
        self.validate(n_subsystems)
        return tuple(i for i in range(n_subsystems) if i not in self.keep)


@dataclass(frozen=True, eq=False)
class PureState:
    """State vector over an ordered list of subsystem dimensions."""

    amplitudes: np.ndarray
    dims: tuple

    def __init__(self, amplitudes, dims: Sequence[int]):
        amplitudes = _as_complex(np.asarray(amplitudes).reshape(-1))
        dims = _dims_tuple(dims)
        if int(np.prod(dims)) != amplitudes.size:
            raise ValueError(
                f"product of dims {dims} is {int(np.prod(dims))}, "
                f"but the vector has length {amplitudes.size}"
            )
        norm = float(np.linalg.norm(amplitudes))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"state not normalized: |psi| = {norm}")
        if abs(norm - 1.0) > NORM_TOL:
            amplitudes = _as_complex(amplitudes / norm)
        object.__setattr__(self, "amplitudes", amplitudes)
        object.__setattr__(self, "dims", dims)

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def density(self) -> "DensityMatrix":
        v = self.amplitudes
        return DensityMatrix(np.outer(v, v.conj()), self.dims)

    def overlap(self, other: "PureState") -> complex:
        if self.dims != other.dims:
            raise ValueError(f"dims mismatch: {self.dims} vs {other.dims}")
        return complex(np.vdot(other.amplitudes, self.amplitudes))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, PSD (within tolerance) operator over dims."""

    matrix: np.ndarray
    dims: tuple

    def __init__(self, matrix, dims: Sequence[int], validate: bool = True):
        matrix = _as_complex(np.asarray(matrix))
        dims = _dims_tuple(dims)
        d = int(np.prod(dims))
        if matrix.shape != (d, d):
            raise ValueError(f"matrix shape {matrix.shape} != ({d}, {d}) from dims {dims}")
        if validate:
            herm = float(np.abs(matrix - matrix.conj().T).max())
            if herm > HERM_TOL:
                raise ValueError(f"matrix not Hermitian: max deviation {herm}")
            tr = complex(np.trace(matrix))
            if abs(tr - 1.0) > TRACE_TOL:
                raise ValueError(f"trace is {tr}, not 1")
            lo = float(np.linalg.eigvalsh(matrix)[0])
            if lo < EIG_CLAMP:
                raise ValueError(f"smallest eigenvalue {lo} below {EIG_CLAMP}")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "dims", dims)

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def maximally_mixed(dims: Sequence[int]) -> DensityMatrix:
    d = int(np.prod(tuple(dims)))
    return DensityMatrix(np.eye(d) / d, dims, validate=False)


def bell_state(q: int) -> PureState:
    """(1/sqrt q) sum_i |ii> on two q-dimensional subsystems."""
    v = np.eye(q, dtype=complex).reshape(-1) / math.sqrt(q)
    return PureState(v, (q, q))


def kron_states(*states: PureState) -> PureState:
    v = np.array([1.0 + 0j])
    dims: tuple = ()
    for s in states:
        v = np.kron(v, s.amplitudes)
        dims = dims + s.dims
    return PureState(v, dims)


# ---------------------------------------------------------------------------
# partial trace, subsystem permutation, local operators
# ---------------------------------------------------------------------------

def reduce(state: Union[PureState, DensityMatrix], keep) -> DensityMatrix:
    """Partial trace over the complement of ``keep``."""
    keep = Bipartition.of(keep)
    keep.validate(state.n_subsystems)
    comp = keep.complement(state.n_subsystems)
    kept_dims = tuple(state.dims[k] for k in keep.keep)
    dk = int(np.prod(kept_dims)) if kept_dims else 1
    if isinstance(state, PureState):
        t = state.tensor().transpose(keep.keep + comp).reshape(dk, -1)
        rho = t @ t.conj().T
    else:
        n = state.n_subsystems
        t = state.matrix.reshape(state.dims + state.dims)
        perm = keep.keep + comp + tuple(n + k for k in keep.keep) + tuple(n + c for c in comp)
        dc = int(np.prod([state.dims[c] for c in comp])) if comp else 1
        t = t.transpose(perm).reshape(dk, dc, dk, dc)
        rho = np.einsum("abcb->ac", t)
    return DensityMatrix(rho, kept_dims, validate=False)


def permute_subsystems(state: Union[PureState, DensityMatrix], order: Sequence[int]):
    """Reorder subsystems so that new position i holds old subsystem order[i]."""
    order = tuple(int(i) for i in order)
    if sorted(order) != list(range(state.n_subsystems)):
        raise ValueError(f"{order} is not a permutation of {state.n_subsystems} subsystems")
    new_dims = tuple(state.dims[i] for i in order)
    if isinstance(state, PureState):
        v = state.tensor().transpose(order).reshape(-1)
        return PureState(v, new_dims)
    n = state.n_subsystems
    t = state.matrix.reshape(state.dims + state.dims)
    t = t.transpose(order + tuple(n + i for i in order))
    d = int(np.prod(new_dims))
    return DensityMatrix(t.reshape(d, d), new_dims, validate=False)


def apply_unitary(state: PureState, u: np.ndarray, positions: Sequence[int]) -> PureState:
    """Apply u to the listed subsystems (in the given order) of a pure state."""
    positions = tuple(int(p) for p in positions)
    n = state.n_subsystems
    if len(set(positions)) != len(positions) or any(p < 0 or p >= n for p in positions):
        raise ValueError(f"bad positions {positions} for {n} subsystems")
    d_op = int(np.prod([state.dims[p] for p in positions]))
    u = np.asarray(u, dtype=complex)
    if u.shape != (d_op, d_op):
        raise ValueError(f"operator shape {u.shape} does not match subsystem dims {d_op}")
    rest = tuple(i for i in range(n) if i not in positions)
    t = state.tensor().transpose(positions + rest).reshape(d_op, -1)
    t = u @ t
    inv = np.argsort(positions + rest)
    dims_perm = tuple(state.dims[p] for p in positions + rest)
    v = t.reshape(dims_perm).transpose(inv).reshape(-1)
    return PureState(v, state.dims)


# ---------------------------------------------------------------------------
# entropies
# ---------------------------------------------------------------------------

def _clamped_probs(eigs: np.ndarray) -> np.ndarray:
    lo = float(eigs.min()) if eigs.size else 0.0
    if lo < EIG_CLAMP:
        raise ValueError(f"eigenvalue {lo} below clamping window {EIG_CLAMP}")
    return np.clip(eigs, 0.0, None)


def entropy_from_probs(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum()) if p.size else 0.0


def entropy_vn(rho: DensityMatrix) -> float:
    """Von Neumann entropy -tr(rho ln rho), in nats; 0 ln 0 := 0."""
    return entropy_from_probs(_clamped_probs(rho.eigenvalues()))


def conditional_entropy(rho: DensityMatrix, cond) -> float:
    """S(X|Y) = S(XY) - S(Y) with Y = ``cond`` and X its complement."""
    cond = Bipartition.of(cond)
    cond.validate(rho.n_subsystems)
    return entropy_vn(rho) - entropy_vn(reduce(rho, cond))


def mutual_information(rho: DensityMatrix, split) -> float:
    """I(X;Y) = S(X) + S(Y) - S(XY) with X = ``split`` and Y its complement."""
    split = Bipartition.of(split)
    comp = split.complement(rho.n_subsystems)
    return entropy_vn(reduce(rho, split)) + entropy_vn(reduce(rho, comp)) - entropy_vn(rho)


# ---------------------------------------------------------------------------
# distances and divergences
# ---------------------------------------------------------------------------

def trace_norm(a: np.ndarray) -> float:
    """Nuclear norm ||a||_1 (sum of singular values) of a general matrix."""
    a = np.asarray(a)
    if not a.size:
        return 0.0
    return float(np.linalg.svd(a, compute_uv=False).sum())


def _check_same_dims(rho: DensityMatrix, sigma: DensityMatrix) -> None:
    if rho.dims != sigma.dims:
        raise ValueError(f"dims mismatch: {rho.dims} vs {sigma.dims}")


def trace_norm_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """||rho - sigma||_1 = sum of |eigenvalues| of the (Hermitian) difference."""
    _check_same_dims(rho, sigma)
    return float(np.abs(np.linalg.eigvalsh(rho.matrix - sigma.matrix)).sum())


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Halved convention D_tr = ||rho - sigma||_1 / 2."""
    return 0.5 * trace_norm_distance(rho, sigma)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity tr sqrt(sqrt(rho) sigma sqrt(rho)), in [0, 1].

    Evaluated as the nuclear norm ||sqrt(rho) sqrt(sigma)||_1, which is the
    same quantity without the sqrt amplification of eigenvalue noise near
    zero (keeps the result symmetric in its arguments to ~1e-12).
    """
    _check_same_dims(rho, sigma)
    _clamped_probs(rho.eigenvalues())
    _clamped_probs(sigma.eigenvalues())
    s = np.linalg.svd(_psd_sqrt(rho.matrix) @ _psd_sqrt(sigma.matrix), compute_uv=False)
    return float(min(1.0, s.sum()))


def relative_entropy(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """tr rho (ln rho - ln sigma), or the +inf sentinel outside sigma's support."""
    _check_same_dims(rho, sigma)
    s, v = np.linalg.eigh(sigma.matrix)
    outside = s < SUPPORT_TOL
    if outside.any():
        weight = float(
            np.einsum("ij,jk,ki->", v[:, outside].conj().T, rho.matrix, v[:, outside]).real
        )
        if weight > OVERLAP_TOL:
            return INF
    p = _clamped_probs(rho.eigenvalues())
    tr_rho_ln_rho = -entropy_from_probs(p)
    supp = ~outside
    diag = np.einsum("ij,jk,ki->i", v[:, supp].conj().T, rho.matrix, v[:, supp]).real
    diag = np.clip(diag, 0.0, None)
    tr_rho_ln_sigma = float((diag * np.log(s[supp])).sum())
    return tr_rho_ln_rho - tr_rho_ln_sigma


def sandwiched_renyi(rho: DensityMatrix, sigma: DensityMatrix, alpha: float) -> float:
    """Sandwiched Renyi divergence of order alpha.

    (1/(alpha-1)) ln tr[(sigma^((1-alpha)/2 alpha) rho sigma^(...))^alpha];
    equals -2 ln F at alpha = 1/2 and is nondecreasing in alpha.  Powers of
    sigma are taken on its support; weight of rho outside that support gives
    the +inf sentinel when alpha > 1.
    """
    if alpha <= 0 or alpha == 1.0:
        raise ValueError(f"alpha must be in (0,1) or (1,inf), got {alpha}")
    _check_same_dims(rho, sigma)
    s, v = np.linalg.eigh(sigma.matrix)
    supp = s >= SUPPORT_TOL
    if not supp.all():
        weight = float(
            np.einsum("ij,jk,ki->", v[:, ~supp].conj().T, rho.matrix, v[:, ~supp]).real
        )
        if alpha > 1 and weight > OVERLAP_TOL:
            return INF
    e = (1.0 - alpha) / (2.0 * alpha)
    vs = v[:, supp]
    sigma_e = (vs * (s[supp] ** e)) @ vs.conj().T
    inner = sigma_e @ rho.matrix @ sigma_e
    ev = np.clip(np.linalg.eigvalsh((inner + inner.conj().T) / 2), 0.0, None)
    # eigenvalues at relative rounding noise are outside the numerical
    # support; alpha < 1 would otherwise blow them up as ev**alpha
    cut = 1e-14 * max(1.0, float(ev.max(initial=0.0)))
    ev = ev[ev > cut]
    tr = float((ev ** alpha).sum())
    if tr <= 0.0:
        return INF
    return math.log(tr) / (alpha - 1.0)


# ---------------------------------------------------------------------------
# purification and Uhlmann alignment
# ---------------------------------------------------------------------------

def purify(rho: DensityMatrix, ancilla_dim: int | None = None) -> PureState:
    """Purification of rho with the ancilla appended as the last subsystem.

    Default ancilla dimension is the rank of rho.  A larger ``ancilla_dim``
    pads with zero amplitudes; a smaller one keeps the largest eigenvectors
    and renormalizes (a best-effort purification whose marginal is the
    truncated state).
    """
    w, v = np.linalg.eigh(rho.matrix)
    w = _clamped_probs(w)[::-1]
    v = v[:, ::-1]
    rank = max(1, int((w > 1e-12).sum()))
    k = rank if ancilla_dim is None else int(ancilla_dim)
    if k < 1:
        raise ValueError("ancilla_dim must be >= 1")
    m = min(k, rank)
    amp = np.zeros((rho.matrix.shape[0], k), dtype=complex)
    amp[:, :m] = v[:, :m] * np.sqrt(w[:m])
    vec = amp.reshape(-1)
    vec = vec / np.linalg.norm(vec)
    return PureState(vec, rho.dims + (k,))


def uhlmann_align(psi: PureState, phi: PureState, ancilla) -> tuple[np.ndarray, float]:
    """Unitary W on the ancilla factors maximizing |<phi|(I (x) W)|psi>|.

    psi and phi must carry the same system dims and equal total ancilla
    dimension.  W is built from the SVD of the cross-Gram matrix of the two
    purifications, and the achieved overlap equals the fidelity of the two
    reduced system states.
    """
    ancilla = Bipartition.of(ancilla)
    ancilla.validate(psi.n_subsystems)
    if psi.n_subsystems != phi.n_subsystems:
        raise ValueError("states have different numbers of subsystems")
    system = ancilla.complement(psi.n_subsystems)
    sys_dims_psi = tuple(psi.dims[i] for i in system)
    sys_dims_phi = tuple(phi.dims[i] for i in system)
    if sys_dims_psi != sys_dims_phi:
        raise ValueError(f"system dims differ: {sys_dims_psi} vs {sys_dims_phi}")
    da_psi = int(np.prod([psi.dims[i] for i in ancilla.keep]))
    da_phi = int(np.prod([phi.dims[i] for i in ancilla.keep]))
    if da_psi != da_phi:
        raise ValueError(f"ancilla dims mismatch: {da_psi} vs {da_phi}")

    def _matrix(state: PureState) -> np.ndarray:
        t = state.tensor().transpose(system + ancilla.keep)
        return t.reshape(int(np.prod(sys_dims_psi)), da_psi)

    x = _matrix(psi)
    y = _matrix(phi)
    k = y.conj().T @ x
    u, s, vh = np.linalg.svd(k)
    w = np.conj(u @ vh)
    return w, float(s.sum())
