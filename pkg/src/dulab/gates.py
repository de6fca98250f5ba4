"""Two-site gates: reshuffling, dual-unitarity defects, Haar sampling,
Cartan decomposition and nearest-dual construction.

Index conventions, fixed once (a single consistent grouping is what makes
the choi = gram / q^2 identity hold):

* a gate u on q (x) q carries entries ``u[i*q+j, k*q+l] = u_{ij,kl}`` with
  row (i, j) i-major and column (k, l) k-major, site 1 = left kron factor;
* the dual (sideways) matrix regroups as ``M[(i,k),(j,l)] = u_{ij,kl}``,
  rows i-major, columns j-major;
* the 4-qudit output state rho_AB' orders its two factors (A, B') =
  (input-left, output-left); swapping those factors gives exactly
  M M^dagger / q^2.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .qinfo import DensityMatrix, PureState, reduce, trace_norm

GATE_UNITARITY_TOL = 1e-10
DUAL_TOL = 1e-10
CARTAN_RECONSTRUCT_TOL = 1e-9
QUARTER = math.pi / 4

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULI = (_X, _Y, _Z)

# columns are the Bell-like basis in which two-qubit interactions
# exp(-i sum J sigma sigma) are diagonal and one-site unitaries are real
_MAGIC = np.array(
    [
        [1, -1j, 0, 0],
        [0, 0, 1, -1j],
        [0, 0, -1, -1j],
        [1, 1j, 0, 0],
    ],
    dtype=complex,
) / math.sqrt(2)


@dataclass(frozen=True, eq=False)
class Gate:
    """A two-site unitary on q (x) q stored as a q^2 x q^2 matrix."""

    q: int
    matrix: np.ndarray

    def __init__(self, q: int, matrix):
        q = int(q)
        matrix = np.array(matrix, dtype=complex, copy=True)
        if q < 2:
            raise ValueError(f"local dimension must be >= 2, got {q}")
        if matrix.shape != (q * q, q * q):
            raise ValueError(f"matrix shape {matrix.shape} != ({q*q}, {q*q})")
        defect = trace_norm(matrix @ matrix.conj().T - np.eye(q * q))
        if defect > GATE_UNITARITY_TOL:
            raise ValueError(f"matrix is not unitary: ||uu+ - I||_1 = {defect:.3e}")
        matrix.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "matrix", matrix)


@dataclass(frozen=True)
class DefectReport:
    """Dual-unitarity defect in both normalizations plus their consistency."""

    gram_defect: float
    choi_defect: float
    relation_ok: bool

    def is_dual(self, tol: float = DUAL_TOL) -> bool:
        return self.gram_defect <= tol and self.choi_defect <= tol


@dataclass(frozen=True, eq=False)
class CartanData:
    """phase, four one-site special unitaries and interaction coefficients.

    Reconstruction is e^{i phase} (u1 (x) u2) exp(-i sum J_a s_a s_a)
    (u3 (x) u4) with J in the canonical chamber pi/4 >= Jx >= Jy >= |Jz|.
    """

    phase: float
    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    u4: np.ndarray
    J: tuple

    def reconstruct(self) -> Gate:
        m = (
            cmath.exp(1j * self.phase)
            * np.kron(self.u1, self.u2)
            @ interaction_gate(*self.J)
            @ np.kron(self.u3, self.u4)
        )
        return Gate(2, m)


# ---------------------------------------------------------------------------
# named gates
# ---------------------------------------------------------------------------

def identity_gate(q: int) -> Gate:
    return Gate(q, np.eye(q * q))


def swap_gate(q: int) -> Gate:
    m = np.zeros((q * q, q * q))
    for i in range(q):
        for j in range(q):
            m[j * q + i, i * q + j] = 1.0
    return Gate(q, m)


def cz_gate(q: int) -> Gate:
    """Controlled-phase diag(omega^{kl}); diag(1,1,1,-1) at q = 2."""
    w = cmath.exp(2j * math.pi / q)
    phases = [w ** (k * l) for k in range(q) for l in range(q)]
    return Gate(q, np.diag(phases))


def fourier_gate(q: int) -> Gate:
    """Discrete Fourier transform on the combined q^2-dimensional pair."""
    d = q * q
    w = cmath.exp(2j * math.pi / d)
    m = np.arange(d)
    return Gate(q, w ** np.outer(m, m) / math.sqrt(d))


def kicked_ising_gate(J: float, b: float, h: float) -> Gate:
    """Bulk kicked-Ising gate: Z-rotations, ZZ coupling, X kicks, ZZ, Z-rotations."""
    rz = scipy.linalg.expm(-1j * h * _Z / 2)
    rx = scipy.linalg.expm(-1j * b * _X)
    zz = scipy.linalg.expm(-1j * J * np.kron(_Z, _Z))
    m = np.kron(rz, rz) @ zz @ np.kron(rx, rx) @ zz @ np.kron(rz, rz)
    return Gate(2, m)


def kicked_ising_first_gate(J: float, h: float) -> Gate:
    """First-layer gate exp(-i J Z1 Z2 - i h Z1/2 - i h Z2/2)."""
    ham = J * np.kron(_Z, _Z) + (h / 2) * (np.kron(_Z, np.eye(2)) + np.kron(np.eye(2), _Z))
    return Gate(2, scipy.linalg.expm(-1j * ham))


def haar_unitary(d: int, seed) -> np.ndarray:
    """Haar-distributed d x d unitary (Ginibre + QR with phase correction).

    ``seed`` is anything accepted by ``np.random.default_rng`` (int,
    SeedSequence, Generator); the result is deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def haar_gate(q: int, seed) -> Gate:
    return Gate(q, haar_unitary(q * q, seed))


# ---------------------------------------------------------------------------
# reshuffling and defects
# ---------------------------------------------------------------------------

def dual_matrix(g: Gate) -> np.ndarray:
    """The sideways regrouping M[(i,k),(j,l)] = u_{ij,kl}; an involution."""
    q = g.q
    return g.matrix.reshape(q, q, q, q).transpose(0, 2, 1, 3).reshape(q * q, q * q).copy()


def reshuffle(matrix: np.ndarray, q: int) -> np.ndarray:
    """The same index regrouping on a bare matrix (needed to invert it)."""
    return np.asarray(matrix).reshape(q, q, q, q).transpose(0, 2, 1, 3).reshape(q * q, q * q)


def choi_output_state(g: Gate) -> DensityMatrix:
    """Output of the 4-qudit model: two Bell pairs conjugated by the gate,
    reduced to (A, B') = (input-left, output-left)."""
    q = g.q
    psi = g.matrix.reshape(q, q, q, q).transpose(2, 0, 1, 3) / q  # axes (A, B', C', D)
    state = PureState(psi.reshape(-1), (q, q, q, q))
    return reduce(state, {0, 1})


def gram_defect(g: Gate) -> float:
    m = dual_matrix(g)
    return float(np.abs(np.linalg.eigvalsh(m @ m.conj().T - np.eye(g.q ** 2))).sum())


def choi_defect(g: Gate) -> float:
    rho = choi_output_state(g)
    target = np.eye(g.q ** 2) / g.q ** 2
    return float(np.abs(np.linalg.eigvalsh(target - rho.matrix)).sum())


def defects(g: Gate) -> DefectReport:
    gd = gram_defect(g)
    cd = choi_defect(g)
    return DefectReport(gram_defect=gd, choi_defect=cd, relation_ok=abs(cd * g.q ** 2 - gd) <= 1e-9)


def is_dual_unitary(g: Gate, tol: float = DUAL_TOL) -> bool:
    return choi_defect(g) <= tol


# ---------------------------------------------------------------------------
# Cartan decomposition at q = 2
# ---------------------------------------------------------------------------

def interaction_gate(jx: float, jy: float, jz: float) -> np.ndarray:
    """exp(-i (jx XX + jy YY + jz ZZ)) in closed form (diagonal in the
    Bell-like basis with phases set by the three coefficients)."""
    phases = np.exp(
        -1j * np.array([jx - jy + jz, -jx + jy + jz, -(jx + jy + jz), jx + jy - jz])
    )
    return _MAGIC @ (phases[:, None] * _MAGIC.conj().T)


def _joint_diag_polish(a, b, p, sweeps=8, tol=1e-15):
    """Jacobi sweeps rotating an orthogonal basis until it diagonalizes the
    commuting real symmetric pair (a, b) to machine precision; needed near
    degenerate spectra where a two-stage eigh leaves O(sqrt(eps)) residuals."""
    a = p.T @ a @ p
    b = p.T @ b @ p
    n = a.shape[0]
    for _ in range(sweeps):
        off = max(
            abs(a[i, j]) if k == 0 else abs(b[i, j])
            for i in range(n - 1)
            for j in range(i + 1, n)
            for k in (0, 1)
        )
        if off < tol:
            break
        for i in range(n - 1):
            for j in range(i + 1, n):
                g = np.zeros((2, 2))
                for m in (a, b):
                    h = np.array([m[i, i] - m[j, j], 2.0 * m[i, j]])
                    g += np.outer(h, h)
                _, v = np.linalg.eigh(g)
                x, y = v[:, -1]
                if x < 0:
                    x, y = -x, -y
                r = math.hypot(x, y)
                if r < 1e-300 or abs(y) < tol * r:
                    continue
                c = math.sqrt((x + r) / (2 * r))
                s = y / (2 * r * c)
                rot = np.eye(n)
                rot[i, i] = rot[j, j] = c
                rot[i, j] = -s
                rot[j, i] = s
                a = rot.T @ a @ rot
                b = rot.T @ b @ rot
                p = p @ rot
    return p


def _diag_symmetric_unitary(s: np.ndarray):
    """Diagonalize a complex symmetric unitary by a real orthogonal matrix,
    deterministically: eigenvalues ordered by descending real then imaginary
    part, eigenvector signs fixed by the largest component, det(p) = +1."""
    a, b = s.real, s.imag
    w, p = np.linalg.eigh(a)
    i, n = 0, len(w)
    while i < n:
        j = i + 1
        while j < n and abs(w[j] - w[i]) < 1e-7:
            j += 1
        if j - i > 1:
            blk = p[:, i:j]
            sub = blk.T @ b @ blk
            _, v = np.linalg.eigh((sub + sub.T) / 2)
            p[:, i:j] = blk @ v
        i = j
    p = _joint_diag_polish(a, b, p)
    lam = np.einsum("ji,jk,ki->i", p, s, p)
    order = np.lexsort((-lam.imag.round(9), -lam.real.round(9)))
    p = p[:, order]
    for k in range(n):
        col = p[:, k]
        if col[np.argmax(np.abs(col))] < 0:
            p[:, k] = -col
    if np.linalg.det(p) < 0:
        p[:, -1] = -p[:, -1]
    lam = np.einsum("ji,jk,ki->i", p, s, p)
    return lam, p


def _kron_factor_2x2(l4: np.ndarray):
    """Split a (scalar times) kron product of 2x2 unitaries into
    (a, b, c) with det a = det b = 1, |c| = 1 and l4 = c * kron(a, b)."""
    r = l4.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vh = np.linalg.svd(r)
    a = (u[:, 0] * math.sqrt(s[0])).reshape(2, 2)
    b = (vh[0, :] * math.sqrt(s[0])).reshape(2, 2)

    def fix(m):
        m = m / cmath.sqrt(np.linalg.det(m))
        v = m.flat[int(np.argmax(np.abs(m)))]
        if (abs(v.real) > 1e-9 and v.real < 0) or (abs(v.real) <= 1e-9 and v.imag < 0):
            m = -m
        return m

    a, b = fix(a), fix(b)
    c = np.trace(np.kron(a, b).conj().T @ l4) / 4
    return a, b, c


def cartan_decompose(g: Gate) -> CartanData:
    """Cartan/KAK data of a two-qubit gate, J in the canonical chamber.

    Algorithm: conjugate into the Bell-like basis, orthogonally diagonalize
    the symmetric unitary m^T m (deterministic ordering and tie-breaking),
    split off the one-site factors, then walk J into
    pi/4 >= Jx >= Jy >= |Jz| (with Jz >= 0 when Jx = pi/4) by coefficient
    shifts, axis swaps and pairwise sign flips absorbed into the one-site
    factors.  Failure to reconstruct within 1e-9 is a hard error.
    """
    if g.q != 2:
        raise ValueError(f"Cartan decomposition implemented for q = 2 only, got q = {g.q}")
    u = g.matrix
    phase0 = np.angle(np.linalg.det(u)) / 4
    m = _MAGIC.conj().T @ (u * cmath.exp(-1j * phase0)) @ _MAGIC
    lam, p = _diag_symmetric_unitary(m.T @ m)
    theta = np.angle(lam) / 2
    if np.real(np.prod(np.exp(1j * theta))) < 0:
        theta[-1] += math.pi
    d = np.exp(1j * theta)
    o1 = m @ p @ np.diag(d.conj())
    if np.abs(o1.imag).max() > 1e-6:
        raise ValueError("orthogonal factor came out non-real; decomposition failed")
    o1 = o1.real
    phi_d = theta.sum() / 4
    J = np.array(
        [
            (-theta[0] + theta[1] + theta[2] - theta[3]) / 4,
            (theta[0] - theta[1] + theta[2] - theta[3]) / 4,
            (-theta[0] - theta[1] + theta[2] + theta[3]) / 4,
        ]
    )
    u1, u2, c1 = _kron_factor_2x2(_MAGIC @ o1 @ _MAGIC.conj().T)
    u3, u4, c2 = _kron_factor_2x2(_MAGIC @ p.T @ _MAGIC.conj().T)
    phi = phase0 + phi_d + np.angle(c1) + np.angle(c2)

    # canonicalization moves; every move keeps the reconstruction invariant
    def shift(k, n):
        nonlocal phi, u3, u4
        J[k] -= n * math.pi / 2
        phi += n * math.pi / 2
        s = np.linalg.matrix_power(1j * _PAULI[k], n % 4)
        u3 = s @ u3
        u4 = s @ u4

    swap_c = {
        (0, 1): scipy.linalg.expm(-1j * QUARTER * _Z),
        (1, 2): scipy.linalg.expm(-1j * QUARTER * _X),
        (0, 2): scipy.linalg.expm(-1j * QUARTER * _Y),
    }

    def swap_axes(i, j):
        nonlocal u1, u2, u3, u4
        c = swap_c[(min(i, j), max(i, j))]
        u1 = u1 @ c.conj().T
        u2 = u2 @ c.conj().T
        u3 = c @ u3
        u4 = c @ u4
        J[[i, j]] = J[[j, i]]

    def flip_pair(i, j):
        nonlocal u1, u3
        v = 1j * _PAULI[3 - i - j]
        u1 = u1 @ v.conj().T
        u3 = v @ u3
        J[i] = -J[i]
        J[j] = -J[j]

    for k in range(3):
        n = int(math.floor((J[k] + QUARTER) / (math.pi / 2) + 1e-12))
        if n:
            shift(k, n)
    for _ in range(2):
        if abs(J[0]) < abs(J[1]) - 1e-15:
            swap_axes(0, 1)
        if abs(J[1]) < abs(J[2]) - 1e-15:
            swap_axes(1, 2)
    if J[0] < -1e-15 and J[1] < -1e-15:
        flip_pair(0, 1)
    elif J[0] < -1e-15:
        flip_pair(0, 2)
    elif J[1] < -1e-15:
        flip_pair(1, 2)
    if abs(J[0] - QUARTER) < 1e-12 and J[2] < -1e-15:
        shift(0, 1)
        flip_pair(0, 2)

    phi = float((phi + math.pi) % (2 * math.pi) - math.pi)
    data = CartanData(phase=phi, u1=u1, u2=u2, u3=u3, u4=u4, J=tuple(float(j) for j in J))
    err = trace_norm(data.reconstruct().matrix - u)
    if err > CARTAN_RECONSTRUCT_TOL:
        raise ValueError(f"Cartan reconstruction failed: ||u - rebuilt||_1 = {err:.3e}")
    return data


# ---------------------------------------------------------------------------
# nearest dual unitary (q = 2) and iterative projection (any q)
# ---------------------------------------------------------------------------

def nearest_dual_q2(g: Gate) -> tuple[Gate, float]:
    """Snap the two interaction coefficients nearest to +-pi/4 onto +-pi/4.

    Keeps the phase, the four one-site factors and the coefficient farthest
    from +-pi/4 (largest |cos 2J|); ties pick the lexicographically first
    pair (x before y before z).  The result is exactly dual unitary and the
    second return value is ||u - u_x||_1.
    """
    data = cartan_decompose(g)
    J = np.array(data.J)
    closeness = np.abs(np.cos(2 * J))
    order = sorted(range(3), key=lambda k: (closeness[k], k))
    J_snap = J.copy()
    for k in order[:2]:
        J_snap[k] = QUARTER if J[k] >= 0 else -QUARTER
    snapped = CartanData(
        phase=data.phase, u1=data.u1, u2=data.u2, u3=data.u3, u4=data.u4,
        J=tuple(float(j) for j in J_snap),
    )
    ux = snapped.reconstruct()
    return ux, trace_norm(g.matrix - ux.matrix)


def _polar_unitary(m: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(m)
    return u @ vh


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    gate: Gate
    converged: bool
    defect_trace: tuple

    @property
    def iterations(self) -> int:
        return len(self.defect_trace) - 1


def project_dual_iterative(g: Gate, max_iters: int = 200, tol: float = 1e-10) -> ProjectionResult:
    """Alternating polar projections between the gate and its dual matrix.

    Per iteration: polar-project the dual matrix to a unitary, reshuffle
    back, then polar-project the gate matrix to a unitary; stop when the
    choi defect drops below tol or after max_iters.  There is no known
    convergence guarantee; non-convergence is reported via the flag and the
    per-iteration defect trace, never an exception.
    """
    q = g.q
    u = g.matrix
    trace = [choi_defect(g)]
    if trace[0] <= tol:
        return ProjectionResult(g, True, tuple(trace))
    for _ in range(max_iters):
        u = reshuffle(_polar_unitary(reshuffle(u, q)), q)
        u = _polar_unitary(u)
        gate = Gate(q, u)
        trace.append(choi_defect(gate))
        if trace[-1] <= tol:
            return ProjectionResult(gate, True, tuple(trace))
    return ProjectionResult(Gate(q, u), False, tuple(trace))


# ---------------------------------------------------------------------------
# gate file format
# ---------------------------------------------------------------------------

def write_gate_file(g: Gate, path) -> None:
    """Text format: line 1 is q, then q^2 lines of q^2 entries "re,im"."""
    lines = [str(g.q)]
    for row in g.matrix:
        lines.append(" ".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_gate_file(path) -> Gate:
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    lines = [ln for ln in raw if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty gate file")
    try:
        q = int(lines[0].strip())
    except ValueError:
        raise ValueError(f"{path}:1: expected the local dimension q, got {lines[0]!r}") from None
    d = q * q
    if len(lines) - 1 != d:
        raise ValueError(f"{path}: expected {d} matrix rows, found {len(lines) - 1}")
    m = np.zeros((d, d), dtype=complex)
    for r, line in enumerate(lines[1:]):
        parts = line.split()
        if len(parts) != d:
            raise ValueError(f"{path}:{r + 2}: expected {d} entries, found {len(parts)}")
        for c, token in enumerate(parts):
            try:
                re_s, im_s = token.split(",")
                m[r, c] = complex(float(re_s), float(im_s))
            except ValueError:
                raise ValueError(f"{path}:{r + 2}: bad entry {token!r} (want re,im)") from None
    return Gate(q, m)
