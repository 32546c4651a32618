"""Dense Hermitian linear algebra used throughout the package.

Matrices are plain ``numpy`` arrays.  A "state" (density matrix) is a
complex square array that is Hermitian, positive semidefinite and has unit
trace, up to the tolerances below.

Tensor layout
-------------
``tensor(A, B) == np.kron(A, B)``: the *second* factor is the fastest-varying
index, so row ``i*d2 + a`` of ``A (x) B`` is the pair ``(i, a)``.  For a
matrix ``M`` on ``C^K (x) C^2`` (qubit second) the 2x2 block form::

        [[X, Y ],
         [Y*, Z]]        with  M = X(x)E11 + Y(x)E12 + Y*(x)E21 + Z(x)E22

is obtained with strided slices, ``X = M[0::2, 0::2]`` etc.  See
:func:`qubit_blocks` and :func:`from_qubit_blocks`.  Tracing out the first
factor gives ``[[Tr X, Tr Y], [Tr Y*, Tr Z]]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, InvalidParameter, NotAState

HERMITIAN_TOL = 1e-12
EIG_TOL = 1e-10
TRACE_TOL = 1e-10
SUPPORT_TOL = 1e-10


def dagger(A: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(A, -1, -2))


def hermitize(A: np.ndarray) -> np.ndarray:
    """Symmetrize away round-off: (A + A*)/2."""
    return 0.5 * (A + dagger(A))


def _as_square(A, name="matrix") -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInput(f"{name} must be a square 2-d array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput(f"{name} has non-finite entries")
    return A


def is_hermitian(A, tol: float = HERMITIAN_TOL) -> bool:
    A = np.asarray(A)
    return A.ndim == 2 and A.shape[0] == A.shape[1] and bool(np.all(np.abs(A - dagger(A)) <= tol))


def as_hermitian(A, tol: float = HERMITIAN_TOL) -> np.ndarray:
    A = _as_square(A).astype(complex)
    if not is_hermitian(A, tol):
        raise InvalidInput("matrix is not Hermitian")
    return hermitize(A)


def clipped_eigh(A: np.ndarray, tol: float = EIG_TOL):
    """Eigendecomposition of a PSD matrix with eigenvalues in [-tol, 0) set to 0.

    Raises NotAState if an eigenvalue is below -tol.
    """
    w, v = np.linalg.eigh(hermitize(A))
    if w.size and w[0] < -tol:
        raise NotAState(f"matrix has eigenvalue {w[0]:.3e} < -{tol:g}")
    return np.clip(w, 0.0, None), v


def as_density(rho, tol: float = EIG_TOL) -> np.ndarray:
    """Validate ``rho`` as a density matrix and return it as a Hermitian complex array."""
    rho = _as_square(rho, "state").astype(complex)
    if not is_hermitian(rho, max(HERMITIAN_TOL, tol)):
        raise NotAState("state is not Hermitian")
    rho = hermitize(rho)
    w = np.linalg.eigvalsh(rho)
    if w[0] < -tol:
        raise NotAState(f"state has eigenvalue {w[0]:.3e} < -{tol:g}")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise NotAState(f"state has trace {tr!r}")
    return rho


def is_density(rho, tol: float = EIG_TOL) -> bool:
    try:
        as_density(rho, tol)
    except InvalidInput:
        return False
    return True


def psd_function(A: np.ndarray, f) -> np.ndarray:
    """Apply a scalar function to the (clipped) spectrum of a PSD matrix."""
    w, v = clipped_eigh(A)
    return (v * f(w)) @ dagger(v)


def sqrtm_psd(A: np.ndarray) -> np.ndarray:
    return psd_function(A, np.sqrt)


def powm_psd(A: np.ndarray, a: float) -> np.ndarray:
    """A^a for PSD A and a > 0."""
    if a <= 0:
        raise InvalidParameter(f"exponent must be positive, got {a}")
    return psd_function(A, lambda w: w ** a)


def _singular_or_abs_eigs(A: np.ndarray) -> np.ndarray:
    if is_hermitian(A, 1e-12 * max(1.0, float(np.abs(A).max(initial=0.0)))):
        return np.abs(np.linalg.eigvalsh(hermitize(A)))
    return np.linalg.svd(A, compute_uv=False)


def schatten_norm(A, p: float) -> float:
    """Schatten p-norm (Tr|A|^p)^(1/p), |A| = sqrt(A*A).

    Hermitian input goes through ``eigvalsh``; anything else through the SVD.
    ``p = inf`` gives the operator norm.
    """
    p = float(p)
    if not p >= 1:
        raise InvalidParameter(f"Schatten norm needs p >= 1, got {p}")
    A = np.asarray(A)
    if A.ndim != 2:
        raise InvalidInput("schatten_norm expects a 2-d array")
    if not np.all(np.isfinite(A)):
        raise InvalidInput("matrix has non-finite entries")
    s = _singular_or_abs_eigs(A)
    if s.size == 0:
        return 0.0
    if np.isinf(p):
        return float(s.max())
    top = s.max()
    if top == 0:
        return 0.0
    # scale to avoid overflow for large p
    return float(top * np.sum((s / top) ** p) ** (1.0 / p))


def schatten_power(A, p: float) -> float:
    """Tr|A|^p (no p-th root)."""
    if not p >= 1:
        raise InvalidParameter(f"Schatten norm needs p >= 1, got {p}")
    s = _singular_or_abs_eigs(np.asarray(A))
    return float(np.sum(s ** p))


def entropy_of_spectrum(w: np.ndarray) -> float:
    w = np.asarray(w, dtype=float)
    w = w[w > 0]
    return float(-np.sum(w * np.log(w)))


def von_neumann_entropy(rho) -> float:
    """S(rho) = -Tr rho ln rho in nats, with 0 ln 0 = 0."""
    rho = _as_square(rho, "state")
    w, _ = clipped_eigh(rho)
    return entropy_of_spectrum(w)


def relative_entropy(omega, rho) -> float:
    """S(omega | rho) = Tr omega (ln omega - ln rho); ``inf`` if supp(omega) is not in supp(rho)."""
    omega = _as_square(omega, "omega")
    rho = _as_square(rho, "rho")
    if omega.shape != rho.shape:
        raise InvalidInput(f"dimension mismatch {omega.shape} vs {rho.shape}")
    wo, vo = clipped_eigh(omega)
    wr, vr = clipped_eigh(rho)
    # overlaps[k, l] = |<r_k|o_l>|^2
    overlaps = np.abs(dagger(vr) @ vo) ** 2
    weight_on_r = overlaps @ wo  # <r_k| omega |r_k>
    kernel = wr <= SUPPORT_TOL
    if np.any(weight_on_r[kernel] > SUPPORT_TOL):
        return float("inf")
    log_r = np.log(wr[~kernel])
    cross = float(np.dot(weight_on_r[~kernel], log_r))
    return -entropy_of_spectrum(wo) - cross


def trace_distance(A, B) -> float:
    return 0.5 * schatten_norm(np.asarray(A) - np.asarray(B), 1)


def tensor(*mats) -> np.ndarray:
    """Kronecker product; the last factor varies fastest."""
    if not mats:
        raise InvalidInput("tensor() needs at least one factor")
    out = np.asarray(mats[0])
    for m in mats[1:]:
        out = np.kron(out, np.asarray(m))
    return out


def partial_trace(M, dims, keep: str = "first") -> np.ndarray:
    """Trace out one factor of a bipartite operator on C^d1 (x) C^d2.

    ``keep="first"`` returns Tr_2 M, ``keep="second"`` returns Tr_1 M.
    """
    M = np.asarray(M)
    d1, d2 = (int(d) for d in dims)
    if M.ndim != 2 or M.shape != (d1 * d2, d1 * d2):
        raise InvalidInput(f"matrix of shape {M.shape} does not match dims ({d1}, {d2})")
    T = M.reshape(d1, d2, d1, d2)
    if keep == "first":
        return np.einsum("iaja->ij", T)
    if keep == "second":
        return np.einsum("iaib->ab", T)
    raise InvalidParameter(f"keep must be 'first' or 'second', got {keep!r}")


def qubit_blocks(M):
    """Split M on C^K (x) C^2 into K x K blocks (X, Y, Z) with Y the (0, 1) block."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2:
        raise InvalidInput(f"expected a 2K x 2K matrix, got {M.shape}")
    return M[0::2, 0::2], M[0::2, 1::2], M[1::2, 1::2]


def from_qubit_blocks(X, Y, Z, Y21=None) -> np.ndarray:
    """Inverse of :func:`qubit_blocks`; the (1, 0) block defaults to Y*."""
    X, Y, Z = (np.asarray(a) for a in (X, Y, Z))
    K = X.shape[0]
    M = np.zeros((2 * K, 2 * K), dtype=np.result_type(X, Y, Z, complex))
    M[0::2, 0::2] = X
    M[0::2, 1::2] = Y
    M[1::2, 0::2] = dagger(Y) if Y21 is None else Y21
    M[1::2, 1::2] = Z
    return M


def norm_derivative_at_one(rho, h: float) -> float:
    """Forward difference (||rho||_{1+h} - 1)/h, which tends to -S(rho) as h -> 0."""
    if not 0 < h <= 1e-3:
        raise InvalidParameter(f"h must lie in (0, 1e-3], got {h}")
    rho = as_density(rho)
    return (schatten_norm(rho, 1.0 + h) - 1.0) / h


# --------------------------------------------------------------------------
# random instances
# --------------------------------------------------------------------------


@dataclass
class SeededRng:
    """A numpy Generator pinned to (seed, stream).

    PCG64 seeded through SeedSequence is platform independent, so the same
    (seed, stream) pair always produces the same draws.  ``child(i)`` derives
    an independent sub-stream, used for per-restart / per-instance streams.
    """

    seed: int
    stream: int | tuple = 0
    gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        key = self.stream if isinstance(self.stream, tuple) else (int(self.stream),)
        self._key = tuple(int(k) for k in key)
        ss = np.random.SeedSequence(int(self.seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=self._key)
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, i: int) -> "SeededRng":
        return SeededRng(self.seed, self._key + (int(i),))

    def __getattr__(self, name):
        # forward normal/uniform/integers/... to the generator
        if name == "gen":
            raise AttributeError(name)
        return getattr(self.gen, name)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, SeededRng):
        return rng.gen
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return SeededRng(0 if rng is None else int(rng)).gen
    raise InvalidInput(f"cannot use {type(rng).__name__} as a random generator")


def complex_gaussian(shape, rng) -> np.ndarray:
    g = as_generator(rng)
    return (g.standard_normal(shape) + 1j * g.standard_normal(shape)) / np.sqrt(2)


def random_unitary(dim: int, rng) -> np.ndarray:
    """Haar unitary: QR of a complex Gaussian with phases of R's diagonal removed."""
    q, r = np.linalg.qr(complex_gaussian((dim, dim), rng))
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_psd(dim: int, rng, rank: int | None = None) -> np.ndarray:
    G = complex_gaussian((dim, rank or dim), rng)
    return hermitize(G @ dagger(G))


def random_density(dim: int, rng, rank: int | None = None) -> np.ndarray:
    P = random_psd(dim, rng, rank)
    return P / np.trace(P).real


def random_pure_vector(dim: int, rng) -> np.ndarray:
    v = complex_gaussian(dim, rng)
    return v / np.linalg.norm(v)


def random_pure(dim: int, rng) -> np.ndarray:
    v = random_pure_vector(dim, rng)
    return np.outer(v, v.conj())


_KINDS = {
    "density": random_density,
    "unitary": random_unitary,
    "psd": random_psd,
    "pure": random_pure,
}


def random_instance(kind: str, dim: int, rng) -> np.ndarray:
    """Draw a random density / unitary / psd / pure matrix of size ``dim``."""
    if dim < 1:
        raise InvalidParameter(f"dim must be >= 1, got {dim}")
    try:
        make = _KINDS[kind]
    except KeyError:
        raise InvalidParameter(f"unknown kind {kind!r}; expected one of {sorted(_KINDS)}") from None
    return make(int(dim), rng)
