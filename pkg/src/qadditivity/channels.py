"""Quantum channels in Kraus, CQ, QC, qubit-affine and tensor-product form.

Every channel carries a dense superoperator ``S`` (shape ``d_out**2 x d_in**2``,
row-major vectorization: ``vec(Phi(rho)) = S @ vec(rho)``).  It is built once
from the form-specific formula and used for batched application, for the
Hilbert-Schmidt adjoint and for the Choi matrix.  ``apply`` itself always goes
through the form-specific formula.

Qubit Bloch convention: ``rho = (I + w . sigma)/2``.  A qubit-affine channel
with parameters ``lambda, t`` maps ``w -> (lambda_k w_k + t_k)_k``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import matcore as mc
from .errors import InvalidInput, InvalidParameter

PAULI = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

TP_TOL = 1e-10
KRAUS_CUTOFF = 1e-12
EQUAL_AXIS_TOL = 1e-12


# --------------------------------------------------------------------------
# qubit affine parameters
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class QubitAffineParams:
    """Diagonal Bloch form: compression ``lam`` followed by translation ``t``."""

    lam: tuple
    t: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lam)
        t = tuple(float(x) for x in self.t)
        if len(lam) != 3 or len(t) != 3:
            raise InvalidInput("qubit affine parameters need three lambdas and three translations")
        if not all(math.isfinite(x) for x in lam + t):
            raise InvalidInput("qubit affine parameters must be finite")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "t", t)

    @property
    def unital(self) -> bool:
        return all(abs(x) <= 1e-12 for x in self.t)

    def transfer_matrix(self) -> np.ndarray:
        """Real 4x4 matrix acting on (1, w1, w2, w3)."""
        T = np.zeros((4, 4))
        T[0, 0] = 1.0
        T[1:, 0] = self.t
        T[1:, 1:] = np.diag(self.lam)
        return T

    def bloch_ball_necessary(self) -> bool:
        return all(abs(l) + abs(t) <= 1 + 1e-12 for l, t in zip(self.lam, self.t))


# --------------------------------------------------------------------------
# channel classes
# --------------------------------------------------------------------------


def _row_vec(A):
    return np.asarray(A).reshape(-1)


class Channel:
    """Base class.  Subclasses set ``form``, ``d_in``, ``d_out`` and ``_apply``."""

    form = "abstract"
    d_in: int
    d_out: int

    @property
    def dims(self):
        return (self.d_in, self.d_out)

    def _apply(self, rho: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # linear action on arbitrary d_in x d_in matrices
    def apply_linear(self, A) -> np.ndarray:
        A = np.asarray(A, dtype=complex)
        if A.shape != (self.d_in, self.d_in):
            raise InvalidInput(f"input has shape {A.shape}, channel expects {self.d_in}x{self.d_in}")
        return self._apply(A)

    def apply(self, rho) -> np.ndarray:
        """Phi(rho) for a density matrix ``rho`` (validated)."""
        rho = np.asarray(rho)
        if rho.shape != (self.d_in, self.d_in):
            raise InvalidInput(f"state has shape {rho.shape}, channel expects {self.d_in}x{self.d_in}")
        rho = mc.as_density(rho)
        return mc.hermitize(self._apply(rho))

    def __call__(self, rho):
        return self.apply(rho)

    @cached_property
    def superop(self) -> np.ndarray:
        d = self.d_in
        S = np.empty((self.d_out ** 2, d * d), dtype=complex)
        for k in range(d):
            for l in range(d):
                E = np.zeros((d, d), dtype=complex)
                E[k, l] = 1.0
                S[:, k * d + l] = _row_vec(self._apply(E))
        S.setflags(write=False)
        return S

    @property
    def superop4(self) -> np.ndarray:
        """Superoperator as a tensor ``S4[x, y, a, b]``: out[x, y] = sum S4 in[a, b]."""
        return self.superop.reshape(self.d_out, self.d_out, self.d_in, self.d_in)

    def apply_batch(self, rhos) -> np.ndarray:
        """Apply to a stack of matrices of shape (n, d_in, d_in); no validation."""
        rhos = np.asarray(rhos)
        n = rhos.shape[0]
        out = rhos.reshape(n, -1) @ self.superop.T
        return out.reshape(n, self.d_out, self.d_out)

    def apply_pure_batch(self, vecs) -> np.ndarray:
        """Outputs for pure inputs given as rows of ``vecs`` (n, d_in)."""
        vecs = np.asarray(vecs)
        rhos = vecs[:, :, None] * vecs.conj()[:, None, :]
        return self.apply_batch(rhos)

    def adjoint(self, B) -> np.ndarray:
        """Hilbert-Schmidt adjoint Phi^dagger(B)."""
        B = np.asarray(B)
        return (self.superop.conj().T @ _row_vec(B)).reshape(self.d_in, self.d_in)

    def kraus(self) -> list:
        return kraus_from_choi(self)

    def __repr__(self):
        return f"<{type(self).__name__} {self.d_in}->{self.d_out}>"


class KrausChannel(Channel):
    form = "kraus"

    def __init__(self, ops):
        ops = [np.asarray(K, dtype=complex) for K in ops]
        if not ops:
            raise InvalidInput("need at least one Kraus operator")
        shape = ops[0].shape
        if len(shape) != 2 or any(K.shape != shape for K in ops):
            raise InvalidInput("Kraus operators must be 2-d arrays of a common shape")
        if not all(np.all(np.isfinite(K)) for K in ops):
            raise InvalidInput("Kraus operators have non-finite entries")
        self.ops = ops
        self.d_out, self.d_in = shape

    def _apply(self, rho):
        return sum(K @ rho @ K.conj().T for K in self.ops)

    def kraus(self):
        return list(self.ops)


class CQChannel(Channel):
    """Phi(rho) = sum_b <e_b|rho|e_b> Q_b for an orthonormal basis {e_b}."""

    form = "cq"

    def __init__(self, basis, outputs):
        self.basis = np.array(basis, dtype=complex)
        self.outputs = [np.asarray(Q, dtype=complex) for Q in outputs]
        self.d_in = self.basis.shape[1]
        self.d_out = self.outputs[0].shape[0]

    @property
    def povm(self):
        return [np.outer(e, e.conj()) for e in self.basis]

    def _apply(self, rho):
        probs = np.einsum("bi,ij,bj->b", self.basis.conj(), rho, self.basis)
        return np.einsum("b,bxy->xy", probs, np.array(self.outputs))

    def kraus(self):
        ops = []
        for e, Q in zip(self.basis, self.outputs):
            w, v = mc.clipped_eigh(Q)
            for k in range(len(w)):
                if w[k] > KRAUS_CUTOFF:
                    ops.append(np.sqrt(w[k]) * np.outer(v[:, k], e.conj()))
        return ops


class QCChannel(Channel):
    """Phi(rho) = sum_b Tr(rho X_b) |f_b><f_b| for a POVM {X_b} and orthonormal {f_b}."""

    form = "qc"

    def __init__(self, povm, basis):
        self.povm = [np.asarray(X, dtype=complex) for X in povm]
        self.basis = np.array(basis, dtype=complex)
        self.d_in = self.povm[0].shape[0]
        self.d_out = self.basis.shape[1]

    @property
    def outputs(self):
        return [np.outer(f, f.conj()) for f in self.basis]

    def _apply(self, rho):
        probs = np.array([np.trace(rho @ X) for X in self.povm])
        return np.einsum("b,bx,by->xy", probs, self.basis, self.basis.conj())

    def kraus(self):
        ops = []
        for X, f in zip(self.povm, self.basis):
            w, v = mc.clipped_eigh(X)
            for k in range(len(w)):
                if w[k] > KRAUS_CUTOFF:
                    ops.append(np.sqrt(w[k]) * np.outer(f, v[:, k].conj()))
        return ops


class QubitAffineChannel(Channel):
    form = "qubit_affine"
    d_in = 2
    d_out = 2

    def __init__(self, params: QubitAffineParams):
        if not isinstance(params, QubitAffineParams):
            params = QubitAffineParams(*params)
        self.params = params

    def _apply(self, rho):
        lam, t = self.params.lam, self.params.t
        tr = np.trace(rho)
        out = tr * PAULI[0]
        for k in range(3):
            w_k = np.trace(rho @ PAULI[k + 1])
            out = out + (lam[k] * w_k + t[k] * tr) * PAULI[k + 1]
        return 0.5 * out


class TensorChannel(Channel):
    """Omega (x) Phi acting on C^{d_Omega} (x) C^{d_Phi}, second factor fastest."""

    form = "tensor"

    def __init__(self, first: Channel, second: Channel):
        self.first = first
        self.second = second
        self.d_in = first.d_in * second.d_in
        self.d_out = first.d_out * second.d_out

    def _apply(self, rho):
        a, b = self.first, self.second
        T = rho.reshape(a.d_in, b.d_in, a.d_in, b.d_in)
        out = np.einsum("xyij,uvab,iajb->xuyv", a.superop4, b.superop4, T, optimize=True)
        return out.reshape(self.d_out, self.d_out)

    def kraus(self):
        return [np.kron(A, B) for A in self.first.kraus() for B in self.second.kraus()]


# --------------------------------------------------------------------------
# constructors
# --------------------------------------------------------------------------


def _orthonormal_rows(vectors, name="basis") -> np.ndarray:
    V = np.array([np.asarray(v, dtype=complex).reshape(-1) for v in vectors])
    if V.ndim != 2:
        raise InvalidInput(f"{name} vectors must share a dimension")
    gram = V.conj() @ V.T
    if not np.allclose(gram, np.eye(len(V)), atol=1e-10, rtol=0):
        raise InvalidInput(f"{name} is not orthonormal within 1e-10")
    return V


def kraus_channel(ops) -> KrausChannel:
    return KrausChannel(ops)


def identity(d: int = 2) -> KrausChannel:
    return KrausChannel([np.eye(d)])


def unitary_channel(U) -> KrausChannel:
    return KrausChannel([U])


def qubit_affine(lam, t=(0.0, 0.0, 0.0)) -> QubitAffineChannel:
    return QubitAffineChannel(QubitAffineParams(lam, t))


def depolarizing(lam: float) -> QubitAffineChannel:
    return qubit_affine((lam, lam, lam))


def make_cq(basis_states, outputs) -> CQChannel:
    """CQ channel: measure in an orthonormal basis, emit ``outputs[b]`` on outcome b."""
    V = _orthonormal_rows(basis_states)
    if len(V) != V.shape[1]:
        raise InvalidInput("CQ basis must be a complete orthonormal basis")
    if len(outputs) != len(V):
        raise InvalidInput("need one output state per basis vector")
    outs = [mc.as_density(Q) for Q in outputs]
    if len({Q.shape for Q in outs}) != 1:
        raise InvalidInput("output states must share a dimension")
    return CQChannel(V, outs)


def make_qc(povm, basis_states=None) -> QCChannel:
    """QC channel: measure the POVM, emit the orthonormal basis state of the outcome."""
    povm = [mc.as_hermitian(X, 1e-10) for X in povm]
    if not povm or len({X.shape for X in povm}) != 1:
        raise InvalidInput("POVM elements must be square and share a dimension")
    d = povm[0].shape[0]
    for X in povm:
        if np.linalg.eigvalsh(X)[0] < -1e-10:
            raise InvalidInput("POVM element is not positive semidefinite")
    if not np.allclose(sum(povm), np.eye(d), atol=1e-10, rtol=0):
        raise InvalidInput("POVM elements do not sum to the identity within 1e-10")
    if basis_states is None:
        basis_states = np.eye(len(povm))
    V = _orthonormal_rows(basis_states)
    if len(V) != len(povm):
        raise InvalidInput("need one output basis vector per POVM element")
    return QCChannel(povm, V)


def tensor_channels(omega: Channel, phi: Channel) -> TensorChannel:
    return TensorChannel(omega, phi)


def choi(phi: Channel) -> np.ndarray:
    """(I (x) Phi)(|Omega><Omega|) with |Omega> = sum_i |ii>/sqrt(d_in); unit trace."""
    S4 = phi.superop4
    J = np.einsum("xykl->kxly", S4).reshape(phi.d_in * phi.d_out, phi.d_in * phi.d_out)
    return mc.hermitize(J) / phi.d_in


def kraus_from_choi(phi: Channel, cutoff: float = KRAUS_CUTOFF) -> list:
    J = choi(phi) * phi.d_in
    w, v = np.linalg.eigh(J)
    ops = []
    for k in np.argsort(w)[::-1]:
        if w[k] <= cutoff:
            break
        ops.append(np.sqrt(w[k]) * v[:, k].reshape(phi.d_in, phi.d_out).T)
    return ops


def to_kraus(phi: Channel) -> KrausChannel:
    return KrausChannel(kraus_from_choi(phi))


def apply_on_second(phi: Channel, M, K: int) -> np.ndarray:
    """(I_K (x) Phi)(M) for an arbitrary matrix M on C^K (x) C^{d_in}."""
    M = np.asarray(M, dtype=complex)
    if M.shape != (K * phi.d_in, K * phi.d_in):
        raise InvalidInput(f"matrix of shape {M.shape} is not on C^{K} (x) C^{phi.d_in}")
    T = M.reshape(K, phi.d_in, K, phi.d_in)
    out = np.einsum("xyab,iajb->ixjy", phi.superop4, T)
    return out.reshape(K * phi.d_out, K * phi.d_out)


def apply_on_first(phi: Channel, M, N: int) -> np.ndarray:
    """(Phi (x) I_N)(M) for M on C^{d_in} (x) C^N."""
    M = np.asarray(M, dtype=complex)
    if M.shape != (phi.d_in * N, phi.d_in * N):
        raise InvalidInput(f"matrix of shape {M.shape} is not on C^{phi.d_in} (x) C^{N}")
    T = M.reshape(phi.d_in, N, phi.d_in, N)
    out = np.einsum("xyij,iajb->xayb", phi.superop4, T)
    return out.reshape(phi.d_out * N, phi.d_out * N)


# --------------------------------------------------------------------------
# certification
# --------------------------------------------------------------------------


@dataclass
class CPTPReport:
    min_choi_eigenvalue: float
    tp_residual: float
    kraus_rank: int
    tol: float
    passed: bool

    def __bool__(self):
        return self.passed


def is_cptp(phi: Channel, tol: float = 1e-8) -> CPTPReport:
    """Choi positivity plus trace preservation, both within ``tol``."""
    if not tol > 0:
        raise InvalidParameter("tol must be positive")
    w = np.linalg.eigvalsh(choi(phi))
    tp = float(np.abs(phi.adjoint(np.eye(phi.d_out)) - np.eye(phi.d_in)).max())
    rank = int(np.sum(w * phi.d_in > KRAUS_CUTOFF))
    return CPTPReport(float(w[0]), tp, rank, tol, bool(w[0] >= -tol and tp <= tol))


# --------------------------------------------------------------------------
# qubit channels: affine form, symmetries, translation condition
# --------------------------------------------------------------------------


def pauli_transfer_matrix(phi: Channel) -> np.ndarray:
    """Real 4x4 matrix R with R[i, j] = Tr(sigma_i Phi(sigma_j))/2."""
    if phi.dims != (2, 2):
        raise InvalidInput("Pauli transfer matrix is defined here for qubit channels only")
    R = np.empty((4, 4))
    for j in range(4):
        out = phi.apply_linear(PAULI[j])
        for i in range(4):
            R[i, j] = 0.5 * np.trace(PAULI[i] @ out).real
    return R


def _proper(Q):
    return Q if np.linalg.det(Q) > 0 else Q @ np.diag([1.0, 1.0, -1.0])


def affine_form(phi: Channel):
    """Diagonal affine parameters of a qubit channel.

    Returns ``(params, R_out, R_in)`` with rotations such that the Bloch map of
    ``phi`` is ``w -> R_out (diag(lam) R_in^T w + t)``.  The rotations are proper,
    so they come from unitary conjugations and leave nu_p and S_min unchanged.
    """
    if isinstance(phi, QubitAffineChannel):
        return phi.params, np.eye(3), np.eye(3)
    R = pauli_transfer_matrix(phi)
    T, t = R[1:, 1:], R[1:, 0]
    U, s, Vt = np.linalg.svd(T)
    V = Vt.T
    sign = 1.0
    if np.linalg.det(U) < 0:
        U = U @ np.diag([1.0, 1.0, -1.0])
        sign = -sign
    if np.linalg.det(V) < 0:
        V = V @ np.diag([1.0, 1.0, -1.0])
        sign = -sign
    lam = s.copy()
    lam[2] *= sign
    return QubitAffineParams(lam, U.T @ t), U, V


@dataclass
class CanonicalForm:
    params: QubitAffineParams
    log: list = field(default_factory=list)
    condition_form: bool = False  # True when t2 = 0 was reached


def _permute(lam, t, perm, log):
    lam = [lam[i] for i in perm]
    t = [t[i] for i in perm]
    if tuple(perm) != (0, 1, 2):
        log.append(("permute", tuple(perm)))
    return lam, t


def _flip_lambda_pair(lam, i, j, log):
    lam[i], lam[j] = -lam[i], -lam[j]
    log.append(("flip_lambda", (i, j)))


def _flip_t_pair(t, i, j, log):
    t[i], t[j] = -t[i], -t[j]
    log.append(("flip_t", (i, j)))


def _fix_signs(lam, t, log):
    # lambda_1 >= 0, lambda_2 >= 0 using pairs that involve axis 3 where possible
    if lam[0] < 0 and lam[1] < 0:
        _flip_lambda_pair(lam, 0, 1, log)
    elif lam[0] < 0:
        _flip_lambda_pair(lam, 0, 2, log)
    elif lam[1] < 0:
        _flip_lambda_pair(lam, 1, 2, log)
    if t[0] < 0 and t[1] < 0:
        _flip_t_pair(t, 0, 1, log)
    elif t[0] < 0:
        _flip_t_pair(t, 0, 2, log)
    elif t[1] < 0:
        _flip_t_pair(t, 1, 2, log)


def _equal(a, b):
    return abs(abs(a) - abs(b)) <= EQUAL_AXIS_TOL


def canonicalize_qubit(params: QubitAffineParams) -> CanonicalForm:
    """Bring qubit-affine parameters to t1, t2 >= 0, lam1 >= lam2 >= 0.

    Uses coordinate permutations, sign reversals of pairs of lambdas
    (conjugation by a Pauli in the domain) and of pairs of translations
    (the same Pauli on both sides).  When the translation condition holds the
    result additionally has t2 = 0, using a rotation about the third axis when
    two axes have equal length.  Each step is recorded in ``log``.
    """
    lam, t = list(params.lam), list(params.t)
    log: list = []
    absl = [abs(x) for x in lam]
    condition = satisfies_translation_condition(params)
    equal_pairs = [(i, j) for i in range(3) for j in range(i + 1, 3) if _equal(lam[i], lam[j])]

    if condition and equal_pairs:
        i, j = equal_pairs[0]
        k = 3 - i - j
        lam, t = _permute(lam, t, (i, j, k), log)
        _fix_signs(lam, t, log)
        r = math.hypot(t[0], t[1])
        if t[1] != 0.0:
            angle = math.atan2(t[1], t[0])
            # lam1 == lam2: rotating the range about axis 3 leaves the ellipsoid alone
            log.append(("rotate_axis3", angle))
            t[0], t[1] = r, 0.0
        return CanonicalForm(QubitAffineParams(lam, t), log, True)

    if condition:
        order = sorted(range(3), key=lambda i: -absl[i])
        a, b, c = order
        if t[b] == 0.0:
            perm = (a, b, c)
        elif t[c] == 0.0:
            perm = (a, c, b)
        else:  # only reachable with zero-length axes; fall back to sorting
            perm = (a, b, c)
        lam, t = _permute(lam, t, perm, log)
        _fix_signs(lam, t, log)
        return CanonicalForm(QubitAffineParams(lam, t), log, t[1] == 0.0)

    order = sorted(range(3), key=lambda i: -absl[i])  # stable: ties keep input order
    lam, t = _permute(lam, t, tuple(order), log)
    _fix_signs(lam, t, log)
    return CanonicalForm(QubitAffineParams(lam, t), log, False)


def satisfies_translation_condition(params: QubitAffineParams, tol: float = EQUAL_AXIS_TOL) -> bool:
    """If |lam_i| < |lam_j| < |lam_k| strictly then t_i t_j = 0; no restriction on ties."""
    absl = [abs(x) for x in params.lam]
    for a in range(3):
        for b in range(a + 1, 3):
            if abs(absl[a] - absl[b]) <= tol:
                return True
    i, j, _ = sorted(range(3), key=lambda k: absl[k])
    return abs(params.t[i] * params.t[j]) <= tol


def is_canonical_condition_form(params: QubitAffineParams, tol: float = 1e-12) -> bool:
    """t2 = 0, t1 >= 0 and lam1 >= lam2 >= 0."""
    lam, t = params.lam, params.t
    return abs(t[1]) <= tol and t[0] >= -tol and lam[0] >= lam[1] - tol and lam[1] >= -tol


def is_depolarizing(phi: Channel, tol: float = 1e-12):
    """Return lambda if ``phi`` is a qubit-affine depolarizing channel, else None."""
    if isinstance(phi, QubitAffineChannel):
        lam, t = phi.params.lam, phi.params.t
        if max(abs(x) for x in t) <= tol and max(lam) - min(lam) <= tol:
            return lam[0]
    return None


# --------------------------------------------------------------------------
# random channels
# --------------------------------------------------------------------------


def random_channel(d_in: int, d_out: int | None = None, rng=None, rank: int | None = None) -> KrausChannel:
    """Random CPTP map from a Haar-like isometry (Stinespring dilation)."""
    d_out = d_in if d_out is None else d_out
    g = mc.as_generator(rng)
    min_rank = -(-d_in // d_out)  # an isometry C^d_in -> C^(d_out*rank) needs d_out*rank >= d_in
    if rank is None:
        rank = int(g.integers(min_rank, d_in * d_out + 1))
    if rank < min_rank:
        raise InvalidParameter(f"Kraus rank {rank} too small for a {d_in}->{d_out} channel")
    G = mc.complex_gaussian((d_out * rank, d_in), g)
    Q, _ = np.linalg.qr(G)
    V = Q[:, :d_in]
    return KrausChannel([V[r * d_out:(r + 1) * d_out] for r in range(rank)])


def random_qubit_affine(rng, family: str = "general", max_tries: int = 10_000) -> QubitAffineChannel:
    """Rejection-sample CPTP qubit-affine channels.

    ``family``: "unital" (t = 0), "single_t" (one nonzero translation on a
    random axis; always satisfies the translation condition), "condition"
    (unital or single_t, chosen at random) or "general".
    """
    g = mc.as_generator(rng)
    if family == "condition":
        family = "unital" if g.random() < 0.5 else "single_t"
    for _ in range(max_tries):
        lam = g.uniform(-1, 1, 3)
        if family == "unital":
            t = np.zeros(3)
        elif family == "single_t":
            t = np.zeros(3)
            t[g.integers(3)] = g.uniform(-1, 1) * (1 - abs(lam).min())
        elif family == "general":
            t = g.uniform(-1, 1, 3) * (1 - abs(lam))
        else:
            raise InvalidParameter(f"unknown family {family!r}")
        ch = qubit_affine(lam, t)
        if is_cptp(ch, 1e-12):
            return ch
    raise RuntimeError("rejection sampling failed")  # pragma: no cover


def random_cq(d_in: int, d_out: int, rng) -> CQChannel:
    g = mc.as_generator(rng)
    U = mc.random_unitary(d_in, g)
    return make_cq(U.T, [mc.random_density(d_out, g) for _ in range(d_in)])


def random_povm(d: int, n: int, rng) -> list:
    g = mc.as_generator(rng)
    Gs = [mc.random_psd(d, g, rank=1 + int(g.integers(d))) for _ in range(n)]
    S_inv_half = mc.powm_psd(np.linalg.inv(sum(Gs)), 0.5)
    return [mc.hermitize(S_inv_half @ G @ S_inv_half) for G in Gs]


def random_qc(d_in: int, n_outcomes: int, rng) -> QCChannel:
    g = mc.as_generator(rng)
    povm = random_povm(d_in, n_outcomes, g)
    # exact completeness after the inverse square root
    povm[-1] = np.eye(d_in) - sum(povm[:-1])
    return make_qc(povm, np.eye(n_outcomes))


# --------------------------------------------------------------------------
# JSON channel spec
# --------------------------------------------------------------------------


def _enc_matrix(A):
    A = np.asarray(A, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in A]


def _enc_vector(v):
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex).reshape(-1)]


def _dec(obj):
    arr = np.asarray(obj, dtype=float)
    if arr.shape[-1] != 2:
        raise InvalidInput("complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def encode_matrix(A) -> list:
    """JSON form of a complex matrix: nested [re, im] pairs (exact float repr)."""
    return _enc_matrix(A)


def decode_matrix(obj) -> np.ndarray:
    return _dec(obj)


def to_spec(phi: Channel) -> dict:
    if isinstance(phi, QubitAffineChannel):
        return {"form": "qubit_affine", "lambda": list(phi.params.lam), "t": list(phi.params.t)}
    if isinstance(phi, KrausChannel):
        return {"form": "kraus", "kraus": [_enc_matrix(K) for K in phi.ops]}
    if isinstance(phi, CQChannel):
        return {
            "form": "cq",
            "basis": [_enc_vector(e) for e in phi.basis],
            "outputs": [_enc_matrix(Q) for Q in phi.outputs],
        }
    if isinstance(phi, QCChannel):
        return {
            "form": "qc",
            "povm": [_enc_matrix(X) for X in phi.povm],
            "basis": [_enc_vector(f) for f in phi.basis],
        }
    if isinstance(phi, TensorChannel):
        return {"form": "tensor", "factors": [to_spec(phi.first), to_spec(phi.second)]}
    raise InvalidInput(f"cannot serialize {type(phi).__name__}")


def from_spec(spec: dict) -> Channel:
    if not isinstance(spec, dict) or "form" not in spec:
        raise InvalidInput("channel spec must be an object with a 'form' field")
    form = spec["form"]
    try:
        if form == "qubit_affine":
            return qubit_affine(spec["lambda"], spec.get("t", (0.0, 0.0, 0.0)))
        if form == "kraus":
            return KrausChannel([_dec(K) for K in spec["kraus"]])
        if form == "cq":
            return make_cq([_dec(e) for e in spec["basis"]], [_dec(Q) for Q in spec["outputs"]])
        if form == "qc":
            basis = spec.get("basis")
            return make_qc([_dec(X) for X in spec["povm"]], None if basis is None else [_dec(f) for f in basis])
        if form == "tensor":
            first, second = spec["factors"]
            return tensor_channels(from_spec(first), from_spec(second))
    except KeyError as exc:
        raise InvalidInput(f"channel spec of form {form!r} is missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidInput):
            raise
        raise InvalidInput(f"malformed {form!r} channel spec: {exc}") from None
    raise InvalidInput(f"unknown channel form {form!r}")


def load_channel(path) -> Channel:
    try:
        spec = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path}: invalid JSON ({exc})") from None
    return from_spec(spec)


def save_channel(phi: Channel, path) -> None:
    Path(path).write_text(json.dumps(to_spec(phi), indent=1))
