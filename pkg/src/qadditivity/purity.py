"""Maximal output purity nu_p and minimal output entropy S_min.

Both are suprema of a convex function of the input state, so they are
attained on pure states; the optimizers below only search pure inputs.

For qubit inputs a deterministic Bloch-sphere grid picks the starting
points; otherwise starts are random unit vectors drawn from per-restart
streams ``SeededRng(seed).child(i)``.  Each start is refined with L-BFGS on
the normalized parameterization ``psi / |psi|`` using the analytic gradient
``2 Phi^dagger(G) psi`` where ``G`` is the derivative of the objective with
respect to the output matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import matcore as mc
from .channels import Channel
from .errors import InvalidInput, InvalidParameter

LOG_FLOOR = 1e-300
MAX_NU_DIM = 16
P_ONE_CUTOFF = 1e-6
CEILING_TOL = 1e-12


# --------------------------------------------------------------------------
# objectives: functions of the output matrix A = Phi(|psi><psi|)
# --------------------------------------------------------------------------


def batch_spectra(outs: np.ndarray) -> np.ndarray:
    """Clipped eigenvalues of a stack of Hermitian matrices; closed form for 2x2."""
    if outs.shape[-1] == 2:
        a = outs[..., 0, 0].real
        c = outs[..., 1, 1].real
        b = np.abs(outs[..., 0, 1])
        mid = (a + c) / 2
        rad = np.sqrt(((a - c) / 2) ** 2 + b**2)
        w = np.stack([mid - rad, mid + rad], axis=-1)
    else:
        w = np.linalg.eigvalsh(outs)
    return np.clip(w, 0.0, None)


class OutputObjective:
    """f(A) with gradient G (df = Re Tr(G dA)); subclasses implement both.

    ``ceiling`` is a known global maximum, if any; reaching it counts as
    converged even where the gradient is singular.
    """

    ceiling: float | None = None

    def values(self, outs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def value_and_grad(self, A: np.ndarray):
        raise NotImplementedError


class TracePower(OutputObjective):
    """Tr A^p; maximizing it maximizes ||A||_p."""

    def __init__(self, p: float):
        self.p = float(p)

    def values(self, outs):
        w = batch_spectra(outs)
        return np.sum(w ** self.p, axis=-1)

    def value_and_grad(self, A):
        w, v = np.linalg.eigh(A)
        w = np.clip(w, 0.0, None)
        G = (v * (self.p * w ** (self.p - 1))) @ v.conj().T
        return float(np.sum(w ** self.p)), G


class NegativeEntropy(OutputObjective):
    """-S(A) = Tr A ln A."""

    ceiling = 0.0  # attained exactly by pure outputs, where ln blows up

    def values(self, outs):
        w = batch_spectra(outs)
        return np.sum(np.where(w > 0, w * np.log(np.maximum(w, LOG_FLOOR)), 0.0), axis=-1)

    def value_and_grad(self, A):
        w, v = np.linalg.eigh(A)
        w = np.clip(w, 0.0, None)
        lw = np.log(np.maximum(w, LOG_FLOOR))
        val = float(np.sum(np.where(w > 0, w * lw, 0.0)))
        return val, (v * (lw + 1.0)) @ v.conj().T


class RelativeEntropyTo(OutputObjective):
    """S(A | sigma) for a fixed reference sigma whose support contains every output."""

    def __init__(self, sigma: np.ndarray):
        w, v = mc.clipped_eigh(sigma)
        keep = w > mc.SUPPORT_TOL
        self.log_sigma = (v[:, keep] * np.log(w[keep])) @ v[:, keep].conj().T
        self._neg = NegativeEntropy()

    def values(self, outs):
        cross = np.einsum("nij,ji->n", outs, self.log_sigma).real
        return self._neg.values(outs) - cross

    def value_and_grad(self, A):
        val, G = self._neg.value_and_grad(A)
        return val - float(np.trace(A @ self.log_sigma).real), G - self.log_sigma


# --------------------------------------------------------------------------
# optimizer
# --------------------------------------------------------------------------


@dataclass
class PureOptimum:
    value: float  # objective value f at the best vector
    vector: np.ndarray
    converged: bool
    restarts_used: int
    grad_norm: float
    all_values: list = field(default_factory=list)


def bloch_grid(step_deg: float = 1.0) -> np.ndarray:
    """Unit vectors (cos(theta/2), e^{i phi} sin(theta/2)) on a theta/phi grid."""
    n_theta = int(round(180.0 / step_deg)) + 1
    n_phi = int(round(360.0 / step_deg))
    theta = np.linspace(0.0, np.pi, n_theta)
    phi = np.arange(n_phi) * (2 * np.pi / n_phi)
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    th, ph = th.ravel(), ph.ravel()
    vecs = np.stack([np.cos(th / 2) + 0j, np.exp(1j * ph) * np.sin(th / 2)], axis=1)
    # the poles appear once per phi; keep them once
    keep = np.ones(len(vecs), bool)
    keep[(th == 0) & (ph > 0)] = False
    keep[(th == np.pi) & (ph > 0)] = False
    return vecs[keep]


def _pack(psi):
    return np.concatenate([psi.real, psi.imag])


def _unpack(x, d):
    return x[:d] + 1j * x[d:]


def _refine(phi: Channel, objective: OutputObjective, psi0: np.ndarray, max_iters: int, tol: float):
    d = phi.d_in
    S = phi.superop
    SH = S.conj().T

    def fun(x):
        psi = _unpack(x, d)
        n = np.linalg.norm(psi)
        u = psi / n
        A = (S @ np.outer(u, u.conj()).reshape(-1)).reshape(phi.d_out, phi.d_out)
        f, G = objective.value_and_grad(mc.hermitize(A))
        H = (SH @ G.reshape(-1)).reshape(d, d)
        v = H @ u
        gu = 2.0 * _pack(v).real
        uu = _pack(u)
        g = (gu - np.dot(uu, gu) * uu) / n
        return -f, -g

    x0 = _pack(psi0 / np.linalg.norm(psi0))
    res = minimize(
        fun,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iters, "ftol": tol * 1e-3, "gtol": 1e-12, "maxcor": 20},
    )
    psi = _unpack(res.x, d)
    psi = psi / np.linalg.norm(psi)
    f, g = fun(_pack(psi))
    return -f, psi, float(np.linalg.norm(g))


def maximize_over_pure_states(
    phi: Channel,
    objective: OutputObjective,
    *,
    restarts: int = 64,
    seed: int = 0,
    grid: float | None = 1.0,
    init=(),
    max_iters: int = 500,
    tol: float = 1e-10,
    qubit_refine: int = 8,
) -> PureOptimum:
    """Maximize ``objective(Phi(|psi><psi|))`` over unit vectors psi.

    Every start (explicit ``init`` vectors, grid points or random draws) is
    refined locally; the best refined value wins.  An explicit start can only
    improve, so seeding with a known state gives a certified lower bound at
    least as large as that state's value.
    """
    d = phi.d_in
    starts = [np.asarray(v, dtype=complex).reshape(d) for v in init]
    if d == 2 and grid:
        vecs = bloch_grid(grid)
        vals = objective.values(phi.apply_pure_batch(vecs))
        order = np.argsort(vals)[::-1][:qubit_refine]
        starts += [vecs[i] for i in order]
    else:
        base = mc.SeededRng(seed)
        starts += [mc.random_pure_vector(d, base.child(i)) for i in range(restarts)]

    best = None
    values = []
    for psi0 in starts:
        f0 = float(objective.values(phi.apply_pure_batch(psi0[None] / np.linalg.norm(psi0)))[0])
        f, psi, gnorm = _refine(phi, objective, psi0, max_iters, tol)
        if f < f0:  # L-BFGS never returns worse than its start, but stay safe
            f, psi = f0, psi0 / np.linalg.norm(psi0)
        values.append(f)
        if best is None or f > best[0]:
            best = (f, psi, gnorm)
    f, psi, gnorm = best
    at_ceiling = objective.ceiling is not None and f >= objective.ceiling - CEILING_TOL
    return PureOptimum(f, psi, bool(gnorm <= 1e-5 or at_ceiling), len(starts), gnorm, values)


# --------------------------------------------------------------------------
# public operations
# --------------------------------------------------------------------------


@dataclass
class PurityResult:
    value: float
    argmax_state: np.ndarray
    p: float
    restarts_used: int
    converged: bool
    argmax_vector: np.ndarray = None
    grad_norm: float = 0.0


def _check_p(p):
    p = float(p)
    if not p >= 1 or math.isinf(p) or math.isnan(p):
        raise InvalidParameter(f"p must be a finite real >= 1, got {p}")
    return p


def nu_p(
    phi: Channel,
    p: float,
    *,
    restarts: int = 64,
    max_iters: int = 500,
    tol: float = 1e-10,
    grid: float = 1.0,
    seed: int = 0,
    init=(),
) -> PurityResult:
    """Maximal output p-norm sup_rho ||Phi(rho)||_p (a certified lower bound)."""
    p = _check_p(p)
    if phi.d_in > MAX_NU_DIM:
        raise InvalidInput(f"input dimension {phi.d_in} exceeds the supported maximum {MAX_NU_DIM}")
    if p < 1 + P_ONE_CUTOFF:
        psi = np.zeros(phi.d_in, complex)
        psi[0] = 1.0
        return PurityResult(1.0, np.outer(psi, psi.conj()), p, 0, True, psi, 0.0)
    opt = maximize_over_pure_states(
        phi, TracePower(p), restarts=restarts, seed=seed, grid=grid, init=init, max_iters=max_iters, tol=tol
    )
    rho = np.outer(opt.vector, opt.vector.conj())
    value = mc.schatten_norm(phi.apply(rho), p)
    return PurityResult(value, rho, p, opt.restarts_used, opt.converged, opt.vector, opt.grad_norm)


def nu_p_depolarizing(lam: float, p: float) -> float:
    """[((1+lam)/2)^p + ((1-lam)/2)^p]^(1/p) for the qubit depolarizing channel."""
    p = _check_p(p)
    if not -1.0 / 3.0 - 1e-12 <= lam <= 1.0 + 1e-12:
        raise InvalidParameter(f"depolarizing parameter {lam} outside the CP range [-1/3, 1]")
    a = abs(lam)
    return (((1 + a) / 2) ** p + ((1 - a) / 2) ** p) ** (1.0 / p)


@dataclass
class SminResult:
    value: float
    argmin_state: np.ndarray
    converged: bool
    restarts_used: int
    argmin_vector: np.ndarray = None
    derivative_check: float | None = None  # -(nu_{1+h} - 1)/h, should be close to value


def s_min(
    phi: Channel,
    *,
    restarts: int = 64,
    max_iters: int = 500,
    tol: float = 1e-10,
    grid: float = 1.0,
    seed: int = 0,
    init=(),
    derivative_h: float | None = 1e-4,
) -> SminResult:
    """Minimal output entropy inf_rho S(Phi(rho)), in nats (an upper bound by construction)."""
    opt = maximize_over_pure_states(
        phi, NegativeEntropy(), restarts=restarts, seed=seed, grid=grid, init=init, max_iters=max_iters, tol=tol
    )
    rho = np.outer(opt.vector, opt.vector.conj())
    value = mc.von_neumann_entropy(phi.apply(rho))
    deriv = None
    if derivative_h:
        nu = nu_p(phi, 1.0 + derivative_h, restarts=restarts, grid=grid, seed=seed, init=(opt.vector,))
        deriv = -(nu.value - 1.0) / derivative_h
    return SminResult(value, rho, opt.converged, opt.restarts_used, opt.vector, deriv)
