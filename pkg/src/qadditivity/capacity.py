"""Holevo capacity chi*(Phi) with a relative-entropy certificate.

``chi_star`` works on an ensemble of pure states.  Each round first
reweights the probabilities with the closed-form update
pi_i <- pi_i exp(S(A_i | sigma)) / Z (blended 50/50 with the old weights),
then runs L-BFGS on chi jointly over the states and the weight logits.  The
gradient of chi with respect to output A_i is pi_i (ln A_i - ln sigma).

After each round the average output sigma is certified by the radius
sup_omega S(Phi(omega) | sigma), which upper-bounds chi*.  If the radius
exceeds chi by more than ``tol`` the maximizing omega is added to the pool of
ensemble members (capped at three times the ensemble size; the lightest
member is dropped past the cap) and the rounds continue.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import matcore as mc
from .channels import Channel, QubitAffineChannel
from .errors import InvalidInput, InvalidParameter
from .purity import LOG_FLOOR, RelativeEntropyTo, maximize_over_pure_states, s_min


@dataclass
class Ensemble:
    probs: np.ndarray
    states: list

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.ndim != 1 or len(self.probs) != len(self.states):
            raise InvalidInput("need one probability per state")
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1) > 1e-12:
            raise InvalidInput("probabilities must be non-negative and sum to 1")
        self.states = [mc.as_density(s) for s in self.states]
        if len({s.shape for s in self.states}) > 1:
            raise InvalidInput("ensemble states must share a dimension")

    @property
    def average(self) -> np.ndarray:
        return sum(p * s for p, s in zip(self.probs, self.states))

    @classmethod
    def from_vectors(cls, probs, vectors):
        probs = np.asarray(probs, dtype=float)
        probs = probs / probs.sum()
        return cls(probs, [np.outer(v, np.conj(v)) for v in vectors])


def holevo_chi(phi: Channel, ens: Ensemble) -> float:
    """chi(Phi; E) = S(sum pi_i Phi(rho_i)) - sum pi_i S(Phi(rho_i))."""
    if ens.states[0].shape != (phi.d_in, phi.d_in):
        raise InvalidInput("ensemble dimension does not match the channel input")
    outs = [phi.apply(s) for s in ens.states]
    avg = sum(p * A for p, A in zip(ens.probs, outs))
    return mc.von_neumann_entropy(avg) - sum(p * mc.von_neumann_entropy(A) for p, A in zip(ens.probs, outs))


# --------------------------------------------------------------------------
# building blocks working on output stacks
# --------------------------------------------------------------------------


def _spectra(outs):
    w, v = np.linalg.eigh(mc.hermitize(outs))
    return np.clip(w, 0.0, None), v


def _entropies(w):
    return -np.sum(np.where(w > 0, w * np.log(np.maximum(w, LOG_FLOOR)), 0.0), axis=-1)


def _logm(w, v):
    return (v * np.log(np.maximum(w, LOG_FLOOR))[..., None, :]) @ mc.dagger(v)


def _divergences(outs, ent_outs, sigma):
    """S(A_i | sigma) for every output, using sigma's support only."""
    ws, vs = np.linalg.eigh(mc.hermitize(sigma))
    keep = ws > 1e-300
    log_sigma = (vs[:, keep] * np.log(ws[keep])) @ vs[:, keep].conj().T
    cross = np.einsum("nij,ji->n", outs, log_sigma).real
    return -ent_outs - cross


def optimize_probabilities(phi: Channel, states, probs=None, *, iters: int = 2000, tol: float = 1e-12, damping: float = 0.5):
    """Reweight fixed input states to maximize chi.

    Returns ``(probs, chi)``.  The update is the classical capacity iteration
    pi_i <- pi_i exp(D_i)/Z with D_i = S(Phi(rho_i) | sigma), blended with the
    current weights by ``damping``.
    """
    outs = np.array([mc.hermitize(phi.apply_linear(s)) for s in states])
    w, _ = _spectra(outs)
    ent = _entropies(w)
    n = len(states)
    probs = np.full(n, 1.0 / n) if probs is None else np.asarray(probs, float).copy()
    chi = -np.inf
    for _ in range(iters):
        sigma = np.einsum("n,nij->ij", probs, outs)
        D = _divergences(outs, ent, sigma)
        chi_new = float(np.dot(probs, D))
        gap = float(D.max() - chi_new)
        logp = np.log(np.maximum(probs, 1e-300)) + D - D.max()
        ba = np.exp(logp)
        ba /= ba.sum()
        probs = (1 - damping) * ba + damping * probs
        if gap <= tol and abs(chi_new - chi) <= tol:
            chi = chi_new
            break
        chi = chi_new
    return probs, chi


class _JointStep:
    """-chi and its gradient as a function of all member vectors and weight logits.

    Layout of x: real parts of the m vectors, imaginary parts, then m logits
    (probabilities are their softmax).  d chi / d A_i = pi_i (ln A_i - ln sigma)
    and d chi / d pi_i = S(A_i | sigma) - 1.
    """

    def __init__(self, phi: Channel, m: int):
        self.phi = phi
        self.m = m
        self.d = phi.d_in
        self.Sconj = phi.superop.conj()

    def pack(self, vecs, probs):
        z = np.log(np.maximum(probs, 1e-300))
        return np.concatenate([vecs.real.ravel(), vecs.imag.ravel(), z - z.max()])

    def unpack(self, x):
        m, d = self.m, self.d
        psi = x[: m * d].reshape(m, d) + 1j * x[m * d: 2 * m * d].reshape(m, d)
        z = x[2 * m * d:]
        probs = np.exp(z - z.max())
        return psi, np.linalg.norm(psi, axis=1), probs / probs.sum()

    def __call__(self, x):
        psi, n, probs = self.unpack(x)
        u = psi / n[:, None]
        outs = mc.hermitize(self.phi.apply_pure_batch(u))
        sigma = np.einsum("n,nij->ij", probs, outs)
        wa, va = _spectra(outs)
        ws, vs = _spectra(sigma[None])
        ent = _entropies(wa)
        chi = float(_entropies(ws)[0] - np.dot(probs, ent))
        log_sigma = _logm(ws, vs)[0]
        D = -ent - np.einsum("nij,ji->n", outs, log_sigma).real
        G = probs[:, None, None] * (_logm(wa, va) - log_sigma)
        H = (G.reshape(self.m, -1) @ self.Sconj).reshape(self.m, self.d, self.d)
        v = np.einsum("nij,nj->ni", H, u)
        g_re, g_im = 2 * v.real, 2 * v.imag
        radial = np.sum(u.real * g_re + u.imag * g_im, axis=1)
        g_re = (g_re - radial[:, None] * u.real) / n[:, None]
        g_im = (g_im - radial[:, None] * u.imag) / n[:, None]
        g_z = probs * (D - chi)
        return -chi, -np.concatenate([g_re.ravel(), g_im.ravel(), g_z])


def _joint_ascent(phi, probs, vecs, max_iters):
    step = _JointStep(phi, len(probs))
    x0 = step.pack(vecs, probs)
    res = minimize(step, x0, jac=True, method="L-BFGS-B", options={"maxiter": max_iters, "ftol": 1e-16, "gtol": 1e-13})
    x = res.x if res.fun <= step(x0)[0] else x0
    psi, n, probs = step.unpack(x)
    return probs, psi / n[:, None]


# --------------------------------------------------------------------------
# certificate
# --------------------------------------------------------------------------


@dataclass
class CapacityCertificate:
    radius: float
    gap: float
    argmax_vector: np.ndarray | None
    conclusive: bool


def _radius(phi: Channel, sigma: np.ndarray, *, restarts: int, seed: int, init=()):
    w, v = mc.clipped_eigh(sigma)
    kernel = v[:, w <= mc.SUPPORT_TOL]
    if kernel.shape[1]:
        leak = phi.adjoint(kernel @ kernel.conj().T)
        if np.linalg.eigvalsh(mc.hermitize(leak))[-1] > mc.SUPPORT_TOL:
            return math.inf, None
    opt = maximize_over_pure_states(phi, RelativeEntropyTo(sigma), restarts=restarts, seed=seed, init=init)
    out = phi.apply(np.outer(opt.vector, opt.vector.conj()))
    return mc.relative_entropy(out, sigma), opt.vector


def certify_capacity(phi: Channel, rho, chi_claim: float, *, restarts: int = 32, seed: int = 0, init=()) -> CapacityCertificate:
    """Radius sup_omega S(Phi(omega) | Phi(rho)) and its excess over ``chi_claim``.

    The radius bounds chi* from above for every rho, with equality only at the
    optimal average input.  If some output escapes the support of Phi(rho) the
    radius is +inf and the certificate is inconclusive.
    """
    rho = mc.as_density(rho)
    if rho.shape != (phi.d_in, phi.d_in):
        raise InvalidInput("reference state does not match the channel input")
    radius, vec = _radius(phi, phi.apply(rho), restarts=restarts, seed=seed, init=init)
    return CapacityCertificate(radius, radius - chi_claim, vec, math.isfinite(radius))


# --------------------------------------------------------------------------
# chi*
# --------------------------------------------------------------------------


@dataclass
class CapacityResult:
    chi_star: float
    ensemble: Ensemble
    avg_input: np.ndarray
    avg_output: np.ndarray
    duality_gap: float
    converged: bool
    rounds: int = 0
    radius: float = math.nan


def chi_star(
    phi: Channel,
    *,
    ensemble_size: int | None = None,
    restarts: int = 16,
    max_iters: int = 200,
    max_rounds: int = 60,
    tol: float = 1e-6,
    seed: int = 0,
    init=None,
) -> CapacityResult:
    """Holevo capacity in nats: a lower bound plus its certified duality gap.

    ``init`` may be a list of ``(prob, vector)`` pairs used as the starting
    ensemble (padded with random members up to ``ensemble_size``).
    """
    if tol <= 0:
        raise InvalidParameter("tol must be positive")
    d = phi.d_in
    m = ensemble_size or d * d
    rng = mc.SeededRng(seed, 1)
    probs, vecs = [], []
    for p, v in init or ():
        v = np.asarray(v, dtype=complex).reshape(d)
        probs.append(float(p))
        vecs.append(v / np.linalg.norm(v))
    while len(vecs) < m:
        vecs.append(mc.random_pure_vector(d, rng))
        probs.append(1.0 / m if init else 1.0)
    m = len(vecs)
    pool_size = 3 * m
    vecs = np.array(vecs)
    probs = np.array(probs) / np.sum(probs)

    def chi_of(pr, vs):
        outs = mc.hermitize(phi.apply_pure_batch(vs))
        w, _ = _spectra(outs)
        sig = np.einsum("n,nij->ij", pr, outs)
        ws, _ = _spectra(sig[None])
        return float(_entropies(ws)[0] - np.dot(pr, _entropies(w))), sig

    best = None
    radius, gap, rounds = math.inf, math.inf, 0
    for rounds in range(1, max_rounds + 1):
        probs, _ = optimize_probabilities(phi, [np.outer(v, v.conj()) for v in vecs], probs, iters=200)
        probs, vecs = _joint_ascent(phi, probs, vecs, max_iters)
        chi, sigma = chi_of(probs, vecs)
        if best is None or chi >= best[0]:
            best = (chi, probs.copy(), vecs.copy())
        radius, arg = _radius(phi, sigma, restarts=restarts, seed=seed + rounds)
        gap = radius - chi
        if gap <= tol:
            break
        if arg is not None:
            # column generation: the most distinguishable input joins the pool
            vecs = np.vstack([vecs, arg[None]])
            probs = np.append(probs, 1.0 / len(vecs))
            if len(vecs) > pool_size:
                j = int(np.argmin(probs))
                vecs, probs = np.delete(vecs, j, axis=0), np.delete(probs, j)
            probs /= probs.sum()

    chi, probs, vecs = best
    ens = Ensemble.from_vectors(probs, vecs)
    avg_in = ens.average
    avg_out = phi.apply(avg_in)
    radius, _ = _radius(phi, avg_out, restarts=restarts, seed=seed)
    gap = radius - chi
    return CapacityResult(chi, ens, avg_in, avg_out, gap, bool(gap <= tol), rounds, radius)


def chi_star_unital_qubit(phi: Channel, **smin_opts) -> float:
    """chi* = ln 2 - S_min for a unital qubit channel."""
    if phi.dims != (2, 2):
        raise InvalidParameter("formula applies to qubit channels only")
    if isinstance(phi, QubitAffineChannel):
        unital = phi.params.unital
    else:
        unital = np.abs(phi.apply(np.eye(2) / 2) - np.eye(2) / 2).max() <= 1e-12
    if not unital:
        raise InvalidParameter("channel is not unital; ln 2 - S_min does not apply")
    smin_opts.setdefault("derivative_h", None)
    return math.log(2) - s_min(phi, **smin_opts).value
