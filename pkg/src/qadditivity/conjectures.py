"""Numerical checks of the multiplicativity and additivity statements.

Every check returns a :class:`CheckReport` whose ``gap`` is ``rhs - lhs`` and
which passes when ``gap >= -tolerance``.  Inequalities are oriented so that the
claim always reads ``lhs <= rhs``.  For identities (QC relative entropy
identity, trace expansion) the report stores ``gap = -|rhs - lhs|`` so the
same pass rule gives a two-sided test.

Block layout: a matrix M on C^K (x) C^2 is split as in :func:`matcore.qubit_blocks`
into X, Y, Z, with ``M = X (x) E11 + Y (x) E12 + Y* (x) E21 + Z (x) E22``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import matcore as mc
from .capacity import Ensemble, chi_star
from .channels import (
    Channel,
    CQChannel,
    KrausChannel,
    QCChannel,
    QubitAffineChannel,
    affine_form,
    apply_on_second,
    is_canonical_condition_form,
    is_depolarizing,
    satisfies_translation_condition,
    tensor_channels,
)
from .errors import InvalidInput, InvalidParameter
from .purity import MAX_NU_DIM, nu_p, nu_p_depolarizing, s_min

# tolerance policy
IDENTITY_TOL = 1e-8
PROVED_TOL = 1e-10
OPTIMIZER_TOL = 1e-4
CHI_ADDITIVITY_TOL = 2e-3
ENTROPY_BOUND_TOL = 1e-8
EXPANSION_TOL = 1e-10
DEGENERATE_TRACE = 1e-12
MAX_EXPANSION_P = 4


@dataclass
class CheckReport:
    check_name: str
    instance_seed: int | None
    lhs: float
    rhs: float
    gap: float
    passed: bool
    tolerance: float
    diagnostics: dict = field(default_factory=dict)
    inconclusive: bool = False
    instance: dict | None = None  # serializable reproduction data, filled by sweeps
    subreports: list = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return self.passed and all(r.all_passed for r in self.subreports)

    @property
    def any_inconclusive(self) -> bool:
        return self.inconclusive or any(r.any_inconclusive for r in self.subreports)

    def flatten(self) -> list:
        """This report followed by every sub-report, depth first."""
        out = [self]
        for r in self.subreports:
            out += r.flatten()
        return out

    def row(self) -> dict:
        return {
            "check_name": self.check_name,
            "instance_seed": self.instance_seed,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "gap": self.gap,
            "pass": self.passed,
            "tolerance": self.tolerance,
        }


def _gap_pass(gap, tol):
    if math.isnan(gap):
        return False
    return bool(gap >= -tol)


def make_report(name, lhs, rhs, tol, *, seed=None, diagnostics=None, inconclusive=False) -> CheckReport:
    """Inequality report for the claim lhs <= rhs."""
    lhs, rhs = float(lhs), float(rhs)
    if math.isinf(lhs) and lhs == rhs:
        gap = 0.0
    else:
        gap = rhs - lhs
    return CheckReport(name, seed, lhs, rhs, gap, _gap_pass(gap, tol), tol, diagnostics or {}, inconclusive)


def make_identity_report(name, lhs, rhs, tol, *, seed=None, diagnostics=None, inconclusive=False) -> CheckReport:
    """Identity report: gap = -|rhs - lhs|; two infinite sides of the same sign agree."""
    lhs, rhs = float(lhs), float(rhs)
    if math.isinf(lhs) and lhs == rhs:
        gap = 0.0
    else:
        gap = -abs(rhs - lhs)
    return CheckReport(name, seed, lhs, rhs, gap, _gap_pass(gap, tol), tol, diagnostics or {}, inconclusive)


# --------------------------------------------------------------------------
# random block matrices
# --------------------------------------------------------------------------


def random_contraction(K: int, rng, regime: str = "mixed") -> np.ndarray:
    """K x K matrix with operator norm <= 1.

    "interior": Gaussian matrix rescaled to norm u ~ U[0, 1]; "boundary": a Haar
    unitary; "mixed": either, with equal probability.
    """
    g = mc.as_generator(rng)
    if regime == "mixed":
        regime = "boundary" if g.random() < 0.5 else "interior"
    if regime == "boundary":
        return mc.random_unitary(K, g)
    if regime == "interior":
        G = mc.complex_gaussian((K, K), g)
        return G * (g.uniform() / np.linalg.norm(G, 2))
    raise InvalidParameter(f"unknown contraction regime {regime!r}")


def random_block_psd(K: int, rng, regime: str = "mixed") -> np.ndarray:
    """Trace-one PSD matrix on C^K (x) C^2 with off-diagonal block sqrt(X) R sqrt(Z)."""
    if K < 1:
        raise InvalidParameter("K must be at least 1")
    g = mc.as_generator(rng)
    X = mc.random_psd(K, g, rank=1 + int(g.integers(K)))
    Z = mc.random_psd(K, g, rank=1 + int(g.integers(K)))
    R = random_contraction(K, g, regime)
    Y = mc.sqrtm_psd(X) @ R @ mc.sqrtm_psd(Z)
    M = mc.from_qubit_blocks(X, Y, Z)
    return mc.hermitize(M / np.trace(M).real)


def _as_block_psd(M, phi=None) -> tuple[np.ndarray, int]:
    M = mc.as_hermitian(M)
    if M.shape[0] % 2:
        raise InvalidInput(f"expected a 2K x 2K matrix, got {M.shape}")
    w = np.linalg.eigvalsh(M)
    if w[0] < -mc.EIG_TOL:
        raise InvalidInput(f"M is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    if phi is not None and phi.dims != (2, 2):
        raise InvalidInput("the block checks need a qubit channel")
    return M, M.shape[0] // 2


# --------------------------------------------------------------------------
# conjecture 1 and its entropy limit
# --------------------------------------------------------------------------


def certified_nu(phi: Channel, p: float, restarts: int = 128, seed: int = 0):
    """(value, converged, source) for nu_p used on the right-hand sides."""
    lam = is_depolarizing(phi)
    if lam is not None:
        return nu_p_depolarizing(lam, p), True, "closed-form"
    res = nu_p(phi, p, restarts=restarts, seed=seed)
    return res.value, res.converged, "optimizer"


def check_conjecture1(phi: Channel, M, p: float, *, nu: float | None = None, seed=None, restarts: int = 128) -> CheckReport:
    """||(I (x) Phi)(M)||_p <= nu_p(Phi) (||X||_p + ||Z||_p)."""
    M, K = _as_block_psd(M, phi)
    X, _, Z = mc.qubit_blocks(M)
    converged, source = True, "supplied"
    if nu is None:
        nu, converged, source = certified_nu(phi, p, restarts)
    out = apply_on_second(phi, M, K)
    lhs = mc.schatten_norm(mc.hermitize(out), p)
    x, z = mc.schatten_norm(X, p), mc.schatten_norm(Z, p)
    diag = {"nu_p": nu, "nu_source": source, "nu_converged": converged, "norm_X": x, "norm_Z": z, "p": p, "K": K}
    return make_report("conjecture1", lhs, nu * (x + z), PROVED_TOL, seed=seed, diagnostics=diag, inconclusive=not converged)


def check_entropy_bound(phi: Channel, M, *, smin: float | None = None, seed=None) -> CheckReport:
    """S((I (x) Phi)(M)) >= S_min(Phi) + Tr X S(xi) + Tr Z S(zeta).

    Reported with lhs = the bound and rhs = the output entropy.  Instances with a
    (numerically) zero diagonal block are returned as inconclusive.
    """
    M, K = _as_block_psd(M, phi)
    if abs(np.trace(M).real - 1) > mc.TRACE_TOL:
        raise InvalidInput("M must have unit trace")
    X, _, Z = mc.qubit_blocks(M)
    tx, tz = np.trace(X).real, np.trace(Z).real
    if tx < DEGENERATE_TRACE or tz < DEGENERATE_TRACE:
        return make_report("entropy-bound", math.nan, math.nan, ENTROPY_BOUND_TOL, seed=seed,
                           diagnostics={"skipped": "degenerate block", "trace_X": tx, "trace_Z": tz},
                           inconclusive=True)
    converged = True
    if smin is None:
        res = s_min(phi, derivative_h=None)
        smin, converged = res.value, res.converged
    s_xi = mc.von_neumann_entropy(X / tx)
    s_zeta = mc.von_neumann_entropy(Z / tz)
    bound = smin + tx * s_xi + tz * s_zeta
    out = mc.von_neumann_entropy(apply_on_second(phi, M, K))
    diag = {"s_min": smin, "trace_X": tx, "trace_Z": tz, "S_xi": s_xi, "S_zeta": s_zeta, "K": K}
    return make_report("entropy-bound", bound, out, ENTROPY_BOUND_TOL, seed=seed, diagnostics=diag, inconclusive=not converged)


# --------------------------------------------------------------------------
# the depolarizing (Lieb-Ruskai) case
# --------------------------------------------------------------------------


def lieb_thirring_sides(F, G, p: float) -> tuple[float, float]:
    """(Tr (F^1/2 G F^1/2)^p, Tr F^p G^p) for PSD F, G."""
    Fh = mc.sqrtm_psd(F)
    lhs = mc.schatten_power(mc.hermitize(Fh @ G @ Fh), p)
    rhs = float(np.trace(mc.powm_psd(F, p) @ mc.powm_psd(G, p)).real)
    return lhs, rhs


def check_lieb_thirring(F, G, p: float, *, seed=None) -> CheckReport:
    lhs, rhs = lieb_thirring_sides(F, G, p)
    scale = max(abs(rhs), 1.0)
    return make_report("lieb-thirring", lhs, rhs, PROVED_TOL * scale, seed=seed, diagnostics={"p": p})


def check_lieb_ruskai(X, V, lam: float, p: float, *, seed=None) -> CheckReport:
    """||[[X, lam Y], [lam Y*, X]]||_p <= 2 nu_p(depolarizing lam) ||X||_p, Y = sqrt(X) V sqrt(X).

    Diagnostics carry the embedded steps: the Lieb-Thirring inequality for
    F = diag(X, X) and G = [[I, lam V], [lam V*, I]], the spectrum {1 +- lam}
    of G, its explicit diagonalization and the closing trace identity.
    """
    X = mc.as_hermitian(X)
    if np.linalg.eigvalsh(X)[0] < -mc.EIG_TOL:
        raise InvalidInput("X must be positive semidefinite")
    V = np.asarray(V, dtype=complex)
    K = X.shape[0]
    if V.shape != (K, K) or np.abs(V @ V.conj().T - np.eye(K)).max() > 1e-10:
        raise InvalidInput("V must be a unitary of the same size as X")
    if not 0.0 <= lam <= 1.0:
        raise InvalidParameter("lambda must lie in [0, 1]")
    if not p >= 1:
        raise InvalidParameter("p must be >= 1")

    Xh = mc.sqrtm_psd(X)
    Y = Xh @ V @ Xh
    B = np.block([[X, lam * Y], [lam * Y.conj().T, X]])
    lhs = mc.schatten_norm(mc.hermitize(B), p)
    nx = mc.schatten_norm(X, p)
    rhs = 2 * nu_p_depolarizing(lam, p) * nx

    I = np.eye(K)
    O = np.zeros((K, K))
    F = np.block([[X, O], [O, X]])
    Fh = np.block([[Xh, O], [O, Xh]])
    G = np.block([[I, lam * V], [lam * V.conj().T, I]])
    lt = check_lieb_thirring(F, G, p, seed=seed)
    lt.check_name = "lieb-ruskai/lieb-thirring"
    spec = np.linalg.eigvalsh(mc.hermitize(G))
    expected = np.concatenate([np.full(K, 1 - lam), np.full(K, 1 + lam)])
    spec_rep = make_identity_report("lieb-ruskai/G-spectrum", 0.0, float(np.abs(spec - expected).max()), 1e-12, seed=seed)
    U = np.block([[I, V], [V.conj().T, -I]])
    D = np.diag(np.concatenate([np.full(K, 1 + lam), np.full(K, 1 - lam)]))
    diag_rep = make_identity_report(
        "lieb-ruskai/G-diagonalization", 0.0, float(np.abs(0.5 * U @ D @ U - G).max()), 1e-12, seed=seed
    )
    closing = ((1 + lam) ** p + (1 - lam) ** p) * nx**p
    diag = {
        "p": p,
        "lambda": lam,
        "norm_X": nx,
        "factorization_err": float(np.abs(Fh @ G @ Fh - B).max()),
        "closing_identity_err": abs(lt.rhs - closing),
    }
    rep = make_report("lieb-ruskai", lhs, rhs, PROVED_TOL, seed=seed, diagnostics=diag)
    rep.subreports = [lt, spec_rep, diag_rep]
    return rep


# --------------------------------------------------------------------------
# multiplicativity and additivity for product channels
# --------------------------------------------------------------------------


def _is_unitary_channel(phi: Channel) -> bool:
    if not isinstance(phi, KrausChannel) or len(phi.ops) != 1:
        return False
    U = phi.ops[0]
    return U.shape[0] == U.shape[1] and np.abs(U @ U.conj().T - np.eye(U.shape[0])).max() <= 1e-12


def theorem_applies(phi: Channel, p: float) -> str | None:
    """Name of the proven case covering multiplicativity for ``phi`` at ``p``, if any."""
    if isinstance(phi, CQChannel):
        return "cq"
    if isinstance(phi, QCChannel):
        return "qc"
    if _is_unitary_channel(phi):
        return "unitary"
    if p == 1:
        return "p=1"
    if phi.dims == (2, 2):
        if p == 2:
            return "qubit-p2"
        if float(p).is_integer() and satisfies_translation_condition(affine_form(phi)[0]):
            return "qubit-translation-condition"
    return None


def check_multiplicativity(
    omega: Channel,
    phi: Channel,
    p: float,
    *,
    restarts: int = 64,
    seed=None,
    opt_seed: int = 0,
    nu_omega=None,
    nu_phi=None,
    tol: float = OPTIMIZER_TOL,
    lower_tol: float = PROVED_TOL * 100,
) -> CheckReport:
    """nu_p(Omega (x) Phi) against nu_p(Omega) nu_p(Phi).

    The main report tests joint <= product + tol (the multiplicativity claim);
    its sub-report tests joint >= product - lower_tol, which always holds.
    ``nu_omega``/``nu_phi`` accept precomputed :class:`PurityResult` objects.
    The joint search is seeded with the product of the factor maximizers.
    """
    if omega.d_in * phi.d_in > MAX_NU_DIM:
        raise InvalidInput(f"product input dimension {omega.d_in * phi.d_in} exceeds {MAX_NU_DIM}")
    a = nu_omega or nu_p(omega, p, restarts=restarts, seed=opt_seed)
    b = nu_phi or nu_p(phi, p, restarts=restarts, seed=opt_seed)
    joint = nu_p(tensor_channels(omega, phi), p, restarts=restarts, seed=opt_seed,
                 init=(np.kron(a.argmax_vector, b.argmax_vector),))
    product = a.value * b.value
    converged = a.converged and b.converged and joint.converged
    diag = {
        "p": p,
        "theorem": theorem_applies(phi, p),
        "nu_omega": a.value,
        "nu_phi": b.value,
        "joint_grad_norm": joint.grad_norm,
        "converged": converged,
        "restarts": restarts,
    }
    rep = make_report("multiplicativity", joint.value, product, tol, seed=seed, diagnostics=diag,
                      inconclusive=not converged)
    rep.subreports = [make_report("multiplicativity/lower", product, joint.value, lower_tol, seed=seed)]
    return rep


def product_ensemble(ca, cb) -> list:
    """(prob, vector) pairs of the product of two optimal ensembles."""
    pairs = []
    for pa, ra in zip(ca.ensemble.probs, ca.ensemble.states):
        va = _top_vector(ra)
        for pb, rb in zip(cb.ensemble.probs, cb.ensemble.states):
            pairs.append((pa * pb, np.kron(va, _top_vector(rb))))
    return pairs


def _top_vector(rho):
    w, v = np.linalg.eigh(rho)
    return v[:, -1]


def check_additivity(
    omega: Channel,
    phi: Channel,
    *,
    seed=None,
    opt_seed: int = 0,
    chi_tol: float = CHI_ADDITIVITY_TOL,
    smin_tol: float = OPTIMIZER_TOL,
    factor_gap_tol: float = OPTIMIZER_TOL,
    restarts: int = 16,
) -> tuple[CheckReport, CheckReport]:
    """Holevo capacity and minimal entropy additivity for Omega (x) Phi.

    Returns ``(chi_report, smin_report)``.  The chi report tests
    chi*(Omega (x) Phi) <= chi*(Omega) + chi*(Phi) + tol (superadditivity holds by
    construction since the joint search starts from the product ensemble).  The
    S_min report tests S_min(Omega (x) Phi) >= S_min(Omega) + S_min(Phi) - tol.
    """
    if omega.d_in * phi.d_in > MAX_NU_DIM:
        raise InvalidInput(f"product input dimension {omega.d_in * phi.d_in} exceeds {MAX_NU_DIM}")
    both = tensor_channels(omega, phi)
    ca = chi_star(omega, seed=opt_seed, restarts=restarts)
    cb = chi_star(phi, seed=opt_seed, restarts=restarts)
    cj = chi_star(both, seed=opt_seed, restarts=restarts, init=product_ensemble(ca, cb))
    factors_ok = ca.duality_gap <= factor_gap_tol and cb.duality_gap <= factor_gap_tol
    unital_pair = all(
        isinstance(c, QubitAffineChannel) and c.params.unital for c in (omega, phi)
    )
    scope = "cq" if isinstance(phi, CQChannel) else "qc" if isinstance(phi, QCChannel) else (
        "unital-qubits" if unital_pair else None
    )
    chi_diag = {
        "chi_omega": ca.chi_star,
        "chi_phi": cb.chi_star,
        "gap_omega": ca.duality_gap,
        "gap_phi": cb.duality_gap,
        "gap_joint": cj.duality_gap,
        "superadditivity_margin": cj.chi_star - ca.chi_star - cb.chi_star,
        "scope": scope,
    }
    chi_rep = make_report("additivity/chi", cj.chi_star, ca.chi_star + cb.chi_star, chi_tol, seed=seed,
                          diagnostics=chi_diag, inconclusive=not (factors_ok and cj.duality_gap <= chi_tol))

    sa = s_min(omega, seed=opt_seed, derivative_h=None)
    sb = s_min(phi, seed=opt_seed, derivative_h=None)
    sj = s_min(both, seed=opt_seed, derivative_h=None, init=(np.kron(sa.argmin_vector, sb.argmin_vector),))
    s_diag = {"s_min_omega": sa.value, "s_min_phi": sb.value, "scope": scope}
    s_rep = make_report("additivity/s-min", sa.value + sb.value, sj.value, smin_tol, seed=seed, diagnostics=s_diag,
                        inconclusive=not (sa.converged and sb.converged and sj.converged))
    return chi_rep, s_rep


# --------------------------------------------------------------------------
# CQ / QC proof identities
# --------------------------------------------------------------------------


def _measurement_split(tau, K: int, povm) -> list:
    """(n_b, tau_b) with n_b = Tr (I (x) X_b) tau and tau_b = Tr_2((I (x) X_b) tau) / n_b."""
    N = povm[0].shape[0]
    out = []
    for X in povm:
        Xh = mc.sqrtm_psd(mc.hermitize(X))
        L = np.kron(np.eye(K), Xh)
        part = mc.partial_trace(L @ tau @ L, (K, N), keep="first")
        n = float(np.trace(part).real)
        out.append((n, mc.hermitize(part / n) if n > 0 else None))
    return out


def _check_tau(tau, K, N):
    tau = mc.as_density(tau)
    if tau.shape != (K * N, K * N):
        raise InvalidInput(f"tau must act on C^{K} (x) C^{N}")
    return tau


def check_cq_decomposition(omega: Channel, phi: Channel, tau, *, seed=None) -> CheckReport:
    """(Omega (x) Phi)(tau) = sum_b n_b Omega(tau_b) (x) Phi(X_b) for CQ or QC Phi."""
    if not isinstance(phi, (CQChannel, QCChannel)):
        raise InvalidInput("decomposition needs a CQ or QC channel")
    K = omega.d_in
    tau = _check_tau(tau, K, phi.d_in)
    direct = tensor_channels(omega, phi).apply(tau)
    rebuilt = np.zeros_like(direct)
    for (n, tb), X, Q in zip(_measurement_split(tau, K, phi.povm), phi.povm, phi.outputs):
        if tb is not None:
            rebuilt += n * np.kron(omega.apply(tb), Q)
    err = float(np.abs(direct - rebuilt).max())
    return make_identity_report("cq-decomposition", 0.0, err, 1e-12, seed=seed)


def check_qc_norm_chain(phi: QCChannel, theta, p: float, *, seed=None) -> CheckReport:
    """Tr Phi(theta)^p = sum_b (Tr theta X_b)^p for a QC channel."""
    if not isinstance(phi, QCChannel):
        raise InvalidInput("norm chain needs a QC channel")
    theta = mc.as_density(theta)
    lhs = mc.schatten_power(phi.apply(theta), p)
    rhs = float(sum(max(np.trace(theta @ X).real, 0.0) ** p for X in phi.povm))
    return make_identity_report("qc-norm-chain", lhs, rhs, 1e-12, seed=seed, diagnostics={"p": p})


def check_qc_identity(omega: Channel, phi: QCChannel, tau, *, rho_omega=None, rho_phi=None, seed=None,
                      opt_seed: int = 0) -> CheckReport:
    """S((Omega (x) Phi)(tau) | rho_O (x) rho_P) = sum_b n_b S(Omega(tau_b) | rho_O) + S(Phi(theta) | rho_P).

    Reference outputs default to the optimal average outputs from :func:`chi_star`.
    The identity needs rho_phi diagonal in the output basis of Phi; any PSD
    rho_omega works.  A support violation makes both sides +inf.
    """
    if not isinstance(phi, QCChannel):
        raise InvalidInput("the identity needs a QC channel")
    K, N = omega.d_in, phi.d_in
    tau = _check_tau(tau, K, N)
    if rho_omega is None:
        rho_omega = chi_star(omega, seed=opt_seed).avg_output
    if rho_phi is None:
        rho_phi = chi_star(phi, seed=opt_seed).avg_output
    rho_omega, rho_phi = mc.as_density(rho_omega), mc.as_density(rho_phi)
    B = phi.basis
    in_basis = B.conj() @ rho_phi @ B.T
    if np.abs(in_basis - np.diag(np.diag(in_basis))).max() > 1e-10:
        raise InvalidInput("rho_phi must be diagonal in the output basis of the QC channel")

    lhs = mc.relative_entropy(tensor_channels(omega, phi).apply(tau), np.kron(rho_omega, rho_phi))
    theta = mc.partial_trace(tau, (K, N), keep="second")
    rhs = mc.relative_entropy(phi.apply(theta), rho_phi)
    weights = []
    for n, tb in _measurement_split(tau, K, phi.povm):
        weights.append(n)
        if tb is not None and n > 1e-15:
            rhs += n * mc.relative_entropy(omega.apply(tb), rho_omega)
    n_theta = [float(np.trace(theta @ X).real) for X in phi.povm]
    diag = {"n_b": weights, "n_b_err": float(np.max(np.abs(np.array(weights) - n_theta)))}
    return make_identity_report("qc-identity", lhs, rhs, IDENTITY_TOL, seed=seed, diagnostics=diag)


# --------------------------------------------------------------------------
# block decomposition for qubit channels in canonical form
# --------------------------------------------------------------------------


@dataclass
class BlockDecomposition:
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    W: np.ndarray
    c: tuple  # (c++, c-+, c+-, c--)
    R: tuple  # (R11, R12, R21, R22)
    m_prime: np.ndarray
    r: tuple  # (r11, r12, r22)
    p: int
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.all_passed for c in self.checks)


def block_coefficients(lam, t) -> tuple:
    """(c++, c-+, c+-, c--) = ((1 + lam3 + t3)/2, (1 - lam3 + t3)/2, (1 + lam3 - t3)/2, (1 - lam3 - t3)/2)."""
    l3, t3 = lam[2], t[2]
    return ((1 + l3 + t3) / 2, (1 - l3 + t3) / 2, (1 + l3 - t3) / 2, (1 - l3 - t3) / 2)


def trace_expansion(R: tuple, p: int) -> complex:
    """Sum over product-basis index tuples of Tr[E_{i1 j1} ... E_{ip jp}] Tr[R_{i1 j1} ... R_{ip jp}]."""
    blocks = {(0, 0): R[0], (0, 1): R[1], (1, 0): R[2], (1, 1): R[3]}
    total = 0.0 + 0.0j
    for idx in itertools.product(blocks, repeat=p):
        # Tr of a product of matrix units is 1 iff the indices chain and close
        if any(idx[k][1] != idx[(k + 1) % p][0] for k in range(p)):
            continue
        prod = blocks[idx[0]]
        for key in idx[1:]:
            prod = prod @ blocks[key]
        total += np.trace(prod)
    return total


def block_decompose(M, phi: QubitAffineChannel, p: int, *, max_expansion_p: int = MAX_EXPANSION_P,
                    seed=None) -> BlockDecomposition:
    """Intermediates of (I (x) Phi)(M) for a canonical qubit channel and the three bounds on them.

    Sub-checks: (a) ||R_ij||_p <= r_ij, (b) Tr (I (x) Phi)(M)^p <= Tr Phi(m')^p and
    (c) the product-basis trace expansion reproduces Tr (I (x) Phi)(M)^p
    (only for p <= ``max_expansion_p``; the term count grows as 4^p).
    """
    if not isinstance(phi, QubitAffineChannel) or not is_canonical_condition_form(phi.params):
        raise InvalidParameter(
            "block_decompose needs a qubit-affine channel with t2 = 0, t1 >= 0, lam1 >= lam2 >= 0; "
            "use channels.canonicalize_qubit first"
        )
    if not float(p).is_integer() or p < 1:
        raise InvalidParameter("p must be a positive integer")
    p = int(p)
    M, K = _as_block_psd(M, phi)
    lam, t = phi.params.lam, phi.params.t
    X, Y, Z = mc.qubit_blocks(M)
    W = (X + Z) / 2
    Y1 = (Y + Y.conj().T) / 2
    Y2 = 1j * (Y - Y.conj().T) / 2
    cpp, cmp_, cpm, cmm = c = block_coefficients(lam, t)
    R11 = cpp * X + cmp_ * Z
    R12 = t[0] * W + lam[0] * Y1 - 1j * lam[1] * Y2
    R21 = t[0] * W + lam[0] * Y1 + 1j * lam[1] * Y2
    R22 = cmm * X + cpm * Z
    R = (R11, R12, R21, R22)

    x, z, y = mc.schatten_norm(X, p), mc.schatten_norm(Z, p), mc.schatten_norm(Y, p)
    m_prime = np.array([[x, y], [y, z]])
    r = (cpp * x + cmp_ * z, t[0] * (x + z) / 2 + lam[0] * y, cmm * x + cpm * z)

    out = mc.hermitize(apply_on_second(phi, M, K))
    checks = [
        make_identity_report("block-decompose/reassembly", 0.0,
                             float(np.abs(mc.from_qubit_blocks(X, Y, Z) - M).max()), 1e-14, seed=seed),
        make_identity_report("block-decompose/R-blocks", 0.0,
                             float(np.abs(mc.from_qubit_blocks(R11, R12, R22, R21) - out).max()), 1e-12, seed=seed),
        make_report("block-decompose/c-nonnegative", -min(c), 0.0, 1e-12, seed=seed),
        make_report("block-decompose/holder", y, math.sqrt(x * z), 1e-10, seed=seed),
    ]
    for name, Rij, rij in (("a-R11", R11, r[0]), ("a-R12", R12, r[1]), ("a-R22", R22, r[2])):
        nr = mc.schatten_norm(Rij, p)
        checks.append(make_report(f"block-decompose/{name}", nr, rij, PROVED_TOL * max(1.0, rij), seed=seed))
    lhs_b = mc.schatten_power(out, p)
    rhs_b = mc.schatten_power(mc.hermitize(phi.apply_linear(m_prime)), p)
    checks.append(make_report("block-decompose/b-trace-power", lhs_b, rhs_b, PROVED_TOL, seed=seed))
    if p <= max_expansion_p:
        # the expansion is an identity for Tr A^p; it equals Tr |A|^p whenever A >= 0 (CP Phi)
        w = np.linalg.eigvalsh(out)
        expansion = trace_expansion(R, p)
        checks.append(make_identity_report("block-decompose/c-expansion", float(np.sum(w**p)), expansion.real,
                                           EXPANSION_TOL, seed=seed,
                                           diagnostics={"imag": float(expansion.imag), "min_output_eig": float(w[0])}))
    return BlockDecomposition(X, Y, Z, W, c, R, m_prime, r, p, checks)
