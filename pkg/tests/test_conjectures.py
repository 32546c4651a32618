import math

import numpy as np
import pytest

from qadditivity import channels as ch
from qadditivity import conjectures as cj
from qadditivity import matcore as mc
from qadditivity.errors import InvalidInput, InvalidParameter
from qadditivity.purity import nu_p, s_min

import oracles


def _proj(v):
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


# --- reports -------------------------------------------------------------------


def test_report_pass_rule():
    assert cj.make_report("x", 1.0, 1.0 - 5e-11, 1e-10).passed
    assert not cj.make_report("x", 1.0, 1.0 - 2e-10, 1e-10).passed
    r = cj.make_identity_report("x", 1.0, 1.0 + 2e-9, 1e-8)
    assert r.passed and r.gap == pytest.approx(-2e-9)
    assert cj.make_identity_report("x", math.inf, math.inf, 1e-8).passed
    assert not cj.make_identity_report("x", math.inf, 1.0, 1e-8).passed
    for r in (cj.make_report("y", 0.3, 0.1, 1e-3), cj.make_identity_report("y", 0.3, 0.1, 1e-3)):
        assert r.passed == (r.gap >= -r.tolerance)


# --- random blocks ---------------------------------------------------------------


def test_random_block_psd_properties():
    rng = mc.SeededRng(1)
    for _ in range(1000):
        K = int(rng.integers(1, 5))
        M = cj.random_block_psd(K, rng)
        assert np.linalg.eigvalsh(M).min() >= -1e-10
        assert abs(np.trace(M).real - 1) <= 1e-12
        X, Y, Z = mc.qubit_blocks(M)
        assert oracles.block_psd_min_eig(X, Y, Z) >= -1e-10


def test_random_block_examples():
    rng = mc.SeededRng(2)
    X = mc.random_psd(3, rng)
    Xh = mc.sqrtm_psd(X)
    # R = 0: block diagonal
    M0 = mc.from_qubit_blocks(X, np.zeros((3, 3)), X)
    assert np.allclose(mc.qubit_blocks(M0)[1], 0)
    # R unitary with X = Z: rank at most K
    U = mc.random_unitary(3, rng)
    M = mc.from_qubit_blocks(X, Xh @ U @ Xh, X)
    assert np.sum(np.linalg.eigvalsh(M) > 1e-10) <= 3
    with pytest.raises(InvalidParameter):
        cj.random_block_psd(0, rng)


# --- conjecture 1 ---------------------------------------------------------------


def test_conjecture1_rank_one_projector_tight_scale():
    rng = mc.SeededRng(3)
    phi = ch.random_channel(2, 2, rng)
    M = mc.random_pure(6, rng)
    rep = cj.check_conjecture1(phi, M, 2.5)
    assert rep.rhs == pytest.approx(rep.diagnostics["nu_p"] * np.trace(M).real, abs=1e-12)
    assert rep.passed


def test_conjecture1_identity_reduces_to_block_norm_bound():
    rng = mc.SeededRng(4)
    for _ in range(50):
        M = cj.random_block_psd(3, rng)
        X, _, Z = mc.qubit_blocks(M)
        rep = cj.check_conjecture1(ch.identity(2), M, 3.0)
        assert rep.lhs == pytest.approx(mc.schatten_norm(M, 3), abs=1e-14)
        assert rep.rhs == pytest.approx(mc.schatten_norm(X, 3) + mc.schatten_norm(Z, 3), abs=1e-12)
        assert rep.passed


def test_conjecture1_uses_closed_form_for_depolarizing():
    rep = cj.check_conjecture1(ch.depolarizing(0.3), cj.random_block_psd(2, mc.SeededRng(5)), 2)
    assert rep.diagnostics["nu_source"] == "closed-form"


def test_conjecture1_rejects_non_psd():
    with pytest.raises(InvalidInput):
        cj.check_conjecture1(ch.identity(2), np.diag([1.0, -0.5, 0.5, 0.0]), 2)


def test_conjecture1_p2_random_sweep():
    rng = mc.SeededRng(6)
    for _ in range(100):
        phi = ch.random_channel(2, 2, rng)
        rep = cj.check_conjecture1(phi, cj.random_block_psd(int(rng.integers(2, 5)), rng), 2)
        assert rep.passed and not rep.inconclusive


# --- entropy bound ------------------------------------------------------------------


def test_entropy_bound_identity_product_state():
    rng = mc.SeededRng(7)
    rho, sigma = mc.random_density(3, rng), mc.random_density(2, rng)
    rep = cj.check_entropy_bound(ch.identity(2), np.kron(rho, sigma))
    assert rep.diagnostics["s_min"] == pytest.approx(0.0, abs=1e-10)
    assert rep.passed


def test_entropy_bound_completely_depolarizing():
    rng = mc.SeededRng(8)
    phi = ch.qubit_affine((0, 0, 0))
    for _ in range(20):
        M = cj.random_block_psd(3, rng)
        rep = cj.check_entropy_bound(phi, M)
        marg = mc.partial_trace(M, (3, 2), keep="first")
        assert rep.rhs == pytest.approx(mc.von_neumann_entropy(np.kron(marg, np.eye(2) / 2)), abs=1e-12)
        assert rep.lhs >= math.log(2) - 1e-12
        assert rep.passed


def test_entropy_bound_maximally_mixed():
    # the output is I/K (x) Phi(I/2), which is maximally mixed exactly when Phi is unital
    K = 3
    rng = mc.SeededRng(9)
    rep = cj.check_entropy_bound(ch.random_qubit_affine(rng, "unital"), np.eye(2 * K) / (2 * K))
    assert rep.rhs == pytest.approx(math.log(2 * K), abs=1e-12)
    assert rep.passed
    assert cj.check_entropy_bound(ch.random_channel(2, 2, rng), np.eye(2 * K) / (2 * K)).passed


def test_entropy_bound_degenerate_and_trace_checks():
    M = np.kron(np.eye(2) / 2, np.diag([1.0, 0.0]))
    rep = cj.check_entropy_bound(ch.identity(2), M)
    assert rep.inconclusive and rep.diagnostics["skipped"] == "degenerate block"
    with pytest.raises(InvalidInput):
        cj.check_entropy_bound(ch.identity(2), 2 * np.eye(4) / 4)


# --- Lieb-Ruskai ----------------------------------------------------------------------


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_lieb_ruskai_equality_cases(p):
    X = mc.random_psd(3, mc.SeededRng(10))
    r0 = cj.check_lieb_ruskai(X, np.eye(3), 0.0, p)
    assert r0.lhs == pytest.approx(2 ** (1 / p) * mc.schatten_norm(X, p), abs=1e-10)
    assert abs(r0.gap) <= 1e-10
    r1 = cj.check_lieb_ruskai(X, np.eye(3), 1.0, p)
    assert r1.lhs == pytest.approx(2 * mc.schatten_norm(X, p), abs=1e-10)
    assert abs(r1.gap) <= 1e-10
    assert r0.all_passed and r1.all_passed


def test_lieb_ruskai_random_and_oracle():
    rng = mc.SeededRng(11)
    for _ in range(100):
        K = int(rng.integers(1, 5))
        X, V, lam = mc.random_psd(K, rng), mc.random_unitary(K, rng), float(rng.uniform())
        p = float(rng.choice([1.5, 2.0, 3.0]))
        rep = cj.check_lieb_ruskai(X, V, lam, p)
        assert rep.all_passed
        assert rep.lhs == pytest.approx(oracles.lieb_ruskai_lhs(X, V, lam, p), rel=1e-10)
        assert rep.diagnostics["closing_identity_err"] <= 1e-9 * max(1.0, rep.subreports[0].rhs)


def test_lieb_ruskai_rejects_non_unitary():
    X = mc.random_psd(2, mc.SeededRng(12))
    with pytest.raises(InvalidInput):
        cj.check_lieb_ruskai(X, np.array([[1.0, 0.1], [0.0, 1.0]]), 0.5, 2)
    with pytest.raises(InvalidParameter):
        cj.check_lieb_ruskai(X, np.eye(2), 1.5, 2)


def test_lieb_thirring_random_pairs():
    rng = mc.SeededRng(13)
    for i in range(1000):
        d = int(rng.integers(2, 5))
        F, G = mc.random_psd(d, rng), mc.random_psd(d, rng)
        p = (1.5, 2.0, 3.0)[i % 3]
        assert cj.check_lieb_thirring(F, G, p).passed


# --- multiplicativity / additivity ---------------------------------------------------


def test_theorem_detection():
    rng = mc.SeededRng(14)
    assert cj.theorem_applies(ch.random_cq(2, 2, rng), 3.3) == "cq"
    assert cj.theorem_applies(ch.random_qc(2, 3, rng), 1.7) == "qc"
    assert cj.theorem_applies(ch.identity(2), 2.5) == "unitary"
    assert cj.theorem_applies(ch.random_channel(2, 2, rng, rank=2), 2) == "qubit-p2"
    assert cj.theorem_applies(ch.depolarizing(0.3), 3) == "qubit-translation-condition"
    assert cj.theorem_applies(ch.qubit_affine((0.9, 0.5, 0.2), (0, 0.05, 0.05)), 3) is None
    assert cj.theorem_applies(ch.depolarizing(0.3), 2.5) is None


def test_multiplicativity_identity_factor():
    rng = mc.SeededRng(15)
    om = ch.random_channel(3, 3, rng)
    rep = cj.check_multiplicativity(om, ch.identity(2), 2.5, restarts=32)
    assert rep.lhs == pytest.approx(nu_p(om, 2.5).value, abs=1e-6)
    assert rep.all_passed


def test_multiplicativity_qubit_with_dephasing_qc():
    rng = mc.SeededRng(16)
    deph = ch.make_qc([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    rep = cj.check_multiplicativity(ch.random_channel(2, 2, rng), deph, 3)
    assert abs(rep.gap) <= 1e-4 and rep.all_passed and rep.diagnostics["theorem"] == "qc"


def test_multiplicativity_qutrit_with_depolarizing():
    rng = mc.SeededRng(17)
    rep = cj.check_multiplicativity(ch.random_channel(3, 3, rng), ch.depolarizing(0.5), 2, restarts=32)
    assert abs(rep.gap) <= 1e-4 and rep.all_passed


def test_multiplicativity_dimension_guard():
    with pytest.raises(InvalidInput):
        cj.check_multiplicativity(ch.identity(3), ch.identity(6), 2)


def test_additivity_identity_pair():
    chi_rep, s_rep = cj.check_additivity(ch.identity(2), ch.identity(2))
    assert chi_rep.lhs == pytest.approx(2 * math.log(2), abs=1e-8)
    assert chi_rep.all_passed and s_rep.all_passed


def test_additivity_unital_pair():
    rng = mc.SeededRng(18)
    om, phi = ch.random_qubit_affine(rng, "unital"), ch.random_qubit_affine(rng, "unital")
    chi_rep, s_rep = cj.check_additivity(om, phi)
    assert abs(chi_rep.gap) <= 2e-3 and abs(s_rep.gap) <= 2e-3
    assert chi_rep.diagnostics["scope"] == "unital-qubits"


def test_additivity_with_cq():
    rng = mc.SeededRng(19)
    chi_rep, _ = cj.check_additivity(ch.random_channel(2, 2, rng), ch.random_cq(2, 2, rng))
    assert abs(chi_rep.gap) <= 2e-3 and chi_rep.passed and not chi_rep.inconclusive


# --- CQ / QC identities ----------------------------------------------------------------


def test_qc_identity_product_state():
    rng = mc.SeededRng(20)
    om, phi = ch.random_channel(2, 2, rng), ch.random_qc(2, 3, rng)
    tau = np.kron(mc.random_density(2, rng), mc.random_density(2, rng))
    rep = cj.check_qc_identity(om, phi, tau)
    assert math.isfinite(rep.lhs) and rep.passed


def test_qc_identity_entangled_dephasing():
    psi = np.array([1, 0, 0, 1]) / math.sqrt(2)
    deph = ch.make_qc([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    rep = cj.check_qc_identity(ch.identity(2), deph, np.outer(psi, psi))
    assert rep.passed and rep.lhs == pytest.approx(math.log(2), abs=1e-8)


def test_qc_identity_identity_omega_sweep():
    rng = mc.SeededRng(21)
    phi = ch.random_qc(2, 3, rng)
    ref = ch.identity(2)
    from qadditivity.capacity import chi_star

    rho_o, rho_p = chi_star(ref).avg_output, chi_star(phi).avg_output
    for _ in range(100):
        tau = mc.random_density(4, rng)
        assert cj.check_qc_identity(ref, phi, tau, rho_omega=rho_o, rho_phi=rho_p).passed


def test_qc_identity_support_violation_both_infinite():
    deph = ch.make_qc([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    tau = np.kron(np.diag([0.0, 1.0]), np.eye(2) / 2)
    rep = cj.check_qc_identity(ch.identity(2), deph, tau, rho_omega=np.diag([1.0, 0.0]), rho_phi=np.eye(2) / 2)
    assert rep.lhs == math.inf and rep.rhs == math.inf and rep.passed


def test_qc_identity_requires_qc_and_diagonal_reference():
    rng = mc.SeededRng(22)
    with pytest.raises(InvalidInput):
        cj.check_qc_identity(ch.identity(2), ch.random_cq(2, 2, rng), np.eye(4) / 4)
    deph = ch.make_qc([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    with pytest.raises(InvalidInput):
        cj.check_qc_identity(ch.identity(2), deph, np.eye(4) / 4, rho_omega=np.eye(2) / 2, rho_phi=_proj([1, 1]))


def test_cq_decomposition_and_qc_norm_chain():
    rng = mc.SeededRng(23)
    for _ in range(20):
        om = ch.random_channel(2, 3, rng)
        tau = mc.random_density(4, rng)
        assert cj.check_cq_decomposition(om, ch.random_cq(2, 2, rng), tau).passed
        assert cj.check_cq_decomposition(om, ch.random_qc(2, 3, rng), tau).passed
        assert cj.check_qc_norm_chain(ch.random_qc(3, 4, rng), mc.random_density(3, rng), float(rng.uniform(1, 5))).passed


# --- block decomposition ------------------------------------------------------------------


def test_block_decompose_example_channel():
    # note: these parameters sit just outside the CP set; the block algebra does not need CP
    phi = ch.qubit_affine((0.8, 0.5, 0.3), (0.1, 0.0, 0.0))
    rng = mc.SeededRng(24)
    for _ in range(20):
        bd = cj.block_decompose(cj.random_block_psd(3, rng), phi, 3)
        assert bd.passed, [c.check_name for c in bd.checks if not c.passed]


def test_block_decompose_block_diagonal():
    rng = mc.SeededRng(25)
    X, Z = mc.random_density(2, rng), mc.random_density(2, rng)
    M = mc.from_qubit_blocks(X, np.zeros((2, 2)), Z) / 2
    phi = ch.QubitAffineChannel(ch.canonicalize_qubit(ch.random_qubit_affine(rng, "single_t").params).params)
    bd = cj.block_decompose(M, phi, 2)
    assert np.allclose(bd.R[1], phi.params.t[0] * bd.W)
    assert bd.m_prime[0, 1] == 0 and bd.passed


def test_block_decompose_identity():
    M = cj.random_block_psd(3, mc.SeededRng(26))
    bd = cj.block_decompose(M, ch.qubit_affine((1, 1, 1)), 4)
    assert bd.c == (1.0, 0.0, 1.0, 0.0)
    assert np.allclose(bd.R[0], bd.X) and np.allclose(bd.R[3], bd.Z)
    assert bd.passed


def test_block_decompose_requires_canonical_form():
    M = cj.random_block_psd(2, mc.SeededRng(27))
    with pytest.raises(InvalidParameter, match="canonicalize_qubit"):
        cj.block_decompose(M, ch.qubit_affine((0.5, 0.8, 0.1)), 2)
    with pytest.raises(InvalidParameter):
        cj.block_decompose(M, ch.qubit_affine((0.8, 0.5, 0.1)), 2.5)


def test_block_invariants_and_expansion_cap():
    rng = mc.SeededRng(28)
    phi = ch.QubitAffineChannel(ch.canonicalize_qubit(ch.random_qubit_affine(rng, "condition").params).params)
    M = cj.random_block_psd(4, rng)
    bd = cj.block_decompose(M, phi, 5)
    names = {c.check_name for c in bd.checks}
    assert "block-decompose/c-expansion" not in names
    x, y, z = bd.m_prime[0, 0], bd.m_prime[0, 1], bd.m_prime[1, 1]
    assert y <= math.sqrt(x * z) + 1e-10 and min(bd.c) >= -1e-12
    assert bd.passed


def test_trace_expansion_matches_direct_power():
    rng = mc.SeededRng(29)
    R = tuple(mc.complex_gaussian((2, 2), rng) for _ in range(4))
    # sum of R_ij (x) E_ij in the qubit-second layout
    full =mc.from_qubit_blocks(R[0], R[1], R[3], R[2])
    for p in (1, 2, 3, 4):
        assert cj.trace_expansion(R, p) == pytest.approx(np.trace(np.linalg.matrix_power(full, p)), abs=1e-10)
