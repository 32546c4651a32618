"""Seeded instance families and a deterministic parallel sweep runner.

Instance seeds are derived up front from the master seed, each instance draws
everything from ``SeededRng(instance_seed)``, and results are sorted by
instance seed.  The report is therefore identical for any worker count.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import channels as ch
from . import conjectures as cj
from . import matcore as mc
from .errors import InvalidParameter

WORKERS_ENV = "QADD_WORKERS"
MAX_REGENERATE = 100


@dataclass(frozen=True)
class SweepParams:
    p: float | None = None
    K: int | None = None
    family: str | None = None
    regime: str = "mixed"
    restarts: int | None = None


def instance_seeds(master_seed: int, trials: int) -> list[int]:
    """``trials`` distinct 63-bit seeds derived from the master seed."""
    if trials < 1:
        raise InvalidParameter("trials must be at least 1")
    if master_seed is None or int(master_seed) < 0:
        raise InvalidParameter("a non-negative master seed is required")
    ss = np.random.SeedSequence(int(master_seed))
    seeds, seen = [], set()
    while len(seeds) < trials:  # a repeat needs a 63-bit collision; spawn and continue if it happens
        for s in ss.generate_state(trials, dtype=np.uint64):
            s = int(s) >> 1
            if s not in seen and len(seeds) < trials:
                seen.add(s)
                seeds.append(s)
        ss = ss.spawn(1)[0]
    return seeds


# --------------------------------------------------------------------------
# channel families
# --------------------------------------------------------------------------


def rotated(phi: ch.Channel, rng) -> ch.KrausChannel:
    """U Phi(V . V*) U* for Haar U, V; keeps nu_p, S_min and the affine lambdas."""
    U, V = mc.random_unitary(phi.d_out, rng), mc.random_unitary(phi.d_in, rng)
    return ch.kraus_channel([U @ K @ V for K in phi.kraus()])


def qubit_channel(family: str, rng) -> ch.Channel:
    if family in ("arbitrary", "qubit"):
        # rank >= 2 keeps unitary (trivially multiplicative) maps out of the draw
        return ch.random_channel(2, 2, rng, rank=int(rng.integers(2, 5)))
    if family == "condition":
        return rotated(ch.random_qubit_affine(rng, "condition"), rng)
    if family == "unital":
        return ch.random_qubit_affine(rng, "unital")
    if family == "single_t":
        return ch.random_qubit_affine(rng, "single_t")
    if family == "general":
        return ch.random_qubit_affine(rng, "general")
    if family == "depolarizing":
        return ch.depolarizing(float(rng.uniform(-1.0 / 3.0, 1.0)))
    if family == "cq":
        return ch.random_cq(2, 2, rng)
    if family == "qc":
        return ch.random_qc(2, int(rng.integers(2, 4)), rng)
    raise InvalidParameter(f"unknown channel family {family!r}")


def _K(params, rng, lo=2, hi=4):
    return params.K if params.K is not None else int(rng.integers(lo, hi + 1))


def _payload(**items) -> dict:
    out = {}
    for key, val in items.items():
        if isinstance(val, ch.Channel):
            out[key] = ch.to_spec(val)
        elif isinstance(val, np.ndarray):
            out[key] = ch.encode_matrix(val)
        else:
            out[key] = val
    return out


# --------------------------------------------------------------------------
# one instance per check
# --------------------------------------------------------------------------


def _conjecture1(seed, params):
    rng = mc.SeededRng(seed)
    p = 2.0 if params.p is None else params.p
    family = params.family or ("arbitrary" if p == 2 else "condition")
    phi = qubit_channel(family, rng)
    K = _K(params, rng)
    M = cj.random_block_psd(K, rng, params.regime)
    rep = cj.check_conjecture1(phi, M, p, seed=seed, restarts=params.restarts or 128)
    rep.instance = _payload(p=p, family=family, phi=phi, M=M)
    return rep


def _entropy_bound(seed, params):
    rng = mc.SeededRng(seed)
    phi = qubit_channel(params.family or "arbitrary", rng)
    K = _K(params, rng)
    for regenerated in range(MAX_REGENERATE):
        M = cj.random_block_psd(K, rng, params.regime)
        X, _, Z = mc.qubit_blocks(M)
        if min(np.trace(X).real, np.trace(Z).real) >= cj.DEGENERATE_TRACE:
            break
    rep = cj.check_entropy_bound(phi, M, seed=seed)
    rep.diagnostics["regenerated"] = regenerated
    rep.instance = _payload(phi=phi, M=M)
    return rep


def _lieb_ruskai(seed, params):
    rng = mc.SeededRng(seed)
    K = _K(params, rng, 1, 4)
    X = mc.random_psd(K, rng, rank=1 + int(rng.integers(K)))
    V = mc.random_unitary(K, rng)
    lam = float(rng.uniform())
    p = params.p if params.p is not None else float(rng.choice([1.5, 2.0, 3.0]))
    rep = cj.check_lieb_ruskai(X, V, lam, p, seed=seed)
    rep.instance = _payload(p=p, X=X, V=V, **{"lambda": lam})
    return rep


def _multiplicativity(seed, params):
    rng = mc.SeededRng(seed)
    p = 2.0 if params.p is None else params.p
    d = _K(params, rng, 2, 3)
    omega = ch.random_channel(d, d, rng)
    phi = qubit_channel(params.family or "cq", rng)
    rep = cj.check_multiplicativity(omega, phi, p, seed=seed, restarts=params.restarts or 64)
    rep.instance = _payload(p=p, omega=omega, phi=phi)
    return rep


def _additivity(seed, params):
    rng = mc.SeededRng(seed)
    family = params.family or "cq"
    omega = qubit_channel("unital" if family == "unital" else "arbitrary", rng)
    phi = qubit_channel(family, rng)
    chi_rep, s_rep = cj.check_additivity(omega, phi, seed=seed, restarts=params.restarts or 16)
    chi_rep.subreports = [s_rep]
    chi_rep.instance = _payload(omega=omega, phi=phi)
    return chi_rep


def _qc_identity(seed, params):
    rng = mc.SeededRng(seed)
    K = _K(params, rng, 2, 3)
    omega = ch.random_channel(K, K, rng)
    phi = qubit_channel("qc", rng)
    tau = mc.random_density(2 * K, rng, rank=1 + int(rng.integers(2 * K)))
    rep = cj.check_qc_identity(omega, phi, tau, seed=seed)
    rep.instance = _payload(omega=omega, phi=phi, tau=tau)
    return rep


def _block_decompose(seed, params):
    rng = mc.SeededRng(seed)
    p = int(params.p) if params.p is not None else int(rng.choice([2, 3, 4]))
    canon = ch.canonicalize_qubit(ch.random_qubit_affine(rng, params.family or "condition").params)
    phi = ch.QubitAffineChannel(canon.params)
    K = _K(params, rng)
    M = cj.random_block_psd(K, rng, params.regime)
    bd = cj.block_decompose(M, phi, p, seed=seed)
    main = next(c for c in bd.checks if c.check_name == "block-decompose/b-trace-power")
    rep = cj.CheckReport("block-decompose", seed, main.lhs, main.rhs, main.gap, main.passed, main.tolerance,
                         {"p": p, "K": K, "r": list(bd.r), "c": list(bd.c)})
    rep.subreports = [c for c in bd.checks if c is not main]
    rep.instance = _payload(p=p, phi=phi, M=M)
    return rep


CHECKS = {
    "conjecture1": _conjecture1,
    "entropy-bound": _entropy_bound,
    "lieb-ruskai": _lieb_ruskai,
    "multiplicativity": _multiplicativity,
    "additivity": _additivity,
    "qc-identity": _qc_identity,
    "block-decompose": _block_decompose,
}


def run_instance(check: str, seed: int, params: SweepParams) -> cj.CheckReport:
    return CHECKS[check](seed, params)


def _run_one(args):
    return run_instance(*args)


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    return int(env) if env else 1


def run_sweep(check: str, trials: int, seed: int, params: SweepParams | None = None,
              parallelism: int | None = None) -> list[cj.CheckReport]:
    """Run ``trials`` seeded instances of ``check``; reports sorted by instance seed."""
    if check not in CHECKS:
        raise InvalidParameter(f"unknown check {check!r}; choose from {', '.join(CHECKS)}")
    params = params or SweepParams()
    seeds = instance_seeds(seed, trials)
    workers = parallelism or default_workers()
    jobs = [(check, s, params) for s in seeds]
    if workers <= 1:
        reports = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return sorted(reports, key=lambda r: r.instance_seed)


@dataclass
class SweepSummary:
    trials: int
    passed: int
    violations: int
    inconclusive: int
    min_gap: float


def summarize(reports) -> SweepSummary:
    violations = sum(1 for r in reports if not r.all_passed and not r.any_inconclusive)
    inconclusive = sum(1 for r in reports if r.any_inconclusive)
    gaps = [r.gap for r in reports if not math.isnan(r.gap)]
    return SweepSummary(len(reports), sum(1 for r in reports if r.all_passed and not r.any_inconclusive),
                        violations, inconclusive, min(gaps) if gaps else math.nan)


def write_candidate(report: cj.CheckReport, out_dir) -> Path:
    """Serialize a failing instance for reproduction."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    failing = [r.row() for r in report.flatten() if not r.passed]
    doc = {
        "version": __version__,
        **report.row(),
        "failing": failing,
        "instance": report.instance,
    }
    path = out_dir / f"candidate_{report.check_name}_{report.instance_seed}.json"
    path.write_text(json.dumps(doc, indent=1, default=_json_default))
    return path


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, SweepParams):
        return asdict(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")
