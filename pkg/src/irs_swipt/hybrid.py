"""Alternating optimization for the three-slot hybrid TS-PS scheme.

Slot 0 is energy-only, slot 1 splits received power between decoding and
harvesting, slot 2 is decoding-only.  The PS and TS baselines are the same
solver with slots {0, 2} or slot {1} switched off.

Each outer iteration solves two convex programs: an SDP over the lifted
covariances ``W = tau S``, the time split and the PS ratios with the phases
fixed, then a QCQP over the phases with everything else fixed.  Both use
first-order bounds that are tight at the current point, and a candidate is
only accepted if the exact sum rate does not drop.
"""

from dataclasses import dataclass

import numpy as np

from . import metrics
from .ao import finish, run_ao
from .conic import ConicProgram, log2_1p, perspective_entropy_encode, vstack
from .metrics import SchemeSolution, constraint_residuals, quad_gains
from .model import Scaled, add_soft_eh, phase_variable
from .settings import AlgorithmSettings
from .surrogates import QuadBound, surrogate_bilinear, surrogate_g2, surrogate_g3, surrogate_zsq

ACTIVE_SLOTS = {"hybrid": (0, 1, 2), "ps": (1,), "ts": (0, 2)}
DEFAULTS = AlgorithmSettings()


@dataclass
class HybridIterate:
    """Expansion point of the covariance block, in physical units.

    ``W[i, j] = tau[j] S[i, j]``; ``e`` satisfies ``tau_1 <= e rho``;
    ``z^2 <= (1 - rho) zeta sum_i tr(a a^H W_i1)`` (z in sqrt-watts).
    """

    W: np.ndarray
    tau: np.ndarray
    rho: np.ndarray
    e: np.ndarray
    z: np.ndarray
    v: np.ndarray

    @classmethod
    def from_solution(cls, sol, channels, noise, clamp=1e-8):
        tau = np.asarray(sol.tau, dtype=float)
        rho = np.asarray(sol.rho, dtype=float)
        W = sol.S * tau[None, :, None, None]
        e = tau[1] / np.maximum(rho, clamp)
        a = metrics.effective_channels(channels, sol.v)
        split = quad_gains(a, W)[:, :, 1].sum(axis=0)
        z = np.sqrt(np.maximum((1.0 - rho) * noise.zeta * split, 0.0))
        return cls(W=W, tau=tau, rho=rho, e=e, z=z, v=np.array(sol.v))

    def to_solution(self, scheme, tau_zero_tol=1e-6):
        S, tau = recover_covariances(self.W, self.tau, tau_zero_tol)
        return SchemeSolution(scheme, S, self.v.copy(), tau, self.rho.copy())


def recover_covariances(W, tau, tau_zero_tol=1e-6):
    """``S[:, j] = W[:, j] / tau[j]`` for active slots, zero otherwise.

    Returns ``(S, tau)`` with inactive time fractions set to exactly zero.
    """
    tau = np.asarray(tau, dtype=float)
    tau = np.where(tau > tau_zero_tol, tau, 0.0)
    S = np.zeros_like(W)
    on = tau > 0
    S[:, on] = W[:, on] / tau[on][None, :, None, None]
    return S, tau


def _zero(prog):
    return prog.constant(0.0)


def _total(prog, terms):
    out = _zero(prog)
    for t in terms:
        out = out + t
    return out


def build_block1_program(channels, noise, it, variant="hybrid", settings=DEFAULTS):
    """Concave surrogate program over ``W``, ``tau``, ``rho``, ``e``, ``z`` for fixed phases."""
    sc = Scaled.build(channels, noise)
    K, M = channels.K, channels.M
    active = ACTIVE_SLOTS[variant]
    a = sc.a(it.v)
    gt = quad_gains(a, it.W / sc.p_ref)
    clamp = settings.clamp
    tau_t = np.maximum(it.tau, clamp)
    e_t = np.maximum(it.e, clamp)
    rho_t = np.maximum(it.rho, clamp)
    z_t = it.z / np.sqrt(sc.s_ref)

    prog = ConicProgram()
    tau = prog.real(3, "tau", nonneg=True)
    for j in range(3):
        if j not in active:
            prog.add_eq(tau[j])
    prog.add_nonneg(1.0 - tau.sum())
    W = {}
    for j in active:
        for i in range(K):
            W[i, j] = prog.hermitian(M, f"W_{i}_{j}")
            prog.add_nonneg(tau[j] * sc.P[i] - W[i, j].trace())

    def gain(i, k, j):
        return W[i, j].inner(np.outer(a[i, k, j], a[i, k, j].conj()))

    objective = []
    if 1 in active:
        rho = prog.real(K, "rho", nonneg=True)
        prog.add_nonneg(1.0 - rho)
        e = prog.real(K, "e", nonneg=True)
        for k in range(K):
            c0, c1 = surrogate_bilinear(e_t[k], rho_t[k])
            prog.add_sq_le(vstack([e[k], rho[k]]), 2.0 * (c0 + c1 * (e[k] + rho[k]) - tau[1]))
            Y = _total(prog, [gain(i, k, 1) for i in range(K)]) + sc.s_proc[k] * e[k] + sc.s_ant[k] * tau[1]
            f = perspective_entropy_encode(prog, tau[1], Y)
            I = _total(prog, [gain(i, k, 1) for i in range(K) if i != k])
            I_t = sum(gt[i, k, 1] for i in range(K) if i != k)
            g = surrogate_g2(I_t, e_t[k], tau_t[1], sc.s_ant[k], sc.s_proc[k])
            objective.append(f - (g.c0 + g.cI * I + g.ce * e[k] + g.ctau * tau[1]))
    if 2 in active:
        for k in range(K):
            Y = _total(prog, [gain(i, k, 2) for i in range(K)]) + sc.s2[k] * tau[2]
            f = perspective_entropy_encode(prog, tau[2], Y)
            I = _total(prog, [gain(i, k, 2) for i in range(K) if i != k])
            I_t = sum(gt[i, k, 2] for i in range(K) if i != k)
            g = surrogate_g3(I_t, tau_t[2], sc.s2[k])
            objective.append(f - (g.c0 + g.cI * I + g.ctau * tau[2]))
    for k in range(K):
        if sc.E[k] <= 0:
            continue
        harvest = _zero(prog)
        if 0 in active:
            harvest = harvest + sc.zeta * _total(prog, [gain(i, k, 0) for i in range(K)])
        if 1 in active:
            z = prog.real(1, f"z_{k}")
            c0, c1 = surrogate_zsq(z_t[k])
            harvest = harvest + c0 + c1 * z
            split = sc.zeta * _total(prog, [gain(i, k, 1) for i in range(K)])
            prog.add_sq_le_prod(z, 1.0 - rho[k], split)
        prog.add_nonneg(harvest - sc.E[k])
    prog.maximize(_total(prog, objective))
    return prog, {"W": W, "active": active, "scaled": sc}


def block1_step(channels, noise, sol, variant="hybrid", settings=DEFAULTS):
    """One covariance/time/PS-ratio update; returns ``(candidate, status)``."""
    it = HybridIterate.from_solution(sol, channels, noise, settings.clamp)
    prog, h = build_block1_program(channels, noise, it, variant, settings)
    res = prog.solve(tol=settings.solver_tol)
    if not res.ok:
        return None, res.status
    sc = h["scaled"]
    K, M = channels.K, channels.M
    Wn = np.zeros((K, 3, M, M), dtype=complex)
    for (i, j), var in h["W"].items():
        Wn[i, j] = res.value(var) * sc.p_ref
    rho = np.clip(res["rho"], 0.0, 1.0) if 1 in h["active"] else np.ones(K)
    new = HybridIterate(W=Wn, tau=np.clip(res["tau"], 0.0, None), rho=rho,
                        e=np.zeros(K), z=np.zeros(K), v=sol.v)
    cand = new.to_solution(variant, settings.tau_zero_tol)
    return finish(cand, channels, noise, settings)[0], res.status


def build_block2_program(channels, noise, sol, variant="hybrid", settings=DEFAULTS):
    """Phase-shift QCQP for fixed covariances, time split and PS ratios.

    Returns ``(program, handles)`` or ``(None, None)`` when no phase has
    any effect on the objective (no reflecting elements or no rate terms).
    """
    sc = Scaled.build(channels, noise)
    K, N = channels.K, channels.N
    if N == 0:
        return None, None
    tau, rho, S, v_t = sol.tau, sol.rho, sol.S, sol.v
    tol = settings.tau_zero_tol
    need_eh = bool(np.any(sc.E > 0))
    free = [j for j in range(3) if tau[j] > tol and (j > 0 or need_eh)]
    gamma = np.zeros((K, 3))
    gamma[:, 1] = metrics.sinr_hybrid_slot2(channels, S[:, 1], v_t[1], rho, noise)
    gamma[:, 2] = metrics.sinr_hybrid_slot3(channels, S[:, 2], v_t[2], noise)
    rate_terms = [(k, j) for j in (1, 2) if j in free for k in range(K)
                  if gamma[k, j] > settings.mu_floor and (j == 2 or rho[k] > settings.clamp)]
    if not rate_terms:
        return None, None

    prog = ConicProgram()
    v = {j: phase_variable(prog, N) for j in free}
    objective = []
    for k, j in rate_terms:
        mu = prog.real(1, f"mu_{k}_{j}", nonneg=True)
        objective.append(tau[j] * log2_1p(prog, mu))
        qb = QuadBound.at(sc.A(k, k, S[k, j]), v_t[j])
        mu_t = gamma[k, j]
        F_lb = (2.0 / mu_t) * v[j].real_inner(qb.c) - (qb.q / mu_t ** 2) * mu
        const = sc.s_ant[k] + sc.s_proc[k] / rho[k] if j == 1 else sc.s2[k]
        parts = []
        for i in range(K):
            if i != k:
                D = sc.factor(i, k, S[i, j])
                if D.shape[1]:
                    parts.append(v[j].matmul(D.conj().T).stacked())
        if parts:
            prog.add_sq_le(vstack(parts), F_lb - const)
        else:
            prog.add_nonneg(F_lb - const)
    for k in range(K):
        if sc.E[k] <= 0:
            continue
        harvest = _zero(prog)
        for j, w in ((0, sc.zeta * tau[0]), (1, sc.zeta * tau[1] * (1.0 - rho[k]))):
            if w <= 0:
                continue
            for i in range(K):
                B = sc.A(i, k, S[i, j])
                if j in v:
                    qb = QuadBound.at(B, v_t[j])
                    harvest = harvest + w * (2.0 * v[j].real_inner(qb.c) - qb.q)
                else:
                    harvest = harvest + w * float(np.real(np.vdot(v_t[j], B @ v_t[j])))
        objective.append(-add_soft_eh(prog, harvest, sc.E[k], settings.eh_penalty))
    prog.maximize(_total(prog, objective))
    return prog, {"v": v}


def block2_step(channels, noise, sol, variant="hybrid", settings=DEFAULTS):
    prog, h = build_block2_program(channels, noise, sol, variant, settings)
    if prog is None:
        return None, "skipped"
    res = prog.solve(tol=settings.solver_tol)
    if not res.ok:
        return None, res.status
    cand = sol.copy()
    for j, var in h["v"].items():
        cand.v[j] = res.value(var)
    return finish(cand, channels, noise, settings)[0], res.status


def ao_solve(channels, noise, initial, variant="hybrid", settings=DEFAULTS):
    """Alternate the two blocks from a feasible ``initial`` solution.

    The returned solution carries ``trace`` (exact sum rate after each outer
    iteration, starting with the initial point), ``steps`` (every candidate
    evaluated), ``iterations`` and ``flags`` (``iter_cap``, ``solver_failure``).
    """
    if variant not in ACTIVE_SLOTS:
        raise ValueError(f"unknown hybrid variant {variant!r}")
    cur = initial.copy()
    cur.scheme = variant
    if cur.rho is None:
        cur.rho = np.ones(channels.K)
    for j in range(3):
        if j not in ACTIVE_SLOTS[variant] and cur.tau[j] > 0:
            raise ValueError(f"initial point uses slot {j}, which {variant} switches off")
    cur, rep = finish(cur, channels, noise, settings)
    if not rep.feasible:
        raise ValueError(f"initial point is infeasible (worst residual {rep.worst:.3e})")
    steps = [(block1_step, 1), (block2_step, 2)]
    return run_ao(cur, steps, lambda step, s: step(channels, noise, s, variant, settings),
                  lambda s: constraint_residuals(variant, channels, s, noise).feasible, settings)
