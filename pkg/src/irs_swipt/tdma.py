"""Alternating optimization for TDMA-based SWIPT (slot k decodes Rx k).

In slot k, Rx k decodes while every other Rx harvests.  The plain TDMA
variant treats the other Txs' slot-k signals as interference.  In the
``tdma_d`` variant those signals are deterministic energy waveforms that
the decoding Rx cancels, so its covariance block is exactly convex after
the change of variables ``W = tau S`` and only the phase block needs a
first-order bound.
"""

import numpy as np

from . import metrics
from .ao import finish, run_ao
from .conic import ConicProgram, log2_1p, perspective_entropy_encode, vstack
from .metrics import SchemeSolution, constraint_residuals, quad_gains
from .model import Scaled, add_soft_eh, phase_variable
from .settings import AlgorithmSettings
from .surrogates import QuadBound, surrogate_q

VARIANTS = ("tdma", "tdma_d")
DEFAULTS = AlgorithmSettings()


def _total(prog, terms):
    out = prog.constant(0.0)
    for t in terms:
        out = out + t
    return out


def build_covariance_sdp(channels, noise, sol, variant="tdma", settings=DEFAULTS):
    """Concave program over ``W[i, j] = tau_j S[i, j]`` and ``tau`` for fixed phases.

    ``sol`` supplies the phases and, for ``tdma``, the expansion covariances
    of the interference term.
    """
    sc = Scaled.build(channels, noise)
    K, M = channels.K, channels.M
    a = sc.a(sol.v)  # a[i, k, j]: Tx i to Rx k under slot-j phases
    own = np.arange(K)
    I_r = quad_gains(a, sol.S / sc.p_ref)[:, own, own]  # [i, k]
    I_r = I_r.sum(axis=0) - np.diag(I_r)

    prog = ConicProgram()
    tau = prog.real(K, "tau", nonneg=True)
    prog.add_nonneg(1.0 - tau.sum())
    W = {}
    for i in range(K):
        for j in range(K):
            W[i, j] = prog.hermitian(M, f"W_{i}_{j}")
            prog.add_nonneg(tau[j] * sc.P[i] - W[i, j].trace())

    def gain(i, k, j):
        return W[i, j].inner(np.outer(a[i, k, j], a[i, k, j].conj()))

    objective = []
    for k in range(K):
        if variant == "tdma":
            Y = _total(prog, [gain(i, k, k) for i in range(K)]) + sc.s2[k] * tau[k]
            c0, cI = surrogate_q(I_r[k], sc.s2[k])
            interf = _total(prog, [gain(i, k, k) for i in range(K) if i != k])
            objective.append(perspective_entropy_encode(prog, tau[k], Y) - c0 * tau[k] - cI * interf)
        else:
            Y = gain(k, k, k) + sc.s2[k] * tau[k]
            objective.append(perspective_entropy_encode(prog, tau[k], Y) - np.log2(sc.s2[k]) * tau[k])
    for k in range(K):
        if sc.E[k] <= 0:
            continue
        harvest = _total(prog, [gain(i, k, j) for j in range(K) if j != k for i in range(K)])
        prog.add_nonneg(sc.zeta * harvest - sc.E[k])
    prog.maximize(_total(prog, objective))
    return prog, {"W": W, "tau": tau, "scaled": sc}


def covariance_step(channels, noise, sol, variant="tdma", settings=DEFAULTS):
    prog, h = build_covariance_sdp(channels, noise, sol, variant, settings)
    res = prog.solve(tol=settings.solver_tol)
    if not res.ok:
        return None, res.status
    sc = h["scaled"]
    K, M = channels.K, channels.M
    tau = np.clip(res.value(h["tau"]), 0.0, None)
    tau = np.where(tau > settings.tau_zero_tol, tau, 0.0)
    S = np.zeros((K, K, M, M), dtype=complex)
    for (i, j), var in h["W"].items():
        if tau[j] > 0:
            S[i, j] = res.value(var) * sc.p_ref / tau[j]
    cand = SchemeSolution(variant, S, sol.v.copy(), tau)
    return finish(cand, channels, noise, settings)[0], res.status


def build_phase_qcqp(channels, noise, sol, variant="tdma", settings=DEFAULTS):
    """Phase program for fixed covariances and time split, or ``(None, None)``."""
    K, N = channels.K, channels.N
    if N == 0:
        return None, None
    sc = Scaled.build(channels, noise)
    tau, S, v_t = sol.tau, sol.S, sol.v
    free = [j for j in range(K) if tau[j] > settings.tau_zero_tol]
    sinr = metrics.sinr_tdma_d if variant == "tdma_d" else metrics.sinr_tdma
    gamma = sinr(channels, S, v_t, noise)
    rate_terms = [k for k in free if gamma[k] > settings.mu_floor]
    if not rate_terms:
        return None, None

    prog = ConicProgram()
    v = {j: phase_variable(prog, N) for j in free}
    objective = []
    for k in rate_terms:
        mu = prog.real(1, f"mu_{k}", nonneg=True)
        objective.append(tau[k] * log2_1p(prog, mu))
        qb = QuadBound.at(sc.A(k, k, S[k, k]), v_t[k])
        if variant == "tdma_d":
            prog.add_nonneg(2.0 * v[k].real_inner(qb.c) - qb.q - sc.s2[k] * mu)
            continue
        F_lb = (2.0 / gamma[k]) * v[k].real_inner(qb.c) - (qb.q / gamma[k] ** 2) * mu
        parts = []
        for i in range(K):
            if i != k:
                D = sc.factor(i, k, S[i, k])
                if D.shape[1]:
                    parts.append(v[k].matmul(D.conj().T).stacked())
        if parts:
            prog.add_sq_le(vstack(parts), F_lb - sc.s2[k])
        else:
            prog.add_nonneg(F_lb - sc.s2[k])
    for k in range(K):
        if sc.E[k] <= 0:
            continue
        harvest = prog.constant(0.0)
        for j in range(K):
            if j == k or tau[j] <= 0:
                continue
            for i in range(K):
                B = sc.A(i, k, S[i, j])
                if j in v:
                    qb = QuadBound.at(B, v_t[j])
                    harvest = harvest + tau[j] * (2.0 * v[j].real_inner(qb.c) - qb.q)
                else:
                    harvest = harvest + tau[j] * float(np.real(np.vdot(v_t[j], B @ v_t[j])))
        objective.append(-add_soft_eh(prog, sc.zeta * harvest, sc.E[k], settings.eh_penalty))
    prog.maximize(_total(prog, objective))
    return prog, {"v": v}


def phase_step(channels, noise, sol, variant="tdma", settings=DEFAULTS):
    prog, h = build_phase_qcqp(channels, noise, sol, variant, settings)
    if prog is None:
        return None, "skipped"
    res = prog.solve(tol=settings.solver_tol)
    if not res.ok:
        return None, res.status
    cand = sol.copy()
    for j, var in h["v"].items():
        cand.v[j] = res.value(var)
    return finish(cand, channels, noise, settings)[0], res.status


def ao_solve_tdma(channels, noise, initial, variant="tdma", settings=DEFAULTS):
    """Alternate covariance/time and phase updates from a feasible ``initial`` point."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown TDMA variant {variant!r}")
    cur = initial.copy()
    cur.scheme = variant
    cur.rho = None
    cur, rep = finish(cur, channels, noise, settings)
    if not rep.feasible:
        raise ValueError(f"initial point is infeasible (worst residual {rep.worst:.3e})")
    steps = [(covariance_step, 1), (phase_step, 2)]
    return run_ao(cur, steps, lambda step, s: step(channels, noise, s, variant, settings),
                  lambda s: constraint_residuals(variant, channels, s, noise).feasible, settings)
