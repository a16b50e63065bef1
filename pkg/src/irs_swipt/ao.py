"""Outer loop and candidate clean-up shared by the alternating-optimization solvers."""

import numpy as np

from . import metrics
from .model import project_phases, psd_project


def finish(sol, channels, noise, settings=None):
    """Project a raw candidate onto the exact constraint set and score it.

    Interior-point outputs can sit a hair outside the box constraints; this
    clips time fractions, PS ratios and reflection amplitudes, projects the
    covariances onto the PSD cone with the power cap, and evaluates the
    exact sum rate and harvested energies.
    """
    sol.tau = np.clip(sol.tau, 0.0, None)
    if sol.tau.sum() > 1.0:
        sol.tau = sol.tau / sol.tau.sum()
    sol.S = psd_project(sol.S, noise.P)
    if sol.rho is not None:
        sol.rho = np.clip(sol.rho, 0.0, 1.0)
    sol.v = project_phases(sol.v)
    sol.sum_rate = metrics.sum_rate(sol.scheme, channels, sol, noise)
    rep = metrics.constraint_residuals(sol.scheme, channels, sol, noise)
    sol.energy = rep.energy
    return sol, rep


def run_ao(cur, steps, call, is_feasible, settings):
    """Cycle through ``steps`` until the fractional gain drops below epsilon.

    A block's candidate replaces the incumbent only if it is feasible and
    its exact sum rate is not lower, so the recorded trace is monotone by
    construction.  ``cur.steps`` keeps every candidate that was evaluated as
    ``(iteration, block, sum_rate, feasible, accepted)``.
    """
    trace = [cur.sum_rate]
    log = []
    flags = set()
    it = 0
    for it in range(1, settings.max_outer_iters + 1):
        start = cur.sum_rate
        failed = False
        for step, block in steps:
            cand, status = call(step, cur)
            if cand is None:
                if status != "skipped":
                    failed = True
                    flags.add(f"block{block}_{status}")
                continue
            feasible = is_feasible(cand)
            accepted = feasible and cand.sum_rate >= cur.sum_rate
            log.append((it, block, cand.sum_rate, feasible, accepted))
            if accepted:
                cur = cand
        trace.append(cur.sum_rate)
        if failed:
            flags.add("solver_failure")
            break
        if cur.sum_rate - start <= settings.epsilon * max(abs(start), 1e-12):
            break
    else:
        flags.add("iter_cap")
    cur.trace = trace
    cur.steps = log
    cur.iterations = it
    cur.flags = sorted(flags)
    return cur
