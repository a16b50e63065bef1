"""Post-hoc structure checks on converged covariances.

Optimal lifted covariances ``W[i, j] = tau_j S[i, j]`` of the active slots
are expected to be rank one whenever their power budget is exhausted.  The
checks here only look at eigenvalues of returned solutions; no dual
variables are recovered, so ``condition_flags`` is an advisory proxy for
the uniqueness premise, not a certificate.
"""

from dataclasses import dataclass, field

import numpy as np

from .metrics import effective_channels

FULL_POWER_RTOL = 1e-6


@dataclass(frozen=True)
class CovarianceRank:
    i: int
    j: int
    eigenvalues: np.ndarray  # descending, watts x interval
    effective_rank: int
    active: bool
    full_power: bool


@dataclass
class RankReport:
    entries: list = field(default_factory=list)

    def _counted(self):
        return [e for e in self.entries if e.active and e.full_power]

    @property
    def counted(self):
        """Number of active-slot, full-power covariances."""
        return len(self._counted())

    @property
    def rank_le1(self):
        return sum(e.effective_rank <= 1 for e in self._counted())

    @property
    def fraction_rank_le1(self):
        n = self.counted
        return self.rank_le1 / n if n else float("nan")


def _rank(eig, tol):
    top = eig.max(initial=0.0)
    return int(np.sum(eig > tol * top)) if top > 0 else 0


def effective_rank(W, tol=1e-4):
    """Eigenvalues above ``tol`` times the largest one (0 for a zero matrix)."""
    return _rank(np.linalg.eigvalsh(0.5 * (W + W.conj().T)), tol)


def rank_check(solution, P, tol=1e-4, tau_zero_tol=1e-6):
    """Spectrum and effective rank of every ``W[i, j] = tau_j S[i, j]``.

    ``P`` holds per-Tx power limits (array or anything with a ``P`` field).
    """
    P = np.asarray(getattr(P, "P", P), dtype=float)
    tau = np.asarray(solution.tau, dtype=float)
    S = np.asarray(solution.S)
    K, J = S.shape[:2]
    P = np.broadcast_to(P, (K,))
    report = RankReport()
    for i in range(K):
        for j in range(J):
            W = tau[j] * S[i, j]
            Wh = 0.5 * (W + W.conj().T)
            eig = np.linalg.eigvalsh(Wh)[::-1]
            r = _rank(eig, tol)
            full = float(np.real(np.trace(Wh))) >= tau[j] * P[i] * (1.0 - FULL_POWER_RTOL)
            report.entries.append(CovarianceRank(i, j, eig, r, bool(tau[j] > tau_zero_tol), bool(full)))
    return report


def aggregate(reports):
    """Pooled rank-at-most-one fraction over a batch of reports."""
    counted = sum(r.counted for r in reports)
    good = sum(r.rank_le1 for r in reports)
    return {"counted": counted, "rank_le1": good,
            "fraction": good / counted if counted else float("nan")}


@dataclass(frozen=True)
class ConditionReport:
    multiplicity: np.ndarray  # per Tx
    eigenvalues: np.ndarray   # per Tx, descending

    @property
    def simple(self):
        """True when every dominant eigenvalue is numerically simple."""
        return bool(np.all(self.multiplicity == 1))


def condition_flags(channels, v=None, zeta=1.0, rtol=1e-6):
    """Multiplicity of the dominant eigenvalue of ``zeta sum_k a_ik a_ik^H`` per Tx.

    ``v`` defaults to all reflecting elements in phase.  Advisory only: a
    simple dominant eigenvalue is what makes the energy-slot beam rank one
    when the energy constraint is the binding one.
    """
    if v is None:
        v = np.ones(channels.N + 1, dtype=complex)
    a = effective_channels(channels, v)[:, :, 0]  # [i, k, m]
    mult, eigs = [], []
    for i in range(channels.K):
        U = zeta * np.einsum("km,kn->mn", a[i], a[i].conj())
        w = np.linalg.eigvalsh(U)[::-1]
        top = w[0]
        mult.append(len(w) if top <= 0 else int(np.sum(w >= top * (1.0 - rtol))))
        eigs.append(w)
    return ConditionReport(np.array(mult), np.array(eigs))
