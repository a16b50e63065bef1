"""Unit normalization and helpers shared by the alternating-optimization solvers.

Received powers are of order 1e-8 W while transmit powers are of order
0.1 W, which is a poor scaling for an interior-point solver.  Inside the
convex subproblems covariances are measured in units of the largest
transmit power and received powers in units of the mean noise power, so
SINR-like quantities keep their values and everything else is O(1).
"""

from dataclasses import dataclass

import numpy as np

from .conic import ComplexExpr, vstack


@dataclass(frozen=True)
class Scaled:
    H: np.ndarray
    P: np.ndarray
    s_ant: np.ndarray
    s_proc: np.ndarray
    E: np.ndarray
    zeta: float
    p_ref: float
    s_ref: float

    @classmethod
    def build(cls, channels, noise):
        p_ref = float(np.max(noise.P))
        s_ref = float(np.mean(noise.sigma_sq))
        return cls(H=channels.H * np.sqrt(p_ref / s_ref), P=noise.P / p_ref,
                   s_ant=noise.sigma_ant_sq / s_ref, s_proc=noise.sigma_proc_sq / s_ref,
                   E=noise.E / s_ref, zeta=noise.zeta, p_ref=p_ref, s_ref=s_ref)

    @property
    def s2(self):
        return self.s_ant + self.s_proc

    @property
    def K(self):
        return self.H.shape[0]

    @property
    def N(self):
        return self.H.shape[2] - 1

    def a(self, v):
        """Scaled effective channels ``a[i, k, j]``."""
        return np.einsum("iknm,jn->ikjm", self.H.conj(), np.atleast_2d(v))

    def A(self, i, k, S_ij):
        """``H_ik S_ij H_ik^H`` in scaled units, with ``S_ij`` in watts."""
        Hs = self.H[i, k]
        return Hs @ (S_ij / self.p_ref) @ Hs.conj().T

    def factor(self, i, k, S_ij):
        """``D`` with ``D D^H = H_ik S_ij H_ik^H`` (scaled), thin in the rank of S."""
        w, U = np.linalg.eigh(0.5 * (S_ij + S_ij.conj().T) / self.p_ref)
        keep = w > max(w.max(initial=0.0), 0.0) * 1e-14
        if not np.any(keep):
            return np.zeros((self.H.shape[2], 0), dtype=complex)
        return self.H[i, k] @ (U[:, keep] * np.sqrt(w[keep]))


def random_phases(rng, N, count):
    """Unit-modulus phase vectors with the trailing anchor entry equal to 1."""
    v = np.exp(2j * np.pi * rng.random((count, N)))
    return np.concatenate([v, np.ones((count, 1))], axis=1)


def project_phases(v):
    """Clip reflection amplitudes to at most 1 and reset the anchor to 1."""
    v = np.array(v, dtype=complex, copy=True)
    mag = np.abs(v[..., :-1])
    over = mag > 1.0
    v[..., :-1][over] = v[..., :-1][over] / mag[over]
    v[..., -1] = 1.0
    return v


def psd_project(S, P):
    """Hermitian PSD projection of every ``S[i, j]``, then trace capped at ``P[i]``."""
    S = 0.5 * (S + np.conj(np.swapaxes(S, -1, -2)))
    w, U = np.linalg.eigh(S)
    w = np.clip(w, 0.0, None)
    S = np.einsum("...mr,...r,...nr->...mn", U, w, U.conj())
    tr = np.real(np.trace(S, axis1=-2, axis2=-1))
    cap = np.asarray(P, dtype=float).reshape((-1,) + (1,) * (tr.ndim - 1))
    scale = np.where(tr > cap, cap / np.where(tr > 0, tr, 1.0), 1.0)
    return S * scale[..., None, None]


def mrt_covariance(a, P):
    """Full-power beam ``P a a^H / ||a||^2`` (zero if ``a`` vanishes)."""
    n2 = np.real(np.vdot(a, a))
    if n2 <= 0:
        return np.zeros((len(a), len(a)), dtype=complex)
    return P * np.outer(a, a.conj()) / n2


def phase_variable(prog, N):
    """Complex vector ``[u; 1]`` with ``|u_n| <= 1``."""
    u = prog.complex(N)
    for n in range(N):
        prog.add_soc(1.0, vstack([u.re[n], u.im[n]]))
    return ComplexExpr(vstack([u.re, 1.0]), vstack([u.im, 0.0]))


def add_soft_eh(prog, harvest, E, penalty):
    """``harvest >= E`` with a nonnegative relative slack; returns the penalty term.

    When the phases already maximize the linearized harvest, the hard
    constraint leaves a single feasible point and interior-point methods
    stall.  The slack restores an interior, and a penalty well above any
    multiplier keeps it at zero whenever the hard version is solvable.
    Callers still check candidates against the exact constraint.
    """
    s = prog.real(1, nonneg=True)
    prog.add_nonneg((harvest - E) / E + s)
    return penalty * s
