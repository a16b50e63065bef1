"""First-order bounds used to convexify the alternating-optimization blocks.

Each bound is returned as plain coefficients so the same numbers feed the
conic program builders and the numerical checks.  Interference enters the
covariance-block bounds only through the scalar ``I = sum_{i != k} tr(A W_i)``,
so the bounds are written as functions of ``I`` rather than of each matrix.
"""

from dataclasses import dataclass

import numpy as np

LN2 = np.log(2.0)


def _perspective_log2(tau, y):
    """``tau log2(y / tau)`` with value 0 at ``tau = 0``."""
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = tau * np.log2(y / tau)
    return np.where(tau > 0, out, 0.0)


@dataclass(frozen=True)
class TimeSharedLogBound:
    """Affine majorant ``c0 + cI I + ce e + ctau tau`` of a concave perspective log."""

    c0: float
    cI: float
    ce: float
    ctau: float

    def __call__(self, I, tau, e=0.0):
        return self.c0 + self.cI * I + self.ce * e + self.ctau * tau


def g2_value(I, e, tau, s_ant, s_proc):
    """``tau log2((I + e s_proc + tau s_ant) / tau)``: interference part of the PS-slot rate."""
    return _perspective_log2(tau, np.asarray(I) + np.asarray(e) * s_proc + np.asarray(tau) * s_ant)


def g3_value(I, tau, s2):
    """``tau log2((I + tau s2) / tau)``: interference part of the ID-slot rate."""
    return _perspective_log2(tau, np.asarray(I) + np.asarray(tau) * s2)


def surrogate_g2(I_t, e_t, tau_t, s_ant, s_proc):
    """Tangent plane of ``g2_value`` at ``(I_t, e_t, tau_t)``; ``tau_t`` must be positive."""
    if tau_t <= 0:
        raise ValueError("expansion time fraction must be positive")
    psi = I_t / tau_t + e_t * s_proc / tau_t + s_ant
    if not psi > 0:
        raise ValueError("nonpositive expansion argument")
    lp = np.log2(psi)
    cI = 1.0 / (psi * LN2)
    ctau = lp - (psi - s_ant) / (psi * LN2)
    ce = s_proc / (psi * LN2)
    c0 = tau_t * lp - cI * I_t - ce * e_t - ctau * tau_t
    return TimeSharedLogBound(c0, cI, ce, ctau)


def surrogate_g3(I_t, tau_t, s2):
    """Tangent plane of ``g3_value`` at ``(I_t, tau_t)``."""
    if tau_t <= 0:
        raise ValueError("expansion time fraction must be positive")
    psi = I_t / tau_t + s2
    if not psi > 0:
        raise ValueError("nonpositive expansion argument")
    lp = np.log2(psi)
    cI = 1.0 / (psi * LN2)
    ctau = lp - (psi - s2) / (psi * LN2)
    c0 = tau_t * lp - cI * I_t - ctau * tau_t
    return TimeSharedLogBound(c0, cI, 0.0, ctau)


def q_value(I, s2):
    """``log2(I + s2)``: interference term of a TDMA slot rate."""
    return np.log2(np.asarray(I) + s2)


def surrogate_q(I_r, s2):
    """Tangent line ``(c0, cI)`` of ``q_value`` at ``I_r``."""
    lam = I_r + s2
    if not lam > 0:
        raise ValueError("nonpositive expansion argument")
    cI = 1.0 / (lam * LN2)
    return np.log2(lam) - cI * I_r, cI


def surrogate_bilinear(e_t, rho_t):
    """Affine minorant ``(c0, c1)`` of ``0.5 (e + rho)^2`` as ``c0 + c1 (e + rho)``."""
    s = e_t + rho_t
    return -0.5 * s * s, s


def surrogate_zsq(z_t):
    """Affine minorant ``(c0, c1)`` of ``z^2`` as ``c0 + c1 z``."""
    return -z_t * z_t, 2.0 * z_t


@dataclass(frozen=True)
class QuadBound:
    """Linearization data of ``x^H B x`` at ``x_t``: ``c = B x_t``, ``q = x_t^H B x_t``."""

    c: np.ndarray
    q: float

    @classmethod
    def at(cls, B, x_t):
        c = B @ x_t
        return cls(c, float(np.real(np.vdot(x_t, c))))

    def G_lb(self, x):
        """``2 Re(x_t^H B x) - x_t^H B x_t`` (minorant of ``x^H B x``)."""
        return 2.0 * np.real(np.vdot(self.c, x)) - self.q

    def F_lb(self, x, y, y_t):
        """Minorant of ``x^H B x / y`` at ``(x_t, y_t)``."""
        return 2.0 * np.real(np.vdot(self.c, x)) / y_t - self.q * y / (y_t * y_t)
