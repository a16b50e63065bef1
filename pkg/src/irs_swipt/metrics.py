"""Exact SINR, rate and harvested-energy evaluators plus constraint checks.

Everything here works in physical units (watts) and is the reference that
optimizer outputs are judged against.  Slot indices are zero based: the
hybrid family uses slots 0 (energy only), 1 (power splitting) and
2 (information only); TDMA uses slot k for Rx k.
"""

from dataclasses import dataclass, field

import numpy as np

HYBRID_FAMILY = ("hybrid", "ps", "ts")
TDMA_FAMILY = ("tdma", "tdma_d")
SCHEMES = HYBRID_FAMILY + TDMA_FAMILY
FEAS_TOL = 1e-6
EH_ABS_FLOOR = 1e-15


@dataclass(frozen=True)
class NoiseAndPower:
    P: np.ndarray
    sigma_ant_sq: np.ndarray
    sigma_proc_sq: np.ndarray
    zeta: float
    E: np.ndarray

    @classmethod
    def uniform(cls, K, P=10 ** (23 / 10) / 1000, sigma_ant_sq=0.5e-8, sigma_proc_sq=0.5e-8,
                zeta=0.7, E=0.0):
        full = lambda x: np.full(K, float(x)) if np.ndim(x) == 0 else np.asarray(x, dtype=float)
        return cls(full(P), full(sigma_ant_sq), full(sigma_proc_sq), float(zeta), full(E))

    def __post_init__(self):
        if np.any(self.P <= 0) or np.any(self.sigma_ant_sq <= 0) or np.any(self.sigma_proc_sq <= 0):
            raise ValueError("powers and noise variances must be positive")
        if not 0 < self.zeta <= 1:
            raise ValueError("zeta must lie in (0, 1]")
        if np.any(self.E < 0):
            raise ValueError("EH requirements must be nonnegative")

    @property
    def sigma_sq(self):
        return self.sigma_ant_sq + self.sigma_proc_sq

    def with_E(self, E):
        E = np.full(len(self.P), float(E)) if np.ndim(E) == 0 else np.asarray(E, dtype=float)
        return NoiseAndPower(self.P, self.sigma_ant_sq, self.sigma_proc_sq, self.zeta, E)


@dataclass
class SchemeSolution:
    """Transmit covariances ``S[i, j]``, phases ``v[j]`` and time/PS split."""

    scheme: str
    S: np.ndarray
    v: np.ndarray
    tau: np.ndarray
    rho: np.ndarray = None
    feasible: bool = True
    sum_rate: float = float("nan")
    energy: np.ndarray = None
    iterations: int = 0
    trace: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    steps: list = field(default_factory=list)

    def copy(self):
        return SchemeSolution(self.scheme, self.S.copy(), self.v.copy(), self.tau.copy(),
                              None if self.rho is None else self.rho.copy(), self.feasible,
                              self.sum_rate, None if self.energy is None else self.energy.copy(),
                              self.iterations, list(self.trace), list(self.flags), list(self.steps))


def effective_channel(H_ik, v):
    """``a`` with ``a^H = v^H H_ik``."""
    H_ik = np.asarray(H_ik)
    if H_ik.shape[0] != len(v):
        raise ValueError("phase vector length does not match stacked channel")
    return H_ik.conj().T @ v


def effective_channels(channels, v):
    """``a[i, k, j] = H[i, k]^H v[j]`` for every link and slot."""
    v = np.atleast_2d(v)
    if channels.H.shape[2] != v.shape[1]:
        raise ValueError("phase vector length does not match stacked channel")
    return np.einsum("iknm,jn->ikjm", channels.H.conj(), v)


def quad_gains(a, S):
    """``g[i, k, j] = a[i, k, j]^H S[i, j] a[i, k, j]`` (real)."""
    return np.real(np.einsum("ikjm,ijmn,ikjn->ikj", a.conj(), S, a))


def _slot_gains(channels, S_slot, v_slot):
    # g[i, k] for one slot
    a = effective_channels(channels, v_slot)[:, :, 0]
    return np.real(np.einsum("ikm,imn,ikn->ik", a.conj(), S_slot, a))


def _signal_interference(g):
    K = g.shape[0]
    sig = np.diag(g).copy()
    interf = g.sum(axis=0) - sig
    return sig, interf


def sinr_hybrid_slot2(channels, S2, v2, rho, noise):
    g = _slot_gains(channels, S2, v2)
    sig, interf = _signal_interference(g)
    rho = np.asarray(rho, dtype=float)
    out = np.zeros(len(sig))
    on = rho > 0
    out[on] = sig[on] / (interf[on] + noise.sigma_ant_sq[on] + noise.sigma_proc_sq[on] / rho[on])
    return out


def sinr_hybrid_slot3(channels, S3, v3, noise):
    g = _slot_gains(channels, S3, v3)
    sig, interf = _signal_interference(g)
    return sig / (interf + noise.sigma_sq)


def _tdma_own_slot_gains(channels, S, v):
    # gk[i, k] = b_{i,k}^H S[i, k] b_{i,k}, b_{i,k} = H_ik^H v_k
    a = effective_channels(channels, v)
    K = channels.K
    g = quad_gains(a, S)
    return g[:, np.arange(K), np.arange(K)]


def sinr_tdma(channels, S, v, noise):
    g = _tdma_own_slot_gains(channels, S, v)
    sig, interf = _signal_interference(g)
    return sig / (interf + noise.sigma_sq)


def sinr_tdma_d(channels, S, v, noise):
    g = _tdma_own_slot_gains(channels, S, v)
    return np.diag(g) / noise.sigma_sq


def harvested_energy_hybrid(channels, S, v, tau, rho, zeta):
    """Per-Rx energy from the EH-only slot and the split part of the PS slot."""
    g1 = _slot_gains(channels, S[:, 0], v[0]).sum(axis=0)
    g2 = _slot_gains(channels, S[:, 1], v[1]).sum(axis=0)
    return zeta * tau[0] * g1 + zeta * tau[1] * (1.0 - np.asarray(rho)) * g2


def harvested_energy_tdma(channels, S, v, tau, zeta):
    """Per-Rx energy harvested in every slot except its own."""
    g = quad_gains(effective_channels(channels, v), S).sum(axis=0)  # [k, j]
    g = g * np.asarray(tau)[None, :]
    return zeta * (g.sum(axis=1) - np.diag(g))


def rates_hybrid(channels, sol, noise):
    g2 = sinr_hybrid_slot2(channels, sol.S[:, 1], sol.v[1], sol.rho, noise)
    g3 = sinr_hybrid_slot3(channels, sol.S[:, 2], sol.v[2], noise)
    return sol.tau[1] * np.log2(1 + g2) + sol.tau[2] * np.log2(1 + g3)


def rates_tdma(channels, sol, noise, scheme="tdma"):
    gam = (sinr_tdma_d if scheme == "tdma_d" else sinr_tdma)(channels, sol.S, sol.v, noise)
    return np.asarray(sol.tau) * np.log2(1 + gam)


def sum_rate(scheme, channels, solution, noise):
    if scheme in HYBRID_FAMILY:
        return float(rates_hybrid(channels, solution, noise).sum())
    if scheme in TDMA_FAMILY:
        return float(rates_tdma(channels, solution, noise, scheme).sum())
    raise ValueError(f"unknown scheme {scheme!r}")


def harvested_energy(scheme, channels, solution, noise):
    if scheme in HYBRID_FAMILY:
        return harvested_energy_hybrid(channels, solution.S, solution.v, solution.tau, solution.rho, noise.zeta)
    if scheme in TDMA_FAMILY:
        return harvested_energy_tdma(channels, solution.S, solution.v, solution.tau, noise.zeta)
    raise ValueError(f"unknown scheme {scheme!r}")


@dataclass
class ResidualReport:
    """Signed slacks; negative values are violations (relative where noted)."""

    eh: float          # min_k (Q_k - E_k) / max(E_k, floor)
    power: float       # min_{i,j} (P_i - tr S_ij) / P_i
    psd: float         # min eigenvalue over P_i
    hermitian: float   # minus the largest asymmetry over P_i
    time: float        # 1 - sum(tau)
    tau_min: float
    rho: float         # min(rho, 1 - rho), +inf when absent
    modulus: float     # min (1 - |v_n|) over reflecting elements
    anchor: float      # minus the deviation of the last entry of v from 1
    energy: np.ndarray = None

    def as_dict(self):
        return {k: getattr(self, k) for k in ("eh", "power", "psd", "hermitian", "time", "tau_min",
                                              "rho", "modulus", "anchor")}

    @property
    def worst(self):
        return min(self.as_dict().values())

    @property
    def feasible(self):
        return self.worst >= -FEAS_TOL


def constraint_residuals(scheme, channels, solution, noise):
    S, v, tau = solution.S, np.atleast_2d(solution.v), np.asarray(solution.tau, dtype=float)
    Q = harvested_energy(scheme, channels, solution, noise)
    eh = float(np.min((Q - noise.E) / np.maximum(noise.E, EH_ABS_FLOOR)))
    P = noise.P[:, None]
    tr = np.real(np.trace(S, axis1=2, axis2=3))
    power = float(np.min((P - tr) / P))
    herm = np.abs(S - np.conj(np.swapaxes(S, 2, 3))).max(axis=(2, 3))
    hermitian = float(-np.max(herm / P)) if herm.size else 0.0
    Sh = 0.5 * (S + np.conj(np.swapaxes(S, 2, 3)))
    psd = float(np.min(np.linalg.eigvalsh(Sh)[..., 0] / P)) if S.size else 0.0
    if scheme in HYBRID_FAMILY and solution.rho is not None:
        rho = np.asarray(solution.rho, dtype=float)
        rho_slack = float(min(rho.min(), (1 - rho).min()))
    else:
        rho_slack = float("inf")
    refl = v[:, :-1]
    modulus = float(np.min(1 - np.abs(refl))) if refl.size else float("inf")
    anchor = float(-np.max(np.abs(v[:, -1] - 1)))
    return ResidualReport(eh=eh, power=power, psd=psd, hermitian=hermitian, time=float(1 - tau.sum()),
                          tau_min=float(tau.min()), rho=rho_slack, modulus=modulus, anchor=anchor, energy=Q)
