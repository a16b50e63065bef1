"""Node placement, path loss, fading and stacked channel construction.

Channel conventions: the received signal at Rx k from Tx i is
``h^H x`` on the direct link and ``f^H diag(u^*) G x`` through an IRS with
reflection vector ``u``.  Stacking ``H = [Phi_1; ...; Phi_L; h^H]`` with
``Phi = diag(f^H) G`` lets every scheme write the composite channel as
``v^H H`` with ``v = [u_1; ...; u_L; 1]``.
"""

from dataclasses import dataclass, field

import numpy as np

DISTRIBUTED = "distributed"
CENTRALIZED = "centralized"


@dataclass(frozen=True)
class Geometry:
    K: int = 2
    d_T: float = 0.0
    d_R: float = 6.0
    d_I: float = 1.0
    deployment: str = DISTRIBUTED
    N_total: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.d_R <= 0 or self.d_I <= 0:
            raise ValueError("d_R and d_I must be positive")
        if self.N_total < 0:
            raise ValueError("N_total must be nonnegative")
        if self.deployment not in (DISTRIBUTED, CENTRALIZED):
            raise ValueError(f"unknown deployment {self.deployment!r}")
        if self.deployment == DISTRIBUTED and self.N_total % self.K:
            raise ValueError("distributed deployment needs N_total divisible by K")

    @property
    def L(self):
        return self.K if self.deployment == DISTRIBUTED else 1

    @property
    def N_per_irs(self):
        return self.N_total // self.L


@dataclass(frozen=True)
class FadingParams:
    pl_ref_db: float = -30.0
    alpha_irs: float = 2.2
    alpha_direct: float = 3.5
    rician_db: float = 3.0
    los: str = "ones"

    def __post_init__(self):
        if self.alpha_irs < 0 or self.alpha_direct < 0:
            raise ValueError("path loss exponents must be nonnegative")
        if self.los != "ones":
            raise ValueError(f"unsupported LoS model {self.los!r}")

    @property
    def pl_ref(self):
        return 10.0 ** (self.pl_ref_db / 10.0)

    @property
    def kappa(self):
        return 10.0 ** (self.rician_db / 10.0)


@dataclass(frozen=True)
class Nodes:
    tx: np.ndarray   # (K, 3)
    rx: np.ndarray   # (K, 3)
    irs: np.ndarray  # (L, 3)


@dataclass
class ChannelSet:
    """One realization of every link.

    Shapes: ``h (K, K, M)`` indexed ``[i, k]`` for Tx i to Rx k;
    ``G (K, L, Nl, M)`` indexed ``[i, l]``; ``f (L, K, Nl)`` indexed
    ``[l, k]``; ``Phi (K, L, K, Nl, M)`` indexed ``[i, l, k]``;
    ``H (K, K, N+1, M)`` indexed ``[i, k]``.
    """

    h: np.ndarray
    G: np.ndarray
    f: np.ndarray
    Phi: np.ndarray = field(default=None)
    H: np.ndarray = field(default=None)

    @property
    def K(self):
        return self.h.shape[0]

    @property
    def M(self):
        return self.h.shape[2]

    @property
    def L(self):
        return self.G.shape[1]

    @property
    def N(self):
        return self.G.shape[1] * self.G.shape[2]


def spherical_to_cartesian(r, azimuth, polar):
    return np.array([r * np.sin(polar) * np.cos(azimuth),
                     r * np.sin(polar) * np.sin(azimuth),
                     r * np.cos(polar)])


def place_nodes(geometry):
    """Cartesian coordinates of all Txs, Rxs and IRSs."""
    K = geometry.K
    az = 2.0 * np.pi * np.arange(K) / K
    r_tx = abs(geometry.d_T)
    az_tx = az + np.pi if geometry.d_T < 0 else az
    tx = np.array([spherical_to_cartesian(r_tx, a, np.pi / 2) for a in az_tx])
    rx = np.array([spherical_to_cartesian(geometry.d_R, a, np.pi / 2) for a in az])
    if geometry.deployment == DISTRIBUTED:
        irs = rx + np.array([0.0, 0.0, geometry.d_I])
    else:
        irs = spherical_to_cartesian(geometry.d_I, np.pi / 2, 0.0)[None, :]
    return Nodes(tx=tx, rx=rx, irs=irs)


def path_loss(distance, exponent, params):
    """Linear power gain; distances under 1 m are clamped to 1 m."""
    d = float(distance)
    if not np.isfinite(d) or d < 0:
        raise ValueError(f"invalid distance {distance!r}")
    d = max(d, 1.0)
    return params.pl_ref * d ** (-exponent)


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _rician(rng, shape, gain, kappa):
    los = np.ones(shape, dtype=complex)
    return np.sqrt(gain) * (np.sqrt(kappa / (1 + kappa)) * los + np.sqrt(1 / (1 + kappa)) * _cn(rng, shape))


def sample_channels(rng_seed, geometry, fading, M):
    """Draw one channel realization; a pure function of its arguments."""
    rng = np.random.default_rng(rng_seed)
    nodes = place_nodes(geometry)
    K, L, Nl = geometry.K, geometry.L, geometry.N_per_irs
    h = np.empty((K, K, M), dtype=complex)
    for i in range(K):
        for k in range(K):
            d = np.linalg.norm(nodes.tx[i] - nodes.rx[k])
            h[i, k] = np.sqrt(path_loss(d, fading.alpha_direct, fading)) * _cn(rng, M)
    G = np.empty((K, L, Nl, M), dtype=complex)
    for i in range(K):
        for l in range(L):
            d = np.linalg.norm(nodes.tx[i] - nodes.irs[l])
            G[i, l] = _rician(rng, (Nl, M), path_loss(d, fading.alpha_irs, fading), fading.kappa)
    f = np.empty((L, K, Nl), dtype=complex)
    for l in range(L):
        for k in range(K):
            d = np.linalg.norm(nodes.irs[l] - nodes.rx[k])
            f[l, k] = _rician(rng, Nl, path_loss(d, fading.alpha_irs, fading), fading.kappa)
    return cascade_and_stack(ChannelSet(h=h, G=G, f=f))


def cascade_and_stack(channels):
    """Fill in the cascaded ``Phi`` and stacked ``H`` matrices."""
    h, G, f = channels.h, channels.G, channels.f
    K, _, M = h.shape
    if G.ndim != 4 or f.ndim != 3:
        raise ValueError("G must be (K, L, Nl, M) and f must be (L, K, Nl)")
    Kg, L, Nl, Mg = G.shape
    if Kg != K or Mg != M or f.shape != (L, K, Nl) or h.shape[1] != K:
        raise ValueError("channel dimensions do not agree")
    # Phi[i, l, k] = diag(conj(f[l, k])) @ G[i, l]
    Phi = np.conj(f)[None, :, :, :, None] * G[:, :, None, :, :]
    H = np.empty((K, K, L * Nl + 1, M), dtype=complex)
    for i in range(K):
        for k in range(K):
            H[i, k, :-1] = Phi[i, :, k].reshape(L * Nl, M)
            H[i, k, -1] = np.conj(h[i, k])
    return ChannelSet(h=h, G=G, f=f, Phi=Phi, H=H)
