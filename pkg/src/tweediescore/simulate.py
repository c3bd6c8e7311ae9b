"""
Seeded data generators.

Random numbers come from Philox4x64-10, a counter-based generator (numpy's
``np.random.Philox``), seeded with a 64-bit unsigned integer. Only the raw
64-bit output stream is used; every transform is defined here so the series
depend on nothing but the Philox stream:

* uniform: ``((raw >> 11) + 0.5) * 2**-53``, strictly inside (0, 1)
* normal: Box-Muller, ``sqrt(-2 log u1) * (cos, sin)(2 pi u2)``; a scalar
  draw caches the sine branch for the next call
* Poisson: inversion by sequential search for mean < 30, otherwise the PTRS
  transformed-rejection sampler (Hormann, 1993)
* Gamma: Marsaglia-Tsang squeeze; shape < 1 uses ``G(shape + 1) * u**(1/shape)``
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .edm import Family, make_spec
from .errors import DomainError

__all__ = [
    "RandomStream",
    "Garch11",
    "NefConstant",
    "NefRandomWalkMean",
    "GaussianLocalLevel",
    "SimConfig",
    "SimResult",
    "simulate",
    "GARCH_BURN_IN",
]

GARCH_BURN_IN = 500
_BLOCK = 4096
_TWO_PI = 2.0 * math.pi


class RandomStream:
    """Reproducible draws on top of the raw Philox output."""

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2 ** 64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self._bitgen = np.random.Philox(seed)
        self._buf = np.empty(0)
        self._pos = 0
        self._spare = None

    def uniforms(self, size: int) -> np.ndarray:
        out = np.empty(size)
        filled = 0
        while filled < size:
            if self._pos >= self._buf.size:
                raw = self._bitgen.random_raw(_BLOCK)
                self._buf = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
                self._pos = 0
            take = min(size - filled, self._buf.size - self._pos)
            out[filled:filled + take] = self._buf[self._pos:self._pos + take]
            self._pos += take
            filled += take
        return out

    def uniform(self) -> float:
        if self._pos >= self._buf.size:
            raw = self._bitgen.random_raw(_BLOCK)
            self._buf = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
            self._pos = 0
        v = float(self._buf[self._pos])
        self._pos += 1
        return v

    def normals(self, size: int) -> np.ndarray:
        pairs = (size + 1) // 2
        u = self.uniforms(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log(u[:, 0]))
        ang = _TWO_PI * u[:, 1]
        z = np.column_stack([r * np.cos(ang), r * np.sin(ang)]).ravel()
        return z[:size]

    def normal(self) -> float:
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1, u2 = self.uniform(), self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(_TWO_PI * u2)
        return r * math.cos(_TWO_PI * u2)

    def poisson(self, lam: float) -> int:
        if lam < 30:
            u = self.uniform()
            k, p = 0, math.exp(-lam)
            cdf = p
            while u > cdf:
                k += 1
                p *= lam / k
                cdf += p
                if p == 0.0 and cdf < u:  # rounding left a gap at the far tail
                    break
            return k
        # PTRS
        slam, loglam = math.sqrt(lam), math.log(lam)
        b = 0.931 + 2.53 * slam
        a = -0.059 + 0.02483 * b
        inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
        vr = 0.9277 - 3.6224 / (b - 2.0)
        while True:
            U = self.uniform() - 0.5
            V = self.uniform()
            us = 0.5 - abs(U)
            k = math.floor((2.0 * a / us + b) * U + lam + 0.43)
            if us >= 0.07 and V <= vr:
                return k
            if k < 0 or (us < 0.013 and V > us):
                continue
            if (math.log(V) + math.log(inv_alpha) - math.log(a / (us * us) + b)
                    <= -lam + k * loglam - float(gammaln(k + 1))):
                return k

    def gamma(self, shape: float) -> float:
        """Gamma(shape, scale 1)."""
        if shape < 1.0:
            g = self.gamma(shape + 1.0)
            return g * self.uniform() ** (1.0 / shape)
        dd = shape - 1.0 / 3.0
        c = 1.0 / math.sqrt(9.0 * dd)
        while True:
            z = self.normal()
            v = 1.0 + c * z
            if v <= 0:
                continue
            v = v * v * v
            u = self.uniform()
            if u < 1.0 - 0.0331 * z ** 4 or math.log(u) < 0.5 * z * z + dd * (1.0 - v + math.log(v)):
                return dd * v


# ----------------------------------------------------------------------------
# data-generating processes

@dataclass(frozen=True)
class Garch11:
    """y_t = sqrt(h_t) z_t, h_{t+1} = omega_g + alpha_g y_t**2 + beta_g h_t.

    Starts at the unconditional variance and discards ``burn_in`` steps.
    """

    omega_g: float
    alpha_g: float
    beta_g: float
    burn_in: int = GARCH_BURN_IN

    def validate(self):
        if not (self.omega_g > 0 and self.alpha_g >= 0 and self.beta_g >= 0):
            raise DomainError("GARCH needs omega_g > 0 and nonnegative alpha_g, beta_g")
        if not self.alpha_g + self.beta_g < 1:
            raise DomainError("GARCH needs alpha_g + beta_g < 1 for an unconditional start")
        if self.burn_in < 0:
            raise DomainError("burn_in must be nonnegative")


@dataclass(frozen=True)
class NefConstant:
    """IID draws from a family at a fixed mean."""

    family: str
    mu: float
    dispersion: float | None = None

    def validate(self):
        spec = make_spec(self.family, self.dispersion)
        if not math.isfinite(self.mu) or (spec.positive_mean and self.mu <= 0):
            raise DomainError(f"mean {self.mu} is outside the {spec.family.value} mean domain")


@dataclass(frozen=True)
class NefRandomWalkMean:
    """Mean follows a Gaussian random walk (on the log scale for positive families)."""

    family: str
    step_sd: float
    mu0: float = 1.0
    dispersion: float | None = None

    def validate(self):
        spec = make_spec(self.family, self.dispersion)
        if not self.step_sd >= 0:
            raise DomainError("step_sd must be nonnegative")
        if not math.isfinite(self.mu0) or (spec.positive_mean and self.mu0 <= 0):
            raise DomainError(f"mu0 {self.mu0} is outside the {spec.family.value} mean domain")


@dataclass(frozen=True)
class GaussianLocalLevel:
    """y_t = m_t + eps_t, m_{t+1} = m_t + eta_t; Var eps = obs_var, Var eta = state_var."""

    state_var: float
    obs_var: float
    level0: float = 0.0

    def validate(self):
        if not (self.state_var > 0 and self.obs_var > 0):
            raise DomainError("local level variances must be positive")


@dataclass(frozen=True)
class SimConfig:
    dgp: Garch11 | NefConstant | NefRandomWalkMean | GaussianLocalLevel
    length: int
    seed: int = 0

    def __post_init__(self):
        if int(self.length) != self.length or self.length < 1:
            raise DomainError(f"length must be a positive integer, got {self.length}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        self.dgp.validate()


@dataclass
class SimResult:
    y: np.ndarray
    latent: np.ndarray | None = None


def _draw(stream: RandomStream, spec, mu: float) -> float:
    fam = spec.family
    if fam is Family.GAUSSIAN_LOCATION:
        return mu + math.sqrt(spec.dispersion) * stream.normal()
    if fam is Family.GAUSSIAN_VARIANCE:
        return math.sqrt(mu) * stream.normal()
    if fam is Family.POISSON:
        return float(stream.poisson(mu))
    k = spec.shape
    return stream.gamma(k) * mu / k


def simulate(cfg: SimConfig) -> SimResult:
    """Generate a series; ``latent`` holds h_t, mu_t or the level where applicable."""
    stream = RandomStream(cfg.seed)
    dgp, T = cfg.dgp, int(cfg.length)

    if isinstance(dgp, Garch11):
        z = stream.normals(dgp.burn_in + T)
        h = dgp.omega_g / (1.0 - dgp.alpha_g - dgp.beta_g)
        y = np.empty(T)
        hs = np.empty(T)
        for t in range(dgp.burn_in + T):
            yt = math.sqrt(h) * z[t]
            if t >= dgp.burn_in:
                y[t - dgp.burn_in] = yt
                hs[t - dgp.burn_in] = h
            h = dgp.omega_g + dgp.alpha_g * yt * yt + dgp.beta_g * h
        return SimResult(y, hs)

    if isinstance(dgp, GaussianLocalLevel):
        eps = stream.normals(T) * math.sqrt(dgp.obs_var)
        eta = stream.normals(T) * math.sqrt(dgp.state_var)
        level = dgp.level0 + np.concatenate([[0.0], np.cumsum(eta[:-1])])
        return SimResult(level + eps, level)

    spec = make_spec(dgp.family, dgp.dispersion)
    if isinstance(dgp, NefConstant):
        if spec.family is Family.GAUSSIAN_LOCATION:
            y = dgp.mu + math.sqrt(spec.dispersion) * stream.normals(T)
        elif spec.family is Family.GAUSSIAN_VARIANCE:
            y = math.sqrt(dgp.mu) * stream.normals(T)
        else:
            y = np.array([_draw(stream, spec, dgp.mu) for _ in range(T)])
        return SimResult(y, None)

    if isinstance(dgp, NefRandomWalkMean):
        steps = stream.normals(T) * dgp.step_sd
        steps[0] = 0.0
        if spec.positive_mean:
            mu = dgp.mu0 * np.exp(np.cumsum(steps))
        else:
            mu = dgp.mu0 + np.cumsum(steps)
        y = np.array([_draw(stream, spec, m) for m in mu])
        return SimResult(y, mu)

    raise DomainError(f"unknown data-generating process {dgp!r}")
