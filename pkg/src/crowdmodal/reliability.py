"""Monte Carlo reliability profiles of a bridge under three maintenance policies.

The reliability index decays linearly.  Preventive interventions (PIs) add an
upward jump.  A bridge leaves service the first time its index falls below
the service limit; from then on no further PIs are applied but the decay
continues, which is how failed realizations enter the mean profile.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class ReliabilityError(ValueError):
    pass


class Policy(str, Enum):
    NO_PI = "no_pi"
    TRADITIONAL = "traditional"
    CROWDSOURCED = "crowdsourced"


class Archetype(str, Enum):
    TYPICAL = "typical_43yr"
    NEW = "new"


@dataclass(frozen=True)
class PolicyConfig:
    kind: Policy = Policy.NO_PI
    pi_interval: float = 15.0
    apr: float = 0.06
    service_limit: float = 4.6
    extent: float | None = None  # crowdsourced one-time jump; None: equalize with the traditional schedule

    def __post_init__(self):
        object.__setattr__(self, "kind", Policy(self.kind))
        if self.service_limit <= 0:
            raise ReliabilityError("service_limit must be positive")
        if self.apr < 0:
            raise ReliabilityError("apr must be non-negative")
        if self.pi_interval <= 0:
            raise ReliabilityError("pi_interval must be positive")


# Rate and improvement defaults are calibrated to the reported life gains (see README).
DEFAULT_RATE = (0.0646, 0.1507)
DEFAULT_IMPROVEMENT = (0.2513, 0.3769)


@dataclass(frozen=True)
class ArchetypeConfig:
    kind: Archetype = Archetype.TYPICAL
    beta0: tuple = (5.0, 6.4)
    rate: tuple = DEFAULT_RATE
    improvement: tuple = DEFAULT_IMPROVEMENT

    def __post_init__(self):
        object.__setattr__(self, "kind", Archetype(self.kind))
        for name in ("beta0", "rate", "improvement"):
            lo, hi = getattr(self, name)
            if not (0 <= lo <= hi):
                raise ReliabilityError(f"{name} bounds must satisfy 0 <= lo <= hi")
            object.__setattr__(self, name, (float(lo), float(hi)))

    @classmethod
    def preset(cls, kind, **kw):
        kind = Archetype(kind)
        b0 = (5.0, 6.4) if kind == Archetype.TYPICAL else (8.0, 9.0)
        return cls(kind=kind, beta0=kw.pop("beta0", b0), **kw)


def _mean(bounds):
    return 0.5 * (bounds[0] + bounds[1])


def pi_years(policy, horizon):
    n = int(math.floor(horizon / policy.pi_interval + 1e-9))
    return policy.pi_interval * np.arange(1, n + 1)


def discount(t, apr):
    return (1.0 + apr) ** (-np.asarray(t, dtype=float))


def equalize_costs(traditional, crowdsourced, arch, horizon=120.0):
    """One-time PI extent whose present value equals the traditional schedule's.

    Cost is proportional to PI extent.  The traditional cost is the mean
    improvement times the discounted sum over scheduled years within the
    horizon; the one-time PI is placed where the mean no-PI profile reaches
    the service limit.
    """
    years = pi_years(traditional, horizon)
    e = _mean(arch.improvement)
    pv = e * float(discount(years, traditional.apr).sum())
    rate = _mean(arch.rate)
    if rate <= 0:
        t_c = horizon
    else:
        t_c = min(max((_mean(arch.beta0) - crowdsourced.service_limit) / rate, 0.0), horizon)
    extent = pv / float(discount(t_c, crowdsourced.apr))
    if not extent > 0:
        raise ReliabilityError("equalized PI extent is not positive")
    return extent


def one_time_extent(pv, t, apr):
    """Extent of a single PI at year ``t`` with present value ``pv``."""
    return pv / float(discount(t, apr))


@dataclass(frozen=True, eq=False)
class ReliabilityProfile:
    t: np.ndarray
    beta: np.ndarray
    events: list = field(default_factory=list)  # (year, jump)
    life: float = math.nan
    censored: bool = False


@dataclass(frozen=True)
class Draws:
    """Common random numbers for a batch of realizations."""

    beta0: np.ndarray
    rate: np.ndarray
    improvement: np.ndarray  # (n, n_slots), one per scheduled PI


def draw(arch, n, seed, n_slots, start=0):
    """Per-realization streams keyed on (seed, index); policy independent."""
    b0 = np.empty(n)
    r = np.empty(n)
    imp = np.empty((n, n_slots))
    for j in range(n):
        g = np.random.default_rng(np.random.SeedSequence([int(seed), start + j]))
        u = g.random(2 + n_slots)
        b0[j] = arch.beta0[0] + (arch.beta0[1] - arch.beta0[0]) * u[0]
        r[j] = arch.rate[0] + (arch.rate[1] - arch.rate[0]) * u[1]
        imp[j] = arch.improvement[0] + (arch.improvement[1] - arch.improvement[0]) * u[2:]
    return Draws(b0, r, imp)


def _paths(d, policy, t, horizon, extent):
    """Beta paths (n, len(t)), lives and per-path events for one policy."""
    limit = policy.service_limit
    n = len(d.beta0)
    beta = d.beta0[:, None] - d.rate[:, None] * t[None, :]
    events = [[] for _ in range(n)]
    with np.errstate(divide="ignore", invalid="ignore"):
        base_life = np.where(d.rate > 0, (d.beta0 - limit) / d.rate, np.inf)
    base_life = np.maximum(base_life, 0.0)
    life = base_life.copy()
    if policy.kind == Policy.TRADITIONAL:
        level = d.beta0.copy()  # index value at the last PI, shifted back to t = 0
        alive_until = base_life.copy()
        for k, yr in enumerate(pi_years(policy, horizon)):
            ok = alive_until > yr
            jump = np.where(ok, d.improvement[:, k], 0.0)
            beta += jump[:, None] * (t[None, :] >= yr)
            level += jump
            with np.errstate(divide="ignore", invalid="ignore"):
                alive_until = np.where(ok, np.where(d.rate > 0, (level - limit) / d.rate, np.inf), alive_until)
            for i in np.flatnonzero(ok):
                events[i].append((float(yr), float(jump[i])))
        life = alive_until
    elif policy.kind == Policy.CROWDSOURCED:
        tc = base_life
        hit = tc < horizon
        beta += (extent * hit)[:, None] * (t[None, :] >= tc[:, None])
        with np.errstate(divide="ignore", invalid="ignore"):
            life = np.where(hit, tc + extent / d.rate, life)
        for i in np.flatnonzero(hit):
            events[i].append((float(tc[i]), float(extent)))
    censored = life >= horizon
    life = np.minimum(life, horizon)
    return beta, life, censored, events


def _grid(horizon, dt):
    n = int(round(horizon / dt))
    return np.linspace(0.0, horizon, n + 1)


def generate_profile(arch, policy, horizon=120.0, rng=None, dt=0.1, draws=None, extent=None):
    """One realization.  Pass ``rng`` (a Generator) or precomputed single-row ``draws``."""
    if horizon <= 0:
        raise ReliabilityError("horizon must be positive")
    n_slots = len(pi_years(policy, horizon))
    if draws is None:
        rng = rng if rng is not None else np.random.default_rng()
        u = rng.random(2 + n_slots)
        draws = Draws(
            np.array([arch.beta0[0] + (arch.beta0[1] - arch.beta0[0]) * u[0]]),
            np.array([arch.rate[0] + (arch.rate[1] - arch.rate[0]) * u[1]]),
            (arch.improvement[0] + (arch.improvement[1] - arch.improvement[0]) * u[2:])[None, :],
        )
    ext = _resolve_extent(policy, arch, horizon, extent)
    t = _grid(horizon, dt)
    beta, life, cens, ev = _paths(draws, policy, t, horizon, ext)
    return ReliabilityProfile(t=t, beta=beta[0], events=ev[0], life=float(life[0]), censored=bool(cens[0]))


def _resolve_extent(policy, arch, horizon, extent=None):
    if extent is not None:
        return float(extent)
    if policy.kind != Policy.CROWDSOURCED:
        return 0.0
    if policy.extent is not None:
        return float(policy.extent)
    trad = PolicyConfig(Policy.TRADITIONAL, policy.pi_interval, policy.apr, policy.service_limit)
    return equalize_costs(trad, policy, arch, horizon)


@dataclass(frozen=True, eq=False)
class MonteCarloResult:
    policy: Policy
    t: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    expected_life: float
    mean_life: float  # average of per-realization lives
    n: int
    extent: float = 0.0


def crossing(t, y, limit):
    """First time ``y`` drops below ``limit``, interpolated; ``t[-1]`` if never."""
    below = np.flatnonzero(y < limit)
    if not len(below):
        return float(t[-1])
    k = below[0]
    if k == 0:
        return float(t[0])
    y0, y1 = y[k - 1], y[k]
    return float(t[k - 1] + (y0 - limit) / (y0 - y1) * (t[k] - t[k - 1]))


def monte_carlo(arch, policy, n, seed=0, horizon=120.0, dt=0.1, chunk=2000):
    """Mean and standard deviation of beta over ``n`` realizations and the expected life.

    Realization j uses the stream (seed, j) for every policy, so policies
    are compared on common random numbers.
    """
    if n < 1:
        raise ReliabilityError("n must be >= 1")
    t = _grid(horizon, dt)
    ext = _resolve_extent(policy, arch, horizon)
    n_slots = len(pi_years(PolicyConfig(Policy.TRADITIONAL, policy.pi_interval), horizon))
    s1 = np.zeros(len(t))
    s2 = np.zeros(len(t))
    lives = []
    for start in range(0, n, chunk):
        m = min(chunk, n - start)
        d = draw(arch, m, seed, n_slots, start)
        beta, life, _, _ = _paths(d, policy, t, horizon, ext)
        s1 += beta.sum(axis=0)
        s2 += (beta * beta).sum(axis=0)
        lives.append(life)
    mean = s1 / n
    var = np.maximum(s2 / n - mean * mean, 0.0)
    return MonteCarloResult(
        policy=policy.kind, t=t, mean=mean, std=np.sqrt(var),
        expected_life=crossing(t, mean, policy.service_limit),
        mean_life=float(np.concatenate(lives).mean()), n=n, extent=ext,
    )


def compare_policies(arch, n, seed=0, horizon=120.0, dt=0.1, base=None):
    """Monte Carlo for all three policies on common random numbers."""
    base = base or PolicyConfig()
    out = {}
    for kind in Policy:
        pol = PolicyConfig(kind, base.pi_interval, base.apr, base.service_limit, base.extent)
        out[kind.value] = monte_carlo(arch, pol, n, seed, horizon, dt)
    return out


def write_profiles_csv(results, path):
    """year, then mean/std columns per policy."""
    names = list(results)
    t = results[names[0]].t
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("year," + ",".join(f"{k}_mean_beta,{k}_std_beta" for k in names) + "\n")
        for i, ti in enumerate(t):
            vals = [f"{ti:.4f}"]
            for k in names:
                vals += [f"{results[k].mean[i]:.9g}", f"{results[k].std[i]:.9g}"]
            fh.write(",".join(vals) + "\n")
