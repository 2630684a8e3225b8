"""Fixed-step RK4 simulation of the plant and its consensus observers.

The coupled system is integrated in (plant state, estimation error)
coordinates, ``z = (x, e)`` with ``e_i = xhat_i - x``. This is the same
linear system as the one written in ``(x, xhat)``, but the error is carried
directly instead of as a difference of two large numbers, so it stays
accurate when the plant itself is unstable. Estimates are reported as
``x + e_i``.

Error dynamics, with ``xi`` the plant disturbance and ``xi_i`` the local
measurement disturbance::

    de/dt = Acl e + diag(L_i) (D_i xi + Dbar_i xi_i) - (1 kron B) xi
    Acl   = I kron A - diag(L_i) barC - diag(K_i) barH
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .netdetect import ObserverNetworkSystem, build_stacked

__all__ = [
    "GainSet",
    "ZeroDisturbance",
    "Sinusoid",
    "HeldNoise",
    "SimulationConfig",
    "Trace",
    "SimulationDiverged",
    "closed_loop_matrix",
    "spectral_abscissa",
    "is_hurwitz",
    "error_solution",
    "simulate",
]


class SimulationDiverged(ArithmeticError):
    def __init__(self, t: float):
        super().__init__(f"non-finite state at t={t:.12g}")
        self.t = t


@dataclass(frozen=True, eq=False)
class GainSet:
    """Output-injection gains ``L_i`` (n x q_i) and consensus gains ``K_i`` (n x r_i)."""

    L: tuple
    K: tuple

    def __post_init__(self):
        object.__setattr__(self, "L", tuple(np.atleast_2d(np.asarray(m, dtype=float)) for m in self.L))
        object.__setattr__(self, "K", tuple(np.atleast_2d(np.asarray(m, dtype=float)) for m in self.K))

    def check(self, sys: ObserverNetworkSystem) -> None:
        if len(self.L) != sys.N or len(self.K) != sys.N:
            raise ValueError(f"gains must list {sys.N} nodes, got {len(self.L)} L and {len(self.K)} K")
        for i in range(sys.N):
            q, r = sys.C[i].shape[0], sys.H[i].shape[0]
            if self.L[i].shape != (sys.n, q) and not (q == 0 and self.L[i].size == 0):
                raise ValueError(f"nodes[{i}].L has shape {self.L[i].shape}, expected ({sys.n}, {q})")
            if self.K[i].shape != (sys.n, r) and not (r == 0 and self.K[i].size == 0):
                raise ValueError(f"nodes[{i}].K has shape {self.K[i].shape}, expected ({sys.n}, {r})")

    def _blocks(self, sys):
        L = [m if m.size else np.zeros((sys.n, sys.C[i].shape[0])) for i, m in enumerate(self.L)]
        K = [m if m.size else np.zeros((sys.n, sys.H[i].shape[0])) for i, m in enumerate(self.K)]
        return scipy.linalg.block_diag(*L), scipy.linalg.block_diag(*K)


@dataclass(frozen=True)
class ZeroDisturbance:
    kind = "zero"

    def sampler(self, channels: int, dt: float):
        zero = np.zeros(channels)
        return lambda step, t: zero


@dataclass(frozen=True)
class Sinusoid:
    """``amplitude * sin(2 pi frequency t)`` on every channel.

    Scalars broadcast; sequences give one value per channel, ordered as the
    plant disturbance followed by each node's measurement disturbance.
    """

    amplitude: float | tuple = 1.0
    frequency: float | tuple = 1.0
    kind = "sinusoid"

    def sampler(self, channels: int, dt: float):
        amp = np.broadcast_to(np.asarray(self.amplitude, dtype=float), (channels,))
        freq = np.broadcast_to(np.asarray(self.frequency, dtype=float), (channels,))
        return lambda step, t: amp * np.sin(2 * np.pi * freq * t)


@dataclass(frozen=True)
class HeldNoise:
    """Gaussian samples held for ``hold`` seconds, drawn from a seeded generator.

    The hold interval is rounded to a whole number of steps, and one sample
    covers every RK4 stage of a step, so a trace depends only on
    ``(seed, dt, hold, std)``.
    """

    seed: int = 0
    hold: float = 0.1
    std: float = 1.0
    kind = "noise"

    def sampler(self, channels: int, dt: float):
        rng = np.random.default_rng(self.seed)
        hold_steps = max(1, int(round(self.hold / dt)))
        state = {"index": -1, "value": np.zeros(channels)}

        def sample(step, t):
            index = step // hold_steps
            while state["index"] < index:
                state["value"] = self.std * rng.standard_normal(channels)
                state["index"] += 1
            return state["value"]

        return sample


@dataclass(frozen=True, eq=False)
class SimulationConfig:
    t_final: float
    dt: float
    x0: np.ndarray
    disturbance: object = field(default_factory=ZeroDisturbance)
    decimate: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_final >= self.dt:
            raise ValueError("t_final must be at least dt")
        if int(self.decimate) < 1:
            raise ValueError("decimate must be a positive integer")
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))
        object.__setattr__(self, "decimate", int(self.decimate))

    @property
    def steps(self) -> int:
        return int(round(self.t_final / self.dt))


@dataclass(frozen=True, eq=False)
class Trace:
    """Recorded samples; ``estimates`` has shape (samples, N, n)."""

    times: np.ndarray
    states: np.ndarray
    estimates: np.ndarray
    errors: np.ndarray

    @property
    def error_norms(self) -> np.ndarray:
        return np.linalg.norm(self.errors, axis=2)

    def header(self) -> list[str]:
        _, N, n = self.estimates.shape
        cols = ["t"] + [f"x_{k}" for k in range(1, n + 1)]
        cols += [f"xhat_{i}_{k}" for i in range(1, N + 1) for k in range(1, n + 1)]
        cols += [f"err_{i}" for i in range(1, N + 1)]
        return cols

    def to_csv(self, stream=None) -> str | None:
        """Write the trace as CSV; returns the text when no stream is given."""
        out = io.StringIO() if stream is None else stream
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(self.header())
        norms = self.error_norms
        T, N, n = self.estimates.shape
        for k in range(T):
            row = [self.times[k], *self.states[k], *self.estimates[k].ravel(), *norms[k]]
            writer.writerow([f"{v:.12g}" for v in row])
        return out.getvalue() if stream is None else None


def closed_loop_matrix(sys: ObserverNetworkSystem, gains: GainSet) -> np.ndarray:
    """``I kron A - diag(L_i) barC - diag(K_i) barH``."""
    gains.check(sys)
    st = build_stacked(sys)
    L, K = gains._blocks(sys)
    return st.barA - L.reshape(sys.N * sys.n, -1) @ st.barC - K.reshape(sys.N * sys.n, -1) @ st.barH


def spectral_abscissa(M) -> float:
    return float(np.max(np.linalg.eigvals(np.asarray(M, dtype=float)).real))


def is_hurwitz(M) -> tuple[bool, float]:
    """(Hurwitz?, maximum real part of the spectrum)."""
    a = spectral_abscissa(M)
    return a < 0, a


def error_solution(sys: ObserverNetworkSystem, gains: GainSet, e0, t: float) -> np.ndarray:
    """Undisturbed stacked error at time ``t`` via the matrix exponential."""
    return scipy.linalg.expm(closed_loop_matrix(sys, gains) * t) @ np.asarray(e0, dtype=float)


def _rk4_step(f, step, t, z, h):
    k1 = f(step, t, z)
    k2 = f(step, t + h / 2, z + h / 2 * k1)
    k3 = f(step, t + h / 2, z + h / 2 * k2)
    k4 = f(step, t + h, z + h * k3)
    return z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def simulate(sys: ObserverNetworkSystem, gains: GainSet, config: SimulationConfig) -> Trace:
    """Integrate plant and observers from ``x(0) = x0``, ``xhat_i(0) = 0``.

    Raises
    ------
    SimulationDiverged
        When the state stops being finite.
    """
    n, N = sys.n, sys.N
    if config.x0.shape != (n,):
        raise ValueError(f"x0 has shape {config.x0.shape}, expected ({n},)")
    acl = closed_loop_matrix(sys, gains)
    L, _ = gains._blocks(sys)
    L = L.reshape(N * n, -1)

    m = sys.B.shape[1]
    local = [d.shape[1] for d in sys.Dbar]
    channels = m + sum(local)
    # Disturbance-to-measurement map for the stacked outputs y = barC x + W w.
    W = np.zeros((sum(c.shape[0] for c in sys.C), channels))
    row, col = 0, m
    for i in range(N):
        q = sys.C[i].shape[0]
        W[row:row + q, :m] = sys.D[i]
        W[row:row + q, col:col + local[i]] = sys.Dbar[i]
        row += q
        col += local[i]
    plant_in = np.hstack([sys.B, np.zeros((n, channels - m))])
    err_in = L @ W - np.kron(np.ones((N, 1)), plant_in)
    sample = config.disturbance.sampler(channels, config.dt)

    def rhs(step, t, z):
        w = sample(step, t)
        x, e = z[:n], z[n:]
        return np.concatenate([sys.A @ x + plant_in @ w, acl @ e + err_in @ w])

    z = np.concatenate([config.x0, np.tile(-config.x0, N)])
    h = config.dt
    times, zs = [0.0], [z]
    for step in range(config.steps):
        t = step * h
        with np.errstate(over="ignore", invalid="ignore"):
            z = _rk4_step(rhs, step, t, z, h)
        if not np.all(np.isfinite(z)):
            raise SimulationDiverged((step + 1) * h)
        if (step + 1) % config.decimate == 0 or step + 1 == config.steps:
            times.append((step + 1) * h)
            zs.append(z)
    zs = np.array(zs)
    states = zs[:, :n]
    errors = zs[:, n:].reshape(-1, N, n)
    return Trace(np.array(times), states, states[:, None, :] + errors, errors)
