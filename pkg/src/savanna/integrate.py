"""Time stepping for the flow-plus-fire system.

Two schemes are provided:

* ``nsfd`` - the positivity-preserving scheme whose denominator functions are
  matched to the dominant linear rates.  The grass update is exact on the
  grass-only subsystem, and the desert and forest equilibria are fixed points
  for every step size.
* ``reference`` - classical fixed-step fourth-order Runge-Kutta, used as the
  accuracy oracle between fires.

``simulate`` integrates segment by segment, applying the fire map at every
multiple of the fire period; the step is snapped to an exact divisor of the
period so fires land on grid nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import (
    ModelParams,
    NumericalError,
    VegState,
    _impulse,
    _rhs,
    impulse_map,
    require_valid,
)

__all__ = [
    "DenominatorFunctions", "Trajectory", "denominators", "nsfd_step",
    "nsfd_impulse", "reference_step", "simulate",
]


@dataclass(frozen=True)
class DenominatorFunctions:
    """NSFD denominators phi (trees) and phi_G (grass) for one step size."""

    q: float
    phi: float
    phi_g: float


def denominators(p: ModelParams, h: float) -> DenominatorFunctions:
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    q = max(p.mu_NS, p.gamma_S - (p.mu_S + p.omega_S))
    phi = math.expm1(q * h) / q if q != 0.0 else h
    rate = p.gamma_G - p.mu_G
    if p.mu_G > 0:
        phi_g = math.expm1(rate * h) / rate if rate != 0.0 else h
    else:
        phi_g = math.exp(p.gamma_G * h) / p.gamma_G
    return DenominatorFunctions(q=q, phi=phi, phi_g=phi_g)


def _nsfd_step(ts: float, tns: float, g: float, p: ModelParams,
               phi: float, phi_g: float):
    """One NSFD update on plain floats.  Order matters: grass first (from the
    old T_NS), then mature trees (from the old T_S), then sensitive trees
    (from the new T_NS and the old grass)."""
    rate = p.gamma_G - p.mu_G
    g_den = 1.0 + phi_g * (p.gamma_G * g / p.K_G + p.sigma_NS * tns)
    if g_den <= 0.0:
        # only reachable with facilitation (sigma_NS < 0) and a large step
        raise NumericalError(
            "grass update denominator is nonpositive (facilitation term "
            f"sigma_NS*T_NS = {p.sigma_NS * tns:.3g} dominates); reduce the step"
        )
    # 1 + phi_g*rate == exp(rate*h) when mu_G > 0, keeping the grass step exact
    g_new = g * (1.0 + phi_g * rate) / g_den
    tns_new = (tns + phi * p.omega_S * ts) / (1.0 + phi * p.mu_NS)
    crowd = (p.gamma_S * ts + p.gamma_NS * tns) / p.K_T
    ts_new = (
        ts * (1.0 + phi * (p.gamma_S - p.mu_S - p.omega_S))
        + phi * tns_new * (p.gamma_NS - crowd)
    ) / (1.0 + phi * (crowd + p.sigma_G * g))
    return ts_new, tns_new, g_new


def nsfd_step(s: VegState, p: ModelParams, h: float) -> VegState:
    d = denominators(p, h)
    return VegState(*_nsfd_step(s.t_s, s.t_ns, s.g, p, d.phi, d.phi_g))


def nsfd_impulse(s: VegState, p: ModelParams) -> VegState:
    """Discrete fire event; identical to the continuous-time fire map."""
    return impulse_map(s, p)


def _rk4_step(ts: float, tns: float, g: float, p: ModelParams, h: float):
    a1, b1, c1 = _rhs(ts, tns, g, p)
    a2, b2, c2 = _rhs(ts + 0.5 * h * a1, tns + 0.5 * h * b1, g + 0.5 * h * c1, p)
    a3, b3, c3 = _rhs(ts + 0.5 * h * a2, tns + 0.5 * h * b2, g + 0.5 * h * c2, p)
    a4, b4, c4 = _rhs(ts + h * a3, tns + h * b3, g + h * c3, p)
    sixth = h / 6.0
    return (
        ts + sixth * (a1 + 2.0 * (a2 + a3) + a4),
        tns + sixth * (b1 + 2.0 * (b2 + b3) + b4),
        g + sixth * (c1 + 2.0 * (c2 + c3) + c4),
    )


def reference_step(s: VegState, p: ModelParams, h: float) -> VegState:
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    ts, tns, g = _rk4_step(s.t_s, s.t_ns, s.g, p, h)
    return VegState(ts, tns, g)


@dataclass(frozen=True)
class Trajectory:
    """Sampled run: grid samples plus explicit pre/post states at each fire.

    ``samples`` holds the state at every grid time; at fire times the stored
    sample is the post-fire state (right-continuous convention) and the
    matching ``impulse_records`` entry carries both sides.
    """

    samples: tuple[tuple[float, VegState], ...]
    impulse_records: tuple[tuple[float, VegState, VegState], ...]
    h_requested: float
    h_effective: float
    scheme: str

    def to_csv(self) -> str:
        impulses = {t: (pre, post) for t, pre, post in self.impulse_records}
        lines = ["t,T_S,T_NS,G,event"]

        def row(t, s, event=""):
            lines.append(f"{t:.17g},{s.t_s:.17g},{s.t_ns:.17g},{s.g:.17g},{event}")

        for t, s in self.samples:
            if t in impulses:
                pre, post = impulses[t]
                row(t, pre, "pre_fire")
                row(t, post, "post_fire")
            else:
                row(t, s)
        return "\n".join(lines) + "\n"

    def final_state(self) -> VegState:
        return self.samples[-1][1]


def _sanitize(ts, tns, g, t, floor):
    """Zero out integrator undershoot just below 0; fail loudly otherwise.

    The reference scheme is not positivity preserving, so decaying
    compartments may dip a rounding-sized amount below zero; anything larger
    (or non-finite) means the run has genuinely left the feasible cone.
    """
    if not (math.isfinite(ts) and math.isfinite(tns) and math.isfinite(g)):
        raise NumericalError(f"state became non-finite at t = {t:.6g}")
    out = []
    for v in (ts, tns, g):
        if v < 0.0:
            if v < -floor:
                raise NumericalError(
                    f"state left the feasible region at t = {t:.6g} "
                    f"(component {v:.3g})"
                )
            v = 0.0
        out.append(v)
    return out[0], out[1], out[2]


def simulate(p: ModelParams, s0: VegState, horizon: float, h: float,
             scheme: str = "nsfd") -> Trajectory:
    """Integrate from ``s0`` over ``[0, horizon]`` with fires at every
    multiple of the fire period.

    The requested step is coerced to tau/m with m = ceil(tau/h) so fire times
    are grid nodes; the effective step is recorded on the trajectory.  Output
    is deterministic for identical inputs.
    """
    require_valid(p)
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    if scheme not in ("nsfd", "reference"):
        raise ValueError(f"unknown scheme {scheme!r}")

    m = max(1, math.ceil(p.tau / h - 1e-12))
    h_eff = p.tau / m
    if scheme == "nsfd":
        d = denominators(p, h_eff)

        def step(ts, tns, g, hh):
            if hh == h_eff:
                return _nsfd_step(ts, tns, g, p, d.phi, d.phi_g)
            dd = denominators(p, hh)
            return _nsfd_step(ts, tns, g, p, dd.phi, dd.phi_g)
    else:
        def step(ts, tns, g, hh):
            return _rk4_step(ts, tns, g, p, hh)

    n_periods = int(math.floor(horizon / p.tau + 1e-9))
    remainder = horizon - n_periods * p.tau
    if remainder < 1e-9 * p.tau:
        remainder = 0.0
    floor = 1e-9 * max(p.K_T, p.K_G)

    ts, tns, g = s0.t_s, s0.t_ns, s0.g
    samples: list[tuple[float, VegState]] = [(0.0, VegState(ts, tns, g))]
    impulses: list[tuple[float, VegState, VegState]] = []

    for k in range(n_periods):
        base = k * p.tau
        for j in range(1, m + 1):
            ts, tns, g = step(ts, tns, g, h_eff)
            t = base + j * h_eff if j < m else (k + 1) * p.tau
            ts, tns, g = _sanitize(ts, tns, g, t, floor)
            if j < m:
                samples.append((t, VegState(ts, tns, g)))
        t_fire = (k + 1) * p.tau
        pre = VegState(ts, tns, g)
        ts, tns, g = _impulse(ts, tns, g, p)
        post = VegState(ts, tns, g)
        impulses.append((t_fire, pre, post))
        samples.append((t_fire, post))

    if remainder > 0.0:
        base = n_periods * p.tau
        n_rem = int(math.floor(remainder / h_eff + 1e-12))
        for j in range(1, n_rem + 1):
            ts, tns, g = step(ts, tns, g, h_eff)
            t = base + j * h_eff
            ts, tns, g = _sanitize(ts, tns, g, t, floor)
            samples.append((t, VegState(ts, tns, g)))
        last = remainder - n_rem * h_eff
        if last > 1e-12 * p.tau:
            ts, tns, g = step(ts, tns, g, last)
            ts, tns, g = _sanitize(ts, tns, g, horizon, floor)
            samples.append((horizon, VegState(ts, tns, g)))

    return Trajectory(
        samples=tuple(samples),
        impulse_records=tuple(impulses),
        h_requested=h,
        h_effective=h_eff,
        scheme=scheme,
    )
