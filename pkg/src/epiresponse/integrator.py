"""Adaptive integration of the protection-response dynamics.

The field is smooth except, for step responses, on the line L = {i ==
i_star}, where it switches between two polynomial branches.  Away from L a
Dormand-Prince 5(4) pair with a quartic dense-output interpolant advances
the state; crossings of L are located on the dense output by bisection and
the integration restarts on the other side with the matching branch, so
each crossing switches the regime exactly once.

The solution is a scalar pair (s, i): the stepper below works on raw
floats rather than arrays, which keeps the per-step cost low enough to
push trajectories through the slow spiral towards a sliding equilibrium.

Near an asymptotically stable sliding point the crossings accumulate: the
inverse crossing radius grows by a fixed amount per revolution, so no
finite-step method reaches the point itself in finite time.  When the
closed-form stability certificate holds and the observed crossing radii
are small and monotonically shrinking, the integrator terminates *at* the
sliding point (see `IntegratorConfig.capture_spiral`); this truncation of
the infinite crossing sequence is the only deviation from plain numerical
integration and can be disabled.
"""

import dataclasses
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .equilibria import (
    EquilibriumKind,
    Verdict,
    find_equilibria,
    stability_sliding,
)
from .model import (
    DOMAIN_SLACK,
    ConstantResponse,
    ModelParams,
    ResponseSpec,
    SigmoidResponse,
    State,
    StepResponse,
    eval_response_arrays,
    eval_response_selected,
    field,
)

__all__ = [
    "EventKind",
    "TerminationReason",
    "IntegratorConfig",
    "Trajectory",
    "StepUnderflowError",
    "LeftDomainError",
    "DomainError",
    "integrate",
    "integrate_sliding",
    "energy_E",
    "monotone_M",
    "dulac_scan",
    "classify_basin",
]


class EventKind(Enum):
    CROSS_UP = "CrossUp"
    CROSS_DOWN = "CrossDown"
    HIT_SLIDING = "HitSliding"
    REACHED_EQUILIBRIUM = "ReachedEquilibrium"


class TerminationReason(Enum):
    EQUILIBRIUM = "equilibrium"
    T_MAX = "t_max"


class StepUnderflowError(RuntimeError):
    """Step size collapsed below 1e-14 * t_max; carries the last state."""

    def __init__(self, t: float, state: State):
        super().__init__(f"step size underflow at t={t} near state {state}")
        self.t = t
        self.state = state


class LeftDomainError(RuntimeError):
    """A sample left the unit simplex beyond slack (integrator defect)."""


class DomainError(ValueError):
    """Argument outside the domain of a diagnostic function."""


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    t_max: float = 1e4
    event_tol: float = 1e-10
    equilibrium_eps: float = 1e-7
    # Sliding-point endgame: terminate at the sliding equilibrium once its
    # stability certificate holds and `capture_count` consecutive crossing
    # radii are all below `capture_radius` and strictly shrinking.
    capture_spiral: bool = True
    capture_radius: float = 3e-3
    capture_count: int = 6
    store_dense: bool = True
    store_samples: bool = True

    def __post_init__(self):
        for name in (
            "rel_tol",
            "abs_tol",
            "t_max",
            "event_tol",
            "equilibrium_eps",
            "capture_radius",
        ):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.capture_count < 2:
            raise ValueError("capture_count must be at least 2")


# Dormand-Prince 5(4) tableau.
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = (
    9017 / 3168,
    -355 / 33,
    46732 / 5247,
    49 / 176,
    -5103 / 18656,
)
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    -71 / 57600,
    71 / 16695,
    -71 / 1920,
    17253 / 339200,
    -22 / 525,
    1 / 40,
)
# Quartic dense output: y(t0 + u*h) = y0 + h*u*(q1 + u*(q2 + u*(q3 + u*q4)))
# with q1 = k1 and q2..q4 the stage combinations below (stage 2 unused).
_P1_2, _P1_3, _P1_4 = -2.8535800653862835, 3.0717434641059005, -1.1270175653862835
_P3_2, _P3_3, _P3_4 = 4.023133379230305, -6.249321565289, 2.675424484351598
_P4_2, _P4_3, _P4_4 = -3.7324019615885042, 10.068970589843675, -5.685526961588504
_P5_2, _P5_3, _P5_4 = 2.5548038301849423, -6.399112377351017, 3.5219323679207912
_P6_2, _P6_3, _P6_4 = -1.3744241142186024, 3.272657752246729, -1.7672812570757455
_P7_2, _P7_3, _P7_4 = 1.3824689317781436, -3.764937863556287, 2.382468931778144

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_EVENT_PROBES = (0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0)

_REGIME_ABOVE = "above"
_REGIME_BELOW = "below"
_REGIME_SMOOTH = "smooth"


@dataclass
class Trajectory:
    """An integrated path: samples, regime-change events and dense segments.

    ``times``/``states`` hold the accepted step endpoints (plus crossing
    states); ``events`` the (t, kind) log.  `evaluate` interpolates on the
    stored dense segments.  If the sliding-point capture fired, the final
    sample is the certified limit point itself rather than the last
    crossing state (they differ by at most the capture radius).
    """

    times: np.ndarray
    states: np.ndarray
    events: list[tuple[float, EventKind]]
    reason: TerminationReason
    _segments: list | None = None
    _seg_starts: np.ndarray | None = None

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> State:
        s, i = self.states[-1]
        return State(float(s), float(i))

    @property
    def samples(self) -> list[tuple[float, State]]:
        return [
            (float(t), State(float(s), float(i)))
            for t, (s, i) in zip(self.times, self.states)
        ]

    def evaluate(self, times) -> np.ndarray:
        """Dense solution values at the requested times, shape (n, 2)."""
        if self._segments is None:
            raise ValueError("trajectory was integrated without dense storage")
        queries = np.atleast_1d(np.asarray(times, dtype=float))
        t0 = float(self.times[0])
        t1 = self.final_time
        out = np.empty((queries.size, 2))
        if np.any(queries < t0 - 1e-12) or np.any(queries > t1 + 1e-12):
            raise ValueError(f"query times outside [{t0}, {t1}]")
        if not self._segments:
            out[:, 0], out[:, 1] = self.states[-1]
            return out
        for idx, tq in enumerate(queries):
            k = int(np.searchsorted(self._seg_starts, tq, side="right")) - 1
            k = min(max(k, 0), len(self._segments) - 1)
            seg_t0, seg_t1, h, s0, i0, qs, qi = self._segments[k]
            u = (tq - seg_t0) / h
            u = min(max(u, 0.0), (seg_t1 - seg_t0) / h)
            out[idx, 0] = s0 + h * u * (qs[0] + u * (qs[1] + u * (qs[2] + u * qs[3])))
            out[idx, 1] = i0 + h * u * (qi[0] + u * (qi[1] + u * (qi[2] + u * qi[3])))
        return out


def _make_rhs(params: ModelParams, spec: ResponseSpec, regime: str):
    beta, gamma, delta = params.beta, params.gamma, params.delta
    if regime == _REGIME_ABOVE:

        def rhs(s, i):
            return -beta * s * i - gamma * s, (beta * s - delta) * i

        return rhs
    if regime == _REGIME_BELOW:

        def rhs(s, i):
            return -beta * s * i + gamma * (1.0 - s - i), (beta * s - delta) * i

        return rhs
    if isinstance(spec, SigmoidResponse):
        i_star, eps = spec.i_star, spec.epsilon
        lo = i_star - 0.5 * eps

        def rhs(s, i):
            if i <= lo:
                p_sp = 0.0
            else:
                p_sp = (i - lo) / eps
                if p_sp > 1.0:
                    p_sp = 1.0
            return (
                -beta * s * i - gamma * s * p_sp + gamma * (1.0 - s - i) * (1.0 - p_sp),
                (beta * s - delta) * i,
            )

        return rhs
    if isinstance(spec, ConstantResponse):
        p_sp, p_ps = spec.p_sp, spec.p_ps

        def rhs(s, i):
            return (
                -beta * s * i - gamma * s * p_sp + gamma * (1.0 - s - i) * p_ps,
                (beta * s - delta) * i,
            )

        return rhs

    def rhs(s, i):
        p_sp, p_ps = eval_response_selected(spec, i)
        return (
            -beta * s * i - gamma * s * p_sp + gamma * (1.0 - s - i) * p_ps,
            (beta * s - delta) * i,
        )

    return rhs


def _initial_step(rhs, s, i, fs, fi, rel_tol, abs_tol, t_left):
    scale_s = abs_tol + rel_tol * abs(s)
    scale_i = abs_tol + rel_tol * abs(i)
    d0 = math.sqrt(0.5 * ((s / scale_s) ** 2 + (i / scale_i) ** 2))
    d1 = math.sqrt(0.5 * ((fs / scale_s) ** 2 + (fi / scale_i) ** 2))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, t_left)
    gs, gi = rhs(s + h0 * fs, i + h0 * fi)
    d2 = (
        math.sqrt(0.5 * (((gs - fs) / scale_s) ** 2 + ((gi - fi) / scale_i) ** 2)) / h0
    )
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, t_left)


def _clip_to_domain(t, s, i):
    if s < 0.0:
        if s < -DOMAIN_SLACK:
            raise LeftDomainError(f"s = {s} at t = {t}")
        s = 0.0
    if i < 0.0:
        if i < -DOMAIN_SLACK:
            raise LeftDomainError(f"i = {i} at t = {t}")
        i = 0.0
    excess = s + i - 1.0
    if excess > 0.0:
        if excess > DOMAIN_SLACK:
            raise LeftDomainError(f"s + i = {s + i} at t = {t}")
        s -= excess
    return s, i


def integrate(
    params: ModelParams,
    spec: ResponseSpec,
    x0: State,
    cfg: IntegratorConfig | None = None,
) -> Trajectory:
    """Integrate from ``x0`` until equilibrium or ``cfg.t_max``.

    Step responses get crossing detection on L = {i == i_star}: CrossUp /
    CrossDown events are bisected to ``event_tol`` and the regime switches
    there.  A start exactly on L is resolved by the sign of di/dt =
    (beta*s - delta)*i: off the tangency point the trajectory immediately
    crosses; at s == delta/beta it either *is* the sliding equilibrium
    (when admissible) or continues with the below-threshold branch — the
    canonical selection (p_sp, p_ps) = (0, 1), one fixed choice among the
    admissible continuations, kept for reproducibility.

    Termination with a ReachedEquilibrium event requires both proximity
    (within ``equilibrium_eps``) to an admissible equilibrium and a field
    norm below ``equilibrium_eps`` (segment distance on L).
    """
    if cfg is None:
        cfg = IntegratorConfig()
    beta, delta = params.beta, params.delta
    is_step = isinstance(spec, StepResponse)
    i_star = spec.i_star if is_step else None
    equilibria = find_equilibria(params, spec)
    eq_points = [(eq.point.s, eq.point.i, eq) for eq in equilibria]
    eps = cfg.equilibrium_eps

    sliding_eq = next(
        (eq for eq in equilibria if eq.kind is EquilibriumKind.SLIDING), None
    )
    capture_armed = False
    if is_step and cfg.capture_spiral and sliding_eq is not None:
        report = stability_sliding(params, i_star)
        capture_armed = report.verdict is Verdict.ASYMPTOTICALLY_STABLE

    t = 0.0
    s, i = x0.s, x0.i
    events: list[tuple[float, EventKind]] = []
    sample_t = [0.0]
    sample_s = [s]
    sample_i = [i]
    store_samples = cfg.store_samples
    segments = [] if cfg.store_dense else None
    radii: list[float] = []

    def build(reason):
        if store_samples:
            times = np.array(sample_t)
            states = np.column_stack([sample_s, sample_i])
        elif t > 0.0:
            times = np.array([0.0, t])
            states = np.array([[sample_s[0], sample_i[0]], [s, i]])
        else:
            times = np.array([0.0])
            states = np.array([[sample_s[0], sample_i[0]]])
        traj = Trajectory(times=times, states=states, events=events, reason=reason)
        if segments is not None:
            traj._segments = segments
            traj._seg_starts = np.array([seg[0] for seg in segments])
        return traj

    # Resolve the starting regime.
    if is_step:
        if i == i_star:
            s_slide = delta / beta
            if s > s_slide:
                regime = _REGIME_ABOVE
                events.append((t, EventKind.CROSS_UP))
            elif s < s_slide:
                regime = _REGIME_BELOW
                events.append((t, EventKind.CROSS_DOWN))
            elif sliding_eq is not None:
                events.append((t, EventKind.HIT_SLIDING))
                events.append((t, EventKind.REACHED_EQUILIBRIUM))
                return build(TerminationReason.EQUILIBRIUM)
            else:
                regime = _REGIME_BELOW  # canonical selection at the tangency
        else:
            regime = _REGIME_ABOVE if i > i_star else _REGIME_BELOW
    else:
        regime = _REGIME_SMOOTH

    rhs = _make_rhs(params, spec, regime)
    fs, fi = rhs(s, i)

    def near_equilibrium():
        for es, ei, _eq in eq_points:
            if abs(s - es) <= eps and abs(i - ei) <= eps:
                norm = field(params, spec, State(s, i)).distance_to_zero()
                if norm <= eps:
                    return True
        return False

    if near_equilibrium():
        events.append((t, EventKind.REACHED_EQUILIBRIUM))
        return build(TerminationReason.EQUILIBRIUM)

    h = _initial_step(rhs, s, i, fs, fi, cfg.rel_tol, cfg.abs_tol, cfg.t_max)
    min_step = 1e-14 * cfg.t_max
    rel_tol, abs_tol = cfg.rel_tol, cfg.abs_tol
    t_max = cfg.t_max
    event_tol = cfg.event_tol
    store_dense = cfg.store_dense

    while t < t_max:
        remaining = t_max - t
        if remaining < min_step:
            break  # within round-off of the horizon
        h = min(h, remaining)
        if h < min_step:
            raise StepUnderflowError(t, State(s, i))

        # One Dormand-Prince attempt (first-same-as-last: fs, fi is stage 1).
        k2s, k2i = rhs(s + h * (_A21 * fs), i + h * (_A21 * fi))
        k3s, k3i = rhs(
            s + h * (_A31 * fs + _A32 * k2s), i + h * (_A31 * fi + _A32 * k2i)
        )
        k4s, k4i = rhs(
            s + h * (_A41 * fs + _A42 * k2s + _A43 * k3s),
            i + h * (_A41 * fi + _A42 * k2i + _A43 * k3i),
        )
        k5s, k5i = rhs(
            s + h * (_A51 * fs + _A52 * k2s + _A53 * k3s + _A54 * k4s),
            i + h * (_A51 * fi + _A52 * k2i + _A53 * k3i + _A54 * k4i),
        )
        k6s, k6i = rhs(
            s + h * (_A61 * fs + _A62 * k2s + _A63 * k3s + _A64 * k4s + _A65 * k5s),
            i + h * (_A61 * fi + _A62 * k2i + _A63 * k3i + _A64 * k4i + _A65 * k5i),
        )
        s1 = s + h * (_B1 * fs + _B3 * k3s + _B4 * k4s + _B5 * k5s + _B6 * k6s)
        i1 = i + h * (_B1 * fi + _B3 * k3i + _B4 * k4i + _B5 * k5i + _B6 * k6i)
        k7s, k7i = rhs(s1, i1)
        err_s = h * (
            _E1 * fs + _E3 * k3s + _E4 * k4s + _E5 * k5s + _E6 * k6s + _E7 * k7s
        )
        err_i = h * (
            _E1 * fi + _E3 * k3i + _E4 * k4i + _E5 * k5i + _E6 * k6i + _E7 * k7i
        )
        scale_s = abs_tol + rel_tol * max(abs(s), abs(s1))
        scale_i = abs_tol + rel_tol * max(abs(i), abs(i1))
        err = math.sqrt(0.5 * ((err_s / scale_s) ** 2 + (err_i / scale_i) ** 2))
        if err > 1.0:
            h *= max(_MIN_FACTOR, _SAFETY * err**-0.2)
            continue

        qi = qs = None
        if is_step or store_dense:
            qi = (
                fi,
                _P1_2 * fi + _P3_2 * k3i + _P4_2 * k4i + _P5_2 * k5i
                + _P6_2 * k6i + _P7_2 * k7i,
                _P1_3 * fi + _P3_3 * k3i + _P4_3 * k4i + _P5_3 * k5i
                + _P6_3 * k6i + _P7_3 * k7i,
                _P1_4 * fi + _P3_4 * k3i + _P4_4 * k4i + _P5_4 * k5i
                + _P6_4 * k6i + _P7_4 * k7i,
            )

        crossed = None
        if is_step:
            want_positive = regime == _REGIME_BELOW
            qi1, qi2, qi3, qi4 = qi
            u_prev = 0.0
            for u in _EVENT_PROBES:
                g = i + h * u * (qi1 + u * (qi2 + u * (qi3 + u * qi4))) - i_star
                if (g > 0.0) if want_positive else (g < 0.0):
                    crossed = (u_prev, u)
                    break
                u_prev = u

        if qs is None and (store_dense or crossed is not None):
            qs = (
                fs,
                _P1_2 * fs + _P3_2 * k3s + _P4_2 * k4s + _P5_2 * k5s
                + _P6_2 * k6s + _P7_2 * k7s,
                _P1_3 * fs + _P3_3 * k3s + _P4_3 * k4s + _P5_3 * k5s
                + _P6_3 * k6s + _P7_3 * k7s,
                _P1_4 * fs + _P3_4 * k3s + _P4_4 * k4s + _P5_4 * k5s
                + _P6_4 * k6s + _P7_4 * k7s,
            )

        if crossed is not None:
            ua, ub = crossed
            while (ub - ua) * h > event_tol:
                um = 0.5 * (ua + ub)
                g = i + h * um * (qi1 + um * (qi2 + um * (qi3 + um * qi4))) - i_star
                if (g > 0.0) if want_positive else (g < 0.0):
                    ub = um
                else:
                    ua = um
            ue = ub
            te = t + ue * h
            se = s + h * ue * (qs[0] + ue * (qs[1] + ue * (qs[2] + ue * qs[3])))
            se, _ = _clip_to_domain(te, se, i_star)
            if segments is not None:
                segments.append((t, te, h, s, i, qs, qi))
            kind = EventKind.CROSS_UP if want_positive else EventKind.CROSS_DOWN
            events.append((te, kind))
            t, s, i = te, se, i_star
            if store_samples:
                sample_t.append(t)
                sample_s.append(s)
                sample_i.append(i)

            # Certified sliding-point endgame.
            if capture_armed:
                radii.append(abs(s - sliding_eq.point.s))
                n = cfg.capture_count
                if len(radii) >= n:
                    recent = radii[-n:]
                    if all(r < cfg.capture_radius for r in recent) and all(
                        b < a for a, b in zip(recent, recent[1:])
                    ):
                        s, i = sliding_eq.point.s, sliding_eq.point.i
                        if store_samples:
                            sample_s[-1] = s
                            sample_i[-1] = i
                        events.append((t, EventKind.HIT_SLIDING))
                        events.append((t, EventKind.REACHED_EQUILIBRIUM))
                        return build(TerminationReason.EQUILIBRIUM)

            regime = _REGIME_ABOVE if want_positive else _REGIME_BELOW
            rhs = _make_rhs(params, spec, regime)
            fs, fi = rhs(s, i)
            if near_equilibrium():
                events.append((t, EventKind.REACHED_EQUILIBRIUM))
                return build(TerminationReason.EQUILIBRIUM)
            continue  # reuse the current h; the controller re-adapts

        # Plain accepted step.
        te = t + h
        s1c, i1c = _clip_to_domain(te, s1, i1)
        if segments is not None:
            segments.append((t, te, h, s, i, qs, qi))
        if s1c != s1 or i1c != i1:
            fs, fi = rhs(s1c, i1c)
        else:
            fs, fi = k7s, k7i
        t, s, i = te, s1c, i1c
        if store_samples:
            sample_t.append(t)
            sample_s.append(s)
            sample_i.append(i)
        if near_equilibrium():
            events.append((t, EventKind.REACHED_EQUILIBRIUM))
            return build(TerminationReason.EQUILIBRIUM)
        if err == 0.0:
            h *= _MAX_FACTOR
        else:
            h *= min(_MAX_FACTOR, _SAFETY * err**-0.2)

    return build(TerminationReason.T_MAX)


def integrate_sliding(
    params: ModelParams,
    i_star: float,
    x0: State,
    cfg: IntegratorConfig | None = None,
) -> Trajectory:
    """Integrate a start on the discontinuity line of a step response.

    Thin wrapper over `integrate` that enforces the on-line precondition;
    the crossing/tangency resolution (immediate CrossUp/CrossDown by the
    sign of di/dt, HitSliding at the sliding equilibrium, canonical
    below-threshold continuation otherwise) lives in `integrate`.
    """
    if x0.i != i_star:
        raise ValueError(f"x0 must lie on i == i_star, got i={x0.i}, i_star={i_star}")
    return integrate(params, StepResponse(i_star), x0, cfg)


def energy_E(params: ModelParams, x: State) -> float:
    """First-integral diagnostic of the above-threshold branch.

        E(s, i) = s - (delta/beta)*ln(s) + i + (gamma/beta)*ln(i)

    Constant along trajectories while they remain strictly above the
    threshold (everyone protecting); only defined for s, i > 0.
    """
    if x.s <= 0.0 or x.i <= 0.0:
        raise DomainError(f"energy_E needs s, i > 0, got ({x.s}, {x.i})")
    beta, gamma, delta = params.beta, params.gamma, params.delta
    return x.s - (delta / beta) * math.log(x.s) + x.i + (gamma / beta) * math.log(x.i)


def monotone_M(params: ModelParams, x: State) -> float:
    """Lyapunov-like diagnostic of the below-threshold branch.

        M(s, i) = s - (delta/beta + gamma/beta)*ln(s + gamma/beta)
                  + i - I1*ln(i),
        I1 = gamma*(beta - delta)/(beta*(gamma + delta)).

    Non-increasing along below-threshold trajectories:

        dM/dt = -(beta*s - delta)^2/(beta*s + gamma)
                * (1 + gamma/beta)/(1 + delta/gamma) <= 0,

    vanishing only at s = delta/beta.
    """
    if x.s <= 0.0 or x.i <= 0.0:
        raise DomainError(f"monotone_M needs s, i > 0, got ({x.s}, {x.i})")
    beta, gamma, delta = params.beta, params.gamma, params.delta
    i1 = gamma * (beta - delta) / (beta * (gamma + delta))
    return (
        x.s
        - (delta / beta + gamma / beta) * math.log(x.s + gamma / beta)
        + x.i
        - i1 * math.log(x.i)
    )


def dulac_scan(params: ModelParams, spec: ResponseSpec, grid_n: int) -> float:
    """Worst (largest) value of div(F/i) over a grid of D with i >= 1/grid_n.

        div(F/i) = -beta - gamma*(p_sp(i) + p_ps(i))/i

    A strictly negative maximum rules out periodic orbits in the scanned
    region (divergence test with multiplier 1/i).
    """
    if grid_n < 2:
        raise ValueError("grid_n must be at least 2")
    if isinstance(spec, StepResponse):
        raise TypeError("the divergence scan requires a single-valued response")
    i_vals = np.linspace(1.0 / grid_n, 1.0, grid_n)
    s_vals = np.linspace(0.0, 1.0, grid_n)
    p_sp, p_ps = eval_response_arrays(spec, i_vals)
    div_by_i = -params.beta - params.gamma * (p_sp + p_ps) / i_vals
    ss, ii = np.meshgrid(s_vals, i_vals)
    mask = ss + ii <= 1.0 + DOMAIN_SLACK
    values = np.broadcast_to(div_by_i[:, None], ss.shape)
    return float(values[mask].max())


def classify_basin(
    params: ModelParams,
    spec: ResponseSpec,
    x0_grid: list[State],
    cfg: IntegratorConfig | None = None,
) -> dict[State, EquilibriumKind | None]:
    """Label every start by the equilibrium its trajectory reaches.

    ``None`` marks starts still unresolved at t_max.  Dense/sample storage
    is disabled for the sweep; only the labels survive.
    """
    if cfg is None:
        cfg = IntegratorConfig()
    run_cfg = dataclasses.replace(cfg, store_dense=False, store_samples=False)
    equilibria = find_equilibria(params, spec)
    labels: dict[State, EquilibriumKind | None] = {}
    for x0 in x0_grid:
        traj = integrate(params, spec, x0, run_cfg)
        if traj.reason is not TerminationReason.EQUILIBRIUM:
            labels[x0] = None
            continue
        fs, fi = traj.states[-1]
        best = min(
            equilibria,
            key=lambda eq: max(abs(fs - eq.point.s), abs(fi - eq.point.i)),
        )
        dist = max(abs(fs - best.point.s), abs(fi - best.point.i))
        labels[x0] = best.kind if dist <= 10.0 * cfg.equilibrium_eps else None
    return labels
