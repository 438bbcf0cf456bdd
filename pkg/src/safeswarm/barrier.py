"""Braking-distance barriers and the linear control constraints they induce.

For a pair of planar double integrators the barrier

    h = sqrt(2 (a_i + a_j) (dist - Ds)) + vbar

is nonnegative exactly when the pair, braking at its combined limit
a_i + a_j, still comes to rest at least Ds apart. Keeping h nonnegative is
done by bounding its decay rate, -dh/dt <= gain * h^3, which after scaling
by the pair distance becomes a single linear constraint on the pair's
controls. This module builds that constraint:

* ``centralized_row``  - one ensemble row coupling both agents' controls;
* ``strategy_a_rows``  - rate split: each agent bounds its own share of dh/dt;
* ``strategy_b_rows``  - bound split: each agent receives a share of the
  ensemble bound (needs the neighbor's limit to evaluate it);
* ``strategy_c_row``   - hybrid split computable from the agent's own
  parameters plus sensed relative state only, also usable with a
  conservative estimate of the neighbor's acceleration limit.

Per-agent rows are expressed in the owner's own frame and scaled so that
the two rows of a pair sum exactly to the ensemble row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import AgentParams, AgentState, RelativeState, relative_state


class AlreadyViolatedError(RuntimeError):
    """A pair is at or inside its safety distance; no constraint can be built."""

    def __init__(self, i: int, j: int, dist: float, safety_dist: float):
        self.pair = (i, j)
        self.dist = dist
        self.safety_dist = safety_dist
        super().__init__(
            f"agents {i} and {j} are {dist:.6g} m apart, inside safety distance "
            f"{safety_dist:.6g} m"
        )


@dataclass(frozen=True)
class BarrierConfig:
    """How pairwise safety distances and constraint numerics are chosen.

    ds_mode "sum_of_radii" uses r_i + r_j per pair; "fixed" uses one global
    distance ``ds`` for every pair. epsilon floors the (dist - Ds) factor in
    constraint denominators so bounds stay finite as a pair approaches its
    safety distance, while remaining maximally restrictive.
    """

    ds_mode: str = "sum_of_radii"
    ds: float | None = None
    epsilon: float = 1e-6

    def __post_init__(self):
        if self.ds_mode not in ("sum_of_radii", "fixed"):
            raise ValueError(f"unknown ds_mode {self.ds_mode!r}")
        if self.ds_mode == "fixed":
            if self.ds is None or not self.ds > 0:
                raise ValueError("fixed ds_mode requires a positive ds")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def safety_distance(self, pi: AgentParams, pj: AgentParams) -> float:
        if self.ds_mode == "fixed":
            return float(self.ds)
        return pi.radius + pj.radius


@dataclass(frozen=True)
class HalfspaceRow:
    """One linear constraint a . u <= b on a control vector.

    Per-agent rows have a 2-vector ``a`` acting on the owning agent's
    control; ensemble rows have a 2N-vector with nonzero blocks on both
    agents of the pair. ``pair`` records (owner, other) for per-agent rows
    and (i, j) with i < j for ensemble rows.
    """

    a: np.ndarray
    b: float
    pair: tuple[int, int]


@dataclass(frozen=True)
class NeighborInfo:
    """Interaction radius of one agent plus the bounds it was derived from."""

    neighbor_radius: float  # m
    min_other_accel: float  # m/s^2, conservative lower bound on others' limits
    max_other_speed: float  # m/s, conservative upper bound on others' speeds


def pair_barrier(rel: RelativeState, accel_sum: float, safety_dist: float) -> tuple[float, bool]:
    """Barrier value for a pair, plus a flag set when dist <= safety_dist.

    Inside the safety disk the square-root term is taken as zero, so the
    returned value reduces to the closing speed.
    """
    if not accel_sum > 0:
        raise ValueError(f"accel_sum must be positive, got {accel_sum!r}")
    gap = rel.dist - safety_dist
    inside = gap <= 0.0
    h = float(np.sqrt(2.0 * accel_sum * max(gap, 0.0)) + rel.vbar)
    return h, inside


def _guard_pair(i: int, j: int, rel: RelativeState, safety_dist: float) -> None:
    if rel.dist <= safety_dist:
        raise AlreadyViolatedError(i, j, rel.dist, safety_dist)


def _floored_gap(rel: RelativeState, safety_dist: float, epsilon: float) -> float:
    return max(rel.dist - safety_dist, epsilon)


def centralized_bound(
    rel: RelativeState,
    accel_sum: float,
    gamma: float,
    safety_dist: float,
    epsilon: float,
) -> float:
    """Right-hand side of the ensemble constraint -dp . du <= b for one pair."""
    h, _ = pair_barrier(rel, accel_sum, safety_dist)
    dpdv = float(rel.dp @ rel.dv)
    denom = np.sqrt(2.0 * accel_sum * _floored_gap(rel, safety_dist, epsilon))
    return float(
        gamma * h**3 * rel.dist
        - dpdv**2 / rel.dist**2
        + rel.dv @ rel.dv
        + accel_sum * dpdv / denom
    )


def centralized_row(
    i: int,
    j: int,
    states: list[AgentState],
    params: list[AgentParams],
    cfg: BarrierConfig,
    gamma: float | None = None,
) -> HalfspaceRow:
    """Ensemble constraint for pair (i, j) over the stacked control vector.

    Coefficients are -dp on agent i's block and +dp on agent j's, zero
    elsewhere. Uses a single gain (agent i's unless overridden); per-agent
    gains belong to the decentralized strategies.
    """
    rel = relative_state(states[i], states[j])
    safety_dist = cfg.safety_distance(params[i], params[j])
    _guard_pair(i, j, rel, safety_dist)
    accel_sum = params[i].accel_limit + params[j].accel_limit
    if gamma is None:
        gamma = params[i].barrier_gain
    b = centralized_bound(rel, accel_sum, gamma, safety_dist, cfg.epsilon)
    a = np.zeros(2 * len(states))
    a[2 * i : 2 * i + 2] = -rel.dp
    a[2 * j : 2 * j + 2] = rel.dp
    return HalfspaceRow(a, b, (i, j))


def _rate_split_bound(
    rel: RelativeState,
    v_self: np.ndarray,
    accel_self: float,
    accel_other: float,
    gamma_self: float,
    safety_dist: float,
    epsilon: float,
) -> float:
    # Own share of the barrier decay rate, scaled by dist so the two
    # per-agent rows of a pair sum exactly to the ensemble row.
    accel_sum = accel_self + accel_other
    h, _ = pair_barrier(rel, accel_sum, safety_dist)
    dpdv = float(rel.dp @ rel.dv)
    dpv = float(rel.dp @ v_self)
    denom = np.sqrt(2.0 * accel_sum * _floored_gap(rel, safety_dist, epsilon))
    return float(
        (accel_self / accel_sum) * gamma_self * h**3 * rel.dist
        + rel.dv @ v_self
        - dpdv * dpv / rel.dist**2
        + accel_sum * dpv / denom
    )


def strategy_a_rows(
    i: int,
    j: int,
    states: list[AgentState],
    params: list[AgentParams],
    cfg: BarrierConfig,
) -> tuple[HalfspaceRow, HalfspaceRow]:
    """Rate-split rows for pair (i, j): one per agent, over its own control.

    Each agent bounds the decrease of h attributable to its own state
    derivative by its acceleration-limit share of gain * h^3. Velocity
    dependent terms are moved into the bound so the decision variable is
    the agent's control alone.
    """
    rel = relative_state(states[i], states[j])
    safety_dist = cfg.safety_distance(params[i], params[j])
    _guard_pair(i, j, rel, safety_dist)
    ai, aj = params[i].accel_limit, params[j].accel_limit
    b_i = _rate_split_bound(
        rel, states[i].v, ai, aj, params[i].barrier_gain, safety_dist, cfg.epsilon
    )
    b_j = _rate_split_bound(
        rel.flipped(), states[j].v, aj, ai, params[j].barrier_gain, safety_dist, cfg.epsilon
    )
    return (
        HalfspaceRow(-rel.dp.copy(), b_i, (i, j)),
        HalfspaceRow(rel.dp.copy(), b_j, (j, i)),
    )


def strategy_b_rows(
    i: int,
    j: int,
    states: list[AgentState],
    params: list[AgentParams],
    cfg: BarrierConfig,
) -> tuple[HalfspaceRow, HalfspaceRow]:
    """Bound-split rows for pair (i, j): each agent takes a share of the
    ensemble bound proportional to its acceleration limit."""
    rel = relative_state(states[i], states[j])
    safety_dist = cfg.safety_distance(params[i], params[j])
    _guard_pair(i, j, rel, safety_dist)
    ai, aj = params[i].accel_limit, params[j].accel_limit
    accel_sum = ai + aj
    b_i = (ai / accel_sum) * centralized_bound(
        rel, accel_sum, params[i].barrier_gain, safety_dist, cfg.epsilon
    )
    b_j = (aj / accel_sum) * centralized_bound(
        rel, accel_sum, params[j].barrier_gain, safety_dist, cfg.epsilon
    )
    return (
        HalfspaceRow(-rel.dp.copy(), b_i, (i, j)),
        HalfspaceRow(rel.dp.copy(), b_j, (j, i)),
    )


def strategy_c_row(
    i: int,
    j: int,
    states: list[AgentState],
    self_params: AgentParams,
    other_accel: float,
    cfg: BarrierConfig,
    safety_dist: float | None = None,
) -> HalfspaceRow:
    """Hybrid-split row for agent i against j, from local information only.

    Needs the owner's own parameters, the sensed relative state and own
    velocity, plus ``other_accel``: the neighbor's acceleration limit or a
    conservative estimate of it. With an underestimate the implied pairwise
    safe set shrinks, so safety is preserved.
    """
    if not other_accel > 0:
        raise ValueError(f"other_accel must be positive, got {other_accel!r}")
    rel = relative_state(states[i], states[j])
    if safety_dist is None:
        if cfg.ds_mode != "fixed":
            # Pairwise distances need the neighbor's (sensed) radius; the
            # caller must supply them in sum_of_radii mode.
            raise ValueError("sum_of_radii mode requires an explicit safety_dist")
        safety_dist = float(cfg.ds)
    _guard_pair(i, j, rel, safety_dist)
    accel_sum = self_params.accel_limit + other_accel
    h, _ = pair_barrier(rel, accel_sum, safety_dist)
    dpdv = float(rel.dp @ rel.dv)
    dpv = float(rel.dp @ states[i].v)
    share = self_params.accel_limit / accel_sum
    denom = np.sqrt(2.0 * _floored_gap(rel, safety_dist, cfg.epsilon))
    b = float(
        -dpdv * dpv / rel.dist**2
        + rel.dv @ states[i].v
        + share
        * (
            self_params.barrier_gain * h**3 * rel.dist
            + np.sqrt(accel_sum) * dpdv / denom
        )
    )
    return HalfspaceRow(-rel.dp.copy(), b, (i, j))


def as_ensemble(row: HalfspaceRow, n_agents: int) -> np.ndarray:
    """Embed a per-agent row's coefficients into the stacked control space."""
    owner = row.pair[0]
    a = np.zeros(2 * n_agents)
    a[2 * owner : 2 * owner + 2] = row.a
    return a


def neighbor_radius(
    params_i: AgentParams,
    min_other_accel: float,
    max_other_speed: float,
    safety_dist: float,
) -> float:
    """Distance beyond which agent i can ignore another agent entirely.

    Outside this radius the pair's worst-case approach (both at top speed,
    weakest combined braking, own gain) cannot defeat the barrier before a
    constraint would activate, so no row needs to be built.
    """
    for name, value in (
        ("min_other_accel", min_other_accel),
        ("max_other_speed", max_other_speed),
        ("safety_dist", safety_dist),
    ):
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value!r}")
    accel_sum = params_i.accel_limit + min_other_accel
    reach = np.cbrt(2.0 * accel_sum / params_i.barrier_gain) + params_i.speed_limit + max_other_speed
    return float(safety_dist + reach**2 / (2.0 * accel_sum))


def neighbors(i: int, states: list[AgentState], info: NeighborInfo) -> set[int]:
    """Indices of agents within agent i's interaction radius (inclusive)."""
    result = set()
    for j, sj in enumerate(states):
        if j == i:
            continue
        if float(np.linalg.norm(states[i].p - sj.p)) <= info.neighbor_radius:
            result.add(j)
    return result
