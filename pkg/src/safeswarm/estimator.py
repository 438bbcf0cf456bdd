"""Online, conservative estimation of neighbors' acceleration limits.

Each agent watches its neighbors' velocities, finite-differences them into
an observed acceleration magnitude, smooths that exponentially, and raises
its per-neighbor limit estimate toward any observation that exceeds it:

    d(est)/dt = gain * (max(est, observed) - est)

Estimates start at a global floor, never decrease, and, because the
observed magnitude of a box-limited control never exceeds the true limit,
never overshoot it under noiseless observations. Underestimates keep the
safety constraints they feed strictly more cautious than the truth.

Magnitudes use the max-abs (per-axis) norm, matching the box that bounds
the controls being observed.
"""

from __future__ import annotations

import numpy as np


class LimitEstimator:
    """Running estimates of other agents' acceleration limits.

    Parameters
    ----------
    neighbor_ids:
        Ids this estimator will track. Estimates for all of them start at
        ``accel_floor``.
    accel_floor:
        Global conservative lower bound on any agent's acceleration limit.
    gain:
        Adaptation rate (1/s) of the estimate toward large observations.
    smoothing:
        Fraction of each new finite-difference sample blended into the
        smoothed observation; 1.0 disables smoothing.
    obs_cap:
        Optional hard cap on the smoothed observation, for scenarios where
        measurement noise could otherwise push it past a true limit.
        Disabled by default.
    """

    def __init__(
        self,
        neighbor_ids,
        accel_floor: float,
        gain: float,
        smoothing: float = 0.2,
        obs_cap: float | None = None,
    ):
        if not accel_floor > 0:
            raise ValueError(f"accel_floor must be positive, got {accel_floor!r}")
        if not gain > 0:
            raise ValueError(f"gain must be positive, got {gain!r}")
        if not 0 < smoothing <= 1:
            raise ValueError(f"smoothing must be in (0, 1], got {smoothing!r}")
        self.accel_floor = float(accel_floor)
        self.gain = float(gain)
        self.smoothing = float(smoothing)
        self.obs_cap = None if obs_cap is None else float(obs_cap)
        self.estimates: dict[int, float] = {int(j): self.accel_floor for j in neighbor_ids}
        self._last_v: dict[int, np.ndarray] = {}
        self._obs: dict[int, float] = {int(j): 0.0 for j in neighbor_ids}

    def observe(self, j: int, v_observed: np.ndarray, dt: float) -> None:
        """Fold one velocity observation of neighbor j into the smoothed
        acceleration magnitude. The first observation only stores v."""
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt!r}")
        v = np.asarray(v_observed, dtype=float).reshape(2)
        if j not in self.estimates:
            self.estimates[j] = self.accel_floor
            self._obs[j] = 0.0
        last = self._last_v.get(j)
        if last is not None:
            raw = float(np.max(np.abs(v - last))) / dt
            if self.obs_cap is not None:
                raw = min(raw, self.obs_cap)
            self._obs[j] = (1.0 - self.smoothing) * self._obs[j] + self.smoothing * raw
        self._last_v[j] = v.copy()

    def update(self, j: int, dt: float) -> None:
        """One Euler step of the adaptation law for neighbor j."""
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt!r}")
        est = self.estimates[j]
        self.estimates[j] = est + dt * self.gain * (max(est, self._obs[j]) - est)

    def observed_accel(self, j: int) -> float:
        """Current smoothed acceleration magnitude for neighbor j."""
        return self._obs[j]
