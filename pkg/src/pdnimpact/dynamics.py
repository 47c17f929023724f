"""Explicit integrators, rigid-body RK4, smooth-step amplitudes and energy bookkeeping."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NonFiniteError, StabilityError

TW_PHI = 1.033


# --------------------------------------------------------------------------
# Amplitudes

def smooth_step(t, t0, tE, A0, AE):
    """Fifth-order ramp from A0 at t0 to AE at tE with zero end slopes and curvature."""
    if not t0 < tE:
        raise ValueError("smooth_step needs t0 < tE")
    xi = np.clip((np.asarray(t, float) - t0) / (tE - t0), 0.0, 1.0)
    return A0 + (AE - A0) * xi ** 3 * (10.0 - 15.0 * xi + 6.0 * xi ** 2)


def smooth_step_rate(t, t0, tE, A0, AE):
    xi = np.clip((np.asarray(t, float) - t0) / (tE - t0), 0.0, 1.0)
    return (AE - A0) * 30.0 * xi ** 2 * (1.0 - xi) ** 2 / (tE - t0)


def smooth_step_accel(t, t0, tE, A0, AE):
    xi = np.clip((np.asarray(t, float) - t0) / (tE - t0), 0.0, 1.0)
    return (AE - A0) * 60.0 * xi * (1.0 - xi) * (1.0 - 2.0 * xi) / (tE - t0) ** 2


@dataclass
class SmoothStep:
    """Callable amplitude returning (value, rate, acceleration)."""

    t0: float
    tE: float
    A0: float
    AE: float

    def __call__(self, t):
        args = (t, self.t0, self.tE, self.A0, self.AE)
        return float(smooth_step(*args)), float(smooth_step_rate(*args)), \
            float(smooth_step_accel(*args))


@dataclass
class Staircase:
    """Smooth ramps between successive ``levels``, each followed by a hold.

    Level k is reached at ``k * (t_ramp + t_hold) + t_ramp`` and held until
    :meth:`hold_end` ``(k)``. Calls return (value, rate, acceleration).
    """

    levels: tuple
    t_ramp: float
    t_hold: float
    start: float = 0.0

    def hold_end(self, k):
        return (k + 1) * (self.t_ramp + self.t_hold)

    @property
    def duration(self):
        return self.hold_end(len(self.levels) - 1)

    def __call__(self, t):
        period = self.t_ramp + self.t_hold
        k = min(int(t // period), len(self.levels) - 1) if t > 0 else 0
        a0 = self.start if k == 0 else self.levels[k - 1]
        t0 = k * period
        return SmoothStep(t0, t0 + self.t_ramp, a0, self.levels[k])(t)


# --------------------------------------------------------------------------
# Time-loop configuration

@dataclass
class TimeLoopConfig:
    t_end: float
    dt: float | None = None
    dt_safety: float = 0.6
    scheme: str = "tw"
    phi: float = TW_PHI
    output_every: int = 10
    dt_recompute_every: int = 100
    max_steps: int | None = None

    def __post_init__(self):
        self.scheme = self.scheme.lower()
        if self.scheme not in ("tw", "cd"):
            raise ConfigError(f"unknown scheme '{self.scheme}' (tw or cd)")
        if self.phi < 1.0:
            raise ConfigError("TW parameter phi must be >= 1")
        if not 0 < self.dt_safety <= 1:
            raise ConfigError("dt_safety must lie in (0, 1]")
        if self.t_end <= 0:
            raise ConfigError("t_end must be positive")

    def resolve_dt(self, dt_stable: float) -> float:
        """Fixed step (checked against the stable one) or safety * stable."""
        if self.dt is None:
            return self.dt_safety * dt_stable
        if self.dt > dt_stable:
            raise StabilityError(f"fixed dt {self.dt:.4g} s exceeds the stable "
                                 f"increment {dt_stable:.4g} s")
        return float(self.dt)


def check_finite(step, t, **arrays):
    for name, a in arrays.items():
        if not np.all(np.isfinite(a)):
            bad = np.argwhere(~np.isfinite(np.asarray(a)))[0]
            raise NonFiniteError(f"non-finite {name} at index {tuple(int(i) for i in bad)} "
                                 f"(step {step}, t = {t:.6g} s)")


# --------------------------------------------------------------------------
# Explicit updates on plain arrays

def tw_predict(d, v, a, dt, phi=TW_PHI):
    """Tchamwa-Wielgosz displacement and velocity at n+1 from state n."""
    return d + dt * v + phi * dt * dt * a, v + dt * a


def cd_predict(d, v, a, dt):
    """Velocity-Verlet (central difference) displacement and half-step velocity."""
    vh = v + 0.5 * dt * a
    return d + dt * vh, vh


def tw_step(state, dt, accel, phi=TW_PHI):
    """Advance a :class:`~pdnimpact.fem.KinematicState` by one TW step.

    ``accel(d, v)`` returns the acceleration at the new configuration.
    """
    state.d, state.v = tw_predict(state.d, state.v, state.a, dt, phi)
    state.a = accel(state.d, state.v)
    check_finite(-1, np.nan, d=state.d, a=state.a)
    return state


def cd_step(state, dt, accel):
    d, vh = cd_predict(state.d, state.v, state.a, dt)
    a = accel(d, vh)
    state.d, state.v, state.a = d, vh + 0.5 * dt * a, a
    check_finite(-1, np.nan, d=state.d, a=state.a)
    return state


def oscillator(scheme, n_steps, dt=0.1, m=1.0, k=1.0, x0=1.0, phi=TW_PHI):
    """Single-dof spring-mass history (positions at every step)."""
    x, v = float(x0), 0.0
    a = -k * x / m
    out = np.empty(n_steps + 1)
    out[0] = x
    for i in range(1, n_steps + 1):
        if scheme == "tw":
            x, v = x + dt * v + phi * dt * dt * a, v + dt * a
            a = -k * x / m
        else:
            vh = v + 0.5 * dt * a
            x = x + dt * vh
            a = -k * x / m
            v = vh + 0.5 * dt * a
        out[i] = x
    return out


def peak_amplitudes(x):
    """|x| at local extrema of a sampled signal."""
    ax = np.abs(x)
    i = np.nonzero((ax[1:-1] >= ax[:-2]) & (ax[1:-1] > ax[2:]))[0] + 1
    return ax[i]


# --------------------------------------------------------------------------
# Rigid body

def rk4(f, t, y, dt):
    """One classical Runge-Kutta step for dy/dt = f(t, y)."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt * (k1 / 6.0 + k2 / 3.0 + k3 / 3.0 + k4 / 6.0)


@dataclass
class RigidBodyState:
    """Translating rigid body.

    ``fe`` is the force it receives from the deformable body (already
    signed). Dofs in ``fixed`` keep zero velocity unless ``motion`` drives
    them: ``motion(t)`` returns (offset, rate, acceleration) along
    ``motion_dir`` relative to the initial position.
    """

    m: float
    x: np.ndarray
    v: np.ndarray
    g: np.ndarray = field(default_factory=lambda: np.zeros(3))
    fe: np.ndarray = field(default_factory=lambda: np.zeros(3))
    fixed: np.ndarray = field(default_factory=lambda: np.zeros(3, bool))
    motion: object = None
    motion_dir: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -1.0]))
    x0: np.ndarray = None
    a: np.ndarray = None

    def __post_init__(self):
        if not self.m > 0:
            raise ConfigError("rigid body mass must be positive")
        self.x = np.asarray(self.x, float).copy()
        self.v = np.asarray(self.v, float).copy()
        self.g = np.asarray(self.g, float)
        self.fe = np.asarray(self.fe, float).copy()
        self.fixed = np.asarray(self.fixed, bool)
        self.motion_dir = np.asarray(self.motion_dir, float)
        if self.x0 is None:
            self.x0 = self.x.copy()
        if self.motion is not None:
            self.fixed = np.ones(3, bool)
        self.v[self.fixed] = 0.0
        if self.motion is not None:
            _, r, acc = self.motion(0.0)
            self.v = r * self.motion_dir
            self.a = acc * self.motion_dir
        elif self.a is None:
            self.a = self._accel(self.fe)

    def _accel(self, fe):
        a = self.g + fe / self.m
        a[self.fixed] = 0.0
        return a

    def copy(self) -> "RigidBodyState":
        c = RigidBodyState.__new__(RigidBodyState)
        c.__dict__.update({k: (v.copy() if isinstance(v, np.ndarray) else v)
                           for k, v in self.__dict__.items()})
        return c

    @property
    def momentum(self):
        return self.m * self.v

    @property
    def kinetic_energy(self):
        return 0.5 * self.m * float(self.v @ self.v)


def rk4_step(body: RigidBodyState, dt, t=0.0, force=None):
    """Advance ``body`` from t to t + dt in place.

    ``force(t, x, v)`` gives the force on the body; by default the held
    contact force ``body.fe`` is used at every stage.
    """
    if body.motion is not None:
        off, rate, acc = body.motion(t + dt)
        body.x = body.x0 + off * body.motion_dir
        body.v = rate * body.motion_dir
        body.a = acc * body.motion_dir
        return body
    fe = body.fe
    free = ~body.fixed

    def rhs(s, y):
        f = fe if force is None else force(s, y[:3], y[3:])
        a = body._accel(np.asarray(f, float))
        v = y[3:].copy()
        v[~free] = 0.0
        return np.concatenate([v, a])

    y = rk4(rhs, t, np.concatenate([body.x, body.v]), dt)
    body.x, body.v = y[:3], y[3:]
    body.v[body.fixed] = 0.0
    body.a = rhs(t + dt, y)[3:]
    return body


# --------------------------------------------------------------------------
# Energy bookkeeping

@dataclass
class EnergyLedger:
    """Running work integrals (N mm = mJ) and recoverable energy snapshots."""

    internal_work: float = 0.0
    external_work: float = 0.0
    contact_work: float = 0.0
    damping_work: float = 0.0

    def add_internal(self, f_old, f_new, dd):
        self.internal_work += 0.5 * float(np.sum((f_old + f_new) * dd))

    def add_external(self, f_old, f_new, dd):
        self.external_work += 0.5 * float(np.sum((f_old + f_new) * dd))

    def add_contact(self, f, dd):
        self.contact_work += float(np.sum(f * dd))

    def copy(self) -> "EnergyLedger":
        return EnergyLedger(self.internal_work, self.external_work, self.contact_work,
                            self.damping_work)


def energy_report(m, v, ledger: EnergyLedger, recoverable: float, extra_kinetic=0.0):
    """Kinetic, internal (recoverable), dissipated, external and contact work."""
    ke = 0.5 * float(np.sum(m[:, None] * v * v)) + extra_kinetic
    return {
        "kinetic": ke,
        "internal": float(recoverable),
        "dissipated": float(ledger.internal_work - recoverable),
        "external_work": ledger.external_work,
        "contact_work": ledger.contact_work,
    }


def discrete_amplitude(x, dt, omega):
    """Amplitude of a sampled oscillation from consecutive samples.

    Exact and constant for the central-difference recurrence
    ``x[n+1] - 2c x[n] + x[n-1] = 0`` with ``c = 1 - (omega dt)^2 / 2``.
    """
    x = np.asarray(x, float)
    c = 1.0 - 0.5 * (omega * dt) ** 2
    q = x[1:] ** 2 - 2.0 * c * x[1:] * x[:-1] + x[:-1] ** 2
    return np.sqrt(np.maximum(q, 0.0) / (1.0 - c * c))
