"""Two-instance Gauss-Seidel coupling of a rigid body and a deformable body.

Each step exchanges, in this order::

    deformable -> rigid   StepSync        step, t, dt, predicted slave positions
    rigid -> deformable   ProjectionData  projections of penetrating nodes,
                                          master velocity and acceleration
    deformable -> rigid   ContactForces   per-node contact forces
    deformable -> rigid   ResetFlag       True repeats the step on both sides

The rigid instance runs in its own thread; the two sides share nothing but
the messages, which are sent over rendezvous channels.
"""

import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .contact import (ContactLayer, MasterSurface, Projections, apply_contact_constraints,
                      contact_reactions, detect_contact, release_nodes)
from .dynamics import (EnergyLedger, RigidBodyState, TimeLoopConfig, check_finite,
                       rk4_step)
from .errors import ChannelClosedError, DesyncError
from .fem import KinematicState, Solid

PROTOCOL_VERSION = 1


# --------------------------------------------------------------------------
# Messages and channels

@dataclass
class StepSync:
    step: int
    t: float
    dt: float
    nodes: np.ndarray
    positions: np.ndarray


@dataclass
class ProjectionData:
    step: int
    projections: Projections
    master_velocity: np.ndarray
    master_acceleration: np.ndarray


@dataclass
class ContactForces:
    step: int
    nodes: np.ndarray
    forces: np.ndarray


@dataclass
class ResetFlag:
    step: int
    reset: bool


@dataclass
class Stop:
    step: int


SEQUENCE = (StepSync, ProjectionData, ContactForces, ResetFlag)

_EMPTY = object()


class Channel:
    """One-directional rendezvous channel: ``send`` returns once the peer has taken the message."""

    def __init__(self):
        self._cv = threading.Condition()
        self._slot = _EMPTY
        self._closed = False
        self.wait_time = 0.0

    def send(self, msg, timeout=None):
        t0 = time.perf_counter()
        with self._cv:
            if not self._cv.wait_for(lambda: self._slot is _EMPTY or self._closed, timeout):
                raise ChannelClosedError("send timed out")
            if self._closed:
                raise ChannelClosedError("channel closed")
            self._slot = msg
            self._cv.notify_all()
            ok = self._cv.wait_for(lambda: self._slot is not msg or self._closed, timeout)
            if self._slot is msg:
                self._slot = _EMPTY
                raise ChannelClosedError("channel closed before delivery" if ok
                                         else "send timed out")
        self.wait_time += time.perf_counter() - t0

    def recv(self, timeout=None):
        t0 = time.perf_counter()
        with self._cv:
            if not self._cv.wait_for(lambda: self._slot is not _EMPTY or self._closed, timeout):
                raise ChannelClosedError("receive timed out")
            if self._slot is _EMPTY:
                raise ChannelClosedError("channel closed")
            msg, self._slot = self._slot, _EMPTY
            self._cv.notify_all()
        self.wait_time += time.perf_counter() - t0
        return msg

    def close(self):
        with self._cv:
            self._closed = True
            self._cv.notify_all()


class Endpoint:
    """One side of a duplex link; checks message type and step index on receipt."""

    def __init__(self, out: Channel, inp: Channel, name: str):
        self.out, self.inp, self.name = out, inp, name

    def send(self, msg):
        self.out.send(msg)

    def expect(self, kinds, step=None):
        msg = self.inp.recv()
        kinds = kinds if isinstance(kinds, tuple) else (kinds,)
        if not isinstance(msg, kinds):
            raise DesyncError(f"{self.name}: expected {'/'.join(k.__name__ for k in kinds)}, "
                              f"got {type(msg).__name__}")
        if step is not None and msg.step != step:
            raise DesyncError(f"{self.name}: expected step {step}, got step {msg.step} "
                              f"({type(msg).__name__})")
        return msg

    @property
    def wait_time(self):
        return self.out.wait_time + self.inp.wait_time

    def close(self):
        self.out.close()
        self.inp.close()


def link():
    """Two connected endpoints (deformable side, rigid side)."""
    a, b = Channel(), Channel()
    return Endpoint(a, b, "deformable"), Endpoint(b, a, "rigid")


# --------------------------------------------------------------------------
# Rigid instance

class RigidInstance:
    """Master side: integrates the rigid body and computes projections."""

    def __init__(self, body: RigidBodyState, surface: MasterSurface, margin=None,
                 gap_tol=None):
        self.body = body
        self.surface = surface
        self.origin = body.x.copy()
        self.margin = surface.facet_size if margin is None else margin
        self.gap_tol = 1e-9 * surface.facet_size if gap_tol is None else gap_tol
        self.history = []
        self.contact_time = 0.0
        self.error = None

    @property
    def offset(self):
        return self.body.x - self.origin

    def accuracy_time_step(self, fraction=0.5):
        """Largest step that moves the body by ``fraction`` of a facet."""
        speed = float(np.linalg.norm(self.body.v))
        return np.inf if speed == 0.0 else fraction * self.surface.facet_size / speed

    def serve(self, ep: Endpoint):
        step = 0
        try:
            while True:
                msg = ep.expect((StepSync, Stop))
                if isinstance(msg, Stop):
                    return
                if msg.step != step:
                    raise DesyncError(f"rigid: expected step {step}, got {msg.step}")
                snap = self.body.copy()
                rk4_step(self.body, msg.dt, msg.t)
                t0 = time.perf_counter()
                proj = detect_contact(msg.positions, msg.nodes, self.surface, self.offset,
                                      self.margin, self.gap_tol)
                self.contact_time += time.perf_counter() - t0
                ep.send(ProjectionData(step, proj, self.body.v.copy(), self.body.a.copy()))
                forces = ep.expect(ContactForces, step)
                flag = ep.expect(ResetFlag, step)
                if flag.reset:
                    self.body = snap
                    continue
                self.body.fe = -np.sum(forces.forces, axis=0) if len(forces.forces) \
                    else np.zeros(3)
                self.history.append((step, msg.t + msg.dt, self.body.x.copy(),
                                     self.body.v.copy(), self.body.fe.copy()))
                step += 1
        except ChannelClosedError:
            pass
        except BaseException as exc:
            self.error = exc
            ep.close()


# --------------------------------------------------------------------------
# Deformable instance

@dataclass
class StepRecord:
    step: int
    t: float
    dt: float
    n_contact: int
    n_released: int
    resets: int
    contact_force: np.ndarray
    reactions_n: np.ndarray = field(default_factory=lambda: np.zeros(0))


class DeformableInstance:
    """Slave side: explicit update with contact constraints and node release.

    Parameters
    ----------
    solid : Solid
    slave_nodes : node ids that may touch the master surface.
    fixed : (n_nodes, 3) bool mask of clamped dofs.
    gravity : (3,) body acceleration.
    loads : (n_nodes, 3) constant nodal forces.
    damping : mass-proportional damping coefficient (1/s).
    """

    def __init__(self, solid: Solid, slave_nodes, fixed=None, gravity=None, loads=None,
                 damping=0.0, v0=None):
        self.solid = solid
        n = solid.n_nodes
        self.m = solid.lumped_mass()
        self.fixed = np.zeros((n, 3), bool) if fixed is None else np.asarray(fixed, bool)
        self.gravity = np.zeros(3) if gravity is None else np.asarray(gravity, float)
        self.f_ext = self.m[:, None] * self.gravity[None, :]
        if loads is not None:
            self.f_ext = self.f_ext + loads
        self.damping = float(damping)
        self.layer = ContactLayer(slave_nodes, n)
        self.state = KinematicState.at_rest(self.m)
        if v0 is not None:
            self.state.v[:] = v0
        self.state.v[self.fixed] = 0.0
        self.state.f_ext = self.f_ext.copy()
        self.state.f_int = solid.internal_force(self.state.d)
        solid.commit()
        self.state.a = self._free_accel(self.state.f_int, self.state.v)
        self.ledger = EnergyLedger()
        self.max_abs_reaction = 0.0

    def _free_force(self, f_int, v):
        f = self.f_ext - f_int
        if self.damping:
            f = f - self.damping * self.m[:, None] * v
        return f

    def _free_accel(self, f_int, v):
        a = self._free_force(f_int, v) / self.m[:, None]
        a[self.fixed] = 0.0
        return a

    def slave_positions(self, d):
        j = self.layer.slave_nodes
        return self.solid.x_ref[j] + d[j]

    def step(self, ep: Endpoint, step, t, dt, scheme="tw", phi=1.033):
        """Advance one step, repeating it while nodes are released."""
        st = self.state
        layer = self.layer
        layer.begin_step()
        limit = len(layer.slave_nodes) + 1
        resets = 0
        x_ref = self.solid.x_ref
        while True:
            if scheme == "tw":
                d1 = st.d + dt * st.v + phi * dt * dt * st.a
                v1 = st.v + dt * st.a
            else:
                v1 = st.v + 0.5 * dt * st.a
                d1 = st.d + dt * v1
            d1[self.fixed] = 0.0
            v1[self.fixed] = 0.0
            ep.send(StepSync(step, t, dt, layer.slave_nodes, self.slave_positions(d1)))
            pd = ep.expect(ProjectionData, step)
            proj_all = pd.projections
            proj = layer.filter(proj_all)
            vm = pd.master_velocity
            if scheme == "cd":
                vm = vm - 0.5 * dt * pd.master_acceleration
            dv = apply_contact_constraints(proj, x_ref + d1, d1, v1, vm)
            f_int = self.solid.internal_force(d1)
            f_free = self._free_force(f_int, v1)
            a1 = f_free / self.m[:, None]
            r = contact_reactions(proj, self.m, f_free, pd.master_acceleration)
            if len(proj):
                a1[proj.nodes] += r / self.m[proj.nodes, None]
            a1[self.fixed] = 0.0
            bad, reset = release_nodes(proj, r)
            if reset:
                ep.send(ContactForces(step, np.zeros(0, np.int64), np.zeros((0, 3))))
                ep.send(ResetFlag(step, True))
                layer.release(proj.nodes[bad], limit)
                resets += 1
                continue
            break
        if scheme == "cd":
            v1 = v1 + 0.5 * dt * a1
            v1[self.fixed] = 0.0
        # nodes released in this step stay free; keep them out of the master
        clip = proj_all.subset(layer.excluded[proj_all.nodes]) if len(proj_all) else proj_all
        if len(clip):
            d1[clip.nodes] += clip.points - (x_ref[clip.nodes] + d1[clip.nodes])
        check_finite(step, t + dt, d=d1, v=v1, a=a1)
        # contact momentum transferred during the step, per node
        nodes, c = self._contact_impulse(proj, r, dv, dt, scheme)
        ep.send(ContactForces(step, nodes, c))
        ep.send(ResetFlag(step, False))
        dd = d1 - st.d
        self.ledger.add_internal(st.f_int, f_int, dd)
        self.ledger.add_external(self.f_ext, self.f_ext, dd)
        if self.damping:
            self.ledger.damping_work += float(np.sum(self.damping * self.m[:, None]
                                                     * v1 * v1)) * dt
        if len(nodes):
            self.ledger.add_contact(c, dd[nodes])
        self.solid.commit()
        layer.accept(proj, r)
        if len(r):
            self.max_abs_reaction = max(self.max_abs_reaction,
                                        float(np.abs(np.einsum("ij,ij->i", r, proj.normals)).max()))
        st.d, st.v, st.a, st.f_int = d1, v1, a1, f_int
        rn = np.einsum("ij,ij->i", r, proj.normals) if len(proj) else np.zeros(0)
        return StepRecord(step, t + dt, dt, len(proj), int(layer.excluded.sum()), resets,
                          np.sum(c, axis=0) if len(c) else np.zeros(3), rn), proj

    def _contact_impulse(self, proj, r, dv, dt, scheme):
        """Contact force per node equal to the momentum it delivered this step over dt."""
        prev = np.nonzero(np.any(self.layer.reactions != 0.0, axis=1))[0]
        nodes = np.union1d(prev, proj.nodes).astype(np.int64)
        if not len(nodes):
            return nodes, np.zeros((0, 3))
        c = np.zeros((len(nodes), 3))
        pos_prev = np.searchsorted(nodes, prev)
        w_prev = 1.0 if scheme == "tw" else 0.5
        c[pos_prev] += w_prev * self.layer.reactions[prev]
        if len(proj):
            pos = np.searchsorted(nodes, proj.nodes)
            if scheme == "cd":
                c[pos] += 0.5 * r
            c[pos] += self.m[proj.nodes, None] * dv / dt
        return nodes, c

    def kinetic_energy(self):
        return 0.5 * float(np.sum(self.m[:, None] * self.state.v ** 2))

    def gravity_potential(self):
        return -float(np.sum(self.m[:, None] * self.gravity * self.state.d))

    def momentum(self):
        return np.sum(self.m[:, None] * self.state.v, axis=0)


# --------------------------------------------------------------------------
# Driver

@dataclass
class CoupledRun:
    records: list
    rigid_history: list
    steps: int
    t: float
    dt: float
    timings: dict
    deformable: DeformableInstance
    rigid: RigidInstance


def run_coupled(rigid: RigidInstance, deformable: DeformableInstance, config: TimeLoopConfig,
                dt=None, observer=None, on_step=None):
    """Run both instances to ``config.t_end``.

    ``observer(step, t, record, deformable, rigid_body)`` is called after
    every output-cadence step and after the last one; ``on_step`` after
    every step. The rigid body is read only between steps, when its thread
    is blocked waiting for the next StepSync.
    """
    auto = dt is None and config.dt is None
    if dt is None:
        dt = config.resolve_dt(deformable.solid.critical_time_step())
        if auto:
            dt = min(dt, rigid.accuracy_time_step())
    ep_d, ep_r = link()
    th = threading.Thread(target=rigid.serve, args=(ep_r,), name="rigid-instance", daemon=True)
    th.start()
    records = []
    t = 0.0
    step = 0
    cap = np.inf if config.max_steps is None else config.max_steps

    def finished():
        return step >= cap or t >= config.t_end - 1e-9 * dt

    t_wall = time.perf_counter()
    try:
        while not finished():
            h = min(dt, config.t_end - t)
            rec, proj = deformable.step(ep_d, step, t, h, config.scheme, config.phi)
            t = rec.t
            records.append(rec)
            if on_step is not None:
                on_step(step, rec, proj, deformable, rigid)
            step += 1
            if observer is not None and (step % config.output_every == 0 or finished()):
                observer(step, t, rec, deformable, rigid)
            if auto and config.dt_recompute_every and step % config.dt_recompute_every == 0:
                dt = min(config.resolve_dt(deformable.solid.critical_time_step(deformable.state.d)),
                         rigid.accuracy_time_step())
        ep_d.send(Stop(step))
    except ChannelClosedError:
        if rigid.error is not None:
            raise rigid.error
        raise
    except BaseException:
        ep_d.close()
        raise
    finally:
        th.join(timeout=10.0)
    if rigid.error is not None:
        raise rigid.error
    timings = {
        "total": time.perf_counter() - t_wall,
        "assembly": deformable.solid.timings.assembly,
        "contact": rigid.contact_time,
        "exchange": ep_d.wait_time,
    }
    return CoupledRun(records, rigid.history, step, t, dt, timings, deformable, rigid)
