"""Total-Lagrangian element groups, internal force assembly and lumped mass."""

import time
from dataclasses import dataclass

import numpy as np

from . import kernels, shapes
from .cohesive import CohesiveGroup
from .errors import ConfigError, ValidationError
from .materials import BulkMaterial, CohesiveProps, effective_stiffness
from .mesh import ElementKind, MeshModel


@dataclass
class KinematicState:
    """Nodal fields of one deformable body, stored as (n_nodes, 3) arrays."""

    d: np.ndarray
    v: np.ndarray
    a: np.ndarray
    m: np.ndarray
    f_ext: np.ndarray = None
    f_int: np.ndarray = None
    f_contact: np.ndarray = None

    def __post_init__(self):
        n = len(self.m)
        for name in ("f_ext", "f_int", "f_contact"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros((n, 3)))
        for name in ("d", "v", "a", "f_ext", "f_int", "f_contact"):
            if getattr(self, name).shape != (n, 3):
                raise ValidationError(f"{name} has shape {getattr(self, name).shape}, "
                                      f"expected {(n, 3)}")
        if np.any(self.m <= 0):
            raise ValidationError(f"non-positive lumped mass at node {int(np.argmin(self.m)) + 1}")

    @classmethod
    def at_rest(cls, m) -> "KinematicState":
        n = len(m)
        return cls(np.zeros((n, 3)), np.zeros((n, 3)), np.zeros((n, 3)), np.asarray(m, float))

    def copy(self) -> "KinematicState":
        return KinematicState(self.d.copy(), self.v.copy(), self.a.copy(), self.m,
                              self.f_ext.copy(), self.f_int.copy(), self.f_contact.copy())


def _hex8_reference():
    pts, w = shapes.hex8_gauss()
    N, dN = shapes.hex8_shape(pts)
    return N, dN, w


def _tet4_reference():
    pts, w = shapes.tet4_gauss()
    N, dN = shapes.tet4_shape(pts)
    return N, dN, w


class BulkGroup:
    """Precomputed reference geometry for one block of HEX8 or TET4 elements."""

    def __init__(self, kind, conn, x_ref, material: BulkMaterial, element_ids, frames=None):
        self.kind = kind
        self.conn = np.ascontiguousarray(conn, dtype=np.int64)
        self.element_ids = np.asarray(element_ids)
        self.material = material
        N, dN, w = _hex8_reference() if kind == ElementKind.HEX8 else _tet4_reference()
        xe = x_ref[self.conn]
        J = np.einsum("naj,qak->nqjk", xe, dN)  # dx_j / dxi_k
        detJ = np.linalg.det(J)
        if np.any(detJ <= 0):
            bad = int(np.nonzero((detJ <= 0).any(axis=1))[0][0])
            raise ValidationError(f"element {int(self.element_ids[bad]) + 1} has det J <= 0")
        Jinv = np.linalg.inv(J)
        self.N = N
        self.dNdX = np.ascontiguousarray(np.einsum("qak,nqkj->nqaj", dN, Jinv))
        self.wdetJ = np.ascontiguousarray(detJ * w)
        self.volumes = self.wdetJ.sum(axis=1)
        self.lc = np.cbrt(self.volumes)
        if frames is None:
            frames = np.broadcast_to(np.eye(3), (len(self.conn), 3, 3))
        else:
            frames = np.where(np.isfinite(frames), frames, np.eye(3))
        self.frames = np.ascontiguousarray(frames)

    def nodal_mass(self):
        return self.material.rho * np.einsum("qa,nq->na", self.N, self.wdetJ)

    def current_volumes(self, u):
        F = kernels.deformation_gradient(self.dNdX, self.conn, np.ascontiguousarray(u))
        return np.sum(self.wdetJ * np.linalg.det(F), axis=1)

    def critical_time_step(self, u=None):
        lc = self.lc if u is None else np.cbrt(np.maximum(self.current_volumes(u), 0.0))
        return lc * np.sqrt(self.material.rho / self.material.max_stiffness())


@dataclass
class ForceTimings:
    assembly: float = 0.0
    calls: int = 0


class Solid:
    """A deformable body: element groups, lumped mass and material history.

    Parameters
    ----------
    model : MeshModel
    materials : dict
        Material id to :class:`~pdnimpact.materials.BulkMaterial` for bulk
        blocks or :class:`~pdnimpact.materials.CohesiveProps` for interface
        blocks.
    interface_rule : {"newton-cotes", "gauss"}
    rhobar : dict, optional
        Interface surface density per material id, overriding the props.
    """

    def __init__(self, model: MeshModel, materials: dict, interface_rule="newton-cotes",
                 rhobar=None):
        self.model = model
        self.x_ref = model.nodes
        self.n_nodes = model.n_nodes
        self.groups = []
        self.cohesive = []
        offs = model.block_offsets
        frames = model.fields.get("frame")
        stacking = model.fields.get("stacking")
        rhobar = rhobar or {}
        for b, block in enumerate(model.blocks):
            if block.kind.is_facet:
                continue
            ids = np.arange(offs[b], offs[b + 1])
            if block.material not in materials:
                raise ConfigError(f"no material bound to id {block.material}")
            mat = materials[block.material]
            if block.kind == ElementKind.ELINT8:
                if not isinstance(mat, CohesiveProps):
                    raise ConfigError(f"material {block.material} on interface elements "
                                      "must be cohesive")
                st = None if stacking is None else stacking[ids]
                self.cohesive.append(CohesiveGroup(block.connectivity, self.x_ref, mat, ids,
                                                   st, interface_rule,
                                                   rhobar.get(block.material)))
            else:
                if not isinstance(mat, BulkMaterial):
                    raise ConfigError(f"material {block.material} on bulk elements must be "
                                      "a bulk material")
                fr = None if frames is None else frames[ids]
                self.groups.append(BulkGroup(block.kind, block.connectivity, self.x_ref, mat,
                                             ids, fr))
        self._build_gather()
        self.states = [g.material.new_state(g) for g in self.groups]
        self.coh_states = [g.new_state() for g in self.cohesive]
        self.trial_states = list(self.states)
        self.trial_coh = list(self.coh_states)
        self.timings = ForceTimings()

    def _build_gather(self):
        conns = [g.conn.reshape(-1) for g in self.groups + self.cohesive]
        flat = np.concatenate(conns) if conns else np.zeros(0, np.int64)
        order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=self.n_nodes)
        self._ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self._idx = order.astype(np.int64)

    def assemble(self, element_arrays):
        """Sum element arrays (list of (ne, nen, 3)) into nodal vectors."""
        if not element_arrays:
            return np.zeros((self.n_nodes, 3))
        flat = np.concatenate([a.reshape(-1, 3) for a in element_arrays])
        return kernels.gather(np.ascontiguousarray(flat[:, None, :]), self._ptr, self._idx,
                              self.n_nodes)

    def lumped_mass(self):
        """Row-sum lumped mass per node; interface elements add rhobar * area."""
        parts = [np.repeat(g.nodal_mass()[..., None], 3, axis=-1) for g in self.groups]
        parts += [np.repeat(g.nodal_mass()[..., None], 3, axis=-1) for g in self.cohesive]
        return self.assemble(parts)[:, 0]

    def internal_force(self, u):
        """Internal force for displacements ``u`` (n_nodes, 3).

        History is evaluated from the last committed state; the resulting
        trial state is kept until :meth:`commit`.
        """
        t0 = time.perf_counter()
        u = np.ascontiguousarray(u, dtype=float)
        fes = []
        trial = []
        for g, st in zip(self.groups, self.states):
            fe, new = g.material.forces(g, u, st)
            fes.append(fe)
            trial.append(new)
        trial_c = []
        for g, st in zip(self.cohesive, self.coh_states):
            fe, new = g.forces(u, st)
            fes.append(fe)
            trial_c.append(new)
        self.trial_states, self.trial_coh = trial, trial_c
        f = self.assemble(fes)
        self.timings.assembly += time.perf_counter() - t0
        self.timings.calls += 1
        return f

    def commit(self):
        self.states = self.trial_states
        self.coh_states = self.trial_coh

    def snapshot(self):
        return list(self.states), list(self.coh_states)

    def restore(self, snap):
        self.states, self.coh_states = list(snap[0]), list(snap[1])
        self.trial_states, self.trial_coh = list(self.states), list(self.coh_states)

    def strain_energy(self, u):
        """Recoverable energy for ``u`` using the committed history."""
        e = sum(g.material.energy(g, u, st) for g, st in zip(self.groups, self.states))
        e += sum(g.energy(u, st) for g, st in zip(self.cohesive, self.coh_states))
        return float(e)

    def element_time_steps(self, u=None):
        return np.concatenate([g.critical_time_step(u) for g in self.groups]) \
            if self.groups else np.zeros(0)

    def critical_time_step(self, u=None):
        """Global stable increment over bulk and interface elements.

        With ``u`` the element lengths come from the current volumes.
        """
        dt = [g.critical_time_step(u).min() for g in self.groups]
        dt += [g.critical_time_step() for g in self.cohesive]
        return float(min(dt)) if dt else np.inf

    def point_fields(self):
        out = {}
        for g, st in zip(self.groups, self.states):
            for k, v in g.material.point_fields(st).items():
                out.setdefault(k, []).append((g.element_ids, v.reshape(len(g.conn), -1)))
        for g, st in zip(self.cohesive, self.coh_states):
            out.setdefault("Dcoh", []).append((g.element_ids, st.D.reshape(len(g.conn), -1)))
        return out

    def element_field(self, name, reduce=np.max):
        """Per-element value of a point field (NaN where undefined)."""
        out = np.full(self.model.n_elements, np.nan)
        for ids, v in self.point_fields().get(name, []):
            out[ids] = reduce(v, axis=1)
        return out


def internal_force(solid: Solid, d):
    return solid.internal_force(d)


def lumped_mass(model: MeshModel, materials: dict):
    return Solid(model, materials).lumped_mass()


def critical_time_step(model: MeshModel, materials: dict) -> float:
    return Solid(model, materials).critical_time_step()


def stable_time_step_ortho(props, lc) -> float:
    """Element stable increment lc * sqrt(rho / max C_ij) for a ply."""
    return float(lc * np.sqrt(props.rho / effective_stiffness(props).max()))
