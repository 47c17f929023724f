"""Run orchestration: drive a scenario, collect the report and write result files."""

from dataclasses import replace
from pathlib import Path
import time

import numpy as np

from . import kernels
from .contact import tangent_frames
from .coupling import run_coupled
from .output import RunReport, write_contact_log, write_csv, write_summary, write_vtk
from .refine import get_dimensions
from .scenarios import Scenario


class ContactMonitor:
    """Non-penetration and no-adhesion checks at every output step."""

    def __init__(self, bbox):
        self.bbox = bbox
        self.min_gap = np.inf
        self.min_rn_rel = np.inf
        self.checks = 0
        self.violations = []

    def check(self, step, deform, rigid, rec):
        x = deform.slave_positions(deform.state.d)
        near = rigid.surface.screen(x, rigid.offset, rigid.margin)
        gap = rigid.surface.project(x[near], rigid.offset)[2] if near.any() else np.zeros(0)
        gmin = float(gap.min()) if len(gap) else np.inf
        rn = rec.reactions_n
        scale = float(np.abs(rn).max()) if len(rn) else 0.0
        rmin = float(rn.min() / scale) if scale > 0 else 0.0
        self.min_gap = min(self.min_gap, gmin)
        self.min_rn_rel = min(self.min_rn_rel, rmin)
        self.checks += 1
        if gmin < -1e-8 * self.bbox:
            self.violations.append((step, "penetration", gmin))
        if rmin < -1e-9:
            self.violations.append((step, "adhesion", rmin))
        return gmin, rmin

    @property
    def ok(self):
        return not self.violations


def _system_energy(deform, rigid, scn, e0):
    """Energy balance residual relative to the initial total energy."""
    body = rigid.body
    led = deform.ledger
    ke = deform.kinetic_energy() + (0.0 if body.motion is not None else body.kinetic_energy)
    w_int = led.internal_work
    if body.motion is None:
        # closed system: striker kinetic + gravity work on it
        w_g = body.m * float(body.g @ (body.x - body.x0))
        total = ke + w_int + led.damping_work - led.external_work - w_g
    else:
        total = ke + w_int + led.damping_work - led.external_work - led.contact_work
    return total - e0


def run_scenario(scn: Scenario, out_dir=None, threads=None, steps=None, scheme=None,
                 vtk_every=0, on_step=None) -> RunReport:
    """Run ``scn`` and return its report; write files when ``out_dir`` is given."""
    if threads is not None:
        kernels.set_num_threads(threads)
    cfg = scn.time
    if scheme is not None or steps is not None:
        cfg = replace(cfg, scheme=scheme or cfg.scheme,
                      max_steps=steps if steps is not None else cfg.max_steps)
    t_build = time.perf_counter()
    solid, rigid, deform = scn.build()
    t_build = time.perf_counter() - t_build
    body = rigid.body
    axis = np.asarray(scn.striker.motion_dir, float)
    frame = tangent_frames(axis)[0]
    model = scn.model
    monitor = ContactMonitor(model.bounding_box_diagonal())
    report = RunReport(threads=kernels.get_num_threads())
    e0 = deform.kinetic_energy() + (body.kinetic_energy if body.motion is None else 0.0)
    sym = scn.symmetry_factor
    snaps = []
    t_io = 0.0
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    def observe(step, t, rec, d, r):
        nonlocal t_io
        gmin, rmin = monitor.check(step, d, r, rec)
        f = rec.contact_force * sym
        u = d.state.d
        ie = solid.strain_energy(u)
        report.add_row(t=t, f_n=float(f @ frame[0]), f_t1=float(f @ frame[1]),
                       f_t2=float(f @ frame[2]),
                       d_striker=float((r.body.x - r.body.x0) @ axis),
                       ke=(d.kinetic_energy() + (r.body.kinetic_energy
                                                 if r.body.motion is None else 0.0)) * sym,
                       ie=ie * sym, de=(d.ledger.internal_work - ie) * sym,
                       n_contact=rec.n_contact, resets=d.layer.resets_total)
        report.contact_log.append((step, t, rec.n_contact, rec.n_released,
                                   d.layer.resets_total, gmin, rmin))
        if out is not None and vtk_every and step % vtk_every == 0:
            t0 = time.perf_counter()
            path = out / f"snapshot_{step:07d}.vtk"
            write_vtk(path, model, {"displacement": u},
                      {k: solid.element_field(k) for k in ("D1", "D2", "Dcoh")},
                      title=f"{scn.name} step {step} t {t!r}")
            snaps.append(str(path.name))
            t_io += time.perf_counter() - t0

    run = run_coupled(rigid, deform, cfg, observer=observe, on_step=on_step)
    residual = _system_energy(deform, rigid, scn, e0)
    scale = max(e0, deform.ledger.internal_work, deform.ledger.contact_work, 1e-300)
    report.timings = dict(run.timings, build=t_build, io=t_io)
    report.snapshots = snaps
    n_e, n_n = model.n_elements, model.n_nodes
    report.summary = {
        "scenario": scn.name,
        "mesh": {"elements": n_e, "nodes": n_n, "ndivi": scn.ndivi,
                 "kinds": {b.kind.value: len(b) for b in model.blocks}},
        "refinement": scn.info.get("refinement", []),
        "dt": run.dt,
        "steps": run.steps,
        "t_end": run.t,
        "scheme": cfg.scheme,
        "threads": report.threads,
        "backend": kernels.BACKEND,
        "energy": {"initial": e0, "balance_residual": residual,
                   "relative_residual": residual / scale,
                   "damping_work": deform.ledger.damping_work * sym,
                   "contact_work": deform.ledger.contact_work * sym},
        "contact": {"checks": monitor.checks, "min_gap": monitor.min_gap,
                    "min_reaction_ratio": monitor.min_rn_rel,
                    "violations": monitor.violations[:20],
                    "resets": deform.layer.resets_total,
                    "ambiguous_projections": rigid.surface.ambiguous},
        "timings": report.timings,
        "info": scn.info,
    }
    try:
        report.summary["next_level_prediction"] = dict(zip(("n_e", "n_n", "n_b"),
                                                           get_dimensions(model)))
    except Exception:  # meshes with kinds the refiner does not handle
        pass
    report.run = run
    report.monitor = monitor
    if out is not None:
        t0 = time.perf_counter()
        write_csv(out / "timeseries.csv", report.rows)
        write_contact_log(out / "contact_log.csv", report.contact_log)
        report.timings["io"] += time.perf_counter() - t0
        write_summary(out / "summary.json", report.summary)
    return report
