"""Experiment driver: time loop, outputs, references and error tables."""

import hashlib
import logging
import math
import os
import time
from array import array
from dataclasses import dataclass, field

import numpy as np

from chbflow import adaptive, mms, stepper as stp
from chbflow.experiments import config as cfgmod
from chbflow.experiments import initial, io
from chbflow.spectral import SpectralGrid

log = logging.getLogger(__name__)

RATIO_BOUND = 4.8645


class SolverFailure(RuntimeError):
    """A step produced non-finite fields; the last valid state was persisted."""


@dataclass
class RunStats:
    steps: int = 0
    rejections: int = 0
    r_increases: int = 0
    r_negative: int = 0
    max_ratio: float = 0.0
    ratios_above_bound: int = 0
    order_switches: int = 0
    orders: list = field(default_factory=list)


@dataclass
class RunResult:
    config: object
    records: dict
    stats: RunStats
    state: object
    r: float
    wall_s: float
    out_dir: object = None
    errors: object = None
    snapshot_states: dict = field(default_factory=dict)


def _snap_name(t):
    return f"t{t:.6g}"


def _persist_state(path, st):
    io.write_state(path, st.t, st.phi, st.u, st.p)


def _initial_history(cfg, grid, params):
    if cfg.experiment == "convergence" or cfg.init == "exact":
        k = cfg.order if cfg.scheme == "fixed" else 1
        return mms.bootstrap_history(grid, k, cfg.tau, 0.0, params)
    phi0 = initial.initial_phi(cfg, grid)
    st = stp.state_from_phi(grid, params, phi0, 0.0)
    return stp.History(st, st.e1)


def _forcing(cfg, grid, params):
    if cfg.experiment == "convergence" or cfg.init == "exact":
        return mms.Forcing(grid, params)
    return None


class _Records:
    def __init__(self):
        self.cols = {c: array("d") for c in io.CSV_COLUMNS}

    def add(self, rec):
        for c, a in self.cols.items():
            a.append(float(rec[c]))

    def as_arrays(self):
        return {c: np.frombuffer(a, dtype=float).copy() if len(a) else np.zeros(0)
                for c, a in self.cols.items()}


def _record(out, wall_ms, params):
    st = out.state
    return {"t": st.t, "tau": out.tau, "order": out.order, "E": st.e1 - params.c0, "E1": st.e1,
            "r": out.r_new, "xi": out.xi, "zeta": out.zeta, "sigma0": out.sigma0,
            "delta": out.delta, "e": out.e, "retries": out.retries, "wall_ms": wall_ms}


def run(cfg, write=True, keep_records=True, snapshot_states=False, observer=None):
    """Integrate ``cfg`` to ``tfinal``.

    With ``write`` the output directory receives ``config.txt``, ``steps.csv``
    (every ``csv_every``-th accepted step plus the last), graymap and state
    files at the snapshot times and ``final.state``. ``r`` monotonicity and
    step-ratio statistics always cover every accepted step. ``observer``, if
    given, is called with each accepted ``StepOutcome``.
    """
    cfg.validate()
    grid = SpectralGrid(cfg.grid, cfg.length)
    params = cfg.physical_params()
    forcing = _forcing(cfg, grid, params)
    stepper = stp.Stepper(grid, params, forcing=forcing, relax=cfg.relax,
                          buoyancy_work=cfg.buoyancy_work)
    hist = _initial_history(cfg, grid, params)
    acfg = cfg.adaptive_config() if cfg.scheme != "fixed" else None

    out_dir = None
    recorder = None
    if write:
        out_dir = cfg.out
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "config.txt"), "w") as fh:
            fh.write(cfg.to_text())
        recorder = io.CsvRecorder(os.path.join(out_dir, "steps.csv"))

    snaps = [float(s) for s in cfg.snapshot_times()]
    snap_states = {}

    def take_snapshot(st):
        if write:
            io.emit_snapshot(st.phi, os.path.join(out_dir, f"phi_{_snap_name(st.t)}.pgm"))
            _persist_state(os.path.join(out_dir, f"state_{_snap_name(st.t)}.state"), st)
        if snapshot_states:
            snap_states[st.t] = (st.t, st.phi.copy(), st.u.copy(), st.p)

    t_end = cfg.tfinal
    eps_t = 1e-12 * max(1.0, t_end)
    pending = [s for s in snaps if s > hist.t + eps_t]
    if any(abs(s - hist.t) <= eps_t for s in snaps):
        take_snapshot(hist.latest)

    stats = RunStats()
    records = _Records()
    tau = cfg.tau
    prev_tau = None
    prev_order = None
    last_rec = None
    t0 = time.perf_counter()
    try:
        while hist.t < t_end - eps_t:
            t_stop = pending[0] if pending else t_end
            w0 = time.perf_counter()
            if cfg.scheme == "fixed":
                trial = adaptive.clip_step(cfg.tau, hist.t, t_stop)
                out = stepper.step(hist, trial, min(cfg.order, len(hist)))
                tau_next = cfg.tau
            elif cfg.scheme == "algorithm1":
                out, tau_next = adaptive.adaptive_step(stepper, hist, acfg, cfg.order, tau, t_stop)
            else:
                out, tau_next, _ = adaptive.hybrid_step(stepper, hist, acfg, tau, t_stop)
            wall_ms = 1e3 * (time.perf_counter() - w0)
            if not (np.isfinite(out.r_new) and np.all(np.isfinite(out.state.phi))):
                raise SolverFailure(f"non-finite solution at t={out.state.t:.6g}")

            r_old = hist.r
            hist.accept(out)
            if observer is not None:
                observer(out)
            tau = tau_next

            stats.steps += 1
            stats.rejections += out.retries
            if out.r_new > r_old:
                stats.r_increases += 1
            if out.r_new < 0:
                stats.r_negative += 1
            if prev_tau is not None:
                ratio = out.tau / prev_tau
                stats.max_ratio = max(stats.max_ratio, ratio)
                if ratio > RATIO_BOUND:
                    stats.ratios_above_bound += 1
            if prev_order is not None and out.order != prev_order:
                stats.order_switches += 1
            if out.order != prev_order:
                stats.orders.append((out.state.t, out.order))
            prev_tau, prev_order = out.tau, out.order

            rec = _record(out, wall_ms, params)
            last_rec = rec
            keep = stats.steps % cfg.csv_every == 0
            if keep and recorder is not None:
                recorder.write(rec)
            if keep and keep_records:
                records.add(rec)
            if pending and abs(hist.t - pending[0]) <= eps_t:
                take_snapshot(hist.latest)
                pending.pop(0)
    except Exception:
        if write:
            _persist_state(os.path.join(out_dir, "final.state"), hist.latest)
        raise
    finally:
        if recorder is not None:
            if last_rec is not None and stats.steps % cfg.csv_every != 0:
                recorder.write(last_rec)
            recorder.close()
    if keep_records and last_rec is not None and stats.steps % cfg.csv_every != 0:
        records.add(last_rec)
    wall = time.perf_counter() - t0

    if write:
        _persist_state(os.path.join(out_dir, "final.state"), hist.latest)
    errors = None
    if forcing is not None:
        errors = mms.exact_errors(grid, hist.latest, cfg.tau, stats.steps)
        if write:
            with open(os.path.join(out_dir, "errors.txt"), "w") as fh:
                for name in ("phi", "u1", "u2", "px", "py"):
                    fh.write(f"{name} = {getattr(errors, name)!r}\n")
    return RunResult(cfg, records.as_arrays(), stats, hist.latest, hist.r, wall, out_dir,
                     errors, snap_states)


# -- references and comparisons --------------------------------------------------

def reference_config(cfg, tau_ref=1e-5, times=None):
    times = tuple(sorted(set(times))) if times else (cfg.tfinal,)
    return cfg.with_overrides(scheme="fixed", order=2, tau=tau_ref, relax=True,
                              snapshots=times, csv_every=max(1, int(round(1e-2 / tau_ref))))


def make_reference(cfg, tau_ref=1e-5, times=None, out=None):
    """Order-2 fixed-step run at ``tau_ref``; returns ``{time: state path}``."""
    rc = reference_config(cfg, tau_ref, times)
    if out is not None:
        rc = rc.with_overrides(out=out)
    run(rc, write=True, keep_records=False)
    return {t: os.path.join(rc.out, f"state_{_snap_name(t)}.state") for t in rc.snapshots}


def cached_reference(cfg, tau_ref=1e-5, times=None, cache_dir=".chbflow_cache"):
    """:func:`make_reference` keyed by the reference configuration; reruns only when missing."""
    rc = reference_config(cfg, tau_ref, times)
    key = hashlib.sha256(rc.with_overrides(out="-").to_text().encode()).hexdigest()[:16]
    out = os.path.join(cache_dir, f"ref_{cfg.experiment}_{key}")
    paths = {t: os.path.join(out, f"state_{_snap_name(t)}.state") for t in rc.snapshots}
    if not all(os.path.exists(p) for p in paths.values()):
        log.info("building reference in %s", out)
        make_reference(cfg, tau_ref, times, out)
    return paths


def _as_state(obj):
    if isinstance(obj, (str, os.PathLike)):
        return io.read_state(obj)
    if hasattr(obj, "phi_hat"):
        return obj.t, obj.phi, obj.u, obj.p
    return obj


@dataclass
class ErrorTable:
    t: float
    phi: float
    u1: float
    u2: float
    px: float
    py: float

    def rows(self):
        return [(name, getattr(self, name)) for name in ("phi", "u1", "u2", "px", "py")]


def compare(state, reference, length=2 * math.pi, t_tol=1e-9):
    """L2 differences of two states (paths, ``FieldState`` or ``(t, phi, u, p)``)."""
    ta, phia, ua, pa = _as_state(state)
    tb, phib, ub, pb = _as_state(reference)
    if np.shape(phia) != np.shape(phib):
        raise ValueError(f"grid mismatch: {np.shape(phia)} vs {np.shape(phib)}")
    if abs(ta - tb) > t_tol * max(1.0, abs(tb)):
        raise ValueError(f"time mismatch: {ta} vs {tb}")
    g = SpectralGrid(np.shape(phia)[0], length)
    gp = g.gradient(np.asarray(pa) - np.asarray(pb))
    du = np.asarray(ua) - np.asarray(ub)
    l2 = g.l2_norm
    return ErrorTable(tb, l2(np.asarray(phia) - np.asarray(phib)), l2(du[0]), l2(du[1]),
                      l2(gp[0]), l2(gp[1]))


def sweep(cfg, key, values, jobs=1):
    """Independent runs over ``key``; each writes to ``<out>/<key>=<value>``."""
    cfgs = [cfg.with_overrides(**{key: v},
                               out=os.path.join(cfg.out, f"{key}={cfgmod.format_value(cfgmod.convert(key, v))}"))
            for v in values]
    if jobs <= 1:
        return [_summary(run(c)) for c in cfgs]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_run_summary, cfgs))


def _run_summary(c):
    return _summary(run(c))


def _summary(res):
    s = {"out": res.out_dir, "steps": res.stats.steps, "t": res.state.t, "E1": res.state.e1,
         "r": res.r, "wall_s": res.wall_s, "r_increases": res.stats.r_increases,
         "max_ratio": res.stats.max_ratio, "tau": res.config.tau}
    if res.errors is not None:
        s.update({f"err_{n}": getattr(res.errors, n) for n in ("phi", "u1", "u2", "px", "py")})
    return s
