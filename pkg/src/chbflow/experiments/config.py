"""Run configuration: presets, ``key = value`` files and flag overrides."""

import dataclasses
import math
from dataclasses import dataclass, field, fields

from chbflow import adaptive, model

EXPERIMENTS = ("convergence", "coarsening", "adaptive_compare", "buoyancy", "custom")
SCHEMES = ("fixed", "algorithm1", "algorithm2")
CONTROLLER_KEYS = ("rho", "tol", "r", "m", "tau_min", "tau_max", "gamma_star")


@dataclass
class RunConfig:
    """Flat run description; every field is a config-file key and a CLI flag.

    Controller parameters are per order, e.g. ``tol2`` or ``tau_max3``.
    ``pe > 0`` selects the Peclet mobility, ``lam > 0`` enables buoyancy and
    ``buoyancy_work`` feeds its work into the auxiliary energy.
    """

    experiment: str = "custom"
    grid: int = 64
    length: float = 2 * math.pi
    epsilon: float = 0.05
    gamma: float = 4.0
    s_stab: float = 1.0
    c0: float = 0.0
    mobility: float = 1.0
    pe: float = 0.0
    nu: float = 1.0
    eta: float = 1.0
    lam: float = 0.0
    buoyancy_work: bool = False
    init: str = "random"
    scheme: str = "fixed"
    order: int = 2
    tau: float = 1e-3
    tfinal: float = 1.0
    tc: float = 0.0
    relax: bool = True
    seed: int = 0
    out: str = "run"
    snapshots: tuple = ()
    max_retries: int = 20
    csv_every: int = 1
    ctrl: dict = field(default_factory=dict)

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.tfinal > 0:
            raise ValueError("tfinal must be positive")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not 1 <= self.order <= 4:
            raise ValueError("order must be 1..4")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.csv_every < 1:
            raise ValueError("csv_every must be >= 1")
        for ts in self.snapshots:
            if not 0 <= ts <= self.tfinal:
                raise ValueError(f"snapshot time {ts} outside [0, {self.tfinal}]")
        if self.scheme == "algorithm2" and not 0 <= self.tc <= self.tfinal:
            raise ValueError("tc must lie in [0, tfinal]")
        self.physical_params()
        if self.scheme != "fixed":
            self.adaptive_config()
        return self

    def physical_params(self):
        mob = model.PecletMobility(self.pe) if self.pe > 0 else model.ConstantMobility(self.mobility)
        buoy = model.Buoyancy(self.lam) if self.lam > 0 else None
        return model.PhysicalParams(epsilon=self.epsilon, gamma=self.gamma, s_stab=self.s_stab,
                                    c0=self.c0, mobility=mob, nu=self.nu, eta=self.eta,
                                    buoyancy=buoy)

    def controller_orders(self):
        if self.scheme == "algorithm2":
            return (2, 3)
        return (self.order,)

    def adaptive_config(self):
        blocks = {}
        for k in self.controller_orders():
            vals = {key: self.ctrl[f"{key}{k}"] for key in CONTROLLER_KEYS if f"{key}{k}" in self.ctrl}
            blocks[k] = adaptive.OrderConfig(**vals)
        return adaptive.AdaptiveConfig(orders=blocks, t_switch=self.tc, max_retries=self.max_retries)

    def with_overrides(self, **kw):
        cfg = dataclasses.replace(self, ctrl=dict(self.ctrl))
        for key, val in kw.items():
            set_value(cfg, key, val)
        if "snapshots" not in kw:
            cfg.snapshots = tuple(s for s in cfg.snapshots if s <= cfg.tfinal)
        return cfg

    def snapshot_times(self):
        """Requested snapshot times; the initial and final times when none are given."""
        return tuple(sorted(set(self.snapshots))) if self.snapshots else (0.0, self.tfinal)

    def to_text(self):
        lines = []
        for f in fields(self):
            if f.name == "ctrl":
                continue
            lines.append(f"{f.name} = {format_value(getattr(self, f.name))}")
        for key in sorted(self.ctrl):
            lines.append(f"{key} = {format_value(self.ctrl[key])}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f for f in fields(RunConfig) if f.name != "ctrl"}


def _is_ctrl_key(key):
    return any(key.startswith(p) and key[len(p):].isdigit() for p in CONTROLLER_KEYS)


def known_keys():
    keys = list(_FIELDS)
    keys += [f"{p}{k}" for k in range(1, 5) for p in CONTROLLER_KEYS]
    return keys


def _parse_bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def convert(key, text):
    """Typed value for ``key`` from its textual form."""
    if _is_ctrl_key(key):
        return float(text)
    if key not in _FIELDS:
        raise KeyError(f"unknown config key {key!r}")
    default = _FIELDS[key].default
    if not isinstance(text, str):
        if isinstance(default, tuple):
            return tuple(float(x) for x in text)
        return text
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        return int(text, 0)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        return tuple(float(x) for x in text.replace(",", " ").split())
    return text.strip()


def set_value(cfg, key, value):
    key = key.replace("-", "_")
    v = convert(key, value)
    if _is_ctrl_key(key):
        cfg.ctrl[key] = v
    else:
        setattr(cfg, key, v)


def format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def parse_text(text):
    """``key = value`` pairs from config text; ``#`` starts a comment."""
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS and not _is_ctrl_key(key):
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        pairs[key] = val
    return pairs


def load(path, **overrides):
    with open(path) as fh:
        pairs = parse_text(fh.read())
    return from_pairs(pairs, **overrides)


def from_pairs(pairs, **overrides):
    """Preset for ``experiment`` (from pairs or overrides), then pairs, then overrides."""
    exp = overrides.get("experiment", pairs.get("experiment", "custom"))
    cfg = preset(str(exp).strip())
    for key, val in pairs.items():
        set_value(cfg, key, val)
    for key, val in overrides.items():
        set_value(cfg, key, val)
    if "snapshots" not in pairs and "snapshots" not in overrides:
        # preset snapshot lists follow a shortened horizon
        cfg.snapshots = tuple(s for s in cfg.snapshots if s <= cfg.tfinal)
    return cfg.validate()


# Controller parameter sets from the coarsening studies (gamma* = 1).
COARSENING_SETS = {
    "a": dict(rho=0.75, tol=1e-3, r=0.50, m=0.52, tau_max=3e-3),
    "b": dict(rho=0.70, tol=1e-3, r=0.70, m=0.70, tau_max=4e-3),
    "c": dict(rho=0.68, tol=1e-3, r=0.72, m=0.75, tau_max=4e-3),
    "d": dict(rho=0.90, tol=1e-4, r=0.95, m=0.85, tau_max=1.5e-3),
    "e": dict(rho=0.50, tol=1e-3, r=0.80, m=0.68, tau_max=1e-1),
    "f": dict(rho=0.60, tol=8e-4, r=0.60, m=0.70, tau_max=1e-2),
}
BUOYANCY_SETS = {
    3: dict(rho=0.75, tol=1e-3, r=0.33, m=1.0, gamma_star=1200.0, tau_max=1e-3),
    2: dict(rho=0.89, tol=1e-2, r=0.30, m=1.0, gamma_star=1200.0, tau_max=1e-2),
}


def ctrl_block(k, **vals):
    return {f"{key}{k}": float(v) for key, v in vals.items()}


def preset(experiment):
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}")
    if experiment == "convergence":
        return RunConfig(experiment=experiment, epsilon=1.0, gamma=2.0, s_stab=0.0, init="exact",
                         order=2, tau=0.1, tfinal=1.0, out="convergence")
    if experiment == "coarsening":
        return RunConfig(experiment=experiment, init="random", order=2, tau=1e-3, tfinal=10.0,
                         out="coarsening")
    if experiment == "adaptive_compare":
        ctrl = ctrl_block(3, gamma_star=1.0, tau_min=1e-5, **COARSENING_SETS["a"])
        ctrl.update(ctrl_block(2, gamma_star=1.0, tau_min=1e-5, **COARSENING_SETS["e"]))
        return RunConfig(experiment=experiment, init="random", scheme="algorithm2", tau=1e-5,
                         tfinal=10.0, tc=1.2, out="adaptive_compare", ctrl=ctrl)
    if experiment == "buoyancy":
        ctrl = ctrl_block(3, tau_min=1e-6, **BUOYANCY_SETS[3])
        ctrl.update(ctrl_block(2, tau_min=1e-6, **BUOYANCY_SETS[2]))
        return RunConfig(experiment=experiment, epsilon=0.05, gamma=6.0, s_stab=1.0, nu=0.2, eta=1.0,
                         pe=1.0, lam=1.2, init="layers", scheme="algorithm2", tau=1e-5,
                         tfinal=7.8, tc=0.4, out="buoyancy",
                         snapshots=(0.0, 3.0, 5.0, 7.0, 7.8), ctrl=ctrl)
    return RunConfig()
