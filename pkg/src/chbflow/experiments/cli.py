"""Command line entry point: ``chbflow {run,reference,compare,sweep}``."""

import argparse
import logging
import sys

from chbflow.experiments import config as cfgmod
from chbflow.experiments import runner


def _add_config_flags(p):
    p.add_argument("--config", metavar="PATH", help="key = value configuration file")
    p.add_argument("--no-relax", action="store_true", help="disable the relaxation step")
    for key in cfgmod.known_keys():
        p.add_argument(f"--{key}", dest=f"k_{key}", metavar="VALUE", default=None,
                       help=argparse.SUPPRESS if key[-1].isdigit() else None)


def _build_config(ns):
    overrides = {k[2:]: v for k, v in vars(ns).items() if k.startswith("k_") and v is not None}
    if ns.no_relax:
        overrides["relax"] = "false"
    if ns.config:
        return cfgmod.load(ns.config, **overrides)
    return cfgmod.from_pairs({}, **overrides)


def _print_errors(err):
    for name, val in (("phi", err.phi), ("u1", err.u1), ("u2", err.u2), ("px", err.px), ("py", err.py)):
        print(f"  {name:4s} {val:.6e}")


def cmd_run(ns):
    cfg = _build_config(ns)
    res = runner.run(cfg)
    s = res.stats
    print(f"{cfg.experiment}: {s.steps} steps to t={res.state.t:.6g} in {res.wall_s:.2f}s "
          f"({s.rejections} rejections)")
    print(f"  E1={res.state.e1:.10g} r={res.r:.10g} r_increases={s.r_increases} "
          f"max_ratio={s.max_ratio:.4g}")
    if res.errors is not None:
        print("L2 errors against the exact solution:")
        _print_errors(res.errors)
    print(f"output: {res.out_dir}")
    return 0 if s.r_increases == 0 and s.r_negative == 0 else 1


def cmd_reference(ns):
    cfg = _build_config(ns)
    tau_ref = float(ns.k_tau) if ns.k_tau is not None else 1e-5
    times = cfg.snapshots or (cfg.tfinal,)
    paths = runner.make_reference(cfg.with_overrides(tau=tau_ref), tau_ref, times)
    for t, p in sorted(paths.items()):
        print(f"t={t:.6g}: {p}")
    return 0


def cmd_compare(ns):
    tab = runner.compare(ns.state, ns.reference, length=ns.length)
    print(f"L2 differences at t={tab.t:.6g}")
    _print_errors(tab)
    return 0


def cmd_sweep(ns):
    cfg = _build_config(ns)
    values = [v for v in ns.values.split(",") if v.strip()]
    rows = runner.sweep(cfg, ns.key, values, jobs=ns.jobs)
    cols = [c for c in rows[0] if c != "out"]
    print(" ".join(f"{c:>12s}" for c in [ns.key] + cols))
    for v, row in zip(values, rows):
        print(" ".join([f"{v:>12s}"] + [f"{row[c]:12.5g}" for c in cols]))
    if "err_phi" in rows[0] and ns.key == "tau" and len(rows) > 1:
        from chbflow.mms import observed_order
        taus = [row["tau"] for row in rows]
        for n in ("phi", "u1", "u2", "px", "py"):
            print(f"observed order ({n}): {observed_order(taus, [row[f'err_{n}'] for row in rows]):.3f}")
    return 0


def make_parser():
    ap = argparse.ArgumentParser(prog="chbflow", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configuration")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("reference", help="fixed-step order-2 reference states at the snapshot times")
    _add_config_flags(p)
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("compare", help="L2 differences between two state files")
    p.add_argument("state")
    p.add_argument("reference")
    p.add_argument("--length", type=float, default=2 * 3.141592653589793)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="independent runs over a list of values for one key")
    _add_config_flags(p)
    p.add_argument("--key", required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None):
    ns = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return ns.func(ns)
    except (ValueError, KeyError, OSError) as exc:
        print(f"chbflow: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
