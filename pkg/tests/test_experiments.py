import math
import os

import numpy as np
import pytest

from chbflow import make_grid
from chbflow.experiments import cli, config, initial, io, runner


def small(tmp_path, name="run", **kw):
    base = dict(grid=16, tau=0.01, tfinal=0.05, out=str(tmp_path / name))
    base.update(kw)
    return config.preset(kw.pop("experiment", "coarsening")).with_overrides(**base)


# -- configuration ---------------------------------------------------------------

def test_parse_text_with_comments():
    pairs = config.parse_text("# header\nexperiment = coarsening\n tau = 2e-3  # step\n\ntol2=1e-4\n")
    assert pairs == {"experiment": "coarsening", "tau": "2e-3", "tol2": "1e-4"}
    with pytest.raises(ValueError):
        config.parse_text("tau 0.1")
    with pytest.raises(ValueError):
        config.parse_text("bogus = 1")


def test_presets_carry_experiment_parameters():
    c = config.preset("coarsening").physical_params()
    assert (c.epsilon, c.gamma, c.s_stab, c.nu, c.eta, c.mobility.m0) == (0.05, 4.0, 1.0, 1.0, 1.0, 1.0)
    b = config.preset("buoyancy")
    p = b.physical_params()
    assert (p.epsilon, p.gamma, p.eta, p.nu, p.buoyancy.lam, p.mobility.pe) == (0.05, 6.0, 1.0, 0.2, 1.2, 1.0)
    assert b.tc == 0.4
    a = b.adaptive_config()
    assert (a.block(3).rho, a.block(3).r, a.block(3).gamma_star, a.block(3).tau_max) == (0.75, 0.33, 1200.0, 1e-3)
    assert (a.block(2).rho, a.block(2).tol, a.block(2).r, a.block(2).tau_max) == (0.89, 1e-2, 0.30, 1e-2)
    m = config.preset("convergence").physical_params()
    assert (m.epsilon, m.gamma, m.s_stab) == (1.0, 2.0, 0.0)
    assert config.preset("adaptive_compare").tc == 1.2


def test_overrides_and_round_trip(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("experiment = coarsening\nscheme = algorithm1\norder = 3\ntol3 = 5e-4\nrelax = off\n"
                    "snapshots = 0, 0.5, 1\n")
    c = config.load(str(path), tau="0.004", tfinal="1")
    assert c.tau == 0.004 and c.order == 3 and c.relax is False
    assert c.snapshots == (0.0, 0.5, 1.0)
    assert c.adaptive_config().block(3).tol == 5e-4
    again = config.from_pairs(config.parse_text(c.to_text()))
    assert again == c


@pytest.mark.parametrize("kw", [dict(tfinal="0"), dict(scheme="rk4"), dict(order="5"),
                                dict(snapshots="2"), dict(experiment="other"), dict(seed="-1"),
                                dict(scheme="algorithm2", tc="3")])
def test_validation(kw):
    with pytest.raises(ValueError):
        config.from_pairs({"tfinal": "1"}, **kw)


def test_unknown_key():
    with pytest.raises(KeyError):
        config.RunConfig().with_overrides(nope=1)


# -- initial data ----------------------------------------------------------------

def test_random_field_is_seeded():
    a = initial.rand_field(8, 42)
    np.testing.assert_array_equal(a, initial.rand_field(8, 42))
    assert not np.array_equal(a, initial.rand_field(8, 43))
    assert a.min() >= 0 and a.max() < 1
    big = initial.rand_field(4, 2 ** 64 - 1)
    assert big.shape == (4, 4)


def test_coarsening_initial_data():
    g = make_grid(32)
    phi = initial.coarsening_phi(g, 7)
    assert phi.max() <= -0.499 and phi.min() >= -0.501
    assert abs(phi.mean() + 0.5) < 1e-4


def test_layers_symmetric_about_pi():
    g = make_grid(64)
    phi = initial.layers_phi(g, 0.05)
    mirror = phi[:, (-np.arange(64)) % 64]
    np.testing.assert_allclose(phi, mirror, atol=1e-14)
    assert phi.max() <= 1 and phi.min() >= -1


# -- files -----------------------------------------------------------------------

@pytest.mark.parametrize("val, level", [(-1.1, 0), (1.1, 255), (0.0, 128), (-5.0, 0), (3.0, 255)])
def test_snapshot_levels(tmp_path, val, level):
    path = tmp_path / "s.pgm"
    io.emit_snapshot(np.full((4, 6), val), str(path))
    img = io.read_pgm(str(path))
    assert img.shape == (4, 6)
    assert np.all(img == level)


def test_snapshot_orientation(tmp_path):
    phi = np.full((4, 4), -1.1)
    phi[0, 1] = 1.1  # y = 0, x = dx
    io.emit_snapshot(phi, str(tmp_path / "o.pgm"))
    data = (tmp_path / "o.pgm").read_bytes()
    assert data.startswith(b"P5\n4 4\n255\n")
    assert data[len(b"P5\n4 4\n255\n") + 1] == 255
    # whitespace-valued pixels survive the header parser
    phi = np.full((2, 2), 32 / 255 * 2.2 - 1.1)
    io.emit_snapshot(phi, str(tmp_path / "w.pgm"))
    assert np.all(io.read_pgm(str(tmp_path / "w.pgm")) == 32)


def test_state_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    phi, p = rng.normal(size=(2, 8, 8))
    u = rng.normal(size=(2, 8, 8))
    path = str(tmp_path / "s.state")
    io.write_state(path, 1.25, phi, u, p)
    t, phi2, u2, p2 = io.read_state(path)
    assert t == 1.25
    assert np.array_equal(phi, phi2) and np.array_equal(u, u2) and np.array_equal(p, p2)
    raw = open(path, "rb").read()
    assert raw[:8] == b"CHBSTATE" and int.from_bytes(raw[8:16], "little") == 8
    assert len(raw) == 8 + 8 + 8 + 4 * 64 * 8
    open(path, "wb").write(raw[:-8])
    with pytest.raises(ValueError):
        io.read_state(path)
    open(path, "wb").write(b"XXXXXXXX" + raw[8:])
    with pytest.raises(ValueError):
        io.read_state(path)


def test_compare_examples():
    g = make_grid(16)
    rng = np.random.default_rng(1)
    phi = rng.normal(size=(16, 16))
    u = rng.normal(size=(2, 16, 16))
    p = rng.normal(size=(16, 16))
    zero = runner.compare((1.0, phi, u, p), (1.0, phi, u, p))
    assert all(v == 0 for _, v in zero.rows())
    c = 0.3
    tab = runner.compare((1.0, phi + c, u, p + 5.0), (1.0, phi, u, p))
    assert tab.phi == pytest.approx(c * 2 * math.pi, rel=1e-12)
    assert tab.px == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        runner.compare((1.0, phi, u, p), (1.0, phi[:8, :8], u[:, :8, :8], p[:8, :8]))
    with pytest.raises(ValueError):
        runner.compare((1.0, phi, u, p), (2.0, phi, u, p))
    assert g.n == 16


# -- runs ------------------------------------------------------------------------

def test_run_outputs(tmp_path):
    cfg = small(tmp_path, snapshots=(0.0, 0.02, 0.05))
    res = runner.run(cfg)
    out = tmp_path / "run"
    for name in ("config.txt", "steps.csv", "final.state", "phi_t0.pgm", "phi_t0.02.pgm",
                 "phi_t0.05.pgm", "state_t0.02.state"):
        assert (out / name).exists(), name
    header = (out / "steps.csv").read_text().splitlines()[0]
    assert header == "t,tau,order,E,E1,r,xi,zeta,sigma0,delta,e,retries,wall_ms"
    rec = io.read_csv(str(out / "steps.csv"))
    assert len(rec["t"]) == res.stats.steps == 5
    assert list(rec["order"]) == [1, 2, 2, 2, 2]
    assert np.all(np.diff(rec["t"]) > 0) and np.all(np.diff(rec["r"]) <= 0)
    t, phi, _, _ = io.read_state(str(out / "final.state"))
    assert t == pytest.approx(0.05) and np.array_equal(phi, res.state.phi)


def test_run_observer_sees_every_step(tmp_path):
    seen = []
    res = runner.run(small(tmp_path), write=False, observer=lambda out: seen.append(out.state.t))
    assert len(seen) == res.stats.steps and seen[-1] == pytest.approx(0.05)


def test_buoyancy_work_key(tmp_path):
    cfg = config.from_pairs({"experiment": "buoyancy"}, buoyancy_work="true", out=str(tmp_path))
    assert cfg.buoyancy_work is True
    assert "buoyancy_work = true" in cfg.to_text()
    assert config.preset("buoyancy").buoyancy_work is False


def test_run_is_deterministic(tmp_path):
    a = runner.run(small(tmp_path, "a", scheme="algorithm2", tc=0.02, tau=1e-4))
    b = runner.run(small(tmp_path, "b", scheme="algorithm2", tc=0.02, tau=1e-4))
    for col in io.CSV_COLUMNS:
        if col != "wall_ms":
            np.testing.assert_array_equal(a.records[col], b.records[col])
    assert (tmp_path / "a" / "final.state").read_bytes() == (tmp_path / "b" / "final.state").read_bytes()


def test_reference_at_zero_is_initial_data(tmp_path):
    cfg = small(tmp_path, "ref")
    paths = runner.make_reference(cfg, 1e-2, times=(0.0, 0.02), out=str(tmp_path / "ref"))
    t, phi, _, _ = io.read_state(paths[0.0])
    g = make_grid(16)
    np.testing.assert_array_equal(phi, initial.coarsening_phi(g, cfg.seed))
    again = runner.make_reference(cfg, 1e-2, times=(0.0, 0.02), out=str(tmp_path / "ref2"))
    assert open(paths[0.02], "rb").read() == open(again[0.02], "rb").read()


def test_cached_reference_reuses_files(tmp_path):
    cfg = small(tmp_path)
    p1 = runner.cached_reference(cfg, 1e-2, (0.05,), str(tmp_path / "cache"))
    stamp = os.path.getmtime(p1[0.05])
    p2 = runner.cached_reference(cfg, 1e-2, (0.05,), str(tmp_path / "cache"))
    assert p1 == p2 and os.path.getmtime(p2[0.05]) == stamp


def test_convergence_run_reports_errors(tmp_path):
    cfg = config.preset("convergence").with_overrides(grid=16, tau=0.25, out=str(tmp_path / "c"))
    res = runner.run(cfg)
    assert res.errors.phi < 0.05
    assert (tmp_path / "c" / "errors.txt").exists()


def test_failure_persists_last_state(tmp_path, monkeypatch):
    from chbflow import stepper as stp
    real = stp.Stepper.step
    calls = {"n": 0}

    def flaky(self, history, tau, k):
        out = real(self, history, tau, k)
        calls["n"] += 1
        if calls["n"] == 3:
            out.state.phi = out.state.phi * np.nan
        return out

    monkeypatch.setattr(stp.Stepper, "step", flaky)
    with pytest.raises(runner.SolverFailure):
        runner.run(small(tmp_path, "f"))
    t, _, _, _ = io.read_state(str(tmp_path / "f" / "final.state"))
    assert t == pytest.approx(0.02)


# -- command line ---------------------------------------------------------------

def test_cli_run_and_compare(tmp_path, capsys):
    cfgfile = tmp_path / "c.txt"
    cfgfile.write_text("experiment = coarsening  # preset\ngrid = 16\ntfinal = 0.03\n")
    out = tmp_path / "cli"
    assert cli.main(["run", "--config", str(cfgfile), "--tau", "0.01", "--seed", "3",
                     "--out", str(out), "--order", "3", "--no-relax"]) == 0
    text = (out / "config.txt").read_text()
    assert "seed = 3" in text and "relax = false" in text and "order = 3" in text
    assert cli.main(["compare", str(out / "final.state"), str(out / "final.state")]) == 0
    assert "phi  0.000000e+00" in capsys.readouterr().out


def test_cli_reference_and_sweep(tmp_path, capsys):
    ref = tmp_path / "ref"
    assert cli.main(["reference", "--experiment", "coarsening", "--grid", "16", "--tfinal", "0.02",
                     "--tau", "0.005", "--out", str(ref)]) == 0
    assert (ref / "state_t0.02.state").exists()
    assert cli.main(["sweep", "--experiment", "convergence", "--grid", "16", "--order", "1",
                     "--out", str(tmp_path / "sw"), "--key", "tau", "--values", "0.5,0.25"]) == 0
    out = capsys.readouterr().out
    assert "observed order (phi)" in out
    assert (tmp_path / "sw" / "tau=0.25" / "steps.csv").exists()


def test_cli_reports_bad_config(tmp_path, capsys):
    assert cli.main(["run", "--tfinal", "-1", "--out", str(tmp_path / "x")]) == 2
    assert "error" in capsys.readouterr().err
