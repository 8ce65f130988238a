"""Command-line front end.

Subcommands: `example` runs one of the four built-in end-to-end studies,
`synthesize` runs gain synthesis from a config (collecting data or
importing it), `simulate` replays gains against a plant/exosystem config.
Every run writes a manifest capturing config, seed, version, and output
file hashes.

Exit codes: 0 success, 1 tail-error criterion not met, 2 infeasible
LMI/assumption violation, 3 divergence, 64 usage error, 65 bad config.
"""

import hashlib
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .datagen import (ExperimentConfig, delta_bound, export_dataset,
                      import_dataset, run_experiment)
from .errors import (AssumptionViolated, ComplexSpectrum, Diverged,
                     ExperimentDiverged, Infeasible, NumericalFailure)
from .internal_model import (build_exosystem, internal_model,
                             kth_order_internal_model)
from .mas import chain_graph, graph_from_config, load_graph, simulate_fleet, \
    spectrum_decomposition_check, synthesize_fleet
from .plants import LinearPlant, augment, from_registry
from .regulator import (Controller, simulate_closed_loop, synthesize_linear,
                        synthesize_nonlinear_k, tracking_metrics)

EXIT_TAIL = 1
EXIT_INFEASIBLE = 2
EXIT_DIVERGED = 3
EXIT_USAGE = 64
EXIT_CONFIG = 65

OMEGA1 = np.pi / 5
OMEGA2 = 1.0


def paper_exosystem():
    """Two-frequency exosystem shared by all built-in examples."""
    rot = lambda w: [[0.0, w], [-w, 0.0]]
    return build_exosystem(rot(OMEGA1), rot(OMEGA2))


def _fail(code, msg):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _sha256(path):
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def _write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2)
    return path


def _gains_json(path, ctrl_or_fleet, lambdas=None):
    if isinstance(ctrl_or_fleet, Controller):
        c = ctrl_or_fleet
        obj = {"Kx": c.Kx.tolist(), "Kz": c.Kz.tolist(),
               "P": c.source.P.tolist() if c.source else None,
               "Y": c.source.Y.tolist() if c.source else None,
               "margin": c.source.margin if c.source else None}
    else:
        fc = ctrl_or_fleet
        obj = {"agents": [{"Kx": fc.Kx[i].tolist(), "Kz": fc.Kz[i].tolist(),
                           "P": fc.P[i].tolist(), "Y": fc.Y[i].tolist(),
                           "margin": fc.margins[i]} for i in range(fc.N)],
               "lambdas": fc.lambdas.tolist()}
    if lambdas is not None:
        obj["lambdas"] = np.asarray(lambdas).tolist()
    return _write_json(path, obj)


def _plot_errors(path, t, e, labels):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    for series, label in zip(e, labels):
        ax.plot(t, series, label=label, linewidth=1.0)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("tracking error")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def _manifest(outdir, config, files):
    man = {"version": __version__, "config": config,
           "files": {str(Path(f).relative_to(outdir)): _sha256(f)
                     for f in files}}
    return _write_json(outdir / "manifest.json", man)


@click.group()
@click.version_option(__version__)
def main():
    """Data-driven output-regulation synthesis and simulation."""


def _run_example(name, seed, out, k, t_end, dt, noise, delta_mode, rho):
    outdir = Path(out) / f"{name}-seed{seed}"
    outdir.mkdir(parents=True, exist_ok=True)
    exo = paper_exosystem()
    S = exo.S
    written = []
    config = {"example": name, "seed": seed, "k": k, "t_end": t_end,
              "dt": dt, "noise": noise, "delta_mode": delta_mode, "rho": rho}

    def delta_for(ds, cfg):
        if delta_mode == "oracle":
            return delta_bound(ds, "oracle-inflate", rho=rho)
        n_xi, n_v = ds.n_xi, S.shape[0]
        return delta_bound(
            ds, "a-priori", d_bar=np.sqrt(n_xi) * cfg.noise_bound,
            v_bar=np.sqrt(n_v) * cfg.exo_init_bound * 1.5,
            E_norm_bound=np.linalg.norm(ds.E_true, 2))

    if name in ("ex1", "ex2"):
        if name == "ex1":
            plant = from_registry("robot")
            im = internal_model(S, n_y=1)
            cfg = ExperimentConfig(T=20, sample_dt=0.01, input_bound=0.5,
                                   exo_init_bound=0.0025,
                                   noise_bound=noise if noise is not None else 0.01,
                                   seed=seed, mode="restarts",
                                   restart_radius=1.0)
            t_end = t_end or 50.0
            x0, v0 = np.array([1.0, 0.0]), np.array([0.5, 0.0, 0.5, 0.0])
            tail_limit = 1e-2
        else:
            plant = from_registry("ball_beam")
            im = kth_order_internal_model(S, k, n_y=1)
            cfg = ExperimentConfig(T=50, sample_dt=0.002, input_bound=0.1,
                                   exo_init_bound=0.005,
                                   noise_bound=noise if noise is not None else 0.002,
                                   seed=seed, mode="restarts",
                                   restart_radius=0.1)
            t_end = t_end or 100.0
            x0 = np.array([0.005, 0.0, 0.0, 0.0])
            v0 = np.array([0.003, 0.0, 0.003, 0.0])
            tail_limit = 1e-2
        aug = augment(plant, im)
        ds = run_experiment(aug, exo, cfg)
        written.append(export_dataset(ds, outdir / "data"))
        if name == "ex1":
            ctrl = synthesize_linear(ds, im, delta=delta_for(ds, cfg))
        else:
            ctrl = synthesize_nonlinear_k(ds, S, k, n_y=1,
                                          delta=delta_for(ds, cfg))
        written.append(_gains_json(outdir / "gains.json", ctrl))
        sim = simulate_closed_loop(plant, ctrl, exo, x0, v0,
                                   t_end=t_end, dt=dt)
        written.append(sim.export_csv(outdir / "trajectory.csv"))
        metrics = tracking_metrics(sim)
        written.append(_write_json(outdir / "metrics.json", metrics))
        written.append(_plot_errors(outdir / "errors.svg", sim.t,
                                    sim.e.T, ["e"]))
        _manifest(outdir, config, written)
        return 0 if metrics["tail_sup_error"] <= tail_limit else EXIT_TAIL

    # fleet examples
    if name == "ex3":
        plants = from_registry("robot_fleet")
        im = internal_model(S, n_y=1)
        base_cfg = dict(T=20, sample_dt=0.01, input_bound=0.5,
                        exo_init_bound=0.0025,
                        noise_bound=noise if noise is not None else 0.01,
                        mode="restarts", restart_radius=1.0)
        t_end = t_end or 60.0
        x0s = [np.array([0.5, 0.0]) * (i + 1) / 4 for i in range(4)]
        v0 = np.array([0.5, 0.0, 0.5, 0.0])
        tail_limit = 1e-2
    else:
        plants = from_registry("ball_beam_fleet")
        im = kth_order_internal_model(S, k, n_y=1)
        base_cfg = dict(T=100, sample_dt=0.002, input_bound=0.1,
                        exo_init_bound=0.002,
                        noise_bound=noise if noise is not None else 0.002,
                        mode="restarts", restart_radius=0.1)
        t_end = t_end or 100.0
        x0s = [np.array([0.005, 0.0, 0.0, 0.0])] * 4
        v0 = np.array([0.0015, 0.0, 0.0015, 0.0])
        tail_limit = 5e-2
    g = chain_graph(len(plants))
    seeds = np.random.SeedSequence(seed).spawn(len(plants))
    datasets = []
    for i, p in enumerate(plants):
        cfg = ExperimentConfig(seed=seeds[i].generate_state(1)[0],
                               **base_cfg)
        ds = run_experiment(augment(p, im), exo, cfg)
        datasets.append(ds)
        written.append(export_dataset(ds, outdir / f"data-agent{i + 1}"))
        cfg_any = cfg
    deltas = [delta_for(ds, cfg_any) for ds in datasets] \
        if delta_mode != "oracle" else None
    fc = synthesize_fleet(datasets, g, im, rho=rho, deltas=deltas)
    written.append(_gains_json(outdir / "gains.json", fc))
    sim = simulate_fleet(plants, fc, exo, g, x0s, v0, t_end=t_end, dt=dt)
    written.append(sim.export_csv(outdir / "trajectory.csv"))
    tail = int(np.ceil(0.9 * (len(sim.t) - 1)))
    per_agent_tail = np.max(np.abs(sim.e[tail:]), axis=(0, 2))
    metrics = {"tail_sup_error_per_agent": per_agent_tail.tolist(),
               "tail_sup_error": float(np.max(per_agent_tail)),
               "spectrum_decomposition_ok":
                   spectrum_decomposition_check(fc, plants, g, im)}
    written.append(_write_json(outdir / "metrics.json", metrics))
    written.append(_plot_errors(
        outdir / "errors.svg", sim.t, sim.e[:, :, 0].T,
        [f"agent {i + 1}" for i in range(g.N)]))
    _manifest(outdir, config, written)
    return 0 if metrics["tail_sup_error"] <= tail_limit else EXIT_TAIL


@main.command()
@click.argument("name")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default="out", show_default=True)
@click.option("--k", type=int, default=2, show_default=True,
              help="internal-model order for the nonlinear examples")
@click.option("--t-end", type=float, default=None)
@click.option("--dt", type=float, default=1e-3, show_default=True)
@click.option("--noise", type=float, default=None,
              help="override the per-example noise bound")
@click.option("--delta-mode", type=click.Choice(["oracle", "apriori"]),
              default="oracle", show_default=True)
@click.option("--rho", type=float, default=1.1, show_default=True)
def example(name, seed, out, k, t_end, dt, noise, delta_mode, rho):
    """Run a built-in end-to-end study (ex1, ex2, ex3 or ex4)."""
    if name not in ("ex1", "ex2", "ex3", "ex4"):
        _fail(EXIT_USAGE, f"unknown example {name!r} (expected ex1..ex4)")
    try:
        code = _run_example(name, seed, out, k, t_end, dt, noise,
                            delta_mode, rho)
    except (Infeasible, AssumptionViolated, ComplexSpectrum) as exc:
        _fail(EXIT_INFEASIBLE, str(exc))
    except (Diverged, ExperimentDiverged) as exc:
        _fail(EXIT_DIVERGED, str(exc))
    except NumericalFailure as exc:
        _fail(EXIT_INFEASIBLE, f"numerical failure: {exc}")
    sys.exit(code)


def _load_config(path):
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        _fail(EXIT_CONFIG,
              f"malformed JSON in {path} at line {exc.lineno} column "
              f"{exc.colno}: {exc.msg}")
    except OSError as exc:
        _fail(EXIT_CONFIG, str(exc))


def _build_plant(spec):
    if isinstance(spec, str):
        return from_registry(spec)
    if "linear" in spec:
        m = spec["linear"]
        return LinearPlant(A=m["A"], B=m["B"], C=m["C"], E=m["E"], F=m["F"])
    raise ValueError("plant spec must be a registry name or a "
                     "{'linear': {A,B,C,E,F}} record")


def _build_exo(spec):
    if spec is None:
        return paper_exosystem()
    return build_exosystem(spec["S_r"], spec.get("S_w"))


def _build_im(spec, S):
    spec = spec or {}
    k = int(spec.get("k", 1))
    n_y = int(spec.get("n_y", 1))
    if k == 1:
        return internal_model(S, n_y=n_y)
    return kth_order_internal_model(S, k, n_y=n_y)


def _dataset_from_config(cfg, plant, exo, im):
    data = cfg.get("data", {})
    if "manifest" in data:
        return import_dataset(data["manifest"])
    exp = data.get("experiment", {})
    ecfg = ExperimentConfig(**exp)
    return run_experiment(augment(plant, im), exo, ecfg)


def _delta_from_config(cfg, ds):
    d = cfg.get("delta", {"mode": "oracle"})
    if d.get("mode", "oracle") == "oracle":
        return delta_bound(ds, "oracle-inflate", rho=float(d.get("rho", 1.1)))
    return delta_bound(ds, "a-priori", d_bar=float(d["d_bar"]),
                       v_bar=float(d["v_bar"]),
                       E_norm_bound=float(d["E_norm_bound"]))


@main.command()
@click.argument("config", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default="out/synthesis",
              show_default=True)
def synthesize(config, out):
    """Synthesize gains from a config file (experiment or imported data)."""
    cfg = _load_config(config)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        exo = _build_exo(cfg.get("exosystem"))
        im = _build_im(cfg.get("internal_model"), exo.S)
        scenario = cfg.get("scenario", "linear")
        if scenario.startswith("mas"):
            gspec = cfg.get("graph")
            if gspec is None:
                _fail(EXIT_CONFIG, "MAS scenario needs a 'graph' entry")
            g = (load_graph(gspec) if isinstance(gspec, str)
                 else graph_from_config(gspec["adjacency"], gspec["pinning"]))
            plants = _build_plant(cfg["plant"])
            if not isinstance(plants, list):
                _fail(EXIT_CONFIG, "MAS scenario needs a fleet plant")
            datasets = [_dataset_from_config(cfg, p, exo, im) for p in plants]
            deltas = [_delta_from_config(cfg, ds) for ds in datasets]
            fc = synthesize_fleet(datasets, g, im, deltas=deltas)
            written.append(_gains_json(outdir / "gains.json", fc))
            report = {"margins": fc.margins, "lambdas": fc.lambdas.tolist()}
        else:
            plant = _build_plant(cfg["plant"])
            ds = _dataset_from_config(cfg, plant, exo, im)
            delta = _delta_from_config(cfg, ds)
            if im.order > 1:
                ctrl = synthesize_nonlinear_k(ds, exo.S, im.order,
                                              n_y=im.n_y, delta=delta)
            else:
                ctrl = synthesize_linear(ds, im, delta=delta)
            written.append(_gains_json(outdir / "gains.json", ctrl))
            report = {"margin": ctrl.source.margin,
                      "solver": ctrl.source.stats}
        written.append(_write_json(outdir / "synthesis_report.json", report))
    except (KeyError, ValueError, TypeError) as exc:
        _fail(EXIT_CONFIG, f"bad config: {exc}")
    except (Infeasible, AssumptionViolated, ComplexSpectrum) as exc:
        _fail(EXIT_INFEASIBLE, str(exc))
    except NumericalFailure as exc:
        _fail(EXIT_INFEASIBLE, f"numerical failure: {exc}")
    except ExperimentDiverged as exc:
        _fail(EXIT_DIVERGED, str(exc))
    _manifest(outdir, cfg, written)
    sys.exit(0)


@main.command()
@click.argument("config", type=click.Path(exists=True))
@click.argument("gains", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default="out/simulation",
              show_default=True)
@click.option("--t-end", type=float, default=50.0, show_default=True)
@click.option("--dt", type=float, default=1e-3, show_default=True)
def simulate(config, gains, out, t_end, dt):
    """Replay synthesized gains in closed loop and export trajectories."""
    cfg = _load_config(config)
    gobj = _load_config(gains)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        exo = _build_exo(cfg.get("exosystem"))
        im = _build_im(cfg.get("internal_model"), exo.S)
        sim_cfg = cfg.get("simulation", {})
        if "agents" in gobj:
            gspec = cfg.get("graph")
            g = (load_graph(gspec) if isinstance(gspec, str)
                 else graph_from_config(gspec["adjacency"], gspec["pinning"]))
            plants = _build_plant(cfg["plant"])
            from .mas import FleetController
            fc = FleetController(
                Kx=[np.array(a["Kx"]) for a in gobj["agents"]],
                Kz=[np.array(a["Kz"]) for a in gobj["agents"]],
                P=[np.array(a["P"]) for a in gobj["agents"]],
                Y=[np.array(a["Y"]) for a in gobj["agents"]],
                lambdas=np.array(gobj["lambdas"]), im=im,
                margins=[a.get("margin") for a in gobj["agents"]])
            x0s = [np.array(x, dtype=float)
                   for x in sim_cfg.get("x0s",
                                        [[0.0] * plants[0].n_x] * g.N)]
            v0 = np.array(sim_cfg.get("v0", [0.0] * exo.n_v), dtype=float)
            sr = simulate_fleet(plants, fc, exo, g, x0s, v0,
                                t_end=t_end, dt=dt)
            err = sr.e[:, :, 0].T
            labels = [f"agent {i + 1}" for i in range(g.N)]
            tail = int(np.ceil(0.9 * (len(sr.t) - 1)))
            metrics = {"tail_sup_error":
                       float(np.max(np.abs(sr.e[tail:])))}
        else:
            plant = _build_plant(cfg["plant"])
            ctrl = Controller(Kx=np.array(gobj["Kx"]),
                              Kz=np.array(gobj["Kz"]), im=im)
            if ctrl.Kx.shape[1] != plant.n_x or ctrl.Kz.shape[1] != im.n_z:
                _fail(EXIT_CONFIG, "gain dimensions do not match the plant "
                      "and internal model")
            x0 = np.array(sim_cfg.get("x0", [0.0] * plant.n_x), dtype=float)
            v0 = np.array(sim_cfg.get("v0", [0.0] * exo.n_v), dtype=float)
            sr = simulate_closed_loop(plant, ctrl, exo, x0, v0,
                                      t_end=t_end, dt=dt)
            err = sr.e.T
            labels = [f"e_{i + 1}" for i in range(sr.e.shape[1])]
            metrics = tracking_metrics(sr)
        written.append(sr.export_csv(outdir / "trajectory.csv"))
        written.append(_write_json(outdir / "metrics.json", metrics))
        written.append(_plot_errors(outdir / "errors.svg", sr.t, err,
                                    labels))
    except (KeyError, ValueError, TypeError) as exc:
        _fail(EXIT_CONFIG, f"bad config: {exc}")
    except (Infeasible, AssumptionViolated, ComplexSpectrum) as exc:
        _fail(EXIT_INFEASIBLE, str(exc))
    except Diverged as exc:
        _fail(EXIT_DIVERGED, str(exc))
    _manifest(outdir, cfg, written)
    sys.exit(0)


if __name__ == "__main__":
    main()
