"""Command implementations: wire configuration into runs and write artifacts.

Every command writes its outputs plus a ``manifest.json`` (config echo, seed,
sha-256 of each artifact) into the chosen output directory.  Ensemble runs
split replicas into contiguous thread groups; noise streams are keyed by the
global replica index and observers merge in group order, so results do not
depend on the thread count.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import csvio, fields, gibbs, lattice, sbe, tensors
from .config import ConfigError
from .potentials import check_assumptions
from .testfunctions import by_name


def _thread_slices(total, threads):
    threads = max(1, min(int(threads), total))
    size = -(-total // threads)
    return [(lo, min(lo + size, total)) for lo in range(0, total, size)]


def run_ensemble(system, plan, seed, observer_factories=(), threads=1):
    """Run all replicas (optionally across threads); returns (final, observers)."""
    u0 = system.init_stationary(plan.replicas, seed)
    bounds = _thread_slices(plan.replicas, threads)
    group_obs = []
    if len(bounds) == 1:
        observers = [make() for make in observer_factories]
        final = lattice.run(system, u0, seed, plan, observers,
                            replica_indices=range(plan.replicas))
        return final, observers
    with ThreadPoolExecutor(max_workers=len(bounds)) as pool:
        futures = []
        for lo, hi in bounds:
            observers = [make() for make in observer_factories]
            group_obs.append(observers)
            futures.append(
                pool.submit(
                    lattice.run, system, u0[lo:hi], seed,
                    replace(plan, replicas=hi - lo), observers, range(lo, hi),
                )
            )
        finals = [fut.result() for fut in futures]
    merged = group_obs[0]
    for observers in group_obs[1:]:
        for target, other in zip(merged, observers):
            target.extend(other)
    return np.concatenate(finals), merged


# ---------------------------------------------------------------------------
# shared construction helpers


def build_system(cfg):
    potential = cfg.build_potential()
    lat = cfg.section("lattice")
    return lattice.LatticeSystem(lat["n"], potential, beta=lat["beta"], lam=lat["lam"])


def build_plan(cfg, replicas=None):
    run = cfg.section("run")
    return lattice.RunPlan(
        t_final=run["t_final"],
        dt_micro=run["dt_micro"] if run["dt_micro"] is not None else 0.01,
        obs_stride=run["obs_stride"],
        replicas=replicas if replicas is not None else run["replicas"],
        blowup_threshold=run["blowup_threshold"],
    )


def clamp_plan_dt(plan, system):
    cap = lattice.stability_cap(system)
    if plan.dt_micro > cap:
        return replace(plan, dt_micro=cap), cap
    return plan, cap


def frame_speed(system, tol=1e-6):
    """Frame constants from the drift tensors; flags non-constant frames."""
    gamma, delta = tensors.gamma_delta(system.potential)
    report = tensors.check_frame_conditions(gamma, delta, system.lam, tol=tol)
    f_n = tensors.moving_frame(system.n, report.eta, report.eta_prime)
    return f_n, report


def record_times_for(cfg):
    run = cfg.section("run")
    times = run["record_times"]
    if times is None:
        times = (0.0, run["t_final"])
    return tuple(sorted(set(float(t) for t in times)))


def _manifest(out_dir, command, cfg, extra=None):
    payload = {
        "command": command,
        "config": cfg.values,
        "outputs": {},
    }
    if extra:
        payload.update(extra)
    names = [f for f in sorted(os.listdir(out_dir)) if f != "manifest.json"]
    for name in names:
        payload["outputs"][name] = csvio.sha256_file(os.path.join(out_dir, name))
    csvio.write_json(os.path.join(out_dir, "manifest.json"), payload)


def _ensure_out(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


# ---------------------------------------------------------------------------
# commands


def cmd_tensors(cfg, out_dir, threads=1):
    _ensure_out(out_dir)
    potential = cfg.build_potential()
    lam = np.zeros(potential.d)
    lam_cfg = np.asarray(cfg.get("lattice", "lam"), dtype=float)
    lam = lam + lam_cfg if lam_cfg.size == potential.d else lam + float(lam_cfg[0])
    gamma, delta = tensors.gamma_delta(potential)
    constraint = tensors.check_algebraic_constraint(gamma)
    lam_mat = tensors.lambda_matrix(gamma, lam)
    xi_mat = tensors.xi_matrix(gamma, delta, lam)
    report = tensors.check_frame_conditions(gamma, delta, lam)
    rows = []
    d = potential.d
    for idx in np.ndindex(*gamma.shape):
        rows.append(("gamma", "".join(map(str, idx)), gamma[idx]))
    for idx in np.ndindex(*delta.shape):
        rows.append(("delta", "".join(map(str, idx)), delta[idx]))
    for idx in np.ndindex(d, d):
        rows.append(("lambda_matrix", "".join(map(str, idx)), lam_mat[idx]))
    for idx in np.ndindex(d, d):
        rows.append(("xi_matrix", "".join(map(str, idx)), xi_mat[idx]))
    csvio.write_csv(os.path.join(out_dir, "tensors.csv"),
                    ("tensor", "indices", "value"), rows)
    summary = {
        "potential": potential.name,
        "species": d,
        "tilt": [float(v) for v in lam],
        "constraint_deviation": constraint,
        "eta": report.eta,
        "eta_prime": report.eta_prime,
        "lambda_deviation": report.lambda_deviation,
        "xi_deviation": report.xi_deviation,
        "frame_ok": bool(report.ok),
    }
    csvio.write_json(os.path.join(out_dir, "summary.json"), summary)
    _manifest(out_dir, "tensors", cfg)
    return 0


def cmd_check_potential(cfg, out_dir, threads=1):
    _ensure_out(out_dir)
    potential = cfg.build_potential()
    report = check_assumptions(potential)
    for line in report.lines():
        print(line)
    csvio.write_json(os.path.join(out_dir, "check.json"), report.as_dict())
    _manifest(out_dir, "check-potential", cfg)
    return 0 if report.passed else 1


def cmd_sample(cfg, out_dir, threads=1):
    _ensure_out(out_dir)
    system = build_system(cfg)
    samp = cfg.section("sample")
    seed = cfg.get("run", "seed")
    batch = gibbs.sample_sites(system.measure, samp["count"], seed,
                               burn_in=samp["burn_in"], thin=samp["thin"])
    rows = [(i, *row) for i, row in enumerate(batch.samples)]
    header = ("index",) + tuple(f"u{a}" for a in range(system.d))
    csvio.write_csv(os.path.join(out_dir, "samples.csv"), header, rows)
    exp_mean, exp_se = gibbs.exp_moment(batch.samples, system.potential.gamma_v)
    mean, var = gibbs.site_stats(system.measure)
    checks = gibbs.w_mean_check(system.measure, batch.samples)
    checks += gibbs.ibp_check(system.measure, batch.samples)
    summary = {
        "acceptance": batch.acceptance_rate,
        "count": int(batch.samples.shape[0]),
        "sample_mean": [float(v) for v in batch.samples.mean(axis=0)],
        "marginal_mean": [float(v) for v in mean],
        "marginal_var": [float(v) for v in var],
        "exp_moment": exp_mean,
        "exp_moment_se": exp_se,
        "identities": [
            {"label": c.label, "species": c.species, "lhs": c.lhs,
             "rhs": c.rhs, "stderr": c.stderr, "z": c.z, "ok": bool(c.ok)}
            for c in checks
        ],
    }
    csvio.write_json(os.path.join(out_dir, "summary.json"), summary)
    _manifest(out_dir, "sample", cfg)
    return 0 if all(c.ok for c in checks) else 1


def cmd_simulate(cfg, out_dir, threads=1):
    _ensure_out(out_dir)
    system = build_system(cfg)
    plan = build_plan(cfg)
    plan, cap = clamp_plan_dt(plan, system)
    times = record_times_for(cfg)
    seed = cfg.get("run", "seed")
    factories = [
        lambda: lattice.SnapshotRecorder(times),
        lambda: lattice.ConservationTracker(),
    ]
    final, (recorder, tracker) = run_ensemble(system, plan, seed, factories, threads)
    for t, state in zip(recorder.times, recorder.states):
        csvio.write_state(os.path.join(out_dir, "state_t%.6f.bin" % t), state, t)
    summary = {
        "n": system.n,
        "species": system.d,
        "replicas": plan.replicas,
        "dt_micro": plan.dt_micro,
        "stability_cap": cap,
        "steps": plan.steps(system.n),
        "conservation_drift": tracker.max_drift,
        "final_mean": [float(v) for v in final.mean(axis=(0, 1))],
    }
    csvio.write_json(os.path.join(out_dir, "summary.json"), summary)
    _manifest(out_dir, "simulate", cfg)
    return 0


def cmd_fields(cfg, out_dir, threads=1):
    _ensure_out(out_dir)
    system = build_system(cfg)
    plan = build_plan(cfg)
    plan, cap = clamp_plan_dt(plan, system)
    times = record_times_for(cfg)
    seed = cfg.get("run", "seed")
    phi = by_name(cfg.get("fields", "phi"))
    pair = cfg.get("fields", "pair")
    eps = cfg.get("fields", "eps")
    f_n, frame = frame_speed(system)
    center = fields.estimate_center(system)
    factories = [
        lambda: fields.DecompositionObserver(phi, system, f_n, center, times),
        lambda: fields.QuadraticFieldObserver(phi, system, f_n, pair, eps, center,
                                              record_times=times),
    ]
    _, (decomp_obs, quad_obs) = run_ensemble(system, plan, seed, factories, threads)
    result = decomp_obs.result()
    rows = []
    for k, t in enumerate(result.times):
        for r in range(result.x.shape[1]):
            for s in range(result.x.shape[2]):
                rows.append((
                    t, r, s,
                    result.x[k, r, s], result.x0[r, s], result.s[k, r, s],
                    result.b[k, r, s], result.m[k, r, s], result.resid[k, r, s],
                ))
    csvio.write_csv(
        os.path.join(out_dir, "decomposition.csv"),
        ("time", "replica", "species", "x", "x0", "s_term", "b_term",
         "m_term", "r_term"),
        rows,
    )
    quad_rows = []
    for k, t in enumerate(quad_obs.series_times):
        for r, value in enumerate(quad_obs.series[k]):
            quad_rows.append((t, r, quad_obs.ell, value))
    csvio.write_csv(os.path.join(out_dir, "quadratic_field.csv"),
                    ("time", "replica", "window", "value"), quad_rows)
    qv_rate = fields.qv_estimate(phi, system.n, f_n, t=1.0)
    mart = result.m[-1]
    summary = {
        "phi": phi.name,
        "frame_speed": f_n,
        "frame_ok": bool(frame.ok),
        "center": [float(v) for v in np.atleast_1d(center)],
        "qv_rate": qv_rate,
        "qv_reference": phi.h1_seminorm_sq,
        "martingale_var": [float(v) for v in mart.var(axis=0, ddof=1)],
        "martingale_var_target": qv_rate * float(result.times[-1]),
        "residual_rms": [
            float(np.sqrt(np.mean(result.resid[-1, :, s] ** 2)))
            for s in range(result.resid.shape[2])
        ],
        "dt_micro": plan.dt_micro,
        "stability_cap": cap,
    }
    csvio.write_json(os.path.join(out_dir, "summary.json"), summary)
    _manifest(out_dir, "fields", cfg)
    return 0


def default_windows(n, t_final):
    """Geometric window sweep covering the expected optimum ``~sqrt(T) n``."""
    top = max(2, n // 2)
    raw = np.geomspace(2, top, num=8)
    ells = sorted({int(round(v)) for v in raw})
    anchor = int(round(math.sqrt(max(t_final, 1e-6)) * n))
    for extra in (anchor // 2, anchor, min(2 * anchor, top)):
        if 2 <= extra <= top:
            ells.append(extra)
    return tuple(sorted(set(ells)))


def cmd_bg_test(cfg, out_dir, threads=1):
    _ensure_out(out_dir)
    system = build_system(cfg)
    plan = build_plan(cfg)
    plan, cap = clamp_plan_dt(plan, system)
    seed = cfg.get("run", "seed")
    phi = by_name(cfg.get("fields", "phi"))
    pair = cfg.get("fields", "pair")
    ells = cfg.get("fields", "ell_values")
    if ells is None:
        ells = default_windows(system.n, plan.t_final)
    f_n, frame = frame_speed(system)
    factories = [
        (lambda ell=ell: fields.PairReplacementObserver(phi, system, f_n, pair, ell))
        for ell in ells
    ]
    _, observers = run_ensemble(system, plan, seed, factories, threads)
    rows = fields.bg_sweep_rows(observers)
    csvio.write_csv(
        os.path.join(out_dir, "bg.csv"),
        ("window", "statistic", "stderr"),
        [(row.ell, row.statistic, row.stderr) for row in rows],
    )
    best = min(rows, key=lambda row: row.statistic)
    summary = {
        "phi": phi.name,
        "pair": list(pair),
        "frame_speed": f_n,
        "frame_ok": bool(frame.ok),
        "windows": list(ells),
        "best_window": best.ell,
        "best_statistic": best.statistic,
        "replicas": plan.replicas,
        "t_final": plan.t_final,
        "dt_micro": plan.dt_micro,
        "stability_cap": cap,
    }
    csvio.write_json(os.path.join(out_dir, "summary.json"), summary)
    _manifest(out_dir, "bg-test", cfg)
    return 0


def _sbe_coupling(cfg):
    mode = cfg.get("sbe", "coupling")
    if mode == "zero":
        potential = cfg.build_potential()
        return np.zeros((potential.d,) * 3), potential
    if mode == "auto":
        potential = cfg.build_potential()
        gamma, _ = tensors.gamma_delta(potential)
        return gamma, potential
    raise ValueError(f"unknown coupling mode {mode!r}")


def cmd_sbe(cfg, out_dir, threads=1):
    _ensure_out(out_dir)
    coupling, _ = _sbe_coupling(cfg)
    m = cfg.get("sbe", "m")
    replicas = cfg.get("sbe", "replicas")
    if replicas is None:
        replicas = cfg.get("run", "replicas")
    seed = cfg.get("run", "seed")
    times = record_times_for(cfg)
    system = sbe.SpectralSBE(m, coupling)
    u_hat = system.init_white(replicas, seed)
    out_times, states = system.run(u_hat, cfg.get("run", "t_final"), seed,
                                   dt=cfg.get("sbe", "dt"), record_times=times)
    phi = by_name(cfg.get("fields", "phi"))
    paired = np.stack([sbe.pair_with_test_function(s, phi) for s in states])
    rows = []
    for k, t in enumerate(out_times):
        for r in range(paired.shape[1]):
            for s in range(paired.shape[2]):
                rows.append((t, r, s, paired[k, r, s]))
    csvio.write_csv(os.path.join(out_dir, "pairings.csv"),
                    ("time", "replica", "species", "value"), rows)
    variances = sbe.mode_variances(states[-1])
    var_rows = []
    for s in range(variances.shape[0]):
        for k in range(variances.shape[1]):
            var_rows.append((s, k, variances[s, k]))
    csvio.write_csv(os.path.join(out_dir, "mode_variance.csv"),
                    ("species", "mode", "variance"), var_rows)
    pair_var = paired[-1].var(axis=0, ddof=1)
    pair_se = pair_var * math.sqrt(2.0 / max(replicas - 1, 1))
    csvio.write_csv(
        os.path.join(out_dir, "variance.csv"),
        ("phi", "species", "variance", "stderr", "reference"),
        [(phi.name, s, float(pair_var[s]), float(pair_se[s]), phi.l2_norm_sq)
         for s in range(paired.shape[2])],
    )
    gauss = sbe.gaussianity_report(paired[-1, :, 0])
    summary = {
        "m": m,
        "replicas": replicas,
        "linear": bool(system.is_linear),
        "times": [float(t) for t in out_times],
        "pairing_variance": [float(v) for v in paired[-1].var(axis=0, ddof=1)],
        "pairing_variance_target": phi.l2_norm_sq,
        "gaussianity": gauss,
    }
    csvio.write_json(os.path.join(out_dir, "summary.json"), summary)
    _manifest(out_dir, "sbe", cfg)
    return 0


def _autocov_rows(series, times):
    """Covariance of the time-0 pairing with each later pairing, per species.

    ``series`` has shape (times, replicas, species); returns rows of
    (time, species, cov, stderr).
    """
    base = series[0] - series[0].mean(axis=0, keepdims=True)
    rows = []
    for k, t in enumerate(times):
        cur = series[k] - series[k].mean(axis=0, keepdims=True)
        prods = base * cur
        r = prods.shape[0]
        cov = prods.mean(axis=0)
        se = prods.std(axis=0, ddof=1) / math.sqrt(r)
        for s in range(prods.shape[1]):
            rows.append((float(t), s, float(cov[s]), float(se[s])))
    return rows


def cmd_compare(cfg, out_dir, threads=1):
    _ensure_out(out_dir)
    system = build_system(cfg)
    plan = build_plan(cfg)
    plan, cap = clamp_plan_dt(plan, system)
    times = record_times_for(cfg)
    if times[0] > 0.0:
        times = (0.0,) + times
    seed = cfg.get("run", "seed")
    phi = by_name(cfg.get("fields", "phi"))
    f_n, frame = frame_speed(system)
    center = fields.estimate_center(system)

    factories = [lambda: lattice.SnapshotRecorder(times)]
    _, (recorder,) = run_ensemble(system, plan, seed, factories, threads)
    lat_series = np.stack([
        fields.field_x(state, fields.phi_lattice(phi, system.n, f_n, t), center)
        for t, state in zip(recorder.times, recorder.states)
    ])
    lat_rows = _autocov_rows(lat_series, recorder.times)

    coupling, _ = _sbe_coupling(cfg)
    sbe_replicas = cfg.get("sbe", "replicas")
    if sbe_replicas is None:
        sbe_replicas = plan.replicas
    spectral = sbe.SpectralSBE(cfg.get("sbe", "m"), coupling)
    u_hat = spectral.init_white(sbe_replicas, seed)
    sbe_times, sbe_states = spectral.run(u_hat, times[-1], seed,
                                         dt=cfg.get("sbe", "dt"),
                                         record_times=times)
    sbe_series = np.stack([sbe.pair_with_test_function(s, phi) for s in sbe_states])
    sbe_rows = _autocov_rows(sbe_series, sbe_times)

    rows = [("lattice", *row) for row in lat_rows]
    rows += [("sbe", *row) for row in sbe_rows]
    if spectral.is_linear:
        oracle = sbe.ou_autocovariance(phi, times)
        rows += [("exact_ou", float(t), s, float(oracle[k]), 0.0)
                 for k, t in enumerate(times) for s in range(system.d)]
    csvio.write_csv(os.path.join(out_dir, "compare.csv"),
                    ("side", "time", "species", "autocov", "stderr"), rows)

    lat_map = {(t, s): c for t, s, c, _ in lat_rows}
    sbe_map = {(t, s): c for t, s, c, _ in sbe_rows}
    scale = max(abs(v) for (t, s), v in sbe_map.items() if t == 0.0)
    devs = [
        abs(lat_map[key] - sbe_map[key]) / scale
        for key in lat_map
        if key in sbe_map
    ]
    summary = {
        "phi": phi.name,
        "times": [float(t) for t in times],
        "lattice_replicas": plan.replicas,
        "sbe_replicas": sbe_replicas,
        "frame_speed": f_n,
        "frame_ok": bool(frame.ok),
        "cov_scale": float(scale),
        "max_relative_deviation": float(max(devs)),
        "dt_micro": plan.dt_micro,
        "stability_cap": cap,
    }
    csvio.write_json(os.path.join(out_dir, "summary.json"), summary)
    _manifest(out_dir, "compare", cfg)
    return 0


def cmd_sweep(cfg, out_dir, threads=1):
    _ensure_out(out_dir)
    potential = cfg.build_potential()
    lam = cfg.get("lattice", "lam")
    betas = cfg.get("sweep", "betas")
    results = [
        gibbs.partition_function(gibbs.SiteMeasure(potential, beta, lam))
        for beta in betas
    ]
    rows = [
        (beta, res.value, res.error, res.converged, res.diverged)
        for beta, res in zip(betas, results)
    ]
    csvio.write_csv(os.path.join(out_dir, "sweep.csv"),
                    ("beta", "partition_value", "error", "converged", "diverged"),
                    rows)

    # exact-sum quadratic-variation rate across lattice sizes (no MC)
    ns = cfg.get("sweep", "ns")
    if not ns:
        raise ConfigError("sweep: lattice-size list 'ns' must be non-empty")
    phi = by_name(cfg.get("fields", "phi"))
    qv_rows = []
    for n in ns:
        system = lattice.LatticeSystem(n, potential,
                                       beta=cfg.get("lattice", "beta"), lam=lam)
        f_n, _ = frame_speed(system)
        rate = fields.qv_estimate(phi, n, f_n, t=1.0)
        qv_rows.append((n, rate, phi.h1_seminorm_sq))
    csvio.write_csv(os.path.join(out_dir, "qv.csv"),
                    ("n", "qv_rate", "reference"), qv_rows)

    stable = [b for b, res in zip(betas, results) if res.converged and not res.diverged]
    summary = {
        "potential": potential.name,
        "betas": list(betas),
        "largest_stable_beta": max(stable) if stable else None,
        "all_converged": bool(all(r.converged and not r.diverged for r in results)),
        "qv_ns": [int(n) for n in ns],
        "qv_rates": [float(r) for _, r, _ in qv_rows],
        "qv_reference": phi.h1_seminorm_sq,
    }
    csvio.write_json(os.path.join(out_dir, "summary.json"), summary)
    _manifest(out_dir, "sweep", cfg)
    return 0
