"""Subcommand runners: each maps an ExperimentConfig to result records."""

from __future__ import annotations

import time

import numpy as np

from . import contact as ct
from . import oracle
from .braco_resem import (BracoParams, ResemParams, braco_paths, duality_oracle_test, duality_test,
                          homconv_check, maximal_bound_check, poissonization_test, resem_paths,
                          selfduality_test, submartingale_check, thin_empty_exact, thin_pois_pgf_gap)
from .io import ExperimentConfig, ResultRecord
from .lattice import build_lattice, kernel_from_base, nearest_neighbor_kernel, reverse_kernel
from .pde import (DiffMatrixField, boundary_identity_gaps, cauchy_limit, cauchy_solve, flow_case, flow_residual,
                  flow_solve, limit_class, ode_residual, pstar_shoot)
from .stats import Estimate, mean_se, z_score
from .wf_renorm import H00, H01, H11, CatalyzingFn, iterate_renorm, u_gamma_constant, wf_fixed_shape_gap

__all__ = ["RUNNERS", "run"]


def _record(cfg: ExperimentConfig, batch: int = 0) -> ResultRecord:
    return ResultRecord(cfg.experiment_id, cfg.hash, batch=batch)


def _kernel(cfg):
    lat = build_lattice("torus", d=cfg["dim"], L=cfg["L"])
    return lat, nearest_neighbor_kernel(lat, cfg["right"], left=cfg["left"])


def _site_vector(values, n, name):
    v = np.asarray(values)
    if v.size == 1:
        return np.full(n, v.item())
    if v.size != n:
        raise ValueError(f"{name} needs 1 or {n} entries, got {v.size}")
    return v


def run_verify(cfg):
    """Exact identities and closed forms; fast enough for a smoke run."""
    rec = _record(cfg)
    reps = cfg["reps"]
    lat4 = build_lattice("torus", d=1, L=4)
    for name, k in (("sym", nearest_neighbor_kernel(lat4, 1.0)), ("asym", nearest_neighbor_kernel(lat4, 2.0, left=1.0))):
        gap = max(oracle.contact_duality_gap(k, 1.0, t) for t in (0.5, 1.0, 2.0))
        rec.add(f"contact_oracle_duality_gap.{name}", gap)
        rec.verdict(f"contact_oracle_duality.{name}", gap < 1e-9)
    lat16 = build_lattice("torus", d=1, L=16)
    model = ct.ContactModel(lat16, nearest_neighbor_kernel(lat16, 2.0, left=1.0), 1.0)
    dual_bad, add_bad = ct.graphical_identity_check(model, reps, seed=cfg["seed"])
    rec.add("graphical_duality_mismatches", dual_bad)
    rec.add("graphical_additivity_mismatches", add_bad)
    rec.verdict("graphical_identities", dual_bad == 0 and add_bad == 0)
    lat5 = build_lattice("torus", d=1, L=5)
    k5 = kernel_from_base(lat5, {1: 2.0, -1: 1.0, 2: 0.5})
    gap = abs(oracle.contact_expected_size(k5, 1.0, [0], 1.0)
              - oracle.contact_expected_size(reverse_kernel(k5), 1.0, [0], 1.0))
    rec.add("expected_size_symmetry_gap", gap)
    rec.verdict("expected_size_symmetry", gap < 1e-9)
    x, phi = np.array([2, 1, 0]), np.array([0.3, 0.6, 0.2])
    gap = abs(thin_empty_exact(x, phi) - float(np.prod((1 - phi) ** x)))
    rec.add("thinning_gap", gap)
    rec.verdict("thinning", gap < 1e-12)
    gap = thin_pois_pgf_gap([0.7, 1.3], [0.4, 0.9], [0.5, 0.2])
    rec.add("thinned_poisson_gap", gap)
    rec.verdict("thinned_poisson", gap < 1e-12)
    gap = max(wf_fixed_shape_gap(xx, g) for xx in (0.1, 0.3, 0.5, 0.9) for g in (0.5, 1.0, 2.0))
    rec.add("wf_fixed_shape_gap", gap)
    rec.verdict("wf_fixed_shape", gap < 1e-12)
    gap = abs(u_gamma_constant(1.0, 0.7) - 1.0) + abs(u_gamma_constant(0.0, 0.7))
    rec.add("u_gamma_traps_gap", gap)
    rec.verdict("u_gamma_traps", gap < 1e-15)
    p = pstar_shoot(1.0, "01")
    res = ode_residual(p)
    b0, b1 = boundary_identity_gaps(p)
    rec.add("pstar_residual", res)
    rec.add("pstar_boundary_gap", max(b0, b1))
    rec.verdict("pstar", res < 1e-6 and max(b0, b1) < 1e-3 and np.all(np.diff(p.values) >= 0)
                and np.all(np.diff(p.values, 2) <= 1e-12))
    drift = np.abs(cauchy_solve(p, 1.0, 5.0).final.values - p.values).max()
    rec.add("pstar_stationarity", drift)
    rec.verdict("pstar_stationary", drift < 1e-3)
    _, r1 = flow_residual(flow_case(1))
    rec.add("flow_case1_residual", r1)
    rec.verdict("flow_case1_residual", r1 < 1e-8)
    return [rec]


def run_contact(cfg):
    lat, k = _kernel(cfg)
    model = ct.ContactModel(lat, k, cfg["delta"])
    rec = _record(cfg)
    seed, reps, task = cfg["seed"], cfg["reps"], cfg["task"]
    A = [a % lat.n for a in cfg["A"]]
    if task == "growth":
        fit = ct.estimate_growth_rate(model, A, np.array(cfg["t_grid"]), reps, seed)
        rec.add("r_hat", fit.r_hat)
        rec.add("ci_low", fit.ci[0])
        rec.add("ci_high", fit.ci[1])
        rec.verdict("bracket", fit.bracket_ok)
        rec.grids["size"] = (("t", "mean", "se"), np.column_stack([fit.t_grid, fit.mean_size, fit.se_size]))
    elif task == "duality":
        dual_bad, add_bad = ct.graphical_identity_check(model, reps, seed=seed)
        rec.add("duality_mismatches", dual_bad)
        rec.add("additivity_mismatches", add_bad)
        rec.verdict("identities", dual_bad == 0 and add_bad == 0)
    elif task == "char":
        lhs, rhs, z = ct.char_check(model, A, cfg["lam"], reps, seed)
        rec.add("char.lhs", lhs)
        rec.add("char.rhs", rhs)
        rec.add("char.z", z)
        rec.verdict("char", abs(z) < 4)
    elif task == "typical":
        law = ct.typical_site_law(model, A, cfg["lam"], cfg["Delta"], reps, seed)
        rec.add("agree_bar", law.agree_bar)
        rec.add("agree_full", law.agree_full)
        rec.add("agree_bar_full", law.agree_bar_full)
    else:
        t = cfg["t_grid"][-1]
        a = ct.expected_size(model, A, t, reps, seed, key=(0,))
        b = ct.expected_size(model.reversed(), A, t, reps, seed, key=(1,))
        z = z_score(a, b)
        rec.add("size.lhs", a)
        rec.add("size.rhs", b)
        rec.add("size.z", z)
        rec.verdict("size_symmetry", abs(z) < 4)
    return [rec]


def run_braco(cfg):
    lat, k = _kernel(cfg)
    params = BracoParams(k, cfg["b"], cfg["c"], cfg["d"])
    rec = _record(cfg)
    seed, reps = cfg["seed"], cfg["reps"]
    grid = np.array(cfg["t_grid"])
    if cfg["task"] == "moments":
        x0 = _site_vector(cfg["x0"], lat.n, "x0").astype(np.int64)
        run = braco_paths(params, x0, grid, reps, seed)
        tot = run.states.sum(axis=2)
        rows = []
        for j, t in enumerate(grid):
            e = mean_se(tot[:, j])
            rec.add(f"mean_total.t{t:g}", e)
            rows.append((t, e.value, e.se))
        rec.grids["total"] = (("t", "mean", "se"), np.array(rows))
    elif cfg["task"] == "maxbound":
        rows = maximal_bound_check(params, grid, reps, caps=(cfg["cap"],), seed=seed)
        for r in rows:
            rec.add(f"max.t{r.t:g}", r.estimate)
            rec.add(f"bound.t{r.t:g}", r.bound)
            rec.verdict(f"bound.t{r.t:g}", r.ok)
    else:
        rep = homconv_check(params, float(grid[-1]), reps, cap=cfg["cap"], seed=seed)
        rec.add("tv", rep.tv)
        rec.verdict("tv", rep.tv < 0.05)
        rec.grids["hist"] = (("count", "pois", "max"), np.column_stack([np.arange(rep.hist_pois.size),
                                                                        rep.hist_pois, rep.hist_max]))
    return [rec]


def run_resem(cfg):
    lat, k = _kernel(cfg)
    params = ResemParams(k, cfg["b"], cfg["c"], cfg["d"], cfg["dt"])
    rec = _record(cfg)
    phi0 = _site_vector(cfg["phi0"], lat.n, "phi0").astype(float)
    grid = np.array(cfg["t_grid"])
    if cfg["task"] == "moments":
        paths = resem_paths(params, phi0, grid, cfg["reps"], cfg["seed"])
        rows = []
        for j, t in enumerate(grid):
            e = mean_se(paths[:, j].mean(axis=1))
            rec.add(f"mean_density.t{t:g}", e)
            rows.append((t, e.value, e.se))
        rec.grids["density"] = (("t", "mean", "se"), np.array(rows))
    else:
        rep = submartingale_check(params, phi0, np.concatenate([[0.0], grid]), cfg["reps"], cfg["seed"])
        for t, v in zip(rep.t_grid, rep.values):
            rec.add(f"laplace.t{t:g}", v)
        rec.verdict("nondecreasing", rep.nondecreasing)
        rec.add("flat", float(rep.flat))
    return [rec]


def run_dualitytest(cfg):
    lat, k = _kernel(cfg)
    params = ResemParams(k, cfg["b"], cfg["c"], cfg["d"], cfg["dt"])
    rec = _record(cfg)
    n = lat.n
    seed, reps, t = cfg["seed"], cfg["reps"], cfg["t"]
    phi = _site_vector(cfg["phi"], n, "phi").astype(float)
    which = cfg["which"]
    if which == "a":
        res = [("a", duality_test(params, _site_vector(cfg["x"], n, "x").astype(np.int64), phi, t, reps, seed))]
    elif which == "oracle":
        res = [("oracle", duality_oracle_test(params, _site_vector(cfg["x"], n, "x").astype(np.int64), phi, t,
                                              reps, seed=seed))]
    elif which == "selfdual":
        psi = _site_vector(cfg["psi"], n, "psi").astype(float)
        res = [("selfdual", selfduality_test(params, phi, psi, t, reps, seed))]
    else:
        psi = _site_vector(cfg["psi"], n, "psi").astype(float)
        res = [("poisson", poissonization_test(params, phi, t, [psi], reps, seed)[0])]
    for name, r in res:
        rec.add(f"{name}.lhs", r.lhs)
        rec.add(f"{name}.rhs", r.rhs)
        rec.add(f"{name}.z", r.z)
        rec.verdict(name, r.passed())
    return [rec]


def _p0(cfg):
    m = cfg["m"]
    f = {"x": lambda x: x, "h00": H00, "h01": H01, "h11": H11, "const": lambda x: cfg["r"] + 0 * x}[cfg["p0"]]
    return CatalyzingFn.from_callable(f, m=m)


def run_renorm(cfg):
    p0 = _p0(cfg)
    seq = iterate_renorm(p0, [cfg["gamma"]] * cfg["n"], mc=cfg["mc"], seed=cfg["seed"], method=cfg["method"])
    records = []
    for k, p in enumerate(seq):
        rec = _record(cfg, batch=k)
        se = np.zeros_like(p.values) if p.se is None else p.se
        rec.add("sup", Estimate(float(p.values.max()), float(se[np.argmax(p.values)])))
        rec.grids[f"iterate{k}"] = (("x", "p", "se"), np.column_stack([p.grid, p.values, se]))
        records.append(rec)
    return records


def run_flow(cfg):
    m, case = cfg["m"], cfg["case"]
    s1, s2 = cfg["scale1"], cfg["scale2"]
    catalyst = {1: lambda a: 1.0 + 0 * a, 2: lambda a: a, 4: lambda a: 4 * a * (1 - a)}[case]
    w0 = DiffMatrixField.from_callables(lambda a, b: s1 * a * (1 - a), lambda a, b: s2 * catalyst(a) * b * (1 - b),
                                        m=m)
    snaps = sorted(set(cfg["snapshots"]) | {cfg["t_end"]})
    res = flow_solve(w0, cfg["t_end"], snapshots=snaps)
    p = pstar_shoot(1.0, "01", m=m) if case == 2 else None
    target = flow_case(case, m=m, p=p)
    rec = _record(cfg)
    dist = res.final.sup_distance(target)
    _, resid = flow_residual(res.final)
    rec.add("sup_distance", dist)
    rec.add("residual", resid)
    rec.add("max_clip", res.max_clip)
    rec.verdict("converged", dist < 1e-2 and not res.blew_up)
    rec.verdict("residual", resid < 1e-2)
    rec.verdict("clip", res.max_clip < 1e-6)
    for t, snap in zip(res.times, res.snapshots):
        rows = snap.rows()
        rec.grids[f"t{t:g}"] = (("x1", "x2", "w11", "w22"), rows[:, [0, 1, 2, 4]])
    return [rec]


def run_pstar(cfg):
    alpha, cls = cfg["alpha"], cfg["class"]
    p = pstar_shoot(alpha, cls, m=cfg["m"])
    rec = _record(cfg)
    res = ode_residual(p)
    rec.add("residual", res)
    rec.add("p_left", float(p.values[0]))
    rec.add("p_right", float(p.values[-1]))
    rec.verdict("residual", res < 1e-6)
    if cls in ("01", "10"):
        b0, b1 = boundary_identity_gaps(p)
        rec.add("boundary_gap", max(b0, b1))
        rec.verdict("boundary_identity", max(b0, b1) < 1e-3)
        v = p.values if cls == "01" else p.values[::-1]
        rec.verdict("monotone", bool(np.all(np.diff(v) >= -1e-12)))
        rec.verdict("concave", bool(np.all(np.diff(v, 2) <= 1e-12)))
    rec.grids["p"] = (("x", "p"), np.column_stack([p.grid, p.values]))
    return [rec]


def run_cauchy(cfg):
    m, alpha, r = cfg["m"], cfg["alpha"], cfg["r"]
    x = np.linspace(0.0, 1.0, m + 1)
    f = {"x": x, "1-x": 1 - x, "bump": 4 * x * (1 - x), "zero": 0 * x, "const": r + 0 * x, "x3": x ** 3,
         "corner0": (1 - x) ** 2}[cfg["f"]]
    snaps = sorted(set(cfg["snapshots"]) | {cfg["t_end"]})
    res = cauchy_solve(f, alpha, cfg["t_end"], snapshots=snaps)
    lim = cauchy_limit(f, alpha, m=m)
    rec = _record(cfg)
    dist = res.final.sup_distance(lim)
    rec.add("limit_class", {"value": {"0": 0, "00": 1, "10": 2, "01": 3, "11": 4}[limit_class(f)], "se": "exact"})
    rec.add("sup_distance_to_limit", dist)
    rec.verdict("limit", dist < 1e-2)
    for t, v in zip(res.times, res.values):
        rec.grids[f"t{t:g}"] = (("x", "u"), np.column_stack([x, v]))
    return [rec]


RUNNERS = {
    "verify": run_verify,
    "contact": run_contact,
    "braco": run_braco,
    "resem": run_resem,
    "dualitytest": run_dualitytest,
    "renorm": run_renorm,
    "flow": run_flow,
    "pstar": run_pstar,
    "cauchy": run_cauchy,
}


def run(cfg: ExperimentConfig) -> list[ResultRecord]:
    t0 = time.perf_counter()
    try:
        records = RUNNERS[cfg.subcommand](cfg)
    except Exception as exc:
        raise RuntimeError(f"{cfg.subcommand} ({cfg.experiment_id}) failed: {exc}") from exc
    wall = time.perf_counter() - t0
    for rec in records:
        rec.wall_time = wall
    return records
