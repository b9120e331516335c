//! Command implementations.

use std::collections::BTreeMap;
use std::path::Path;

use nelson_sta::analog::{quantum_from_classical_s, time_of_s, to_time_domain, variance_rate};
use nelson_sta::baselines::ChenShape;
use nelson_sta::costs::{f_alpha, f_energy, functional_weight, j_total, CostReport};
use nelson_sta::dynamics::{self, energy_of, integrate_ermakov};
use nelson_sta::mc::{
    self, even_checkpoints, simulate_classical, simulate_nelson, twin_z, verify_born, McConfig,
    Z_LIMIT,
};
use nelson_sta::solver::{analytic_work_optimal, solve_bvp, BvpOptions, BvpSolution};
use nelson_sta::{
    alpha_of, equilibrium_kappa, CostKind, Error, OptimizationProblem, PhysConsts, ProtocolKind,
    SGridProtocol, TimeProtocol,
};
use rayon::prelude::*;
use serde_json::Value;

use crate::output::{fmt_e, num, nums, object, CsvTable, OutDir};
use crate::{protocol_file, CliError, Method, SolverArgs};

fn base_params(c: &PhysConsts) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("hbar".into(), fmt_e(c.hbar));
    m.insert("mass".into(), fmt_e(c.m));
    m.insert("gamma".into(), fmt_e(c.gamma));
    m.insert("diffusion".into(), fmt_e(c.d));
    m
}

fn problem_params(c: &PhysConsts, prob: &OptimizationProblem) -> BTreeMap<String, String> {
    let mut m = base_params(c);
    m.insert("cost".into(), prob.cost.name().into());
    m.insert("lambda".into(), fmt_e(prob.lambda));
    m.insert("mu".into(), fmt_e(prob.mu));
    m.insert("si".into(), fmt_e(prob.s_i));
    m.insert("sf".into(), fmt_e(prob.s_f));
    m.insert("grid".into(), prob.n_grid.to_string());
    m
}

fn bvp_options(solver: &SolverArgs) -> Result<BvpOptions, CliError> {
    let o = BvpOptions {
        max_iter: solver.max_iter,
        tol: solver.tol,
        ..BvpOptions::default()
    };
    o.validate()?;
    Ok(o)
}

/// Short tag for a failed solve.
pub fn status_of(e: &Error) -> &'static str {
    match e {
        Error::NoConvergence { .. } => "no_convergence",
        Error::SingularityTrap { .. } => "singularity_trap",
        Error::Singular { .. } => "singular",
        Error::Infeasible { .. } => "infeasible",
        _ => "error",
    }
}

fn report_fields(r: &CostReport, c: &PhysConsts) -> Vec<(&'static str, Value)> {
    vec![
        ("cost", Value::from(r.cost.name())),
        ("lambda", num(r.lambda)),
        ("mu", num(r.mu)),
        ("duration", num(r.duration)),
        ("f_energy", num(r.f_energy)),
        ("f_alpha", num(r.f_alpha)),
        ("g_penalty", num(r.g_penalty)),
        ("work", num(r.work)),
        ("j_total", num(r.j_total)),
        ("functional_weight", num(functional_weight(r.cost, c))),
        ("gradient_weight", num(0.5)),
    ]
}

fn with(mut v: Value, extra: Vec<(&'static str, Value)>) -> Value {
    if let Value::Object(m) = &mut v {
        for (k, x) in extra {
            m.insert(k.into(), x);
        }
    }
    v
}

fn fields_object(fields: Vec<(&'static str, Value)>) -> Value {
    with(object([]), fields)
}

/// Rows of `protocol_t.csv` from uniformly sampled `t`, `s`, `kbar`, `kappa`.
fn time_table(
    t: &[f64],
    s: &[f64],
    kbar: &[f64],
    kappa: &[f64],
    c: &PhysConsts,
) -> Result<CsvTable, CliError> {
    let mut tab = CsvTable::new(&["t", "s", "kbar", "kappa", "alpha", "energy"]);
    for k in 0..t.len() {
        let sdot = variance_rate(s[k], kbar[k], c);
        let a = alpha_of(s[k], sdot, c)?;
        tab.push_numbers(&[
            t[k],
            s[k],
            kbar[k],
            kappa[k],
            a,
            energy_of(s[k], sdot, kappa[k], c),
        ]);
    }
    Ok(tab)
}

fn variance_table(p: &SGridProtocol, kappa: &[f64], t: &[f64]) -> CsvTable {
    let mut tab = CsvTable::new(&["s", "kbar", "kappa", "t"]);
    for j in 0..p.len() {
        tab.push_numbers(&[p.s_nodes()[j], p.kbar()[j], kappa[j], t[j]]);
    }
    tab
}

#[allow(clippy::too_many_arguments)]
pub fn optimize(
    c: &PhysConsts,
    out: &Path,
    cost: CostKind,
    lambda: f64,
    mu: f64,
    si: f64,
    sf: f64,
    solver: &SolverArgs,
    n_time: usize,
) -> Result<String, CliError> {
    c.ensure_quantum()?;
    let prob = OptimizationProblem::new(cost, lambda, mu, si, sf, solver.grid)?;
    if n_time < 3 {
        return Err(CliError::Usage(format!(
            "--n-time must be at least 3, got {n_time}"
        )));
    }
    if mu == 0.0 {
        if cost != CostKind::Work {
            return Err(CliError::Usage(
                "mu = 0 is only supported for the work cost (closed form)".into(),
            ));
        }
        return optimize_work_closed_form(c, out, &prob, n_time);
    }
    let opts = bvp_options(solver)?;
    let mut dir = OutDir::create(out)?;
    let params = problem_params(c, &prob);
    let sol: BvpSolution = match solve_bvp(&prob, &opts, c) {
        Ok(s) => s,
        Err(e) => {
            let history = match &e {
                Error::NoConvergence { history, .. } => history.clone(),
                _ => Vec::new(),
            };
            let rep = fields_object(vec![
                ("status", Value::from(status_of(&e))),
                ("message", Value::from(e.to_string())),
                ("cost", Value::from(cost.name())),
                ("lambda", num(lambda)),
                ("mu", num(mu)),
                ("history", nums(&history)),
            ]);
            dir.write_json("report.json", &rep)?;
            dir.finish("optimize", params, 0)?;
            return Err(e.into());
        }
    };
    let p = &sol.protocol;
    let kappa = quantum_from_classical_s(p, c)?;
    let t_nodes = time_of_s(p, c)?;
    let td = to_time_domain(p, c, n_time)?;
    let r = j_total(p, &prob, c)?;

    dir.write_csv("protocol_s.csv", &variance_table(p, &kappa, &t_nodes))?;
    dir.write_csv(
        "protocol_t.csv",
        &time_table(
            td.classical.t_nodes(),
            &td.s,
            td.classical.values(),
            td.quantum.values(),
            c,
        )?,
    )?;
    let mut fields = vec![
        ("status", Value::from("converged")),
        ("solver", Value::from("bvp")),
    ];
    fields.extend(report_fields(&r, c));
    fields.extend([
        ("si", num(si)),
        ("sf", num(sf)),
        ("grid", Value::from(prob.n_grid)),
        ("iterations", Value::from(sol.iterations)),
        ("residual", num(sol.residual)),
        ("history", nums(&sol.history)),
    ]);
    dir.write_json("report.json", &fields_object(fields))?;
    dir.finish("optimize", params, 0)?;
    Ok(format!(
        "optimize: {} converged in {} iterations, duration {}",
        cost,
        sol.iterations,
        fmt_e(r.duration)
    ))
}

fn optimize_work_closed_form(
    c: &PhysConsts,
    out: &Path,
    prob: &OptimizationProblem,
    n_time: usize,
) -> Result<String, CliError> {
    let wo = analytic_work_optimal(prob.lambda, prob.s_i, prob.s_f, c)?;
    let p = wo.protocol(prob.n_grid)?;
    let s = p.s_nodes();
    let kappa: Vec<f64> = s.iter().map(|&v| wo.kappa_of_s(v)).collect();
    let scale = (c.gamma * prob.lambda).sqrt();
    let t_nodes: Vec<f64> = s
        .iter()
        .map(|&v| scale * (v.sqrt() - prob.s_i.sqrt()).abs())
        .collect();
    let dur = wo.duration();
    let times: Vec<f64> = (0..n_time)
        .map(|k| {
            if k == n_time - 1 {
                dur
            } else {
                dur * k as f64 / (n_time - 1) as f64
            }
        })
        .collect();
    let st: Vec<f64> = times.iter().map(|&t| wo.s_of_t(t)).collect();
    let kb: Vec<f64> = st.iter().map(|&v| wo.kbar_of_s(v)).collect();
    let kq: Vec<f64> = st.iter().map(|&v| wo.kappa_of_s(v)).collect();
    let mut r = j_total(&p, prob, c)?;
    r.duration = dur;

    let mut dir = OutDir::create(out)?;
    dir.write_csv("protocol_s.csv", &variance_table(&p, &kappa, &t_nodes))?;
    dir.write_csv("protocol_t.csv", &time_table(&times, &st, &kb, &kq, c)?)?;
    let mut fields = vec![
        ("status", Value::from("closed_form")),
        ("solver", Value::from("analytic")),
    ];
    fields.extend(report_fields(&r, c));
    fields.extend([
        ("si", num(prob.s_i)),
        ("sf", num(prob.s_f)),
        ("grid", Value::from(prob.n_grid)),
    ]);
    dir.write_json("report.json", &fields_object(fields))?;
    dir.finish("optimize", problem_params(c, prob), 0)?;
    Ok(format!(
        "optimize: work closed form, duration {}",
        fmt_e(dur)
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub method: Method,
    pub particles: usize,
    pub dt: Option<f64>,
    pub seed: u64,
    pub checkpoints: usize,
    pub tolerance: f64,
}

fn equilibrium_s(kappa: f64, c: &PhysConsts) -> Result<f64, CliError> {
    if !(kappa > 0.0) {
        return Err(CliError::Usage(format!(
            "end stiffness {kappa} is not positive; add an `s` column"
        )));
    }
    Ok(c.d * (c.m / kappa).sqrt())
}

pub fn verify(
    c: &PhysConsts,
    out: &Path,
    path: &Path,
    opts: &VerifyOptions,
) -> Result<String, CliError> {
    c.ensure_quantum()?;
    let f = protocol_file::read(path)?;
    let n = f.t.len();
    let (s_start, s_target) = match &f.s {
        Some(s) => (s[0], s[n - 1]),
        None => (
            equilibrium_s(f.kappa[0], c)?,
            equilibrium_s(f.kappa[n - 1], c)?,
        ),
    };
    let kappa_t = TimeProtocol::new(f.t.clone(), f.kappa.clone(), ProtocolKind::Quantum)?;
    let rec = integrate_ermakov(&kappa_t, s_start, c, dynamics::default_dt(&kappa_t))?;

    let mut params = base_params(c);
    params.insert("protocol".into(), path.display().to_string());
    params.insert("method".into(), format!("{:?}", opts.method).to_lowercase());
    let mut fields = vec![("protocol", Value::from(path.display().to_string()))];
    let mut pass = true;
    let mut notes = Vec::new();

    if matches!(opts.method, Method::Ermakov | Method::Both) {
        let es = (rec.final_s() - s_target).abs();
        let ed = rec.final_sdot().abs();
        let ok = es <= opts.tolerance && ed <= opts.tolerance;
        pass &= ok;
        notes.push(format!(
            "ermakov |s-s_f| {} |sdot| {}",
            fmt_e(es),
            fmt_e(ed)
        ));
        params.insert("tolerance".into(), fmt_e(opts.tolerance));
        fields.push((
            "ermakov",
            fields_object(vec![
                ("s_final", num(rec.final_s())),
                ("s_target", num(s_target)),
                ("s_error", num(es)),
                ("sdot_error", num(ed)),
                ("tolerance", num(opts.tolerance)),
                ("pass", Value::from(ok)),
            ]),
        ));
    }

    if matches!(opts.method, Method::Nelson | Method::Both) {
        if opts.checkpoints == 0 {
            return Err(CliError::Usage("--checkpoints must be positive".into()));
        }
        let (t0, t1) = (kappa_t.t_start(), kappa_t.t_end());
        let kbar_max = match &f.kbar {
            Some(k) => k.iter().fold(0.0_f64, |a, v| a.max(v.abs())),
            None => c.gamma * (kappa_t.max_abs() / c.m).sqrt(),
        };
        let dt = opts
            .dt
            .unwrap_or_else(|| mc::default_dt(kbar_max, c.gamma, t1 - t0));
        let cfg = McConfig::new(
            opts.particles,
            dt,
            opts.seed,
            even_checkpoints(t0, t1, opts.checkpoints),
        )?;
        let q = simulate_nelson(&rec, &cfg, c)?;
        let ref_s: Vec<f64> = q.times.iter().map(|&t| rec.s_at(t)).collect();
        let born = verify_born(&q, &ref_s)?;
        let mut ok = born.pass;
        let mut nelson = vec![
            ("n_particles", Value::from(opts.particles)),
            ("dt", num(dt)),
            ("seed", Value::from(opts.seed)),
            ("times", nums(&q.times)),
            ("variance", nums(&q.variance)),
            ("reference_variance", nums(&ref_s)),
            ("z_variance", nums(&born.z_variance)),
            ("z_kurtosis", nums(&born.z_kurtosis)),
            ("worst_z", num(born.worst_z)),
            ("z_limit", num(Z_LIMIT)),
        ];
        if let Some(kb) = &f.kbar {
            let kbar_t = TimeProtocol::new(f.t.clone(), kb.clone(), ProtocolKind::Classical)?;
            let twin_cfg = McConfig {
                seed: opts.seed.wrapping_add(1),
                ..cfg.clone()
            };
            let cl = simulate_classical(&kbar_t, s_start, &twin_cfg, c)?;
            let tz = twin_z(&q, &cl)?;
            let worst = tz.iter().fold(0.0_f64, |a, z| a.max(z.abs()));
            ok &= worst <= Z_LIMIT;
            nelson.push(("twin_z", nums(&tz)));
            nelson.push(("twin_worst_z", num(worst)));
        }
        nelson.push(("pass", Value::from(ok)));
        pass &= ok;
        notes.push(format!("nelson worst z {}", fmt_e(born.worst_z)));
        params.insert("particles".into(), opts.particles.to_string());
        params.insert("dt".into(), fmt_e(dt));
        params.insert("checkpoints".into(), opts.checkpoints.to_string());
        fields.push(("nelson", fields_object(nelson)));
    }

    fields.push(("pass", Value::from(pass)));
    let mut dir = OutDir::create(out)?;
    dir.write_json("verify.json", &fields_object(fields))?;
    dir.finish("verify", params, opts.seed)?;
    let summary = format!("verify: {}", notes.join("; "));
    if pass {
        Ok(format!("{summary}; pass"))
    } else {
        Err(CliError::Verification(summary))
    }
}

fn solve_one(
    c: &PhysConsts,
    cost: CostKind,
    lambda: f64,
    mu: f64,
    si: f64,
    sf: f64,
    solver: &SolverArgs,
) -> nelson_sta::Result<SGridProtocol> {
    let prob = OptimizationProblem::new(cost, lambda, mu, si, sf, solver.grid)?;
    let opts = BvpOptions {
        max_iter: solver.max_iter,
        tol: solver.tol,
        ..BvpOptions::default()
    };
    Ok(solve_bvp(&prob, &opts, c)?.protocol)
}

/// One row pair of the trade-off table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffPoint {
    pub mu: f64,
    pub duration: f64,
    pub optimal: f64,
    pub chen: f64,
}

/// Optimal functional and the functional of the quintic shortcut with the same duration.
pub fn tradeoff_point(
    c: &PhysConsts,
    cost: CostKind,
    lambda: f64,
    mu: f64,
    si: f64,
    sf: f64,
    solver: &SolverArgs,
) -> nelson_sta::Result<TradeoffPoint> {
    let p = solve_one(c, cost, lambda, mu, si, sf, solver)?;
    let duration = nelson_sta::analog::duration(&p, c)?;
    let chen = ChenShape::new(
        equilibrium_kappa(si, c)?,
        equilibrium_kappa(sf, c)?,
        duration,
        c,
    )?;
    let (optimal, chen) = match cost {
        CostKind::Energy => (f_energy(&p, c)?, chen.energy_integral()),
        CostKind::Phase => (f_alpha(&p, c)?, chen.alpha_squared_integral()),
        CostKind::Work => {
            return Err(Error::InvalidOption(
                "compare supports the energy and phase costs".into(),
            ))
        }
    };
    Ok(TradeoffPoint {
        mu,
        duration,
        optimal,
        chen,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn compare(
    c: &PhysConsts,
    out: &Path,
    cost: CostKind,
    lambda: f64,
    mus: &[f64],
    si: f64,
    sf: f64,
    solver: &SolverArgs,
) -> Result<String, CliError> {
    c.ensure_quantum()?;
    if cost == CostKind::Work {
        return Err(CliError::Usage(
            "compare supports --cost energy or phase".into(),
        ));
    }
    if mus.is_empty() {
        return Err(CliError::Usage("--mu-list is empty".into()));
    }
    bvp_options(solver)?;
    let points = mus
        .par_iter()
        .map(|&mu| tradeoff_point(c, cost, lambda, mu, si, sf, solver))
        .collect::<nelson_sta::Result<Vec<_>>>()?;
    let mut tab = CsvTable::new(&["protocol_kind", "mu", "duration", "F_value"]);
    for pt in &points {
        tab.push(vec![
            "optimal".into(),
            fmt_e(pt.mu),
            fmt_e(pt.duration),
            fmt_e(pt.optimal),
        ]);
        tab.push(vec![
            "chen".into(),
            fmt_e(pt.mu),
            fmt_e(pt.duration),
            fmt_e(pt.chen),
        ]);
    }
    let mut dir = OutDir::create(out)?;
    dir.write_csv("tradeoff.csv", &tab)?;
    let mut params = base_params(c);
    params.insert("cost".into(), cost.name().into());
    params.insert("lambda".into(), fmt_e(lambda));
    params.insert(
        "mu_list".into(),
        mus.iter().map(|&m| fmt_e(m)).collect::<Vec<_>>().join(","),
    );
    params.insert("si".into(), fmt_e(si));
    params.insert("sf".into(), fmt_e(sf));
    params.insert("grid".into(), solver.grid.to_string());
    params.insert(
        "chen_duration".into(),
        "t_f set equal to the optimal protocol duration at each mu".into(),
    );
    dir.finish("compare", params, 0)?;
    let wins = points.iter().filter(|p| p.optimal < p.chen).count();
    Ok(format!(
        "compare: optimal below chen at {wins} of {} durations",
        points.len()
    ))
}

/// `lo:hi:steps` with `0 < lo <= hi` and `steps >= 1`, log-spaced.
pub fn parse_mu_range(range: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("--mu-range expects lo:hi:steps, got `{range}`"));
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if steps == 0 || !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
        return Err(CliError::Usage(format!("empty mu range `{range}`")));
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    let r = (hi / lo).ln();
    Ok((0..steps)
        .map(|k| {
            if k == steps - 1 {
                hi
            } else {
                lo * (r * k as f64 / (steps - 1) as f64).exp()
            }
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
pub fn sweep(
    c: &PhysConsts,
    out: &Path,
    cost: CostKind,
    lambda: f64,
    mus: &[f64],
    si: f64,
    sf: f64,
    solver: &SolverArgs,
) -> Result<String, CliError> {
    c.ensure_quantum()?;
    bvp_options(solver)?;
    OptimizationProblem::new(cost, lambda, mus[0], si, sf, solver.grid)?;
    let rows: Vec<std::result::Result<CostReport, Error>> = mus
        .par_iter()
        .map(|&mu| {
            let p = solve_one(c, cost, lambda, mu, si, sf, solver)?;
            let prob = OptimizationProblem::new(cost, lambda, mu, si, sf, solver.grid)?;
            j_total(&p, &prob, c)
        })
        .collect();
    let mut tab = CsvTable::new(&["mu", "duration", "F", "G", "J", "status"]);
    let mut failed = 0;
    for (mu, row) in mus.iter().zip(&rows) {
        match row {
            Ok(r) => tab.push(vec![
                fmt_e(*mu),
                fmt_e(r.duration),
                fmt_e(r.selected()),
                fmt_e(r.g_penalty),
                fmt_e(r.j_total),
                "ok".into(),
            ]),
            Err(e) => {
                failed += 1;
                let nan = fmt_e(f64::NAN);
                tab.push(vec![
                    fmt_e(*mu),
                    nan.clone(),
                    nan.clone(),
                    nan.clone(),
                    nan,
                    status_of(e).into(),
                ]);
            }
        }
    }
    let mut dir = OutDir::create(out)?;
    dir.write_csv("sweep.csv", &tab)?;
    let mut params = base_params(c);
    params.insert("cost".into(), cost.name().into());
    params.insert("lambda".into(), fmt_e(lambda));
    params.insert(
        "mu_range".into(),
        format!(
            "{}:{}:{}",
            fmt_e(mus[0]),
            fmt_e(mus[mus.len() - 1]),
            mus.len()
        ),
    );
    params.insert("si".into(), fmt_e(si));
    params.insert("sf".into(), fmt_e(sf));
    params.insert("grid".into(), solver.grid.to_string());
    dir.finish("sweep", params, 0)?;
    if failed == mus.len() {
        return Err(CliError::Convergence(format!(
            "all {failed} sweep points failed"
        )));
    }
    Ok(format!("sweep: {} points, {failed} failed", mus.len()))
}
