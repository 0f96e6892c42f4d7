//! Subcommand pipelines. Each writes its outputs into the output directory
//! and maps failures onto the exit-code contract.

use std::fmt::Write as _;
use std::path::Path;

use halflap::energy::{dirichlet_energy, energy_scan, fit_two_term, scaling_fit, scan_csv, Offset};
use halflap::error::Error;
use halflap::extension::{mollifier_extend, poisson_extend, MollifierKernel};
use halflap::functional::EnergyFunctional;
use halflap::grid::{
    write_field_dump, BaseShape, CylinderDomain, ScalarField, UniformGrid, WedgeDomain,
};
use halflap::hhalf::{log_bound_experiment, TraceDomain};
use halflap::layer::{sine_layer, sine_layer_trace, tilted_sine_layer};
use halflap::solver::{
    minimize_cylinder, saddle_minimize, InitPolicy, Solution, SolveConfig, SolveError,
};
use halflap::symmetry::{liouville_check, one_d_direction, stability_witness};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Config;

#[derive(Debug)]
pub enum Failure {
    Io(String),
    Validation(String),
    Solver(String),
    Property(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Io(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Property(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Failure::Io(_) => "io",
            Failure::Validation(_) => "validation",
            Failure::Solver(_) => "solver",
            Failure::Property(_) => "property",
        }
    }

    pub fn reason(&self) -> &str {
        match self {
            Failure::Io(s) | Failure::Validation(s) | Failure::Solver(s) | Failure::Property(s) => {
                s
            }
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => Failure::Io(e.to_string()),
            Error::LinearSolve { .. } => Failure::Solver(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

pub type Outcome = Result<(), Failure>;

pub struct Context<'a> {
    pub cfg: &'a Config,
    pub out: &'a Path,
    pub seed: u64,
}

impl Context<'_> {
    fn write(&self, name: &str, contents: &str) -> Outcome {
        std::fs::write(self.out.join(name), contents)
            .map_err(|e| Failure::Io(format!("{name}: {e}")))
    }

    fn dump(&self, stem: &str, field: &ScalarField) -> Outcome {
        write_field_dump(
            field,
            &self.out.join(format!("{stem}.field")),
            &self.out.join(format!("{stem}.mask")),
        )?;
        Ok(())
    }

    fn shape(&self) -> BaseShape {
        match self.cfg.problem.base_shape.as_str() {
            "ball" => BaseShape::Ball,
            _ => BaseShape::Box,
        }
    }

    fn cylinder(&self, radius: f64, height: f64) -> Result<CylinderDomain, Failure> {
        Ok(CylinderDomain::with_height(
            self.cfg.problem.n,
            radius,
            height,
            self.cfg.problem.h,
            self.shape(),
        )?)
    }

    fn solve_config(&self) -> SolveConfig {
        let s = &self.cfg.solver;
        SolveConfig {
            max_iterations: s.max_iterations,
            el_tol: s.el_tol,
            energy_tol: s.energy_tol,
            cascade_levels: s.cascade_levels,
            init: match s.init.as_str() {
                "constant" => InitPolicy::Constant(s.init_value),
                _ => InitPolicy::Layer {
                    direction: self.cfg.direction(),
                },
            },
            ..SolveConfig::default()
        }
    }
}

fn base_header(n: usize) -> String {
    (1..=n)
        .map(|i| format!("x{i}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn trace_csv(domain: &CylinderDomain, v: &ScalarField) -> String {
    let g = domain.grid();
    let n = domain.n;
    let mut s = format!("{},u\n", base_header(n));
    for p in 0..g.len() {
        if domain.bottom()[p] && v.mask()[p] {
            let x = g.point(p);
            for c in &x[..n] {
                let _ = write!(s, "{c},");
            }
            let _ = writeln!(s, "{}", v.get(p));
        }
    }
    s
}

fn solution_log_csv(sol: &Solution) -> String {
    let mut s = String::from("iteration,energy,residual,step\n");
    for r in &sol.log {
        let _ = writeln!(s, "{},{},{},{}", r.iteration, r.energy, r.residual, r.step);
    }
    s
}

pub fn layer(ctx: &Context) -> Outcome {
    let cfg = ctx.cfg;
    if cfg.problem.nonlinearity != "sine" {
        return Err(Failure::Validation(
            "layer: the explicit layer solves the sine nonlinearity only".into(),
        ));
    }
    let h = cfg.problem.h;
    let domain = ctx.cylinder(cfg.problem.radius, cfg.height())?;
    let dir = cfg.direction();
    let v = domain.sample(|p| tilted_sine_layer(p, &dir, 0.0));
    let func = EnergyFunctional::new(
        domain.grid(),
        domain.inside(),
        None,
        cfg.nonlinearity().map_err(Failure::Validation)?,
        0.0,
    )?;
    let free = domain.free();
    let res = func.residuals(&func.gradient(v.values(), &free), &free);
    let parts = func.parts(v.values());
    let tol = 5.0 * h;
    let ok = res.interior <= tol && res.neumann <= tol;
    let report = format!(
        "h={h}\ninterior_residual={}\nneumann_residual={}\ntolerance={tol}\ndirichlet={}\npotential={}\nenergy={}\npass={ok}\n",
        res.interior,
        res.neumann,
        parts.dirichlet,
        parts.potential,
        parts.total()
    );
    ctx.write("layer.report", &report)?;
    ctx.write("layer_trace.csv", &trace_csv(&domain, &v))?;
    ctx.dump("layer", &v)?;
    if ok {
        Ok(())
    } else {
        Err(Failure::Property(format!(
            "layer residuals {} / {} exceed {tol}",
            res.interior, res.neumann
        )))
    }
}

pub fn minimize(ctx: &Context) -> Outcome {
    let cfg = ctx.cfg;
    let nl = cfg.nonlinearity().map_err(Failure::Validation)?;
    let domain = ctx.cylinder(cfg.problem.radius, cfg.height())?;
    let dir = cfg.direction();
    let plus = domain.sample(|p| tilted_sine_layer(p, &dir, 0.0));
    match minimize_cylinder(&domain, &nl, &plus, &ctx.solve_config()) {
        Ok(sol) => {
            sol.save(ctx.out, "minimize")?;
            ctx.write("minimize_log.csv", &solution_log_csv(&sol))?;
            ctx.write("minimize_trace.csv", &trace_csv(&domain, &sol.field))?;
            Ok(())
        }
        Err(SolveError::Invalid(e)) => Err(Failure::Validation(e.to_string())),
        Err(err) => {
            if let Some(last) = err.last() {
                last.save(ctx.out, "minimize")?;
                ctx.write("minimize_log.csv", &solution_log_csv(last))?;
            }
            Err(Failure::Solver(err.to_string()))
        }
    }
}

pub fn saddle(ctx: &Context) -> Outcome {
    let sc = &ctx.cfg.saddle;
    let nl = halflap::nonlinearity::builtin(&sc.nonlinearity)
        .map_err(|e| Failure::Validation(e.to_string()))?;
    let wedge = WedgeDomain::new(sc.m, sc.radius, sc.height, sc.h)?;
    let mut solve_cfg = ctx.solve_config();
    if let InitPolicy::Layer { .. } = solve_cfg.init {
        solve_cfg.init = InitPolicy::Layer { direction: vec![] };
    }
    let sol = match saddle_minimize(&wedge, &nl, &solve_cfg) {
        Ok(s) => s,
        Err(SolveError::Invalid(e)) => return Err(Failure::Validation(e.to_string())),
        Err(err) => {
            if let Some(last) = err.last() {
                last.save(ctx.out, "saddle")?;
            }
            return Err(Failure::Solver(err.to_string()));
        }
    };
    sol.wedge.save(ctx.out, "saddle")?;
    ctx.dump("saddle_reflected", &sol.reflected)?;

    let g = wedge.grid();
    let v = sol.wedge.field.values();
    let (mut positive, mut bounded) = (true, true);
    for p in (0..g.len()).filter(|&p| wedge.inside()[p]) {
        bounded &= v[p].abs() < 1.0;
        if wedge.bottom()[p] && !wedge.pinned()[p] {
            positive &= v[p] > 0.0;
        }
    }
    let rg = sol.reflected.grid();
    let (cs, cl) = (rg.count(0), rg.count(2));
    let mut odd = true;
    for i in 0..cs {
        for j in 0..cs {
            for k in 0..cl {
                let (a, b) = (rg.flat(&[i, j, k]), rg.flat(&[j, i, k]));
                if sol.reflected.mask()[a] {
                    odd &= sol.reflected.get(a) == -sol.reflected.get(b);
                }
            }
        }
    }

    let mut csv = String::from("R,dirichlet,potential,total\n");
    let mut totals = Vec::new();
    for &r in &sc.radii {
        let e = sol.energy_in(&wedge, &nl, r)?;
        let _ = writeln!(csv, "{r},{},{},{}", e.dirichlet, e.potential, e.total());
        totals.push(e.total());
    }
    ctx.write("saddle_energy.csv", &csv)?;

    let p = (2 * sc.m - 1) as i32;
    let phi1: Vec<f64> = sc.radii.iter().map(|r| r.powi(p) * r.ln()).collect();
    let phi2: Vec<f64> = sc.radii.iter().map(|r| r.powi(p)).collect();
    let mut report = sol.wedge.report();
    let _ = writeln!(
        report,
        "positive_on_wedge={positive}\nbounded={bounded}\nodd={odd}"
    );
    match fit_two_term(&phi1, &phi2, &totals) {
        Ok(fit) => {
            let _ = writeln!(
                report,
                "fit_a={}\nfit_b={}\nfit_r_squared={}",
                fit.a, fit.b, fit.r_squared
            );
        }
        Err(e) => {
            let _ = writeln!(report, "fit=unavailable ({e})");
        }
    }
    ctx.write("saddle.report", &report)?;
    if positive && bounded && odd {
        Ok(())
    } else {
        Err(Failure::Property(format!(
            "saddle checks failed: positive={positive} bounded={bounded} odd={odd}"
        )))
    }
}

pub fn energy_scan_cmd(ctx: &Context) -> Outcome {
    let cfg = ctx.cfg;
    let radii = &cfg.problem.radii;
    let r_max = *radii
        .last()
        .ok_or_else(|| Failure::Validation("energy-scan needs at least one radius".into()))?;
    let nl = cfg.nonlinearity().map_err(Failure::Validation)?;
    let domain = ctx.cylinder(r_max, r_max)?;
    let dir = cfg.direction();
    let v = domain.sample(|p| tilted_sine_layer(p, &dir, 0.0));
    let scan = energy_scan(&domain, &v, &nl, radii, Offset::Auto)?;
    ctx.write("energy_scan.csv", &scan_csv(&scan))?;
    let report = match scaling_fit(&scan) {
        Ok(fit) => fit.report(),
        Err(e) => format!("fit=unavailable ({e})\n"),
    };
    ctx.write("energy_fit.report", &report)?;
    if scan.windows(2).all(|w| w[1].total >= w[0].total) {
        Ok(())
    } else {
        Err(Failure::Property(
            "energy totals decrease across nested cylinders".into(),
        ))
    }
}

pub fn hhalf(ctx: &Context) -> Outcome {
    let hc = &ctx.cfg.hhalf;
    let domain = match hc.geometry.as_str() {
        "cube" => TraceDomain::cube(hc.n, hc.h)?,
        _ => TraceDomain::cylinder_boundary(hc.n, hc.radius, hc.height, hc.h)?,
    };
    let rep = log_bound_experiment(&domain, &hc.eps)?;
    ctx.write("hhalf.csv", &rep.csv())?;
    ctx.write(
        "hhalf.report",
        &format!("geometry={}\nh={}\n{}", domain.name, hc.h, rep.report()),
    )?;
    if rep.slope > 0.0 {
        Ok(())
    } else {
        Err(Failure::Property(format!(
            "log-bound slope {} is not positive",
            rep.slope
        )))
    }
}

pub fn symmetry(ctx: &Context) -> Outcome {
    let cfg = ctx.cfg;
    let sc = &cfg.symmetry;
    let domain = ctx.cylinder(cfg.problem.radius, cfg.height())?;
    let dir = cfg.direction();
    let v = match sc.profile.as_str() {
        "bump" => domain.sample(|p| {
            let n = p.len() - 1;
            let r2: f64 = p[..n].iter().map(|x| x * x).sum();
            (-r2 / 2.0 - p[n]).exp()
        }),
        _ => domain.sample(|p| tilted_sine_layer(p, &dir, 0.0)),
    };
    let (phi, witness) = match stability_witness(&domain, &v, sc.axis) {
        Ok(phi) => (phi, "derivative"),
        Err(Error::NotMonotone { .. }) => {
            let ones = ScalarField::constant(domain.grid().clone(), 1.0)
                .with_mask(domain.inside().to_vec())?;
            (ones, "constant")
        }
        Err(e) => return Err(e.into()),
    };
    let rep = liouville_check(&domain, &v, &phi)?;
    let mut report = format!(
        "profile={}\nwitness={witness}\n{}",
        sc.profile,
        rep.report()
    );
    match domain.trace(&v).and_then(|t| one_d_direction(&t)) {
        Ok((a, dev)) => {
            let joined = a
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",");
            let _ = writeln!(report, "trace_direction={joined}\ntrace_deviation={dev}");
        }
        Err(e) => {
            let _ = writeln!(report, "trace_direction=undefined ({e})");
        }
    }
    ctx.write("symmetry.report", &report)?;
    if rep.one_d {
        Ok(())
    } else {
        Err(Failure::Property(
            "solution is not one-dimensional on the core".into(),
        ))
    }
}

struct Modes(Vec<(f64, Vec<f64>, f64)>);

impl Modes {
    fn random(seed: u64, count: usize, n: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Modes(
            (0..count)
                .map(|_| {
                    let a = rng.gen_range(-1.0..1.0);
                    let w = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
                    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                    (a, w, phase)
                })
                .collect(),
        )
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .map(|(a, w, phase)| {
                a * (w.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + phase).cos()
            })
            .sum()
    }
}

pub fn extend(ctx: &Context) -> Outcome {
    let cfg = ctx.cfg;
    let ec = &cfg.extend;
    let n = cfg.problem.n;
    if n > 2 {
        return Err(Failure::Validation("extend supports n = 1 or 2".into()));
    }
    let r = cfg.problem.radius;
    let extents = vec![(-r, r); n];
    let domain = CylinderDomain::from_extents(&extents, cfg.height(), cfg.problem.h)?;
    let g = domain.grid();
    let base = UniformGrid::new((0..n).map(|a| *g.axis(a)).collect())?;
    let dir = cfg.direction();
    let modes = Modes::random(ctx.seed, ec.modes, n);
    let data = ScalarField::from_fn(base, |x| match ec.data.as_str() {
        "random" => modes.eval(x),
        _ => sine_layer_trace(x.iter().zip(&dir).map(|(p, q)| p * q).sum()),
    });
    let levels = *g.axis(n);
    let mut report = format!(
        "method={}\ndata={}\nseed={}\n",
        ec.method, ec.data, ctx.seed
    );
    let raw = match ec.method.as_str() {
        "mollifier" => {
            let m = mollifier_extend(&data, &MollifierKernel::new(n)?, levels)?;
            let _ = writeln!(report, "l2_contraction={}", m.l2_ok);
            m.field
        }
        _ => poisson_extend(&data, levels)?,
    };
    let field = ScalarField::new(g.clone(), raw.values().to_vec(), domain.inside().to_vec())?;
    let _ = writeln!(report, "dirichlet={}", dirichlet_energy(&domain, &field)?);
    if ec.data == "layer" {
        let err = (0..g.len())
            .map(|p| {
                let x = g.point(p);
                let s: f64 = x[..n].iter().zip(&dir).map(|(a, b)| a * b).sum();
                (field.get(p) - sine_layer(s, x[n])).abs()
            })
            .fold(0.0, f64::max);
        let _ = writeln!(report, "max_deviation_from_layer={err}");
    }
    let mut csv = String::from("lambda,min,max\n");
    let kl = levels.count;
    for k in 0..kl {
        let (lo, hi) = (0..g.len())
            .filter(|p| p % kl == k)
            .map(|p| field.get(p))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
                (a.min(x), b.max(x))
            });
        let _ = writeln!(csv, "{},{lo},{hi}", levels.coord(k));
    }
    ctx.write("extend.report", &report)?;
    ctx.write("extend_levels.csv", &csv)?;
    ctx.dump("extend", &field)
}
