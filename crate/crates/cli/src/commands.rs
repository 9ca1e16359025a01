//! Command implementations. Each returns what the manifest needs; all files
//! go through [`Outputs`] so they are checksummed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lagrograph::analysis::{c11_norm, holder_seminorm, regularity_pipeline, HolderSampling, RegularityReport};
use lagrograph::fields::{hessian, read_field, write_field, AnyField, Grid2D, ScalarField};
use lagrograph::geometry::{lagrangian_phase, rotation_budget, RotationBudget};
use lagrograph::mat2::SymMat2;
use lagrograph::registry::{sample, GeneratorParams, Registry, SuiteContext};
use lagrograph::rotation::rotate_graph;
use lagrograph::solvers::{hs_residual, solve_hamiltonian_stationary, solve_special_lagrangian, SolveReport, SolverConfig};
use serde::Serialize;

use crate::args::{AnalyzeArgs, BudgetArgs, Common, GenerateArgs, PhaseInput, RotateArgs, SolveArgs, VerifyArgs};
use crate::manifest::Outputs;
use crate::Failure;

/// What a finished command reports back to the manifest writer.
pub struct Outcome {
    pub exit_code: i32,
    pub grid: Option<Grid2D>,
    pub inputs: Vec<PathBuf>,
}

impl Outcome {
    fn success(grid: Option<Grid2D>, inputs: Vec<PathBuf>) -> Self {
        Outcome {
            exit_code: 0,
            grid,
            inputs,
        }
    }
}

fn read_scalar(path: &Path) -> Result<ScalarField, Failure> {
    Ok(read_field(path)?.into_scalar()?)
}

fn write_scalar(out: &mut Outputs, name: &str, f: &ScalarField) -> Result<(), Failure> {
    write_field(out.path(name), &AnyField::Scalar(f.clone()))?;
    out.note(name);
    Ok(())
}

fn parse_list(text: &str, len: usize, what: &str) -> Result<Vec<f64>, Failure> {
    let values: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::validation(format!("{what} must be {len} comma-separated numbers, got {text:?}")))?;
    if values.len() != len || values.iter().any(|v| !v.is_finite()) {
        return Err(Failure::validation(format!(
            "{what} must be {len} finite comma-separated numbers, got {text:?}"
        )));
    }
    Ok(values)
}

fn parse_coefficient(text: &str) -> Result<((u32, u32), f64), Failure> {
    let bad = || Failure::validation(format!("coefficient must look like a,b=c, got {text:?}"));
    let (powers, value) = text.split_once('=').ok_or_else(bad)?;
    let (a, b) = powers.split_once(',').ok_or_else(bad)?;
    let a = a.trim().parse().map_err(|_| bad())?;
    let b = b.trim().parse().map_err(|_| bad())?;
    let c = value.trim().parse().map_err(|_| bad())?;
    Ok(((a, b), c))
}

pub fn solver_config(common: &Common) -> Result<SolverConfig, Failure> {
    let cfg = SolverConfig {
        newton_tol: common.tol,
        max_newton: common.max_iter,
        ..SolverConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn sampling(common: &Common) -> HolderSampling {
    HolderSampling {
        seed: common.seed,
        ..HolderSampling::default()
    }
}

#[derive(Serialize)]
struct GenerationRecord<'a> {
    kind: &'a str,
    params: &'a GeneratorParams,
    lambda_bound: Option<f64>,
    lambda_measured: f64,
}

pub fn generate(common: &Common, args: &GenerateArgs, out: &mut Outputs) -> Result<Outcome, Failure> {
    let grid = Grid2D::new(common.grid_n, common.half_width, common.mask_radius)?;
    let mut params = GeneratorParams::default();
    if let Some(m) = &args.m {
        let v = parse_list(m, 3, "--m")?;
        params.m = Some(SymMat2::new(v[0], v[1], v[2]));
    }
    if let Some(eps) = args.eps {
        params.eps = eps;
    }
    params.coefficients = args
        .coefficients
        .iter()
        .map(|c| parse_coefficient(c))
        .collect::<Result<BTreeMap<_, _>, _>>()?;
    let registry = Registry::default();
    let generator = registry
        .generator(args.kind.registry_name())
        .expect("every CLI kind is registered");
    let potential = generator.build(&params)?;
    let sampled = sample(potential.as_ref(), grid, common.lambda)?;
    let theta = lagrangian_phase(&sampled.d2u);
    write_scalar(out, "u.field", &sampled.u)?;
    write_field(out.path("du.field"), &AnyField::Vector(sampled.du.clone()))?;
    out.note("du.field");
    write_field(out.path("d2u.field"), &AnyField::SymMat(sampled.d2u.clone()))?;
    out.note("d2u.field");
    write_scalar(out, "theta.field", &theta)?;
    out.write_json(
        "generation.json",
        &GenerationRecord {
            kind: generator.name(),
            params: &params,
            lambda_bound: common.lambda,
            lambda_measured: sampled.lambda,
        },
    )?;
    println!("generated {} on {}^2 nodes, Lambda = {}", generator.name(), grid.n(), sampled.lambda);
    Ok(Outcome::success(Some(grid), Vec::new()))
}

fn phase_input(phase: &PhaseInput, grid: &Grid2D, inputs: &mut Vec<PathBuf>) -> Result<ScalarField, Failure> {
    match (&phase.theta, &phase.theta_affine) {
        (Some(path), _) => {
            inputs.push(path.clone());
            read_scalar(path)
        }
        (None, Some(text)) => {
            let c = parse_list(text, 3, "--theta-affine")?;
            Ok(ScalarField::from_fn(*grid, |x| c[0] + c[1] * x[0] + c[2] * x[1]))
        }
        (None, None) => Err(Failure::validation("a phase input is required")),
    }
}

fn print_report(label: &str, r: &SolveReport) {
    println!(
        "{label}: converged = {}, iterations = {}, final residual = {:e}",
        r.converged, r.iterations, r.final_residual
    );
}

pub fn solve_sl(common: &Common, args: &SolveArgs, out: &mut Outputs) -> Result<Outcome, Failure> {
    let cfg = solver_config(common)?;
    let boundary = read_scalar(&args.boundary)?;
    let mut inputs = Vec::new();
    let theta = phase_input(&args.phase, boundary.grid(), &mut inputs)?;
    inputs.push(args.boundary.clone());
    let (u, report) = solve_special_lagrangian(&theta, &boundary, &cfg)?;
    write_scalar(out, "u.field", &u)?;
    out.write_json("report.json", &report)?;
    print_report("special Lagrangian", &report);
    Ok(Outcome {
        exit_code: if report.converged { 0 } else { 1 },
        grid: Some(*boundary.grid()),
        inputs,
    })
}

pub fn solve_hs(common: &Common, args: &SolveArgs, out: &mut Outputs) -> Result<Outcome, Failure> {
    let cfg = solver_config(common)?;
    let boundary = read_scalar(&args.boundary)?;
    let mut inputs = Vec::new();
    let theta_boundary = phase_input(&args.phase, boundary.grid(), &mut inputs)?;
    inputs.push(args.boundary.clone());
    let (u, theta, report) = solve_hamiltonian_stationary(&boundary, &theta_boundary, &cfg)?;
    write_scalar(out, "u.field", &u)?;
    write_scalar(out, "theta.field", &theta)?;
    write_scalar(out, "hs_residual.field", &hs_residual(&u)?)?;
    out.write_json("report.json", &report)?;
    print_report("Hamiltonian stationary", &report);
    Ok(Outcome {
        exit_code: if report.converged { 0 } else { 1 },
        grid: Some(*boundary.grid()),
        inputs,
    })
}

fn budget_table(b: &RotationBudget) -> String {
    let mut t = String::new();
    for (name, v) in [
        ("lambda", b.lambda),
        ("A = arctan(lambda)", b.a),
        ("delta", b.delta),
        ("cos(delta)", b.c),
        ("sin(delta)", b.s),
        ("L1", b.l1),
        ("L2", b.l2),
        ("1/L2", b.inv_l2()),
        ("R'", b.r_prime),
        ("r0", b.r0),
        ("small-phase threshold", b.small_phase_threshold),
    ] {
        writeln!(t, "{name:<24}{v:.16e}").expect("write to string");
    }
    t
}

pub fn rotate(common: &Common, args: &RotateArgs, out: &mut Outputs) -> Result<Outcome, Failure> {
    let u = read_scalar(&args.u)?;
    let radius = u.grid().mask_radius();
    let lambda = match common.lambda {
        Some(l) => l,
        None => c11_norm(&u, radius)?,
    };
    let holder = match args.theta_holder {
        Some(h) => h,
        None => holder_seminorm(&lagrangian_phase(&hessian(&u)?), radius, common.alpha, &sampling(common))?,
    };
    let budget = rotation_budget(lambda, holder, common.alpha)?;
    let rg = rotate_graph(&u, &budget)?;
    let source = args.u.to_string_lossy().into_owned();
    for path in rg.save(out.dir(), Some(&source))? {
        let name = path
            .file_name()
            .expect("saved files have names")
            .to_string_lossy()
            .into_owned();
        out.note(&name);
    }
    print!("{}", budget_table(&budget));
    Ok(Outcome::success(Some(*u.grid()), vec![args.u.clone()]))
}

pub fn verify(common: &Common, args: &VerifyArgs, out: &mut Outputs) -> Result<Outcome, Failure> {
    let registry = Registry::default();
    let suite = registry
        .suite(&args.suite)
        .ok_or_else(|| Failure::validation(format!("unknown suite {:?}", args.suite)))?;
    let summary = suite.run(&SuiteContext {
        seed: common.seed,
        trials: args.trials,
    })?;
    out.write_json("summary.json", &summary)?;
    for c in &summary.checks {
        let bounds = match (c.lower, c.upper) {
            (Some(lo), Some(hi)) => format!("in [{lo:e}, {hi:e}]"),
            (Some(lo), None) => format!(">= {lo:e}"),
            (None, Some(hi)) => format!("<= {hi:e}"),
            (None, None) => String::new(),
        };
        println!(
            "{} {:<36}{:.6e} {bounds}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured
        );
    }
    println!("suite {}: {}", summary.suite, if summary.passed { "passed" } else { "FAILED" });
    Ok(Outcome {
        exit_code: if summary.passed { 0 } else { 1 },
        grid: None,
        inputs: Vec::new(),
    })
}

fn report_table(r: &RegularityReport) -> String {
    let mut t = String::new();
    let mut row = |name: &str, v: String| writeln!(t, "{name:<28}{v}").expect("write to string");
    row("branch", format!("{:?}", r.branch));
    row("alpha", format!("{:.16e}", r.alpha));
    row("Lambda (measured)", format!("{:.16e}", r.lambda_measured));
    row("sup |u|", format!("{:.16e}", r.sup_u));
    row("[theta]_alpha", format!("{:.16e}", r.theta_alpha));
    row("[D2u]_alpha on B_R", format!("{:.16e}", r.hessian_alpha));
    row("R used", format!("{:.16e}", r.r_used));
    row("empirical C1", format!("{:.16e}", r.empirical_c1));
    row("ball radius", format!("{:.16e}", r.ball_radius));
    row("theta(0)", format!("{:.16e}", r.theta0));
    row("osc theta on ball", format!("{:.16e}", r.theta_osc));
    row("sign flipped", r.sign_flipped.to_string());
    row("correction bound ok", r.correction_bound_ok.to_string());
    if let Some(rot) = &r.rotated {
        row("[D2u_bar]_alpha", format!("{:.16e}", rot.hessian_bar_alpha));
        row("transfer passed", rot.transfer.passed().to_string());
    }
    t
}

/// Values along the horizontal centre line of the mask.
fn centerline_csv(u: &ScalarField) -> Result<String, Failure> {
    let grid = *u.grid();
    let h = hessian(u)?;
    let theta = lagrangian_phase(&h);
    let mut csv = String::from("x1,u,theta,hessian_xx,hessian_xy,hessian_yy\n");
    let j = grid.n() / 2;
    for i in 0..grid.n() {
        let k = grid.index(i, j);
        if grid.in_mask(k) {
            let m = h.at(k);
            writeln!(
                csv,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                grid.coord(k)[0],
                u.at(k),
                theta.at(k),
                m.xx,
                m.xy,
                m.yy
            )
            .expect("write to string");
        }
    }
    Ok(csv)
}

/// Phase oscillation and Hessian size on centred dyadic balls.
fn oscillation_csv(u: &ScalarField) -> Result<String, Failure> {
    let grid = *u.grid();
    let h = hessian(u)?;
    let theta = lagrangian_phase(&h);
    let mut csv = String::from("radius,theta_oscillation,hessian_sup\n");
    let mut r = grid.mask_radius();
    while r >= 2.0 * grid.spacing() {
        let nodes = grid.disk_nodes(r);
        let (lo, hi) = nodes
            .iter()
            .map(|&k| theta.at(k))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let sup = nodes.iter().map(|&k| h.at(k).spectral_norm()).fold(0.0, f64::max);
        writeln!(csv, "{r:.16e},{:.16e},{sup:.16e}", hi - lo).expect("write to string");
        r /= 2.0;
    }
    Ok(csv)
}

pub fn analyze(common: &Common, args: &AnalyzeArgs, out: &mut Outputs) -> Result<Outcome, Failure> {
    let u = read_scalar(&args.u)?;
    let report = regularity_pipeline(&u, args.alpha_bar, common.alpha, &sampling(common))?;
    let report_path = out.write_json("report.json", &report)?;
    out.write("centerline.csv", centerline_csv(&u)?)?;
    out.write("oscillation.csv", oscillation_csv(&u)?)?;
    print!("{}", report_table(&report));
    println!("report: {}", report_path.display());
    Ok(Outcome::success(Some(*u.grid()), vec![args.u.clone()]))
}

pub fn budget(common: &Common, args: &BudgetArgs, out: &mut Outputs) -> Result<Outcome, Failure> {
    let lambda = common
        .lambda
        .ok_or_else(|| Failure::validation("budget needs --lambda"))?;
    let b = rotation_budget(lambda, args.theta_holder, common.alpha)?;
    out.write_json("budget.json", &b)?;
    print!("{}", budget_table(&b));
    Ok(Outcome::success(None, Vec::new()))
}
