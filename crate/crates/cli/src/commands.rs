use std::path::PathBuf;

use pgdlab::experiments::persist::{self, CsvRow};
use pgdlab::experiments::svg::{self, Series};
use pgdlab::experiments::{
    self, draw_gaussian, draw_sparse_signal, DenoiseSpec, EnsembleKind, RateStudySpec, ReferenceM0,
    SensitivitySpec, SweepSpec, TimingSpec,
};
use pgdlab::geometry::{self, ConeDescriptor, RatePrediction};
use pgdlab::solver::{pgd_solve_penalty, SolveStatus};
use pgdlab::{seed, SolverConfig};

use crate::params::Params;
use crate::CliError;

type Res = Result<(), CliError>;

fn core<T>(r: pgdlab::Result<T>) -> Result<T, CliError> {
    r.map_err(CliError::from_core)
}

struct Output {
    dir: PathBuf,
    comment: String,
}

impl Output {
    fn new(p: &Params) -> Result<Self, CliError> {
        let dir = PathBuf::from(p.raw("out")?);
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir, comment: p.command_line() })
    }

    fn csv<R: CsvRow>(&self, name: &str, rows: &[R]) -> Res {
        core(persist::save(&self.dir.join(name), rows, Some(&self.comment)))
    }

    fn text(&self, name: &str, body: &str) -> Res {
        core(persist::write_atomic(&self.dir.join(name), body.as_bytes()))
    }

    fn path(&self, name: &str) -> String {
        self.dir.join(name).display().to_string()
    }
}

pub fn dispatch(name: &str, p: &Params, svg: bool) -> Res {
    match name {
        "solve" => solve(p),
        "sweep" => sweep(p, svg),
        "rates" => rates(p, svg),
        "timing" => timing(p, svg),
        "sensitivity" => sensitivity(p, svg),
        "denoise" => denoise(p, svg),
        "theory" => theory(p),
        "widths" => widths(p),
        other => Err(CliError::Usage(format!("unknown subcommand `{other}`"))),
    }
}

fn solve(p: &Params) -> Res {
    let n: usize = p.get("n")?;
    let s: usize = p.get("s")?;
    let m = single(p.m_list(n, Some(s))?, "m")?;
    let penalty = p.penalty()?;
    let ensemble = p.ensemble()?;
    let noise: f64 = p.get("noise")?;
    let seed_: u64 = p.get("seed")?;
    let cfg = SolverConfig {
        step: p.regime()?,
        max_iters: p.get("iters")?,
        success_tol: p.get("tol")?,
        eta: p.get("eta")?,
        ..SolverConfig::default()
    };
    if s > n {
        return Err(CliError::Usage(format!("s = {s} exceeds n = {n}")));
    }
    let x = draw_sparse_signal(n, s, seed::derive(seed_, &[0]));
    let op = core(ensemble.build(m, n, seed::derive(seed_, &[1])))?;
    let mut y = core(op.apply(&x))?;
    if noise > 0.0 {
        let w = draw_gaussian(m, 1.0, seed::derive(seed_, &[2]));
        let scale = noise * norm(&y) / norm(&w);
        y.iter_mut().zip(&w).for_each(|(yi, wi)| *yi += scale * wi);
    }
    let (_, trace) = core(pgd_solve_penalty(op.as_ref(), &y, penalty, &cfg, Some(&x)))?;
    let out = Output::new(p)?;
    out.text("trace.csv", &format!("# {}\n{}", out.comment, trace.to_csv()))?;
    let err = trace.final_rel_err().unwrap_or(f64::NAN);
    println!(
        "solve: n={n} s={s} m={m} mu={:.6} status={:?} iters={} rel_err={err:.3e} -> {}",
        trace.mu,
        trace.status,
        trace.iterations_run(),
        out.path("trace.csv")
    );
    if trace.status == SolveStatus::Diverged {
        return Err(CliError::Runtime("iterates diverged".into()));
    }
    Ok(())
}

fn sweep(p: &Params, svg_out: bool) -> Res {
    let n: usize = p.get("n")?;
    let mut spec = SweepSpec::new(n, p.usize_list("s")?, p.m_list(n, None)?);
    spec.penalty = p.penalty()?;
    spec.ensemble = p.ensemble()?;
    spec.regime = p.regime()?;
    spec.trials = p.get("trials")?;
    spec.max_iters = p.get("iters")?;
    spec.success_tol = p.get("tol")?;
    spec.eta = p.get("eta")?;
    spec.master_seed = p.get("seed")?;
    let level: f64 = p.get("level")?;
    let grid = core(experiments::run_sweep(&spec, p.get("workers")?))?;
    let boundary = experiments::extract_boundary(&grid, level);
    let out = Output::new(p)?;
    out.csv("sweep.csv", &grid.cells)?;
    out.csv("boundary.csv", &boundary)?;
    if svg_out {
        out.text("sweep.svg", &svg::phase_heatmap(&grid, "Empirical success fraction"))?;
        let pts = boundary.iter().map(|b| (b.s as f64, b.m_star)).collect();
        let theory = spec
            .s_grid
            .iter()
            .filter_map(|&s| geometry::m0_l1(n, s, spec.eta).ok().map(|m0| (s as f64, m0)))
            .collect();
        let series = [
            Series { name: "measured m*".into(), points: pts },
            Series { name: "m0".into(), points: theory },
        ];
        out.text("boundary.svg", &svg::line_plot("Phase transition", "s", "m", &series, false))?;
    }
    let skipped = grid.cells.iter().filter(|c| c.skipped()).count();
    let curve: Vec<String> = boundary.iter().map(|b| format!("s={}:m*={:.1}", b.s, b.m_star)).collect();
    println!(
        "sweep: {} cells ({skipped} skipped), {} trials each; boundary {} -> {}",
        grid.cells.len(),
        spec.trials,
        if curve.is_empty() { "none".to_string() } else { curve.join(" ") },
        out.path("sweep.csv")
    );
    Ok(())
}

fn rates(p: &Params, svg_out: bool) -> Res {
    let mut spec = RateStudySpec::new(p.get("n")?, p.usize_list("s")?, p.get("oversampling")?);
    spec.ensemble = p.ensemble()?;
    spec.regime = p.regime()?;
    spec.trials = p.get("trials")?;
    spec.iters = p.get("iters")?;
    spec.gamma = p.get("gamma")?;
    spec.eta = p.get("eta")?;
    spec.seed = p.get("seed")?;
    let window = p.usize_list("window")?;
    if window.len() != 2 || window[0] >= window[1] {
        return Err(CliError::Usage("invalid value for --window: expected LO,HI with LO < HI".into()));
    }
    spec.window = (window[0], window[1]);
    if p.has("m0") {
        spec.reference = ReferenceM0::Empirical(p.f64_list("m0")?);
    }
    let study = core(experiments::run_rate_study(&spec, p.get("workers")?))?;
    let out = Output::new(p)?;
    out.csv("rates.csv", &study.rows)?;
    if svg_out {
        let series = |normalized: bool| -> Vec<Series> {
            study
                .summary
                .iter()
                .map(|sm| Series {
                    name: format!("s={}", sm.s),
                    points: study
                        .rows
                        .iter()
                        .filter(|r| r.s == sm.s)
                        .map(|r| {
                            (r.iter as f64, if normalized { r.normalized_err } else { r.median_rel_err })
                        })
                        .collect(),
                })
                .collect()
        };
        out.text("rates.svg", &svg::line_plot("Median relative error", "iteration", "error", &series(false), true))?;
        out.text(
            "rates_normalized.svg",
            &svg::line_plot("Normalized error", "iteration", "normalized error", &series(true), true),
        )?;
    }
    let parts: Vec<String> = study
        .summary
        .iter()
        .map(|sm| format!("s={}:m={}:rate={:.4}(sqrt(m0/m)={:.4})", sm.s, sm.m, sm.measured_rate, sm.predicted_rate))
        .collect();
    println!("rates: {} -> {}", parts.join(" "), out.path("rates.csv"));
    Ok(())
}

fn timing(p: &Params, svg_out: bool) -> Res {
    let n: usize = p.get("n")?;
    let s: usize = p.get("s")?;
    let ensembles: Vec<EnsembleKind> = p.with("ensemble", |text| {
        text.split(',').map(|e| e.trim().parse::<EnsembleKind>().map_err(|e| e.to_string())).collect()
    })?;
    let mut spec = TimingSpec::new(n, s, p.m_list(n, Some(s))?, ensembles);
    spec.regime = p.regime()?;
    spec.trials = p.get("trials")?;
    spec.max_iters = p.get("iters")?;
    spec.target_tol = p.get("tol")?;
    spec.seed = p.get("seed")?;
    let study = core(experiments::run_timing_study(&spec))?;
    let out = Output::new(p)?;
    out.csv("timing.csv", &study.rows)?;
    out.csv("timing_iters.csv", &study.iterations)?;
    if svg_out {
        let series: Vec<Series> = spec
            .ensembles
            .iter()
            .map(|&e| Series {
                name: e.name().into(),
                points: study.rows.iter().filter(|r| r.ensemble == e).map(|r| (r.m as f64, r.median_ms)).collect(),
            })
            .collect();
        out.text("timing.svg", &svg::line_plot("Time to target", "m", "median ms", &series, false))?;
    }
    let fits: Vec<String> = study
        .fits
        .iter()
        .map(|f| format!("{}:alpha={:.4e}:beta={:.3}", f.ensemble.name(), f.alpha, f.beta))
        .collect();
    println!("timing: m0={:.3} {} -> {}", study.m0, fits.join(" "), out.path("timing.csv"));
    Ok(())
}

fn sensitivity(p: &Params, svg_out: bool) -> Res {
    let n: usize = p.get("n")?;
    let s: usize = p.get("s")?;
    let m = single(p.m_list(n, Some(s))?, "m")?;
    let mut spec = SensitivitySpec::new(n, s, m, p.f64_list("ratios")?);
    spec.ensemble = p.ensemble()?;
    spec.trials = p.get("trials")?;
    spec.iters = p.get("iters")?;
    spec.seed = p.get("seed")?;
    let study = core(experiments::run_sensitivity_study(&spec, p.get("workers")?))?;
    let out = Output::new(p)?;
    out.csv("sensitivity.csv", &study.rows)?;
    if svg_out {
        let series = [
            Series { name: "plateau".into(), points: study.rows.iter().map(|r| (r.ratio, r.plateau_err)).collect() },
            Series { name: "bound".into(), points: study.rows.iter().map(|r| (r.ratio, r.bound)).collect() },
        ];
        out.text("sensitivity.svg", &svg::line_plot("Radius mistuning", "R / f(x)", "error", &series, true))?;
    }
    let parts: Vec<String> =
        study.rows.iter().map(|r| format!("{}:{:.3e}(bound {:.3e})", r.ratio, r.plateau_err, r.bound)).collect();
    println!("sensitivity: m={m} rho={:.4} {} -> {}", study.rho, parts.join(" "), out.path("sensitivity.csv"));
    Ok(())
}

fn denoise(p: &Params, svg_out: bool) -> Res {
    let mut spec = DenoiseSpec::new(p.get("n")?, p.get("s")?, p.f64_list("sigmas")?);
    spec.samples = p.get("samples")?;
    spec.seed = p.get("seed")?;
    let rows = core(experiments::run_denoising_check(&spec, p.get("workers")?))?;
    let out = Output::new(p)?;
    out.csv("denoise.csv", &rows)?;
    if svg_out {
        let series = [
            Series { name: "estimate".into(), points: rows.iter().map(|r| (r.sigma, r.ratio_estimate)).collect() },
            Series { name: "4 delta".into(), points: rows.iter().map(|r| (r.sigma, r.bound)).collect() },
        ];
        out.text("denoise.svg", &svg::line_plot("Denoising error / sigma^2", "sigma", "ratio", &series, false))?;
    }
    let parts: Vec<String> =
        rows.iter().map(|r| format!("sigma={}:{:.4}+-{:.4}", r.sigma, r.ratio_estimate, r.stderr)).collect();
    let bound = rows.first().map_or(f64::NAN, |r| r.bound);
    println!("denoise: bound={bound:.4} {} -> {}", parts.join(" "), out.path("denoise.csv"));
    Ok(())
}

fn theory(p: &Params) -> Res {
    if p.has("phi") {
        let t: f64 = p.get("phi")?;
        println!("phi({t}) = {}", core(geometry::phi(t))?);
        return Ok(());
    }
    let n: usize = p.get("n")?;
    let s: usize = p.get("s")?;
    let m = single(p.m_list(n, Some(s))?, "m")?;
    let kappa = p.penalty()?.kappa();
    let pred = core(RatePrediction::greedy_l1(n, s, m, kappa, p.get("eta")?))?;
    let mf = m as f64;
    println!(
        "theory: n={n} s={s} m={m} m0={:.4} mu={:.6e} rho_greedy={:.4} rho_sharp={:.4} rho_conservative={:.6} xi={:.4e} residual_per_unit_noise={:.4e}",
        pred.m0,
        pred.mu,
        pred.rho_bound,
        geometry::rho_greedy_convex_sharp(mf, pred.m0),
        geometry::rho_conservative(mf, n as f64, pred.m0),
        pred.xi_bound,
        pred.residual_bound,
    );
    Ok(())
}

fn widths(p: &Params) -> Res {
    let n: usize = p.get("n")?;
    let s: usize = p.get("s")?;
    let eta: f64 = p.get("eta")?;
    let delta = core(geometry::width_sq_l1(n, s))?;
    let m0 = core(geometry::m0(delta.sqrt(), eta))?;
    let samples: usize = p.get("samples")?;
    if samples == 0 {
        println!("widths: n={n} s={s} delta={delta} m0={m0} (eta={eta})");
        return Ok(());
    }
    let seed_: u64 = p.get("seed")?;
    let x = draw_sparse_signal(n, s, seed::derive(seed_, &[0]));
    let est = core(geometry::width_mc(&ConeDescriptor::l1_at(&x), samples, seed::derive(seed_, &[1])))?;
    println!(
        "widths: n={n} s={s} delta={delta} m0={m0} (eta={eta}) mc_mean_sq={:.4} mc_stderr={:.4}",
        est.mean_sq, est.stderr
    );
    Ok(())
}

fn single(v: Vec<usize>, key: &str) -> Result<usize, CliError> {
    match v.as_slice() {
        [x] => Ok(*x),
        _ => Err(CliError::Usage(format!("invalid value for --{key}: expected a single value"))),
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

