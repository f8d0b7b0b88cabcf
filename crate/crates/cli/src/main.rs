//! `pmlmodes`: configuration-driven runner for propagating-mode computations.

mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pmlmodes::experiments::{mesh_resolution, SweepRow};
use pmlmodes::export::{write_eigenvalues, write_field, write_matrix_market, write_mesh, write_profile};
use pmlmodes::pml::{dtn_coth_deviation, ModeExponents};
use pmlmodes::*;

use output::{Meta, OutDir};

#[derive(Parser, Debug)]
#[command(name = "pmlmodes", version, about = "Propagating values and modes of open periodic waveguides")]
struct Cli {
    /// Worker threads for assembly and multi-shift solves (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the Krylov start vectors.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated shifts, each `re` or `re:im`.
    #[arg(long, value_delimiter = ',', value_parser = parse_shift)]
    shifts: Option<Vec<Complex64>>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve on one mesh and write eigenvalues, mesh, modes and profiles.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Mesh size; defaults to the finest ladder level.
        #[arg(long)]
        hmax: Option<f64>,
        /// Also write A, B, C as Matrix Market files.
        #[arg(long)]
        dump_matrices: bool,
        /// Field grid `n1,n2` for `modes/*.csv`.
        #[arg(long, value_delimiter = ',', default_value = "128,61")]
        grid: Vec<usize>,
    },
    /// Run a refinement ladder and write the convergence report.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Comma-separated ladder; defaults to the config ladder.
        #[arg(long, value_delimiter = ',')]
        hmax: Option<Vec<f64>>,
        /// Append this many further halvings of the finest level.
        #[arg(long, default_value_t = 0)]
        extra_levels: u32,
        #[arg(long, value_delimiter = ',', default_value = "128,61")]
        grid: Vec<usize>,
    },
    /// Re-solve one mesh with scaled PML strengths.
    SweepPml {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.03125)]
        hmax: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1")]
        multipliers: Vec<f64>,
    },
    /// Write the field and profile of the propagating mode nearest a target.
    ExportMode {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        hmax: Option<f64>,
        /// Target real part of α.
        #[arg(long)]
        alpha: f64,
        /// Base name of the output files.
        #[arg(long)]
        name: Option<String>,
        #[arg(long, value_delimiter = ',', default_value = "256,121")]
        grid: Vec<usize>,
    },
    /// Tabulate the per-order PML truncation error for given α values.
    DiagnosePml {
        #[command(flatten)]
        common: Common,
        /// Values of α; defaults to the closed-form references of the config.
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
        /// Fourier orders −N..=N.
        #[arg(long, default_value_t = 6)]
        orders: i64,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,2")]
        multipliers: Vec<f64>,
    },
}

fn parse_shift(s: &str) -> std::result::Result<Complex64, String> {
    let mut parts = s.split(':');
    let re = parts.next().unwrap_or_default().trim();
    let im = parts.next().map(str::trim);
    if parts.next().is_some() {
        return Err(format!("bad shift `{s}`, expected `re` or `re:im`"));
    }
    let num = |t: &str| t.parse::<f64>().map_err(|_| format!("bad shift `{s}`, expected `re` or `re:im`"));
    Ok(c64(num(re)?, im.map(num).transpose()?.unwrap_or(0.0)))
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&common.config)
        .with_context(|| format!("loading {}", common.config.display()))?;
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    if let Some(shifts) = &common.shifts {
        cfg.solver.shifts = shifts.clone();
    }
    cfg.validate()?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    Ok((cfg, out))
}

fn grid_of(v: &[usize]) -> Result<[usize; 2]> {
    match v {
        [a, b] if *a >= 2 && *b >= 2 => Ok([*a, *b]),
        _ => bail!("--grid expects two sizes n1,n2 of at least 2"),
    }
}

fn finest(cfg: &ExperimentConfig) -> Result<f64> {
    cfg.ladder.iter().copied().reduce(f64::min).context("config ladder is empty")
}

fn write_mode(out: &OutDir, name: &str, pair: &EigenPair, lvl: &LevelSolution, grid: [usize; 2]) -> Result<()> {
    write_field(&mode_field(pair, &lvl.mesh, &lvl.dofs, grid), &out.file(&format!("modes/{name}.csv"))?)?;
    write_profile(&export_profile(pair, &lvl.mesh, &lvl.dofs, 121), &out.file(&format!("profile_{name}.csv"))?)?;
    Ok(())
}

fn dump_matrices(cfg: &ExperimentConfig, hmax: f64, out: &OutDir) -> Result<()> {
    let domain = cfg.meshed_domain();
    let (nx, ny) = mesh_resolution(&domain, hmax)?;
    let mesh = build_structured_mesh(&domain, nx, ny)?;
    let dofs = build_dof_map(&mesh)?;
    let quad = QuadratureRule::with_degree(cfg.quadrature_degree)?;
    let sys = assemble_forms(&mesh, &dofs, &cfg.pml, &cfg.index, cfg.k, &quad)?;
    for (name, m) in [("A", &sys.a), ("B", &sys.b), ("C", &sys.c)] {
        write_matrix_market(m, &out.file(&format!("matrices/{name}.mtx"))?)?;
    }
    Ok(())
}

fn solve(common: &Common, hmax: Option<f64>, dump: bool, grid: &[usize], threads: usize) -> Result<()> {
    let (cfg, dir) = load(common)?;
    let grid = grid_of(grid)?;
    let hmax = match hmax {
        Some(h) => h,
        None => finest(&cfg)?,
    };
    let out = OutDir::create(&dir)?;
    let t = Instant::now();
    let lvl = solve_level(&cfg, hmax)?;
    write_eigenvalues(&lvl.pairs, &out.file("eigenvalues.csv")?)?;
    write_eigenvalues(&lvl.filtered.iter().map(|p| p.pair.clone()).collect::<Vec<_>>(), &out.file("propagating.csv")?)?;
    write_mesh(&lvl.mesh, &out.file("mesh")?)?;
    for (i, p) in lvl.filtered.iter().enumerate() {
        write_mode(&out, &format!("alpha{i}"), &p.pair, &lvl, grid)?;
    }
    if dump {
        dump_matrices(&cfg, hmax, &out)?;
    }
    for p in &lvl.filtered {
        println!("alpha = {:.8} {:+.3e}i  residual {:.1e}", p.pair.alpha.re, p.pair.alpha.im, p.pair.residual);
    }
    let mut meta = Meta::new("solve", &cfg, threads)?;
    meta.levels.push(output::level_meta(&lvl));
    meta.finish(t, &out)
}

fn converge(common: &Common, hmax: Option<&[f64]>, extra: u32, grid: &[usize], threads: usize) -> Result<()> {
    let (mut cfg, dir) = load(common)?;
    let grid = grid_of(grid)?;
    if let Some(h) = hmax {
        cfg.ladder = h.to_vec();
    }
    let last = finest(&cfg)?;
    cfg.ladder.extend((1..=extra).map(|i| last / 2f64.powi(i as i32)));
    cfg.validate_ladder()?;
    let out = OutDir::create(&dir)?;
    let t = Instant::now();
    let run = run_experiment(&cfg)?;
    run.report.write_csv(&out.file("report.csv")?)?;
    for j in 0..run.report.references.len() {
        if let Some((lvl, pair)) = run.finest_pair(j) {
            write_mode(&out, &format!("mode{}", j + 1), pair, lvl, grid)?;
        }
    }
    for l in &run.report.levels {
        let vals: Vec<String> = l.propagating.iter().map(|a| format!("{:.6}{:+.1e}i", a.re, a.im)).collect();
        println!("hmax {:<10} dofs {:<8} {}", l.hmax, l.n_dofs, vals.join("  "));
    }
    let mut meta = Meta::new("converge", &cfg, threads)?;
    meta.levels = run.levels.iter().map(output::level_meta).collect();
    meta.finish(t, &out)
}

fn write_sweep(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["multiplier", "strength", "mode", "re_alpha", "im_alpha", "difference", "flagged"])?;
    for r in rows {
        for (j, (a, d)) in r.alphas.iter().zip(&r.differences).enumerate() {
            let (re, im) = a.map_or((String::new(), String::new()), |a| (format!("{:.9e}", a.re), format!("{:.9e}", a.im)));
            w.write_record([
                r.multiplier.to_string(),
                r.strength.to_string(),
                (j + 1).to_string(),
                re,
                im,
                d.map_or(String::new(), |d| format!("{d:.6e}")),
                r.flagged.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn sweep(common: &Common, hmax: f64, multipliers: &[f64], threads: usize) -> Result<()> {
    let (cfg, dir) = load(common)?;
    let out = OutDir::create(&dir)?;
    let t = Instant::now();
    let rows = pml_robustness_sweep(&cfg, hmax, multipliers)?;
    write_sweep(&rows, &out.file("sweep_pml.csv")?)?;
    for r in &rows {
        let d: Vec<String> = r.differences.iter().map(|d| d.map_or("-".into(), |d| format!("{d:.2e}"))).collect();
        println!("sigma0 {:<8} {}{}", r.strength, d.join("  "), if r.flagged { "  (flagged)" } else { "" });
    }
    let mut meta = Meta::new("sweep-pml", &cfg, threads)?;
    meta.extra.insert("hmax".into(), hmax.into());
    meta.finish(t, &out)
}

fn export_mode(common: &Common, hmax: Option<f64>, alpha: f64, name: Option<&str>, grid: &[usize], threads: usize) -> Result<()> {
    let (cfg, dir) = load(common)?;
    let grid = grid_of(grid)?;
    let hmax = match hmax {
        Some(h) => h,
        None => finest(&cfg)?,
    };
    let out = OutDir::create(&dir)?;
    let t = Instant::now();
    let lvl = solve_level(&cfg, hmax)?;
    let pair = lvl
        .filtered
        .iter()
        .map(|p| &p.pair)
        .min_by(|a, b| (a.alpha.re - alpha).abs().total_cmp(&(b.alpha.re - alpha).abs()))
        .with_context(|| format!("no propagating value at hmax {hmax}"))?;
    let name = name.map_or_else(|| format!("alpha_{:.4}", pair.alpha.re), str::to_string);
    write_mode(&out, &name, pair, &lvl, grid)?;
    println!("{name}: alpha = {:.8} {:+.3e}i", pair.alpha.re, pair.alpha.im);
    let mut meta = Meta::new("export-mode", &cfg, threads)?;
    meta.levels.push(output::level_meta(&lvl));
    meta.extra.insert("mode".into(), serde_json::json!({ "name": name, "re_alpha": pair.alpha.re, "im_alpha": pair.alpha.im }));
    meta.finish(t, &out)
}

fn diagnose(common: &Common, alpha: Option<&[f64]>, orders: i64, multipliers: &[f64], threads: usize) -> Result<()> {
    let (cfg, dir) = load(common)?;
    let alphas: Vec<f64> = match (alpha, &cfg.reference) {
        (Some(a), _) => a.to_vec(),
        (None, Reference::Oracle { modes }) => modes.iter().map(dispersion_solve).collect::<pmlmodes::Result<_>>()?,
        (None, Reference::SelfFinest) => bail!("this config has no closed-form references; pass --alpha"),
    };
    let out = OutDir::create(&dir)?;
    let t = Instant::now();
    let mut w = csv::Writer::from_path(out.file("diagnose_pml.csv")?)?;
    w.write_record(["multiplier", "strength", "alpha", "n", "re_beta", "im_beta", "re_sigma", "im_sigma", "deviation"])?;
    for &m in multipliers {
        let pml = cfg.pml.with_strength(cfg.pml.strength * m);
        let sigma = pml.sigma_integral(Side::Plus);
        for &a in &alphas {
            let mut worst: f64 = 0.0;
            for n in -orders..=orders {
                let exp = ModeExponents { k: cfg.k, alpha: c64(a, 0.0), n, period: cfg.domain.period };
                let beta = exp.beta_n();
                // cut-off orders are reported with an empty deviation
                let dev = dtn_coth_deviation(&exp, sigma).ok();
                worst = worst.max(dev.unwrap_or(0.0));
                w.write_record([
                    m.to_string(),
                    pml.strength.to_string(),
                    a.to_string(),
                    n.to_string(),
                    format!("{:.6e}", beta.re),
                    format!("{:.6e}", beta.im),
                    format!("{:.6e}", sigma.re),
                    format!("{:.6e}", sigma.im),
                    dev.map_or(String::new(), |d| format!("{d:.6e}")),
                ])?;
            }
            println!("sigma0 {:<8} alpha {a:.6}: max deviation over |n| <= {orders}: {worst:.3e}", pml.strength);
        }
    }
    w.flush()?;
    let mut meta = Meta::new("diagnose-pml", &cfg, threads)?;
    meta.extra.insert("alphas".into(), serde_json::json!(alphas));
    meta.finish(t, &out)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        pool = pool.num_threads(n);
    }
    pool.build_global().context("configuring the thread pool")?;
    let threads = rayon::current_num_threads();

    match &cli.command {
        Command::Solve { common, hmax, dump_matrices, grid } => solve(common, *hmax, *dump_matrices, grid, threads),
        Command::Converge { common, hmax, extra_levels, grid } => {
            converge(common, hmax.as_deref(), *extra_levels, grid, threads)
        }
        Command::SweepPml { common, hmax, multipliers } => sweep(common, *hmax, multipliers, threads),
        Command::ExportMode { common, hmax, alpha, name, grid } => {
            export_mode(common, *hmax, *alpha, name.as_deref(), grid, threads)
        }
        Command::DiagnosePml { common, alpha, orders, multipliers } => {
            diagnose(common, alpha.as_deref(), *orders, multipliers, threads)
        }
    }
}
