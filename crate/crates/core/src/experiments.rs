//! Refinement ladders, convergence orders, PML sweeps and mode profiles.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_forms, RefractiveIndexMap};
use crate::eigensolver::{
    filter_propagating, linearize, solve_shift_invert, EigenPair, ModeField, PropagatingValue, SolverConfig,
};
use crate::error::{Error, Result};
use crate::mesh::{build_dof_map, build_structured_mesh, DofMap, DomainSpec, Mesh};
use crate::oracle::{aligned_l2_distance, dispersion_solve, l2_mode_error, AnalyticMode, SlabModeSpec};
use crate::pml::PmlProfile;
use crate::quadrature::QuadratureRule;

/// Two references closer than this to one candidate make a match ambiguous.
const AMBIGUITY_RADIUS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    /// Closed-form slab modes.
    Oracle { modes: Vec<SlabModeSpec> },
    /// Filtered values on the finest ladder level.
    SelfFinest,
}

fn default_quadrature() -> u32 {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub domain: DomainSpec,
    pub index: RefractiveIndexMap,
    pub k: f64,
    pub pml: PmlProfile,
    pub solver: SolverConfig,
    pub ladder: Vec<f64>,
    pub reference: Reference,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_quadrature")]
    pub quadrature_degree: u32,
    /// Where the runner writes its outputs unless told otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks everything needed to solve on a single mesh.
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.index.validate(self.domain.medium_half_height)?;
        self.pml.validate()?;
        self.solver.validate()?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
        if !close(self.pml.half_height, self.domain.half_height) || !close(self.pml.thickness, self.domain.pml_thickness) {
            return Err(Error::invalid("PML profile and domain disagree on H or δ"));
        }
        if !(self.k > 0.0) {
            return Err(Error::invalid(format!("wavenumber must be positive, got {}", self.k)));
        }
        QuadratureRule::with_degree(self.quadrature_degree)?;
        Ok(())
    }

    /// Ladder must be strictly decreasing with at least three levels.
    pub fn validate_ladder(&self) -> Result<()> {
        if self.ladder.len() < 3 {
            return Err(Error::invalid(format!(
                "a convergence study needs at least 3 levels, got {}",
                self.ladder.len()
            )));
        }
        if self.ladder.iter().any(|&h| !(h > 0.0)) || self.ladder.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("mesh ladder must be positive and strictly decreasing"));
        }
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut s = self.solver.clone();
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s
    }

    /// Domain with the index-map edges added to the lines the mesh must resolve.
    pub fn meshed_domain(&self) -> DomainSpec {
        let mut d = self.domain.clone();
        let (xs, ys) = self.index.interfaces();
        let half = d.period / 2.0;
        d.interface_x1.extend(xs.into_iter().filter(|x| x.abs() < half * (1.0 - 1e-12)));
        d.interface_x2.extend(ys);
        d
    }
}

/// Grid whose longest edge (the cell diagonal) is at most `hmax`: an even
/// number of rows per unit length with height about `hmax/√2`, then the
/// smallest even number of columns that keeps the diagonal within `hmax`.
pub fn mesh_resolution(domain: &DomainSpec, hmax: f64) -> Result<(usize, usize)> {
    if !(hmax > 0.0) {
        return Err(Error::invalid(format!("hmax must be positive, got {hmax}")));
    }
    let even_ceil = |x: f64| {
        let n = (x * (1.0 - 1e-12)).ceil() as usize;
        (n + n % 2).max(2)
    };
    let ny = even_ceil(std::f64::consts::SQRT_2 / hmax);
    let dy = 1.0 / ny as f64;
    let dx = (hmax * hmax - dy * dy).sqrt();
    let nx = even_ceil(domain.period / dx);
    Ok((nx, ny))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LevelTimings {
    pub mesh_s: f64,
    pub assemble_s: f64,
    pub solve_s: f64,
}

#[derive(Debug, Clone)]
pub struct LevelSolution {
    pub hmax: f64,
    pub mesh: Mesh,
    pub dofs: DofMap,
    pub pairs: Vec<EigenPair>,
    pub filtered: Vec<PropagatingValue>,
    pub timings: LevelTimings,
}

impl LevelSolution {
    pub fn field<'a>(&'a self, pair: &EigenPair) -> ModeField<'a> {
        ModeField::from_pair(pair, &self.mesh, &self.dofs)
    }
}

/// Mesh, assemble, solve and filter on one level.
pub fn solve_level(cfg: &ExperimentConfig, hmax: f64) -> Result<LevelSolution> {
    cfg.validate()?;
    solve_level_with(cfg, hmax, &cfg.pml).map_err(|e| e.at_level(hmax))
}

fn solve_level_with(cfg: &ExperimentConfig, hmax: f64, pml: &PmlProfile) -> Result<LevelSolution> {
    let t0 = Instant::now();
    let domain = cfg.meshed_domain();
    let (nx, ny) = mesh_resolution(&domain, hmax)?;
    let mesh = build_structured_mesh(&domain, nx, ny)?;
    let dofs = build_dof_map(&mesh)?;
    let mesh_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let quad = QuadratureRule::with_degree(cfg.quadrature_degree)?;
    let sys = assemble_forms(&mesh, &dofs, pml, &cfg.index, cfg.k, &quad)?;
    let pencil = linearize(&sys);
    drop(sys);
    let assemble_s = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let solver = cfg.solver_config();
    let pairs = solve_shift_invert(&pencil, &solver)?;
    let filtered = filter_propagating(&pairs, &solver);
    let solve_s = t2.elapsed().as_secs_f64();
    log::info!(
        "hmax {hmax}: {} dofs, {} eigenpairs, {} propagating ({:.1}s)",
        dofs.n_dofs,
        pairs.len(),
        filtered.len(),
        t0.elapsed().as_secs_f64()
    );
    Ok(LevelSolution { hmax, mesh, dofs, pairs, filtered, timings: LevelTimings { mesh_s, assemble_s, solve_s } })
}

/// `order_i = ln(e_i / e_{i+1}) / ln(h_i / h_{i+1})`; `log₂` of the error ratio
/// for a halving ladder.
pub fn convergence_orders(errors: &[f64], ladder: &[f64]) -> Result<Vec<f64>> {
    if errors.len() < 2 || errors.len() != ladder.len() {
        return Err(Error::invalid("need at least two errors, one per ladder level"));
    }
    if let Some((index, &value)) = errors.iter().enumerate().find(|(_, e)| !(**e > 0.0)) {
        return Err(Error::NonpositiveError { index, value });
    }
    Ok(errors
        .windows(2)
        .zip(ladder.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect())
}

/// Index of the candidate nearest to each reference. A candidate claimed by
/// several references goes to the closest one; the others get `None`.
pub fn match_references(candidates: &[Complex64], references: &[Complex64]) -> Result<Vec<Option<usize>>> {
    let mut picks: Vec<Option<usize>> = Vec::with_capacity(references.len());
    for r in references {
        let best = candidates
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - r).norm().total_cmp(&(b.1 - r).norm()))
            .map(|(i, _)| i);
        if let Some(i) = best {
            let c = candidates[i];
            if references.iter().filter(|q| (c - **q).norm() < AMBIGUITY_RADIUS).count() >= 2 {
                return Err(Error::MatchAmbiguous { candidate: c });
            }
        }
        picks.push(best);
    }
    for j in 0..references.len() {
        let Some(i) = picks[j] else { continue };
        let d = (candidates[i] - references[j]).norm();
        let closer = (0..references.len())
            .any(|o| o != j && picks[o] == Some(i) && (candidates[i] - references[o]).norm() < d);
        if closer {
            picks[j] = None;
        }
    }
    Ok(picks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackEntry {
    pub alpha: Complex64,
    pub eig_error: Option<f64>,
    pub l2_error: Option<f64>,
    pub eig_order: Option<f64>,
    pub l2_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub hmax: f64,
    pub n_dofs: usize,
    pub propagating: Vec<Complex64>,
    /// One entry per tracked mode; `None` when the level found no candidate.
    pub tracks: Vec<Option<TrackEntry>>,
    pub timings: LevelTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub name: String,
    pub references: Vec<Complex64>,
    pub levels: Vec<LevelReport>,
}

impl ConvergenceReport {
    pub fn track(&self, j: usize) -> impl Iterator<Item = (f64, Option<&TrackEntry>)> + '_ {
        self.levels.iter().map(move |l| (l.hmax, l.tracks[j].as_ref()))
    }

    /// `mode,hmax,re_alpha,im_alpha,eig_error,order,l2_error,l2_order`, with
    /// empty cells where a value is undefined.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["mode", "hmax", "re_alpha", "im_alpha", "eig_error", "order", "l2_error", "l2_order"])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
        for j in 0..self.references.len() {
            for l in &self.levels {
                let Some(t) = &l.tracks[j] else {
                    w.write_record([(j + 1).to_string(), format!("{:.6e}", l.hmax), String::new(), String::new(), String::new(), String::new(), String::new(), String::new()])?;
                    continue;
                };
                w.write_record([
                    (j + 1).to_string(),
                    format!("{:.6e}", l.hmax),
                    format!("{:.6e}", t.alpha.re),
                    format!("{:.6e}", t.alpha.im),
                    opt(t.eig_error),
                    opt(t.eig_order),
                    opt(t.l2_error),
                    opt(t.l2_order),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Reference values and, for the oracle, analytic modes.
fn oracle_modes(modes: &[SlabModeSpec], half_height: f64) -> Result<Vec<AnalyticMode>> {
    modes.iter().map(|m| AnalyticMode::new(*m, dispersion_solve(m)?, half_height)).collect()
}

/// Everything produced by a ladder run: the report and the solved levels.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ConvergenceReport,
    pub levels: Vec<LevelSolution>,
    /// Matched eigenpair index (into `levels[i].filtered`) per level and track.
    pub matches: Vec<Vec<Option<usize>>>,
}

impl ExperimentRun {
    /// Matched pair of track `j` on the finest level.
    pub fn finest_pair(&self, j: usize) -> Option<(&LevelSolution, &EigenPair)> {
        let last = self.levels.len() - 1;
        let idx = self.matches[last][j]?;
        Some((&self.levels[last], &self.levels[last].filtered[idx].pair))
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    cfg.validate()?;
    cfg.validate_ladder()?;
    let quad = QuadratureRule::with_degree(cfg.quadrature_degree)?;
    let mut levels = Vec::with_capacity(cfg.ladder.len());
    for &h in &cfg.ladder {
        levels.push(solve_level(cfg, h)?);
    }

    let analytic = match &cfg.reference {
        Reference::Oracle { modes } => Some(oracle_modes(modes, cfg.domain.half_height)?),
        Reference::SelfFinest => None,
    };
    let references: Vec<Complex64> = match &analytic {
        Some(a) => a.iter().map(|m| Complex64::new(m.alpha, 0.0)).collect(),
        None => levels.last().expect("ladder is non-empty").filtered.iter().map(|p| p.pair.alpha).collect(),
    };
    if references.is_empty() {
        return Err(Error::invalid("no propagating value on the finest level to track"));
    }

    let mut matches = Vec::with_capacity(levels.len());
    for lvl in &levels {
        let cands: Vec<Complex64> = lvl.filtered.iter().map(|p| p.pair.alpha).collect();
        matches.push(match_references(&cands, &references).map_err(|e| e.at_level(lvl.hmax))?);
    }

    let finest = levels.len() - 1;
    let mut reports = Vec::with_capacity(levels.len());
    for (i, lvl) in levels.iter().enumerate() {
        let mut tracks = Vec::with_capacity(references.len());
        for (j, r) in references.iter().enumerate() {
            let Some(idx) = matches[i][j] else {
                tracks.push(None);
                continue;
            };
            let pair = &lvl.filtered[idx].pair;
            let is_reference = analytic.is_none() && i == finest;
            let (eig_error, l2_error) = if is_reference {
                (None, None)
            } else {
                let field = lvl.field(pair);
                let l2 = match &analytic {
                    Some(a) => l2_mode_error(&field, &a[j], &quad),
                    None => {
                        let fine = &levels[finest];
                        let fine_pair = &fine.filtered[matches[finest][j].expect("references come from the finest level")].pair;
                        let fine_field = fine.field(fine_pair);
                        aligned_l2_distance(&fine_field, |x1, x2| field.eval(x1, x2).unwrap_or_default(), &quad)
                    }
                }
                .map_err(|e| e.at_level(lvl.hmax))?;
                (Some((pair.alpha - r).norm()), Some(l2))
            };
            tracks.push(Some(TrackEntry { alpha: pair.alpha, eig_error, l2_error, eig_order: None, l2_order: None }));
        }
        reports.push(LevelReport {
            hmax: lvl.hmax,
            n_dofs: lvl.dofs.n_dofs,
            propagating: lvl.filtered.iter().map(|p| p.pair.alpha).collect(),
            tracks,
            timings: lvl.timings,
        });
    }

    // orders between consecutive levels where both errors exist
    for j in 0..references.len() {
        for i in 1..reports.len() {
            let (prev, cur) = (&reports[i - 1], &reports[i]);
            let pick = |r: &LevelReport, f: fn(&TrackEntry) -> Option<f64>| r.tracks[j].as_ref().and_then(f);
            let ladder = [prev.hmax, cur.hmax];
            let order = |f: fn(&TrackEntry) -> Option<f64>| match (pick(prev, f), pick(cur, f)) {
                (Some(a), Some(b)) => convergence_orders(&[a, b], &ladder).ok().map(|o| o[0]),
                _ => None,
            };
            let (eo, lo) = (order(|t| t.eig_error), order(|t| t.l2_error));
            if let Some(t) = reports[i].tracks[j].as_mut() {
                t.eig_order = eo;
                t.l2_order = lo;
            }
        }
    }

    Ok(ExperimentRun {
        report: ConvergenceReport { name: cfg.name.clone(), references, levels: reports },
        levels,
        matches,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub multiplier: f64,
    pub strength: f64,
    pub alphas: Vec<Option<Complex64>>,
    /// `|α(σ₀·t) − α(σ₀·t_max)|` per tracked value.
    pub differences: Vec<Option<f64>>,
    /// Set when absorption is off or nothing was tracked.
    pub flagged: bool,
}

/// Re-solves one mesh with the PML strength scaled by each multiplier and
/// compares the tracked values against the largest multiplier.
pub fn pml_robustness_sweep(cfg: &ExperimentConfig, hmax: f64, multipliers: &[f64]) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    if multipliers.is_empty() || multipliers.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::invalid("multipliers must be non-negative and non-empty"));
    }
    let t_max = multipliers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let solve = |t: f64| -> Result<Vec<Complex64>> {
        let pml = cfg.pml.with_strength(cfg.pml.strength * t);
        let lvl = solve_level_with(cfg, hmax, &pml).map_err(|e| e.at_level(hmax))?;
        Ok(lvl.filtered.iter().map(|p| p.pair.alpha).collect())
    };
    let base = solve(t_max)?;
    let references = match &cfg.reference {
        Reference::Oracle { modes } => modes
            .iter()
            .map(|m| dispersion_solve(m).map(|a| Complex64::new(a, 0.0)))
            .collect::<Result<Vec<_>>>()?,
        Reference::SelfFinest => base.clone(),
    };
    let anchor: Vec<Option<Complex64>> = match_references(&base, &references)?.into_iter().map(|i| i.map(|i| base[i])).collect();

    let mut rows = Vec::with_capacity(multipliers.len());
    for &t in multipliers {
        let vals = if t == t_max { base.clone() } else { solve(t)? };
        let idx = match_references(&vals, &references)?;
        let alphas: Vec<Option<Complex64>> = idx.iter().map(|i| i.map(|i| vals[i])).collect();
        let differences = alphas
            .iter()
            .zip(&anchor)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => Some((a - b).norm()),
                _ => None,
            })
            .collect();
        let strength = cfg.pml.strength * t;
        rows.push(SweepRow {
            multiplier: t,
            strength,
            flagged: strength == 0.0 || alphas.iter().all(Option::is_none),
            alphas,
            differences,
        });
    }
    Ok(rows)
}

/// `max_{x₁} |u(x₁, x₂)|` sampled on `n1` points across the period.
pub fn trace_max(field: &ModeField, x2: f64, n1: usize) -> f64 {
    let mesh = field.mesh();
    let (lo, hi) = mesh
        .nodes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[0]), b.max(p[0])));
    (0..n1)
        .map(|i| lo + (hi - lo) * i as f64 / n1.max(2).saturating_sub(1) as f64)
        .filter_map(|x1| field.eval(x1, x2))
        .map(|u| u.norm())
        .fold(0.0, f64::max)
}

/// Rows `(x₂, max over x₁ of |u|)` for `n_x2_samples` ordinates spanning the
/// whole cell including the layers.
pub fn export_profile(pair: &EigenPair, mesh: &Mesh, dofs: &DofMap, n_x2_samples: usize) -> Vec<(f64, f64)> {
    let field = ModeField::from_pair(pair, mesh, dofs);
    let (lo, hi) = mesh
        .nodes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[1]), b.max(p[1])));
    // every column of the grid plus midpoints
    let n1 = mesh.grid.as_ref().map_or(512, |g| 2 * (g.x1.len() - 1) + 1);
    (0..n_x2_samples)
        .map(|j| {
            let x2 = if n_x2_samples < 2 { 0.5 * (lo + hi) } else { lo + (hi - lo) * j as f64 / (n_x2_samples - 1) as f64 };
            (x2, trace_max(&field, x2, n1))
        })
        .collect()
}
