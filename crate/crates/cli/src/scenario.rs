//! Orchestration of the `hierarchy`, `darboux`, `soliton` and `verify`
//! commands. Every command returns its artifacts; writing them is left to
//! the caller.

use nisakns_core::darboux::{
    asymptotic_s_check, char_poly_of_roots, dress_hierarchy, dress_potential,
    governing_relation_residual, DarbouxFrame, TrivialSeed,
};
use nisakns_core::grid::observed_order;
use nisakns_core::hierarchy::{asymptotic_check, zero_curvature_residual, AsymptoticReport};
use nisakns_core::soliton::{
    dressed_system, mkdv_residual, one_soliton, two_soliton, SolitonSpec, TermRow,
};
use nisakns_core::{
    build_hierarchy, recurrence_residual, FieldGrid, Grid, HierarchyFields, SpectralPath,
    SquareMatrix, Tolerances, C64,
};
use serde::{Deserialize, Serialize};

use crate::config::{CheckTolerances, Format, ScenarioConfig, Seeding};
use crate::error::{CliError, StepContext};
use crate::output::{matrix_csv, scalar_csv, Artifact};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Hierarchy,
    Darboux,
    Soliton,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Multiplies every absolute tolerance of `verify`.
    pub tolerance_scale: f64,
    /// Number of nested grids for order studies; below 2 disables them.
    pub grid_refine: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            tolerance_scale: 1.0,
            grid_refine: 1,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub artifacts: Vec<Artifact>,
    pub report: Option<VerifyReport>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.report.as_ref().is_none_or(|r| r.passed)
    }
}

pub fn run_scenario(
    cfg: &ScenarioConfig,
    command: Command,
    opts: &RunOptions,
) -> Result<RunOutcome, CliError> {
    match command {
        Command::Hierarchy => hierarchy_command(cfg),
        Command::Darboux => darboux_command(cfg),
        Command::Soliton => soliton_command(cfg),
        Command::Verify => {
            let report = verify(cfg, opts)?;
            Ok(RunOutcome {
                artifacts: vec![Artifact::json("report.json", &report)],
                report: Some(report),
            })
        }
    }
}

fn push_csv(
    cfg: &ScenarioConfig,
    out: &mut Vec<Artifact>,
    name: &str,
    contents: impl FnOnce() -> String,
) {
    if cfg.writes(Format::Csv) {
        out.push(Artifact {
            name: name.into(),
            contents: contents(),
        });
    }
}

fn push_json<T: Serialize>(cfg: &ScenarioConfig, out: &mut Vec<Artifact>, name: &str, value: &T) {
    if cfg.writes(Format::Json) {
        out.push(Artifact::json(name, value));
    }
}

/// Level fields `V_i` of per-time hierarchies, concatenated t-major.
fn level_fields(hfs: &[HierarchyFields], prefix: &str) -> Vec<(String, Vec<SquareMatrix>)> {
    let order = hfs[0].order();
    (0..=order)
        .map(|i| {
            let values = hfs
                .iter()
                .flat_map(|hf| hf.vs[i].slice(0).iter().cloned())
                .collect();
            (format!("{prefix}{i}"), values)
        })
        .collect()
}

fn csv_of(grid: &Grid, fields: &[(String, Vec<SquareMatrix>)]) -> String {
    let refs: Vec<(String, &[SquareMatrix])> = fields
        .iter()
        .map(|(n, v)| (n.clone(), v.as_slice()))
        .collect();
    matrix_csv(grid, &refs)
}

fn diagonals(m: &SquareMatrix) -> Vec<C64> {
    m.diagonal()
}

#[derive(Debug, Serialize)]
struct HierarchySummary {
    t: Vec<f64>,
    recurrence_residual: Vec<f64>,
    asymptotics: Vec<AsymptoticReport>,
}

fn build_hierarchies(
    cfg: &ScenarioConfig,
    p: &FieldGrid,
) -> Result<Vec<HierarchyFields>, CliError> {
    let (j, f, c) = (cfg.generator(), cfg.flow(), cfg.constants());
    p.grid
        .t_samples
        .iter()
        .map(|&t| build_hierarchy(p, &j, &f, &c, t).step("hierarchy"))
        .collect()
}

fn hierarchy_command(cfg: &ScenarioConfig) -> Result<RunOutcome, CliError> {
    let grid = cfg.grid();
    let p = cfg.potential_field(&grid);
    let hfs = build_hierarchies(cfg, &p)?;
    let summary = HierarchySummary {
        t: grid.t_samples.clone(),
        recurrence_residual: hfs
            .iter()
            .map(|hf| recurrence_residual(&p, hf))
            .collect::<nisakns_core::Result<_>>()
            .step("hierarchy residual")?,
        asymptotics: hfs.iter().map(asymptotic_check).collect(),
    };
    let mut artifacts = Vec::new();
    push_csv(cfg, &mut artifacts, "hierarchy.csv", || {
        let mut fields = vec![("p".to_string(), p.values().to_vec())];
        fields.extend(level_fields(&hfs, "v"));
        csv_of(&grid, &fields)
    });
    push_json(cfg, &mut artifacts, "hierarchy.json", &summary);
    Ok(RunOutcome {
        artifacts,
        report: None,
    })
}

/// Widens the soliton window so that every sample of `grid` lies in it.
fn spec_on(cfg: &ScenarioConfig, grid: &Grid) -> Option<SolitonSpec> {
    let mut spec = cfg.soliton_spec(grid.clone())?;
    let lo = grid
        .t_samples
        .iter()
        .copied()
        .fold(spec.t_window.0, f64::min);
    let hi = grid
        .t_samples
        .iter()
        .copied()
        .fold(spec.t_window.1, f64::max);
    spec.t_window = (lo, hi);
    Some(spec)
}

/// The dressed zero seed on one grid.
struct System {
    potential: FieldGrid,
    hierarchies: Vec<HierarchyFields>,
    seed: Vec<HierarchyFields>,
    frames: Vec<DarbouxFrame>,
}

fn system_on(cfg: &ScenarioConfig, grid: &Grid) -> Result<System, CliError> {
    if let Some(spec) = spec_on(cfg, grid) {
        let sys = dressed_system(&spec).step("darboux")?;
        return Ok(System {
            potential: sys.potential,
            hierarchies: sys.hierarchies,
            seed: sys.seed,
            frames: sys.frames,
        });
    }
    let Some(Seeding::Generic { lambda, mixing }) = &cfg.seeding else {
        return Err(CliError::Usage(
            "this command needs a [darboux] section".into(),
        ));
    };
    let (j, flow) = (cfg.generator(), cfg.flow());
    let paths: Vec<SpectralPath> = lambda
        .iter()
        .map(|&l| SpectralPath::auto(l, flow.clone()))
        .collect();
    let seed =
        TrivialSeed::new(j.clone(), flow, cfg.constants(), vec![paths.clone()]).step("seed")?;
    let frame = DarbouxFrame::build(
        &seed,
        &j,
        paths,
        mixing.clone(),
        grid,
        &Tolerances::default(),
    )
    .step("frame")?;
    let mut values = Vec::with_capacity(grid.nx * grid.nt());
    let mut hierarchies = Vec::with_capacity(grid.nt());
    let mut seeds = Vec::with_capacity(grid.nt());
    for (ti, &t) in grid.t_samples.iter().enumerate() {
        let seed_hf = seed.hierarchy(grid, t).step("seed hierarchy")?;
        let zero = vec![SquareMatrix::zeros(cfg.dim()); grid.nx];
        values.extend(dress_potential(&zero, &j, frame.s_slice(ti)).step("dress potential")?);
        let spectrum = frame.spectrum_at(t).step("spectrum")?;
        hierarchies
            .push(dress_hierarchy(&seed_hf, frame.s_slice(ti), &spectrum).step("dress hierarchy")?);
        seeds.push(seed_hf);
    }
    Ok(System {
        potential: FieldGrid::new(grid.clone(), cfg.dim(), values).step("dress potential")?,
        hierarchies,
        seed: seeds,
        frames: vec![frame],
    })
}

#[derive(Debug, Serialize)]
struct StepShift {
    step: usize,
    t: f64,
    spectrum: Vec<C64>,
    /// Diagonals of `β_0..β_n`.
    beta: Vec<Vec<C64>>,
}

#[derive(Debug, Serialize)]
struct DarbouxSummary {
    shifts: Vec<StepShift>,
    /// Diagonals of the seed constants `α - Σ β` per t sample.
    seed_constants: Vec<Vec<Vec<C64>>>,
    asymptotics: Vec<AsymptoticReport>,
}

fn darboux_command(cfg: &ScenarioConfig) -> Result<RunOutcome, CliError> {
    let grid = cfg.grid();
    let sys = system_on(cfg, &grid)?;
    let flow = cfg.flow();
    let mut shifts = Vec::new();
    for (step, frame) in sys.frames.iter().enumerate() {
        for &t in &grid.t_samples {
            let shift = frame.shift(&flow, cfg.order, t).step("beta shift")?;
            shifts.push(StepShift {
                step: step + 1,
                t,
                spectrum: frame.spectrum_at(t).step("spectrum")?,
                beta: shift.betas.iter().map(diagonals).collect(),
            });
        }
    }
    let summary = DarbouxSummary {
        shifts,
        seed_constants: sys
            .seed
            .iter()
            .map(|hf| hf.constants.alphas().iter().map(diagonals).collect())
            .collect(),
        asymptotics: sys.hierarchies.iter().map(asymptotic_check).collect(),
    };
    let mut artifacts = Vec::new();
    push_csv(cfg, &mut artifacts, "darboux.csv", || {
        let mut fields: Vec<(String, Vec<SquareMatrix>)> = sys
            .frames
            .iter()
            .enumerate()
            .map(|(k, f)| (format!("s{}", k + 1), f.s_field.values().to_vec()))
            .collect();
        fields.push(("p".into(), sys.potential.values().to_vec()));
        fields.extend(level_fields(&sys.hierarchies, "v"));
        csv_of(&grid, &fields)
    });
    push_json(cfg, &mut artifacts, "darboux.json", &summary);
    Ok(RunOutcome {
        artifacts,
        report: None,
    })
}

#[derive(Debug, Serialize)]
struct SliceSummary {
    t: f64,
    lambda0: f64,
    max_abs_u: f64,
    /// `u` at the sample closest to `x = 0`.
    x_near_zero: f64,
    u_near_zero: f64,
    closed_form_near_zero: f64,
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SolitonSummary {
    One {
        max_abs_difference: f64,
        slices: Vec<SliceSummary>,
    },
    Two {
        reduction_error: f64,
        det_h2_min: f64,
        det_h2_sign_constant: bool,
        max_abs_u: Vec<f64>,
    },
}

fn mkdv_spec(cfg: &ScenarioConfig, grid: &Grid) -> Result<SolitonSpec, CliError> {
    spec_on(cfg, grid).ok_or_else(|| {
        CliError::Usage("this command needs the MKdV seed (`kappa0` in [darboux])".into())
    })
}

fn soliton_command(cfg: &ScenarioConfig) -> Result<RunOutcome, CliError> {
    let grid = cfg.grid();
    let spec = mkdv_spec(cfg, &grid)?;
    let near = (0..grid.nx)
        .min_by(|&a, &b| grid.x(a).abs().total_cmp(&grid.x(b).abs()))
        .expect("non-empty grid");
    let (u, summary) = if spec.second_lambda.is_some() {
        let two = two_soliton(&spec).step("two-soliton")?;
        let max_abs_u = (0..grid.nt())
            .map(|ti| two.u.slice(ti).iter().map(|v| v.abs()).fold(0.0, f64::max))
            .collect();
        let summary = SolitonSummary::Two {
            reduction_error: two.reduction_error,
            det_h2_min: two.det_h2_min,
            det_h2_sign_constant: two.det_h2_sign_constant,
            max_abs_u,
        };
        (two.u, summary)
    } else {
        let one = one_soliton(&spec).step("one-soliton")?;
        let slices = grid
            .t_samples
            .iter()
            .enumerate()
            .map(|(ti, &t)| SliceSummary {
                t,
                lambda0: spec.lambda0_at(t),
                max_abs_u: one.u.slice(ti).iter().map(|v| v.abs()).fold(0.0, f64::max),
                x_near_zero: grid.x(near),
                u_near_zero: one.u.at(ti, near),
                closed_form_near_zero: one.closed_form.at(ti, near),
            })
            .collect();
        let summary = SolitonSummary::One {
            max_abs_difference: one.max_difference(),
            slices,
        };
        (one.u, summary)
    };
    let mut artifacts = Vec::new();
    push_csv(cfg, &mut artifacts, "u.csv", || scalar_csv(&u, "u"));
    push_json(cfg, &mut artifacts, "soliton.json", &summary);
    Ok(RunOutcome {
        artifacts,
        report: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    Max(f64),
    Range(f64, f64),
    /// Reported, not gated.
    Informational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: Limit,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, value: f64, limit: Limit, detail: String) -> Self {
        let passed = match limit {
            Limit::Max(tol) => value <= tol,
            Limit::Range(lo, hi) => value >= lo && value <= hi,
            Limit::Informational => true,
        };
        Self {
            name: name.into(),
            value,
            limit,
            passed,
            detail,
        }
    }
}

/// Residuals on nested grids and the fitted order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub name: String,
    pub nx: Vec<usize>,
    pub h: Vec<f64>,
    pub dt: Vec<f64>,
    pub residual: Vec<f64>,
    pub order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<Check>,
    pub studies: Vec<Study>,
    /// Term sizes of the expanded MKdV equation, when a soliton was checked.
    pub mkdv_terms: Option<Vec<TermRow>>,
}

fn scaled(t: &CheckTolerances, s: f64) -> CheckTolerances {
    CheckTolerances {
        algebraic: t.algebraic * s,
        recurrence: t.recurrence * s,
        constants: t.constants * s,
        similarity: t.similarity * s,
        zero_curvature: t.zero_curvature * s,
        governing: t.governing * s,
        edge: t.edge * s,
        dual_route: t.dual_route * s,
        mkdv_recurrence: t.mkdv_recurrence * s,
        reduction: t.reduction * s,
        ..*t
    }
}

/// Time step tied to the grid spacing in residual studies.
const DT_PER_H: f64 = 1.25;
/// Spacing of the five-point stencil for `S_t`.
const GOVERNING_DT: f64 = 2.5e-4;

fn sample_paths(cfg: &ScenarioConfig) -> Vec<SpectralPath> {
    [
        C64::new(0.3, 0.5),
        C64::new(-0.7, 0.0),
        C64::new(-0.4, -0.9),
    ]
    .iter()
    .map(|&l| SpectralPath::auto(l, cfg.flow()))
    .collect()
}

/// Twenty spectral values on a spiral that avoids the real axis.
fn governing_lambdas() -> Vec<C64> {
    (0..20)
        .map(|k| C64::from_polar(0.4 + 0.08 * k as f64, 0.7 + 2.4 * k as f64))
        .collect()
}

fn centre_time(cfg: &ScenarioConfig) -> f64 {
    cfg.t[cfg.t.len() / 2]
}

fn stencil_grid(cfg: &ScenarioConfig, nx: usize, dt: f64) -> Result<Grid, CliError> {
    let tc = centre_time(cfg);
    Grid::new(cfg.x_min, cfg.x_max, nx, vec![tc - dt, tc, tc + dt]).step("stencil grid")
}

fn zero_curvature_at(cfg: &ScenarioConfig, nx: usize) -> Result<(f64, f64, f64), CliError> {
    let h = (cfg.x_max - cfg.x_min) / (nx - 1) as f64;
    let dt = DT_PER_H * h;
    let grid = stencil_grid(cfg, nx, dt)?;
    let sys = system_on(cfg, &grid)?;
    let r = zero_curvature_residual(&sys.potential, &sys.hierarchies[1], &sample_paths(cfg), 1)
        .step("zero curvature")?;
    Ok((h, dt, r))
}

fn mkdv_at(
    cfg: &ScenarioConfig,
    nx: usize,
) -> Result<(f64, f64, nisakns_core::soliton::MkdvResidualReport), CliError> {
    let h = (cfg.x_max - cfg.x_min) / (nx - 1) as f64;
    let dt = DT_PER_H * h;
    let grid = stencil_grid(cfg, nx, dt)?;
    let one = one_soliton(&mkdv_spec(cfg, &grid)?).step("one-soliton")?;
    let report = mkdv_residual(&one.u).step("mkdv residual")?;
    Ok((h, dt, report))
}

fn refined_nx(nx: usize, level: usize) -> usize {
    (nx - 1) * (1 << level) + 1
}

fn study(name: &str, nxs: Vec<usize>, rows: Vec<(f64, f64, f64)>) -> Result<Study, CliError> {
    let h: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let residual: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let order = observed_order(&h, &residual).step("order fit")?;
    Ok(Study {
        name: name.into(),
        nx: nxs,
        h,
        dt: rows.iter().map(|r| r.1).collect(),
        residual,
        order,
    })
}

fn max_over<T>(items: &[T], f: impl Fn(&T) -> f64) -> f64 {
    items.iter().map(f).fold(0.0, f64::max)
}

/// Runs every check that applies to the scenario.
pub fn verify(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<VerifyReport, CliError> {
    if !(opts.tolerance_scale > 0.0 && opts.tolerance_scale.is_finite()) {
        return Err(CliError::Usage(format!(
            "--tolerance-scale must be a positive number, got {}",
            opts.tolerance_scale
        )));
    }
    let tol = scaled(&cfg.tolerances, opts.tolerance_scale);
    let order_band = Limit::Range(tol.order_min, tol.order_max);
    let grid = cfg.grid();
    let jm = cfg.generator().matrix();
    let mut checks = Vec::new();
    let mut studies = Vec::new();
    let mut mkdv_terms = None;

    let p = cfg.potential_field(&grid);
    let hfs = build_hierarchies(cfg, &p)?;
    let top = max_over(&hfs, |hf| {
        (0..grid.nx)
            .map(|k| (&jm.matmul(hf.v(hf.order(), k)) - &hf.v(hf.order(), k).matmul(&jm)).max_abs())
            .fold(0.0, f64::max)
    });
    checks.push(Check::new(
        "hierarchy_top_level",
        top,
        Limit::Max(tol.algebraic),
        "max |[J, V_n]| over the grid".into(),
    ));
    let mut rec = 0.0f64;
    for hf in &hfs {
        rec = rec.max(recurrence_residual(&p, hf).step("hierarchy residual")?);
    }
    checks.push(Check::new(
        "hierarchy_recurrence",
        rec,
        Limit::Max(tol.recurrence),
        "max |f_i J - V_i,x + [J, V_i-1] + [P, V_i]| over interior points".into(),
    ));
    let constants = cfg.constants();
    let recovered = max_over(&hfs, |hf| {
        asymptotic_check(hf)
            .levels
            .iter()
            .map(|l| (&l.recovered - constants.get(l.level)).max_abs())
            .fold(0.0, f64::max)
    });
    checks.push(Check::new(
        "hierarchy_constants",
        recovered,
        Limit::Max(tol.constants),
        "max |V_i(x_min) - f_i J x_min - alpha_i|".into(),
    ));

    if cfg.seeding.is_some() {
        let sys = system_on(cfg, &grid)?;

        let mut similarity = 0.0f64;
        for frame in &sys.frames {
            for (ti, &t) in grid.t_samples.iter().enumerate() {
                let target = char_poly_of_roots(&frame.spectrum_at(t).step("spectrum")?);
                for s in frame.s_slice(ti) {
                    let cp = s.char_poly();
                    for (a, b) in cp.iter().zip(&target) {
                        similarity = similarity.max((a - b).norm());
                    }
                }
            }
        }
        checks.push(Check::new(
            "similarity",
            similarity,
            Limit::Max(tol.similarity),
            "max coefficient gap between det(z - S) and the product over the prescribed spectrum"
                .into(),
        ));

        let diag = max_over(sys.potential.values(), SquareMatrix::max_abs_diagonal);
        checks.push(Check::new(
            "potential_diagonal",
            diag,
            Limit::Max(tol.algebraic),
            "max |diag P'|".into(),
        ));

        let recovered = max_over(&sys.hierarchies, |hf| {
            asymptotic_check(hf)
                .levels
                .iter()
                .map(|l| (&l.recovered - constants.get(l.level)).max_abs())
                .fold(0.0, f64::max)
        });
        checks.push(Check::new(
            "constant_recovery",
            recovered,
            Limit::Max(tol.constants),
            "dressed constants read off the left edge against the configured alpha".into(),
        ));

        let first = &sys.frames[0];
        let reports = grid
            .t_samples
            .iter()
            .map(|&t| asymptotic_s_check(first, t))
            .collect::<nisakns_core::Result<Vec<_>>>()
            .step("S asymptotics")?;
        checks.push(Check::new(
            "s_left_edge",
            max_over(&reports, |r| r.left_deviation),
            Limit::Max(tol.edge),
            "max |S(x_min) - Lambda|".into(),
        ));
        checks.push(Check::new(
            "s_right_edge",
            max_over(&reports, |r| r.right_deviation),
            Limit::Max(tol.edge),
            format!(
                "max |S(x_max) - D| with D the permuted eigenvalue diagonal; permutations {:?}",
                reports
                    .iter()
                    .map(|r| r.right_permutation.clone())
                    .collect::<Vec<_>>()
            ),
        ));
        if cfg.is_real() {
            let mut worst = 0.0f64;
            let mut parts = Vec::new();
            for r in &reports {
                let fitted = r.left_rate.unwrap_or(f64::NAN);
                let predicted = r
                    .predicted
                    .as_ref()
                    .and_then(|p| p.overall)
                    .unwrap_or(f64::NAN);
                let rel = (fitted - predicted).abs() / predicted.abs();
                worst = if rel.is_nan() {
                    f64::NAN
                } else {
                    worst.max(rel)
                };
                parts.push(format!(
                    "t = {}: fitted {fitted:.4}, predicted {predicted:.4}",
                    r.t
                ));
            }
            checks.push(Check::new(
                "s_left_rate",
                worst,
                Limit::Max(tol.rate_relative),
                format!(
                    "relative gap between fitted and predicted decay of S - Lambda; {}",
                    parts.join("; ")
                ),
            ));
        }

        let (_, _, zc) = zero_curvature_at(cfg, cfg.nx)?;
        checks.push(Check::new(
            "zero_curvature",
            zc,
            Limit::Max(tol.zero_curvature),
            format!(
                "dressed system at t = {} with dt = {DT_PER_H} h",
                centre_time(cfg)
            ),
        ));

        let tc = centre_time(cfg);
        let times: Vec<f64> = (-2..=2).map(|k| tc + GOVERNING_DT * k as f64).collect();
        let ggrid = Grid::new(cfg.x_min, cfg.x_max, cfg.nx, times).step("stencil grid")?;
        let gsys = system_on(cfg, &ggrid)?;
        let frame = &gsys.frames[0];
        let spectrum = frame.spectrum_at(tc).step("spectrum")?;
        let once =
            dress_hierarchy(&gsys.seed[2], frame.s_slice(2), &spectrum).step("dress hierarchy")?;
        let g = frame.g(&cfg.flow(), tc).step("g polynomial")?;
        let flow = cfg.flow();
        let lambdas = governing_lambdas();
        let mut gov = 0.0f64;
        for k in ggrid.interior().step_by(4) {
            let s = |ti: usize| frame.s_field.at(ti, k);
            let s_t = (&(&(s(0) - &s(1).scale(C64::new(8.0, 0.0)))
                + &s(3).scale(C64::new(8.0, 0.0)))
                - s(4))
            .scale(C64::new(1.0 / (12.0 * GOVERNING_DT), 0.0));
            let vs = gsys.seed[2].coefficients_at(k);
            let vps = once.coefficients_at(k);
            for &lam in &lambdas {
                gov = gov.max(governing_relation_residual(
                    &vs,
                    &vps,
                    s(2),
                    &s_t,
                    &flow,
                    &g,
                    lam,
                ));
            }
        }
        checks.push(Check::new(
            "governing_relation",
            gov,
            Limit::Max(tol.governing),
            format!("20 spectral values, S_t by five-point differences with dt = {GOVERNING_DT}"),
        ));

        if opts.grid_refine >= 2 {
            let nxs: Vec<usize> = (0..opts.grid_refine)
                .map(|l| refined_nx(cfg.nx, l))
                .collect();
            let rows = nxs
                .iter()
                .map(|&nx| zero_curvature_at(cfg, nx))
                .collect::<Result<Vec<_>, _>>()?;
            let s = study("zero_curvature", nxs, rows)?;
            checks.push(Check::new(
                "zero_curvature_order",
                s.order,
                order_band.clone(),
                format!("residuals {:?} on nx {:?}", s.residual, s.nx),
            ));
            studies.push(s);
        }
    }

    if let Some(spec) = spec_on(cfg, &grid) {
        let one = one_soliton(&SolitonSpec {
            second_lambda: None,
            ..spec.clone()
        })
        .step("one-soliton")?;
        checks.push(Check::new(
            "dual_route",
            one.max_difference(),
            Limit::Max(tol.dual_route),
            "max |u - 2 lambda0 sech 2 xi| for the single dressing".into(),
        ));

        let (_, _, report) = mkdv_at(cfg, cfg.nx)?;
        checks.push(Check::new(
            "mkdv_recurrence",
            report.recurrence,
            Limit::Max(tol.mkdv_recurrence),
            "evolution law of the recurrence applied to the 1-soliton".into(),
        ));
        checks.push(Check::new(
            "mkdv_expanded",
            report.expanded,
            Limit::Informational,
            "expanded MKdV equation applied to the 1-soliton; see mkdv_terms".into(),
        ));
        mkdv_terms = Some(report.terms);

        if opts.grid_refine >= 2 {
            let nxs: Vec<usize> = (0..opts.grid_refine)
                .map(|l| refined_nx(cfg.nx, l))
                .collect();
            let mut rec = Vec::new();
            let mut expanded = Vec::new();
            for &nx in &nxs {
                let (h, dt, r) = mkdv_at(cfg, nx)?;
                rec.push((h, dt, r.recurrence));
                expanded.push((h, dt, r.expanded));
            }
            let s = study("mkdv_recurrence", nxs.clone(), rec)?;
            checks.push(Check::new(
                "mkdv_recurrence_order",
                s.order,
                order_band.clone(),
                format!("residuals {:?} on nx {:?}", s.residual, s.nx),
            ));
            studies.push(s);
            let s = study("mkdv_expanded", nxs, expanded)?;
            checks.push(Check::new(
                "mkdv_expanded_order",
                s.order,
                Limit::Informational,
                format!("residuals {:?}", s.residual),
            ));
            studies.push(s);
        }

        if spec.second_lambda.is_some() {
            let two = two_soliton(&spec).step("two-soliton")?;
            checks.push(Check::new(
                "two_soliton_reduction",
                two.reduction_error,
                Limit::Max(tol.reduction),
                "max |p + q| of the twice-dressed potential".into(),
            ));
            checks.push(Check::new(
                "two_soliton_det_sign",
                if two.det_h2_sign_constant { 0.0 } else { 1.0 },
                Limit::Max(0.0),
                format!(
                    "1 when det H2 changes sign on the grid; min |det H2| = {:e}",
                    two.det_h2_min
                ),
            ));
            let nonfinite = two.u.u.iter().filter(|v| !v.is_finite()).count();
            checks.push(Check::new(
                "two_soliton_finite",
                nonfinite as f64,
                Limit::Max(0.0),
                "number of non-finite samples of u".into(),
            ));
        }
    }

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        passed,
        checks,
        studies,
        mkdv_terms,
    })
}
