//! Stage orchestration: each stage writes its reports under the output
//! directory and returns the checks it asserted. Diagnostic numbers never
//! decide the exit status.

use crate::config::{ConfigError, RunConfig};
use nslift_core::bounds::{estimate_mt, evaluate_phi_bounds, random_bump_probes, BoundConstants, MtEstimate, PhiReport};
use nslift_core::constraint_system::build_system;
use nslift_core::fixed_point::{
    admissibility_crossing, build_w1, check_assumption, g_map, iterate, w1_holder_constant, AdmissibilityReport, H1State,
    Status, COMPONENTS,
};
use nslift_core::fourier_symbol::{check_point, FreqPoint, C, XI_EPS};
use nslift_core::grid::{read_field, write_field, GridSpec, ScalarField};
use nslift_core::factorization::solve_one;
use nslift_core::oracles;
use nslift_core::potential::estimate_mk1;
use nslift_core::verifier::{assemble_solution, fixed_point_defect, ns_residuals, residual_fields, slice_extrema, RESIDUAL_MARGIN};
use nslift_core::w_tables::{PairMap, W1Fields};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};

pub const SYMBOL_RESIDUAL_TOL: f64 = 1e-9;
pub const SYMBOL_GAP_MIN: f64 = 1e6;
pub const BALL_TOL: f64 = 0.05;
pub const MIN_ORDER: f64 = 1.5;
pub const HEAT_CONSTANT_TOL: f64 = 0.01;
pub const HEAT_GAUSSIAN_TOL: f64 = 0.02;
pub const KERNEL_MASS_TOL: f64 = 1e-6;
pub const PHI_TOL: f64 = 1e-6;
pub const INEQ_RATIO_TOL: f64 = 1e-12;
pub const CROSSING_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    SymbolCheck,
    KernelCheck,
    Bounds,
    Run,
    Verify,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::SymbolCheck, Stage::KernelCheck, Stage::Bounds, Stage::Run, Stage::Verify];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::SymbolCheck => "symbol-check",
            Stage::KernelCheck => "kernel-check",
            Stage::Bounds => "bounds",
            Stage::Run => "run",
            Stage::Verify => "verify",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.name() == s.trim())
    }
}

#[derive(Debug)]
pub enum PipelineError {
    Config(String),
    Io(String),
    Compute(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Compute(_) => 2,
            PipelineError::Io(_) => 3,
        }
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Config(m) => write!(f, "config error: {m}"),
            PipelineError::Io(m) => write!(f, "i/o error: {m}"),
            PipelineError::Compute(m) => write!(f, "computation failed: {m}"),
        }
    }
}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError::Config(e.0)
    }
}

impl From<nslift_core::Error> for PipelineError {
    fn from(e: nslift_core::Error) -> Self {
        use nslift_core::Error as E;
        match e {
            E::Io(_) | E::Format(_) => PipelineError::Io(e.to_string()),
            E::Config(_) | E::InvalidParameter(_) => PipelineError::Config(e.to_string()),
            _ => PipelineError::Compute(e.to_string()),
        }
    }
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Io(e.to_string())
    }
}

impl From<csv::Error> for PipelineError {
    fn from(e: csv::Error) -> Self {
        PipelineError::Io(e.to_string())
    }
}

type PResult<T> = Result<T, PipelineError>;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.into(), passed, detail }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageOutcome {
    pub stage: Stage,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl StageOutcome {
    fn new(stage: Stage, checks: Vec<Check>) -> Self {
        StageOutcome { stage, passed: checks.iter().all(|c| c.passed), checks }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub stages: Vec<StageOutcome>,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything `run` needs from the bounds stage.
#[derive(Debug, Clone)]
pub struct BoundsBundle {
    pub mk1: f64,
    pub estimate: MtEstimate,
    pub phi: PhiReport,
    pub constants: BoundConstants,
    /// Admissibility of the forcing as configured.
    pub raw: AdmissibilityReport,
    pub crossing: f64,
    pub forcing_scale: f64,
    /// Admissibility after the optional rescaling.
    pub applied: AdmissibilityReport,
    pub forcing: Vec<ScalarField>,
    pub w1: W1Fields,
}

pub struct Pipeline {
    pub cfg: RunConfig,
    pub grid: GridSpec,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: usize,
    pub pairs: PairMap,
    config_text: String,
    artifacts: Vec<PathBuf>,
    bounds: Option<BoundsBundle>,
}

impl Pipeline {
    pub fn new(cfg: RunConfig, config_text: String, out: PathBuf, seed: u64, threads: usize) -> PResult<Self> {
        if threads == 0 {
            return Err(PipelineError::Config("--threads must be at least 1".into()));
        }
        let grid = cfg.grid_spec()?;
        Ok(Pipeline { cfg, grid, out, seed, threads, pairs: PairMap::default(), config_text, artifacts: Vec::new(), bounds: None })
    }

    pub fn from_path(config: &Path, out: Option<PathBuf>, seed: Option<u64>, threads: usize) -> PResult<Self> {
        let text = std::fs::read_to_string(config).map_err(|e| PipelineError::Config(format!("{}: {e}", config.display())))?;
        let cfg = RunConfig::load(config)?;
        let out = out
            .or_else(|| std::env::var_os("NSLIFT_OUT_DIR").map(PathBuf::from))
            .unwrap_or_else(|| {
                let d = &cfg.output.dir;
                if d.is_relative() {
                    config.parent().unwrap_or(Path::new(".")).join(d)
                } else {
                    d.clone()
                }
            });
        let seed = seed.unwrap_or(cfg.sweep.seed);
        Self::new(cfg, text, out, seed, threads)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> PResult<()> {
        let p = self.path(name);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&p, bytes)?;
        self.artifacts.push(p);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, v: &T) -> PResult<()> {
        let mut s = serde_json::to_string_pretty(v).map_err(|e| PipelineError::Io(e.to_string()))?;
        s.push('\n');
        self.write_bytes(name, s.as_bytes())
    }

    fn write_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> PResult<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| PipelineError::Io(e.to_string()))?;
        self.write_bytes(name, &bytes)
    }

    fn write_field(&mut self, name: &str, f: &ScalarField) -> PResult<()> {
        let p = self.path(name);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        write_field(&p, name, f)?;
        self.artifacts.push(p.clone());
        self.artifacts.push(p.with_extension("json"));
        Ok(())
    }

    /// Runs the stages in pipeline order and writes the manifest.
    pub fn run_stages(&mut self, stages: &[Stage]) -> PResult<Manifest> {
        std::fs::create_dir_all(&self.out)?;
        let mut order: Vec<Stage> = stages.to_vec();
        order.sort();
        order.dedup();
        let mut outcomes = Vec::new();
        for st in order {
            let o = match st {
                Stage::SymbolCheck => self.symbol_check()?,
                Stage::KernelCheck => self.kernel_check()?,
                Stage::Bounds => self.bounds_stage()?,
                Stage::Run => self.run_stage()?,
                Stage::Verify => self.verify_stage()?,
            };
            outcomes.push(o);
        }
        let mut artifacts = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.artifacts {
            if !seen.insert(p.clone()) {
                continue;
            }
            let bytes = std::fs::read(p)?;
            let rel = p.strip_prefix(&self.out).unwrap_or(p).to_string_lossy().replace('\\', "/");
            artifacts.push(Artifact { path: rel, sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
        }
        artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            config_sha256: sha256_hex(self.config_text.as_bytes()),
            seed: self.seed,
            threads: self.threads,
            stages: outcomes,
            artifacts,
        };
        let mut s = serde_json::to_string_pretty(&manifest).map_err(|e| PipelineError::Io(e.to_string()))?;
        s.push('\n');
        std::fs::write(self.path("manifest.json"), s)?;
        Ok(manifest)
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }

    fn frequencies(&self) -> PResult<Vec<[f64; 4]>> {
        if let Some(p) = &self.cfg.sweep.symbol_csv {
            let mut rd = csv::Reader::from_path(p).map_err(|e| PipelineError::Io(format!("{}: {e}", p.display())))?;
            let hdr = rd.headers()?.clone();
            let cols: Vec<usize> = ["xi0", "xi1", "xi2", "xi3"]
                .iter()
                .map(|n| hdr.iter().position(|h| h.trim() == *n).ok_or_else(|| PipelineError::Io(format!("{}: missing column {n}", p.display()))))
                .collect::<PResult<_>>()?;
            let mut out = Vec::new();
            for rec in rd.records() {
                let rec = rec?;
                let mut xi = [0.0; 4];
                for (k, &c) in cols.iter().enumerate() {
                    xi[k] = rec.get(c).unwrap_or("").trim().parse().map_err(|_| PipelineError::Io(format!("{}: bad number in row {:?}", p.display(), rec)))?;
                }
                out.push(xi);
            }
            return Ok(out);
        }
        let mut rng = self.rng(1);
        Ok((0..self.cfg.sweep.symbol_points).map(|_| random_frequency(&mut rng)).collect())
    }

    pub fn symbol_check(&mut self) -> PResult<StageOutcome> {
        let mats = build_system(self.cfg.physics.mu, self.cfg.physics.tau)?;
        let mut rng = self.rng(2);
        let forcings: Vec<[f64; 3]> = (0..100).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
        let structure = mats.structure_report(&forcings);
        let mut checks = vec![
            check("A Aeta = 0", structure.a_aeta_max == 0.0, format!("max |A Aeta| = {:e}", structure.a_aeta_max)),
            check("rank Aeta = 55", structure.rank_aeta == 55, format!("rank {}", structure.rank_aeta)),
            check("A X0 = (0, F)", structure.x0_max_err == 0.0, format!("max error {:e} over {} forcings", structure.x0_max_err, structure.trials)),
        ];
        let xs = self.frequencies()?;
        let mut rng = self.rng(3);
        let mut points = Vec::new();
        let (mut bad_rank, mut bad_gap, mut worst_y1, mut worst_eta, mut rowlist) = (0usize, 0usize, 0.0f64, 0.0f64, true);
        let mut asserted = 0usize;
        for xi in xs {
            let fhat: [C; 3] = std::array::from_fn(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let fp = FreqPoint::from_array(xi);
            let r = check_point(&fp, fhat, &mats);
            if fp.spatial_norm > XI_EPS {
                asserted += 1;
                bad_rank += usize::from(r.rank != 46);
                bad_gap += usize::from(!(r.gap >= SYMBOL_GAP_MIN));
                worst_y1 = worst_y1.max(r.residual_y1.unwrap_or(f64::INFINITY));
                worst_eta = worst_eta.max(r.residual_eta.map_or(f64::INFINITY, |e| e.iter().cloned().fold(0.0, f64::max)));
                rowlist &= r.rowlist_match;
            }
            points.push(json!({
                "xi": r.xi,
                "rank": r.rank,
                "residual_Y1": r.residual_y1,
                "residual_eta": r.residual_eta,
                "cond": r.cond,
                "gap": r.gap,
                "rowlist_match": r.rowlist_match,
            }));
        }
        checks.push(check("rank B = 46", bad_rank == 0, format!("{bad_rank} of {asserted} points off")));
        checks.push(check("singular gap", bad_gap == 0, format!("{bad_gap} of {asserted} points below {SYMBOL_GAP_MIN:e}")));
        checks.push(check("B Y1 = G", worst_y1 <= SYMBOL_RESIDUAL_TOL, format!("worst {worst_y1:e}")));
        checks.push(check("B eta_j = 0", worst_eta <= SYMBOL_RESIDUAL_TOL, format!("worst {worst_eta:e}")));
        checks.push(check("block = row list", rowlist, String::new()));
        self.write_json("symbol_check.json", &json!({ "structure": structure, "points": points }))?;
        Ok(StageOutcome::new(Stage::SymbolCheck, checks))
    }

    pub fn kernel_check(&mut self) -> PResult<StageOutcome> {
        let sw = self.cfg.sweep.clone();
        let ball: Vec<(usize, f64)> = sw.ball_resolutions.iter().map(|&n| Ok((n, oracles::poisson_ball(n)?))).collect::<PResult<_>>()?;
        let ball_rows = oracles::with_orders(&ball);
        let fact: Vec<oracles::FactorizationRow> =
            sw.factorization_resolutions.iter().map(|&n| oracles::factorization_row(n)).collect::<Result<_, _>>()?;
        let series = |f: fn(&oracles::FactorizationRow) -> f64| oracles::with_orders(&fact.iter().map(|r| (r.n_space, f(r))).collect::<Vec<_>>());
        let composite = series(|r| r.composite_rel);
        let poisson = series(|r| r.poisson_rel);
        let heat = series(|r| r.heat_rel);
        let hc = oracles::heat_constant(sw.heat_resolution, 2.5)?;
        let hg = oracles::heat_gaussian(sw.heat_resolution)?;
        let hm = oracles::kernel_mass_error(sw.heat_resolution);

        let last_order = |rows: &[oracles::ConvergenceRow]| rows.last().and_then(|r| r.order).unwrap_or(f64::NAN);
        let ball_at = ball_rows.iter().find(|r| r.resolution == 33).or(ball_rows.last()).expect("at least two resolutions");
        let checks = vec![
            check("ball centre error", ball_at.residual <= BALL_TOL, format!("{:e} at {}^3", ball_at.residual, ball_at.resolution)),
            check("ball refinement order", last_order(&ball_rows) >= MIN_ORDER, format!("{:.3}", last_order(&ball_rows))),
            check("heat constant source", hc <= HEAT_CONSTANT_TOL, format!("{hc:e}")),
            check("heat gaussian source", hg <= HEAT_GAUSSIAN_TOL, format!("{hg:e}")),
            check("heat kernel mass", hm <= KERNEL_MASS_TOL, format!("{hm:e}")),
            check("factorization composite order", last_order(&composite) >= MIN_ORDER, format!("{:.3}", last_order(&composite))),
            check("factorization poisson order", last_order(&poisson) >= MIN_ORDER, format!("{:.3}", last_order(&poisson))),
            check("factorization heat order", last_order(&heat) >= MIN_ORDER, format!("{:.3}", last_order(&heat))),
        ];
        self.write_csv("kernel_poisson.csv", &ball_rows)?;
        self.write_csv("kernel_factorization.csv", &composite)?;
        self.write_json(
            "kernel_check.json",
            &json!({
                "poisson_ball": ball_rows,
                "heat": { "resolution": sw.heat_resolution, "constant_rel_err": hc, "gaussian_rel_err": hg, "mass_err": hm },
                "factorization": fact,
                "factorization_orders": { "composite": composite, "poisson": poisson, "heat": heat },
            }),
        )?;
        Ok(StageOutcome::new(Stage::KernelCheck, checks))
    }

    /// Computes (once) the bound constants and the forcing scaling.
    pub fn bounds_bundle(&mut self) -> PResult<&BoundsBundle> {
        if self.bounds.is_none() {
            let b = self.compute_bounds()?;
            self.bounds = Some(b);
        }
        Ok(self.bounds.as_ref().expect("just set"))
    }

    fn compute_bounds(&self) -> PResult<BoundsBundle> {
        let (mu, tau) = (self.cfg.physics.mu, self.cfg.physics.tau);
        let omega = self.cfg.omega;
        let g = self.grid;
        let mk1 = estimate_mk1(&g);
        let probes = random_bump_probes(&g, self.cfg.sweep.probes, self.seed);
        let estimate = estimate_mt(&probes, mu, tau, mk1, g.t_final, &self.pairs)?;
        let phi = evaluate_phi_bounds(g.t_final)?;
        let forcing0 = self.cfg.forcing_spec().fields(&g)?;
        let w1_0 = build_w1(&forcing0, mu, tau)?;
        let assemble = |c1: f64| BoundConstants::assemble(omega.theta, omega.alpha, omega.m, omega.c, c1, mk1, &estimate, g.diameter());
        let c1_0 = w1_holder_constant(&w1_0, &self.pairs, omega.alpha)?;
        let constants0 = assemble(c1_0)?;
        let raw = check_assumption(&w1_0, &constants0, &self.pairs)?;
        let crossing = admissibility_crossing(&w1_0, &constants0, &self.pairs)?;
        let fraction = self.cfg.forcing.as_ref().and_then(|f| f.admissible_fraction);
        let forcing_scale = match fraction {
            Some(a) if crossing.is_finite() => a * raw.critical_scale,
            _ => 1.0,
        };
        let (forcing, w1) = if forcing_scale == 1.0 {
            (forcing0, w1_0)
        } else {
            let f: Vec<ScalarField> = forcing0.iter().map(|x| x.scale(forcing_scale)).collect();
            (f, w1_0.scaled(forcing_scale))
        };
        let constants = assemble(w1_holder_constant(&w1, &self.pairs, omega.alpha)?)?;
        let applied = check_assumption(&w1, &constants, &self.pairs)?;
        Ok(BoundsBundle { mk1, estimate, phi, constants, raw, crossing, forcing_scale, applied, forcing, w1 })
    }

    pub fn bounds_stage(&mut self) -> PResult<StageOutcome> {
        let b = self.bounds_bundle()?.clone();
        let odd_zero = b.phi.entries[2..].iter().all(|e| e.samples.iter().all(|s| s.numeric == 0.0 && s.closed_form == 0.0));
        let ratio = b.applied.ineq_ratio;
        let crossing_rel = if b.raw.critical_scale.is_finite() {
            ((b.crossing - b.raw.critical_scale) / b.raw.critical_scale).abs()
        } else if b.crossing.is_infinite() {
            0.0
        } else {
            f64::INFINITY
        };
        let checks = vec![
            check("phi3..phi5 vanish", odd_zero, String::new()),
            check("phi closed forms vs quadrature", b.phi.max_rel_err <= PHI_TOL, format!("max rel err {:e}", b.phi.max_rel_err)),
            check("phi boundedness discrepancy flagged", b.phi.boundedness_discrepancy, String::new()),
            check(
                "inequality on M",
                b.applied.ineq_holds && (1.0 - INEQ_RATIO_TOL..=1.0).contains(&ratio),
                format!("LHS/RHS = {ratio:.17}"),
            ),
            check("admissibility crossing", crossing_rel <= CROSSING_TOL, format!("relative gap {crossing_rel:e}")),
        ];
        let phi_constants = json!({
            "mp": b.constants.mp, "mpp": b.constants.mpp, "mppp": b.constants.mppp,
        });
        self.write_json(
            "bounds.json",
            &json!({
                "constants": b.constants,
                "mt_estimate": b.estimate,
                "phi": b.phi,
                "phi_constants_used": phi_constants,
                "admissibility_as_configured": b.raw,
                "crossing_bisection": finite_or_null(b.crossing),
                "forcing_scale": b.forcing_scale,
                "admissibility_applied": b.applied,
            }),
        )?;
        Ok(StageOutcome::new(Stage::Bounds, checks))
    }

    pub fn run_stage(&mut self) -> PResult<StageOutcome> {
        let (mu, tau) = (self.cfg.physics.mu, self.cfg.physics.tau);
        let b = self.bounds_bundle()?.clone();
        let icfg = self.cfg.iteration_config(b.constants.m.value, b.constants.c.value);
        let res = iterate(&H1State::zeros(&self.grid), &b.w1, &icfg, mu, tau, &self.pairs)?;
        let defect = fixed_point_defect(&res.h1, &res.g_final)?;
        let rows: Vec<IterRow> = res
            .report
            .records
            .iter()
            .map(|r| IterRow { iter: r.iter, sup_norm: r.sup_norm, holder_quotient: r.holder_quotient, change: r.change, admissible: r.admissible })
            .collect();
        self.write_csv("iterations.csv", &rows)?;
        for (j, c) in res.h1.comps.iter().enumerate() {
            self.write_field(&format!("fields/h1_{}.bin", j + 1), c)?;
        }
        for (j, c) in res.h1.comps.iter().enumerate() {
            let h2 = if c.values.iter().all(|v| *v == 0.0) { ScalarField::zeros(&self.grid) } else { solve_one(c, mu).1 };
            self.write_field(&format!("fields/h2_{}.bin", j + 1), &h2)?;
        }
        for (j, f) in b.forcing.iter().enumerate() {
            self.write_field(&format!("fields/forcing_{}.bin", j + 1), f)?;
        }
        self.write_json(
            "run.json",
            &json!({
                "status": res.report.status,
                "iterations": res.report.iterations,
                "records": res.report.records,
                "fixed_point_defect": defect,
                "final_sup_norm": res.h1.sup_norm(),
                "m_bound": b.constants.m,
                "c_bound": b.constants.c,
                "forcing_scale": b.forcing_scale,
                "lambda": icfg.lambda,
            }),
        )?;
        let mut checks = vec![check(
            "iteration records finite or divergence reported",
            res.report.status == Status::Diverged || res.report.records.iter().all(|r| r.sup_norm.is_finite() && r.change.is_finite()),
            format!("{:?} after {} iterations", res.report.status, res.report.iterations),
        )];
        if b.forcing.iter().all(|f| f.values.iter().all(|v| *v == 0.0)) {
            checks.push(check(
                "zero forcing converges to zero at step 1",
                res.report.status == Status::Converged && res.report.iterations == 1 && res.h1.sup_norm() == 0.0,
                format!("{:?} after {}", res.report.status, res.report.iterations),
            ));
        }
        Ok(StageOutcome::new(Stage::Run, checks))
    }

    pub fn verify_stage(&mut self) -> PResult<StageOutcome> {
        let (mu, tau) = (self.cfg.physics.mu, self.cfg.physics.tau);
        let read = |name: String| -> PResult<ScalarField> {
            let p = self.path(&name);
            read_field(&p).map_err(|e| PipelineError::Io(format!("{}: {e}", p.display())))
        };
        let h1 = H1State::new((1..=COMPONENTS).map(|j| read(format!("fields/h1_{j}.bin"))).collect::<PResult<_>>()?)?;
        let forcing: Vec<ScalarField> = (1..=3).map(|j| read(format!("fields/forcing_{j}.bin"))).collect::<PResult<_>>()?;
        let w1 = build_w1(&forcing, mu, tau)?;
        let out = g_map(&h1, &w1, mu, tau, &self.pairs)?;
        let defect = fixed_point_defect(&h1, &out.g)?;
        let sol = assemble_solution(&w1, &out.w2)?;
        let report = ns_residuals(&sol, &forcing, mu, tau, defect)?;
        let fields = residual_fields(&sol, &forcing, mu, tau)?;
        let extrema = slice_extrema(&fields, RESIDUAL_MARGIN);
        for (j, u) in sol.u.iter().enumerate() {
            self.write_field(&format!("fields/u_{}.bin", j + 1), u)?;
        }
        self.write_field("fields/p.bin", &sol.p)?;
        self.write_json(
            "residuals.json",
            &json!({
                "report": report,
                "u_sup": [sol.u[0].sup_norm(), sol.u[1].sup_norm(), sol.u[2].sup_norm()],
                "p_sup": sol.p.sup_norm(),
                "diagnostic_only": true,
            }),
        )?;
        self.write_csv("residual_extrema.csv", &extrema)?;
        let mut checks = vec![check("report complete and finite", report.is_finite(), String::new())];
        let zero_in = h1.sup_norm() == 0.0 && forcing.iter().all(|f| f.sup_norm() == 0.0);
        if zero_in {
            let all_zero = report.max_residual() == 0.0
                && report.fixed_point_defect.iter().all(|v| *v == 0.0)
                && sol.u.iter().chain([&sol.p]).all(|f| f.sup_norm() == 0.0);
            checks.push(check("zero data gives zero solution and residuals", all_zero, format!("max residual {:e}", report.max_residual())));
        }
        Ok(StageOutcome::new(Stage::Verify, checks))
    }
}

#[derive(Debug, Serialize)]
struct IterRow {
    iter: usize,
    sup_norm: f64,
    holder_quotient: f64,
    change: f64,
    admissible: bool,
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

/// Time frequency uniform in `[-10, 10]`, spatial direction uniform on the
/// sphere, spatial norm log-uniform in `[0.1, 10]`.
pub fn random_frequency(rng: &mut impl Rng) -> [f64; 4] {
    let dir = loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-3 && n <= 1.0 {
            break v.map(|x| x / n);
        }
    };
    let norm = 10f64.powf(rng.gen_range(-1.0..1.0));
    [rng.gen_range(-10.0..10.0), norm * dir[0], norm * dir[1], norm * dir[2]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(Stage::parse(s.name()), Some(s));
        }
        assert_eq!(Stage::parse("nope"), None);
    }

    #[test]
    fn random_frequencies_respect_the_norm_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let xi = random_frequency(&mut rng);
            let n = (xi[1] * xi[1] + xi[2] * xi[2] + xi[3] * xi[3]).sqrt();
            assert!((0.1 - 1e-12..=10.0 + 1e-12).contains(&n));
        }
    }

    #[test]
    fn hex_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(PipelineError::Config(String::new()).exit_code(), 1);
        assert_eq!(PipelineError::Compute(String::new()).exit_code(), 2);
        assert_eq!(PipelineError::Io(String::new()).exit_code(), 3);
        assert_eq!(PipelineError::from(nslift_core::Error::EmptyProbeSet).exit_code(), 2);
    }
}
