//! Initial data, parameter sweeps toward the three limits (Yosida, Robin to
//! Dirichlet, double obstacle) and the spinodal scenario.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts;
use crate::config::RunConfig;
use crate::diagnostics::{
    check_run, l2_distances, Recorder, RunChecks, TimeSeriesRecord, Violation,
};
use crate::error::{Error, Result};
use crate::grid::{BulkField, Grid, SurfField};
use crate::model::PhaseState;
use crate::potentials::{f0, Potential};
use crate::stepper::{run, Trajectory};

/// Identifier of the noise generator, stored in configs.
pub const NOISE_GENERATOR: &str = "chacha20-rand0.8-uniform-pm1";

fn default_generator() -> String {
    NOISE_GENERATOR.into()
}

fn default_plateau() -> f64 {
    0.9
}

fn default_interface() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Constant {
        m: f64,
        m_surf: f64,
    },
    /// Uniform noise around exact means. `amplitude` is the sup-norm of the
    /// fluctuation.
    SeededNoise {
        mean_bulk: f64,
        mean_surf: f64,
        amplitude: f64,
        seed: u64,
        #[serde(default = "default_generator")]
        generator: String,
    },
    /// One phase in a band `|x − position| < width/2` (periodic in `x`),
    /// the other outside, with `tanh` interfaces. The boundary carries the
    /// trace.
    TwoPhaseBand {
        position: f64,
        width: f64,
        #[serde(default = "default_plateau")]
        plateau: f64,
        #[serde(default = "default_interface")]
        interface: f64,
    },
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData::SeededNoise {
            mean_bulk: 0.0,
            mean_surf: 0.0,
            amplitude: 0.05,
            seed: 42,
            generator: default_generator(),
        }
    }
}

impl InitialData {
    /// Semantic problems as `(path, message)`. `interior` demands values
    /// strictly inside `(−1, 1)`, as exact singular potentials do.
    pub fn issues(&self, interior: bool) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut check = |ok: bool, key: &str, msg: String| {
            if !ok {
                out.push((format!("init.{key}"), msg));
            }
        };
        let open = |m: f64| m > -1.0 && m < 1.0;
        match self {
            InitialData::Constant { m, m_surf } => {
                check(open(*m), "m", format!("mean must lie in (-1, 1), got {m}"));
                check(
                    open(*m_surf),
                    "m_surf",
                    format!("mean must lie in (-1, 1), got {m_surf}"),
                );
            }
            InitialData::SeededNoise {
                mean_bulk,
                mean_surf,
                amplitude,
                generator,
                ..
            } => {
                check(
                    open(*mean_bulk),
                    "mean_bulk",
                    format!("mean must lie in (-1, 1), got {mean_bulk}"),
                );
                check(
                    open(*mean_surf),
                    "mean_surf",
                    format!("mean must lie in (-1, 1), got {mean_surf}"),
                );
                check(
                    *amplitude >= 0.0 && amplitude.is_finite(),
                    "amplitude",
                    format!("amplitude must be >= 0, got {amplitude}"),
                );
                if interior {
                    // The bulk interior is shifted by at most |mean_bulk − mean_surf| beyond the bulk mean.
                    let reach = mean_bulk.abs().max(mean_surf.abs())
                        + (mean_bulk - mean_surf).abs()
                        + amplitude;
                    check(
                        reach < 1.0,
                        "amplitude",
                        format!("means plus amplitude reach {reach}, outside (-1, 1)"),
                    );
                }
                check(
                    generator == NOISE_GENERATOR,
                    "generator",
                    format!("unknown generator `{generator}`, expected `{NOISE_GENERATOR}`"),
                );
            }
            InitialData::TwoPhaseBand {
                width,
                plateau,
                interface,
                position,
            } => {
                check(
                    position.is_finite(),
                    "position",
                    format!("position must be finite, got {position}"),
                );
                check(
                    *width > 0.0,
                    "width",
                    format!("width must be > 0, got {width}"),
                );
                check(
                    *plateau > 0.0 && *plateau < 1.0,
                    "plateau",
                    format!("plateau must lie in (0, 1), got {plateau}"),
                );
                check(
                    *interface > 0.0,
                    "interface",
                    format!("interface must be > 0, got {interface}"),
                );
            }
        }
        out
    }
}

/// Zero-mean fluctuation of sup-norm `amplitude` from uniform draws.
fn rescaled(raw: &mut [f64], weights: &[f64], amplitude: f64) {
    let total: f64 = weights.iter().sum();
    let mean = raw.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total;
    raw.iter_mut().for_each(|v| *v -= mean);
    let peak = raw.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let scale = if peak > 0.0 { amplitude / peak } else { 0.0 };
    raw.iter_mut().for_each(|v| *v *= scale);
}

/// Fields at `t = 0` for an initial-data descriptor.
///
/// Seeded noise draws the boundary values first, then the interior rows.
/// Ring rows of `φ` copy `ψ`; the interior is shifted so that `⟨φ⟩_Ω` equals
/// `mean_bulk`.
pub fn generate(g: &Grid, init: &InitialData) -> Result<PhaseState> {
    let issues = init.issues(false);
    if let Some((path, msg)) = issues.first() {
        return Err(Error::InvalidParameter(format!("{path}: {msg}")));
    }
    match *init {
        InitialData::Constant { m, m_surf } => Ok(PhaseState::constant(g, m, m_surf)),
        InitialData::SeededNoise {
            mean_bulk,
            mean_surf,
            amplitude,
            seed,
            ..
        } => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let ns = g.surf_len();
            let mut surf: Vec<f64> = (0..ns).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            rescaled(&mut surf, &vec![1.0; ns], amplitude);
            surf.iter_mut().for_each(|v| *v += mean_surf);
            let psi = SurfField::from_vec(g.nx(), surf)?;

            let (nx, ny) = (g.nx(), g.ny());
            let mut interior: Vec<f64> = (0..nx * (ny - 2))
                .map(|_| rng.gen_range(-1.0..=1.0))
                .collect();
            let weights: Vec<f64> = (1..ny - 1)
                .flat_map(|j| std::iter::repeat_n(g.bulk_weight(j), nx))
                .collect();
            rescaled(&mut interior, &weights, amplitude);

            let mut phi = g.bulk_zeros();
            g.set_trace(&mut phi, &psi)?;
            let ring_mass = g.integrate_bulk(&phi)?;
            let interior_measure: f64 = weights.iter().sum();
            let shift = (mean_bulk * g.bulk_measure() - ring_mass) / interior_measure;
            for j in 1..ny - 1 {
                let src = &interior[(j - 1) * nx..j * nx];
                for (dst, v) in phi.row_mut(j).iter_mut().zip(src) {
                    *dst = v + shift;
                }
            }
            PhaseState::new(g, phi, psi, 0.0)
        }
        InitialData::TwoPhaseBand {
            position,
            width,
            plateau,
            interface,
        } => {
            let lx = g.lx();
            let profile = |x: f64| {
                let d = (x - position).rem_euclid(lx);
                let dist = d.min(lx - d);
                plateau * ((0.5 * width - dist) / interface).tanh()
            };
            let phi: BulkField = g.bulk_from_fn(|x, _| profile(x));
            let psi = g.trace(&phi)?;
            PhaseState::new(g, phi, psi, 0.0)
        }
    }
}

/// Parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "K")]
    RobinK,
    #[serde(rename = "theta")]
    Theta,
    #[serde(rename = "yosida_eps")]
    YosidaEps,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::RobinK => "K",
            SweepParam::Theta => "theta",
            SweepParam::YosidaEps => "yosida_eps",
        }
    }

    /// Directory name of one sweep member.
    pub fn member_dir(self, value: f64) -> String {
        format!("{}={value:?}", self.name())
    }
}

/// A base run and the values of one parameter, strictly decreasing toward
/// the limit. All members share grid, time schedule and initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let sw = cfg
            .sweep
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("sweep: section missing".into()))?;
        let spec = SweepSpec {
            base: cfg.clone(),
            param: sw.param,
            values: sw.values.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let mut cfg = self.base.clone();
        cfg.sweep = Some(crate::config::SweepConfig {
            param: self.param,
            values: self.values.clone(),
        });
        let issues = cfg.issues();
        if let Some(i) = issues.first() {
            return Err(Error::InvalidParameter(i.to_string()));
        }
        for &v in &self.values {
            let issues = self.member(v).issues();
            if let Some(i) = issues.first() {
                return Err(Error::InvalidParameter(format!(
                    "{}: {i}",
                    self.param.member_dir(v)
                )));
            }
        }
        Ok(())
    }

    pub fn member(&self, value: f64) -> RunConfig {
        self.base.with_param(self.param, value)
    }
}

/// One completed sweep member.
#[derive(Debug, Clone)]
pub struct MemberRun {
    pub value: f64,
    pub run_id: String,
    pub records: Vec<TimeSeriesRecord>,
    pub snapshots: Vec<PhaseState>,
    pub trajectory: Trajectory,
    pub violations: Vec<Violation>,
    pub final_energy: f64,
    pub min_separation: f64,
    pub mass_drift: f64,
}

/// Max-over-snapshot L² distances between two members.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Distance {
    pub bulk: f64,
    pub surf: f64,
    /// `max_t (‖·‖²_Ω + ‖·‖²_Γ)^{1/2}`.
    pub combined: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub param: SweepParam,
    pub members: Vec<MemberRun>,
    /// Distance from member `k` to member `k + 1`.
    pub pairwise: Vec<Distance>,
    /// Distance from each member to the last one.
    pub to_last: Vec<Distance>,
}

impl SweepReport {
    pub const SUMMARY_HEADER: &'static str =
        "param_value,run_id,final_energy,min_separation,mass_drift,pairwise_dist_to_next";

    /// Summary CSV. `pairwise_dist_to_next` is the combined distance, empty
    /// on the last row.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(Self::SUMMARY_HEADER);
        out.push('\n');
        for (k, m) in self.members.iter().enumerate() {
            let next = self
                .pairwise
                .get(k)
                .map(|d| format!("{:e}", d.combined))
                .unwrap_or_default();
            out.push_str(&format!(
                "{:?},{},{:e},{:e},{:e},{}\n",
                m.value, m.run_id, m.final_energy, m.min_separation, m.mass_drift, next
            ));
        }
        out
    }

    pub fn violations(&self) -> impl Iterator<Item = (&MemberRun, &Violation)> {
        self.members
            .iter()
            .flat_map(|m| m.violations.iter().map(move |v| (m, v)))
    }
}

pub fn snapshot_distance(g: &Grid, a: &[PhaseState], b: &[PhaseState]) -> Result<Distance> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InsufficientData(format!(
            "snapshot counts differ or are empty: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut d = Distance {
        bulk: 0.0,
        surf: 0.0,
        combined: 0.0,
    };
    for (x, y) in a.iter().zip(b) {
        let (db, ds) = l2_distances(g, x, y)?;
        d.bulk = d.bulk.max(db);
        d.surf = d.surf.max(ds);
        d.combined = d.combined.max(db.hypot(ds));
    }
    Ok(d)
}

/// Thread cap from `BSCH_THREADS`; `None` when unset or invalid.
pub fn thread_cap() -> Option<usize> {
    std::env::var("BSCH_THREADS")
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
}

/// Per-run invariants a config implies.
pub fn run_checks(cfg: &RunConfig) -> RunChecks {
    let singular = cfg.model.potential.is_singular()
        || cfg.model.potential_surf.is_some_and(|p| p.is_singular());
    RunChecks {
        separated: singular && cfg.model.yosida_eps.is_none(),
        ..RunChecks::default()
    }
}

/// Runs one configuration in memory, optionally writing its run directory.
pub fn run_member(
    cfg: &RunConfig,
    value: f64,
    run_id: String,
    dir: Option<&Path>,
) -> Result<MemberRun> {
    let g = cfg.grid()?;
    let p = cfg.params()?;
    let scfg = cfg.stepper()?;
    let s0 = generate(&g, &cfg.init)?;
    let mut rec = Recorder::new(&g, &p);
    let traj = run(
        &g,
        &p,
        &scfg,
        &s0,
        cfg.time.t_end,
        &cfg.run_options(),
        &mut rec,
    )?;
    if let Some(dir) = dir {
        artifacts::write_run_dir(dir, cfg, &rec)?;
    }
    let violations = check_run(&rec.records, run_checks(cfg));
    let first = rec.records[0];
    let mass_drift = rec.records.iter().fold(0.0f64, |a, r| {
        a.max((r.mass_bulk - first.mass_bulk).abs())
            .max((r.mass_surf - first.mass_surf).abs())
    });
    let min_separation = rec
        .records
        .iter()
        .map(|r| r.min_separation())
        .fold(f64::INFINITY, f64::min);
    let final_energy = rec.records.last().map_or(f64::NAN, |r| r.energy.total);
    Ok(MemberRun {
        value,
        run_id,
        records: rec.records,
        snapshots: rec.snapshots,
        trajectory: traj,
        violations,
        final_energy,
        min_separation,
        mass_drift,
    })
}

/// Runs every member, in parallel up to `BSCH_THREADS`, and compares
/// consecutive members on the shared snapshot times. With `out`, member `v`
/// writes to `out/<param>=<v>/` and the summary goes to `out/summary.csv`.
pub fn run_sweep(spec: &SweepSpec, out: Option<&Path>) -> Result<SweepReport> {
    spec.validate()?;
    let g = spec.base.grid()?;
    let job = |(k, &v): (usize, &f64)| -> Result<MemberRun> {
        let name = spec.param.member_dir(v);
        let dir = out.map(|o| o.join(&name));
        run_member(&spec.member(v), v, format!("run{k:02}"), dir.as_deref()).map_err(|e| {
            Error::SweepMember {
                label: name,
                source: Box::new(e),
            }
        })
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let results: Vec<Result<MemberRun>> =
        pool.install(|| spec.values.par_iter().enumerate().map(job).collect());
    let members = results.into_iter().collect::<Result<Vec<_>>>()?;

    let pairwise = members
        .windows(2)
        .map(|w| snapshot_distance(&g, &w[0].snapshots, &w[1].snapshots))
        .collect::<Result<Vec<_>>>()?;
    let last = members.last().expect("validated sweeps are non-empty");
    let to_last = members
        .iter()
        .map(|m| snapshot_distance(&g, &m.snapshots, &last.snapshots))
        .collect::<Result<Vec<_>>>()?;
    let report = SweepReport {
        param: spec.param,
        members,
        pairwise,
        to_last,
    };
    if let Some(o) = out {
        std::fs::create_dir_all(o)?;
        std::fs::write(o.join("summary.csv"), report.summary_csv())?;
        if spec.base.output.emit_plots {
            std::fs::write(o.join("plots.gp"), artifacts::sweep_plot_script(spec.param))?;
        }
    }
    Ok(report)
}

/// Readouts of one logarithmic run against the double-obstacle limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObstacleReport {
    pub theta: f64,
    /// `‖Θ f0(φ)‖_{L²(Ω×(0,T))}`, trapezoidal in time over the snapshots.
    pub xi_l2: f64,
    pub max_abs_phi: f64,
    /// `max |φ| ≤ 1 + 1e−12`.
    pub sup_bound_holds: bool,
    /// Nodes within `1e−3` of `±1` over all snapshots.
    pub near_contact: usize,
    /// Near-contact nodes where `ξ` lies in the subdifferential of the
    /// indicator at the nearby endpoint.
    pub sign_holds: usize,
    /// `sign_holds / near_contact`; `None` without near-contact nodes.
    pub sign_fraction: Option<f64>,
}

pub const NEAR_CONTACT_BAND: f64 = 1e-3;

pub fn obstacle_limit_checks(
    g: &Grid,
    potential: &Potential,
    snapshots: &[PhaseState],
) -> Result<ObstacleReport> {
    let Potential::Logarithmic { theta, .. } = *potential else {
        return Err(Error::KindMismatch(format!(
            "obstacle checks need a logarithmic potential, got {potential:?}"
        )));
    };
    let mut sq = Vec::with_capacity(snapshots.len());
    let mut max_abs_phi = 0.0f64;
    let mut near_contact = 0;
    let mut sign_holds = 0;
    for s in snapshots {
        let xi = s.phi.map(|r| theta * f0(r));
        sq.push(g.inner_bulk(&xi, &xi)?);
        max_abs_phi = max_abs_phi.max(s.phi.max_abs());
        for (&r, &x) in s.phi.as_slice().iter().zip(xi.as_slice()) {
            if r >= 1.0 - NEAR_CONTACT_BAND {
                near_contact += 1;
                sign_holds += usize::from(x >= 0.0);
            } else if r <= -1.0 + NEAR_CONTACT_BAND {
                near_contact += 1;
                sign_holds += usize::from(x <= 0.0);
            }
        }
    }
    let mut integral = 0.0;
    for k in 1..snapshots.len() {
        integral += 0.5 * (snapshots[k].t - snapshots[k - 1].t) * (sq[k] + sq[k - 1]);
    }
    Ok(ObstacleReport {
        theta,
        xi_l2: integral.sqrt(),
        max_abs_phi,
        sup_bound_holds: max_abs_phi <= 1.0 + 1e-12,
        near_contact,
        sign_holds,
        sign_fraction: (near_contact > 0).then(|| sign_holds as f64 / near_contact as f64),
    })
}

/// Spinodal decomposition from small noise around zero mean on the default
/// 64×32 strip, `dt = 1e−3` up to `t = 2`.
pub fn spinodal_scenario(seed: u64, k: f64, potential: Potential) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.model.k = k;
    cfg.model.potential = potential;
    cfg.init = InitialData::SeededNoise {
        mean_bulk: 0.0,
        mean_surf: 0.0,
        amplitude: 0.05,
        seed,
        generator: default_generator(),
    };
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Grid {
        Grid::new(16, 8, 4.0, 2.0).unwrap()
    }

    #[test]
    fn noise_hits_means_and_amplitude() {
        let g = small();
        let init = InitialData::SeededNoise {
            mean_bulk: 0.2,
            mean_surf: -0.1,
            amplitude: 0.05,
            seed: 7,
            generator: NOISE_GENERATOR.into(),
        };
        let s = generate(&g, &init).unwrap();
        assert!((g.mean_bulk(&s.phi).unwrap() - 0.2).abs() < 1e-15);
        assert!((g.mean_surface(&s.psi).unwrap() + 0.1).abs() < 1e-15);
        let dev = s
            .psi
            .as_slice()
            .iter()
            .fold(0.0f64, |a, v| a.max((v + 0.1).abs()));
        assert!((dev - 0.05).abs() < 1e-15);
        assert_eq!(g.trace(&s.phi).unwrap(), s.psi);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let g = small();
        let a = generate(&g, &InitialData::default()).unwrap();
        let b = generate(&g, &InitialData::default()).unwrap();
        assert_eq!(a, b);
        let other = InitialData::SeededNoise {
            mean_bulk: 0.0,
            mean_surf: 0.0,
            amplitude: 0.05,
            seed: 43,
            generator: NOISE_GENERATOR.into(),
        };
        assert_ne!(generate(&g, &other).unwrap(), a);
    }

    #[test]
    fn band_is_periodic_and_bounded() {
        let g = small();
        let init = InitialData::TwoPhaseBand {
            position: 0.0,
            width: 2.0,
            plateau: 0.9,
            interface: 0.3,
        };
        let s = generate(&g, &init).unwrap();
        assert!(s.sup_norm() < 0.9);
        let row = s.phi.row(3);
        assert!(row[0] > 0.8);
        assert!(row[8] < -0.8);
        assert!((row[1] - row[15]).abs() < 1e-12);
    }

    #[test]
    fn bad_initial_data_is_located() {
        let init = InitialData::Constant {
            m: 1.0,
            m_surf: 0.0,
        };
        assert_eq!(init.issues(false)[0].0, "init.m");
        let init = InitialData::SeededNoise {
            mean_bulk: 0.97,
            mean_surf: 0.97,
            amplitude: 0.05,
            seed: 0,
            generator: NOISE_GENERATOR.into(),
        };
        assert!(init.issues(false).is_empty());
        assert_eq!(init.issues(true)[0].0, "init.amplitude");
    }

    #[test]
    fn obstacle_checks_on_zero_state() {
        let g = small();
        let s0 = PhaseState::constant(&g, 0.0, 0.0);
        let mut s1 = s0.clone();
        s1.t = 1.0;
        let r = obstacle_limit_checks(&g, &Potential::logarithmic(0.5, 1.0).unwrap(), &[s0, s1])
            .unwrap();
        assert_eq!(r.xi_l2, 0.0);
        assert!(r.sup_bound_holds);
        assert_eq!(r.near_contact, 0);
        assert_eq!(r.sign_fraction, None);
        assert!(matches!(
            obstacle_limit_checks(&g, &Potential::Quartic, &[]),
            Err(Error::KindMismatch(_))
        ));
    }

    #[test]
    fn obstacle_checks_count_contact_signs() {
        let g = small();
        let mut s = PhaseState::constant(&g, 0.0, 0.0);
        s.phi.set(0, 0, 0.9995);
        s.phi.set(1, 0, -0.9995);
        let r =
            obstacle_limit_checks(&g, &Potential::logarithmic(0.1, 1.0).unwrap(), &[s]).unwrap();
        assert_eq!((r.near_contact, r.sign_holds), (2, 2));
        assert_eq!(r.sign_fraction, Some(1.0));
    }

    #[test]
    fn single_member_sweep_has_no_pairs() {
        let mut base = RunConfig::default();
        base.grid = crate::config::GridConfig {
            nx: 8,
            ny: 4,
            lx: 2.0,
            ly: 1.0,
        };
        base.time.dt = 0.01;
        base.time.t_end = 0.05;
        base.time.snapshots = 3;
        let spec = SweepSpec {
            base,
            param: SweepParam::RobinK,
            values: vec![0.5],
        };
        let rep = run_sweep(&spec, None).unwrap();
        assert!(rep.pairwise.is_empty());
        assert_eq!(rep.summary_csv().lines().count(), 2);
        assert_eq!(rep.to_last[0].combined, 0.0);
        assert!(rep.members[0].violations.is_empty());
    }

    #[test]
    fn sweep_members_are_labelled_on_failure() {
        let mut base = RunConfig::default();
        base.grid.nx = 8;
        base.grid.ny = 4;
        base.time.t_end = 0.01;
        base.time.dt = 0.01;
        base.solver.newton_max_iter = 1;
        base.init = InitialData::TwoPhaseBand {
            position: 0.0,
            width: 4.0,
            plateau: 0.9,
            interface: 0.5,
        };
        let spec = SweepSpec {
            base,
            param: SweepParam::RobinK,
            values: vec![1.0],
        };
        match run_sweep(&spec, None) {
            Err(Error::SweepMember { label, .. }) => assert_eq!(label, "K=1.0"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn spinodal_defaults() {
        let cfg = spinodal_scenario(3, 1.0, Potential::logarithmic(1.0, 2.0).unwrap());
        assert!(cfg.issues().is_empty());
        assert_eq!((cfg.grid.nx, cfg.grid.ny), (64, 32));
        assert!(matches!(cfg.init, InitialData::SeededNoise { seed: 3, .. }));
    }
}
