//! The `bsch` command line.
//!
//! Exit status: 0 success, 1 a check failed, 2 usage or configuration error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::artifacts::replay_check;
use crate::config::{emit_config, parse_config, RunConfig};
use crate::experiments::{run_member, run_sweep, SweepSpec};
use crate::grid::{BulkField, Flux, Grid, SurfField};
use crate::potentials::validate_assumptions;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "bsch", version, about = "Bulk-surface Cahn-Hilliard simulator")]
struct Cli {
    /// Root directory for all outputs.
    #[arg(long, global = true, default_value = "./out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one trajectory and write its run directory.
    Run { config: PathBuf },
    /// Run every member of the config's `sweep` section.
    Sweep { config: PathBuf },
    /// Check the potentials and the discrete operators of a config.
    Validate {
        config: Option<PathBuf>,
        /// Print the default config and exit.
        #[arg(long)]
        print_defaults: bool,
    },
    /// Recompute the state-derived series columns from saved snapshots.
    ReplayCheck { run_dir: PathBuf },
}

/// Parses `args` (program name first) and executes; returns the exit status.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run { config } => cmd_run(&cli.out, &config),
        Command::Sweep { config } => cmd_sweep(&cli.out, &config),
        Command::Validate {
            config,
            print_defaults,
        } => {
            if print_defaults {
                print!("{}", emit_config(&RunConfig::default()));
                return EXIT_OK;
            }
            match config {
                Some(c) => cmd_validate(&c),
                None => {
                    eprintln!("error: validate needs a config path or --print-defaults");
                    EXIT_USAGE
                }
            }
        }
        Command::ReplayCheck { run_dir } => cmd_replay(&cli.out, &run_dir),
    }
}

fn load(path: &Path) -> Result<RunConfig, i32> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_USAGE
    })?;
    parse_config(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_USAGE
    })
}

fn cmd_run(out: &Path, config: &Path) -> i32 {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if cfg.sweep.is_some() {
        eprintln!("note: the sweep section is ignored by `run`");
    }
    let dir = out.join(&cfg.output.directory);
    let m = match run_member(&cfg, f64::NAN, cfg.output.directory.clone(), Some(&dir)) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: run failed: {e}");
            return EXIT_CHECK;
        }
    };
    println!(
        "{}: {} steps to t = {}, final energy {:e}, min separation {:e}, mass drift {:e}",
        dir.display(),
        m.trajectory.steps,
        m.trajectory.final_state.t,
        m.final_energy,
        m.min_separation,
        m.mass_drift
    );
    for v in &m.violations {
        eprintln!("FAIL {v}");
    }
    if m.violations.is_empty() {
        EXIT_OK
    } else {
        EXIT_CHECK
    }
}

fn cmd_sweep(out: &Path, config: &Path) -> i32 {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let spec = match SweepSpec::from_config(&cfg) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return EXIT_USAGE;
        }
    };
    let dir = out.join("sweep");
    let rep = match run_sweep(&spec, Some(&dir)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CHECK;
        }
    };
    print!("{}", rep.summary_csv());
    for (k, d) in rep.pairwise.iter().enumerate() {
        println!(
            "d[{k}] {}={:?} -> {:?}: bulk {:e}, surf {:e}",
            spec.param.name(),
            rep.members[k].value,
            rep.members[k + 1].value,
            d.bulk,
            d.surf
        );
    }
    let mut failed = false;
    for (m, v) in rep.violations() {
        eprintln!("FAIL {}: {v}", spec.param.member_dir(m.value));
        failed = true;
    }
    if failed {
        EXIT_CHECK
    } else {
        EXIT_OK
    }
}

fn cmd_validate(config: &Path) -> i32 {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let bulk = cfg.model.potential;
    let surf = cfg.model.potential_surf.unwrap_or(bulk);
    let mut ok = true;
    let line = |name: &str, pass: bool, detail: String| {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    };
    match validate_assumptions(&bulk, &surf, 2000) {
        Ok(rep) => {
            for (side, c) in [("bulk", &rep.bulk), ("surface", &rep.surf)] {
                line(
                    &format!("monotone {side}"),
                    c.monotonicity.pass,
                    format!(
                        "monotone {}, min beta' {:e}, blow-up {}",
                        c.monotonicity.monotone, c.monotonicity.varpi, c.monotonicity.blows_up
                    ),
                );
                line(
                    &format!("lipschitz {side}"),
                    c.lipschitz.pass,
                    format!("Lipschitz constant {}", c.lipschitz.gamma),
                );
                line(
                    &format!("growth {side}"),
                    c.growth.pass,
                    format!(
                        "C = {:e}, gamma = {}, R^2 = {:.6}",
                        c.growth.c_sharp, c.growth.gamma_sharp, c.growth.r_squared
                    ),
                );
                line(
                    &format!("decay {side}"),
                    c.decay.pass,
                    format!(
                        "kappa = {:.4} / {:.4}",
                        c.decay.kappa_left, c.decay.kappa_right
                    ),
                );
            }
            line(
                "domination",
                rep.domination.pass,
                format!("rho = {}, c0 = {}", rep.domination.rho, rep.domination.c0),
            );
            println!(
                "INFO domination reverse: rho = {}, c0 = {} (reported only)",
                rep.domination_reverse.rho, rep.domination_reverse.c0
            );
            ok &= rep.all_pass();
        }
        Err(e) => {
            line("assumptions", false, e.to_string());
            ok = false;
        }
    }
    match cfg.grid() {
        Ok(g) => {
            for c in operator_checks(&g, 0x5eed) {
                line(c.name, c.pass, format!("defect {:e}", c.defect));
                ok &= c.pass;
            }
        }
        Err(e) => {
            line("grid", false, e.to_string());
            ok = false;
        }
    }
    if ok {
        EXIT_OK
    } else {
        EXIT_CHECK
    }
}

fn cmd_replay(out: &Path, run_dir: &Path) -> i32 {
    let under_out = out.join(run_dir);
    let dir = if run_dir.is_relative() && under_out.is_dir() {
        under_out
    } else {
        run_dir.to_path_buf()
    };
    if !dir.is_dir() {
        eprintln!("error: no run directory at {}", dir.display());
        return EXIT_USAGE;
    }
    match replay_check(&dir) {
        Ok(rep) if rep.passed() => {
            println!(
                "PASS replay of {}: {} snapshots bit-identical",
                dir.display(),
                rep.snapshots_checked
            );
            EXIT_OK
        }
        Ok(rep) => {
            for v in &rep.mismatches {
                eprintln!("FAIL {v}");
            }
            EXIT_CHECK
        }
        Err(e) => {
            eprintln!("FAIL replay of {}: {e}", dir.display());
            EXIT_CHECK
        }
    }
}

/// One discrete operator identity and its relative defect.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorCheck {
    pub name: &'static str,
    pub defect: f64,
    pub pass: bool,
}

const OPERATOR_TOL: f64 = 1e-11;

/// Summation by parts, symmetry, conservation and kernel identities of the
/// grid operators on seeded random fields.
pub fn operator_checks(g: &Grid, seed: u64) -> Vec<OperatorCheck> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut bulk = || {
        BulkField::from_vec(
            g.nx(),
            g.ny(),
            (0..g.bulk_len())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
        )
    };
    let (u, v) = (bulk().expect("sized"), bulk().expect("sized"));
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 1);
    let mut surf = || {
        SurfField::from_vec(
            g.nx(),
            (0..g.surf_len())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
        )
    };
    let (a, b, flux) = (
        surf().expect("sized"),
        surf().expect("sized"),
        surf().expect("sized"),
    );

    let lu = g.laplace_bulk(&u, Flux::NoFlux).expect("sized");
    let lv = g.laplace_bulk(&v, Flux::NoFlux).expect("sized");
    let la = g.laplace_surface(&a).expect("sized");
    let lb = g.laplace_surface(&b).expect("sized");
    let grad_uv = g
        .dirichlet_energy_bulk(&u.lin_comb(1.0, &v, 1.0))
        .expect("sized")
        - g.dirichlet_energy_bulk(&u).expect("sized")
        - g.dirichlet_energy_bulk(&v).expect("sized");
    let grad_ab = g
        .dirichlet_energy_surface(&a.lin_comb(1.0, &b, 1.0))
        .expect("sized")
        - g.dirichlet_energy_surface(&a).expect("sized")
        - g.dirichlet_energy_surface(&b).expect("sized");
    let inner = |x: &BulkField, y: &BulkField| g.inner_bulk(x, y).expect("sized");
    let inner_s = |x: &SurfField, y: &SurfField| g.inner_surface(x, y).expect("sized");
    let scale_b = inner(&lu, &lu).sqrt() * inner(&v, &v).sqrt();
    let scale_s = inner_s(&la, &la).sqrt() * inner_s(&b, &b).sqrt();

    let lg = g.laplace_bulk(&u, Flux::Supplied(&flux)).expect("sized");
    let quad = g.bulk_from_fn(|_, y| 0.5 * y * y + y);
    let dn = g.normal_derivative(&quad).expect("sized");
    let ly = g.ly();
    let dn_exact = g.surf_from_fn(|ring, _| match ring {
        crate::grid::Ring::Bottom => -1.0,
        crate::grid::Ring::Top => ly + 1.0,
    });
    let ones = g.bulk_from_fn(|_, _| 1.0);

    let raw = [
        (
            "bulk summation by parts",
            (inner(&lu, &v) + grad_uv).abs() / scale_b,
        ),
        (
            "bulk symmetry",
            (inner(&lu, &v) - inner(&u, &lv)).abs() / scale_b,
        ),
        (
            "bulk no-flux conservation",
            g.integrate_bulk(&lu).expect("sized").abs() / scale_b.sqrt(),
        ),
        (
            "bulk flux balance",
            (g.integrate_bulk(&lg).expect("sized") - g.integrate_surface(&flux).expect("sized"))
                .abs()
                / scale_b.sqrt(),
        ),
        (
            "bulk constants in kernel",
            g.laplace_bulk(&ones, Flux::NoFlux)
                .expect("sized")
                .max_abs(),
        ),
        (
            "surface summation by parts",
            (inner_s(&la, &b) + grad_ab).abs() / scale_s,
        ),
        (
            "surface symmetry",
            (inner_s(&la, &b) - inner_s(&a, &lb)).abs() / scale_s,
        ),
        (
            "surface conservation",
            g.integrate_surface(&la).expect("sized").abs() / scale_s.sqrt(),
        ),
        (
            "normal derivative exact on quadratics",
            dn.lin_comb(1.0, &dn_exact, -1.0).max_abs() / (ly + 1.0),
        ),
    ];
    raw.into_iter()
        .map(|(name, defect)| OperatorCheck {
            name,
            defect,
            pass: defect <= OPERATOR_TOL,
        })
        .collect()
}
