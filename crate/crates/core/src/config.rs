//! Run configuration: JSON syntax, documented defaults, and semantic
//! validation that reports every problem with its key path.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::experiments::{InitialData, SweepParam};
use crate::grid::Grid;
use crate::model::ModelParams;
use crate::potentials::Potential;
use crate::stepper::{DtGrowth, LinearSolver, RunOptions, StepperConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            nx: 64,
            ny: 32,
            lx: 16.0,
            ly: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
    /// `None` records every step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records_per_unit_time: Option<f64>,
    /// Number of snapshots, uniformly spaced over `[0, t_end]`.
    pub snapshots: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_growth: Option<DtGrowth>,
    /// Stop once a step's max-norm rate drops to this value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_rate: Option<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 2.0,
            records_per_unit_time: None,
            snapshots: 20,
            dt_growth: None,
            stop_rate: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "K")]
    pub k: f64,
    pub sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yosida_eps: Option<f64>,
    pub yosida_rho: f64,
    pub potential: Potential,
    /// Boundary potential; the bulk one when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential_surf: Option<Potential>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            k: 1.0,
            sigma: 0.0,
            yosida_eps: None,
            yosida_rho: 1.0,
            potential: Potential::Logarithmic {
                theta: 1.0,
                theta_c: 2.0,
            },
            potential_surf: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub linesearch_shrink: f64,
    pub separation_guard: f64,
    pub linear: LinearSolver,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = StepperConfig::default();
        Self {
            newton_tol: s.newton_tol,
            newton_max_iter: s.newton_max_iter,
            linesearch_shrink: s.linesearch_shrink,
            separation_guard: s.separation_guard,
            linear: LinearSolver::BiCGStab {
                tol: 1e-12,
                max_iter: 200,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Run directory below the output root.
    pub directory: String,
    pub emit_plots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "run".into(),
            emit_plots: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: SweepParam,
    /// Strictly decreasing toward the limit.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub model: ModelConfig,
    pub init: InitialData,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

/// One semantic problem, located by its key path.
#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config syntax error at line {line}, column {column}{}: {message}", path_suffix(.path))]
    Parse {
        line: usize,
        column: usize,
        path: String,
        message: String,
    },
    #[error("invalid config:\n{}", join_issues(.0))]
    Validation(Vec<Issue>),
}

fn path_suffix(path: &str) -> String {
    if path.is_empty() || path == "." {
        String::new()
    } else {
        format!(" (at `{path}`)")
    }
}

fn join_issues(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ConfigError::Parse {
            line: inner.line(),
            column: inner.column(),
            path,
            message: inner.to_string(),
        }
    })?;
    let issues = cfg.issues();
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Validation(issues))
    }
}

pub fn emit_config(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serializes") + "\n"
}

struct Issues(Vec<Issue>);

impl Issues {
    fn check(&mut self, ok: bool, path: &str, message: impl FnOnce() -> String) {
        if !ok {
            self.0.push(Issue {
                path: path.into(),
                message: message(),
            });
        }
    }
}

fn check_potential(out: &mut Issues, path: &str, p: &Potential) {
    match *p {
        Potential::Logarithmic { theta, theta_c } => {
            out.check(
                theta > 0.0 && theta.is_finite(),
                &format!("{path}.theta"),
                || format!("theta must be > 0, got {theta}"),
            );
            out.check(
                theta_c > 0.0 && theta_c.is_finite(),
                &format!("{path}.theta_c"),
                || format!("theta_c must be > 0, got {theta_c}"),
            );
        }
        Potential::DoubleObstacle { theta_c } => {
            out.check(
                theta_c > 0.0 && theta_c.is_finite(),
                &format!("{path}.theta_c"),
                || format!("theta_c must be > 0, got {theta_c}"),
            );
        }
        Potential::Quartic => {}
    }
}

impl RunConfig {
    /// Every semantic problem of the config.
    pub fn issues(&self) -> Vec<Issue> {
        let mut out = Issues(Vec::new());
        let g = &self.grid;
        out.check(g.nx >= 8, "grid.nx", || {
            format!("nx must be >= 8, got {}", g.nx)
        });
        out.check(g.ny >= 4, "grid.ny", || {
            format!("ny must be >= 4, got {}", g.ny)
        });
        out.check(g.lx > 0.0 && g.lx.is_finite(), "grid.lx", || {
            format!("lx must be > 0, got {}", g.lx)
        });
        out.check(g.ly > 0.0 && g.ly.is_finite(), "grid.ly", || {
            format!("ly must be > 0, got {}", g.ly)
        });

        let t = &self.time;
        out.check(t.dt > 0.0 && t.dt.is_finite(), "time.dt", || {
            format!("dt must be > 0, got {}", t.dt)
        });
        out.check(t.t_end >= 0.0 && t.t_end.is_finite(), "time.t_end", || {
            format!("t_end must be >= 0, got {}", t.t_end)
        });
        if let Some(r) = t.records_per_unit_time {
            out.check(
                r > 0.0 && r.is_finite(),
                "time.records_per_unit_time",
                || format!("must be > 0, got {r}"),
            );
        }
        if let Some(gr) = t.dt_growth {
            out.check(
                gr.factor >= 1.0 && gr.factor.is_finite(),
                "time.dt_growth.factor",
                || format!("factor must be >= 1, got {}", gr.factor),
            );
            out.check(
                gr.max_dt >= t.dt && gr.max_dt.is_finite(),
                "time.dt_growth.max_dt",
                || format!("max_dt must be >= dt, got {}", gr.max_dt),
            );
        }
        if let Some(r) = t.stop_rate {
            out.check(r > 0.0, "time.stop_rate", || {
                format!("stop_rate must be > 0, got {r}")
            });
        }

        let m = &self.model;
        out.check(m.k >= 0.0 && m.k.is_finite(), "model.K", || {
            format!("K must be >= 0, got {}", m.k)
        });
        out.check(m.sigma >= 0.0 && m.sigma.is_finite(), "model.sigma", || {
            format!("sigma must be >= 0, got {}", m.sigma)
        });
        if let Some(eps) = m.yosida_eps {
            out.check(eps > 0.0 && eps < 1.0, "model.yosida_eps", || {
                format!("yosida_eps must lie in (0, 1), got {eps}")
            });
        }
        out.check(
            m.yosida_rho >= 1.0 && m.yosida_rho.is_finite(),
            "model.yosida_rho",
            || format!("yosida_rho must be >= 1, got {}", m.yosida_rho),
        );
        check_potential(&mut out, "model.potential", &m.potential);
        if let Some(ps) = &m.potential_surf {
            check_potential(&mut out, "model.potential_surf", ps);
        }
        let obstacle = |p: &Potential| matches!(p, Potential::DoubleObstacle { .. });
        if m.yosida_eps.is_none() {
            out.check(!obstacle(&m.potential), "model.potential.kind", || {
                "double_obstacle needs model.yosida_eps".into()
            });
        }
        let singular =
            m.potential.is_singular() || m.potential_surf.is_some_and(|p| p.is_singular());
        for (path, msg) in self.init.issues(singular && m.yosida_eps.is_none()) {
            out.check(false, &path, || msg);
        }

        let s = &self.solver;
        out.check(s.newton_tol > 0.0, "solver.newton_tol", || {
            format!("newton_tol must be > 0, got {}", s.newton_tol)
        });
        out.check(s.newton_max_iter > 0, "solver.newton_max_iter", || {
            "newton_max_iter must be positive".into()
        });
        out.check(
            s.linesearch_shrink > 0.0 && s.linesearch_shrink < 1.0,
            "solver.linesearch_shrink",
            || {
                format!(
                    "linesearch_shrink must lie in (0, 1), got {}",
                    s.linesearch_shrink
                )
            },
        );
        out.check(
            s.separation_guard > 0.0 && s.separation_guard < 1.0,
            "solver.separation_guard",
            || {
                format!(
                    "separation_guard must lie in (0, 1), got {}",
                    s.separation_guard
                )
            },
        );
        if let LinearSolver::BiCGStab { tol, max_iter } = s.linear {
            out.check(tol > 0.0 && tol < 1.0, "solver.linear.tol", || {
                format!("tol must lie in (0, 1), got {tol}")
            });
            out.check(max_iter > 0, "solver.linear.max_iter", || {
                "max_iter must be positive".into()
            });
        }

        out.check(
            !self.output.directory.is_empty() && !self.output.directory.contains(['/', '\\']),
            "output.directory",
            || {
                format!(
                    "must be a single non-empty path component, got `{}`",
                    self.output.directory
                )
            },
        );

        if let Some(sw) = &self.sweep {
            out.check(!sw.values.is_empty(), "sweep.values", || {
                "at least one value is required".into()
            });
            for (i, w) in sw.values.windows(2).enumerate() {
                out.check(w[1] < w[0], &format!("sweep.values[{}]", i + 1), || {
                    format!(
                        "values must be strictly decreasing, got {} after {}",
                        w[1], w[0]
                    )
                });
            }
            for (i, &v) in sw.values.iter().enumerate() {
                let path = format!("sweep.values[{i}]");
                match sw.param {
                    SweepParam::RobinK => out.check(v >= 0.0 && v.is_finite(), &path, || {
                        format!("K must be >= 0, got {v}")
                    }),
                    SweepParam::YosidaEps => out.check(v > 0.0 && v < 1.0, &path, || {
                        format!("yosida_eps must lie in (0, 1), got {v}")
                    }),
                    SweepParam::Theta => out.check(v > 0.0 && v <= 1.0, &path, || {
                        format!("theta must lie in (0, 1], got {v}")
                    }),
                }
            }
            if sw.param == SweepParam::Theta {
                out.check(
                    matches!(m.potential, Potential::Logarithmic { .. }),
                    "model.potential.kind",
                    || "a theta sweep needs the logarithmic potential".into(),
                );
            }
        }
        out.0
    }

    pub fn grid(&self) -> crate::Result<Grid> {
        Grid::new(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly)
    }

    pub fn params(&self) -> crate::Result<ModelParams> {
        let m = &self.model;
        let p = ModelParams {
            k: m.k,
            sigma: m.sigma,
            potential_bulk: m.potential,
            potential_surf: m.potential_surf.unwrap_or(m.potential),
            yosida_eps: m.yosida_eps,
            yosida_rho: m.yosida_rho,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn stepper(&self) -> crate::Result<StepperConfig> {
        let s = &self.solver;
        let cfg = StepperConfig {
            dt: self.time.dt,
            newton_tol: s.newton_tol,
            newton_max_iter: s.newton_max_iter,
            linesearch_shrink: s.linesearch_shrink,
            separation_guard: s.separation_guard,
            linear_solver: s.linear,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Snapshot times: `snapshots` points uniformly covering `[0, t_end]`.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let n = self.time.snapshots;
        let t = self.time.t_end;
        match n {
            0 => Vec::new(),
            1 => vec![t],
            _ => (0..n).map(|k| t * k as f64 / (n - 1) as f64).collect(),
        }
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            record_interval: self.time.records_per_unit_time.map(|r| 1.0 / r),
            snapshot_times: self.snapshot_times(),
            growth: self.time.dt_growth,
            stop_rate: self.time.stop_rate,
        }
    }

    /// Copy with one swept parameter replaced.
    pub fn with_param(&self, param: SweepParam, value: f64) -> RunConfig {
        let mut c = self.clone();
        c.sweep = None;
        match param {
            SweepParam::RobinK => c.model.k = value,
            SweepParam::YosidaEps => c.model.yosida_eps = Some(value),
            SweepParam::Theta => {
                let set = |p: &mut Potential| {
                    if let Potential::Logarithmic { theta, .. } = p {
                        *theta = value;
                    }
                };
                set(&mut c.model.potential);
                if let Some(ps) = c.model.potential_surf.as_mut() {
                    set(ps);
                }
            }
        }
        c
    }
}
