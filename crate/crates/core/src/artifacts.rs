//! Run directories on disk and their replay check.
//!
//! ```text
//! <run>/config.json
//! <run>/series.csv
//! <run>/plots.gp              (when plots are enabled)
//! <run>/snapshots/index.csv   id,t,row
//! <run>/snapshots/phi_0000.field, psi_0000.field, ...
//! ```

use std::fs;
use std::path::Path;

use crate::config::{emit_config, parse_config, RunConfig};
use crate::diagnostics::{read_series, state_columns, write_series, Recorder, Violation};
use crate::error::{Error, Result};
use crate::experiments::SweepParam;
use crate::grid::Grid;
use crate::model::PhaseState;
use crate::snapshot::{read_bulk, read_surface, write_bulk, write_surface, SnapshotHeader};

const INDEX_HEADER: &str = "id,t,row";

fn phi_name(id: usize) -> String {
    format!("phi_{id:04}.field")
}

fn psi_name(id: usize) -> String {
    format!("psi_{id:04}.field")
}

pub fn write_run_dir(dir: &Path, cfg: &RunConfig, rec: &Recorder) -> Result<()> {
    let g = cfg.grid()?;
    let snaps = dir.join("snapshots");
    fs::create_dir_all(&snaps)?;
    fs::write(dir.join("config.json"), emit_config(cfg))?;
    fs::write(dir.join("series.csv"), write_series(&rec.records)?)?;
    let mut index = format!("{INDEX_HEADER}\n");
    for (id, (s, row)) in rec.snapshots.iter().zip(&rec.snapshot_rows).enumerate() {
        fs::write(snaps.join(phi_name(id)), write_bulk(&g, &s.phi)?)?;
        fs::write(snaps.join(psi_name(id)), write_surface(&g, &s.psi)?)?;
        index.push_str(&format!("{id},{:?},{}\n", s.t, row + 1));
    }
    fs::write(snaps.join("index.csv"), index)?;
    if cfg.output.emit_plots {
        fs::write(dir.join("plots.gp"), run_plot_script())?;
    }
    Ok(())
}

/// Gnuplot script for energy and separation against time.
pub fn run_plot_script() -> String {
    "\
set datafile separator ','
set key autotitle columnhead
set terminal pngcairo size 900,600
set xlabel 't'

set output 'energy.png'
set ylabel 'energy'
plot 'series.csv' using 1:4 with lines

set output 'separation.png'
set ylabel '1 - max|.|'
set logscale y
plot 'series.csv' using 1:12 with lines, '' using 1:13 with lines
"
    .to_string()
}

/// Gnuplot script for the consecutive-member distance against the parameter.
pub fn sweep_plot_script(param: SweepParam) -> String {
    format!(
        "\
set datafile separator ','
set key autotitle columnhead
set terminal pngcairo size 900,600
set output 'distance.png'
set xlabel '{}'
set ylabel 'distance to next member'
set logscale y
plot 'summary.csv' using 1:6 with linespoints
",
        param.name()
    )
}

/// Outcome of [`replay_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub snapshots_checked: usize,
    pub mismatches: Vec<Violation>,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn check_header(g: &Grid, h: &SnapshotHeader, file: &str) -> Result<()> {
    if h.nx != g.nx() || h.ny.is_some_and(|ny| ny != g.ny()) || h.lx != g.lx() || h.ly != g.ly() {
        return Err(Error::Format(format!(
            "{file}: header {h:?} does not match the configured grid"
        )));
    }
    Ok(())
}

/// Recomputes the state-derived series columns from every saved snapshot and
/// compares them bit for bit with the stored rows.
pub fn replay_check(dir: &Path) -> Result<ReplayReport> {
    let cfg_text = read(&dir.join("config.json"))?;
    let cfg = parse_config(&cfg_text).map_err(|e| Error::Format(format!("config.json: {e}")))?;
    let g = cfg.grid()?;
    let p = cfg.params()?;
    let series = read_series(&read(&dir.join("series.csv"))?)?;
    let snaps = dir.join("snapshots");
    let index = read(&snaps.join("index.csv"))?;
    let mut lines = index.lines();
    if lines.next() != Some(INDEX_HEADER) {
        return Err(Error::Format(format!(
            "snapshots/index.csv: expected header `{INDEX_HEADER}`"
        )));
    }
    let mut mismatches = Vec::new();
    let mut checked = 0;
    for (n, line) in lines.enumerate() {
        let bad = || Error::Format(format!("snapshots/index.csv row {}: `{line}`", n + 1));
        let mut parts = line.split(',');
        let id: usize = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let t: f64 = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let row: usize = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let stored = series.get(row.wrapping_sub(1)).ok_or_else(|| {
            Error::Format(format!(
                "snapshots/index.csv row {}: series row {row} does not exist",
                n + 1
            ))
        })?;

        let (hb, phi) = read_bulk(&read(&snaps.join(phi_name(id)))?)
            .map_err(|e| Error::Format(format!("{}: {e}", phi_name(id))))?;
        check_header(&g, &hb, &phi_name(id))?;
        let (hs, psi) = read_surface(&read(&snaps.join(psi_name(id)))?)
            .map_err(|e| Error::Format(format!("{}: {e}", psi_name(id))))?;
        check_header(&g, &hs, &psi_name(id))?;
        let state = PhaseState::new(&g, phi, psi, t)?;
        let fresh = state_columns(&g, &p, &state)?;
        let old = stored.state_columns();
        let pairs = [
            ("t", stored.t, t),
            ("mass_bulk", old.mass_bulk, fresh.mass_bulk),
            ("mass_surf", old.mass_surf, fresh.mass_surf),
            ("energy", old.energy.total, fresh.energy.total),
            (
                "e_bulk_dir",
                old.energy.bulk_dirichlet,
                fresh.energy.bulk_dirichlet,
            ),
            (
                "e_bulk_pot",
                old.energy.bulk_potential,
                fresh.energy.bulk_potential,
            ),
            (
                "e_surf_dir",
                old.energy.surf_dirichlet,
                fresh.energy.surf_dirichlet,
            ),
            (
                "e_surf_pot",
                old.energy.surf_potential,
                fresh.energy.surf_potential,
            ),
            ("e_penalty", old.energy.penalty, fresh.energy.penalty),
            ("sep_bulk", old.sep_bulk, fresh.sep_bulk),
            ("sep_surf", old.sep_surf, fresh.sep_surf),
        ];
        for (col, a, b) in pairs {
            if a.to_bits() != b.to_bits() {
                mismatches.push(Violation {
                    invariant: "replay",
                    row,
                    detail: format!("snapshot {id}, column {col}: stored {a:?}, recomputed {b:?}"),
                });
            }
        }
        checked += 1;
    }
    Ok(ReplayReport {
        snapshots_checked: checked,
        mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::GridConfig;
    use crate::experiments::{generate, InitialData};
    use crate::stepper::run;

    fn tiny_run(dir: &Path) {
        let mut cfg = RunConfig::default();
        cfg.grid = GridConfig {
            nx: 8,
            ny: 5,
            lx: 4.0,
            ly: 2.0,
        };
        cfg.time.dt = 0.01;
        cfg.time.t_end = 0.1;
        cfg.time.snapshots = 3;
        cfg.init = InitialData::SeededNoise {
            mean_bulk: 0.1,
            mean_surf: 0.0,
            amplitude: 0.2,
            seed: 1,
            generator: crate::experiments::NOISE_GENERATOR.into(),
        };
        let g = cfg.grid().unwrap();
        let p = cfg.params().unwrap();
        let s0 = generate(&g, &cfg.init).unwrap();
        let mut rec = Recorder::new(&g, &p);
        run(
            &g,
            &p,
            &cfg.stepper().unwrap(),
            &s0,
            cfg.time.t_end,
            &cfg.run_options(),
            &mut rec,
        )
        .unwrap();
        write_run_dir(dir, &cfg, &rec).unwrap();
    }

    #[test]
    fn replay_passes_then_detects_tampering() {
        let tmp = tempfile::tempdir().unwrap();
        tiny_run(tmp.path());
        let rep = replay_check(tmp.path()).unwrap();
        assert_eq!(rep.snapshots_checked, 3);
        assert!(rep.passed(), "{:?}", rep.mismatches);

        let f = tmp.path().join("snapshots").join(phi_name(1));
        let mut text = fs::read_to_string(&f).unwrap();
        let line2 = text.find('\n').unwrap() + 1;
        let pos = line2 + text[line2..].find(|c: char| c.is_ascii_digit()).unwrap();
        let digit = text.as_bytes()[pos];
        let swapped = if digit == b'5' { '6' } else { '5' };
        text.replace_range(pos..pos + 1, &swapped.to_string());
        fs::write(&f, text).unwrap();
        let rep = replay_check(tmp.path()).unwrap();
        assert!(!rep.passed());
        assert!(rep
            .mismatches
            .iter()
            .all(|v| v.detail.starts_with("snapshot 1")));
    }

    #[test]
    fn missing_files_are_errors() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(replay_check(tmp.path()).is_err());
    }
}
