//! The `ckn` command-line driver.

mod config;
mod table;

pub use config::{parse_config_text, parse_values, Cli, Command, Format, RunArgs, RunConfig};
pub use table::{Cell, Row, Table};

use crate::cylinder::{ineq, io, Cylinder, ZonalField};
use crate::error::Result;
use crate::multibubble::{
    bubble_sum_residual, default_gaps, derivative_window, interaction_window, window_spread,
    BubbleConfig, WindowRow, DEFAULT_ZETA,
};
use crate::operators::{apply_h1, hminus1_norm};
use crate::params::CknParams;
use crate::spectrum::{eigensolve_sector, gamma3, Parity};
use crate::stability::{compute_constants, log_spaced, sharpness_study, Corrector};
use rayon::prelude::*;
use std::io::Write;
use std::sync::Arc;

/// Outcome of a run: the table and whether every check passed.
pub struct Outcome {
    pub table: Table,
    pub ok: bool,
}

fn cylinder(cfg: &RunConfig, c: CknParams) -> Result<Arc<Cylinder>> {
    Cylinder::build(c, &cfg.disc)
}

fn pn(c: &CknParams) -> Vec<(&'static str, Cell)> {
    vec![("n", c.n.into()), ("p", c.p.into())]
}

pub fn cmd_constants(cfg: &RunConfig) -> Table {
    let mut table = Table::new(&[
        "n", "p", "E0", "F", "E0_over_F_plus_1", "R_energy", "R_gamma", "rel_discrepancy",
        "series_terms", "tail_bound", "residual_floor", "error",
    ]);
    let rows: Vec<_> = cfg
        .params
        .par_iter()
        .map(|&c| -> (Option<_>, Vec<(&'static str, Cell)>) {
            let run = || -> Result<_> {
                let cyl = cylinder(cfg, c)?;
                let k = compute_constants(&cyl)?;
                let floor = hminus1_norm(&apply_h1(&ZonalField::bubble(&cyl, 0.0)))?;
                Ok((cyl.signature(), k, floor))
            };
            let mut row = pn(&c);
            match run() {
                Ok((sig, k, floor)) => {
                    row.extend([
                        ("E0", k.e0.into()),
                        ("F", k.f.into()),
                        ("E0_over_F_plus_1", (k.e0 / k.f + 1.0).into()),
                        ("R_energy", k.r_energy.into()),
                        ("R_gamma", k.r_gamma.into()),
                        ("rel_discrepancy", ((k.r_energy - k.r_gamma).abs() / k.r_gamma).into()),
                        ("series_terms", k.series_terms.into()),
                        ("tail_bound", k.tail_bound.into()),
                        ("residual_floor", floor.into()),
                    ]);
                    (Some(sig), row)
                }
                Err(e) => {
                    row.push(("error", e.to_string().into()));
                    (None, row)
                }
            }
        })
        .collect();
    for (sig, row) in rows {
        table.push(sig, row);
    }
    table
}

pub fn cmd_sharpness(cfg: &RunConfig) -> Table {
    let mus = cfg.mus.clone().unwrap_or_else(|| log_spaced(1e-3, 3e-2, 6));
    let mut table = if cfg.samples {
        Table::new(&[
            "n", "p", "mu", "residual", "distance", "proj_y", "perp_distance", "naive_residual",
            "ratio", "error",
        ])
    } else {
        Table::new(&[
            "n", "p", "slope_residual", "slope_distance", "slope_naive", "slope_proj_y",
            "slope_perp", "ratio_limit", "ratio_drift", "cc1_residual", "error",
        ])
    };
    let results: Vec<_> = cfg
        .params
        .iter()
        .map(|&c| (c, cylinder(cfg, c).and_then(|cyl| Ok((cyl.signature(), sharpness_study(&cyl, &mus)?)))))
        .collect();
    for (c, res) in results {
        match res {
            Ok((sig, r)) if cfg.samples => {
                for s in &r.samples {
                    let mut row = pn(&c);
                    row.extend([
                        ("mu", s.mu.into()),
                        ("residual", s.residual.into()),
                        ("distance", s.distance.into()),
                        ("proj_y", s.proj_y_norm.into()),
                        ("perp_distance", s.perp_distance.into()),
                        ("naive_residual", s.naive_residual.into()),
                        ("ratio", s.ratio.into()),
                    ]);
                    table.push(Some(sig), row);
                }
            }
            Ok((sig, r)) => {
                let mut row = pn(&c);
                row.extend([
                    ("slope_residual", r.slope_residual.into()),
                    ("slope_distance", r.slope_distance.into()),
                    ("slope_naive", r.slope_naive.into()),
                    ("slope_proj_y", r.slope_proj_y.into()),
                    ("slope_perp", r.slope_perp.into()),
                    ("ratio_limit", r.ratio_limit.into()),
                    ("ratio_drift", r.ratio_drift.into()),
                    ("cc1_residual", r.corrector.cc1_residual.into()),
                ]);
                table.push(Some(sig), row);
            }
            Err(e) => {
                let mut row = pn(&c);
                row.push(("error", e.to_string().into()));
                table.push(None, row);
            }
        }
    }
    table
}

fn parity_name(p: Parity) -> &'static str {
    match p {
        Parity::Even => "even",
        Parity::Odd => "odd",
        Parity::Mixed => "mixed",
    }
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Table {
    let mut table = Table::new(&["n", "p", "ell", "index", "gamma", "parity", "residual", "error"]);
    for &c in &cfg.params {
        let cyl = match cylinder(cfg, c) {
            Ok(cyl) => cyl,
            Err(e) => {
                let mut row = pn(&c);
                row.push(("error", e.to_string().into()));
                table.push(None, row);
                continue;
            }
        };
        let sig = cyl.signature();
        let sectors: Vec<_> = (0..=cyl.l_max())
            .into_par_iter()
            .map(|l| (l, eigensolve_sector(&cyl, l, cfg.k)))
            .collect();
        for (l, res) in sectors {
            match res {
                Ok(s) => {
                    for j in 0..s.eigenvalues.len() {
                        let mut row = pn(&c);
                        row.extend([
                            ("ell", l.into()),
                            ("index", j.into()),
                            ("gamma", s.eigenvalues[j].into()),
                            ("parity", parity_name(s.parities[j]).into()),
                            ("residual", s.residuals[j].into()),
                        ]);
                        table.push(Some(sig), row);
                    }
                }
                Err(e) => {
                    let mut row = pn(&c);
                    row.extend([("ell", l.into()), ("error", e.to_string().into())]);
                    table.push(Some(sig), row);
                }
            }
        }
    }
    table
}

pub fn cmd_interactions(cfg: &RunConfig) -> Table {
    let mut table = Table::new(&[
        "n", "p", "kind", "gap", "value", "predicted", "ratio", "spread", "weighted_norm", "error",
    ]);
    for &c in &cfg.params {
        let gaps = cfg.gaps.clone().unwrap_or_else(|| default_gaps(&c, 9));
        let mut emit = |kind: &str, rows: Result<Vec<WindowRow>>| match rows {
            Ok(rows) => {
                let spread = window_spread(&rows);
                for r in rows {
                    let mut row = pn(&c);
                    row.extend([
                        ("kind", kind.into()),
                        ("gap", r.gap.into()),
                        ("value", r.value.into()),
                        ("predicted", r.predicted.into()),
                        ("ratio", r.ratio.into()),
                        ("spread", spread.into()),
                    ]);
                    table.push(None, row);
                }
            }
            Err(e) => {
                let mut row = pn(&c);
                row.extend([("kind", kind.into()), ("error", e.to_string().into())]);
                table.push(None, row);
            }
        };
        emit("interaction_q1", interaction_window(&c, 1.0, &gaps));
        emit("interaction_half", interaction_window(&c, c.p / 2.0, &gaps));
        emit("derivative", derivative_window(&c, &gaps));

        let sums = cylinder(cfg, c).and_then(|cyl| {
            gaps.par_iter()
                .map(|&g| {
                    let bc = BubbleConfig::new(c, vec![-g / 2.0, g / 2.0], DEFAULT_ZETA)?;
                    bubble_sum_residual(&bc, &cyl).map(|d| (g, d))
                })
                .collect::<Result<Vec<_>>>()
                .map(|v| (cyl.signature(), v))
        });
        match sums {
            Ok((sig, v)) => {
                let ratios: Vec<WindowRow> = v
                    .iter()
                    .map(|(g, d)| WindowRow { gap: *g, value: d.residual, predicted: d.q, ratio: d.residual_over_q })
                    .collect();
                let spread = window_spread(&ratios);
                for ((_, d), r) in v.iter().zip(ratios) {
                    let mut row = pn(&c);
                    row.extend([
                        ("kind", "bubble_sum".into()),
                        ("gap", r.gap.into()),
                        ("value", r.value.into()),
                        ("predicted", r.predicted.into()),
                        ("ratio", r.ratio.into()),
                        ("spread", spread.into()),
                        ("weighted_norm", d.weighted_norm.into()),
                    ]);
                    table.push(Some(sig), row);
                }
            }
            Err(e) => {
                let mut row = pn(&c);
                row.extend([("kind", "bubble_sum".into()), ("error", e.to_string().into())]);
                table.push(None, row);
            }
        }
    }
    table
}

struct Check {
    name: String,
    value: f64,
    bound: f64,
    /// `true` when `value` must be at most `bound`.
    upper: bool,
}

impl Check {
    fn le(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, upper: true }
    }

    fn ge(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, upper: false }
    }

    fn pass(&self) -> bool {
        if self.upper {
            self.value <= self.bound
        } else {
            self.value >= self.bound
        }
    }
}

fn selftest_checks(cfg: &RunConfig, c: CknParams) -> Result<Vec<Check>> {
    let cyl = cylinder(cfg, c)?;
    let p = c.p;
    let mut out = Vec::new();

    let s0 = eigensolve_sector(&cyl, 0, 2)?;
    let s1 = eigensolve_sector(&cyl, 1, 1)?;
    let err = (s0.eigenvalues[0] - 1.0)
        .abs()
        .max((s0.eigenvalues[1] - (p - 1.0)).abs())
        .max((s1.eigenvalues[0] - (p - 1.0)).abs());
    out.push(Check::le("known eigenvalues", err, 1e-4));
    out.push(Check::ge("gamma3 - (p-1)", gamma3(&cyl)?.value - (p - 1.0), 1e-3));

    let floor = hminus1_norm(&apply_h1(&ZonalField::bubble(&cyl, 1.7)))?;
    out.push(Check::le("bubble residual", floor, 1e-6));

    let k = compute_constants(&cyl)?;
    out.push(Check::ge("F", k.f, f64::MIN_POSITIVE));
    out.push(Check::ge("E0 + F", k.e0 + k.f, f64::MIN_POSITIVE));
    out.push(Check::le("R route discrepancy", (k.r_energy - k.r_gamma).abs() / k.r_gamma, 1e-2));
    out.push(Check::le("R series tail", k.tail_bound, 1e-9));

    let chk = Corrector::new(&cyl)?.checks()?;
    out.push(Check::le("corrector residual", chk.cc1_residual, 1e-7));
    out.push(Check::le(
        "corrector orthogonality",
        chk.orth_bubble.max(chk.orth_translation).max(chk.orth_kernel),
        1e-8,
    ));

    let r = sharpness_study(&cyl, &log_spaced(1e-3, 3e-2, 6))?;
    out.push(Check::le("residual slope - 3", (r.slope_residual - 3.0).abs(), 0.1));
    out.push(Check::le("distance slope - 1", (r.slope_distance - 1.0).abs(), 0.02));
    out.push(Check::le("naive slope - 2", (r.slope_naive - 2.0).abs(), 0.1));
    out.push(Check::le("ratio drift", r.ratio_drift, 0.05));
    out.push(Check::ge("ratio limit / R", r.ratio_limit / k.r_gamma, 0.95));

    let gaps = default_gaps(&c, 9);
    let spread = window_spread(&interaction_window(&c, 1.0, &gaps)?)
        .max(window_spread(&interaction_window(&c, p / 2.0, &gaps)?))
        .max(window_spread(&derivative_window(&c, &gaps)?));
    out.push(Check::le("interaction window spread", spread, 10.0));

    let consts = ineq::empirical_constants(p, 10_000, cfg.seed);
    let worst = consts.iter().cloned().fold(0.0, f64::max);
    out.push(Check::le("inequality constants", worst, f64::MAX));

    let field = ZonalField::separable(&cyl, &cyl.bubble(0.3), |x| 1.0 + x * x);
    let mut buf = Vec::new();
    io::write_binary(&field, &mut buf)?;
    let back = io::read_binary(buf.as_slice())?;
    let same = back.profiles() == field.profiles();
    out.push(Check::le("binary round trip mismatch", if same { 0.0 } else { 1.0 }, 0.0));
    Ok(out)
}

pub fn cmd_selftest(cfg: &RunConfig) -> Outcome {
    let mut table = Table::new(&["n", "p", "check", "value", "bound", "pass", "error"]);
    let params = if cfg.params.is_empty() {
        vec![CknParams::from_pn(4.0, 3).expect("admissible")]
    } else {
        cfg.params.clone()
    };
    let mut ok = true;
    for c in params {
        match selftest_checks(cfg, c) {
            Ok(checks) => {
                for chk in checks {
                    ok &= chk.pass();
                    let mut row = pn(&c);
                    row.extend([
                        ("check", chk.name.clone().into()),
                        ("value", chk.value.into()),
                        ("bound", chk.bound.into()),
                        ("pass", chk.pass().into()),
                    ]);
                    table.push(None, row);
                }
            }
            Err(e) => {
                ok = false;
                let mut row = pn(&c);
                row.extend([("pass", false.into()), ("error", e.to_string().into())]);
                table.push(None, row);
            }
        }
    }
    Outcome { table, ok }
}

/// Runs one command and writes its table to `--out` or `stdout`.
pub fn run(command: &Command, stdout: &mut dyn Write) -> Result<bool> {
    let cfg = RunConfig::resolve(command)?;
    let outcome = match command {
        Command::Constants(_) => Outcome { table: cmd_constants(&cfg), ok: true },
        Command::Sharpness(_) => Outcome { table: cmd_sharpness(&cfg), ok: true },
        Command::Spectrum(_) => Outcome { table: cmd_spectrum(&cfg), ok: true },
        Command::Interactions(_) => Outcome { table: cmd_interactions(&cfg), ok: true },
        Command::Selftest(_) => cmd_selftest(&cfg),
    };
    let write = |w: &mut dyn Write| -> Result<()> {
        match cfg.format {
            Format::Csv => outcome.table.write_csv(w),
            Format::Json => outcome.table.write_json(w, &cfg.command, &cfg.disc, &cfg.params),
        }
    };
    match &cfg.out {
        Some(path) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            write(&mut f)?;
            f.flush()?;
        }
        None => write(stdout)?,
    }
    Ok(outcome.ok)
}
