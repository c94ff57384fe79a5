//! Command-line flags, the flat `key=value` config file, and their merge.

use crate::cylinder::Discretization;
use crate::error::{CknError, Result};
use crate::params::CknParams;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "ckn", version, about = "Degenerate stability numerics on the Felli-Schneider curve")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// E0, F and both routes to R for each (p, n).
    Constants(RunArgs),
    /// Slopes of the corrected and naive families.
    Sharpness(RunArgs),
    /// Lowest eigenvalues per harmonic sector.
    Spectrum(RunArgs),
    /// Two-bubble interaction windows and bubble-sum residuals.
    Interactions(RunArgs),
    /// Checks the module invariants and exits non-zero on failure.
    Selftest(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Constants(_) => "constants",
            Command::Sharpness(_) => "sharpness",
            Command::Spectrum(_) => "spectrum",
            Command::Interactions(_) => "interactions",
            Command::Selftest(_) => "selftest",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Constants(a)
            | Command::Sharpness(a)
            | Command::Spectrum(a)
            | Command::Interactions(a)
            | Command::Selftest(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// Flat key=value file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dimension(s): repeatable, comma list, or a:b range.
    #[arg(long = "n", value_delimiter = ',')]
    pub n: Vec<String>,
    /// Exponent(s): repeatable, comma list, or a:b:step range.
    #[arg(long = "p", value_delimiter = ',', allow_hyphen_values = true)]
    pub p: Vec<String>,
    #[arg(long = "grid-N")]
    pub grid_n: Option<usize>,
    #[arg(long = "grid-S")]
    pub grid_s: Option<f64>,
    #[arg(long = "L")]
    pub l: Option<usize>,
    #[arg(long = "M")]
    pub m: Option<usize>,
    #[arg(long = "mu", value_delimiter = ',')]
    pub mu: Vec<f64>,
    #[arg(long = "gaps", value_delimiter = ',')]
    pub gaps: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Emit one row per μ instead of the slope summary.
    #[arg(long)]
    pub samples: bool,
    /// Eigenvalues per sector.
    #[arg(long)]
    pub k: Option<usize>,
}

/// Fully resolved run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: String,
    pub params: Vec<CknParams>,
    pub disc: Discretization,
    pub mus: Option<Vec<f64>>,
    pub gaps: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub samples: bool,
    pub k: usize,
}

const KEYS: &[&str] = &[
    "n", "p", "grid-N", "grid-S", "L", "M", "mu", "gaps", "out", "format", "seed", "samples", "k",
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CknError::Parse(format!("line {}: expected key=value", i + 1)))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(CknError::Parse(format!("line {}: unknown key '{k}'", i + 1)));
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Expands `a`, `a,b,...` or `a:b[:step]` (inclusive, step defaults to 1).
pub fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| CknError::Parse(format!("'{s}': {e}")))
    };
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.len() {
            1 => out.push(num(parts[0])?),
            2 | 3 => {
                let (a, b) = (num(parts[0])?, num(parts[1])?);
                let step = if parts.len() == 3 { num(parts[2])? } else { 1.0 };
                if !(step > 0.0) || b < a {
                    return Err(CknError::Parse(format!("bad range '{item}'")));
                }
                let count = ((b - a) / step + 1e-9).floor() as usize;
                out.extend((0..=count).map(|i| round12(a + i as f64 * step)));
            }
            _ => return Err(CknError::Parse(format!("bad range '{item}'"))),
        }
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.trim()
        .parse()
        .map_err(|e| CknError::Parse(format!("{key}='{v}': {e}")))
}

impl RunConfig {
    pub fn resolve(command: &Command) -> Result<Self> {
        let args = command.args();
        let file = match &args.config {
            Some(path) => read_config(path)?,
            None => BTreeMap::new(),
        };
        let list = |cli: &[String], key: &str| -> Result<Vec<f64>> {
            if !cli.is_empty() {
                parse_values(&cli.join(","))
            } else if let Some(v) = file.get(key) {
                parse_values(v)
            } else {
                Ok(Vec::new())
            }
        };
        let floats = |cli: &[f64], key: &str| -> Result<Option<Vec<f64>>> {
            if !cli.is_empty() {
                Ok(Some(cli.to_vec()))
            } else if let Some(v) = file.get(key) {
                Ok(Some(parse_values(v)?))
            } else {
                Ok(None)
            }
        };
        fn pick<T: std::str::FromStr>(
            cli: Option<T>,
            file: &BTreeMap<String, String>,
            key: &str,
        ) -> Result<Option<T>>
        where
            T::Err: std::fmt::Display,
        {
            match cli {
                Some(v) => Ok(Some(v)),
                None => file.get(key).map(|v| parse_num(key, v)).transpose(),
            }
        }

        let ns = list(&args.n, "n")?;
        let ps = list(&args.p, "p")?;
        let mut params = Vec::new();
        for &n in &ns {
            if n.fract() != 0.0 || n < 2.0 {
                return Err(CknError::InvalidArgument(format!("dimension must be an integer >= 2, got {n}")));
            }
            for &p in &ps {
                params.push(CknParams::from_pn(p, n as usize)?);
            }
        }

        let defaults = Discretization::default();
        let disc = Discretization {
            grid_points: pick(args.grid_n, &file, "grid-N")?,
            half_width: pick(args.grid_s, &file, "grid-S")?,
            l_max: pick(args.l, &file, "L")?.unwrap_or(defaults.l_max),
            angular_nodes: pick(args.m, &file, "M")?.unwrap_or(defaults.angular_nodes),
        };
        let format = match args.format {
            Some(f) => f,
            None => match file.get("format").map(String::as_str) {
                None | Some("csv") => Format::Csv,
                Some("json") => Format::Json,
                Some(other) => return Err(CknError::Parse(format!("unknown format '{other}'"))),
            },
        };
        let samples = args.samples
            || file
                .get("samples")
                .map(|v| parse_num::<bool>("samples", v))
                .transpose()?
                .unwrap_or(false);
        Ok(Self {
            command: command.name().to_string(),
            params,
            disc,
            mus: floats(&args.mu, "mu")?,
            gaps: floats(&args.gaps, "gaps")?,
            out: args.out.clone().or_else(|| file.get("out").map(PathBuf::from)),
            format,
            seed: pick(args.seed, &file, "seed")?.unwrap_or(0),
            samples,
            k: pick(args.k, &file, "k")?.unwrap_or(3),
        })
    }
}

fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_config_text(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_lists() {
        assert_eq!(parse_values("4:5:0.5").unwrap(), vec![4.0, 4.5, 5.0]);
        assert_eq!(parse_values("3,4.5").unwrap(), vec![3.0, 4.5]);
        assert_eq!(parse_values("2:4").unwrap(), vec![2.0, 3.0, 4.0]);
        assert_eq!(parse_values("3.1:3.3:0.1").unwrap(), vec![3.1, 3.2, 3.3]);
        assert!(parse_values("5:4:1").is_err());
        assert!(parse_values("x").is_err());
    }

    #[test]
    fn config_text() {
        let m = parse_config_text("# sweep\nn = 3\np=4:5:0.5  # range\n\nformat=json\n").unwrap();
        assert_eq!(m["p"], "4:5:0.5");
        assert_eq!(m["format"], "json");
        assert!(parse_config_text("colour = red").is_err());
        assert!(parse_config_text("n 3").is_err());
    }

    #[test]
    fn cli_overrides_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "n=3\np=4\nL=6\nseed=9\n").unwrap();
        let cli = Cli::try_parse_from([
            "ckn", "constants", "--config", path.to_str().unwrap(), "--p", "3.5", "--L", "5",
        ])
        .unwrap();
        let cfg = RunConfig::resolve(&cli.command).unwrap();
        assert_eq!(cfg.params.len(), 1);
        assert_eq!(cfg.params[0].p, 3.5);
        assert_eq!(cfg.disc.l_max, 5);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn inadmissible_pairs_rejected() {
        let cli = Cli::try_parse_from(["ckn", "constants", "--n", "3", "--p", "6"]).unwrap();
        assert!(RunConfig::resolve(&cli.command).is_err());
    }
}
