//! Robustness sweeps: a frozen policy is evaluated while one vessel
//! parameter is varied over a grid, with the same episode seeds at every
//! grid point so curves differ only by the parameter.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::Policy;
use crate::env::EnvConfig;
use crate::kinematics::{NOMINAL_MASS, NOMINAL_TURN_RATE};
use crate::plot::{self, LinePlot, PlotFormat};
use crate::trainer::evaluate;
use crate::{Error, Result};

pub const SWEEP_SCHEMA_VERSION: u32 = 1;
pub const SWEEP_COLUMNS: [&str; 7] = [
    "param",
    "value",
    "mean_return",
    "std_return",
    "success_rate",
    "collision_rate",
    "n_episodes",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Mass,
    TurnRate,
}

impl SweepParam {
    pub fn nominal(self) -> f64 {
        match self {
            Self::Mass => NOMINAL_MASS,
            Self::TurnRate => NOMINAL_TURN_RATE,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mass => "mass",
            Self::TurnRate => "turn_rate",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mass" => Ok(Self::Mass),
            "turn_rate" | "turn-rate" => Ok(Self::TurnRate),
            other => Err(Error::Usage(format!(
                "unknown sweep parameter '{other}' (expected mass or turn_rate)"
            ))),
        }
    }
}

/// How grid values are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grid {
    Explicit { values: Vec<f64> },
    Linear { lo: f64, hi: f64, count: usize },
    Log { lo: f64, hi: f64, count: usize },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let vals = match self {
            Self::Explicit { values } => values.clone(),
            Self::Linear { lo, hi, count } => spaced(*lo, *hi, *count, false)?,
            Self::Log { lo, hi, count } => spaced(*lo, *hi, *count, true)?,
        };
        if vals.is_empty() {
            return Err(Error::InvalidInput("sweep grid is empty".into()));
        }
        if let Some(v) = vals.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "grid value {v} must be finite and positive"
            )));
        }
        Ok(vals)
    }
}

fn spaced(lo: f64, hi: f64, count: usize, log: bool) -> Result<Vec<f64>> {
    if count == 0 || !(lo.is_finite() && hi.is_finite()) || lo > hi || (log && lo <= 0.0) {
        return Err(Error::InvalidInput(format!(
            "bad grid range [{lo}, {hi}] with {count} points"
        )));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let k = (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            let f = i as f64 / k;
            if i == 0 {
                lo
            } else if i == count - 1 {
                hi
            } else if log {
                // Powers of an exact ratio land on round values (e.g. 7·100^0.5 = 70).
                lo * (hi / lo).powf(f)
            } else {
                lo + (hi - lo) * i as f64 / k
            }
        })
        .collect())
}

/// The `[sweep]` config section: defaults for the CLI sweep command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub episodes: usize,
    pub seed: u64,
    pub points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            episodes: 20,
            seed: 50_000,
            points: 11,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.points == 0 {
            return Err(Error::Config("sweep.episodes and sweep.points must be >= 1".into()));
        }
        Ok(())
    }
}

/// Default grid per parameter: mass linear over a quarter to four times
/// nominal, turn rate log-spaced over two decades around nominal.
pub fn default_grid(param: SweepParam, count: usize) -> Grid {
    match param {
        SweepParam::Mass => Grid::Linear {
            lo: 0.25 * NOMINAL_MASS,
            hi: 4.0 * NOMINAL_MASS,
            count,
        },
        SweepParam::TurnRate => Grid::Log {
            lo: 0.1 * NOMINAL_TURN_RATE,
            hi: 10.0 * NOMINAL_TURN_RATE,
            count,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub grid: Grid,
    pub episodes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub param: SweepParam,
    pub value: f64,
    pub mean_return: f64,
    pub std_return: f64,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub n_episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub param: SweepParam,
    pub policy: String,
    pub env_hash: String,
    pub seed: u64,
    pub records: Vec<SweepRecord>,
}

impl SweepCurve {
    /// The record whose value equals the nominal parameter, if the grid has it.
    pub fn nominal(&self) -> Option<&SweepRecord> {
        let nominal = self.param.nominal();
        self.records
            .iter()
            .find(|r| (r.value - nominal).abs() <= 1e-9 * nominal)
    }
}

/// Evaluates `policy` at every grid value; all other vessel parameters stay
/// as in `env_cfg`. Grid points run in parallel but each uses seeds
/// `spec.seed..spec.seed+episodes`, so results do not depend on scheduling.
pub fn run_sweep(policy: &dyn Policy, env_cfg: &EnvConfig, spec: &SweepSpec) -> Result<SweepCurve> {
    let mut values = spec.grid.values()?;
    values.sort_by(f64::total_cmp);
    env_cfg.validate()?;
    let records = values
        .par_iter()
        .map(|&value| {
            let params = match spec.param {
                SweepParam::Mass => env_cfg.vessel.with_mass(value),
                SweepParam::TurnRate => env_cfg.vessel.with_turn_rate(value),
            };
            params.validate()?;
            let stats = evaluate(policy, env_cfg, spec.episodes, spec.seed, Some(params))?;
            Ok(SweepRecord {
                param: spec.param,
                value,
                mean_return: stats.mean_return,
                std_return: stats.std_return,
                success_rate: stats.success_rate,
                collision_rate: stats.collision_rate,
                n_episodes: stats.n_episodes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepCurve {
        param: spec.param,
        policy: policy.name(),
        env_hash: env_cfg.hash(),
        seed: spec.seed,
        records,
    })
}

#[derive(Debug, Clone)]
pub struct SweepOutputs {
    pub csv: PathBuf,
    pub meta: PathBuf,
    pub plot: Option<PathBuf>,
}

/// Writes `<stem>.csv`, `<stem>.meta.json` and optionally a plot of mean
/// return with a ±1 std band.
pub fn write_outputs(
    curve: &SweepCurve,
    dir: &Path,
    stem: &str,
    plot_format: Option<PlotFormat>,
) -> Result<SweepOutputs> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(SWEEP_COLUMNS)?;
    for r in &curve.records {
        w.write_record([
            r.param.to_string(),
            r.value.to_string(),
            r.mean_return.to_string(),
            r.std_return.to_string(),
            r.success_rate.to_string(),
            r.collision_rate.to_string(),
            r.n_episodes.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let meta_path = dir.join(format!("{stem}.meta.json"));
    let meta = serde_json::json!({
        "schema_version": SWEEP_SCHEMA_VERSION,
        "columns": SWEEP_COLUMNS,
        "param": curve.param,
        "nominal": curve.param.nominal(),
        "policy": curve.policy,
        "env_hash": curve.env_hash,
        "seed": curve.seed,
    });
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&meta_path, e))?;

    let plot = match plot_format {
        None => None,
        Some(fmt) => {
            let path = dir.join(format!("{stem}.{}", fmt.extension()));
            let lp = LinePlot {
                title: format!("{} sweep ({})", curve.param, curve.policy),
                x_label: curve.param.to_string(),
                y_label: "mean return".into(),
                x: curve.records.iter().map(|r| r.value).collect(),
                y: curve.records.iter().map(|r| r.mean_return).collect(),
                band: curve.records.iter().map(|r| r.std_return).collect(),
                log_x: matches!(curve.param, SweepParam::TurnRate),
                marker_x: Some(curve.param.nominal()),
            };
            plot::write_line_plot(&lp, fmt, &path)?;
            Some(path)
        }
    };
    Ok(SweepOutputs {
        csv: csv_path,
        meta: meta_path,
        plot,
    })
}

/// Reads a sweep CSV back into records.
pub fn read_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != SWEEP_COLUMNS {
        return Err(Error::Serde(format!("{}: unexpected sweep columns", path.display())));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::Serde(format!("{}: bad number '{s}'", path.display())))
    };
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        out.push(SweepRecord {
            param: row[0].parse()?,
            value: num(&row[1])?,
            mean_return: num(&row[2])?,
            std_return: num(&row[3])?,
            success_rate: num(&row[4])?,
            collision_rate: num(&row[5])?,
            n_episodes: row[6]
                .parse()
                .map_err(|_| Error::Serde(format!("{}: bad episode count", path.display())))?,
        });
    }
    Ok(out)
}
