//! Experiment configuration read from a flat `key = value` file with dotted
//! keys. The grammar and every key are documented in `docs/config.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ricci_lab_core::flow::Reference;
use ricci_lab_core::{Chart, FVariant, FlowConfig, FlowState, Gauge, Grid, MetricField, Preset};

use crate::error::HarnessError;

/// The checks a run can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckName {
    Besse(u8),
    Thm1Ricci,
    Thm1Scalar,
    DsDt,
    DfDt,
    I3,
    I5,
    I7,
    Ibp,
}

impl CheckName {
    pub const ALL: [CheckName; 15] = [
        CheckName::Besse(1),
        CheckName::Besse(2),
        CheckName::Besse(3),
        CheckName::Besse(4),
        CheckName::Besse(5),
        CheckName::Besse(6),
        CheckName::Besse(7),
        CheckName::Thm1Ricci,
        CheckName::Thm1Scalar,
        CheckName::DsDt,
        CheckName::DfDt,
        CheckName::I3,
        CheckName::I5,
        CheckName::I7,
        CheckName::Ibp,
    ];

    /// Checks whose failure makes the run exit nonzero unless configured
    /// otherwise.
    pub fn default_strict() -> BTreeSet<CheckName> {
        (1..=7).map(CheckName::Besse).chain([CheckName::Ibp]).collect()
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckName::Besse(k) => write!(f, "besse{k}"),
            CheckName::Thm1Ricci => f.write_str("thm1-ricci"),
            CheckName::Thm1Scalar => f.write_str("thm1-scalar"),
            CheckName::DsDt => f.write_str("ds-dt"),
            CheckName::DfDt => f.write_str("df-dt"),
            CheckName::I3 => f.write_str("i3"),
            CheckName::I5 => f.write_str("i5"),
            CheckName::I7 => f.write_str("i7"),
            CheckName::Ibp => f.write_str("ibp"),
        }
    }
}

impl FromStr for CheckName {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CheckName::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown check `{s}`")))
    }
}

/// Which metric anchors the DeTurck gauge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceChoice {
    /// The metric at the start of each trajectory.
    Initial,
    /// The coordinate-flat metric of the chart.
    Flat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub chart: Chart,
}

impl GridSpec {
    /// Grid of refinement level `level`: `n * 2^level` points per axis.
    pub fn grid(&self, level: usize) -> Result<Grid, HarnessError> {
        Ok(Grid::new(self.dim, self.n << level, self.length)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub a: f64,
    pub b: f64,
    pub gauge: Gauge,
    pub reference: ReferenceChoice,
    pub c_cfl: f64,
    pub u_floor: f64,
    pub spd_floor: f64,
    pub max_steps: usize,
    /// Steps of the recorded time series.
    pub steps: usize,
    pub frozen_geometry: bool,
    pub f_variant: FVariant,
}

impl FlowSpec {
    /// Core flow configuration anchored at `start` as the reference choice
    /// dictates.
    pub fn config_for(&self, start: &FlowState) -> FlowConfig {
        let reference = match self.reference {
            ReferenceChoice::Initial => Reference::new(start.g.clone()),
            ReferenceChoice::Flat => Reference::new(MetricField::flat(*start.g.grid())),
        };
        FlowConfig {
            a: self.a,
            b: self.b,
            gauge: self.gauge,
            reference: Some(reference),
            c_cfl: self.c_cfl,
            u_floor: self.u_floor,
            spd_floor: self.spd_floor,
            max_steps: self.max_steps,
            frozen_geometry: self.frozen_geometry,
            f_variant: self.f_variant,
        }
    }

    /// Same as [`Self::config_for`] in the plain gauge.
    pub fn plain_config_for(&self, start: &FlowState) -> FlowConfig {
        FlowConfig { gauge: Gauge::Plain, ..self.config_for(start) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BesseSpec {
    /// Spectral cutoff of the random directions.
    pub cutoff: usize,
    /// Entry bound of the random directions.
    pub v_amp: f64,
    /// Relative residual at or below which a variation counts as verified.
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub report: String,
    pub csv: String,
    pub csv_oracle: String,
    pub sweep: String,
}

impl OutputSpec {
    pub fn report_path(&self) -> PathBuf {
        self.dir.join(&self.report)
    }
    pub fn csv_path(&self) -> PathBuf {
        self.dir.join(&self.csv)
    }
    pub fn csv_oracle_path(&self) -> PathBuf {
        self.dir.join(&self.csv_oracle)
    }
    pub fn sweep_path(&self) -> PathBuf {
        self.dir.join(&self.sweep)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub grid: GridSpec,
    pub preset: Preset,
    pub flow: FlowSpec,
    pub checks: Vec<CheckName>,
    pub strict: BTreeSet<CheckName>,
    /// Number of grids per check: `n`, `2n`, .. `2^(levels-1) n`.
    pub levels: usize,
    /// Central-difference steps, in units of `‖g‖∞ / ‖v‖∞`.
    pub eps: Vec<f64>,
    pub besse: BesseSpec,
    pub output: OutputSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            grid: GridSpec { dim: 2, n: 32, length: std::f64::consts::TAU, chart: Chart::Identity },
            preset: Preset::FlatConst { phi: 0.0, u: 1.0 },
            flow: FlowSpec {
                a: 0.0,
                b: 0.0,
                gauge: Gauge::Plain,
                reference: ReferenceChoice::Initial,
                c_cfl: 0.1,
                u_floor: 1e-8,
                spd_floor: ricci_lab_core::metric::DEFAULT_SPD_FLOOR,
                max_steps: 100,
                steps: 10,
                frozen_geometry: false,
                f_variant: FVariant::Laplacian,
            },
            checks: CheckName::ALL.to_vec(),
            strict: CheckName::default_strict(),
            levels: 2,
            eps: vec![1e-3, 1e-4, 1e-5],
            besse: BesseSpec { cutoff: 1, v_amp: 1.0, tol: 1e-6 },
            output: OutputSpec {
                dir: PathBuf::from("out"),
                report: "report.json".into(),
                csv: "series.csv".into(),
                csv_oracle: "series_ds_oracle.csv".into(),
                sweep: "sweep.json".into(),
            },
        }
    }
}

/// Splits the text into `key -> (line, value)`, rejecting malformed lines
/// and repeated keys.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, (usize, String)>, HarnessError> {
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::Parse { line: line_no, msg: "expected `key = value`".into() })?;
        let key = key.trim();
        let value = value.trim();
        let valid_key = !key.is_empty()
            && key.split('.').all(|part| {
                !part.is_empty() && part.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
            });
        if !valid_key {
            return Err(HarnessError::Parse { line: line_no, msg: format!("invalid key `{key}`") });
        }
        if value.is_empty() {
            return Err(HarnessError::Parse { line: line_no, msg: format!("empty value for `{key}`") });
        }
        if out.insert(key.to_string(), (line_no, value.to_string())).is_some() {
            return Err(HarnessError::Parse { line: line_no, msg: format!("duplicate key `{key}`") });
        }
    }
    Ok(out)
}

struct Pairs(BTreeMap<String, (usize, String)>);

impl Pairs {
    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, HarnessError> {
        match self.0.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| HarnessError::Parse { line, msg: format!("bad value `{v}` for `{key}`") }),
        }
    }

    fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, HarnessError> {
        Ok(self.take(key)?.unwrap_or(default))
    }

    fn take_word(&mut self, key: &str, choices: &[&str]) -> Result<Option<String>, HarnessError> {
        match self.0.remove(key) {
            None => Ok(None),
            Some((_, v)) if choices.contains(&v.as_str()) => Ok(Some(v)),
            Some((line, v)) => Err(HarnessError::Parse {
                line,
                msg: format!("`{key}` must be one of {}, got `{v}`", choices.join(", ")),
            }),
        }
    }

    fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>, HarnessError> {
        match self.0.remove(key) {
            None => Ok(None),
            Some((line, v)) => {
                if v == "none" {
                    return Ok(Some(Vec::new()));
                }
                v.split(',')
                    .map(|s| s.trim().parse().map_err(|_| HarnessError::Parse { line, msg: format!("bad list entry `{}` in `{key}`", s.trim()) }))
                    .collect::<Result<Vec<T>, _>>()
                    .map(Some)
            }
        }
    }
}

fn check_list(v: Vec<String>) -> Result<Vec<CheckName>, HarnessError> {
    let mut out = Vec::new();
    for name in v {
        if name == "all" {
            out.extend(CheckName::ALL);
        } else if name == "besse" {
            out.extend((1..=7).map(CheckName::Besse));
        } else {
            out.push(name.parse()?);
        }
    }
    let mut seen = BTreeSet::new();
    out.retain(|c| seen.insert(*c));
    Ok(out)
}

impl ExperimentConfig {
    /// Parses config text. Relative output directories are resolved
    /// against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, HarnessError> {
        let d = Self::default();
        let mut p = Pairs(parse_pairs(text)?);
        let seed = p.take_or("seed", d.seed)?;

        let dim = p.take_or("grid.dim", d.grid.dim)?;
        let n = p.take_or("grid.n", d.grid.n)?;
        let length = p.take_or("grid.length", d.grid.length)?;
        let chart = match p.take_word("grid.chart", &["identity", "shear"])?.as_deref() {
            Some("shear") => Chart::Shear { alpha: p.take_or("grid.shear_alpha", 0.3)? },
            _ => Chart::Identity,
        };

        let preset_name = p
            .take_word("preset.name", &["flat-const", "conformal-bump", "random-smooth"])?
            .unwrap_or_else(|| "flat-const".into());
        let preset = match preset_name.as_str() {
            "flat-const" => Preset::FlatConst { phi: p.take_or("preset.phi", 0.0)?, u: p.take_or("preset.u", 1.0)? },
            "conformal-bump" => Preset::ConformalBump {
                amp: p.take_or("preset.amp", 0.2)?,
                freq: p.take_or("preset.freq", 1.0)?,
                phi_amp: p.take_or("preset.phi_amp", 0.1)?,
                u_amp: p.take_or("preset.u_amp", 0.2)?,
            },
            _ => Preset::RandomSmooth {
                seed,
                cutoff: p.take_or("preset.cutoff", 1)?,
                amp: p.take_or("preset.amp", 0.002)?,
                phi_amp: p.take_or("preset.phi_amp", 0.3)?,
                u_amp: p.take_or("preset.u_amp", 0.2)?,
            },
        };

        let df = &d.flow;
        let gauge = match p.take_word("flow.gauge", &["plain", "deturck"])?.as_deref() {
            Some("deturck") => Gauge::DeTurck,
            _ => df.gauge,
        };
        let reference = match p.take_word("flow.reference", &["initial", "flat"])?.as_deref() {
            Some("flat") => ReferenceChoice::Flat,
            _ => df.reference,
        };
        let f_variant = match p.take_word("flow.f_variant", &["laplacian", "linear"])?.as_deref() {
            Some("linear") => FVariant::Linear,
            _ => df.f_variant,
        };
        let flow = FlowSpec {
            a: p.take_or("flow.a", df.a)?,
            b: p.take_or("flow.b", df.b)?,
            gauge,
            reference,
            c_cfl: p.take_or("flow.c_cfl", df.c_cfl)?,
            u_floor: p.take_or("flow.u_floor", df.u_floor)?,
            spd_floor: p.take_or("flow.spd_floor", df.spd_floor)?,
            max_steps: p.take_or("flow.max_steps", df.max_steps)?,
            steps: p.take_or("flow.steps", df.steps)?,
            frozen_geometry: p.take_or("flow.frozen_geometry", df.frozen_geometry)?,
            f_variant,
        };

        let checks = match p.take_list::<String>("checks.list")? {
            Some(v) => check_list(v)?,
            None => d.checks.clone(),
        };
        let strict = match p.take_list::<String>("checks.strict")? {
            Some(v) => check_list(v)?.into_iter().collect(),
            None => d.strict.clone(),
        };
        let levels = p.take_or("checks.levels", d.levels)?;
        let eps = p.take_list("checks.eps")?.unwrap_or(d.eps.clone());

        let besse = BesseSpec {
            cutoff: p.take_or("besse.cutoff", d.besse.cutoff)?,
            v_amp: p.take_or("besse.v_amp", d.besse.v_amp)?,
            tol: p.take_or("besse.tol", d.besse.tol)?,
        };

        let dir: PathBuf = p.take_or("output.dir", d.output.dir.clone())?;
        let output = OutputSpec {
            dir: if dir.is_absolute() { dir } else { base.join(dir) },
            report: p.take_or("output.report", d.output.report.clone())?,
            csv: p.take_or("output.csv", d.output.csv.clone())?,
            csv_oracle: p.take_or("output.csv_oracle", d.output.csv_oracle.clone())?,
            sweep: p.take_or("output.sweep", d.output.sweep.clone())?,
        };

        if let Some((key, (line, _))) = p.0.into_iter().next() {
            return Err(HarnessError::Parse { line, msg: format!("unknown key `{key}`") });
        }
        let cfg = Self { seed, grid: GridSpec { dim, n, length, chart }, preset, flow, checks, strict, levels, eps, besse, output };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(path.to_path_buf(), e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.grid.dim != 2 && self.grid.dim != 3 {
            return bad(format!("grid.dim must be 2 or 3, got {}", self.grid.dim));
        }
        if self.grid.n < 8 {
            return bad(format!("grid.n must be at least 8, got {}", self.grid.n));
        }
        if !(self.grid.length > 0.0 && self.grid.length.is_finite()) {
            return bad("grid.length must be positive".into());
        }
        if self.levels == 0 || self.levels > 4 {
            return bad(format!("checks.levels must lie in 1..=4, got {}", self.levels));
        }
        if self.eps.len() < 2 || self.eps.iter().any(|e| !(*e > 0.0)) {
            return bad("checks.eps needs at least two positive steps".into());
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return bad("checks.eps must be strictly decreasing".into());
        }
        if self.eps.len() >= 3 {
            let r0 = self.eps[0] / self.eps[1];
            if self.eps.windows(2).any(|w| ((w[0] / w[1]) / r0 - 1.0).abs() > 1e-9) {
                return bad("checks.eps must be a geometric sequence".into());
            }
        }
        if self.flow.steps > self.flow.max_steps {
            return bad(format!("flow.steps = {} exceeds flow.max_steps = {}", self.flow.steps, self.flow.max_steps));
        }
        if !(self.besse.tol > 0.0) || !(self.besse.v_amp > 0.0) {
            return bad("besse.tol and besse.v_amp must be positive".into());
        }
        let probe = FlowConfig {
            a: self.flow.a,
            b: self.flow.b,
            c_cfl: self.flow.c_cfl,
            u_floor: self.flow.u_floor,
            spd_floor: self.flow.spd_floor,
            ..FlowConfig::default()
        };
        probe.validate()?;
        ricci_lab_core::InitialData::new(&self.preset, self.grid.dim)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_text() {
        let c = ExperimentConfig::parse("# nothing\n\n", Path::new("/tmp")).unwrap();
        assert_eq!(c.checks.len(), 15);
        assert_eq!(c.output.dir, PathBuf::from("/tmp/out"));
        assert!(c.strict.contains(&CheckName::Ibp));
        assert!(!c.strict.contains(&CheckName::DsDt));
    }

    #[test]
    fn full_file() {
        let text = "seed = 7\ngrid.n = 24\npreset.name = random-smooth\npreset.cutoff = 2\n\
                    flow.gauge = deturck\nflow.reference = flat\nchecks.list = besse, ibp, thm1-scalar\n\
                    checks.strict = none\n";
        let c = ExperimentConfig::parse(text, Path::new(".")).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.grid.n, 24);
        assert!(matches!(c.preset, Preset::RandomSmooth { seed: 7, cutoff: 2, .. }));
        assert_eq!(c.flow.gauge, Gauge::DeTurck);
        assert_eq!(c.flow.reference, ReferenceChoice::Flat);
        assert_eq!(c.checks.len(), 9);
        assert!(c.strict.is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        let base = Path::new(".");
        for text in [
            "grid.n 32",
            "Grid.n = 32",
            "grid.n = 32\ngrid.n = 48",
            "grid.n = many",
            "grid.unknown = 1",
            "checks.list = besse9",
            "flow.gauge = sideways",
            "checks.eps = 1e-4, 1e-3",
            "grid.dim = 4",
            "flow.c_cfl = 0.9",
        ] {
            assert!(ExperimentConfig::parse(text, base).is_err(), "{text}");
        }
    }

    #[test]
    fn check_names_round_trip() {
        for c in CheckName::ALL {
            assert_eq!(c.to_string().parse::<CheckName>().unwrap(), c);
        }
    }
}
