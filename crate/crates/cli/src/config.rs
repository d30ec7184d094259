//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment. Every key can also be set
//! from the command line, which takes precedence over the file. Numbers may
//! be written as plain decimals or as multiples of pi (`pi/2`, `3*pi/4`).

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::path::PathBuf;

use spinmetro_core::protocol::{optimal_omega_a, parity_n2};
use spinmetro_core::{AncillaPrep, ProbePrep, ProtocolParams, QfiMethod, Schedule, Sign};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Qfi,
    Cfi,
    Sweep,
    Figure,
    Validate,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Qfi => "qfi",
            Mode::Cfi => "cfi",
            Mode::Sweep => "sweep",
            Mode::Figure => "figure",
            Mode::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrepKind {
    PolarizedPlus,
    PolarizedMinus,
    Superposed,
    GhzX,
    DickeMixture,
    Thermal,
}

impl PrepKind {
    pub fn name(self) -> &'static str {
        match self {
            PrepKind::PolarizedPlus => "polarized_plus",
            PrepKind::PolarizedMinus => "polarized_minus",
            PrepKind::Superposed => "superposed",
            PrepKind::GhzX => "ghz_x",
            PrepKind::DickeMixture => "dicke_mixture",
            PrepKind::Thermal => "thermal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AncillaKind {
    Plus,
    Minus,
    Ground,
    Excited,
    Bloch,
}

impl AncillaKind {
    pub fn name(self) -> &'static str {
        match self {
            AncillaKind::Plus => "plus",
            AncillaKind::Minus => "minus",
            AncillaKind::Ground => "ground",
            AncillaKind::Excited => "excited",
            AncillaKind::Bloch => "bloch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Synchronous,
    MeasurementDelay,
    EncodingDelay,
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Synchronous => "synchronous",
            ScheduleKind::MeasurementDelay => "measurement_delay",
            ScheduleKind::EncodingDelay => "encoding_delay",
        }
    }
}

/// Swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    N,
    T1,
    T2,
    Theta,
    Dt,
    Beta,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::N => "n",
            SweepAxis::T1 => "t1",
            SweepAxis::T2 => "t2",
            SweepAxis::Theta => "theta",
            SweepAxis::Dt => "dt",
            SweepAxis::Beta => "beta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    /// Pure-branch formula for pure probes, SLD oracle otherwise.
    Auto,
    One(QfiMethod),
    All,
}

impl MethodChoice {
    pub fn name(self) -> &'static str {
        match self {
            MethodChoice::Auto => "auto",
            MethodChoice::One(m) => m.name(),
            MethodChoice::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// ωA given explicitly or derived from the unitarity condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OmegaA {
    /// (N + 1 + 2n2)π/(4 t_frame) with the parity rule for n2.
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub n: u32,
    pub omega_p: f64,
    pub omega_a: OmegaA,
    pub g: f64,
    pub t1: f64,
    pub t2: f64,
    pub theta: f64,
    pub frame_t1: Option<f64>,
    pub prep: PrepKind,
    pub a: f64,
    pub b: f64,
    pub phi: f64,
    pub phi0: f64,
    pub beta: f64,
    pub weights: Vec<f64>,
    pub ancilla: AncillaKind,
    pub ancilla_theta: f64,
    pub ancilla_phi: f64,
    pub schedule: ScheduleKind,
    pub dt: f64,
    pub axis: Option<SweepAxis>,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub method: MethodChoice,
    pub figure: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub tol: Option<f64>,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Qfi,
            n: 10,
            omega_p: 10.0,
            omega_a: OmegaA::Auto,
            g: 1.0,
            t1: FRAC_PI_2,
            t2: 0.0,
            theta: 0.0,
            frame_t1: None,
            prep: PrepKind::PolarizedPlus,
            a: 1.0,
            b: 0.0,
            phi: 0.0,
            phi0: 0.0,
            beta: 1.0,
            weights: Vec::new(),
            ancilla: AncillaKind::Plus,
            ancilla_theta: 0.0,
            ancilla_phi: 0.0,
            schedule: ScheduleKind::Synchronous,
            dt: 0.0,
            axis: None,
            start: 0.0,
            stop: 1.0,
            points: 11,
            method: MethodChoice::Auto,
            figure: None,
            out: None,
            format: Format::Csv,
            tol: None,
            jobs: 0,
        }
    }
}

/// Every configuration key, in serialization order.
pub const KEYS: [&str; 31] = [
    "mode",
    "n",
    "omega_p",
    "omega_a",
    "g",
    "t1",
    "t2",
    "theta",
    "frame_t1",
    "prep",
    "a",
    "b",
    "phi",
    "phi0",
    "beta",
    "weights",
    "ancilla",
    "ancilla_theta",
    "ancilla_phi",
    "schedule",
    "dt",
    "axis",
    "start",
    "stop",
    "points",
    "method",
    "figure",
    "out",
    "format",
    "tol",
    "jobs",
];

const NONE: &str = "none";

/// Parses a finite real, also accepting `pi`, `k*pi`, `pi/m` and `k*pi/m`.
pub fn parse_number(key: &str, raw: &str) -> Result<f64> {
    let bad = || CliError::config(format!("{key}: '{raw}' is not a finite number"));
    let text = raw.trim();
    let value = if let Ok(v) = text.parse::<f64>() {
        v
    } else {
        let (num, den) = match text.split_once('/') {
            Some((n, d)) => (n.trim(), Some(d.trim())),
            None => (text, None),
        };
        let factor = match num {
            "pi" => 1.0,
            "-pi" => -1.0,
            _ => num
                .strip_suffix("pi")
                .map(|k| k.trim_end().trim_end_matches('*').trim())
                .ok_or_else(bad)?
                .parse::<f64>()
                .map_err(|_| bad())?,
        };
        let den = match den {
            Some(d) => d.parse::<f64>().map_err(|_| bad())?,
            None => 1.0,
        };
        if den == 0.0 {
            return Err(bad());
        }
        factor * PI / den
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

fn parse_count(key: &str, raw: &str) -> Result<u64> {
    raw.trim()
        .parse::<u64>()
        .map_err(|_| CliError::config(format!("{key}: '{raw}' is not a non-negative integer")))
}

fn parse_optional(key: &str, raw: &str) -> Result<Option<f64>> {
    if raw.trim() == NONE {
        Ok(None)
    } else {
        parse_number(key, raw).map(Some)
    }
}

fn unknown_choice(key: &str, raw: &str, allowed: &[&str]) -> CliError {
    CliError::config(format!(
        "{key}: '{raw}' is not one of {}",
        allowed.join(", ")
    ))
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let v = raw.trim();
        match key {
            "mode" => {
                self.mode = match v {
                    "qfi" => Mode::Qfi,
                    "cfi" => Mode::Cfi,
                    "sweep" => Mode::Sweep,
                    "figure" => Mode::Figure,
                    "validate" => Mode::Validate,
                    _ => {
                        return Err(unknown_choice(
                            key,
                            v,
                            &["qfi", "cfi", "sweep", "figure", "validate"],
                        ))
                    }
                }
            }
            "n" => {
                let n = parse_count(key, v)?;
                self.n = u32::try_from(n)
                    .ok()
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| CliError::config("n must be between 1 and 2^32 - 1"))?;
            }
            "omega_p" => self.omega_p = parse_number(key, v)?,
            "omega_a" => {
                self.omega_a = if v == "auto" {
                    OmegaA::Auto
                } else {
                    OmegaA::Value(parse_number(key, v)?)
                }
            }
            "g" => self.g = parse_number(key, v)?,
            "t1" => self.t1 = parse_number(key, v)?,
            "t2" => self.t2 = parse_number(key, v)?,
            "theta" => self.theta = parse_number(key, v)?,
            "frame_t1" => self.frame_t1 = parse_optional(key, v)?,
            "prep" => {
                self.prep = match v {
                    "polarized_plus" => PrepKind::PolarizedPlus,
                    "polarized_minus" => PrepKind::PolarizedMinus,
                    "superposed" => PrepKind::Superposed,
                    "ghz_x" => PrepKind::GhzX,
                    "dicke_mixture" => PrepKind::DickeMixture,
                    "thermal" => PrepKind::Thermal,
                    _ => {
                        return Err(unknown_choice(
                            key,
                            v,
                            &[
                                "polarized_plus",
                                "polarized_minus",
                                "superposed",
                                "ghz_x",
                                "dicke_mixture",
                                "thermal",
                            ],
                        ))
                    }
                }
            }
            "a" => self.a = parse_number(key, v)?,
            "b" => self.b = parse_number(key, v)?,
            "phi" => self.phi = parse_number(key, v)?,
            "phi0" => self.phi0 = parse_number(key, v)?,
            "beta" => self.beta = parse_number(key, v)?,
            "weights" => {
                self.weights = if v.is_empty() {
                    Vec::new()
                } else {
                    v.split(',')
                        .map(|w| parse_number(key, w))
                        .collect::<Result<_>>()?
                }
            }
            "ancilla" => {
                self.ancilla = match v {
                    "plus" => AncillaKind::Plus,
                    "minus" => AncillaKind::Minus,
                    "ground" => AncillaKind::Ground,
                    "excited" => AncillaKind::Excited,
                    "bloch" => AncillaKind::Bloch,
                    _ => {
                        return Err(unknown_choice(
                            key,
                            v,
                            &["plus", "minus", "ground", "excited", "bloch"],
                        ))
                    }
                }
            }
            "ancilla_theta" => self.ancilla_theta = parse_number(key, v)?,
            "ancilla_phi" => self.ancilla_phi = parse_number(key, v)?,
            "schedule" => {
                self.schedule = match v {
                    "synchronous" => ScheduleKind::Synchronous,
                    "measurement_delay" => ScheduleKind::MeasurementDelay,
                    "encoding_delay" => ScheduleKind::EncodingDelay,
                    _ => {
                        return Err(unknown_choice(
                            key,
                            v,
                            &["synchronous", "measurement_delay", "encoding_delay"],
                        ))
                    }
                }
            }
            "dt" => self.dt = parse_number(key, v)?,
            "axis" => {
                self.axis = match v {
                    NONE => None,
                    "n" | "N" => Some(SweepAxis::N),
                    "t1" => Some(SweepAxis::T1),
                    "t2" => Some(SweepAxis::T2),
                    "theta" => Some(SweepAxis::Theta),
                    "dt" => Some(SweepAxis::Dt),
                    "beta" => Some(SweepAxis::Beta),
                    _ => {
                        return Err(unknown_choice(
                            key,
                            v,
                            &["N", "t1", "t2", "theta", "dt", "beta"],
                        ))
                    }
                }
            }
            "start" => self.start = parse_number(key, v)?,
            "stop" => self.stop = parse_number(key, v)?,
            "points" => self.points = parse_count(key, v)? as usize,
            "method" => {
                self.method = match v {
                    "auto" => MethodChoice::Auto,
                    "all" => MethodChoice::All,
                    other => MethodChoice::One(other.parse().map_err(|_| {
                        unknown_choice(key, v, &["pure", "spectral", "sld", "all", "auto"])
                    })?),
                }
            }
            "figure" => self.figure = if v == NONE { None } else { Some(v.to_string()) },
            "out" => {
                self.out = if v == NONE {
                    None
                } else {
                    Some(PathBuf::from(v))
                }
            }
            "format" => {
                self.format = match v {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    _ => return Err(unknown_choice(key, v, &["csv", "json"])),
                }
            }
            "tol" => {
                self.tol = parse_optional(key, v)?;
                if matches!(self.tol, Some(t) if t <= 0.0) {
                    return Err(CliError::config("tol must be positive"));
                }
            }
            "jobs" => self.jobs = parse_count(key, v)? as usize,
            _ => return Err(CliError::config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Parses configuration text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        config.merge_text(text)?;
        Ok(config)
    }

    /// Applies the assignments in `text`; a key may appear only once.
    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                CliError::config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(CliError::config(format!(
                    "line {}: duplicate key '{key}'",
                    lineno + 1
                )));
            }
            self.set(key, value)
                .map_err(|e| CliError::config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    /// Textual value of one key, exactly re-parseable.
    pub fn get(&self, key: &str) -> Option<String> {
        let num = |x: f64| format!("{x}");
        let opt = |x: Option<f64>| x.map_or_else(|| NONE.to_string(), num);
        Some(match key {
            "mode" => self.mode.name().into(),
            "n" => self.n.to_string(),
            "omega_p" => num(self.omega_p),
            "omega_a" => match self.omega_a {
                OmegaA::Auto => "auto".into(),
                OmegaA::Value(v) => num(v),
            },
            "g" => num(self.g),
            "t1" => num(self.t1),
            "t2" => num(self.t2),
            "theta" => num(self.theta),
            "frame_t1" => opt(self.frame_t1),
            "prep" => self.prep.name().into(),
            "a" => num(self.a),
            "b" => num(self.b),
            "phi" => num(self.phi),
            "phi0" => num(self.phi0),
            "beta" => num(self.beta),
            "weights" => self
                .weights
                .iter()
                .map(|w| num(*w))
                .collect::<Vec<_>>()
                .join(","),
            "ancilla" => self.ancilla.name().into(),
            "ancilla_theta" => num(self.ancilla_theta),
            "ancilla_phi" => num(self.ancilla_phi),
            "schedule" => self.schedule.name().into(),
            "dt" => num(self.dt),
            "axis" => self.axis.map_or(NONE, |a| a.name()).into(),
            "start" => num(self.start),
            "stop" => num(self.stop),
            "points" => self.points.to_string(),
            "method" => self.method.name().into(),
            "figure" => self.figure.clone().unwrap_or_else(|| NONE.into()),
            "out" => self
                .out
                .as_ref()
                .map_or_else(|| NONE.into(), |p| p.display().to_string()),
            "format" => self.format.name().into(),
            "tol" => opt(self.tol),
            "jobs" => self.jobs.to_string(),
            _ => return None,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("known key"));
        }
        out
    }

    /// The frame time used for `omega_a = auto` and the optimized probe frame.
    pub fn frame_time(&self) -> f64 {
        self.frame_t1.unwrap_or(self.t1)
    }

    pub fn resolved_omega_a(&self) -> Result<f64> {
        match self.omega_a {
            OmegaA::Value(v) => Ok(v),
            OmegaA::Auto => Ok(optimal_omega_a(
                self.n,
                self.frame_time(),
                parity_n2(self.n),
            )?),
        }
    }

    pub fn params(&self) -> Result<ProtocolParams> {
        let p = ProtocolParams {
            spins: self.n,
            omega_p: self.omega_p,
            omega_a: self.resolved_omega_a()?,
            g: self.g,
            t1: self.t1,
            t2: self.t2,
            theta: self.theta,
            frame_t1: self.frame_t1,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn probe_prep(&self) -> ProbePrep {
        match self.prep {
            PrepKind::PolarizedPlus => ProbePrep::PolarizedOpt(Sign::Plus),
            PrepKind::PolarizedMinus => ProbePrep::PolarizedOpt(Sign::Minus),
            PrepKind::Superposed => ProbePrep::SuperposedOpt {
                a: self.a,
                b: self.b,
                phi: self.phi,
            },
            PrepKind::GhzX => ProbePrep::GhzX { phi0: self.phi0 },
            PrepKind::DickeMixture => ProbePrep::DickeMixture(self.weights.clone()),
            PrepKind::Thermal => ProbePrep::Thermal { beta: self.beta },
        }
    }

    pub fn ancilla_prep(&self) -> AncillaPrep {
        match self.ancilla {
            AncillaKind::Plus => AncillaPrep::Plus,
            AncillaKind::Minus => AncillaPrep::Minus,
            AncillaKind::Ground => AncillaPrep::Ground,
            AncillaKind::Excited => AncillaPrep::Excited,
            AncillaKind::Bloch => AncillaPrep::Bloch {
                theta: self.ancilla_theta,
                phi: self.ancilla_phi,
            },
        }
    }

    pub fn schedule(&self) -> Schedule {
        match self.schedule {
            ScheduleKind::Synchronous => Schedule::Synchronous,
            ScheduleKind::MeasurementDelay => Schedule::MeasurementDelay(self.dt),
            ScheduleKind::EncodingDelay => Schedule::EncodingDelay(self.dt),
        }
    }

    /// Checks that the sweep fields describe a usable grid.
    pub fn validate_sweep(&self) -> Result<SweepAxis> {
        let axis = self
            .axis
            .ok_or_else(|| CliError::config("sweep needs --axis"))?;
        if self.points < 2 {
            return Err(CliError::config("sweep needs at least 2 points"));
        }
        if axis == SweepAxis::N {
            for bound in [self.start, self.stop] {
                if bound < 1.0 || bound.fract() != 0.0 || bound > u32::MAX as f64 {
                    return Err(CliError::config("N axis bounds must be positive integers"));
                }
            }
        }
        Ok(axis)
    }

    /// Sets the swept parameter to `value`.
    pub fn with_axis_value(&self, axis: SweepAxis, value: f64) -> RunConfig {
        let mut c = self.clone();
        match axis {
            SweepAxis::N => c.n = value.round() as u32,
            SweepAxis::T1 => c.t1 = value,
            SweepAxis::T2 => c.t2 = value,
            SweepAxis::Theta => c.theta = value,
            SweepAxis::Dt => c.dt = value,
            SweepAxis::Beta => c.beta = value,
        }
        c
    }

    /// Grid values start..=stop; for the N axis duplicates after rounding
    /// are removed.
    pub fn grid(&self, axis: SweepAxis) -> Vec<f64> {
        let n = self.points;
        let mut values: Vec<f64> = (0..n)
            .map(|k| {
                if k + 1 == n {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * k as f64 / (n - 1) as f64
                }
            })
            .collect();
        if axis == SweepAxis::N {
            values.iter_mut().for_each(|v| *v = v.round());
            values.dedup();
        }
        values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_with_pi() {
        assert_eq!(parse_number("t1", "pi/2").unwrap(), FRAC_PI_2);
        assert_eq!(parse_number("t1", "3*pi/4").unwrap(), 3.0 * PI / 4.0);
        assert_eq!(parse_number("t1", "-pi").unwrap(), -PI);
        assert_eq!(parse_number("t1", "2pi").unwrap(), 2.0 * PI);
        assert_eq!(parse_number("t1", " 0.25 ").unwrap(), 0.25);
        for bad in ["", "nan", "inf", "pi/0", "x", "1/2"] {
            assert!(parse_number("t1", bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn parse_with_comments_and_blank_lines() {
        let text =
            "# thermal run\nn = 4\n\nprep = thermal  # inline comment\nbeta = 2\nomega_a = 5\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.n, 4);
        assert_eq!(c.prep, PrepKind::Thermal);
        assert_eq!(c.beta, 2.0);
        assert_eq!(c.omega_a, OmegaA::Value(5.0));
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(RunConfig::parse("n 4").is_err());
        assert!(RunConfig::parse("n = 4\nn = 5").is_err());
        assert!(RunConfig::parse("colour = red").is_err());
        assert!(RunConfig::parse("n = 0").is_err());
        assert!(RunConfig::parse("prep = squeezed").is_err());
        assert!(RunConfig::parse("tol = -1").is_err());
    }

    #[test]
    fn auto_omega_a_follows_parity_rule() {
        let mut c = RunConfig::default();
        assert!((c.resolved_omega_a().unwrap() - 5.5).abs() < 1e-14);
        c.n = 9;
        assert!((c.resolved_omega_a().unwrap() - 5.0).abs() < 1e-14);
        c.n = 2;
        assert!((c.resolved_omega_a().unwrap() - 5.5).abs() < 1e-14);
    }

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn sweep_grid() {
        let mut c = RunConfig {
            start: 0.0,
            stop: 1.0,
            points: 5,
            ..RunConfig::default()
        };
        assert_eq!(c.grid(SweepAxis::T1), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        c.start = 1.0;
        c.stop = 3.0;
        c.points = 7;
        assert_eq!(c.grid(SweepAxis::N), vec![1.0, 2.0, 3.0]);
        c.axis = None;
        assert!(c.validate_sweep().is_err());
        c.axis = Some(SweepAxis::N);
        c.start = 0.5;
        assert!(c.validate_sweep().is_err());
    }
}
