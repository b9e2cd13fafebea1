//! Experiment descriptions and the argument syntax shared by every command.

use std::fmt;
use std::str::FromStr;

use stotiht::{RankTuple, Shape};

use crate::error::{invalid, HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    SyntheticRun,
    PhaseGrid,
    EpochsGrid,
    Timing,
    RealTensor,
    TripProbe,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::SyntheticRun => "synth-run",
            Kind::PhaseGrid => "phase-grid",
            Kind::EpochsGrid => "epochs-grid",
            Kind::Timing => "timing",
            Kind::RealTensor => "real",
            Kind::TripProbe => "trip-probe",
        }
    }
}

/// A value given either absolutely or as a multiple of `m` (`0.46m`, `m`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scaled {
    Absolute(f64),
    TimesM(f64),
}

impl Scaled {
    pub fn resolve(self, m: usize) -> f64 {
        match self {
            Scaled::Absolute(v) => v,
            Scaled::TimesM(k) => k * m as f64,
        }
    }

    /// Batch size for `m` measurements: `k·m` rounded to the nearest integer.
    pub fn batch_size(self, m: usize) -> Result<usize> {
        let v = self.resolve(m);
        if !v.is_finite() || v < 0.5 {
            return invalid(format!("batch size {self} is below 1 for m = {m}"));
        }
        if let Scaled::Absolute(a) = self {
            if a.fract() != 0.0 {
                return invalid(format!("absolute batch size {a} is not an integer"));
            }
        }
        let b = v.round() as usize;
        if b > m {
            return invalid(format!("batch size {b} exceeds m = {m}"));
        }
        Ok(b)
    }
}

impl fmt::Display for Scaled {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scaled::Absolute(v) => write!(f, "{v}"),
            Scaled::TimesM(k) => write!(f, "{k}m"),
        }
    }
}

impl FromStr for Scaled {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let (num, times_m) = match t.strip_suffix('m') {
            Some(head) => (head.trim(), true),
            None => (t, false),
        };
        let v = if times_m && num.is_empty() {
            1.0
        } else {
            num.parse::<f64>()
                .map_err(|_| HarnessError::Invalid(format!("cannot parse {s:?} as a number or a multiple of m")))?
        };
        if !v.is_finite() || v < 0.0 {
            return invalid(format!("{s:?} must be finite and nonnegative"));
        }
        Ok(if times_m { Scaled::TimesM(v) } else { Scaled::Absolute(v) })
    }
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = s.split(',').map(str::trim).collect();
    if items.iter().any(|i| i.is_empty()) {
        return invalid(format!("empty entry in {what} list {s:?}"));
    }
    items
        .into_iter()
        .map(|i| i.parse::<T>().map_err(|_| HarnessError::Invalid(format!("bad {what} entry {i:?} in {s:?}"))))
        .collect()
}

pub fn parse_shape(s: &str) -> Result<Shape> {
    Ok(Shape::new(parse_list::<usize>(s, "shape")?)?)
}

/// One rank tuple `r1,r2,...`, or several separated by `;`.
pub fn parse_ranks(s: &str) -> Result<Vec<RankTuple>> {
    s.split(';')
        .map(|t| Ok(RankTuple::new(parse_list::<usize>(t, "rank")?)?))
        .collect()
}

pub fn parse_ms(s: &str) -> Result<Vec<usize>> {
    parse_list(s, "m")
}

pub fn parse_scaled_list(s: &str) -> Result<Vec<Scaled>> {
    s.split(',').map(str::parse).collect()
}

/// Rank label used in CSV rows, e.g. `1x2x2`.
pub fn rank_label(r: &RankTuple) -> String {
    r.ranks().iter().map(|v| v.to_string()).collect::<Vec<_>>().join("x")
}

/// Grid coordinates and run parameters of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub kind: Kind,
    pub shape: Shape,
    pub ranks: Vec<RankTuple>,
    pub ms: Vec<usize>,
    /// Batch sizes; `b = m` is the TIHT row.
    pub batches: Vec<Scaled>,
    pub mu: Scaled,
    pub trials: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub tol: f64,
    /// Relative noise level; see [`crate::problem::Instance::generate`].
    pub noise: f64,
    /// Fill the `seconds` column of traces. Off by default so reruns are
    /// byte-identical.
    pub wall_clock: bool,
}

impl ExperimentSpec {
    /// Defaults for `kind` at the desk-scale settings.
    pub fn defaults(kind: Kind) -> Self {
        let shape = Shape::new(vec![5, 5, 6]).expect("valid");
        let r122 = RankTuple::new(vec![1, 2, 2]).expect("valid");
        let mut spec = Self {
            kind,
            shape,
            ranks: vec![r122],
            ms: vec![360],
            batches: vec![Scaled::TimesM(1.0), Scaled::TimesM(0.5), Scaled::TimesM(0.25)],
            mu: Scaled::TimesM(0.46),
            trials: 20,
            max_epochs: 200,
            seed: 0,
            tol: 1e-5,
            noise: 0.0,
            wall_clock: false,
        };
        match kind {
            Kind::PhaseGrid => {
                spec.ranks = [[1, 1, 1], [1, 2, 2], [2, 2, 2]]
                    .iter()
                    .map(|r| RankTuple::new(r.to_vec()).expect("valid"))
                    .collect();
                spec.ms = vec![100, 200, 300, 400];
                spec.batches = vec![Scaled::TimesM(0.5)];
                spec.mu = Scaled::TimesM(1.0);
            }
            Kind::EpochsGrid => {
                spec.ranks = [[1, 1, 1], [1, 2, 2], [2, 2, 2]]
                    .iter()
                    .map(|r| RankTuple::new(r.to_vec()).expect("valid"))
                    .collect();
                spec.ms = vec![200, 300, 400];
                spec.batches = vec![Scaled::TimesM(1.0), Scaled::TimesM(0.25)];
                spec.mu = Scaled::TimesM(0.4);
            }
            Kind::Timing => spec.max_epochs = 20,
            Kind::RealTensor => {
                spec.batches = vec![Scaled::TimesM(0.25)];
                spec.trials = 1;
                spec.max_epochs = 50;
            }
            Kind::TripProbe => spec.batches = vec![Scaled::TimesM(0.25)],
            Kind::SyntheticRun => {}
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.ranks.is_empty() || self.ms.is_empty() || self.batches.is_empty() {
            return invalid("rank, m and batch lists must be nonempty");
        }
        if self.trials == 0 {
            return invalid("trials must be at least 1");
        }
        if self.max_epochs == 0 {
            return invalid("epochs must be at least 1");
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return invalid(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return invalid(format!("noise must be finite and nonnegative, got {}", self.noise));
        }
        for r in &self.ranks {
            r.check(&self.shape)?;
        }
        for &m in &self.ms {
            if m == 0 {
                return invalid("m must be positive");
            }
            for b in &self.batches {
                b.batch_size(m)?;
            }
            let mu = self.mu.resolve(m);
            if !mu.is_finite() {
                return invalid("stepsize is not finite");
            }
        }
        let single = matches!(self.kind, Kind::SyntheticRun | Kind::Timing | Kind::RealTensor | Kind::TripProbe);
        if single && (self.ms.len() != 1 || self.ranks.len() != 1) {
            return invalid(format!("{} takes a single m and a single rank", self.kind.as_str()));
        }
        if matches!(self.kind, Kind::RealTensor | Kind::TripProbe) && self.batches.len() != 1 {
            return invalid(format!("{} takes a single batch size", self.kind.as_str()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_syntax() {
        assert_eq!("0.46m".parse::<Scaled>().unwrap(), Scaled::TimesM(0.46));
        assert_eq!("m".parse::<Scaled>().unwrap(), Scaled::TimesM(1.0));
        assert_eq!(" 90 ".parse::<Scaled>().unwrap(), Scaled::Absolute(90.0));
        assert!("x".parse::<Scaled>().is_err());
        assert!("-1".parse::<Scaled>().is_err());
        assert!("0.5mm".parse::<Scaled>().is_err());
        assert_eq!(Scaled::TimesM(0.46).resolve(360), 0.46 * 360.0);
    }

    #[test]
    fn batch_sizes() {
        assert_eq!(Scaled::TimesM(0.25).batch_size(360).unwrap(), 90);
        assert_eq!(Scaled::TimesM(1.0).batch_size(360).unwrap(), 360);
        assert_eq!(Scaled::TimesM(0.3).batch_size(10).unwrap(), 3);
        assert!(Scaled::Absolute(361.0).batch_size(360).is_err());
        assert!(Scaled::Absolute(2.5).batch_size(360).is_err());
        assert!(Scaled::TimesM(0.0).batch_size(360).is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_shape("5,5,6").unwrap().dims(), &[5, 5, 6]);
        assert!(parse_shape("5,,6").is_err());
        assert!(parse_shape("5,0").is_err());
        let r = parse_ranks("1,1,1;1,2,2").unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(rank_label(&r[1]), "1x2x2");
        assert_eq!(parse_ms("100,200").unwrap(), vec![100, 200]);
        assert_eq!(parse_scaled_list("m,0.5m,90").unwrap().len(), 3);
    }

    #[test]
    fn validation() {
        for kind in [
            Kind::SyntheticRun,
            Kind::PhaseGrid,
            Kind::EpochsGrid,
            Kind::Timing,
            Kind::RealTensor,
            Kind::TripProbe,
        ] {
            ExperimentSpec::defaults(kind).validate().unwrap();
        }
        let mut s = ExperimentSpec::defaults(Kind::PhaseGrid);
        s.trials = 0;
        assert!(s.validate().is_err());
        let mut s = ExperimentSpec::defaults(Kind::SyntheticRun);
        s.ms = vec![100, 200];
        assert!(s.validate().is_err());
        let mut s = ExperimentSpec::defaults(Kind::PhaseGrid);
        s.ranks.push(RankTuple::new(vec![6, 1, 1]).unwrap());
        assert!(s.validate().is_err());
        let mut s = ExperimentSpec::defaults(Kind::PhaseGrid);
        s.ms = vec![];
        assert!(s.validate().is_err());
    }
}
