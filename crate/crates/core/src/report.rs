//! Verification reports.
//!
//! Every check in this crate produces a [`VerificationReport`]: a list of
//! [`Certificate`]s, each summarizing a universally-quantified sweep
//! ("for every sample, value v satisfies the threshold"). A certificate
//! carries exactly six fields — name, pass, worst_point, worst_value,
//! tolerance, sample_count — and nothing else, so downstream consumers can
//! rely on a fixed schema.
//!
//! Reports can be merged: certificates with the same name combine so that
//! the result is independent of how the sample set was partitioned (used
//! for multi-worker sweeps). Merging picks the worst representative by a
//! deterministic rule with lexicographic tie-breaks, so any partition of
//! the samples yields byte-identical JSON.

use serde::{Deserialize, Serialize};

use crate::error::{CalcError, CalcResult};

/// Which direction of the observed value is "worse" for a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorseIs {
    Smaller,
    Larger,
}

/// Outcome of one certified sweep. `worst_point` holds the interleaved
/// real coordinates of the worst sample (empty when no sample was seen).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Certificate {
    pub name: String,
    pub pass: bool,
    pub worst_point: Vec<f64>,
    pub worst_value: f64,
    pub tolerance: f64,
    pub sample_count: u64,
}

impl Certificate {
    /// Start a sweep accumulator for a certificate with this name.
    pub fn sweep(name: &str, tolerance: f64, worse: WorseIs) -> Sweep {
        Sweep {
            name: name.to_string(),
            tolerance,
            worse,
            worst: None,
            count: 0,
        }
    }

    /// A certificate that records a single already-computed scalar.
    pub fn scalar(name: &str, value: f64, tolerance: f64, pass: bool) -> Certificate {
        Certificate {
            name: name.to_string(),
            pass,
            worst_point: Vec::new(),
            worst_value: value,
            tolerance,
            sample_count: 1,
        }
    }

    /// Merge two certificates for the same check over disjoint sample sets.
    ///
    /// The merged worst representative is chosen without knowing the sweep
    /// direction: when the merged certificate passes, every observed value
    /// sits on the passing side of the tolerance and the value *closest* to
    /// the tolerance is the tightest margin; when something fails, the
    /// failing value *farthest* from the tolerance is the most violated.
    /// Ties break toward the lexicographically smaller worst_point, so the
    /// merge is associative and partition-independent.
    pub fn merge(&self, other: &Certificate) -> CalcResult<Certificate> {
        if self.name != other.name {
            return Err(CalcError::parameter(format!(
                "cannot merge certificates {} and {}",
                self.name, other.name
            )));
        }
        if self.tolerance != other.tolerance {
            return Err(CalcError::parameter(format!(
                "certificate {} merged with mismatched tolerances",
                self.name
            )));
        }
        if self.sample_count == 0 {
            return Ok(other.clone());
        }
        if other.sample_count == 0 {
            return Ok(self.clone());
        }
        let pass = self.pass && other.pass;
        let pick_self = match (self.pass, other.pass) {
            (true, false) => false,
            (false, true) => true,
            _ => {
                let da = (self.worst_value - self.tolerance).abs();
                let db = (other.worst_value - other.tolerance).abs();
                // Both failing: farther from tolerance is worse. Both
                // passing: closer to tolerance is the tighter margin.
                let prefer_self = if pass { da < db } else { da > db };
                if da == db {
                    lex_le(&self.worst_point, &other.worst_point)
                } else {
                    prefer_self
                }
            }
        };
        let (point, value) = if pick_self {
            (self.worst_point.clone(), self.worst_value)
        } else {
            (other.worst_point.clone(), other.worst_value)
        };
        Ok(Certificate {
            name: self.name.clone(),
            pass,
            worst_point: point,
            worst_value: value,
            tolerance: self.tolerance,
            sample_count: self.sample_count + other.sample_count,
        })
    }
}

fn lex_le(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    a.len() <= b.len()
}

/// Accumulator for a sweep certificate. Feed every sample through
/// [`Sweep::observe`], then finish with the pass rule.
#[derive(Debug, Clone)]
pub struct Sweep {
    name: String,
    tolerance: f64,
    worse: WorseIs,
    worst: Option<(f64, Vec<f64>)>,
    count: u64,
}

impl Sweep {
    pub fn observe(&mut self, point: &[f64], value: f64) {
        self.count += 1;
        let replace = match &self.worst {
            None => true,
            Some((w, p)) => match self.worse {
                WorseIs::Smaller => value < *w || (value == *w && lex_le(point, p) && point != &p[..]),
                WorseIs::Larger => value > *w || (value == *w && lex_le(point, p) && point != &p[..]),
            },
        };
        if replace {
            self.worst = Some((value, point.to_vec()));
        }
    }

    pub fn merge(mut self, other: Sweep) -> Sweep {
        debug_assert_eq!(self.name, other.name);
        self.count += other.count;
        if let Some((v, p)) = other.worst {
            self.count -= 1; // observe() increments; undo the double count
            self.observe(&p, v);
        }
        self
    }

    fn finish(self, pass: bool) -> Certificate {
        let (worst_value, worst_point) = match self.worst {
            Some((v, p)) => (v, p),
            None => (0.0, Vec::new()),
        };
        Certificate {
            name: self.name,
            pass,
            worst_point,
            worst_value,
            tolerance: self.tolerance,
            sample_count: self.count,
        }
    }

    /// Pass iff every observed value was >= tolerance. Vacuously true.
    pub fn finish_at_least(self) -> Certificate {
        let pass = self.worst.as_ref().map_or(true, |(v, _)| *v >= self.tolerance);
        self.finish(pass)
    }

    /// Pass iff every observed value was <= tolerance. Vacuously true.
    pub fn finish_at_most(self) -> Certificate {
        let pass = self.worst.as_ref().map_or(true, |(v, _)| *v <= self.tolerance);
        self.finish(pass)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VerificationReport {
    pub experiment: String,
    pub certificates: Vec<Certificate>,
}

impl VerificationReport {
    pub fn new(experiment: &str) -> Self {
        VerificationReport { experiment: experiment.to_string(), certificates: Vec::new() }
    }

    pub fn push(&mut self, cert: Certificate) {
        self.certificates.push(cert);
    }

    pub fn pass(&self) -> bool {
        self.certificates.iter().all(|c| c.pass)
    }

    pub fn certificate(&self, name: &str) -> Option<&Certificate> {
        self.certificates.iter().find(|c| c.name == name)
    }

    /// Merge reports from disjoint portions of the same experiment.
    /// Certificates are matched by name; both reports must list the same
    /// certificate names in the same order.
    pub fn merge(&self, other: &VerificationReport) -> CalcResult<VerificationReport> {
        if self.experiment != other.experiment {
            return Err(CalcError::parameter("cannot merge reports of different experiments"));
        }
        if self.certificates.len() != other.certificates.len() {
            return Err(CalcError::parameter("report certificate lists differ"));
        }
        let mut merged = VerificationReport::new(&self.experiment);
        for (a, b) in self.certificates.iter().zip(other.certificates.iter()) {
            merged.push(a.merge(b)?);
        }
        Ok(merged)
    }

    /// JSON value with lexicographically sorted object keys.
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serialization cannot fail")
    }
}
