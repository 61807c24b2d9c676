use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Observable, ScalarFn};
use crate::error::{invalid, Error};
use crate::stats::stable_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Plain sum.
    Sum,
    /// Divide by `sqrt n`.
    SqrtN,
    /// Divide by `n` (time average).
    N,
}

impl Normalization {
    fn divisor(self, n: usize) -> f64 {
        match self {
            Normalization::Sum => 1.0,
            Normalization::SqrtN => (n as f64).sqrt(),
            Normalization::N => n as f64,
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Sum => "sum",
            Normalization::SqrtN => "sqrt_n",
            Normalization::N => "n",
        })
    }
}

impl FromStr for Normalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "sum" => Ok(Normalization::Sum),
            "sqrt_n" => Ok(Normalization::SqrtN),
            "n" => Ok(Normalization::N),
            other => Err(invalid(format!("unknown normalization '{other}'"))),
        }
    }
}

/// `K(z) = (v(z_1) + ... + v(z_n)) / norm`.
#[derive(Debug, Clone)]
pub struct BirkhoffObservable {
    v: ScalarFn,
    n: usize,
    normalization: Normalization,
    divisor: f64,
}

pub fn birkhoff_observable(v: ScalarFn, n: usize, normalization: Normalization) -> BirkhoffObservable {
    BirkhoffObservable {
        divisor: normalization.divisor(n),
        v,
        n,
        normalization,
    }
}

impl BirkhoffObservable {
    pub fn v(&self) -> &ScalarFn {
        &self.v
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }
}

impl Observable for BirkhoffObservable {
    fn label(&self) -> String {
        format!("birkhoff_{}", self.normalization)
    }

    fn arity(&self) -> usize {
        self.n
    }

    fn evaluate(&self, z: &[f64]) -> f64 {
        stable_sum(z.iter().map(|&x| self.v.eval(x))) / self.divisor
    }

    fn lip_bound(&self, _j: usize) -> f64 {
        self.v.lip() / self.divisor
    }

    fn lip_sq_sum(&self) -> f64 {
        self.n as f64 * (self.v.lip() / self.divisor).powi(2)
    }
}
