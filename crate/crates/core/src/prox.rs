//! Proximal maps of `sigma * ||.||_q` for `q` in {1, 2, inf}.
//!
//! Each norm is a [`ProxOperator`] registered by name in a [`ProxRegistry`];
//! the engine looks its operator up from the configured [`NormKind`].

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A norm together with its proximal map.
pub trait ProxOperator: Send + Sync {
    /// Registry key, e.g. `"l2"`.
    fn name(&self) -> &'static str;

    fn norm(&self, v: &[f64]) -> f64;

    /// Overwrites `u` with `argmin_v sigma * ||v|| + 0.5 * ||u - v||^2`.
    fn prox_in_place(&self, u: &mut [f64], sigma: f64);

    fn prox(&self, u: &[f64], sigma: f64) -> Vec<f64> {
        let mut v = u.to_vec();
        self.prox_in_place(&mut v, sigma);
        v
    }
}

/// Elementwise soft thresholding.
#[derive(Debug, Default, Clone, Copy)]
pub struct L1Prox;

/// Block (group) soft thresholding.
#[derive(Debug, Default, Clone, Copy)]
pub struct L2Prox;

/// Residual of the projection onto the dual (L1) ball.
#[derive(Debug, Default, Clone, Copy)]
pub struct LinfProx;

impl ProxOperator for L1Prox {
    fn name(&self) -> &'static str {
        "l1"
    }

    fn norm(&self, v: &[f64]) -> f64 {
        v.iter().map(|x| x.abs()).sum()
    }

    fn prox_in_place(&self, u: &mut [f64], sigma: f64) {
        if sigma == 0.0 {
            return;
        }
        for x in u.iter_mut() {
            let mag = x.abs() - sigma;
            *x = if mag > 0.0 { x.signum() * mag } else { 0.0 };
        }
    }
}

impl ProxOperator for L2Prox {
    fn name(&self) -> &'static str {
        "l2"
    }

    fn norm(&self, v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn prox_in_place(&self, u: &mut [f64], sigma: f64) {
        if sigma == 0.0 {
            return;
        }
        let norm = self.norm(u);
        if norm <= sigma {
            u.iter_mut().for_each(|x| *x = 0.0);
        } else {
            let scale = 1.0 - sigma / norm;
            u.iter_mut().for_each(|x| *x *= scale);
        }
    }
}

impl ProxOperator for LinfProx {
    fn name(&self) -> &'static str {
        "linf"
    }

    fn norm(&self, v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
    }

    fn prox_in_place(&self, u: &mut [f64], sigma: f64) {
        if sigma == 0.0 {
            return;
        }
        let proj = project_l1_ball(u, sigma);
        for (x, p) in u.iter_mut().zip(proj) {
            *x -= p;
        }
    }
}

/// Euclidean projection of `u` onto `{x : ||x||_1 <= radius}`.
///
/// Sort-based threshold search, `O(d log d)`.
pub fn project_l1_ball(u: &[f64], radius: f64) -> Vec<f64> {
    let l1: f64 = u.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return u.to_vec();
    }
    if radius <= 0.0 {
        return vec![0.0; u.len()];
    }
    let mut mags: Vec<f64> = u.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    // largest k with mags[k-1] > (sum_{i<k} mags[i] - radius) / k
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &m) in mags.iter().enumerate() {
        cumsum += m;
        let t = (cumsum - radius) / (k + 1) as f64;
        if m > t {
            tau = t;
        } else {
            break;
        }
    }
    u.iter()
        .map(|&x| {
            let mag = x.abs() - tau;
            if mag > 0.0 {
                x.signum() * mag
            } else {
                0.0
            }
        })
        .collect()
}

/// Norm selector for the fusion penalties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L1,
    #[default]
    L2,
    Linf,
}

impl NormKind {
    pub fn name(self) -> &'static str {
        match self {
            NormKind::L1 => "l1",
            NormKind::L2 => "l2",
            NormKind::Linf => "linf",
        }
    }

    pub fn operator(self) -> &'static dyn ProxOperator {
        ProxRegistry::builtin()
            .get(self.name())
            .expect("built-in norms are always registered")
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" | "1" => Ok(NormKind::L1),
            "l2" | "2" => Ok(NormKind::L2),
            "linf" | "inf" => Ok(NormKind::Linf),
            _ => Err(Error::UnknownStrategy {
                kind: "norm",
                name: s.to_string(),
                available: ProxRegistry::builtin().names().join(", "),
            }),
        }
    }
}

/// A threshold paired with the norm it shrinks in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxSpec {
    pub q: NormKind,
    pub sigma: f64,
}

impl ProxSpec {
    pub fn new(q: NormKind, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("prox threshold {sigma} must be >= 0")));
        }
        Ok(Self { q, sigma })
    }
}

/// Proximal map of `spec.sigma * ||.||_{spec.q}` at `u`.
pub fn prox(u: &[f64], spec: ProxSpec) -> Vec<f64> {
    spec.q.operator().prox(u, spec.sigma)
}

/// Named collection of proximal operators.
pub struct ProxRegistry {
    entries: Vec<Box<dyn ProxOperator>>,
}

impl ProxRegistry {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    /// Process-wide registry holding `l1`, `l2` and `linf`.
    pub fn builtin() -> &'static ProxRegistry {
        static BUILTIN: OnceLock<ProxRegistry> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            let mut r = ProxRegistry::new();
            r.register(Box::new(L1Prox));
            r.register(Box::new(L2Prox));
            r.register(Box::new(LinfProx));
            r
        })
    }

    /// Adds an operator, replacing any existing one with the same name.
    pub fn register(&mut self, op: Box<dyn ProxOperator>) {
        self.entries.retain(|e| e.name() != op.name());
        self.entries.push(op);
    }

    pub fn get(&self, name: &str) -> Result<&dyn ProxOperator> {
        self.entries
            .iter()
            .find(|e| e.name() == name)
            .map(|e| e.as_ref())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "norm",
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }
}

impl Default for ProxRegistry {
    fn default() -> Self {
        Self::new()
    }
}
