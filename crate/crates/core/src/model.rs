//! Parameters, state and the rate functions shared by both engines.
//!
//! The compartments are:
//!
//! | symbol | field   | meaning                                   |
//! |--------|---------|-------------------------------------------|
//! | `N`    | `n`     | naive cells of direct thymic origin       |
//! | `Np`   | `n_p`   | naive cells that have proliferated        |
//! | `A`    | `a`     | activated cells                           |
//! | `M`    | `m`     | memory cells                              |
//!
//! Thymic influx into `N` is `s0(t) · exp(-λ t) · s(Np)` where `s0` is a sum
//! of four Gaussians (all with negative exponents, the global 0.82 factor
//! applied to the whole sum).

use std::f64::consts::LN_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Default dilution scale for `h(N, Np)`.
///
/// Not a published value. At this scale `h ≈ 1` for any realistic
/// population, so the `Np` pool decays at `μn − c`. Small values such as
/// `392` suppress peripheral proliferation entirely and `Np` never
/// overtakes `N`.
pub const DEFAULT_N_B: f64 = 1.0e6;

/// One `amplitude · exp(-((t - center) / width)²)` term of the thymic output fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTerm {
    /// cells · mm⁻³ · year⁻¹
    pub amplitude: f64,
    /// years
    pub center: f64,
    /// years
    pub width: f64,
}

impl GaussianTerm {
    pub const fn new(amplitude: f64, center: f64, width: f64) -> Self {
        Self {
            amplitude,
            center,
            width,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let z = (t - self.center) / self.width;
        self.amplitude * (-z * z).exp()
    }
}

/// Rate constants and scaling values. All rates are per year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Thymic decay rate λ.
    pub lambda_thymic: f64,
    /// Naive → proliferated incorporation rate λn.
    pub lambda_n: f64,
    /// Death rate of both naive compartments μn.
    pub mu_n: f64,
    /// Peripheral proliferation rate.
    pub c: f64,
    /// Memory → proliferated-naive reversion rate λmn.
    pub lambda_mn: f64,
    /// Memory death rate μm.
    pub mu_m: f64,
    /// Activation rate of thymic naive cells λNa.
    pub lambda_na: f64,
    /// Activation rate of proliferated naive cells λNpA.
    pub lambda_npa: f64,
    /// Active → memory reversion rate λa.
    pub lambda_a: f64,
    /// Active cell death rate μa.
    pub mu_a: f64,
    /// Export scaling value s̄ (dimensionless).
    pub s_bar: f64,
    /// Equilibrium value N̄p (cells / mm³).
    pub n_p_bar: f64,
    /// Death amplification from TREC dilution.
    pub b: f64,
    /// Dilution scale in `h(N, Np)` (cells / mm³).
    pub n_b: f64,
    pub s0_terms: Vec<GaussianTerm>,
    pub s0_global_scale: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        default_params()
    }
}

impl ModelParams {
    /// Proliferation rate implied by `mu_n` and `n_p_bar`: `μn (1 − ln 2 / N̄p)`.
    pub fn derived_c(mu_n: f64, n_p_bar: f64) -> f64 {
        mu_n * (1.0 - LN_2 / n_p_bar)
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("lambda_thymic", self.lambda_thymic),
            ("lambda_n", self.lambda_n),
            ("mu_n", self.mu_n),
            ("c", self.c),
            ("lambda_mn", self.lambda_mn),
            ("mu_m", self.mu_m),
            ("lambda_na", self.lambda_na),
            ("lambda_npa", self.lambda_npa),
            ("lambda_a", self.lambda_a),
            ("mu_a", self.mu_a),
            ("s_bar", self.s_bar),
            ("b", self.b),
            ("s0_global_scale", self.s0_global_scale),
        ];
        for (name, value) in rates {
            if !value.is_finite() || value < 0.0 {
                return Err(SimError::InvalidParams(format!(
                    "{name} must be finite and >= 0, got {value}"
                )));
            }
        }
        for (name, value) in [("n_p_bar", self.n_p_bar), ("n_b", self.n_b)] {
            if !(value > 0.0) || value.is_nan() {
                return Err(SimError::InvalidParams(format!(
                    "{name} must be > 0, got {value}"
                )));
            }
        }
        for (i, term) in self.s0_terms.iter().enumerate() {
            if !(term.width > 0.0) || !term.amplitude.is_finite() || !term.center.is_finite() {
                return Err(SimError::InvalidParams(format!(
                    "s0 term {i} needs finite amplitude/center and width > 0, got {term:?}"
                )));
            }
        }
        Ok(())
    }
}

/// The published parameter set.
pub fn default_params() -> ModelParams {
    let mu_n = 4.4;
    let n_p_bar = 392.0;
    let half_life_decay = LN_2 / 15.7;
    ModelParams {
        lambda_thymic: half_life_decay,
        lambda_n: 0.003,
        mu_n,
        c: ModelParams::derived_c(mu_n, n_p_bar),
        lambda_mn: 0.0,
        mu_m: 0.05,
        lambda_na: 0.0,
        lambda_npa: 0.1,
        lambda_a: half_life_decay,
        mu_a: 44.4,
        s_bar: 0.0,
        n_p_bar,
        b: 4.2,
        n_b: DEFAULT_N_B,
        s0_terms: vec![
            GaussianTerm::new(7024.0, 12.02, 3.623),
            GaussianTerm::new(5.203e5, -127.8, 64.47),
            GaussianTerm::new(1937.0, 7.357, 6.03),
            GaussianTerm::new(1.259e18, 1309.0, 214.4),
        ],
        s0_global_scale: 0.82,
    }
}

/// Gaussian-sum thymic output `s0(t)`, cells · mm⁻³ · year⁻¹.
pub fn thymic_output(t: f64, p: &ModelParams) -> f64 {
    p.s0_global_scale * p.s0_terms.iter().map(|g| g.eval(t)).sum::<f64>()
}

/// Export modulation `s(Np) = 1 / (1 + s̄ Np / N̄p)`.
pub fn export_modulation(n_p: f64, p: &ModelParams) -> f64 {
    1.0 / (1.0 + p.s_bar * n_p / p.n_p_bar)
}

/// Source term of `dN/dt`: `s0(t) · exp(-λ t) · s(Np)`.
pub fn thymic_influx(t: f64, n_p: f64, p: &ModelParams) -> f64 {
    thymic_output(t, p) * (-p.lambda_thymic * t).exp() * export_modulation(n_p, p)
}

/// Death amplification `g(Np) = 1 + b (Np/N̄p) / (1 + Np/N̄p)`, in `[1, 1 + b)`.
pub fn trec_death_factor(n_p: f64, p: &ModelParams) -> f64 {
    let x = n_p / p.n_p_bar;
    1.0 + p.b * x / (1.0 + x)
}

/// Proliferation dilution `h(N, Np) = 1 / (1 + (N + Np) / Nb)`, in `(0, 1]`.
pub fn proliferation_dilution(n: f64, n_p: f64, p: &ModelParams) -> f64 {
    1.0 / (1.0 + (n + n_p) / p.n_b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Compartment {
    NaiveThymic,
    NaiveProliferated,
    Active,
    Memory,
}

impl Compartment {
    /// Storage order used by every `[f64; 4]` in this crate.
    pub const ALL: [Compartment; 4] = [
        Compartment::NaiveThymic,
        Compartment::NaiveProliferated,
        Compartment::Active,
        Compartment::Memory,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Column label used in CSV output.
    pub fn label(self) -> &'static str {
        match self {
            Compartment::NaiveThymic => "N",
            Compartment::NaiveProliferated => "Np",
            Compartment::Active => "A",
            Compartment::Memory => "M",
        }
    }
}

impl fmt::Display for Compartment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub t: f64,
    pub n: f64,
    pub n_p: f64,
    pub a: f64,
    pub m: f64,
}

impl StateVector {
    pub fn new(t: f64, n: f64, n_p: f64, a: f64, m: f64) -> Self {
        Self { t, n, n_p, a, m }
    }

    pub fn from_array(t: f64, y: [f64; 4]) -> Self {
        Self::new(t, y[0], y[1], y[2], y[3])
    }

    /// Compartments in [`Compartment::ALL`] order.
    pub fn values(&self) -> [f64; 4] {
        [self.n, self.n_p, self.a, self.m]
    }

    pub fn get(&self, c: Compartment) -> f64 {
        self.values()[c.index()]
    }

    pub fn total_naive(&self) -> f64 {
        self.n + self.n_p
    }

    pub fn validate(&self) -> Result<()> {
        for c in Compartment::ALL {
            let v = self.get(c);
            if !v.is_finite() || v < 0.0 {
                return Err(SimError::InvalidScenario(format!(
                    "compartment {c} must be finite and >= 0, got {v}"
                )));
            }
        }
        if !self.t.is_finite() {
            return Err(SimError::InvalidScenario(format!("t must be finite, got {}", self.t)));
        }
        Ok(())
    }
}

/// Time derivatives of the four compartments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub dn: f64,
    pub dn_p: f64,
    pub dm: f64,
    pub da: f64,
}

impl StateDerivative {
    /// Derivatives in [`Compartment::ALL`] order (`N, Np, A, M`).
    pub fn values(&self) -> [f64; 4] {
        [self.dn, self.dn_p, self.da, self.dm]
    }
}

pub fn derivatives(s: &StateVector, p: &ModelParams) -> StateDerivative {
    let StateVector { t, n, n_p, a, m } = *s;
    let dn = thymic_influx(t, n_p, p) - (p.lambda_n + p.mu_n * trec_death_factor(n_p, p)) * n;
    let dn_p = p.lambda_n * n
        + (p.c * proliferation_dilution(n, n_p, p) - p.mu_n) * n_p
        + p.lambda_mn * m;
    let dm = p.lambda_a * a - p.mu_m * m - p.lambda_mn * m;
    let da = p.lambda_na * n + p.lambda_npa * n_p - (p.lambda_a + p.mu_a) * a;
    StateDerivative { dn, dn_p, dm, da }
}
