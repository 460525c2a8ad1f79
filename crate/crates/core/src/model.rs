//! Physical parameters, derived coefficients and regime classification.
//!
//! Every rate shares one unit (kHz in the presets); time is in the reciprocal
//! unit (ms). Position, momentum, energy and phonon numbers are dimensionless.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Upper bound on `gamma_eff` for the low-damping classification.
pub const LOW_DAMPING_MAX: f64 = 1e-2;
/// Lower bound on `gamma_eff` for the overdamped classification.
pub const OVERDAMPED_MIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams<T> {
    /// Trap frequency.
    pub omega_z: T,
    /// Gas damping rate.
    pub gamma_g: T,
    /// Trap-beam photon scattering.
    pub a_t: T,
    /// Probe-beam photon scattering.
    pub a_p: T,
    /// Thermal phonon number of the gas, `>= 1`.
    pub n0: T,
    /// Feedback drift coefficient.
    pub gamma_f: T,
    /// Feedback backaction diffusion coefficient.
    pub big_gamma_f: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedCoefficients<T> {
    /// Gas momentum diffusion, `2 gamma_g N0`.
    pub d_p: T,
    /// Gas position diffusion, `gamma_g / (6 N0)`.
    pub d_q: T,
    /// `A_t + A_p`.
    pub a_total: T,
    /// `12 (gamma_f - 9 Gamma_f)`.
    pub j: T,
}

impl<T: Real> DerivedCoefficients<T> {
    /// Total momentum diffusion at the origin, `A_t + A_p + D_p`.
    pub fn momentum_diffusion(&self) -> T {
        self.a_total + self.d_p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    LowDamping,
    Intermediate,
    Overdamped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport<T> {
    /// `(2 gamma_g + 24 gamma_f <x^2>) / omega_z`.
    pub gamma_eff: T,
    /// Feedback part only, `24 gamma_f <x^2> / omega_z` (the low-pressure form).
    pub gamma_eff_feedback: T,
    pub regime: Regime,
    pub x2_estimate: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Modulation<T> {
    pub value: T,
    /// Set when the requested feedback would need more than 100% modulation.
    pub over_limit: bool,
}

impl<T: Real> SystemParams<T> {
    /// Parameters with feedback switched off.
    pub fn without_feedback(&self) -> Self {
        SystemParams {
            gamma_f: T::zero(),
            big_gamma_f: T::zero(),
            ..*self
        }
    }

    /// Multiplies every rate (not `N0`) by `s`.
    pub fn scale_rates(&self, s: T) -> Self {
        SystemParams {
            omega_z: self.omega_z * s,
            gamma_g: self.gamma_g * s,
            a_t: self.a_t * s,
            a_p: self.a_p * s,
            n0: self.n0,
            gamma_f: self.gamma_f * s,
            big_gamma_f: self.big_gamma_f * s,
        }
    }

    /// Feedback coefficients from coupling `chi`, detected flux `phi` and gain `g`.
    pub fn feedback_from_gain(chi: T, phi: T, gain: T) -> (T, T) {
        let base = chi * chi * phi;
        (base * gain, base * gain * gain)
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("omega_z", self.omega_z),
            ("gamma_g", self.gamma_g),
            ("A_t", self.a_t),
            ("A_p", self.a_p),
            ("N0", self.n0),
            ("gamma_f", self.gamma_f),
            ("Gamma_f", self.big_gamma_f),
        ];
        for (name, v) in named {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
            if v < T::zero() {
                return Err(Error::param(name, format!("must be >= 0, got {}", v)));
            }
        }
        if !(self.omega_z > T::zero()) {
            return Err(Error::param("omega_z", "trap frequency must be > 0"));
        }
        if self.n0 < T::one() {
            return Err(Error::param("N0", format!("must be >= 1, got {}", self.n0)));
        }
        if self.gamma_f < lit::<T>(9.0) * self.big_gamma_f {
            return Err(Error::param(
                "Gamma_f",
                format!(
                    "feedback cannot cool: gamma_f = {} < 9 Gamma_f = {}",
                    self.gamma_f,
                    lit::<T>(9.0) * self.big_gamma_f
                ),
            ));
        }
        Ok(())
    }

    /// Total momentum diffusion `A_t + A_p + D_p` (convenience for callers
    /// that do not need the other coefficients).
    pub fn momentum_diffusion(&self) -> T {
        self.a_t + self.a_p + lit::<T>(2.0) * self.gamma_g * self.n0
    }

    /// Trap period `2 pi / omega_z`.
    pub fn trap_period(&self) -> T {
        (T::PI() + T::PI()) / self.omega_z
    }
}

pub fn derive_coefficients<T: Real>(params: &SystemParams<T>) -> Result<DerivedCoefficients<T>> {
    params.validate()?;
    Ok(DerivedCoefficients {
        d_p: lit::<T>(2.0) * params.gamma_g * params.n0,
        d_q: params.gamma_g / (lit::<T>(6.0) * params.n0),
        a_total: params.a_t + params.a_p,
        j: lit::<T>(12.0) * (params.gamma_f - lit::<T>(9.0) * params.big_gamma_f),
    })
}

pub fn classify_regime<T: Real>(params: &SystemParams<T>, x2_ss: T) -> RegimeReport<T> {
    let feedback = lit::<T>(24.0) * params.gamma_f * x2_ss / params.omega_z;
    let gamma_eff = lit::<T>(2.0) * params.gamma_g / params.omega_z + feedback;
    let regime = if gamma_eff < lit(LOW_DAMPING_MAX) {
        Regime::LowDamping
    } else if gamma_eff >= lit(OVERDAMPED_MIN) {
        Regime::Overdamped
    } else {
        Regime::Intermediate
    };
    RegimeReport {
        gamma_eff,
        gamma_eff_feedback: feedback,
        regime,
        x2_estimate: x2_ss,
    }
}

/// Trap-intensity modulation depth `gamma_f <n> / omega_z`.
pub fn modulation<T: Real>(params: &SystemParams<T>, n_ss: T) -> Modulation<T> {
    let value = params.gamma_f * n_ss / params.omega_z;
    Modulation {
        value,
        over_limit: value > T::one(),
    }
}

const KEYS: [&str; 10] = [
    "omega_z", "gamma_g", "A_t", "A_p", "N0", "gamma_f", "Gamma_f", "chi", "Phi", "G",
];

/// Parses the flat `key = value` configuration format (`#` starts a comment).
///
/// `omega_z`, `gamma_g` and `N0` are required. Feedback is given either as
/// `gamma_f`/`Gamma_f` or as the triple `chi`/`Phi`/`G`, never both; missing
/// feedback or scattering keys default to zero.
pub fn parse_config<T: Real>(text: &str) -> Result<SystemParams<T>> {
    let mut seen: HashMap<&'static str, (usize, T)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            line: line_no,
            key: line.to_string(),
            reason: "expected `key = value`".into(),
        })?;
        let key = key.trim();
        let known = KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| Error::Config {
                line: line_no,
                key: key.to_string(),
                reason: format!("unknown key (expected one of {})", KEYS.join(", ")),
            })?;
        let parsed: f64 = value.trim().parse().map_err(|_| Error::Config {
            line: line_no,
            key: key.to_string(),
            reason: format!("`{}` is not a number", value.trim()),
        })?;
        if seen.insert(known, (line_no, lit(parsed))).is_some() {
            return Err(Error::Config {
                line: line_no,
                key: key.to_string(),
                reason: "duplicate key".into(),
            });
        }
    }
    let get = |k: &str| seen.get(k).map(|(_, v)| *v);
    let required = |k: &'static str| {
        get(k).ok_or_else(|| Error::Config {
            line: 0,
            key: k.to_string(),
            reason: "required key missing".into(),
        })
    };
    let triple = ["chi", "Phi", "G"].map(|k| seen.get(k).copied());
    let direct = ["gamma_f", "Gamma_f"].map(|k| seen.get(k).copied());
    let (gamma_f, big_gamma_f) = if triple.iter().any(Option::is_some) {
        if let Some((line, _)) = direct.iter().flatten().next() {
            return Err(Error::Config {
                line: *line,
                key: "gamma_f".into(),
                reason: "give either gamma_f/Gamma_f or chi/Phi/G, not both".into(),
            });
        }
        let [chi, phi, g] = triple;
        match (chi, phi, g) {
            (Some((_, c)), Some((_, p)), Some((_, g))) => SystemParams::feedback_from_gain(c, p, g),
            _ => {
                return Err(Error::Config {
                    line: 0,
                    key: "chi/Phi/G".into(),
                    reason: "all three of chi, Phi, G are required together".into(),
                })
            }
        }
    } else {
        (
            get("gamma_f").unwrap_or_else(T::zero),
            get("Gamma_f").unwrap_or_else(T::zero),
        )
    };
    let params = SystemParams {
        omega_z: required("omega_z")?,
        gamma_g: required("gamma_g")?,
        a_t: get("A_t").unwrap_or_else(T::zero),
        a_p: get("A_p").unwrap_or_else(T::zero),
        n0: required("N0")?,
        gamma_f,
        big_gamma_f,
    };
    params.validate().map_err(|e| match e {
        Error::InvalidParam { name, reason } => Error::Config {
            line: seen.get(name).map(|(l, _)| *l).unwrap_or(0),
            key: name.to_string(),
            reason,
        },
        other => other,
    })?;
    Ok(params)
}

/// Serializes parameters in the format accepted by [`parse_config`].
pub fn to_config_string<T: Real>(params: &SystemParams<T>) -> String {
    let mut s = String::new();
    let rows = [
        ("omega_z", params.omega_z),
        ("gamma_g", params.gamma_g),
        ("A_t", params.a_t),
        ("A_p", params.a_p),
        ("N0", params.n0),
        ("gamma_f", params.gamma_f),
        ("Gamma_f", params.big_gamma_f),
    ];
    for (k, v) in rows {
        // `{:e}` on f64 round-trips exactly.
        let _ = writeln!(s, "{} = {:e}", k, v.as_f64());
    }
    s
}
