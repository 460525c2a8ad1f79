//! Named parameter sets. Rates in kHz.

use crate::error::{Error, Result};
use crate::model::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub params: SystemParams<f64>,
}

const FIG2: SystemParams<f64> = SystemParams {
    omega_z: 40.0,
    gamma_g: 0.005,
    a_t: 0.5,
    a_p: 0.5,
    n0: 1e6,
    gamma_f: 2.0 / 9.0,
    big_gamma_f: 1.0 / 81.0,
};

const FIG6: SystemParams<f64> = SystemParams {
    gamma_g: 5e-5,
    n0: 1e8,
    gamma_f: 4.0 / 27.0,
    big_gamma_f: 4.0 / 729.0,
    ..FIG2
};

/// `gamma_f` giving a low-damping feedback `gamma_eff` of 4.45e-7 at
/// `gamma_g = 5e-7`, `N0 = 1e8`; see `analytic::gamma_f_for_low_damping_gamma_eff`.
pub const FIG4_GAMMA_F: f64 = 1.1099103062971332e-13;
/// Same construction at `N0 = 1e3` with `gamma_eff = 1e-2`.
pub const FIG4_DESK_GAMMA_F: f64 = 5.230776006515221e-3;
pub const FIG4_GAMMA_EFF: f64 = 4.45e-7;
pub const FIG4_DESK_GAMMA_EFF: f64 = 1e-2;

const FIG4: SystemParams<f64> = SystemParams {
    gamma_g: 5e-7,
    n0: 1e8,
    gamma_f: FIG4_GAMMA_F,
    big_gamma_f: 0.0,
    ..FIG2
};

static PRESETS: [Preset; 6] = [
    Preset {
        name: "fig2",
        description: "cooling from N0 = 1e6 with gamma_f = 18 Gamma_f",
        params: FIG2,
    },
    Preset {
        name: "fig4",
        description: "low damping, gamma_eff = 4.45e-7, N0 = 1e8 (analytic use only)",
        params: FIG4,
    },
    Preset {
        name: "fig6",
        description: "overdamped, bistable, gamma_f = 27 Gamma_f, N0 = 1e8",
        params: FIG6,
    },
    Preset {
        name: "high-n-bistable",
        description: "overdamped and bistable at large gas damping",
        params: SystemParams {
            gamma_g: 0.5,
            n0: 1e8,
            gamma_f: 3.3e-5,
            big_gamma_f: 2.8e-10,
            ..FIG2
        },
    },
    Preset {
        name: "fig4-desk",
        description: "low damping rescaled for time stepping: N0 = 1e3, gamma_eff = 1e-2",
        params: SystemParams {
            n0: 1e3,
            gamma_f: FIG4_DESK_GAMMA_F,
            ..FIG4
        },
    },
    Preset {
        name: "fig2-desk",
        description: "cooling rescaled for time stepping: N0 = 1e3",
        params: SystemParams { n0: 1e3, ..FIG2 },
    },
];

pub fn presets() -> &'static [Preset] {
    &PRESETS
}

pub fn preset(name: &str) -> Result<SystemParams<f64>> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .map(|p| p.params)
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
            Error::param("preset", format!("unknown preset `{}` (known: {})", name, names.join(", ")))
        })
}
