//! TOML experiment configuration.
//!
//! ```toml
//! seed = 7
//! trials = 500
//! methods = ["proposed", "only-rx", "si-free"]
//!
//! [system]
//! n_antennas = 32
//! n_training = 64
//!
//! [system.rfc_limits]
//! rx = 2
//! tx = 2
//!
//! [levels]
//! snr_db = 10.0
//! inr_db = 34.0
//!
//! [users]
//! ul = [0.0, 2.5, 7.5, 12.5]
//! dl = [0.0, -2.5, -7.5, -12.5]
//!
//! [[scatterers]]
//! angle = -40.0
//! delay = 3
//! ```
//!
//! Powers come from `[levels]` when present, otherwise from `[link_budget]`,
//! otherwise 10 dB SNR and 34 dB INR. A scatterer may override its own
//! `inr_db`.

use std::path::Path;

use serde::Deserialize;

use crate::array_geometry::AngleDeg;
use crate::emergent::AngleGrid;
use crate::harness::experiments::{angle_grid, ExperimentKind, ExperimentSpec};
use crate::harness::Method;
use crate::scenario::{
    channel_variances, db_to_linear, LinkBudget, ScattererMap, ScattererRecord, SystemConstants, UserSet,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub frames_per_scenario: Option<usize>,
    pub bootstrap: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub p_fa: Option<f64>,
    #[serde(default)]
    pub system: SystemSection,
    pub levels: Option<Levels>,
    pub link_budget: Option<LinkBudget>,
    pub users: Option<UsersSection>,
    pub scatterers: Option<Vec<ScattererEntry>>,
    #[serde(default)]
    pub random: RandomSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub emergence: EmergenceSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub n_antennas: Option<usize>,
    pub n_subcarriers: Option<usize>,
    pub n_training: Option<usize>,
    pub noise_power: Option<f64>,
    pub rfc_limits: Option<crate::scenario::RfcLimits>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Levels {
    /// Sets both UL and DL input SNR.
    pub snr_db: Option<f64>,
    pub ul_snr_db: Option<f64>,
    pub dl_snr_db: Option<f64>,
    pub inr_db: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsersSection {
    pub ul: Vec<f64>,
    pub dl: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererEntry {
    pub angle: f64,
    pub delay: usize,
    pub inr_db: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSection {
    pub k_u: Option<usize>,
    pub k_d: Option<usize>,
    pub k_s: Option<usize>,
    pub angle_range: Option<(f64, f64)>,
    pub fd_user_at_zero: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Explicit scatterer angles; replaces the start/stop/step grid.
    pub angles: Option<Vec<f64>>,
    pub angle_start: Option<f64>,
    pub angle_stop: Option<f64>,
    pub angle_step: Option<f64>,
    /// Add the user angles to the generated grid.
    pub include_user_angles: Option<bool>,
    pub scatterer_delay: Option<usize>,
    pub inr_db: Option<Vec<f64>>,
    pub counts: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmergenceSection {
    pub search_start: Option<f64>,
    pub search_stop: Option<f64>,
    pub search_step: Option<f64>,
}

impl ConfigFile {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn constants(&self) -> Result<SystemConstants> {
        let d = SystemConstants::default();
        let s = &self.system;
        let c = SystemConstants {
            n_antennas: s.n_antennas.unwrap_or(d.n_antennas),
            n_subcarriers: s.n_subcarriers.unwrap_or(d.n_subcarriers),
            n_training: s.n_training.unwrap_or(d.n_training),
            noise_power: s.noise_power.unwrap_or(d.noise_power),
            rfc_limits: s.rfc_limits.unwrap_or(d.rfc_limits),
        };
        c.validate()?;
        Ok(c)
    }

    /// `(P_u, P_d, P_s)` as channel variances.
    fn powers(&self, consts: &SystemConstants, k_d: usize) -> Result<(f64, f64, f64)> {
        let n0 = consts.noise_power;
        if let Some(lv) = &self.levels {
            let ul = lv.ul_snr_db.or(lv.snr_db).unwrap_or(10.0);
            let dl = lv.dl_snr_db.or(lv.snr_db).unwrap_or(10.0);
            let inr = lv.inr_db.unwrap_or(34.0);
            return Ok((n0 * db_to_linear(ul), n0 * db_to_linear(dl), n0 * db_to_linear(inr)));
        }
        if let Some(lb) = &self.link_budget {
            let (p_u, p_s) = channel_variances(lb, consts, k_d)?;
            return Ok((p_u, p_u, p_s));
        }
        Ok((n0 * db_to_linear(10.0), n0 * db_to_linear(10.0), n0 * db_to_linear(34.0)))
    }

    /// Builds the experiment and the system constants it runs under.
    pub fn resolve(&self, kind: ExperimentKind) -> Result<(ExperimentSpec, SystemConstants)> {
        let consts = self.constants()?;
        let mut spec = ExperimentSpec::defaults(kind, &consts);
        let k_d = match &self.users {
            Some(u) => u.dl.len(),
            None => self.random.k_d.unwrap_or(spec.random.k_d),
        };
        let (p_u, p_d, p_s) = self.powers(&consts, k_d.max(1))?;
        let n0 = consts.noise_power;

        if let Some(v) = self.seed {
            spec.seed = v;
        }
        if let Some(v) = self.trials {
            spec.trials = v;
        }
        if let Some(v) = self.frames_per_scenario {
            spec.frames_per_scenario = v;
        }
        if let Some(v) = self.bootstrap {
            spec.bootstrap = v;
        }
        if let Some(v) = self.p_fa {
            spec.p_fa = v;
        }
        if let Some(ms) = &self.methods {
            spec.methods = ms.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?;
        }

        let angles = |v: &[f64]| v.iter().map(|&a| AngleDeg::new(a)).collect::<Result<Vec<_>>>();
        spec.users = match &self.users {
            Some(u) => UserSet::with_powers(angles(&u.ul)?, angles(&u.dl)?, p_u, p_d)?,
            None => UserSet::with_powers(spec.users.ul_angles.clone(), spec.users.dl_angles.clone(), p_u, p_d)?,
        };
        spec.scatterer_power = p_s;
        spec.scatterers = match &self.scatterers {
            Some(list) => ScattererMap::new(
                list.iter()
                    .map(|e| {
                        let p = e.inr_db.map_or(p_s, |db| n0 * db_to_linear(db));
                        Ok(ScattererRecord::new(AngleDeg::new(e.angle)?, e.delay, p))
                    })
                    .collect::<Result<_>>()?,
            )?,
            None => crate::harness::experiments::reference_scatterers(p_s),
        };

        let r = &self.random;
        spec.random.k_u = r.k_u.unwrap_or(spec.random.k_u);
        spec.random.k_d = r.k_d.unwrap_or(spec.random.k_d);
        spec.random.k_s = r.k_s.unwrap_or(spec.random.k_s);
        spec.random.angle_range = r.angle_range.unwrap_or(spec.random.angle_range);
        spec.random.fd_user_at_zero = r.fd_user_at_zero.unwrap_or(spec.random.fd_user_at_zero);
        spec.random.ul_power = p_u;
        spec.random.dl_power = p_d;
        spec.random.scatterer_power = p_s;

        let sw = &self.sweep;
        if let Some(a) = &sw.angles {
            spec.angle_grid = a.clone();
        } else if sw.angle_start.is_some() || sw.angle_stop.is_some() || sw.angle_step.is_some() || self.users.is_some()
        {
            let extra: Vec<f64> = if sw.include_user_angles.unwrap_or(true) {
                spec.users
                    .ul_angles
                    .iter()
                    .chain(&spec.users.dl_angles)
                    .map(|a| a.degrees())
                    .collect()
            } else {
                vec![]
            };
            let step = sw.angle_step.unwrap_or(2.0);
            if !(step > 0.0) {
                return Err(Error::Config("sweep.angle_step must be positive".into()));
            }
            spec.angle_grid = angle_grid(sw.angle_start.unwrap_or(-60.0), sw.angle_stop.unwrap_or(60.0), step, &extra);
        }
        if let Some(l) = sw.scatterer_delay {
            spec.scatterer_delay = l;
        }
        if let Some(v) = &sw.inr_db {
            spec.inr_grid_db = v.clone();
        }
        if let Some(v) = &sw.counts {
            spec.count_grid = v.clone();
        }

        let em = &self.emergence;
        let d = AngleGrid::default();
        spec.angle_search = AngleGrid {
            start: em.search_start.unwrap_or(d.start),
            stop: em.search_stop.unwrap_or(d.stop),
            step: em.search_step.unwrap_or(d.step),
        };
        validate_spec(&spec, &consts)?;
        Ok((spec, consts))
    }
}

/// Checks the fields each experiment kind relies on.
pub fn validate_spec(spec: &ExperimentSpec, consts: &SystemConstants) -> Result<()> {
    consts.validate()?;
    spec.users.validate()?;
    if spec.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    if spec.methods.is_empty() {
        return Err(Error::Config("no methods selected".into()));
    }
    if !(spec.p_fa > 0.0 && spec.p_fa < 1.0) {
        return Err(Error::Config(format!("p_fa = {} must lie in (0, 1)", spec.p_fa)));
    }
    match spec.kind {
        ExperimentKind::AngleSweep | ExperimentKind::Emergence => {
            if spec.angle_grid.is_empty() {
                return Err(Error::Config("empty angle grid".into()));
            }
            for &a in &spec.angle_grid {
                AngleDeg::new(a)?;
            }
            if spec.kind == ExperimentKind::AngleSweep && spec.scatterer_delay >= consts.delay_set_len() {
                return Err(Error::Config(format!(
                    "scatterer_delay = {} outside the delay set",
                    spec.scatterer_delay
                )));
            }
            if spec.kind == ExperimentKind::Emergence {
                crate::scenario::Scenario::new(spec.users.clone(), spec.scatterers.clone()).validate(consts)?;
                let g = spec.angle_search;
                if !(g.step > 0.0 && g.start < g.stop) {
                    return Err(Error::Config("invalid angle search grid".into()));
                }
            }
        }
        ExperimentKind::Scenario => {
            crate::scenario::Scenario::new(spec.users.clone(), spec.scatterers.clone()).validate(consts)?;
        }
        ExperimentKind::RandomMc | ExperimentKind::InrSweep | ExperimentKind::CountSweep => {
            if spec.frames_per_scenario == 0 {
                return Err(Error::Config("frames_per_scenario must be at least 1".into()));
            }
            let (lo, hi) = spec.random.angle_range;
            AngleDeg::new(lo)?;
            AngleDeg::new(hi)?;
            if lo >= hi {
                return Err(Error::Config("random.angle_range must be increasing".into()));
            }
            if spec.kind == ExperimentKind::InrSweep && spec.inr_grid_db.is_empty() {
                return Err(Error::Config("empty INR grid".into()));
            }
            if spec.kind == ExperimentKind::CountSweep && spec.count_grid.is_empty() {
                return Err(Error::Config("empty scatterer count grid".into()));
            }
            let max_k = match spec.kind {
                ExperimentKind::CountSweep => spec.count_grid.iter().copied().max().unwrap_or(0),
                _ => spec.random.k_s,
            };
            if max_k > consts.delay_set_len() {
                return Err(Error::Config(format!(
                    "{max_k} scatterers do not fit {} distinct delays",
                    consts.delay_set_len()
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::linear_to_db;

    #[test]
    fn empty_config_gives_defaults() {
        let (spec, consts) = ConfigFile::default().resolve(ExperimentKind::AngleSweep).unwrap();
        assert_eq!(consts, SystemConstants::default());
        assert_eq!(spec.trials, 2000);
        assert!((linear_to_db(spec.scatterer_power) - 34.0).abs() < 1e-12);
        assert!(spec.angle_grid.contains(&12.5));
    }

    #[test]
    fn levels_override_link_budget() {
        let cfg = ConfigFile::from_toml_str(
            "[levels]\nsnr_db = 5.0\ninr_db = 20.0\n[link_budget]\nwavelength = 0.01\nue_tx_power = 0.1\n\
             bs_tx_power = 10.0\nrcs = 100.0\nuser_distance = 80.0\nscatterer_distance = 20.0\n",
        )
        .unwrap();
        let (spec, _) = cfg.resolve(ExperimentKind::Scenario).unwrap();
        assert!((linear_to_db(spec.users.ul_powers[0]) - 5.0).abs() < 1e-12);
        assert!((linear_to_db(spec.scatterer_power) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn scatterer_list_and_limits() {
        let cfg = ConfigFile::from_toml_str(
            "methods = [\"proposed-limited(rx=2,tx=2)\", \"si-free\"]\n[system.rfc_limits]\nrx = 3\n\
             [[scatterers]]\nangle = 10.0\ndelay = 4\n[[scatterers]]\nangle = -3.0\ndelay = 5\ninr_db = 20.0\n",
        )
        .unwrap();
        let (spec, consts) = cfg.resolve(ExperimentKind::Scenario).unwrap();
        assert_eq!(consts.rfc_limits.rx, Some(3));
        assert_eq!(spec.scatterers.len(), 2);
        assert!((linear_to_db(spec.scatterers.records()[1].power) - 20.0).abs() < 1e-12);
        assert_eq!(spec.methods.len(), 2);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ConfigFile::from_toml_str("bogus = 1").is_err());
        let bad_delay = ConfigFile::from_toml_str("[[scatterers]]\nangle = 0.0\ndelay = 64\n").unwrap();
        assert!(bad_delay.resolve(ExperimentKind::Scenario).is_err());
        let bad_method = ConfigFile::from_toml_str("methods = [\"magic\"]").unwrap();
        assert!(bad_method.resolve(ExperimentKind::Scenario).is_err());
        let bad_sys = ConfigFile::from_toml_str("[system]\nn_subcarriers = 1000\n").unwrap();
        assert!(bad_sys.resolve(ExperimentKind::Scenario).is_err());
    }
}
