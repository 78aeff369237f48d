use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{BoxcarConfig, ThinPlateConfig};
use crate::cs::{EqualitySolverConfig, TwistConfig};
use crate::error::{Error, Result};
use crate::fbm::{HurstParam, SynthOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MethodKind {
    #[serde(rename = "box")]
    Box,
    #[serde(rename = "tp")]
    ThinPlate,
    #[serde(rename = "cs-twist")]
    CsTwist,
    #[serde(rename = "cs-tv")]
    CsTv,
    #[serde(rename = "cs-bp")]
    CsBp,
}

impl MethodKind {
    pub const ALL: [MethodKind; 5] = [
        MethodKind::Box,
        MethodKind::ThinPlate,
        MethodKind::CsTwist,
        MethodKind::CsTv,
        MethodKind::CsBp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Box => "box",
            MethodKind::ThinPlate => "tp",
            MethodKind::CsTwist => "cs-twist",
            MethodKind::CsTv => "cs-tv",
            MethodKind::CsBp => "cs-bp",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method '{s}'")))
    }
}

fn default_target_rms() -> f64 {
    0.05
}

/// A campaign: every (H, sample count, repeat) cell reconstructed by every method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// `[rows, cols]`.
    pub grid: [usize; 2],
    pub hurst_values: Vec<HurstParam>,
    #[serde(default)]
    pub sample_counts: Vec<usize>,
    /// Each factor `f` draws `rows * cols / f` samples.
    #[serde(default)]
    pub subsampling_factors: Vec<usize>,
    pub methods: Vec<MethodKind>,
    pub repeats: usize,
    pub base_seed: u64,
    #[serde(default = "default_target_rms")]
    pub target_rms: f64,
    #[serde(default)]
    pub synthesis: SynthOptions,
    #[serde(default)]
    pub boxcar: BoxcarConfig,
    #[serde(default)]
    pub thin_plate: ThinPlateConfig,
    #[serde(default)]
    pub twist: TwistConfig,
    #[serde(default)]
    pub equality: EqualitySolverConfig,
    /// Write measured times into the results CSV instead of zeros.
    #[serde(default)]
    pub record_wall_time: bool,
}

/// One sample-count column of a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplePlan {
    pub index: usize,
    pub n_sub: usize,
    pub factor: Option<usize>,
}

impl ExperimentSpec {
    /// 64x64 CS-TV campaign over subsampling factors 2 and 4.
    pub fn table1_default() -> Self {
        Self {
            grid: [64, 64],
            hurst_values: hurst(&[0.4, 0.6, 0.8]),
            sample_counts: Vec::new(),
            subsampling_factors: vec![2, 4],
            methods: vec![MethodKind::CsTv],
            repeats: 10,
            base_seed: 1,
            target_rms: default_target_rms(),
            synthesis: SynthOptions::default(),
            boxcar: BoxcarConfig::default(),
            thin_plate: ThinPlateConfig::default(),
            twist: TwistConfig::default(),
            equality: EqualitySolverConfig::default(),
            record_wall_time: false,
        }
    }

    /// 100x100 comparison of boxcar, thin-plate and TwIST.
    pub fn table2_default() -> Self {
        Self {
            grid: [100, 100],
            hurst_values: hurst(&[0.4, 0.5, 0.6, 0.7, 0.8, 0.9]),
            sample_counts: vec![500, 1000, 2000],
            subsampling_factors: Vec::new(),
            methods: vec![MethodKind::Box, MethodKind::ThinPlate, MethodKind::CsTwist],
            repeats: 10,
            base_seed: 2,
            ..Self::table1_default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn content_hash(&self) -> String {
        let compact = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(Sha256::digest(&compact))
    }

    pub fn validate(&self) -> Result<()> {
        let [rows, cols] = self.grid;
        if rows < 2 || cols < 2 {
            return Err(Error::InvalidParameter(format!("grid {rows}x{cols} too small")));
        }
        if self.hurst_values.is_empty() {
            return Err(Error::InvalidParameter("hurst_values is empty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("methods is empty".into()));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidParameter("repeats must be at least 1".into()));
        }
        match (self.sample_counts.is_empty(), self.subsampling_factors.is_empty()) {
            (false, false) => {
                return Err(Error::InvalidParameter(
                    "give either sample_counts or subsampling_factors, not both".into(),
                ))
            }
            (true, true) => {
                return Err(Error::InvalidParameter(
                    "one of sample_counts or subsampling_factors is required".into(),
                ))
            }
            _ => {}
        }
        for p in self.sample_plan() {
            if p.n_sub == 0 || p.n_sub > rows * cols {
                return Err(Error::InvalidParameter(format!(
                    "sample count {} outside 1..={}",
                    p.n_sub,
                    rows * cols
                )));
            }
        }
        if self.subsampling_factors.contains(&0) {
            return Err(Error::InvalidParameter("subsampling factor 0".into()));
        }
        if !(self.target_rms > 0.0 && self.target_rms.is_finite()) {
            return Err(Error::InvalidParameter(format!("target_rms = {}", self.target_rms)));
        }
        self.boxcar.validate()?;
        self.thin_plate.validate()?;
        self.twist.validate()?;
        self.equality.validate()?;
        Ok(())
    }

    pub fn sample_plan(&self) -> Vec<SamplePlan> {
        let total = self.grid[0] * self.grid[1];
        if self.sample_counts.is_empty() {
            self.subsampling_factors
                .iter()
                .enumerate()
                .map(|(index, &f)| SamplePlan {
                    index,
                    n_sub: total / f.max(1),
                    factor: Some(f),
                })
                .collect()
        } else {
            self.sample_counts
                .iter()
                .enumerate()
                .map(|(index, &n_sub)| SamplePlan {
                    index,
                    n_sub,
                    factor: None,
                })
                .collect()
        }
    }
}

fn hurst(values: &[f64]) -> Vec<HurstParam> {
    values.iter().map(|&h| HurstParam::new(h).expect("valid H")).collect()
}

const FIELD_TAG: u64 = 0x6669_656c_64;
const MASK_TAG: u64 = 0x6d61_736b;

/// The splitmix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `value` into `state`.
pub fn mix_seed(state: u64, value: u64) -> u64 {
    splitmix64(state ^ splitmix64(value))
}

/// Seed of the truth field for (H index, repeat); shared by all sample counts.
pub fn field_seed(base_seed: u64, h_index: usize, repeat: usize) -> u64 {
    mix_seed(mix_seed(mix_seed(base_seed, FIELD_TAG), h_index as u64), repeat as u64)
}

/// Seed of the sampling mask, derived from the field seed and the sample-count index.
pub fn mask_seed(field_seed: u64, n_index: usize) -> u64 {
    mix_seed(mix_seed(field_seed, MASK_TAG), n_index as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        for spec in [ExperimentSpec::table1_default(), ExperimentSpec::table2_default()] {
            spec.validate().unwrap();
            let back = ExperimentSpec::from_json(&spec.to_json()).unwrap();
            assert_eq!(back, spec);
            assert_eq!(back.content_hash(), spec.content_hash());
        }
        let t1 = ExperimentSpec::table1_default();
        let plan = t1.sample_plan();
        assert_eq!(plan.iter().map(|p| p.n_sub).collect::<Vec<_>>(), vec![2048, 1024]);
        assert_ne!(t1.content_hash(), ExperimentSpec::table2_default().content_hash());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let mut v: serde_json::Value = serde_json::from_str(&ExperimentSpec::table1_default().to_json()).unwrap();
        v["colour"] = serde_json::json!(1);
        assert!(ExperimentSpec::from_json(&v.to_string()).is_err());
        let bad = [
            r#"{"grid":[8,8],"hurst_values":[1.2],"sample_counts":[4],"methods":["tp"],"repeats":1,"base_seed":0}"#,
            r#"{"grid":[8,8],"hurst_values":[0.5],"sample_counts":[4],"methods":[],"repeats":1,"base_seed":0}"#,
            r#"{"grid":[8,8],"hurst_values":[0.5],"sample_counts":[4],"methods":["tp"],"repeats":0,"base_seed":0}"#,
            r#"{"grid":[8,8],"hurst_values":[0.5],"methods":["tp"],"repeats":1,"base_seed":0}"#,
            r#"{"grid":[8,8],"hurst_values":[0.5],"sample_counts":[65],"methods":["tp"],"repeats":1,"base_seed":0}"#,
            r#"{"grid":[8,8],"hurst_values":[0.5],"sample_counts":[4],"methods":["kriging"],"repeats":1,"base_seed":0}"#,
            r#"{"grid":[8,8],"hurst_values":[0.5],"sample_counts":[4],"methods":["box"],"repeats":1,"base_seed":0,"boxcar":{"window":4}}"#,
        ];
        for text in bad {
            assert!(ExperimentSpec::from_json(text).is_err(), "{text}");
        }
        let ok = r#"{"grid":[8,8],"hurst_values":[0.5],"sample_counts":[4],"methods":["box"],"repeats":1,"base_seed":0,"boxcar":{"window":5}}"#;
        let spec = ExperimentSpec::from_json(ok).unwrap();
        assert_eq!(spec.boxcar, BoxcarConfig { window: 5, ..BoxcarConfig::default() });
        assert_eq!(spec.target_rms, 0.05);
    }

    #[test]
    fn method_names() {
        for m in MethodKind::ALL {
            assert_eq!(m.name().parse::<MethodKind>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
        assert!("cs".parse::<MethodKind>().is_err());
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let mut seen = std::collections::BTreeSet::new();
        for h in 0..6 {
            for r in 0..10 {
                let f = field_seed(2, h, r);
                assert!(seen.insert(f));
                for n in 0..3 {
                    assert!(seen.insert(mask_seed(f, n)));
                }
            }
        }
        assert_eq!(field_seed(2, 1, 3), field_seed(2, 1, 3));
        assert_ne!(field_seed(2, 1, 3), field_seed(3, 1, 3));
        assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
    }
}
