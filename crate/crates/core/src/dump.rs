//! Shared JSON state-dump format.
//!
//! Every state is written as
//!
//! ```json
//! {"cutoffs":[c1,c2,...],"amps":[[re,im],[re,im],...]}
//! ```
//!
//! with one cutoff per mode and the amplitude tensor flattened row-major
//! (last mode fastest). `amps` has `prod(c_i + 1)` entries. Numbers use
//! serde_json's shortest round-trip formatting.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fock::{FockAmplitudes, ThreeModeAmplitudes, TwoModeAmplitudes};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub cutoffs: Vec<usize>,
    pub amps: Vec<[f64; 2]>,
}

fn pairs(amps: &[C64]) -> Vec<[f64; 2]> {
    amps.iter().map(|a| [a.re, a.im]).collect()
}

fn complexes(amps: &[[f64; 2]]) -> Vec<C64> {
    amps.iter().map(|[re, im]| C64::new(*re, *im)).collect()
}

impl From<&FockAmplitudes> for StateDump {
    fn from(s: &FockAmplitudes) -> Self {
        Self { cutoffs: vec![s.cutoff()], amps: pairs(s.amps()) }
    }
}

impl From<&TwoModeAmplitudes> for StateDump {
    fn from(s: &TwoModeAmplitudes) -> Self {
        Self { cutoffs: s.cutoffs().to_vec(), amps: pairs(s.amps()) }
    }
}

impl From<&ThreeModeAmplitudes> for StateDump {
    fn from(s: &ThreeModeAmplitudes) -> Self {
        Self { cutoffs: s.cutoffs().to_vec(), amps: pairs(s.amps()) }
    }
}

fn rank_error(d: &StateDump, want: usize) -> crate::error::Error {
    crate::error::Error::InvalidParameter(format!(
        "state dump has {} modes, expected {want}",
        d.cutoffs.len()
    ))
}

impl TryFrom<&StateDump> for FockAmplitudes {
    type Error = crate::error::Error;
    fn try_from(d: &StateDump) -> Result<Self> {
        if d.cutoffs.len() != 1 || d.amps.len() != d.cutoffs[0] + 1 {
            return Err(rank_error(d, 1));
        }
        FockAmplitudes::new(complexes(&d.amps))
    }
}

impl TryFrom<&StateDump> for TwoModeAmplitudes {
    type Error = crate::error::Error;
    fn try_from(d: &StateDump) -> Result<Self> {
        if d.cutoffs.len() != 2 {
            return Err(rank_error(d, 2));
        }
        TwoModeAmplitudes::new(d.cutoffs[0], d.cutoffs[1], complexes(&d.amps))
    }
}

impl TryFrom<&StateDump> for ThreeModeAmplitudes {
    type Error = crate::error::Error;
    fn try_from(d: &StateDump) -> Result<Self> {
        if d.cutoffs.len() != 3 {
            return Err(rank_error(d, 3));
        }
        ThreeModeAmplitudes::new([d.cutoffs[0], d.cutoffs[1], d.cutoffs[2]], complexes(&d.amps))
    }
}

/// `serde(with = ...)` adapter writing a complex number as `[re, im]`.
pub mod complex_pair {
    use num_complex::Complex64 as C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(c: &C64, s: S) -> Result<S::Ok, S::Error> {
        [c.re, c.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(C64::new(re, im))
    }
}

/// `serde(with = ...)` adapter writing a single-mode state as a [`StateDump`].
pub mod fock_dump {
    use super::StateDump;
    use crate::fock::FockAmplitudes;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(f: &FockAmplitudes, s: S) -> Result<S::Ok, S::Error> {
        StateDump::from(f).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<FockAmplitudes, D::Error> {
        let dump = StateDump::deserialize(d)?;
        FockAmplitudes::try_from(&dump).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_exact_layout() {
        let mut s = TwoModeAmplitudes::zeros(1, 1);
        s.set(0, 1, C64::new(0.6, 0.0));
        s.set(1, 0, C64::new(0.0, -0.8));
        let json = serde_json::to_string(&StateDump::from(&s)).unwrap();
        assert_eq!(json, r#"{"cutoffs":[1,1],"amps":[[0.0,0.0],[0.6,0.0],[0.0,-0.8],[0.0,0.0]]}"#);
    }

    #[test]
    fn wrong_rank_rejected() {
        let d = StateDump { cutoffs: vec![0, 0], amps: vec![[1.0, 0.0]] };
        assert!(FockAmplitudes::try_from(&d).is_err());
        assert!(ThreeModeAmplitudes::try_from(&d).is_err());
        assert!(TwoModeAmplitudes::try_from(&d).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn two_mode_round_trip(c1 in 0usize..5, c2 in 0usize..5, seed in proptest::collection::vec(-1.0f64..1.0, 72)) {
                let n = (c1 + 1) * (c2 + 1);
                let raw: Vec<C64> = (0..n).map(|i| C64::new(seed[2 * i], seed[2 * i + 1])).collect();
                let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
                prop_assume!(norm > 1e-6);
                let amps = raw.iter().map(|a| a / norm).collect();
                let s = TwoModeAmplitudes::new(c1, c2, amps).unwrap();
                let text = serde_json::to_string(&StateDump::from(&s)).unwrap();
                let back: StateDump = serde_json::from_str(&text).unwrap();
                prop_assert_eq!(TwoModeAmplitudes::try_from(&back).unwrap(), s);
            }
        }
    }
}
