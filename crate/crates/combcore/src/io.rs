//! JSON file formats shared with the CLI.
//!
//! Matrices are stored as `{"rows": n, "cols": m, "re": [...], "im": [...]}`
//! in row-major order. Channels are `{"d_in", "d_out", "kraus": [matrix…]}`
//! or `{"d_in", "d_out", "choi": matrix}`; combs are
//! `{"dims": […], "choi": matrix}` or `{"dims": […], "kraus": [matrix…]}`;
//! controlled channels add `{"coherence_k": matrix, "theta": real}` to the
//! channel form.
//!
//! All loaders validate structure (sizes, finiteness, consistency) and
//! return errors instead of panicking, so they can be driven by untrusted
//! input.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channels::{ChoiMatrix, KrausSet};
use crate::combs::{CombChoi, CombKraus, CombShape};
use crate::error::{Error, Result};
use crate::tensor::ComplexMatrix;

/// Serialized dense complex matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            re: m.data().iter().map(|z| z.re).collect(),
            im: m.data().iter().map(|z| z.im).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let len = self
            .rows
            .checked_mul(self.cols)
            .ok_or_else(|| Error::Format("matrix size overflows".into()))?;
        if len > 16_000_000 {
            return Err(Error::Format(
                "matrix larger than the supported budget".into(),
            ));
        }
        if self.re.len() != len || self.im.len() != len {
            return Err(Error::Format(format!(
                "expected {len} entries, got re: {}, im: {}",
                self.re.len(),
                self.im.len()
            )));
        }
        let data: Vec<Complex64> = self
            .re
            .iter()
            .zip(&self.im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        ComplexMatrix::new(self.rows, self.cols, data)
    }
}

/// Serialized channel: exactly one of `kraus` / `choi` must be present.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelJson {
    pub d_in: usize,
    pub d_out: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<MatrixJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub choi: Option<MatrixJson>,
}

impl ChannelJson {
    pub fn from_kraus(k: &KrausSet) -> Self {
        Self {
            d_in: k.d_in(),
            d_out: k.d_out(),
            kraus: Some(k.operators().iter().map(MatrixJson::from_matrix).collect()),
            choi: None,
        }
    }

    pub fn from_choi(j: &ChoiMatrix) -> Self {
        Self {
            d_in: j.d_in(),
            d_out: j.d_out(),
            kraus: None,
            choi: Some(MatrixJson::from_matrix(j.matrix())),
        }
    }

    /// The Choi operator, converting from Kraus form when necessary.
    pub fn to_choi(&self) -> Result<ChoiMatrix> {
        match (&self.kraus, &self.choi) {
            (Some(_), Some(_)) => Err(Error::Format(
                "channel file must carry either kraus or choi, not both".into(),
            )),
            (Some(ops), None) => {
                let mats: Result<Vec<ComplexMatrix>> = ops.iter().map(|m| m.to_matrix()).collect();
                let k = KrausSet::new(mats?)?;
                if k.d_in() != self.d_in || k.d_out() != self.d_out {
                    return Err(Error::Format(
                        "kraus operator shape disagrees with d_in/d_out".into(),
                    ));
                }
                Ok(k.to_choi())
            }
            (None, Some(m)) => ChoiMatrix::new(m.to_matrix()?, self.d_in, self.d_out),
            (None, None) => Err(Error::Format("channel file carries no data".into())),
        }
    }
}

/// Serialized controlled channel: channel JSON plus coherence operator and
/// the recorded phase convention. The Choi stored is the full controlled
/// operator (side `4·d_in·d_out`); `d_in`/`d_out` are the target dims.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ControlledChannelJson {
    pub d_in: usize,
    pub d_out: usize,
    pub choi: MatrixJson,
    pub coherence_k: MatrixJson,
    pub theta: f64,
}

impl ControlledChannelJson {
    pub fn from_parts(choi: &ChoiMatrix, k: &ComplexMatrix, theta: f64) -> Self {
        Self {
            d_in: choi.d_in() / 2,
            d_out: choi.d_out() / 2,
            choi: MatrixJson::from_matrix(choi.matrix()),
            coherence_k: MatrixJson::from_matrix(k),
            theta,
        }
    }

    pub fn to_choi(&self) -> Result<ChoiMatrix> {
        ChoiMatrix::new(self.choi.to_matrix()?, 2 * self.d_in, 2 * self.d_out)
    }
}

/// Serialized comb: exactly one of `kraus` / `choi` must be present.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CombJson {
    pub dims: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<MatrixJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub choi: Option<MatrixJson>,
}

pub enum CombData {
    Choi(CombChoi),
    Kraus(CombKraus),
}

impl CombJson {
    pub fn from_choi(c: &CombChoi) -> Self {
        Self {
            dims: c.shape().dims().to_vec(),
            kraus: None,
            choi: Some(MatrixJson::from_matrix(c.matrix())),
        }
    }

    pub fn from_kraus(k: &CombKraus) -> Self {
        Self {
            dims: k.shape().dims().to_vec(),
            kraus: Some(k.operators().iter().map(MatrixJson::from_matrix).collect()),
            choi: None,
        }
    }

    pub fn parse(&self) -> Result<CombData> {
        if self.dims.len() > 12 {
            return Err(Error::Format("too many comb spaces".into()));
        }
        let shape = CombShape::new(self.dims.clone())?;
        if shape.side() > 16_384 {
            return Err(Error::Format(
                "comb side exceeds the supported budget".into(),
            ));
        }
        match (&self.kraus, &self.choi) {
            (Some(_), Some(_)) => Err(Error::Format(
                "comb file must carry either kraus or choi, not both".into(),
            )),
            (Some(ops), None) => {
                let mats: Result<Vec<ComplexMatrix>> = ops.iter().map(|m| m.to_matrix()).collect();
                Ok(CombData::Kraus(CombKraus::new(mats?, shape)?))
            }
            (None, Some(m)) => Ok(CombData::Choi(CombChoi::new(m.to_matrix()?, shape)?)),
            (None, None) => Err(Error::Format("comb file carries no data".into())),
        }
    }
}

/// A file that is either a channel or a comb, told apart by the `dims` key.
pub enum ObjectJson {
    Channel(ChannelJson),
    Comb(CombJson),
}

pub fn parse_object(text: &str) -> Result<ObjectJson> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("dims").is_some() {
        Ok(ObjectJson::Comb(serde_json::from_value(value)?))
    } else if value.get("d_in").is_some() {
        Ok(ObjectJson::Channel(serde_json::from_value(value)?))
    } else {
        Err(Error::Format(
            "object is neither a channel (d_in) nor a comb (dims)".into(),
        ))
    }
}

/// Serialized set of unitaries (randomization sets, fixture output).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UnitarySetJson {
    pub name: String,
    pub unitaries: Vec<MatrixJson>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combs::identity_comb;
    use crate::sampling::{random_cptp_kraus, seeded_rng};

    #[test]
    fn channel_round_trip() {
        let mut rng = seeded_rng(1);
        let k = random_cptp_kraus(2, 3, 2, &mut rng).unwrap();
        let json = serde_json::to_string(&ChannelJson::from_kraus(&k)).unwrap();
        let parsed: ChannelJson = serde_json::from_str(&json).unwrap();
        assert!(parsed.to_choi().unwrap().approx_eq(&k.to_choi(), 1e-12));

        let cj = ChannelJson::from_choi(&k.to_choi());
        let json = serde_json::to_string(&cj).unwrap();
        let parsed: ChannelJson = serde_json::from_str(&json).unwrap();
        assert!(parsed.to_choi().unwrap().approx_eq(&k.to_choi(), 1e-12));
    }

    #[test]
    fn comb_round_trip() {
        let shape = CombShape::uniform(1, 2).unwrap();
        let comb = identity_comb(&shape).unwrap();
        let json = serde_json::to_string(&CombJson::from_choi(&comb)).unwrap();
        match parse_object(&json).unwrap() {
            ObjectJson::Comb(c) => match c.parse().unwrap() {
                CombData::Choi(parsed) => assert!(parsed.approx_eq(&comb, 0.0)),
                _ => panic!("expected choi"),
            },
            _ => panic!("expected comb"),
        }
    }

    #[test]
    fn controlled_channel_round_trip() {
        let mut rng = seeded_rng(3);
        let u = crate::sampling::haar_unitary(2, &mut rng);
        let cc = crate::controlled::controlled_unitary(&u).unwrap();
        let json = ControlledChannelJson::from_parts(cc.choi(), cc.coherence().matrix(), cc.theta());
        let text = serde_json::to_string(&json).unwrap();
        let parsed: ControlledChannelJson = serde_json::from_str(&text).unwrap();
        assert!(parsed.to_choi().unwrap().approx_eq(cc.choi(), 1e-12));
        assert!(parsed
            .coherence_k
            .to_matrix()
            .unwrap()
            .approx_eq(cc.coherence().matrix(), 1e-12));
        assert_eq!(parsed.theta, cc.theta());
    }

    #[test]
    fn loader_rejects_malformed() {
        assert!(parse_object("{}").is_err());
        assert!(parse_object("[1,2,3]").is_err());
        // wrong entry count
        let bad = r#"{"d_in":2,"d_out":2,"choi":{"rows":4,"cols":4,"re":[1.0],"im":[0.0]}}"#;
        match parse_object(bad).unwrap() {
            ObjectJson::Channel(c) => assert!(c.to_choi().is_err()),
            _ => panic!(),
        }
        // non-finite entries
        let nan = r#"{"d_in":1,"d_out":1,"choi":{"rows":1,"cols":1,"re":[null],"im":[0.0]}}"#;
        assert!(serde_json::from_str::<ChannelJson>(nan).is_err());
        // overflow-sized matrix header
        let huge = format!(r#"{{"rows":{},"cols":{},"re":[],"im":[]}}"#, usize::MAX, 2);
        let m: MatrixJson = serde_json::from_str(&huge).unwrap();
        assert!(m.to_matrix().is_err());
    }
}
