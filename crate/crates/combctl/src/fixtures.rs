//! Seeded fixture files: reference objects in the library file formats,
//! verified before they are written.

use combcore::channels::ChoiMatrix;
use combcore::combs::{check_comb_choi, identity_comb, link_apply, CombShape};
use combcore::controllization::{antisym_state, prepare_traceout_comb, RandomizationSet};
use combcore::error::{Error, Result};
use combcore::io::{ChannelJson, CombJson, MatrixJson, UnitarySetJson};
use combcore::sampling::{haar_unitary, random_cptp_kraus, random_state_vector, seeded_rng};
use combcore::tensor::ComplexMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixtureKind {
    HaarUnitary,
    RandomCptp,
    AntisymState,
    PauliSet,
    CliffordSet,
    IdentityComb,
    NeutralizationComb,
}

impl FixtureKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "haar-unitary" => Ok(Self::HaarUnitary),
            "random-cptp" => Ok(Self::RandomCptp),
            "antisym-state" => Ok(Self::AntisymState),
            "pauli-set" => Ok(Self::PauliSet),
            "clifford-set" => Ok(Self::CliffordSet),
            "identity-comb" => Ok(Self::IdentityComb),
            "neutralization-comb" => Ok(Self::NeutralizationComb),
            other => Err(Error::Parameter(format!("unknown fixture kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FixtureParams {
    pub d: usize,
    pub d_out: usize,
    pub kraus: usize,
    pub slots: usize,
    pub seed: u64,
    pub pure_state: bool,
}

impl Default for FixtureParams {
    fn default() -> Self {
        Self {
            d: 2,
            d_out: 2,
            kraus: 4,
            slots: 1,
            seed: 0,
            pure_state: false,
        }
    }
}

/// Builds the fixture and returns its JSON text. Every kind is verified
/// before serialization.
pub fn emit(kind: FixtureKind, params: &FixtureParams) -> Result<String> {
    if !(1..=6).contains(&params.d) || !(1..=6).contains(&params.d_out) {
        return Err(Error::Parameter("fixture dimensions must lie in 1..=6".into()));
    }
    if params.slots == 0 || params.slots > 3 {
        return Err(Error::Parameter("fixture slots must lie in 1..=3".into()));
    }
    let text = match kind {
        FixtureKind::HaarUnitary => {
            let mut rng = seeded_rng(params.seed);
            let u = haar_unitary(params.d, &mut rng);
            serde_json::to_string_pretty(&MatrixJson::from_matrix(&u))?
        }
        FixtureKind::RandomCptp => {
            let mut rng = seeded_rng(params.seed);
            let k = random_cptp_kraus(params.d, params.d_out, params.kraus.max(1), &mut rng)?;
            if k.tp_residual() > 1e-9 {
                return Err(Error::NotTracePreserving {
                    residual: k.tp_residual(),
                });
            }
            serde_json::to_string_pretty(&ChannelJson::from_kraus(&k))?
        }
        FixtureKind::AntisymState => {
            let a = antisym_state(params.d)?;
            serde_json::to_string_pretty(&MatrixJson::from_matrix(&a))?
        }
        FixtureKind::PauliSet | FixtureKind::CliffordSet => {
            let set = if kind == FixtureKind::PauliSet {
                RandomizationSet::pauli()
            } else {
                RandomizationSet::clifford()
            };
            set.validate()?;
            let json = UnitarySetJson {
                name: set.kind().as_str().to_string(),
                unitaries: set
                    .unitaries()
                    .iter()
                    .map(MatrixJson::from_matrix)
                    .collect(),
            };
            serde_json::to_string_pretty(&json)?
        }
        FixtureKind::IdentityComb => {
            let shape = CombShape::uniform(params.slots, params.d)?;
            let comb = identity_comb(&shape)?;
            if !check_comb_choi(&comb)?.valid() {
                return Err(Error::InvalidChannel("identity comb failed its own check".into()));
            }
            serde_json::to_string_pretty(&CombJson::from_choi(&comb))?
        }
        FixtureKind::NeutralizationComb => {
            let shape = CombShape::uniform(params.slots, params.d)?;
            let side = shape.slot_input_side();
            let rho = if params.pure_state {
                let psi = random_state_vector(side, &mut seeded_rng(params.seed));
                psi.matmul(&psi.dagger())
            } else {
                ComplexMatrix::identity(side)
                    .scale(num_complex::Complex64::new(1.0 / side as f64, 0.0))
            };
            let comb = prepare_traceout_comb(&rho, &shape)?;
            if !check_comb_choi(&comb)?.valid() {
                return Err(Error::InvalidChannel(
                    "neutralization comb failed its own check".into(),
                ));
            }
            // spot-check the defining property on one random input chain
            let mut rng = seeded_rng(params.seed ^ 0x6e0f);
            let inputs: Vec<ChoiMatrix> = (0..params.slots)
                .map(|_| {
                    random_cptp_kraus(params.d, params.d, params.d, &mut rng)
                        .map(|k| k.to_choi())
                })
                .collect::<Result<_>>()?;
            let out = link_apply(&comb, &inputs)?;
            if !out.approx_eq(&ChoiMatrix::identity(params.d), 1e-9) {
                return Err(Error::InvalidChannel("comb does not neutralize".into()));
            }
            serde_json::to_string_pretty(&CombJson::from_choi(&comb))?
        }
    };
    Ok(text + "\n")
}
