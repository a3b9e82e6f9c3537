//! The `combctl validate` path: load a channel or comb file and print its
//! validity report with the residual chain.

use combcore::channels::validate_channel;
use combcore::combs::{check_comb_choi, comb_kraus_conditions};
use combcore::error::Result;
use combcore::io::{parse_object, CombData, ObjectJson};

pub struct ValidationOutcome {
    pub pass: bool,
    pub lines: Vec<String>,
}

/// Largest operator side the validator will eigendecompose.
const SIDE_CAP: usize = 1024;

pub fn validate_text(text: &str) -> Result<ValidationOutcome> {
    match parse_object(text)? {
        ObjectJson::Channel(c) => {
            let choi = c.to_choi()?;
            if choi.matrix().rows() > SIDE_CAP {
                return Err(combcore::error::Error::Format(format!(
                    "operator side {} exceeds the validation cap {SIDE_CAP}",
                    choi.matrix().rows()
                )));
            }
            let report = validate_channel(&choi);
            let lines = vec![
                format!("channel d_in={} d_out={}", choi.d_in(), choi.d_out()),
                format!(
                    "cp: {} (min eigenvalue {:.3e}, hermiticity {:.3e})",
                    report.cp, report.min_eigenvalue, report.hermiticity_residual
                ),
                format!("tp: {} (residual {:.3e})", report.tp, report.tp_residual),
            ];
            Ok(ValidationOutcome {
                pass: report.is_cptp(),
                lines,
            })
        }
        ObjectJson::Comb(c) => match c.parse()? {
            CombData::Choi(comb) => {
                if comb.matrix().rows() > SIDE_CAP {
                    return Err(combcore::error::Error::Format(format!(
                        "comb side {} exceeds the validation cap {SIDE_CAP}",
                        comb.matrix().rows()
                    )));
                }
                let report = check_comb_choi(&comb)?;
                let mut lines = vec![
                    format!("comb dims={:?}", comb.shape().dims()),
                    format!("cp: {} (min eigenvalue {:.3e})", report.cp, report.min_eigenvalue),
                    format!("trace residual: {:.3e}", report.trace_residual),
                ];
                for (i, r) in report.chain.iter().enumerate() {
                    lines.push(format!(
                        "chain k={}: residual {:.3e}",
                        comb.shape().slots() - i,
                        r
                    ));
                }
                Ok(ValidationOutcome {
                    pass: report.valid(),
                    lines,
                })
            }
            CombData::Kraus(kraus) => {
                if kraus.shape().side() > SIDE_CAP || kraus.operators().len() > 64 {
                    return Err(combcore::error::Error::Format(format!(
                        "comb size exceeds the validation cap {SIDE_CAP}"
                    )));
                }
                let report = comb_kraus_conditions(&kraus)?;
                let choi_report = check_comb_choi(&kraus.to_choi())?;
                let mut lines = vec![format!("comb (kraus) dims={:?}", kraus.shape().dims())];
                for (k, r) in report.condition_residuals.iter().enumerate() {
                    lines.push(format!("kraus condition k={k}: residual {r:.3e}"));
                }
                lines.push(format!(
                    "kraus normalization: residual {:.3e}",
                    report.normalization_residual
                ));
                lines.push(format!(
                    "choi cross-check: {} (verdicts agree: {})",
                    choi_report.valid(),
                    choi_report.valid() == report.passes()
                ));
                Ok(ValidationOutcome {
                    pass: report.passes() && choi_report.valid() == report.passes(),
                    lines,
                })
            }
        },
    }
}
