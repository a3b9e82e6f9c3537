//! Machine-readable experiment reports.
//!
//! Reports are deterministic for a fixed (config, seed): rows are sorted by
//! case key and floats serialize through serde_json's shortest round-trip
//! encoding. Wall time is printed to stderr, never into the report file, so
//! identical runs produce byte-identical files.

use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct CaseRow {
    pub key: String,
    pub pass: bool,
    pub detail: serde_json::Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub experiment: String,
    pub library_version: String,
    pub config: serde_json::Value,
    pub all_pass: bool,
    pub cases: Vec<CaseRow>,
}

impl Report {
    pub fn new(experiment: &str, config: serde_json::Value, mut cases: Vec<CaseRow>) -> Self {
        cases.sort_by(|a, b| a.key.cmp(&b.key));
        Self {
            experiment: experiment.to_string(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            all_pass: cases.iter().all(|c| c.pass),
            cases,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// One line per case plus a verdict, for the terminal.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for case in &self.cases {
            out.push_str(&format!(
                "{} {}\n",
                if case.pass { "PASS" } else { "FAIL" },
                case.key
            ));
        }
        out.push_str(&format!(
            "{}: {} ({} cases)\n",
            self.experiment,
            if self.all_pass { "all pass" } else { "FAILURES" },
            self.cases.len()
        ));
        out
    }

    pub fn first_failure(&self) -> Option<&CaseRow> {
        self.cases.iter().find(|c| !c.pass)
    }
}

/// CSV with the fixed experiment-results schema.
pub struct CsvBuilder {
    text: String,
}

impl CsvBuilder {
    /// Header `n,error,phase,set,mode,seed`.
    pub fn experiment_results() -> Self {
        Self {
            text: "n,error,phase,set,mode,seed\n".to_string(),
        }
    }

    pub fn with_header(header: &str) -> Self {
        Self {
            text: format!("{header}\n"),
        }
    }

    pub fn push_row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}
