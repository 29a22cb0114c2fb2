//! JSON run reports and the per-iteration CSV log.

use std::fmt::Write as _;

use cvxseg::{RunReport, StepRecord};

pub fn report_json(report: &RunReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

/// Accumulates one CSV row per iteration.
#[derive(Debug, Clone)]
pub struct CsvLog {
    text: String,
}

impl CsvLog {
    pub fn new(radii: &[f64]) -> Self {
        let mut text = String::from("t,rv");
        for r in radii {
            write!(text, ",min_violation_r{r}").unwrap();
        }
        text.push_str(",band_size\n");
        Self { text }
    }

    pub fn push(&mut self, rec: &StepRecord) {
        write!(self.text, "{},", rec.t).unwrap();
        if let Some(rv) = rec.rv {
            write!(self.text, "{rv}").unwrap();
        }
        for v in &rec.min_violation {
            write!(self.text, ",{v}").unwrap();
        }
        writeln!(self.text, ",{}", rec.band_size).unwrap();
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let mut log = CsvLog::new(&[4.0, 9.5]);
        log.push(&StepRecord {
            t: 1,
            rv: None,
            min_violation: vec![0.0, -0.25],
            band_size: 12,
            changed: 3,
            force_refreshed: false,
        });
        log.push(&StepRecord {
            t: 300,
            rv: Some(0.5),
            min_violation: vec![0.0, 0.0],
            band_size: 10,
            changed: 0,
            force_refreshed: false,
        });
        assert_eq!(
            log.as_str(),
            "t,rv,min_violation_r4,min_violation_r9.5,band_size\n1,,0,-0.25,12\n300,0.5,0,0,10\n"
        );
    }
}
