use super::DetectionReport;
use crate::units::format_float as f;
use std::fmt::Write as _;

pub const REPORT_CSV_HEADER: &str = "timestamp,k_score,mse,xcorr,rqcc,alien,distance_m,contaminated";
pub const STREAM_CSV_HEADER: &str = "batch_index,k_score,threshold,alien";

fn flag(b: bool) -> u8 {
    b as u8
}

impl DetectionReport {
    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s = &self.scores;
        let _ = writeln!(out, "timestamp: {}", self.timestamp);
        let _ = writeln!(out, "k_score: {}", f(s.coherence_k));
        let _ = writeln!(out, "threshold: {}", f(self.threshold));
        let _ = writeln!(out, "mse: {}", f(s.mse));
        let _ = writeln!(out, "xcorr: {}", f(s.xcorr));
        let _ = writeln!(out, "rqcc: {}", f(s.rqcc));
        let _ = writeln!(out, "alien_present: {}", self.alien_present);
        match (self.estimated_distance, self.onset_time) {
            (Some(d), Some(t)) => {
                let _ = writeln!(out, "distance_m: {}", f(d));
                let _ = writeln!(out, "onset_s: {}", f(t));
            }
            _ => {
                let _ = writeln!(out, "distance_m: none");
            }
        }
        let _ = writeln!(out, "window_origin: {}", self.window_origin);
        let _ = writeln!(out, "contaminated: {}", self.contaminated);
        out
    }

    /// A row matching [`REPORT_CSV_HEADER`]; the distance is empty when the
    /// change was not localised.
    pub fn csv_row(&self) -> String {
        let s = &self.scores;
        format!(
            "{},{},{},{},{},{},{},{}",
            self.timestamp,
            f(s.coherence_k),
            f(s.mse),
            f(s.xcorr),
            f(s.rqcc),
            flag(self.alien_present),
            self.estimated_distance.map(f).unwrap_or_default(),
            flag(self.contaminated)
        )
    }

    /// A row matching [`STREAM_CSV_HEADER`].
    pub fn stream_csv_row(&self, batch_index: usize) -> String {
        format!(
            "{},{},{},{}",
            batch_index,
            f(self.scores.coherence_k),
            f(self.threshold),
            flag(self.alien_present)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::MethodScores;

    fn report() -> DetectionReport {
        DetectionReport {
            timestamp: 59,
            scores: MethodScores {
                mse: 1e-6,
                xcorr: 0.99,
                rqcc: f64::NAN,
                coherence_k: 0.25,
            },
            threshold: 0.01,
            alien_present: true,
            estimated_distance: Some(9.9),
            onset_time: Some(9.9e-8),
            window_origin: 100,
            contaminated: false,
        }
    }

    #[test]
    fn csv_row_matches_header() {
        let r = report();
        assert_eq!(r.csv_row(), "59,0.25,1e-6,0.99,NaN,1,9.9,0");
        assert_eq!(r.csv_row().split(',').count(), REPORT_CSV_HEADER.split(',').count());
        assert_eq!(r.stream_csv_row(1), "1,0.25,0.01,1");
        let quiet = DetectionReport {
            alien_present: false,
            estimated_distance: None,
            onset_time: None,
            ..r
        };
        assert!(quiet.csv_row().ends_with(",0,,0"));
    }

    #[test]
    fn text_report_lines() {
        let text = report().to_text();
        assert!(text.contains("alien_present: true\n"));
        assert!(text.contains("distance_m: 9.9\n"));
        assert!(text.lines().all(|l| l.contains(": ")));
    }
}
