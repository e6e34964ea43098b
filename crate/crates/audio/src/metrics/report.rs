use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;
use crate::metrics::{cepstral_distance, fw_seg_snr, llr_detail, srmr_lite};

pub const REPORT_CSV_HEADER: &str = "id,system,fwsegsnr_db,cd,llr,srmr,llr_skipped";

/// Metrics of one degraded or enhanced utterance against its reference.
#[derive(Clone, Debug, PartialEq)]
pub struct UtteranceMetrics {
    pub id: String,
    /// Label of the signal being scored, e.g. `reverberant` or `enhanced`.
    pub system: String,
    pub fwsegsnr_db: f64,
    pub cd: f64,
    pub llr: f64,
    pub srmr: f64,
    pub llr_skipped: usize,
}

pub fn evaluate_pair(id: &str, system: &str, reference: &[f64], degraded: &[f64]) -> Result<UtteranceMetrics> {
    let l = llr_detail(reference, degraded)?;
    Ok(UtteranceMetrics {
        id: id.to_string(),
        system: system.to_string(),
        fwsegsnr_db: fw_seg_snr(reference, degraded)?,
        cd: cepstral_distance(reference, degraded)?,
        llr: l.value,
        srmr: srmr_lite(degraded)?,
        llr_skipped: l.skipped,
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<UtteranceMetrics>,
}

impl MetricsReport {
    /// Systems in order of first appearance.
    pub fn systems(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.system) {
                out.push(r.system.clone());
            }
        }
        out
    }

    /// Per-metric means over one system's rows, with the summed skip count.
    pub fn aggregate(&self, system: &str) -> Option<UtteranceMetrics> {
        let rows: Vec<_> = self.rows.iter().filter(|r| r.system == system).collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        let mean = |f: fn(&UtteranceMetrics) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
        Some(UtteranceMetrics {
            id: "mean".into(),
            system: system.to_string(),
            fwsegsnr_db: mean(|r| r.fwsegsnr_db),
            cd: mean(|r| r.cd),
            llr: mean(|r| r.llr),
            srmr: mean(|r| r.srmr),
            llr_skipped: rows.iter().map(|r| r.llr_skipped).sum(),
        })
    }

    /// One row per utterance and system, then one `mean` row per system.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{REPORT_CSV_HEADER}")?;
        let aggregates = self.systems().into_iter().filter_map(|s| self.aggregate(&s));
        for r in self.rows.iter().cloned().chain(aggregates) {
            writeln!(
                w,
                "{},{},{:.6},{:.6},{:.6},{:.6},{}",
                r.id, r.system, r.fwsegsnr_db, r.cd, r.llr, r.srmr, r.llr_skipped
            )?;
        }
        Ok(())
    }

    /// Fixed-width summary of the per-system means.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<14} {:>6} {:>12} {:>8} {:>8} {:>8}", "system", "items", "fwSegSNR dB", "CD", "LLR", "SRMR");
        for sys in self.systems() {
            let a = self.aggregate(&sys).expect("system has rows");
            let n = self.rows.iter().filter(|r| r.system == sys).count();
            let _ = writeln!(
                s,
                "{:<14} {:>6} {:>12.3} {:>8.3} {:>8.3} {:>8.3}",
                sys, n, a.fwsegsnr_db, a.cd, a.llr, a.srmr
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, system: &str, v: f64) -> UtteranceMetrics {
        UtteranceMetrics { id: id.into(), system: system.into(), fwsegsnr_db: v, cd: v, llr: v, srmr: v, llr_skipped: 1 }
    }

    #[test]
    fn aggregates_per_system() {
        let report = MetricsReport { rows: vec![row("a", "rev", 1.0), row("b", "rev", 3.0), row("a", "enh", 5.0)] };
        assert_eq!(report.systems(), vec!["rev", "enh"]);
        let a = report.aggregate("rev").unwrap();
        assert_eq!((a.cd, a.llr_skipped), (2.0, 2));
        assert!(report.aggregate("none").is_none());
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 + 2);
        assert!(text.lines().last().unwrap().starts_with("mean,enh,5.000000"));
        assert!(report.table().contains("rev"));
    }
}
