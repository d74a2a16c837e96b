//! CASIA-B cross-view protocol: gallery NM#1-4, probes per condition,
//! rank-1 per (probe view, gallery view) with identical views excluded from
//! the per-probe-view averages.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::distance::euclidean;
use super::RetrievalError;
use crate::data_io::{Condition, CASIA_VIEWS};

#[derive(Debug, Clone, PartialEq)]
pub struct CasiaEntry {
    pub identity: String,
    pub view: u32,
    pub condition: Condition,
    pub sequence: u32,
    pub feature: Vec<f64>,
}

/// Probe subsets of the standard protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeSet {
    /// NM#5-6
    NM,
    /// BG#1-2
    BG,
    /// CL#1-2
    CL,
}

impl ProbeSet {
    pub fn contains(self, cond: Condition, seq: u32) -> bool {
        match self {
            ProbeSet::NM => cond == Condition::NM && (5..=6).contains(&seq),
            ProbeSet::BG => cond == Condition::BG && (1..=2).contains(&seq),
            ProbeSet::CL => cond == Condition::CL && (1..=2).contains(&seq),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ProbeSet::NM => "NM#5-6",
            ProbeSet::BG => "BG#1-2",
            ProbeSet::CL => "CL#1-2",
        }
    }
}

impl std::str::FromStr for ProbeSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nm" => Ok(ProbeSet::NM),
            "bg" => Ok(ProbeSet::BG),
            "cl" => Ok(ProbeSet::CL),
            _ => Err(format!("unknown probe set {s:?}")),
        }
    }
}

pub fn is_gallery(cond: Condition, seq: u32) -> bool {
    cond == Condition::NM && (1..=4).contains(&seq)
}

/// Frontal/oblique/lateral grouping of an 11-view accuracy list
/// (index order 0°, 18°, …, 180°).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewGroups {
    pub frontal: f64,
    pub oblique: f64,
    pub lateral: f64,
    pub mean: f64,
}

pub fn group_views(per_view: &[f64; 11]) -> ViewGroups {
    let mean_of = |idx: &[usize]| idx.iter().map(|&i| per_view[i]).sum::<f64>() / idx.len() as f64;
    ViewGroups {
        frontal: mean_of(&[0, 10]),
        oblique: mean_of(&[1, 2, 3, 4, 6, 7, 8, 9]),
        lateral: per_view[5],
        mean: mean_of(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10]),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasiaReport {
    pub probe: ProbeSet,
    /// Rank-1 accuracy in percent, [probe view][gallery view]; the diagonal
    /// is computed but never averaged.
    pub matrix: Vec<Vec<f64>>,
    pub per_probe_view: Vec<f64>,
    pub groups: ViewGroups,
}

impl CasiaReport {
    pub fn table_row(&self) -> String {
        format!(
            "{:<8} {:>8.1} {:>8.1} {:>8.1} {:>8.1}",
            self.probe.label(),
            self.groups.frontal,
            self.groups.oblique,
            self.groups.lateral,
            self.groups.mean
        )
    }

    pub fn table_header() -> String {
        format!("{:<8} {:>8} {:>8} {:>8} {:>8}", "Probe", "Frontal", "Oblique", "Lateral", "Mean")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{}", Self::table_header()).unwrap();
        writeln!(s, "{}", self.table_row()).unwrap();
        writeln!(s).unwrap();
        write!(s, "probe\\gallery").unwrap();
        for v in CASIA_VIEWS {
            write!(s, " {v:>6}").unwrap();
        }
        writeln!(s).unwrap();
        for (pv, row) in CASIA_VIEWS.iter().zip(&self.matrix) {
            write!(s, "{pv:>13}").unwrap();
            for v in row {
                write!(s, " {v:>6.1}").unwrap();
            }
            writeln!(s).unwrap();
        }
        s
    }
}

pub fn casia_b_eval(entries: &[CasiaEntry], probe: ProbeSet) -> Result<CasiaReport, RetrievalError> {
    if let Some(e) = entries.iter().find(|e| !CASIA_VIEWS.contains(&e.view)) {
        return Err(RetrievalError::InvalidView(e.view));
    }
    let mut matrix = vec![vec![0.0; 11]; 11];
    for (pi, &pv) in CASIA_VIEWS.iter().enumerate() {
        let probes: Vec<&CasiaEntry> = entries
            .iter()
            .filter(|e| e.view == pv && probe.contains(e.condition, e.sequence))
            .collect();
        for (gi, &gv) in CASIA_VIEWS.iter().enumerate() {
            let gallery: Vec<&CasiaEntry> = entries
                .iter()
                .filter(|e| e.view == gv && is_gallery(e.condition, e.sequence))
                .collect();
            if probes.is_empty() || gallery.is_empty() {
                return Err(RetrievalError::MissingView {
                    probe_view: pv,
                    gallery_view: gv,
                });
            }
            let mut correct = 0usize;
            for p in &probes {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (j, g) in gallery.iter().enumerate() {
                    let d = euclidean(&p.feature, &g.feature);
                    if d < best_d {
                        best_d = d;
                        best = j;
                    }
                }
                if gallery[best].identity == p.identity {
                    correct += 1;
                }
            }
            matrix[pi][gi] = 100.0 * correct as f64 / probes.len() as f64;
        }
    }
    let mut per_view = [0.0; 11];
    for (pi, row) in matrix.iter().enumerate() {
        per_view[pi] = row.iter().enumerate().filter(|(gi, _)| *gi != pi).map(|(_, v)| v).sum::<f64>() / 10.0;
    }
    Ok(CasiaReport {
        probe,
        matrix,
        per_probe_view: per_view.to_vec(),
        groups: group_views(&per_view),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frontal_is_mean_of_0_and_180() {
        let per: [f64; 11] = std::array::from_fn(|i| i as f64 * 10.0);
        let g = group_views(&per);
        assert_eq!(g.frontal, 50.0);
        assert_eq!(g.lateral, 50.0);
        assert_eq!(g.oblique, (10.0 + 20.0 + 30.0 + 40.0 + 60.0 + 70.0 + 80.0 + 90.0) / 8.0);
        assert_eq!(g.mean, 50.0);
    }

    fn perfect(ids: usize) -> Vec<CasiaEntry> {
        let mut out = Vec::new();
        for id in 0..ids {
            let mut f = vec![0.0; ids];
            f[id] = 1.0;
            for view in CASIA_VIEWS {
                for (cond, seq) in crate::data_io::casia_sequences() {
                    out.push(CasiaEntry {
                        identity: id.to_string(),
                        view,
                        condition: cond,
                        sequence: seq,
                        feature: f.clone(),
                    });
                }
            }
        }
        out
    }

    #[test]
    fn perfect_features_score_100() {
        for probe in [ProbeSet::NM, ProbeSet::BG, ProbeSet::CL] {
            let r = casia_b_eval(&perfect(3), probe).unwrap();
            assert!(r.matrix.iter().flatten().all(|&v| v == 100.0));
            assert_eq!(r.groups.mean, 100.0);
        }
    }

    #[test]
    fn missing_view_reported() {
        let e: Vec<_> = perfect(2).into_iter().filter(|e| e.view != 90).collect();
        assert!(matches!(
            casia_b_eval(&e, ProbeSet::NM),
            Err(RetrievalError::MissingView { probe_view: 0, gallery_view: 90 })
        ));
    }
}
