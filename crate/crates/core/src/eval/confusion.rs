use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ClassStats;
use crate::dataset::RawImage;
use crate::error::{Error, Result};

/// `counts[i][j]` = samples of true class `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    /// Row-normalised view, present when requested at construction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized: Option<Vec<Vec<f64>>>,
}

pub fn confusion(pred: &[usize], truth: &[usize], n_classes: usize, normalize: bool) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::Eval(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&p, &y) in pred.iter().zip(truth) {
        if p >= n_classes || y >= n_classes {
            return Err(Error::Eval(format!(
                "class index {} outside 0..{n_classes}",
                p.max(y)
            )));
        }
        counts[y][p] += 1;
    }
    let mut m = ConfusionMatrix {
        counts,
        normalized: None,
    };
    if normalize {
        m.normalized = Some(m.row_normalized());
    }
    Ok(m)
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    /// Classes without any true sample; their normalised rows are zeros.
    pub fn zero_support(&self) -> Vec<usize> {
        (0..self.n_classes()).filter(|&c| self.support(c) == 0).collect()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let diag: u64 = (0..self.n_classes()).map(|i| self.counts[i][i]).sum();
        diag as f64 / total as f64
    }

    /// Each row divided by its sum.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let s: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if s == 0 { 0.0 } else { c as f64 / s as f64 })
                    .collect()
            })
            .collect()
    }

    pub fn class_stats(&self) -> Vec<ClassStats> {
        (0..self.n_classes())
            .map(|c| {
                let tp = self.counts[c][c] as f64;
                let predicted: u64 = self.counts.iter().map(|row| row[c]).sum();
                let support = self.support(c);
                ClassStats {
                    precision: if predicted == 0 { 0.0 } else { tp / predicted as f64 },
                    recall: if support == 0 { 0.0 } else { tp / support as f64 },
                    support,
                }
            })
            .collect()
    }

    /// Element-wise sum, for pooling matrices across seeds.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.n_classes() != self.n_classes() {
            return Err(Error::Eval("confusion matrices differ in size".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        if self.normalized.is_some() {
            self.normalized = Some(self.row_normalized());
        }
        Ok(())
    }

    /// CSV with a header row of predicted labels and one row per true
    /// label, holding row-normalised values when `normalized` is set.
    pub fn to_csv(&self, labels: &[String], normalized: bool) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Eval(e.to_string());
        let mut header = vec!["true\\pred".to_string()];
        header.extend(labels.iter().cloned());
        header.push("zero_support".into());
        w.write_record(&header).map_err(csv_err)?;
        let norm = self.row_normalized();
        for (i, label) in labels.iter().enumerate() {
            let mut rec = vec![label.clone()];
            if normalized {
                rec.extend(norm[i].iter().map(|v| format!("{v:.6}")));
            } else {
                rec.extend(self.counts[i].iter().map(u64::to_string));
            }
            rec.push((self.support(i) == 0).to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Eval(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Heatmap of the normalised matrix, white for 0 and dark blue for 1.
    pub fn heatmap(&self, cell: u32) -> RawImage {
        let n = self.n_classes() as u32;
        let mut img = RawImage::filled(n * cell, n * cell, [255, 255, 255]);
        let norm = self.row_normalized();
        for (i, row) in norm.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let shade = |full: f64| (255.0 - v * (255.0 - full)).round() as u8;
                let rgb = [shade(8.0), shade(48.0), shade(107.0)];
                let border = cell > 4;
                for y in 0..cell {
                    for x in 0..cell {
                        let edge = border && (x == 0 || y == 0);
                        let px = if edge { [200, 200, 200] } else { rgb };
                        let idx = (((i as u32 * cell + y) * n * cell + j as u32 * cell + x) * 3) as usize;
                        img.data[idx..idx + 3].copy_from_slice(&px);
                    }
                }
            }
        }
        img
    }

    pub fn save_heatmap(&self, path: &Path) -> Result<()> {
        self.heatmap(32).save_png(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_normalise_to_identity() {
        let y: Vec<usize> = (0..20).map(|i| i % 4).collect();
        let m = confusion(&y, &y, 4, true).unwrap();
        let n = m.normalized.clone().unwrap();
        assert_eq!(n, m.row_normalized());
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(n[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn constant_predictions_fill_first_column() {
        let y: Vec<usize> = (0..12).map(|i| i % 4).collect();
        let m = confusion(&[0; 12], &y, 4, true).unwrap();
        assert!(m.row_normalized().iter().all(|r| r[0] == 1.0));
        let stats = m.class_stats();
        assert_eq!(stats[0].precision, 0.25);
        assert_eq!(stats[1].recall, 0.0);
    }

    #[test]
    fn zero_support_rows_are_flagged_zeros() {
        let m = confusion(&[0, 1, 1], &[0, 1, 1], 4, true).unwrap();
        assert_eq!(m.zero_support(), vec![2, 3]);
        assert_eq!(m.row_normalized()[3], vec![0.0; 4]);
        let labels: Vec<String> = ["a", "b", "c", "d"].map(String::from).to_vec();
        let csv = m.to_csv(&labels, true).unwrap();
        assert!(csv.lines().nth(4).unwrap().ends_with("true"));
    }

    #[test]
    fn out_of_range_class_is_an_error() {
        assert!(confusion(&[4], &[0], 4, false).is_err());
        assert!(confusion(&[0, 1], &[0], 4, false).is_err());
    }

    #[test]
    fn heatmap_size() {
        let m = confusion(&[0, 1], &[0, 1], 4, true).unwrap();
        let img = m.heatmap(8);
        assert_eq!((img.width, img.height), (32, 32));
    }
}
