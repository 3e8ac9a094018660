use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Top-1 accuracy and `confusion[true][predicted]` counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub classes: Vec<String>,
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
}

impl ClassReport {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    /// Confusion matrix as CSV with a header row of predicted class names.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(self.classes.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in self.classes.iter().zip(&self.confusion) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|c| c.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn evaluate_predictions(predictions: &[usize], labels: &[usize], classes: &[String]) -> Result<ClassReport> {
    if labels.is_empty() {
        return Err(Error::contract("cannot evaluate on an empty test set"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::shape(format!("{} predictions for {} labels", predictions.len(), labels.len())));
    }
    let k = classes.len();
    let mut confusion = vec![vec![0; k]; k];
    for (&p, &l) in predictions.iter().zip(labels) {
        if p >= k || l >= k {
            return Err(Error::contract(format!("class index {} out of range for {k} classes", p.max(l))));
        }
        confusion[l][p] += 1;
    }
    let correct = (0..k).map(|i| confusion[i][i]).sum::<usize>();
    Ok(ClassReport { classes: classes.to_vec(), accuracy: correct as f64 / labels.len() as f64, confusion })
}
