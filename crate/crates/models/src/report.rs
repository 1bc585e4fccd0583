//! CSV reports: loss curves and small result tables.

use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// One epoch of a loss curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub data_loss: f64,
    pub phys_loss: f64,
    pub val_loss: f64,
}

impl EpochRow {
    pub const HEADER: [&'static str; 4] = ["epoch", "data_loss", "phys_loss", "val_loss"];

    pub fn fields(&self) -> Vec<String> {
        vec![
            self.epoch.to_string(),
            self.data_loss.to_string(),
            self.phys_loss.to_string(),
            self.val_loss.to_string(),
        ]
    }
}

/// Writes a header and rows, creating parent directories.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Root-mean-square difference of two equally long slices.
pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "rmse of unequal lengths");
    if a.is_empty() {
        return 0.0;
    }
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_of_identical_columns_is_zero() {
        assert_eq!(rmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]) - 12.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b.csv");
        let row = EpochRow {
            epoch: 1,
            data_loss: 0.5,
            phys_loss: 0.25,
            val_loss: 0.125,
        };
        write_csv(&path, &EpochRow::HEADER, [row.fields()]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "epoch,data_loss,phys_loss,val_loss\n1,0.5,0.25,0.125\n");
    }
}
