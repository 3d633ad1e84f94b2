use blocksig_core::DataMatrix;

use crate::error::{CliError, Result};

/// Successive differences of a time-ordered panel: row `t` of the output is
/// row `t + 1` minus row `t`. Grid metadata is kept.
pub fn difference_series(panel: &DataMatrix) -> Result<DataMatrix> {
    let (n, p) = (panel.n(), panel.p());
    if n < 2 {
        return Err(CliError::Config(format!("differencing needs at least 2 rows, got {n}")));
    }
    let mut values = Vec::with_capacity((n - 1) * p);
    for t in 0..n - 1 {
        let (a, b) = (panel.row(t), panel.row(t + 1));
        values.extend(b.iter().zip(a).map(|(y, x)| y - x));
    }
    let out = DataMatrix::new(n - 1, p, values)?;
    Ok(match panel.grid() {
        Some(g) => out.with_grid(g)?,
        None => out,
    })
}
