//! Clustering agreement.

use std::collections::HashMap;

use crate::dataio::DataError;

fn choose2(x: u64) -> i128 {
    i128::from(x) * i128::from(x.saturating_sub(1)) / 2
}

/// Adjusted Rand Index from the contingency table of two labelings.
///
/// Returns 1.0 when both labelings put every point in one cluster, or every
/// point in its own cluster (the chance-corrected index is 0/0 there and
/// the partitions agree).
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64, DataError> {
    if a.len() != b.len() {
        return Err(DataError::Domain(format!(
            "label vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as u64;
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: i128 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: i128 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: i128 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(n);
    // (index - E) / (max - E) with E = sum_a sum_b / total, scaled by
    // 2 total to stay in integers
    let num = 2 * (index * total - sum_a * sum_b);
    let den = (sum_a + sum_b) * total - 2 * sum_a * sum_b;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}
