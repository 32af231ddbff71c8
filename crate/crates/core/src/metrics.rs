use std::collections::HashMap;

use crate::partition::Partition;

fn choose2(x: u64) -> f64 {
    (x * x.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index between two partitions of the same nodes.
/// Returns 1 when both are trivially identical (e.g. one zone each).
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> f64 {
    assert_eq!(a.len(), b.len(), "partitions cover different node counts");
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows = vec![0u64; a.zone_count()];
    let mut cols = vec![0u64; b.zone_count()];
    for i in 0..a.len() {
        *table.entry((a.zone_of(i), b.zone_of(i))).or_insert(0) += 1;
        rows[a.zone_of(i)] += 1;
        cols[b.zone_of(i)] += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.iter().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.iter().map(|&c| choose2(c)).sum();
    let total = choose2(a.len() as u64);
    let expected = if total > 0.0 { sum_a * sum_b / total } else { 0.0 };
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
