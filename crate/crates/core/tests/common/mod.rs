use std::collections::BTreeSet;

/// Every `Z_k`-linear combination of `rows`, by additive closure.
pub fn brute_span(rows: &[Vec<u64>], cols: usize, k: u64) -> BTreeSet<Vec<u64>> {
    let mut span = BTreeSet::from([vec![0u64; cols]]);
    let mut frontier = vec![vec![0u64; cols]];
    while let Some(v) = frontier.pop() {
        for r in rows {
            let w: Vec<u64> = v.iter().zip(r).map(|(a, b)| (a + b) % k).collect();
            if span.insert(w.clone()) {
                frontier.push(w);
            }
        }
    }
    span
}

/// All of `Z_k^cols`.
pub fn all_vectors(cols: usize, k: u64) -> Vec<Vec<u64>> {
    (0..k.pow(cols as u32))
        .map(|mut i| {
            (0..cols)
                .map(|_| {
                    let e = i % k;
                    i /= k;
                    e
                })
                .collect()
        })
        .collect()
}

pub fn signed(rows: &[Vec<u64>]) -> Vec<Vec<i64>> {
    rows.iter()
        .map(|r| r.iter().map(|&e| e as i64).collect())
        .collect()
}
