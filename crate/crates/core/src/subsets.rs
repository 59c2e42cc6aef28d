//! Subset counting, lexicographic combination stepping and the shared
//! enumeration budget.

use crate::error::{Error, Result};

/// Default cap on the number of subsets (or subset pairs) an exhaustive
/// routine may evaluate.
pub const DEFAULT_ENUMERATION_CAP: u64 = 20_000_000;

/// `n choose k`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

pub(crate) fn check_budget(n: usize, k: usize, count: u128, cap: u64) -> Result<()> {
    if count > cap as u128 {
        return Err(Error::Budget { n, k, count, cap });
    }
    Ok(())
}

/// Advances `comb` (strictly increasing, values `< n`) to the next
/// combination in lexicographic order. Returns `false` after the last one.
pub fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if comb[i] < n - k + i {
            comb[i] += 1;
            for j in (i + 1)..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Every size-`k` subset of `0..n`, in lexicographic order.
pub fn combinations(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut state: Option<Vec<usize>> = if k <= n { Some((0..k).collect()) } else { None };
    std::iter::from_fn(move || {
        let cur = state.take()?;
        let mut next = cur.clone();
        if next_combination(&mut next, n) {
            state = Some(next);
        }
        Some(cur)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(29, 8), 4_292_145);
        assert_eq!(binomial(29, 16), 67_863_915);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(7, 0), 1);
    }

    #[test]
    fn combinations_in_order() {
        let all: Vec<Vec<usize>> = combinations(4, 2).collect();
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(combinations(3, 0).count(), 1);
        assert_eq!(combinations(2, 3).count(), 0);
        assert_eq!(combinations(10, 4).count() as u128, binomial(10, 4));
    }

    #[test]
    fn budget() {
        assert!(check_budget(10, 3, 120, 120).is_ok());
        assert!(matches!(check_budget(10, 3, 121, 120), Err(Error::Budget { count: 121, .. })));
    }
}
