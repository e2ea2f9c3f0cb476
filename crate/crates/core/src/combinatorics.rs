//! Binomial coefficients and subset enumeration.

/// Exact binomial coefficient; zero when `k > n`.
pub fn binom_u(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Binomial coefficient as a float.
pub fn binom(n: usize, k: usize) -> f64 {
    binom_u(n, k) as f64
}

/// Binomial coefficient with signed arguments, zero outside `0 ≤ k ≤ n`.
pub fn binom_i(n: i64, k: i64) -> f64 {
    if n < 0 || k < 0 || k > n {
        0.0
    } else {
        binom(n as usize, k as usize)
    }
}

/// All `r`-element index combinations of `0..n` in lexicographic order.
pub fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if r > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.clone());
        let mut i = r;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - r {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Decode the `rank`-th `r`-subset of `0..n` in lexicographic order.
pub fn unrank_combination(n: usize, r: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(r);
    let mut next = 0;
    for slot in 0..r {
        let mut v = next;
        loop {
            let rest = binom_u(n - v - 1, r - slot - 1);
            if rank < rest {
                break;
            }
            rank -= rest;
            v += 1;
        }
        out.push(v);
        next = v + 1;
    }
    out
}
