//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the engine's numerics; each oracle is written the
//! slow, obvious way so that agreement means something.

#![allow(dead_code, clippy::needless_range_loop)]

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use sdc_core::{Column, Dataset};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("data")
        .join(name)
}

/// p% rule read literally: order by magnitude, add the smallest `N - 3`,
/// compare with p times the largest.
pub fn p_ratio_oracle(values: &[f64], p: f64) -> bool {
    let mut pool: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    // bubble sort, ascending
    for i in 0..pool.len() {
        for j in 0..pool.len() - 1 - i {
            if pool[j] > pool[j + 1] {
                pool.swap(j, j + 1);
            }
        }
    }
    let n = pool.len();
    let largest = if n == 0 { 0.0 } else { pool[n - 1] };
    let mut smallest = 0.0;
    let mut i = 0;
    while i + 3 < n {
        smallest += pool[i];
        i += 1;
    }
    smallest >= p * largest
}

/// NK rule read literally: the largest `N` contribute less than `K` of the total.
pub fn nk_oracle(values: &[f64], n: usize, k: f64) -> bool {
    let mut pool: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let mut total = 0.0;
    for v in &pool {
        total += v;
    }
    if total == 0.0 {
        return true;
    }
    let mut top = 0.0;
    for _ in 0..n {
        if pool.is_empty() {
            break;
        }
        let mut at = 0;
        for (i, v) in pool.iter().enumerate() {
            if *v > pool[at] {
                at = i;
            }
        }
        top += pool.remove(at);
    }
    top < k * total
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for c in row + 1..n {
            s -= a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    x
}

/// OLS via the normal equations `X'X b = X'y`.
pub fn ols_oracle(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = x[0].len();
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for (row, yi) in x.iter().zip(y) {
        for a in 0..k {
            xty[a] += row[a] * yi;
            for b in 0..k {
                xtx[a][b] += row[a] * row[b];
            }
        }
    }
    solve(xtx, xty)
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Rows of `[1, x1, .., x_{k-1}]` with uniform predictors.
pub fn random_design(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            std::iter::once(1.0)
                .chain((1..k).map(|_| rng.gen_range(-2.0..2.0)))
                .collect()
        })
        .collect()
}

/// Binary responses drawn from a logistic model with coefficients `beta`.
pub fn logistic_draws(rng: &mut ChaCha8Rng, x: &[Vec<f64>], beta: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|row| {
            let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            f64::from(u8::from(rng.gen::<f64>() < sigmoid(eta)))
        })
        .collect()
}

/// Random categorical-by-categorical dataset with a numeric `v` column,
/// some missing entries and occasional dominant contributors.
pub fn random_grouped_dataset(rng: &mut ChaCha8Rng, rows: usize) -> Dataset {
    let rl = rng.gen_range(1..5);
    let cl = rng.gen_range(1..4);
    let mut r = Vec::with_capacity(rows);
    let mut c = Vec::with_capacity(rows);
    let mut v = Vec::with_capacity(rows);
    for _ in 0..rows {
        r.push(if rng.gen_bool(0.03) {
            None
        } else {
            Some(format!("r{}", rng.gen_range(0..rl)))
        });
        c.push(Some(format!("c{}", rng.gen_range(0..cl))));
        v.push(if rng.gen_bool(0.03) {
            None
        } else if rng.gen_bool(0.05) {
            Some(f64::from(rng.gen_range(1000..5000)))
        } else {
            Some(f64::from(rng.gen_range(-50..100)))
        });
    }
    Dataset::from_columns(vec![
        Column::categorical("r", r),
        Column::categorical("c", c),
        Column::numeric("v", v),
    ])
    .expect("columns have equal length")
}
