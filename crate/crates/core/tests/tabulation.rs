#![allow(clippy::needless_range_loop)]

mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sdc_core::tabulation::AxisLabel;
use sdc_core::{
    apply_checks, build_spec, crosstab, default_config, pivot_table, Column, Dataset, RawTable,
    Rule, Status,
};

use common::random_grouped_dataset;

type Row = (Option<u8>, u8, Option<i32>);

fn dataset(rows: &[Row]) -> Dataset {
    Dataset::from_columns(vec![
        Column::categorical(
            "r",
            rows.iter().map(|t| t.0.map(|r| format!("r{r}"))).collect(),
        ),
        Column::categorical(
            "c",
            rows.iter().map(|t| Some(format!("c{}", t.1))).collect(),
        ),
        Column::numeric("v", rows.iter().map(|t| t.2.map(f64::from)).collect()),
    ])
    .unwrap()
}

fn table(ds: &Dataset, aggfunc: &str, margins: bool) -> RawTable {
    let spec = build_spec(&["r"], &["c"], Some("v"), aggfunc, margins).unwrap();
    crosstab(ds, &spec).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn oracle_stat(values: &[f64], aggfunc: &str) -> Option<f64> {
    let n = values.len() as f64;
    let sum: f64 = values.iter().sum();
    let mean = sum / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    match aggfunc {
        "count" => Some(n),
        _ if values.is_empty() => None,
        "sum" => Some(sum),
        "mean" => Some(mean),
        "median" => {
            let s = sorted(values.to_vec());
            let m = s.len() / 2;
            Some(if s.len() % 2 == 1 {
                s[m]
            } else {
                (s[m - 1] + s[m]) / 2.0
            })
        }
        _ if values.len() < 2 => None,
        "var" => Some(var),
        "std" => Some(var.sqrt()),
        _ => unreachable!(),
    }
}

#[test]
fn matches_group_by_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let ds = random_grouped_dataset(&mut rng, 200);
        let r = ds.column("r").unwrap();
        let c = ds.column("c").unwrap();
        let v = ds.column("v").unwrap();
        let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
        for i in 0..ds.row_count() {
            if r.is_missing(i) || v.is_missing(i) {
                continue;
            }
            groups
                .entry((r.field(i), c.field(i)))
                .or_default()
                .push(v.as_f64(i).unwrap());
        }
        for aggfunc in ["count", "sum", "mean", "median", "var", "std"] {
            let t = table(&ds, aggfunc, false);
            for (i, rl) in t.row_labels.iter().enumerate() {
                for (j, cl) in t.col_labels.iter().enumerate() {
                    let values = groups
                        .get(&(rl.to_string(), cl.to_string()))
                        .cloned()
                        .unwrap_or_default();
                    let cell = t.cell(i, j);
                    assert_eq!(cell.count, values.len());
                    assert_eq!(sorted(cell.contributions.clone()), sorted(values.clone()));
                    match (cell.aggregate, oracle_stat(&values, aggfunc)) {
                        (Some(a), Some(b)) => assert!(close(a, b), "{aggfunc} {a} vs {b}"),
                        (None, None) => {}
                        other => panic!("{aggfunc} {rl}/{cl}: {other:?}"),
                    }
                }
            }
            let total: usize = groups.values().map(Vec::len).sum();
            assert_eq!(t.retained_rows(), total);
        }
    }
}

#[test]
fn pivot_without_columns_is_one_column() {
    let ds = dataset(&[
        (Some(0), 0, Some(1)),
        (Some(1), 1, Some(2)),
        (Some(1), 0, Some(4)),
    ]);
    let no_cols: [&str; 0] = [];
    let spec = build_spec(&["r"], &no_cols, Some("v"), "sum", false).unwrap();
    let t = pivot_table(&ds, &spec).unwrap();
    assert_eq!(t.n_cols(), 1);
    assert_eq!(t.cell(1, 0).aggregate, Some(6.0));
    assert!(crosstab(&ds, &spec).is_err());

    let spec = build_spec(&["r"], &["c"], Some("v"), "sum", true).unwrap();
    assert_eq!(
        crosstab(&ds, &spec).unwrap(),
        pivot_table(&ds, &spec).unwrap()
    );
}

fn rows_strategy() -> impl Strategy<Value = Vec<Row>> {
    prop::collection::vec(
        (
            prop::option::weighted(0.95, 0u8..4),
            0u8..3,
            prop::option::weighted(0.95, prop_oneof![-50i32..100, 1000i32..5000]),
        ),
        1..120,
    )
}

fn aggfunc_strategy() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["count", "sum", "mean", "median", "std", "var"])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn row_order_does_not_matter(rows in rows_strategy(), agg in aggfunc_strategy(), seed: u64) {
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let spec = build_spec(&["r"], &["c"], Some("v"), agg, true).unwrap();
        let (a, b) = match (crosstab(&dataset(&rows), &spec), crosstab(&dataset(&shuffled), &spec)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(_), Err(_)) => return Ok(()),
            other => panic!("{other:?}"),
        };
        prop_assert_eq!(&a.row_labels, &b.row_labels);
        prop_assert_eq!(&a.col_labels, &b.col_labels);
        for (ra, rb) in a.cells.iter().zip(&b.cells) {
            for (x, y) in ra.iter().zip(rb) {
                prop_assert_eq!(x.count, y.count);
                prop_assert_eq!(x.aggregate, y.aggregate);
                prop_assert_eq!(sorted(x.contributions.clone()), sorted(y.contributions.clone()));
            }
        }
    }

    #[test]
    fn margins_collect_their_cells(rows in rows_strategy()) {
        let ds = dataset(&rows);
        let spec = build_spec(&["r"], &["c"], Some("v"), "sum", true).unwrap();
        let Ok(t) = crosstab(&ds, &spec) else { return Ok(()) };
        let (last_r, last_c) = (t.n_rows() - 1, t.n_cols() - 1);
        prop_assert_eq!(&t.row_labels[last_r], &AxisLabel::Margin);
        prop_assert_eq!(&t.col_labels[last_c], &AxisLabel::Margin);
        for i in 0..last_r {
            let joined: Vec<f64> = (0..last_c).flat_map(|j| t.cell(i, j).contributions.clone()).collect();
            prop_assert_eq!(sorted(t.cell(i, last_c).contributions.clone()), sorted(joined));
        }
        for j in 0..last_c {
            let joined: Vec<f64> = (0..last_r).flat_map(|i| t.cell(i, j).contributions.clone()).collect();
            prop_assert_eq!(sorted(t.cell(last_r, j).contributions.clone()), sorted(joined));
        }
        prop_assert_eq!(t.cell(last_r, last_c).count, t.retained_rows());
    }

    #[test]
    fn mean_and_spread_are_consistent(rows in rows_strategy()) {
        let ds = dataset(&rows);
        let spec = build_spec(&["r"], &["c"], Some("v"), "mean", true).unwrap();
        let Ok(mean) = crosstab(&ds, &spec) else { return Ok(()) };
        let sum = table(&ds, "sum", true);
        let std = table(&ds, "std", true);
        let var = table(&ds, "var", true);
        for i in 0..mean.n_rows() {
            for j in 0..mean.n_cols() {
                let n = mean.cell(i, j).count;
                if n > 0 {
                    let m = mean.cell(i, j).aggregate.unwrap();
                    let s = sum.cell(i, j).aggregate.unwrap();
                    prop_assert!(close(m, s / n as f64), "{} vs {}", m, s / n as f64);
                }
                match (std.cell(i, j).aggregate, var.cell(i, j).aggregate) {
                    (Some(s), Some(v)) => prop_assert!(close(s, v.sqrt())),
                    (None, None) => prop_assert!(n < 2),
                    other => prop_assert!(false, "{:?}", other),
                }
            }
        }
    }

    #[test]
    fn suppression_ignores_scale_and_sign(rows in rows_strategy(), agg in aggfunc_strategy(), exp in -8i32..8, flip: bool) {
        let factor = 2f64.powi(exp) * if flip { -1.0 } else { 1.0 };
        let ds = dataset(&rows);
        let v = ds.column("v").unwrap();
        let ds2 = Dataset::from_columns(vec![
            ds.column("r").unwrap().clone(),
            ds.column("c").unwrap().clone(),
            Column::numeric("v", (0..ds.row_count()).map(|i| v.as_f64(i).map(|x| x * factor)).collect()),
        ]).unwrap();
        let spec = build_spec(&["r"], &["c"], Some("v"), agg, true).unwrap();
        let Ok(a) = crosstab(&ds, &spec) else { return Ok(()) };
        let b = crosstab(&ds2, &spec).unwrap();
        let cfg = default_config();
        prop_assert_eq!(
            apply_checks(&a, &cfg).suppression_pattern(),
            apply_checks(&b, &cfg).suppression_pattern()
        );
    }

    #[test]
    fn masks_union_to_suppression(rows in rows_strategy(), agg in aggfunc_strategy(), t in 0.0f64..15.0, p in 0.0f64..0.6, k in 0.4f64..1.0) {
        let ds = dataset(&rows);
        let spec = build_spec(&["r"], &["c"], Some("v"), agg, true).unwrap();
        let Ok(raw) = crosstab(&ds, &spec) else { return Ok(()) };
        let mut cfg = default_config();
        cfg.safe_threshold = t;
        cfg.safe_pratio_p = p;
        cfg.safe_nk_k = k;
        let ct = apply_checks(&raw, &cfg);
        let pattern = ct.suppression_pattern();
        let mut any = false;
        for i in 0..raw.n_rows() {
            for j in 0..raw.n_cols() {
                let union = Rule::ALL.iter().any(|r| ct.mask(*r)[i][j]);
                prop_assert_eq!(union, pattern[i][j]);
                prop_assert_eq!(union, !ct.outcome[i][j].passed());
                let withheld = ct.values[i][j].released().is_none();
                prop_assert_eq!(withheld, union || raw.cell(i, j).aggregate.is_none());
                if agg == "count" {
                    prop_assert!(!ct.mask(Rule::PRatio)[i][j] && !ct.mask(Rule::NkRule)[i][j]);
                }
                any |= union;
            }
        }
        for r in Rule::ALL {
            let n = ct.mask(r).iter().flatten().filter(|b| **b).count();
            prop_assert_eq!(ct.summary.counts.get(r), n);
        }
        prop_assert_eq!(ct.summary.status == Status::Fail, any);
    }
}
