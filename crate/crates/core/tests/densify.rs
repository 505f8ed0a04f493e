mod common;

use common::{from_dense, ids};
use ontonmf::densify::{density, estimate, impute, DensifyConfig};
use ontonmf::ingest::BookRecord;
use ontonmf::taxonomy::{build_taxonomy, HierarchyField, Taxonomy};
use ontonmf::{Entry, Provenance, RatingMatrix};
use proptest::prelude::*;

fn book(isbn: &str, author: &str, publisher: &str) -> BookRecord {
    BookRecord {
        isbn: isbn.into(),
        title: isbn.into(),
        author: author.into(),
        year: 2000,
        publisher: publisher.into(),
    }
}

fn cfg(tau: f64) -> DensifyConfig {
    DensifyConfig {
        tau,
        ..Default::default()
    }
}

#[test]
fn weighted_average_over_similar_items() {
    // Item 0 is the target; item 1 shares its author (sim 0.75), item 2
    // only the root (sim 0.25).
    let books = vec![book("b000", "Ann", "Pub"), book("b001", "Ann", "Pub"), book("b002", "Cy", "Other")];
    let t = build_taxonomy(&books, &HierarchyField::DEFAULT).unwrap();
    let m = from_dense(&[vec![None, Some(8.0), Some(4.0)]]);
    assert_eq!(estimate(&m, &t, &cfg(0.5), 0, 0).unwrap(), Some(8.0));
    let low = estimate(&m, &t, &cfg(0.2), 0, 0).unwrap().unwrap();
    assert!((low - (0.75 * 8.0 + 0.25 * 4.0) / 1.0).abs() < 1e-12);
    assert_eq!(estimate(&m, &t, &cfg(0.9), 0, 0).unwrap(), None);

    let strict = DensifyConfig {
        tau: 0.2,
        min_support: 3,
        ..Default::default()
    };
    assert_eq!(estimate(&m, &t, &strict, 0, 0).unwrap(), None);
    let nearest = DensifyConfig {
        tau: 0.2,
        max_neighbors: 1,
        ..Default::default()
    };
    assert_eq!(estimate(&m, &t, &nearest, 0, 0).unwrap(), Some(8.0));

    let filled = impute(&m, &t, &cfg(0.5)).unwrap();
    assert_eq!(filled.get(0, 0), Some(8.0));
    assert_eq!(filled.provenance_at(0, 0), Some(Provenance::Imputed));
    assert_eq!(filled.n_observed(), 2);
}

#[test]
fn rejects_bad_configs_and_mismatched_spaces() {
    let books = vec![book("b000", "A", "P"), book("b001", "A", "P")];
    let t = build_taxonomy(&books, &HierarchyField::DEFAULT).unwrap();
    let m = from_dense(&[vec![Some(5.0), None]]);
    assert!(impute(&m, &t, &cfg(-0.1)).is_err());
    assert!(impute(&m, &t, &cfg(1.5)).is_err());
    let zero = DensifyConfig {
        min_support: 0,
        ..Default::default()
    };
    assert!(impute(&m, &t, &zero).is_err());
    let wide = from_dense(&[vec![Some(5.0), None, None]]);
    assert!(impute(&wide, &t, &cfg(0.5)).is_err());
}

#[derive(Debug)]
struct Case {
    matrix: RatingMatrix,
    taxonomy: Taxonomy,
}

fn arb_case() -> impl Strategy<Value = Case> {
    (2usize..7, 2usize..14).prop_flat_map(|(m, n)| {
        let cells = prop::collection::vec(prop::option::weighted(0.35, 1u8..=10), m * n);
        let meta = prop::collection::vec((0u8..3, 0u8..4), n);
        (Just((m, n)), cells, meta).prop_map(|((m, n), cells, meta)| {
            let entries: Vec<Entry> = cells
                .iter()
                .enumerate()
                .filter_map(|(i, v)| v.map(|v| Entry::observed(i / n, i % n, f64::from(v))))
                .collect();
            let matrix = RatingMatrix::from_entries(ids("u", m), ids("b", n), entries).unwrap();
            let books: Vec<BookRecord> = (0..n)
                .map(|j| book(&format!("b{j:03}"), &format!("A{}", meta[j].1), &format!("P{}", meta[j].0)))
                .collect();
            let taxonomy = build_taxonomy(&books, &HierarchyField::DEFAULT).unwrap();
            Case { matrix, taxonomy }
        })
    })
}

proptest! {
    #[test]
    fn densify_properties(case in arb_case(), tau in 0.05f64..1.0) {
        let Case { matrix, taxonomy } = case;
        let filled = impute(&matrix, &taxonomy, &cfg(tau)).unwrap();

        // Observed cells are kept untouched and stay flagged observed.
        prop_assert!(density(&filled) >= density(&matrix));
        for e in matrix.entries() {
            prop_assert_eq!(filled.get(e.row, e.col), Some(e.value));
            prop_assert_eq!(filled.provenance_at(e.row, e.col), Some(Provenance::Observed));
        }
        prop_assert_eq!(filled.n_observed(), matrix.nnz());
        for e in filled.entries().filter(|e| e.provenance == Provenance::Imputed) {
            prop_assert!((1.0..=10.0).contains(&e.value));
            // Imputed values lie within the user's own rating range.
            let row = matrix.row_values(e.row);
            let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(e.value >= lo - 1e-12 && e.value <= hi + 1e-12);
            prop_assert_eq!(estimate(&matrix, &taxonomy, &cfg(tau), e.row, e.col).unwrap(), Some(e.value));
        }

        // A lower threshold never fills fewer cells.
        let looser = impute(&matrix, &taxonomy, &cfg(tau / 2.0)).unwrap();
        prop_assert!(looser.nnz() >= filled.nnz());

        prop_assert_eq!(&impute(&matrix, &taxonomy, &cfg(tau)).unwrap(), &filled);

        // The disabled configuration only admits identical concepts, which
        // distinct items never are.
        prop_assert_eq!(&impute(&matrix, &taxonomy, &DensifyConfig::disabled()).unwrap(), &matrix);
    }
}
