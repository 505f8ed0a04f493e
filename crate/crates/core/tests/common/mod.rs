//! Fixtures and brute-force oracles shared by the integration tests.
//!
//! Nothing here calls into the code paths it is used to check: the oracles
//! work on plain nested vectors and parent tables.
#![allow(dead_code)]

use std::collections::HashSet;
use std::path::PathBuf;

use ontonmf::ingest::{self, Catalog};
use ontonmf::synthetic::{self, SyntheticConfig};
use ontonmf::taxonomy::{build_taxonomy, HierarchyField, Taxonomy};
use ontonmf::{Entry, RatingMatrix};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i:03}")).collect()
}

pub fn from_dense(rows: &[Vec<Option<f64>>]) -> RatingMatrix {
    let entries = rows
        .iter()
        .enumerate()
        .flat_map(|(r, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(c, v)| v.map(|v| Entry::observed(r, c, v)))
        })
        .collect();
    RatingMatrix::from_entries(ids("u", rows.len()), ids("b", rows[0].len()), entries).unwrap()
}

/// The 4x4 neighborhood-CF fixture (— = unrated):
///
/// ```text
///        b0  b1  b2  b3    mean
///  u0     4   6   —   —     5
///  u1     3   7   8  10     7
///  u2     5   6   4   —     5
///  u3     8   2   —   5     5
/// ```
///
/// Centered co-ratings with u0 over {b0, b1}: u0 (−1, 1), u1 (−4, 0),
/// u2 (0, 1), u3 (3, −3). So sim(u0,u1) = 4/(√2·4) = 1/√2,
/// sim(u0,u2) = 1/(√2·1) = 1/√2 and sim(u0,u3) = −6/(√2·√18) = −1.
///
/// * (u0, b2): raters u1 (offset 8−7 = +1) and u2 (offset 4−5 = −1) carry
///   equal weight, so they cancel: 5.
/// * (u0, b3): only positive rater is u1 (offset 10−7 = +3): 5 + 3 = 8.
/// * (u2, b3): u2's only positive neighbor is u0 (u2·u1 = −1 over
///   {b0,b1,b2}, u2·u3 = −3 over {b0,b1}), who never rated b3: fallback 5.
pub fn eq2_rows() -> Vec<Vec<Option<f64>>> {
    vec![
        vec![Some(4.0), Some(6.0), None, None],
        vec![Some(3.0), Some(7.0), Some(8.0), Some(10.0)],
        vec![Some(5.0), Some(6.0), Some(4.0), None],
        vec![Some(8.0), Some(2.0), None, Some(5.0)],
    ]
}

pub fn eq2_fixture() -> RatingMatrix {
    from_dense(&eq2_rows())
}

/// Straight re-implementation of the mean-offset predictor on a dense
/// table: Pearson over co-rated cells centered on full-row means, top `k`
/// positive neighbors, mean fallback, clipped to [1, 10].
pub fn brute_force_cf(rows: &[Vec<Option<f64>>], u: usize, b: usize, k: usize) -> f64 {
    let mean = |r: &Vec<Option<f64>>| {
        let v: Vec<f64> = r.iter().flatten().copied().collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let means: Vec<f64> = rows.iter().map(mean).collect();
    let sim = |a: usize, c: usize| {
        let pairs: Vec<(f64, f64)> = (0..rows[a].len())
            .filter_map(|j| match (rows[a][j], rows[c][j]) {
                (Some(x), Some(y)) => Some((x - means[a], y - means[c])),
                _ => None,
            })
            .collect();
        let dot: f64 = pairs.iter().map(|(x, y)| x * y).sum();
        let nx: f64 = pairs.iter().map(|(x, _)| x * x).sum();
        let ny: f64 = pairs.iter().map(|(_, y)| y * y).sum();
        if pairs.len() < 2 || nx == 0.0 || ny == 0.0 {
            0.0
        } else {
            dot / (nx * ny).sqrt()
        }
    };
    let mut nb: Vec<(usize, f64)> = (0..rows.len())
        .filter(|&v| v != u)
        .map(|v| (v, sim(u, v)))
        .filter(|&(_, s)| s > 0.0)
        .collect();
    nb.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
    nb.truncate(k);
    let (mut num, mut den) = (0.0, 0.0);
    for (v, s) in nb {
        if let Some(r) = rows[v][b] {
            num += s * (r - means[v]);
            den += s;
        }
    }
    let p = if den < 1e-12 { means[u] } else { means[u] + num / den };
    p.clamp(1.0, 10.0)
}

/// Random rooted tree on `n` nodes with shuffled ids; entry `i` is the
/// parent of node `i`.
pub fn random_parents(rng: &mut ChaCha8Rng, n: usize) -> Vec<Option<usize>> {
    let mut label: Vec<usize> = (0..n).collect();
    label.shuffle(rng);
    let mut parents = vec![None; n];
    for i in 1..n {
        // Attach in creation order so the result is always a tree.
        let p = rng.gen_range(0..i);
        parents[label[i]] = Some(label[p]);
    }
    parents
}

/// Ancestor-or-self set of `v`.
pub fn ancestors(parents: &[Option<usize>], v: usize) -> HashSet<usize> {
    let mut out = HashSet::from([v]);
    let mut cur = v;
    while let Some(p) = parents[cur] {
        out.insert(p);
        cur = p;
    }
    out
}

/// Deepest node in the intersection of the two ancestor sets, with depth
/// taken as the size of a node's own ancestor set.
pub fn brute_lca(parents: &[Option<usize>], a: usize, b: usize) -> usize {
    let common: Vec<usize> = ancestors(parents, a)
        .intersection(&ancestors(parents, b))
        .copied()
        .collect();
    *common
        .iter()
        .max_by_key(|&&c| ancestors(parents, c).len())
        .expect("the root is always shared")
}

/// Dense rank-`k` product `W* H*` with factor entries uniform in
/// `[1/√k, √(10/k)]`, so every value lies in [1, 10].
pub fn planted(m: usize, n: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = ((1.0 / k as f64).sqrt(), (10.0 / k as f64).sqrt());
    let w: Vec<Vec<f64>> = (0..m).map(|_| (0..k).map(|_| rng.gen_range(lo..hi)).collect()).collect();
    let h: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rng.gen_range(lo..hi)).collect()).collect();
    (0..m)
        .map(|i| (0..n).map(|j| (0..k).map(|l| w[i][l] * h[l][j]).sum()).collect())
        .collect()
}

/// Directory of a real BookCrossing dump, if `BX_DATA_DIR` points at one.
pub fn bx_dir() -> Option<PathBuf> {
    let dir = PathBuf::from(std::env::var_os("BX_DATA_DIR")?);
    dir.join("BX-Book-Ratings.csv").exists().then_some(dir)
}

pub struct Desk {
    pub matrix: RatingMatrix,
    pub taxonomy: Taxonomy,
    pub catalog: Catalog,
    pub source: &'static str,
}

/// The top-`users` x top-`items` desk-scale dataset: the real dump when
/// `BX_DATA_DIR` is set, otherwise the synthetic generator written out in
/// the dump's own file format and read back through the ingest path.
pub fn desk_dataset(users: usize, items: usize) -> Desk {
    let tmp;
    let (dir, source) = match bx_dir() {
        Some(dir) => (dir, "BookCrossing"),
        None => {
            tmp = tempfile::tempdir().unwrap();
            synthetic::write_bookcrossing(&synthetic::generate(&SyntheticConfig::default()), tmp.path()).unwrap();
            (tmp.path().to_path_buf(), "synthetic")
        }
    };
    let paths = synthetic::DumpPaths::in_dir(&dir);
    let (raw, _) = ingest::parse_bookcrossing(&paths.users, &paths.books, &paths.ratings).unwrap();
    let pre = ingest::preprocess(&raw).unwrap();
    let matrix = ingest::subsample(
        &pre.matrix,
        users.min(pre.matrix.n_users()),
        items.min(pre.matrix.n_items()),
    )
    .unwrap();
    let books = pre.catalog.aligned(&matrix).unwrap();
    let taxonomy = build_taxonomy(&books, &HierarchyField::DEFAULT).unwrap();
    Desk {
        matrix,
        taxonomy,
        catalog: pre.catalog,
        source,
    }
}
