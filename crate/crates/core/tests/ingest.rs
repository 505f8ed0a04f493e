mod common;

use std::fs;
use std::path::Path;

use ontonmf::ingest::{parse_bookcrossing, preprocess, subsample, BookRecord, RatingRecord, RawRecordSet};
use ontonmf::Error;
use proptest::prelude::*;

const USERS: &str = "\"User-ID\";\"Location\";\"Age\"\n\"1\";\"nyc, new york, usa\";\"NULL\"\n\"2\";\"stockton, california, usa\";\"18\"\n";
const BOOKS: &str = "\"ISBN\";\"Book-Title\";\"Book-Author\";\"Year-Of-Publication\";\"Publisher\";\"Image-URL-S\";\"Image-URL-M\";\"Image-URL-L\"\n\
\"0195153448\";\"Classical Mythology\";\"Mark P. O. Morford\";\"2002\";\"Oxford University Press\";\"http://s\";\"http://m\";\"http://l\"\n\
\"0002005018\";\"Clara Callan; a \"\"novel\"\"\";\"Richard Bruce Wright\";\"2001\";\"HarperFlamingo Canada\";\"http://s\";\"http://m\";\"http://l\"\n";

fn write(dir: &Path, name: &str, body: &[u8]) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn malformed_row_is_skipped_and_counted() {
    let dir = tempfile::tempdir().unwrap();
    let users = write(dir.path(), "u.csv", USERS.as_bytes());
    let books = write(dir.path(), "b.csv", BOOKS.as_bytes());
    // Second data row is missing its rating field.
    let ratings = write(
        dir.path(),
        "r.csv",
        b"\"User-ID\";\"ISBN\";\"Book-Rating\"\n\"1\";\"0195153448\";\"7\"\n\"2\";\"0002005018\"\n\"2\";\"0195153448\";\"0\"\n",
    );
    let (raw, report) = parse_bookcrossing(&users, &books, &ratings).unwrap();
    assert_eq!(raw.ratings.len(), 2);
    assert_eq!(report.ratings.kept, 2);
    assert_eq!(report.ratings.skipped, 1);
    assert_eq!(raw.users.len(), 2);
    assert_eq!(raw.users[0].age, None);
    assert_eq!(raw.users[1].age, Some(18));
    // Doubled quotes and embedded delimiters survive; URL columns are gone.
    assert_eq!(raw.books[1].title, "Clara Callan; a \"novel\"");
    assert_eq!(raw.books[1].publisher, "HarperFlamingo Canada");
    let text = format!("{report}");
    assert!(text.contains("parse.ratings.skipped = 1"));
}

#[test]
fn latin1_is_decoded() {
    let dir = tempfile::tempdir().unwrap();
    let users = write(dir.path(), "u.csv", USERS.as_bytes());
    let mut books = b"\"ISBN\";\"Book-Title\";\"Book-Author\";\"Year-Of-Publication\";\"Publisher\"\n".to_vec();
    books.extend_from_slice(b"\"1\";\"Ensaio\";\"Jos\xe9 Saramago\";\"1995\";\"Caminho\"\n");
    let books = write(dir.path(), "b.csv", &books);
    let ratings = write(dir.path(), "r.csv", b"\"User-ID\";\"ISBN\";\"Book-Rating\"\n\"1\";\"1\";\"9\"\n");
    let (raw, _) = parse_bookcrossing(&users, &books, &ratings).unwrap();
    assert_eq!(raw.books[0].author, "José Saramago");
}

#[test]
fn out_of_range_ratings_are_rejected_with_a_count() {
    let dir = tempfile::tempdir().unwrap();
    let users = write(dir.path(), "u.csv", USERS.as_bytes());
    let books = write(dir.path(), "b.csv", BOOKS.as_bytes());
    let ratings = write(
        dir.path(),
        "r.csv",
        b"\"User-ID\";\"ISBN\";\"Book-Rating\"\n\"1\";\"0195153448\";\"11\"\n\"1\";\"0002005018\";\"5\"\n\"2\";\"0002005018\";\"6\"\n",
    );
    let (raw, report) = parse_bookcrossing(&users, &books, &ratings).unwrap();
    assert_eq!(raw.ratings.len(), 2);
    assert_eq!(report.ratings.out_of_range, 1);
}

#[test]
fn header_only_file_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let users = write(dir.path(), "u.csv", USERS.as_bytes());
    let books = write(dir.path(), "b.csv", BOOKS.as_bytes());
    let ratings = write(dir.path(), "r.csv", b"\"User-ID\";\"ISBN\";\"Book-Rating\"\n");
    let err = parse_bookcrossing(&users, &books, &ratings).unwrap_err();
    assert!(matches!(err, Error::EmptyInput { ref path } if path == &ratings));
    let empty = write(dir.path(), "empty.csv", b"");
    assert!(matches!(parse_bookcrossing(&users, &books, &empty), Err(Error::EmptyInput { .. })));
}

#[test]
fn missing_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let users = write(dir.path(), "u.csv", USERS.as_bytes());
    let books = write(dir.path(), "b.csv", BOOKS.as_bytes());
    let missing = dir.path().join("nope.csv");
    let err = parse_bookcrossing(&users, &books, &missing).unwrap_err();
    assert!(err.to_string().contains("nope.csv"));
}

#[test]
fn mostly_malformed_file_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let users = write(dir.path(), "u.csv", USERS.as_bytes());
    let books = write(dir.path(), "b.csv", BOOKS.as_bytes());
    // A comma-delimited file parses as one field per row.
    let ratings = write(dir.path(), "r.csv", b"User-ID,ISBN,Book-Rating\n1,0195153448,7\n2,0002005018,5\n");
    assert!(matches!(
        parse_bookcrossing(&users, &books, &ratings),
        Err(Error::TooManyMalformed { malformed: 2, total: 2, .. })
    ));
}

#[test]
fn parse_and_preprocess_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let raw = ontonmf::synthetic::generate(&ontonmf::synthetic::SyntheticConfig {
        n_users: 120,
        ..Default::default()
    });
    let paths = ontonmf::synthetic::write_bookcrossing(&raw, dir.path()).unwrap();
    let run = || {
        let (raw, _) = parse_bookcrossing(&paths.users, &paths.books, &paths.ratings).unwrap();
        preprocess(&raw).unwrap().matrix
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    let bits = |m: &ontonmf::RatingMatrix| m.entries().map(|e| e.value.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    // Written and re-read through the file format, nothing is lost.
    let (reread, _) = parse_bookcrossing(&paths.users, &paths.books, &paths.ratings).unwrap();
    assert_eq!(reread, raw);
}

/// Full-dump record counts; runs only when `BX_DATA_DIR` holds the dump.
#[test]
fn full_dump_counts() {
    let Some(dir) = common::bx_dir() else {
        eprintln!("BX_DATA_DIR not set; skipping full-dump count check");
        return;
    };
    let paths = ontonmf::synthetic::DumpPaths::in_dir(&dir);
    let (raw, report) = parse_bookcrossing(&paths.users, &paths.books, &paths.ratings).unwrap();
    eprintln!("{report}");
    assert_eq!(raw.users.len(), 278_858);
    assert_eq!(raw.ratings.len(), 1_149_780);
    assert_eq!(raw.books.len(), 271_379);
}

fn arb_raw() -> impl Strategy<Value = RawRecordSet> {
    let ratings = prop::collection::vec((0..6usize, 0..8usize, 0u8..=10), 1..40);
    (ratings, prop::collection::vec(any::<bool>(), 8)).prop_map(|(ratings, known)| {
        let books = (0..8)
            .filter(|&b| known[b])
            .map(|b| BookRecord {
                isbn: format!("isbn{b}"),
                title: format!("t{b}"),
                author: format!("a{}", b % 3),
                year: 2000,
                publisher: format!("p{}", b % 2),
            })
            .collect();
        let ratings = ratings
            .into_iter()
            .map(|(u, b, r)| RatingRecord {
                user_id: format!("user{u}"),
                isbn: format!("isbn{b}"),
                rating: r,
            })
            .collect();
        RawRecordSet {
            users: vec![],
            books,
            ratings,
        }
    })
}

proptest! {
    #[test]
    fn preprocess_invariants(raw in arb_raw()) {
        let Ok(p) = preprocess(&raw) else {
            // Only an all-filtered input may fail.
            prop_assert!(raw.ratings.iter().all(|r| r.rating == 0 || !raw.books.iter().any(|b| b.isbn == r.isbn)));
            return Ok(());
        };
        let m = &p.matrix;
        for e in m.entries() {
            prop_assert!((1.0..=10.0).contains(&e.value));
        }
        for r in 0..m.n_users() {
            prop_assert!(m.row_len(r) > 0);
            prop_assert_eq!(m.user_index(m.user_id(r).unwrap()), Some(r));
        }
        for c in 0..m.n_items() {
            prop_assert_eq!(m.item_index(m.item_id(c).unwrap()), Some(c));
        }
        let mut sorted = m.users().to_vec();
        sorted.sort();
        prop_assert_eq!(&sorted[..], m.users());

        // Lift back to raw form; preprocessing it again changes nothing.
        let lifted = RawRecordSet {
            users: vec![],
            books: p.catalog.aligned(m).unwrap(),
            ratings: m.entries().map(|e| RatingRecord {
                user_id: m.user_id(e.row).unwrap().to_string(),
                isbn: m.item_id(e.col).unwrap().to_string(),
                rating: e.value as u8,
            }).collect(),
        };
        let again = preprocess(&lifted).unwrap();
        prop_assert_eq!(&again.matrix, m);

        // Subsampling to the full size is the identity.
        prop_assert_eq!(&subsample(m, m.n_users(), m.n_items()).unwrap(), m);
    }
}
