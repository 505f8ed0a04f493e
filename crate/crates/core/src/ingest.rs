//! BookCrossing ingestion.
//!
//! The three dump tables (`BX-Users`, `BX-Books`, `BX-Book-Ratings`) are
//! semicolon-delimited, Latin-1 encoded, double-quote enclosed with doubled
//! quotes as escapes, and start with a header row. Rows whose field count
//! differs from the header, or whose typed fields fail to parse, are skipped
//! and counted; a file where more than half the rows are skipped is rejected
//! outright since that almost always means the wrong file or encoding.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::{Entry, RatingMatrix};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserRecord {
    pub user_id: String,
    pub location: String,
    pub age: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BookRecord {
    pub isbn: String,
    pub title: String,
    pub author: String,
    pub year: i32,
    pub publisher: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatingRecord {
    pub user_id: String,
    pub isbn: String,
    /// Raw score, 0 (implicit) through 10.
    pub rating: u8,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawRecordSet {
    pub users: Vec<UserRecord>,
    pub books: Vec<BookRecord>,
    pub ratings: Vec<RatingRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileReport {
    pub path: PathBuf,
    pub kept: usize,
    /// Rows dropped for any reason, including `out_of_range`.
    pub skipped: usize,
    /// Rating rows with an integer score outside 0..=10.
    pub out_of_range: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseReport {
    pub users: FileReport,
    pub books: FileReport,
    pub ratings: FileReport,
}

impl fmt::Display for ParseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, r) in [("users", &self.users), ("books", &self.books), ("ratings", &self.ratings)] {
            writeln!(f, "parse.{name}.file = {}", r.path.display())?;
            writeln!(f, "parse.{name}.kept = {}", r.kept)?;
            writeln!(f, "parse.{name}.skipped = {}", r.skipped)?;
        }
        writeln!(f, "parse.ratings.out_of_range = {}", self.ratings.out_of_range)
    }
}

enum Row<T> {
    Valid(T),
    Malformed,
    OutOfRange,
}

fn latin1(bytes: &[u8]) -> String {
    bytes.iter().map(|&b| b as char).collect()
}

fn read_table<T, F>(path: &Path, min_fields: usize, parse: F) -> Result<(Vec<T>, FileReport)>
where
    F: Fn(&[String]) -> Row<T>,
{
    let file = File::open(path).map_err(|source| Error::MissingFile {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b';')
        .quote(b'"')
        .double_quote(true)
        .flexible(true)
        .has_headers(true)
        .from_reader(BufReader::new(file));
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };

    let header_len = reader.byte_headers().map_err(csv_err)?.len();
    let mut report = FileReport {
        path: path.to_path_buf(),
        kept: 0,
        skipped: 0,
        out_of_range: 0,
    };
    let mut rows = Vec::new();
    let mut record = csv::ByteRecord::new();
    let mut fields = Vec::with_capacity(header_len);
    while reader.read_byte_record(&mut record).map_err(csv_err)? {
        if header_len < min_fields || record.len() != header_len {
            report.skipped += 1;
            continue;
        }
        fields.clear();
        fields.extend(record.iter().map(latin1));
        match parse(&fields) {
            Row::Valid(row) => {
                rows.push(row);
                report.kept += 1;
            }
            Row::Malformed => report.skipped += 1,
            Row::OutOfRange => {
                report.skipped += 1;
                report.out_of_range += 1;
            }
        }
    }

    let total = report.kept + report.skipped;
    if total == 0 {
        return Err(Error::EmptyInput {
            path: path.to_path_buf(),
        });
    }
    if 2 * report.skipped > total {
        return Err(Error::TooManyMalformed {
            path: path.to_path_buf(),
            malformed: report.skipped,
            total,
        });
    }
    Ok((rows, report))
}

fn parse_user(f: &[String]) -> Row<UserRecord> {
    let user_id = f[0].trim();
    if user_id.is_empty() {
        return Row::Malformed;
    }
    Row::Valid(UserRecord {
        user_id: user_id.to_string(),
        location: f[1].clone(),
        // "NULL" and blanks are the dump's missing-age markers.
        age: f[2].trim().parse().ok(),
    })
}

fn parse_book(f: &[String]) -> Row<BookRecord> {
    let isbn = f[0].trim();
    let Ok(year) = f[3].trim().parse() else {
        return Row::Malformed;
    };
    if isbn.is_empty() {
        return Row::Malformed;
    }
    // Columns past the publisher are the cover image URLs, which are dropped.
    Row::Valid(BookRecord {
        isbn: isbn.to_string(),
        title: f[1].clone(),
        author: f[2].clone(),
        year,
        publisher: f[4].clone(),
    })
}

fn parse_rating(f: &[String]) -> Row<RatingRecord> {
    let (user_id, isbn) = (f[0].trim(), f[1].trim());
    if user_id.is_empty() || isbn.is_empty() {
        return Row::Malformed;
    }
    match f[2].trim().parse::<i64>() {
        Ok(r @ 0..=10) => Row::Valid(RatingRecord {
            user_id: user_id.to_string(),
            isbn: isbn.to_string(),
            rating: r as u8,
        }),
        Ok(_) => Row::OutOfRange,
        Err(_) => Row::Malformed,
    }
}

/// Parse the three BookCrossing tables. The files are read concurrently.
pub fn parse_bookcrossing(
    users_path: impl AsRef<Path>,
    books_path: impl AsRef<Path>,
    ratings_path: impl AsRef<Path>,
) -> Result<(RawRecordSet, ParseReport)> {
    let (users_path, books_path, ratings_path) = (users_path.as_ref(), books_path.as_ref(), ratings_path.as_ref());
    let (users, (books, ratings)) = rayon::join(
        || read_table(users_path, 3, parse_user),
        || {
            rayon::join(
                || read_table(books_path, 5, parse_book),
                || read_table(ratings_path, 3, parse_rating),
            )
        },
    );
    let ((users, users_report), (books, books_report), (ratings, ratings_report)) = (users?, books?, ratings?);
    Ok((
        RawRecordSet { users, books, ratings },
        ParseReport {
            users: users_report,
            books: books_report,
            ratings: ratings_report,
        },
    ))
}

/// Book metadata keyed by ISBN.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Catalog {
    by_isbn: HashMap<String, BookRecord>,
}

impl Catalog {
    /// First record wins when an ISBN repeats.
    pub fn from_books<I: IntoIterator<Item = BookRecord>>(books: I) -> Self {
        let mut by_isbn = HashMap::new();
        for b in books {
            by_isbn.entry(b.isbn.clone()).or_insert(b);
        }
        Catalog { by_isbn }
    }

    pub fn get(&self, isbn: &str) -> Option<&BookRecord> {
        self.by_isbn.get(isbn)
    }

    pub fn len(&self) -> usize {
        self.by_isbn.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_isbn.is_empty()
    }

    /// Metadata for each column of `matrix`, in column order.
    pub fn aligned(&self, matrix: &RatingMatrix) -> Result<Vec<BookRecord>> {
        matrix
            .items()
            .iter()
            .enumerate()
            .map(|(col, isbn)| self.get(isbn).cloned().ok_or(Error::UnmappedItem(col)))
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PreprocessReport {
    pub input_ratings: usize,
    pub implicit_removed: usize,
    pub unknown_isbn_removed: usize,
    pub duplicates_removed: usize,
    /// Users seen in either table that end up with no explicit rating.
    pub users_removed: usize,
    pub users: usize,
    pub items: usize,
    pub entries: usize,
}

impl fmt::Display for PreprocessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "preprocess.input_ratings = {}", self.input_ratings)?;
        writeln!(f, "preprocess.implicit_removed = {}", self.implicit_removed)?;
        writeln!(f, "preprocess.unknown_isbn_removed = {}", self.unknown_isbn_removed)?;
        writeln!(f, "preprocess.duplicates_removed = {}", self.duplicates_removed)?;
        writeln!(f, "preprocess.users_removed = {}", self.users_removed)?;
        writeln!(f, "matrix.users = {}", self.users)?;
        writeln!(f, "matrix.items = {}", self.items)?;
        writeln!(f, "matrix.entries = {}", self.entries)
    }
}

#[derive(Clone, Debug)]
pub struct Preprocessed {
    pub matrix: RatingMatrix,
    /// Metadata for the matrix's items only.
    pub catalog: Catalog,
    pub report: PreprocessReport,
}

/// Drop implicit (zero) ratings, ratings of unknown books and users left
/// without any explicit rating, then index users and items in sorted order.
pub fn preprocess(raw: &RawRecordSet) -> Result<Preprocessed> {
    let catalog = Catalog::from_books(raw.books.iter().cloned());
    let mut report = PreprocessReport {
        input_ratings: raw.ratings.len(),
        ..Default::default()
    };

    let mut seen = HashSet::new();
    let mut kept = Vec::new();
    for r in &raw.ratings {
        if r.rating == 0 {
            report.implicit_removed += 1;
        } else if catalog.get(&r.isbn).is_none() {
            report.unknown_isbn_removed += 1;
        } else if !seen.insert((r.user_id.as_str(), r.isbn.as_str())) {
            report.duplicates_removed += 1;
        } else {
            kept.push(r);
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyDataset(
            "no explicit ratings of known books survive preprocessing".into(),
        ));
    }

    let users: Vec<String> = kept
        .iter()
        .map(|r| r.user_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let items: Vec<String> = kept
        .iter()
        .map(|r| r.isbn.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let user_idx: HashMap<&str, usize> = users.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
    let item_idx: HashMap<&str, usize> = items.iter().enumerate().map(|(i, b)| (b.as_str(), i)).collect();
    let entries = kept
        .iter()
        .map(|r| Entry::observed(user_idx[r.user_id.as_str()], item_idx[r.isbn.as_str()], f64::from(r.rating)))
        .collect();

    let all_users: HashSet<&str> = raw
        .users
        .iter()
        .map(|u| u.user_id.as_str())
        .chain(raw.ratings.iter().map(|r| r.user_id.as_str()))
        .collect();
    report.users_removed = all_users.len() - users.len();

    let catalog = Catalog::from_books(items.iter().map(|isbn| catalog.get(isbn).cloned().expect("filtered above")));
    let matrix = RatingMatrix::from_entries(users, items, entries)?;
    report.users = matrix.n_users();
    report.items = matrix.n_items();
    report.entries = matrix.nnz();
    Ok(Preprocessed { matrix, catalog, report })
}

/// Keep the `top_users` most active users and `top_items` most-rated items
/// (ties to the lower index), then drop rows and columns left empty and
/// re-index densely in the original relative order.
pub fn subsample(matrix: &RatingMatrix, top_users: usize, top_items: usize) -> Result<RatingMatrix> {
    if top_users > matrix.n_users() || top_items > matrix.n_items() {
        return Err(Error::Config(format!(
            "subsample {top_users}x{top_items} exceeds matrix {}x{}",
            matrix.n_users(),
            matrix.n_items()
        )));
    }
    let top = |counts: Vec<usize>, keep: usize| -> Vec<bool> {
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(counts[i]), i));
        let mut chosen = vec![false; counts.len()];
        for &i in &order[..keep] {
            chosen[i] = true;
        }
        chosen
    };
    let user_keep = top((0..matrix.n_users()).map(|r| matrix.row_len(r)).collect(), top_users);
    let item_keep = top(matrix.column_counts(), top_items);

    let retained: Vec<Entry> = matrix
        .entries()
        .filter(|e| user_keep[e.row] && item_keep[e.col])
        .collect();
    if retained.is_empty() {
        return Err(Error::EmptyDataset("subsample retains no ratings".into()));
    }

    let remap = |used: Vec<bool>| -> (Vec<usize>, Vec<usize>) {
        let mut new_index = vec![usize::MAX; used.len()];
        let mut old = Vec::new();
        for (i, _) in used.iter().enumerate().filter(|(_, u)| **u) {
            new_index[i] = old.len();
            old.push(i);
        }
        (new_index, old)
    };
    let mut row_used = vec![false; matrix.n_users()];
    let mut col_used = vec![false; matrix.n_items()];
    for e in &retained {
        row_used[e.row] = true;
        col_used[e.col] = true;
    }
    let (row_map, old_rows) = remap(row_used);
    let (col_map, old_cols) = remap(col_used);

    let users = old_rows.iter().map(|&r| matrix.users()[r].clone()).collect();
    let items = old_cols.iter().map(|&c| matrix.items()[c].clone()).collect();
    let entries = retained
        .into_iter()
        .map(|e| Entry {
            row: row_map[e.row],
            col: col_map[e.col],
            ..e
        })
        .collect();
    RatingMatrix::from_entries(users, items, entries)
}
