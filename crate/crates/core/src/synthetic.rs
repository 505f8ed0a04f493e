//! Synthetic BookCrossing-shaped data.
//!
//! Books sit in a publisher → author → book hierarchy. Each level draws a
//! latent taste vector and a quality bias, and a book's vector is the
//! weighted sum of its publisher's, its author's and its own, so books close
//! in the taxonomy are rated alike. A user has a latent taste vector and a
//! leniency bias, and rates
//!
//! ```text
//! round(center + user_bias + book_bias + taste_scale·⟨p_u, q_b⟩ + noise)
//! ```
//!
//! clipped to 1..=10. Users favor a few publishers and popular books, with
//! heavy-tailed activity. A share of interactions is written as implicit
//! (zero) ratings, some ratings reference books missing from the books
//! table, and some users never rate anything, so the preprocessing rules all
//! have work to do.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, WeightedIndex};

use crate::error::Result;
use crate::ingest::{BookRecord, RatingRecord, RawRecordSet, UserRecord};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_publishers: usize,
    pub authors_per_publisher: usize,
    pub books_per_author: usize,
    pub latent_dims: usize,
    /// Median number of interactions per active user.
    pub median_activity: f64,
    /// Share of users with no interactions at all.
    pub inactive_share: f64,
    /// Share of interactions written as implicit (zero) ratings.
    pub implicit_share: f64,
    /// Share of interactions pointing at ISBNs absent from the books table.
    pub unknown_isbn_share: f64,
    /// Share of a user's picks drawn from their favorite publishers.
    pub loyalty: f64,
    pub favorite_publishers: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_users: 1500,
            n_publishers: 40,
            authors_per_publisher: 8,
            books_per_author: 6,
            latent_dims: 4,
            median_activity: 40.0,
            inactive_share: 0.1,
            implicit_share: 0.5,
            unknown_isbn_share: 0.02,
            loyalty: 0.6,
            favorite_publishers: 2,
            noise_sd: 1.0,
            seed: 7,
        }
    }
}

const CENTER: f64 = 6.0;
const TASTE_SCALE: f64 = 0.9;

fn latent(rng: &mut ChaCha8Rng, dims: usize, sd: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, sd).expect("valid sd");
    (0..dims).map(|_| normal.sample(rng)).collect()
}

/// Generate the three tables.
pub fn generate(cfg: &SyntheticConfig) -> RawRecordSet {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dims = cfg.latent_dims;

    let mut books = Vec::new();
    let mut book_taste: Vec<Vec<f64>> = Vec::new();
    let mut book_bias = Vec::new();
    let mut book_publisher = Vec::new();
    for p in 0..cfg.n_publishers {
        let (pub_taste, pub_bias) = (latent(&mut rng, dims, 1.0), Normal::new(0.0, 0.6).unwrap().sample(&mut rng));
        for a in 0..cfg.authors_per_publisher {
            let (auth_taste, auth_bias) = (latent(&mut rng, dims, 1.0), Normal::new(0.0, 0.5).unwrap().sample(&mut rng));
            for b in 0..cfg.books_per_author {
                let own = latent(&mut rng, dims, 1.0);
                let taste = (0..dims)
                    .map(|d| 0.7 * pub_taste[d] + 0.5 * auth_taste[d] + 0.25 * own[d])
                    .collect();
                book_taste.push(taste);
                book_bias.push(pub_bias + auth_bias + Normal::new(0.0, 0.2).unwrap().sample(&mut rng));
                book_publisher.push(p);
                let idx = books.len();
                books.push(BookRecord {
                    isbn: format!("{:010}", 3_000_000_000u64 + idx as u64 * 7),
                    title: format!("Book {idx}: volume {b}"),
                    // One accented author name exercises the Latin-1 path.
                    author: if p == 0 && a == 0 {
                        "José Saramago".to_string()
                    } else {
                        format!("Author {p}-{a}")
                    },
                    year: 1950 + (idx % 55) as i32,
                    publisher: format!("Publisher {p}"),
                });
            }
        }
    }
    let n_books = books.len();

    // Zipf-like popularity over a shuffled book order.
    let mut rank: Vec<usize> = (0..n_books).collect();
    rank.shuffle(&mut rng);
    let mut popularity = vec![0.0; n_books];
    for (r, &b) in rank.iter().enumerate() {
        popularity[b] = 1.0 / (r as f64 + 10.0).powf(0.8);
    }
    let global_pick = WeightedIndex::new(&popularity).expect("positive weights");
    let mut pub_weight = vec![0.0; cfg.n_publishers];
    for b in 0..n_books {
        pub_weight[book_publisher[b]] += popularity[b];
    }
    let pub_pick = WeightedIndex::new(&pub_weight).expect("positive weights");
    let per_publisher = cfg.authors_per_publisher * cfg.books_per_author;

    let activity = LogNormal::new(cfg.median_activity.ln(), 0.8).expect("valid lognormal");
    let noise = Normal::new(0.0, cfg.noise_sd).expect("valid sd");
    let user_bias = Normal::new(0.0, 0.8).unwrap();

    let mut users = Vec::with_capacity(cfg.n_users);
    let mut ratings = Vec::new();
    for u in 0..cfg.n_users {
        let user_id = (u + 1).to_string();
        users.push(UserRecord {
            user_id: user_id.clone(),
            location: format!("city {}, region {}, country", u % 97, u % 13),
            age: (u % 3 != 0).then_some(18 + (u % 60) as u32),
        });
        if rng.gen::<f64>() < cfg.inactive_share {
            continue;
        }
        let taste = latent(&mut rng, dims, 1.0);
        let bias = user_bias.sample(&mut rng);
        let favorites: Vec<usize> = (0..cfg.favorite_publishers).map(|_| pub_pick.sample(&mut rng)).collect();
        let wanted = (activity.sample(&mut rng).round() as usize).clamp(3, n_books / 2);

        let mut chosen = vec![false; n_books];
        let mut picks = Vec::with_capacity(wanted);
        let mut attempts = 0;
        while picks.len() < wanted && attempts < wanted * 50 {
            attempts += 1;
            let book = if rng.gen::<f64>() < cfg.loyalty {
                let p = *favorites.choose(&mut rng).expect("at least one favorite");
                p * per_publisher + rng.gen_range(0..per_publisher)
            } else {
                global_pick.sample(&mut rng)
            };
            if !chosen[book] {
                chosen[book] = true;
                picks.push(book);
            }
        }

        for book in picks {
            let isbn = if rng.gen::<f64>() < cfg.unknown_isbn_share {
                format!("X{:09}", rng.gen_range(0..1_000_000_000u64))
            } else {
                books[book].isbn.clone()
            };
            let rating = if rng.gen::<f64>() < cfg.implicit_share {
                0
            } else {
                let affinity: f64 = taste.iter().zip(&book_taste[book]).map(|(a, b)| a * b).sum();
                let score = CENTER + bias + book_bias[book] + TASTE_SCALE * affinity + noise.sample(&mut rng);
                score.round().clamp(1.0, 10.0) as u8
            };
            ratings.push(RatingRecord {
                user_id: user_id.clone(),
                isbn,
                rating,
            });
        }
    }

    RawRecordSet { users, books, ratings }
}

/// Paths of the three tables written by [`write_bookcrossing`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DumpPaths {
    pub users: PathBuf,
    pub books: PathBuf,
    pub ratings: PathBuf,
}

impl DumpPaths {
    pub fn in_dir(dir: &Path) -> Self {
        DumpPaths {
            users: dir.join("BX-Users.csv"),
            books: dir.join("BX-Books.csv"),
            ratings: dir.join("BX-Book-Ratings.csv"),
        }
    }
}

fn quote(field: &str) -> Vec<u8> {
    let mut out = vec![b'"'];
    for ch in field.chars() {
        if ch == '"' {
            out.extend_from_slice(b"\"\"");
        } else {
            // Latin-1: code points above U+00FF are not representable.
            out.push(u32::from(ch).try_into().unwrap_or(b'?'));
        }
    }
    out.push(b'"');
    out
}

fn write_table(path: &Path, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for row in rows {
        let fields: Vec<Vec<u8>> = row.iter().map(|f| quote(f)).collect();
        out.write_all(&fields.join(&b';'))?;
        out.write_all(b"\r\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Write `raw` in the BookCrossing dump layout (Latin-1, `;`-delimited,
/// quoted, with header rows and image-URL columns) under `dir`.
pub fn write_bookcrossing(raw: &RawRecordSet, dir: &Path) -> Result<DumpPaths> {
    std::fs::create_dir_all(dir)?;
    let paths = DumpPaths::in_dir(dir);
    let header = |h: &[&str]| h.iter().map(|s| s.to_string()).collect::<Vec<_>>();

    write_table(
        &paths.users,
        std::iter::once(header(&["User-ID", "Location", "Age"])).chain(raw.users.iter().map(|u| {
            vec![
                u.user_id.clone(),
                u.location.clone(),
                u.age.map_or_else(|| "NULL".to_string(), |a| a.to_string()),
            ]
        })),
    )?;
    write_table(
        &paths.books,
        std::iter::once(header(&[
            "ISBN",
            "Book-Title",
            "Book-Author",
            "Year-Of-Publication",
            "Publisher",
            "Image-URL-S",
            "Image-URL-M",
            "Image-URL-L",
        ]))
        .chain(raw.books.iter().map(|b| {
            let url = |size: &str| format!("http://images.example.com/images/P/{}.01.{size}.jpg", b.isbn);
            vec![
                b.isbn.clone(),
                b.title.clone(),
                b.author.clone(),
                b.year.to_string(),
                b.publisher.clone(),
                url("THUMBZZZ"),
                url("MZZZZZZZ"),
                url("LZZZZZZZ"),
            ]
        })),
    )?;
    write_table(
        &paths.ratings,
        std::iter::once(header(&["User-ID", "ISBN", "Book-Rating"])).chain(
            raw.ratings
                .iter()
                .map(|r| vec![r.user_id.clone(), r.isbn.clone(), r.rating.to_string()]),
        ),
    )?;
    Ok(paths)
}
