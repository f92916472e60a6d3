//! MovieLens rating files (`u.data` layout: `user item rating timestamp`,
//! tab separated) and their one-hot LIBSVM encoding.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, ParseError, Result};
use crate::io::LabeledInstance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: u32,
    pub item: u32,
    pub rating: f64,
}

/// User one-hot block followed by the item one-hot block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneHotLayout {
    pub users: u32,
    pub items: u32,
}

impl OneHotLayout {
    /// Smallest layout covering every id in `ratings`.
    pub fn covering(ratings: &[Rating]) -> Self {
        Self {
            users: ratings.iter().map(|r| r.user).max().unwrap_or(0),
            items: ratings.iter().map(|r| r.item).max().unwrap_or(0),
        }
    }

    pub fn dim(&self) -> u32 {
        self.users + self.items
    }

    pub fn encode(&self, rating: &Rating) -> Result<LabeledInstance> {
        if rating.user == 0 || rating.user > self.users || rating.item == 0 || rating.item > self.items {
            return Err(Error::Dimension(format!(
                "user {} / item {} outside layout {}x{}",
                rating.user, rating.item, self.users, self.items
            )));
        }
        Ok(LabeledInstance {
            label: rating.rating,
            features: vec![(rating.user, 1.0), (self.users + rating.item, 1.0)],
        })
    }
}

pub fn parse_rating_line(line: &str) -> Result<Rating, ParseError> {
    let mut parts = line.split_ascii_whitespace();
    let mut next = || -> Result<&str, ParseError> {
        parts
            .next()
            .ok_or_else(|| ParseError::MalformedToken(line.to_string()))
    };
    let bad = |t: &str| ParseError::MalformedToken(t.to_string());
    let user: u32 = next()?.parse().map_err(|_| bad(line))?;
    let item: u32 = next()?.parse().map_err(|_| bad(line))?;
    let rating: f64 = next()?.parse().map_err(|_| bad(line))?;
    if user == 0 || item == 0 {
        return Err(ParseError::ZeroIndex);
    }
    if !rating.is_finite() {
        return Err(ParseError::NonFinite(line.to_string()));
    }
    Ok(Rating { user, item, rating })
}

pub fn read_ratings(path: impl AsRef<Path>) -> Result<Vec<Rating>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| Error::Io {
            path: Some(path.to_path_buf()),
            line: Some(n + 1),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_rating_line(&line).map_err(|source| Error::Parse { line: n + 1, source })?);
    }
    Ok(out)
}

/// Writes ratings in `u.data` layout; the timestamp column is the row number.
pub fn write_ratings<W: Write>(mut out: W, ratings: &[Rating]) -> std::io::Result<()> {
    for (t, r) in ratings.iter().enumerate() {
        writeln!(out, "{}\t{}\t{}\t{}", r.user, r.item, r.rating, t)?;
    }
    Ok(())
}
