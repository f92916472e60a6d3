//! LIBSVM text ingestion: line parsing, streaming readers and seeded
//! train/validation/test splitting.
//!
//! Wire format is `<label> <idx>:<val> <idx>:<val> ...` with 1-based,
//! strictly increasing indices. Explicit zero values are dropped on read.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, ParseError, Result};

/// One labeled example with a sparse feature vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledInstance {
    pub label: f64,
    /// `(index, value)` pairs, indices strictly increasing, values finite and nonzero.
    pub features: Vec<(u32, f64)>,
}

impl LabeledInstance {
    /// Builds an instance, checking the sparse-vector invariants.
    pub fn new(label: f64, features: Vec<(u32, f64)>) -> Result<Self, ParseError> {
        if !label.is_finite() {
            return Err(ParseError::NonFinite(label.to_string()));
        }
        let mut previous = 0u32;
        for &(index, value) in &features {
            if index == 0 {
                return Err(ParseError::ZeroIndex);
            }
            if index <= previous {
                return Err(ParseError::NonIncreasingIndex { previous, index });
            }
            if !value.is_finite() {
                return Err(ParseError::NonFinite(format!("{index}:{value}")));
            }
            previous = index;
        }
        let features = features.into_iter().filter(|&(_, v)| v != 0.0).collect();
        Ok(Self { label, features })
    }

    pub fn nnz(&self) -> usize {
        self.features.len()
    }

    pub fn max_index(&self) -> Option<u32> {
        self.features.last().map(|&(i, _)| i)
    }

    /// Serializes back to a LIBSVM line (no trailing newline). Values use the
    /// shortest representation that parses back to the same `f64`.
    pub fn to_libsvm(&self) -> String {
        let mut out = format!("{:?}", self.label);
        for &(index, value) in &self.features {
            let _ = write!(out, " {index}:{value:?}");
        }
        out
    }
}

fn parse_number(token: &str, whole: &str) -> Result<f64, ParseError> {
    let value: f64 = token
        .parse()
        .map_err(|_| ParseError::MalformedToken(whole.to_string()))?;
    if !value.is_finite() {
        return Err(ParseError::NonFinite(whole.to_string()));
    }
    Ok(value)
}

/// Parses one LIBSVM line. A trailing `\r` is tolerated.
pub fn parse_line(line: &str) -> Result<LabeledInstance, ParseError> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let mut tokens = line.split_ascii_whitespace();
    let label_token = tokens.next().ok_or(ParseError::MissingLabel)?;
    let label = parse_number(label_token, label_token)?;

    let mut features = Vec::new();
    let mut previous = 0u32;
    for token in tokens {
        let (index, value) = token
            .split_once(':')
            .ok_or_else(|| ParseError::MalformedToken(token.to_string()))?;
        let index: u32 = index
            .parse()
            .map_err(|_| ParseError::MalformedToken(token.to_string()))?;
        if index == 0 {
            return Err(ParseError::ZeroIndex);
        }
        if index <= previous {
            return Err(ParseError::NonIncreasingIndex { previous, index });
        }
        previous = index;
        let value = parse_number(value, token)?;
        if value != 0.0 {
            features.push((index, value));
        }
    }
    Ok(LabeledInstance { label, features })
}

/// Sequential reader yielding instances in file order.
///
/// Each item carries the 1-based line number of any failure. Lines are
/// parsed one at a time, so memory does not grow with the dataset.
pub struct InstanceReader<R> {
    reader: R,
    path: Option<PathBuf>,
    line: usize,
    buf: String,
    failed: bool,
}

impl<R: BufRead> InstanceReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            reader,
            path: None,
            line: 0,
            buf: String::new(),
            failed: false,
        }
    }

    /// Number of lines consumed so far.
    pub fn line(&self) -> usize {
        self.line
    }
}

impl<R: BufRead> Iterator for InstanceReader<R> {
    type Item = Result<LabeledInstance>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        self.buf.clear();
        let read = self.reader.read_line(&mut self.buf);
        self.line += 1;
        let item = match read {
            Ok(0) => return None,
            Ok(_) => {
                let text = self.buf.strip_suffix('\n').unwrap_or(&self.buf);
                parse_line(text).map_err(|source| Error::Parse {
                    line: self.line,
                    source,
                })
            }
            Err(source) => Err(Error::Io {
                path: self.path.clone(),
                line: Some(self.line),
                source,
            }),
        };
        if item.is_err() {
            self.failed = true;
        }
        Some(item)
    }
}

/// Opens `path` for a single streaming pass.
pub fn stream(path: impl AsRef<Path>) -> Result<InstanceReader<BufReader<File>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = InstanceReader::new(BufReader::new(file));
    reader.path = Some(path.to_path_buf());
    Ok(reader)
}

/// Reads a whole file into memory.
pub fn read_instances(path: impl AsRef<Path>) -> Result<Vec<LabeledInstance>> {
    stream(path)?.collect()
}

/// Writes `instances` as LIBSVM text.
pub fn write_instances<'a, W: Write>(
    mut out: W,
    instances: impl IntoIterator<Item = &'a LabeledInstance>,
) -> io::Result<()> {
    for instance in instances {
        writeln!(out, "{}", instance.to_libsvm())?;
    }
    out.flush()
}

/// Writes a file by way of a temporary sibling that is renamed into place,
/// so readers never observe a partially written file.
pub fn write_atomic<F>(path: impl AsRef<Path>, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<&mut File>) -> io::Result<()>,
{
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    {
        let mut out = BufWriter::new(tmp.as_file_mut());
        write(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Fractions routing each line to train, validation or test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSplit {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn new(train: f64, validation: f64, test: f64, seed: u64) -> Result<Self> {
        for (name, f) in [("train", train), ("validation", validation), ("test", test)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidArgument(format!(
                    "{name} fraction {f} outside [0, 1]"
                )));
            }
        }
        let sum = train + validation + test;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "split fractions sum to {sum}, expected 1"
            )));
        }
        Ok(Self {
            train,
            validation,
            test,
            seed,
        })
    }

    /// The 80/10/10 protocol.
    pub fn standard(seed: u64) -> Self {
        Self::new(0.8, 0.1, 0.1, seed).expect("valid fractions")
    }

    fn route(&self, draw: f64) -> usize {
        if draw < self.train {
            0
        } else if draw < self.train + self.validation {
            1
        } else {
            2
        }
    }
}

/// Destination paths for [`split`].
#[derive(Debug, Clone)]
pub struct SplitPaths {
    pub train: PathBuf,
    pub validation: PathBuf,
    pub test: PathBuf,
}

impl SplitPaths {
    /// `<input>.train`, `<input>.valid`, `<input>.test` next to the input.
    pub fn beside(input: impl AsRef<Path>) -> Self {
        let input = input.as_ref();
        let with = |ext: &str| {
            let mut name = input.as_os_str().to_owned();
            name.push(".");
            name.push(ext);
            PathBuf::from(name)
        };
        Self {
            train: with("train"),
            validation: with("valid"),
            test: with("test"),
        }
    }
}

/// Routes every line of `input` to exactly one of the three outputs by a
/// seeded draw. Lines are copied verbatim (line terminator normalized to LF)
/// and not parsed. Returns the line count written to each output.
pub fn split(input: impl AsRef<Path>, plan: &DatasetSplit, paths: &SplitPaths) -> Result<[usize; 3]> {
    let input = input.as_ref();
    let file = File::open(input).map_err(|e| Error::io(input, e))?;
    let reader = BufReader::new(file);
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);

    let targets = [&paths.train, &paths.validation, &paths.test];
    let mut tmps = Vec::with_capacity(3);
    for target in targets {
        let dir = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(target, e))?;
        tmps.push(tmp);
    }
    let mut counts = [0usize; 3];
    {
        let mut writers: Vec<BufWriter<&File>> = tmps.iter().map(|t| BufWriter::new(t.as_file())).collect();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| Error::Io {
                path: Some(input.to_path_buf()),
                line: Some(lineno + 1),
                source,
            })?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            let bucket = plan.route(rng.random::<f64>());
            writeln!(writers[bucket], "{line}").map_err(|e| Error::io(targets[bucket], e))?;
            counts[bucket] += 1;
        }
        for (w, target) in writers.iter_mut().zip(targets) {
            w.flush().map_err(|e| Error::io(target, e))?;
        }
    }
    for (tmp, target) in tmps.into_iter().zip(targets) {
        tmp.persist(target).map_err(|e| Error::io(target, e.error))?;
    }
    Ok(counts)
}
