//! Delimited rating files: one record per line with user, item and rating
//! columns at configurable positions. Extra columns (timestamps) are ignored.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::dataset::RatingTriple;
use crate::error::{Error, Result};
use crate::scale::RatingScale;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Delimiter {
    /// Any run of spaces or tabs.
    Whitespace,
    Char(char),
    /// A multi-character separator such as `::`.
    Str(String),
}

impl Delimiter {
    fn split<'a>(&'a self, line: &'a str) -> Box<dyn Iterator<Item = &'a str> + 'a> {
        match self {
            Delimiter::Whitespace => Box::new(line.split_whitespace()),
            Delimiter::Char(c) => Box::new(line.split(*c)),
            Delimiter::Str(s) => Box::new(line.split(s.as_str())),
        }
    }

    fn as_output(&self) -> String {
        match self {
            Delimiter::Whitespace => "\t".into(),
            Delimiter::Char(c) => c.to_string(),
            Delimiter::Str(s) => s.clone(),
        }
    }
}

impl FromStr for Delimiter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "tab" | "\\t" | "\t" => Delimiter::Char('\t'),
            "comma" | "," => Delimiter::Char(','),
            "pipe" | "|" => Delimiter::Char('|'),
            "space" | "whitespace" | "ws" => Delimiter::Whitespace,
            "" => return Err(Error::InvalidConfig("empty delimiter".into())),
            other if other.chars().count() == 1 => Delimiter::Char(other.chars().next().unwrap()),
            other => Delimiter::Str(other.to_string()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingFormat {
    pub delimiter: Delimiter,
    pub user_column: usize,
    pub item_column: usize,
    pub rating_column: usize,
    pub header: bool,
}

impl RatingFormat {
    /// `u.data`: tab separated user, item, rating, timestamp.
    pub fn movielens_100k() -> Self {
        Self {
            delimiter: Delimiter::Char('\t'),
            user_column: 0,
            item_column: 1,
            rating_column: 2,
            header: false,
        }
    }

    /// `ratings.dat` of the larger MovieLens releases: `user::item::rating::timestamp`.
    pub fn movielens_10m() -> Self {
        Self {
            delimiter: Delimiter::Str("::".into()),
            ..Self::movielens_100k()
        }
    }

    /// Comma separated `user,item,rating` with a header line.
    pub fn csv() -> Self {
        Self {
            delimiter: Delimiter::Char(','),
            header: true,
            ..Self::movielens_100k()
        }
    }

    fn columns(&self) -> usize {
        self.user_column.max(self.item_column).max(self.rating_column) + 1
    }
}

impl FromStr for RatingFormat {
    type Err = Error;

    /// Either a preset (`ml100k`, `ml10m`, `csv`, `tsv`) or a descriptor of the
    /// form `delim=::,cols=0:1:2,header=true` where `cols` gives the user, item
    /// and rating column positions.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml100k" | "movielens-100k" | "tab" | "tsv" => return Ok(Self::movielens_100k()),
            "ml10m" | "movielens-10m" => return Ok(Self::movielens_10m()),
            "csv" => return Ok(Self::csv()),
            _ => {}
        }
        let mut format = Self::movielens_100k();
        for part in s.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("bad format field {part:?}")))?;
            match key.trim() {
                "delim" | "delimiter" => format.delimiter = value.parse()?,
                "header" => {
                    format.header = value
                        .parse()
                        .map_err(|_| Error::InvalidConfig(format!("bad header flag {value:?}")))?
                }
                "cols" | "columns" => {
                    let cols = value
                        .split(':')
                        .map(|c| c.trim().parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| Error::InvalidConfig(format!("bad column list {value:?}")))?;
                    let [u, i, r] = cols[..] else {
                        return Err(Error::InvalidConfig("cols needs exactly three positions".into()));
                    };
                    format.user_column = u;
                    format.item_column = i;
                    format.rating_column = r;
                }
                other => return Err(Error::InvalidConfig(format!("unknown format key {other:?}"))),
            }
        }
        Ok(format)
    }
}

pub fn parse_ratings(path: &Path, format: &RatingFormat, scale: &RatingScale) -> Result<Vec<RatingTriple>> {
    let file = File::open(path)?;
    read_ratings(BufReader::new(file), path, format, scale)
}

pub fn read_ratings(
    reader: impl BufRead,
    path: &Path,
    format: &RatingFormat,
    scale: &RatingScale,
) -> Result<Vec<RatingTriple>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut triples = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = n + 1;
        if (format.header && n == 0) || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = format.delimiter.split(line.trim_end_matches('\r')).map(str::trim).collect();
        if fields.len() < format.columns() {
            return Err(parse_err(
                line_no,
                format!("expected at least {} fields, found {}", format.columns(), fields.len()),
            ));
        }
        let (user, item, label) = (
            fields[format.user_column],
            fields[format.item_column],
            fields[format.rating_column],
        );
        if user.is_empty() || item.is_empty() {
            return Err(parse_err(line_no, "empty user or item id".into()));
        }
        let Some(idx) = scale.index_of(label) else {
            return Err(parse_err(line_no, format!("rating {label:?} is not on the scale {scale}")));
        };
        triples.push(RatingTriple::new(user, item, scale.label(idx)));
    }
    if triples.is_empty() {
        return Err(parse_err(0, "no ratings".into()));
    }
    Ok(triples)
}

/// Writes triples so that [`parse_ratings`] with the same format reads them back.
pub fn write_ratings(path: &Path, triples: &[RatingTriple], format: &RatingFormat) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let delim = format.delimiter.as_output();
    let columns = format.columns();
    if format.header {
        let mut names = vec!["extra"; columns];
        names[format.user_column] = "user";
        names[format.item_column] = "item";
        names[format.rating_column] = "rating";
        writeln!(out, "{}", names.join(&delim))?;
    }
    let mut row = vec![""; columns];
    for t in triples {
        row.iter_mut().for_each(|c| *c = "0");
        row[format.user_column] = &t.user;
        row[format.item_column] = &t.item;
        row[format.rating_column] = &t.label;
        writeln!(out, "{}", row.join(&delim))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn read(text: &str, format: &RatingFormat) -> Result<Vec<RatingTriple>> {
        let scale = RatingScale::integer(1, 5).unwrap();
        read_ratings(Cursor::new(text), Path::new("test"), format, &scale)
    }

    #[test]
    fn movielens_line() {
        let t = read("1\t10\t3\t0\n", &RatingFormat::movielens_100k()).unwrap();
        assert_eq!(t, vec![RatingTriple::new("1", "10", "3")]);
    }

    #[test]
    fn off_scale_rating_reports_line() {
        let err = read("1\t10\t3\t0\n2\t11\t6\t0\n", &RatingFormat::movielens_100k()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_input() {
        let err = read("", &RatingFormat::movielens_100k()).unwrap_err();
        assert!(err.to_string().contains("no ratings"));
    }

    #[test]
    fn malformed_line() {
        assert!(matches!(read("1\t2\n", &RatingFormat::movielens_100k()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn double_colon_and_csv() {
        let t = read("5::7::4::978300760\n", &RatingFormat::movielens_10m()).unwrap();
        assert_eq!(t, vec![RatingTriple::new("5", "7", "4")]);
        let t = read("user,item,rating\na,b,5.0\n", &RatingFormat::csv()).unwrap();
        assert_eq!(t, vec![RatingTriple::new("a", "b", "5")]);
    }

    #[test]
    fn descriptor_parsing() {
        let f: RatingFormat = "delim=;,cols=2:1:0,header=true".parse().unwrap();
        assert_eq!(f.delimiter, Delimiter::Char(';'));
        assert_eq!((f.user_column, f.item_column, f.rating_column), (2, 1, 0));
        let t = read("h\n9;x;u\n", &f).unwrap_err();
        assert!(matches!(t, Error::Parse { line: 2, .. }));
        let t = read("h\n2;x;u\n", &f).unwrap();
        assert_eq!(t, vec![RatingTriple::new("u", "x", "2")]);
        assert!("delim=::,cols=1:2".parse::<RatingFormat>().is_err());
        assert_eq!("ml10m".parse::<RatingFormat>().unwrap(), RatingFormat::movielens_10m());
    }
}
