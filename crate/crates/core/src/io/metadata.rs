//! User demographics (age and gender), e.g. MovieLens `u.user`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::ratings::Delimiter;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserInfo {
    pub age: u32,
    pub gender: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetadataFormat {
    pub delimiter: Delimiter,
    pub user_column: usize,
    pub age_column: usize,
    pub gender_column: usize,
    pub header: bool,
}

impl Default for MetadataFormat {
    /// `user|age|gender|...`
    fn default() -> Self {
        Self {
            delimiter: Delimiter::Char('|'),
            user_column: 0,
            age_column: 1,
            gender_column: 2,
            header: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UserMetadata {
    pub users: BTreeMap<String, UserInfo>,
}

impl UserMetadata {
    pub fn get(&self, user_id: &str) -> Option<&UserInfo> {
        self.users.get(user_id)
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Users described in the metadata but absent from the ratings.
    pub fn warnings_for(&self, dataset: &Dataset) -> Vec<String> {
        self.users
            .keys()
            .filter(|id| dataset.user_index(id).is_none())
            .map(|id| format!("metadata for user {id:?} who has no ratings"))
            .collect()
    }
}

pub fn parse_metadata(path: &Path, format: &MetadataFormat) -> Result<UserMetadata> {
    read_metadata(BufReader::new(File::open(path)?), path, format)
}

pub fn read_metadata(reader: impl BufRead, path: &Path, format: &MetadataFormat) -> Result<UserMetadata> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let need = format.user_column.max(format.age_column).max(format.gender_column) + 1;
    let mut users = BTreeMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if (format.header && n == 0) || line.trim().is_empty() {
            continue;
        }
        let line_no = n + 1;
        let fields: Vec<&str> = match &format.delimiter {
            Delimiter::Whitespace => line.split_whitespace().collect(),
            Delimiter::Char(c) => line.split(*c).map(str::trim).collect(),
            Delimiter::Str(s) => line.split(s.as_str()).map(str::trim).collect(),
        };
        if fields.len() < need {
            return Err(err(line_no, format!("expected at least {need} fields")));
        }
        let age: i64 = fields[format.age_column]
            .parse()
            .map_err(|_| err(line_no, format!("bad age {:?}", fields[format.age_column])))?;
        if age <= 0 {
            return Err(err(line_no, format!("age must be positive, got {age}")));
        }
        let gender = fields[format.gender_column];
        if gender.is_empty() {
            return Err(err(line_no, "empty gender".into()));
        }
        users.insert(
            fields[format.user_column].to_string(),
            UserInfo {
                age: age as u32,
                gender: gender.to_string(),
            },
        );
    }
    Ok(UserMetadata { users })
}
