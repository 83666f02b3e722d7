//! Instrument class vocabularies.
//!
//! Text format: one `id name` entry per line. Ids must run densely from 1;
//! id 0 is reserved for background. Blank lines and lines starting with `#`
//! are ignored.

use std::collections::HashSet;
use std::path::Path;

use crate::detections::ClassId;
use crate::error::{Error, Result};

const ENDOVIS2017: &str = include_str!("../vocab/endovis2017.txt");
const ENDOVIS2018: &str = include_str!("../vocab/endovis2018.txt");

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassVocabulary {
    names: Vec<String>,
}

impl ClassVocabulary {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::Vocabulary("vocabulary has no classes".into()));
        }
        if names.len() > 255 {
            return Err(Error::Vocabulary(format!(
                "{} classes do not fit 8-bit label maps",
                names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.trim().is_empty() {
                return Err(Error::Vocabulary("empty class name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Vocabulary(format!("duplicate class name {name:?}")));
            }
        }
        Ok(ClassVocabulary { names })
    }

    /// The seven instrument types of the EndoVis 2017 benchmark.
    pub fn endovis2017() -> Self {
        Self::parse(ENDOVIS2017).expect("bundled vocabulary is valid")
    }

    /// The seven evaluated instrument types of EndoVis 2018.
    pub fn endovis2018() -> Self {
        Self::parse(ENDOVIS2018).expect("bundled vocabulary is valid")
    }

    /// A bundled vocabulary by name, otherwise a vocabulary file path.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match name_or_path {
            "endovis2017" => Ok(Self::endovis2017()),
            "endovis2018" => Ok(Self::endovis2018()),
            path => Self::read(path),
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| e.in_file(path))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut names = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, name) = line.split_once(char::is_whitespace).ok_or_else(|| {
                Error::Vocabulary(format!("line {}: expected `id name`", lineno + 1))
            })?;
            let id: usize = id.parse().map_err(|_| {
                Error::Vocabulary(format!("line {}: bad class id {id:?}", lineno + 1))
            })?;
            if id != names.len() + 1 {
                return Err(Error::Vocabulary(format!(
                    "line {}: class id {id} out of sequence, expected {}",
                    lineno + 1,
                    names.len() + 1
                )));
            }
            names.push(name.trim().to_string());
        }
        Self::new(names)
    }

    /// Number of classes, excluding background.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, id: ClassId) -> bool {
        id.0 >= 1 && (id.0 as usize) <= self.names.len()
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        if self.contains(id) {
            Some(&self.names[id.0 as usize - 1])
        } else {
            None
        }
    }

    /// Class ids `1..=K`.
    pub fn ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (1..=self.names.len() as u8).map(ClassId)
    }

    pub fn check(&self, id: i64) -> Result<ClassId> {
        if id >= 1 && id as usize <= self.names.len() {
            Ok(ClassId(id as u8))
        } else {
            Err(Error::Vocabulary(format!(
                "class id {id} not in vocabulary 1..={}",
                self.names.len()
            )))
        }
    }

    /// Render in the text file format.
    pub fn to_text(&self) -> String {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| format!("{} {n}\n", i + 1))
            .collect()
    }
}
