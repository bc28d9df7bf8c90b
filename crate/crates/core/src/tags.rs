//! Tag vocabularies.
//!
//! Every tag set carries the reserved tags `SELF` (id 0) and `EOS` (id 1);
//! task tags follow from id 2. Tag set files list only the task tags, one
//! per line, so line `k` holds id `k + 2`.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TagId(pub u16);

impl TagId {
    pub const SELF: TagId = TagId(0);
    pub const EOS: TagId = TagId(1);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TagId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tag#{}", self.0)
    }
}

pub const SELF_TAG: &str = "SELF";
pub const EOS_TAG: &str = "EOS";
pub const NON_SELF_TAG: &str = "NON_SELF";

pub const BUILTIN_TASKS: [&str; 5] = ["textnorm-en", "textnorm-ru", "fusion", "trivial", "errant"];

const SEMIOTIC_CLASSES: [&str; 14] = [
    "PLAIN", "PUNCT", "TRANS", "LETTERS", "CARDINAL", "VERBATIM", "ORDINAL", "DECIMAL",
    "ELECTRONIC", "DIGIT", "MONEY", "FRACTION", "TIME", "ADDRESS",
];

const DISCOURSE_TYPES: [&str; 13] = [
    "PAIR_ANAPHORA",
    "PAIR_CONN",
    "PAIR_CONN_ANAPHORA",
    "PAIR_NONE",
    "SINGLE_APPOSITION",
    "SINGLE_CATAPHORA",
    "SINGLE_CONN_INNER",
    "SINGLE_CONN_INNER_ANAPH.",
    "SINGLE_CONN_START",
    "SINGLE_RELATIVE",
    "SINGLE_S_COORD",
    "SINGLE_S_COORD_ANAPHORA",
    "SINGLE_VP_COORD",
];

const ERRANT_TYPES: [&str; 25] = [
    "ADJ", "ADJ:FORM", "ADV", "CONJ", "CONTR", "DET", "MORPH", "NOUN", "NOUN:INFL", "NOUN:NUM",
    "NOUN:POSS", "ORTH", "OTHER", "PART", "PREP", "PRON", "PUNCT", "SPELL", "UNK", "VERB",
    "VERB:FORM", "VERB:INFL", "VERB:SVA", "VERB:TENSE", "WO",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TagSetRepr", into = "TagSetRepr")]
pub struct TagSet {
    name: String,
    tags: Vec<String>,
    lookup: HashMap<String, TagId>,
}

#[derive(Serialize, Deserialize)]
struct TagSetRepr {
    name: String,
    tags: Vec<String>,
}

impl TryFrom<TagSetRepr> for TagSet {
    type Error = Error;

    fn try_from(repr: TagSetRepr) -> Result<Self> {
        let task_tags = repr.tags.into_iter().skip(2);
        TagSet::new(repr.name, task_tags)
    }
}

impl From<TagSet> for TagSetRepr {
    fn from(ts: TagSet) -> Self {
        TagSetRepr {
            name: ts.name,
            tags: ts.tags,
        }
    }
}

impl TagSet {
    /// Builds a tag set from task tags; `SELF` and `EOS` are prepended.
    pub fn new<I, S>(name: impl Into<String>, task_tags: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tags = vec![SELF_TAG.to_string(), EOS_TAG.to_string()];
        tags.extend(task_tags.into_iter().map(Into::into));
        let mut lookup = HashMap::with_capacity(tags.len());
        for (i, t) in tags.iter().enumerate() {
            if lookup.insert(t.clone(), TagId(i as u16)).is_some() {
                return Err(Error::DuplicateTag(t.clone()));
            }
        }
        Ok(TagSet {
            name: name.into(),
            tags,
            lookup,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn get(&self, surface: &str) -> Option<TagId> {
        self.lookup.get(surface).copied()
    }

    pub fn id(&self, surface: &str) -> Result<TagId> {
        self.get(surface)
            .ok_or_else(|| Error::UnknownTag(surface.to_string()))
    }

    pub fn surface(&self, id: TagId) -> &str {
        &self.tags[id.index()]
    }

    /// Tag used for changed regions when no annotation is given: `NON_SELF`
    /// if present, otherwise the first task tag.
    pub fn default_change_tag(&self) -> Option<TagId> {
        self.get(NON_SELF_TAG)
            .or_else(|| (self.tags.len() > 2).then_some(TagId(2)))
    }

    pub fn read<R: BufRead>(name: impl Into<String>, reader: R) -> Result<Self> {
        let mut tags = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let t = line.trim();
            if !t.is_empty() {
                tags.push(t.to_string());
            }
        }
        TagSet::new(name, tags)
    }

    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        for t in &self.tags[2..] {
            writeln!(writer, "{t}")?;
        }
        Ok(())
    }

    /// Resolves a built-in task name or, failing that, a tag set file path.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match builtin_tagset(name_or_path) {
            Ok(ts) => Ok(ts),
            Err(e) => {
                let path = Path::new(name_or_path);
                if path.is_file() {
                    let stem = path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    let file = std::fs::File::open(path)?;
                    TagSet::read(stem, std::io::BufReader::new(file))
                } else {
                    Err(e)
                }
            }
        }
    }
}

/// Returns one of the built-in task tag vocabularies.
pub fn builtin_tagset(task: &str) -> Result<TagSet> {
    match task {
        "textnorm-en" | "textnorm-ru" => TagSet::new(task, SEMIOTIC_CLASSES),
        "fusion" => TagSet::new(task, DISCOURSE_TYPES),
        "errant" => TagSet::new(task, ERRANT_TYPES),
        "trivial" => TagSet::new(task, [NON_SELF_TAG]),
        other => Err(Error::UnknownTask {
            name: other.to_string(),
            valid: BUILTIN_TASKS.join(", "),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_set() {
        let ts = builtin_tagset("trivial").unwrap();
        assert_eq!(ts.len(), 3);
        assert_eq!(ts.get("SELF"), Some(TagId::SELF));
        assert_eq!(ts.get("EOS"), Some(TagId::EOS));
        assert_eq!(ts.get("NON_SELF"), Some(TagId(2)));
    }

    #[test]
    fn errant_set() {
        let ts = builtin_tagset("errant").unwrap();
        assert_eq!(ts.len(), 27);
        assert_eq!(ts.surface(TagId(2)), "ADJ");
        assert_eq!(ts.surface(TagId(26)), "WO");
    }

    #[test]
    fn semiotic_set() {
        let ts = builtin_tagset("textnorm-en").unwrap();
        assert_eq!(ts.len(), 16);
        assert_eq!(ts.surface(TagId(2)), "PLAIN");
        assert_eq!(ts.surface(TagId(15)), "ADDRESS");
        assert_eq!(builtin_tagset("fusion").unwrap().len(), 15);
    }

    #[test]
    fn builtin_is_deterministic() {
        for task in BUILTIN_TASKS {
            let a = builtin_tagset(task).unwrap();
            let b = builtin_tagset(task).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.id("SELF").unwrap(), TagId::SELF);
            assert_eq!(a.id("EOS").unwrap(), TagId::EOS);
        }
    }

    #[test]
    fn unknown_task_names_valid_set() {
        let err = builtin_tagset("poetry").unwrap_err().to_string();
        assert!(err.contains("poetry"));
        for task in BUILTIN_TASKS {
            assert!(err.contains(task), "{err}");
        }
    }

    #[test]
    fn duplicate_tags_rejected() {
        assert!(matches!(TagSet::new("x", ["A", "A"]), Err(Error::DuplicateTag(_))));
        assert!(matches!(TagSet::new("x", ["SELF"]), Err(Error::DuplicateTag(_))));
    }

    #[test]
    fn file_round_trip() {
        let ts = builtin_tagset("fusion").unwrap();
        let mut buf = Vec::new();
        ts.write(&mut buf).unwrap();
        let back = TagSet::read("fusion", &buf[..]).unwrap();
        assert_eq!(back, ts);
    }

    #[test]
    fn serde_round_trip() {
        let ts = builtin_tagset("errant").unwrap();
        let json = serde_json::to_string(&ts).unwrap();
        let back: TagSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ts);
    }
}
