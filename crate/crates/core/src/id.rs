use std::borrow::Borrow;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::Error;

/// Caller-supplied identifier restricted to `[a-z0-9_-]+`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Id(String);

impl Id {
    pub fn new(raw: impl Into<String>) -> Result<Self, Error> {
        let raw = raw.into();
        if is_valid(&raw) {
            Ok(Id(raw))
        } else {
            Err(Error::InvalidId(raw))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub fn is_valid(raw: &str) -> bool {
    !raw.is_empty()
        && raw
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-')
}

/// Shorthand for ids known to be well formed (fixtures, tests, built-ins).
///
/// Panics on an invalid identifier.
pub fn id(raw: &str) -> Id {
    Id::new(raw).unwrap_or_else(|_| panic!("invalid identifier literal {raw:?}"))
}

impl TryFrom<String> for Id {
    type Error = Error;
    fn try_from(raw: String) -> Result<Self, Self::Error> {
        Id::new(raw)
    }
}

impl TryFrom<&str> for Id {
    type Error = Error;
    fn try_from(raw: &str) -> Result<Self, Self::Error> {
        Id::new(raw)
    }
}

impl From<Id> for String {
    fn from(id: Id) -> String {
        id.0
    }
}

impl Borrow<str> for Id {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for Id {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl PartialEq<str> for Id {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for Id {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}
