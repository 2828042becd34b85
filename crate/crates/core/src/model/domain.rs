use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Public suffixes known to the simulator. Registrable-domain comparison uses
/// this list only; hosts whose suffix is not listed fall back to their last
/// label.
pub const PUBLIC_SUFFIXES: &[&str] = &[
    "com", "org", "net", "edu", "gov", "io", "co.uk", "org.uk", "ac.uk", "com.au",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("domain name is empty")]
    Empty,
    #[error("invalid DNS label {0:?} (expected [a-z0-9-]+)")]
    BadLabel(String),
}

/// A lowercase DNS name, stored label by label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DomainName {
    labels: Vec<String>,
}

impl DomainName {
    pub fn parse(raw: &str) -> Result<Self, DomainError> {
        let raw = raw.trim().trim_end_matches('.');
        if raw.is_empty() {
            return Err(DomainError::Empty);
        }
        let labels = raw
            .split('.')
            .map(|label| {
                let valid = !label.is_empty()
                    && label
                        .bytes()
                        .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-');
                if valid {
                    Ok(label.to_owned())
                } else {
                    Err(DomainError::BadLabel(label.to_owned()))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Number of trailing labels that form the public suffix.
    fn suffix_len(&self) -> usize {
        PUBLIC_SUFFIXES
            .iter()
            .map(|suffix| suffix.split('.').collect::<Vec<_>>())
            .filter(|suffix| {
                suffix.len() <= self.labels.len()
                    && self.labels[self.labels.len() - suffix.len()..]
                        .iter()
                        .zip(suffix.iter())
                        .all(|(a, b)| a == b)
            })
            .map(|suffix| suffix.len())
            .max()
            .unwrap_or(1)
    }

    /// The public suffix part of the name (`co.uk` for `bbc.co.uk`).
    pub fn public_suffix(&self) -> DomainName {
        let n = self.suffix_len().min(self.labels.len());
        DomainName {
            labels: self.labels[self.labels.len() - n..].to_vec(),
        }
    }

    /// Suffix plus one label; a bare suffix is its own registrable domain.
    pub fn registrable(&self) -> DomainName {
        let n = (self.suffix_len() + 1).min(self.labels.len());
        DomainName {
            labels: self.labels[self.labels.len() - n..].to_vec(),
        }
    }

    /// The label directly left of the public suffix (`walmart` for `www.walmart.com`).
    pub fn registrable_label(&self) -> &str {
        let n = (self.suffix_len() + 1).min(self.labels.len());
        &self.labels[self.labels.len() - n]
    }

    pub fn same_registrable(&self, other: &DomainName) -> bool {
        self.registrable() == other.registrable()
    }

    pub fn is_public_suffix_label(label: &str) -> bool {
        PUBLIC_SUFFIXES
            .iter()
            .any(|suffix| suffix.split('.').any(|part| part == label))
    }
}

impl fmt::Display for DomainName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.labels.join("."))
    }
}

impl FromStr for DomainName {
    type Err = DomainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl TryFrom<String> for DomainName {
    type Error = DomainError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::parse(&value)
    }
}

impl From<DomainName> for String {
    fn from(value: DomainName) -> Self {
        value.to_string()
    }
}

/// Transport security of the connection a page or file was served over.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConnectionSecurity {
    HttpsValid,
    HttpsInvalidCert(String),
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SecurityKind {
    HttpsValid,
    HttpsInvalidCert,
    Http,
}

impl ConnectionSecurity {
    pub fn kind(&self) -> SecurityKind {
        match self {
            Self::HttpsValid => SecurityKind::HttpsValid,
            Self::HttpsInvalidCert(_) => SecurityKind::HttpsInvalidCert,
            Self::Http => SecurityKind::Http,
        }
    }

    pub fn is_authenticated(&self) -> bool {
        matches!(self, Self::HttpsValid)
    }

    pub fn scheme(&self) -> &'static str {
        match self {
            Self::Http => "http",
            _ => "https",
        }
    }
}

/// A (host, transport) pair. Same-origin requires equal hosts and equal
/// security kinds; an invalid-certificate page is never same-origin with the
/// valid one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Origin {
    pub domain: DomainName,
    pub security: ConnectionSecurity,
}

impl Origin {
    pub fn new(domain: DomainName, security: ConnectionSecurity) -> Self {
        Self { domain, security }
    }

    pub fn https(domain: &str) -> Self {
        Self::new(
            DomainName::parse(domain).expect("static domain literal"),
            ConnectionSecurity::HttpsValid,
        )
    }

    pub fn same_origin(&self, other: &Origin) -> bool {
        self.domain == other.domain && self.security.kind() == other.security.kind()
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}://{}", self.security.scheme(), self.domain)?;
        if let ConnectionSecurity::HttpsInvalidCert(_) = self.security {
            f.write_str(" (invalid cert)")?;
        }
        Ok(())
    }
}
