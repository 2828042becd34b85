use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::domain::DomainName;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentityError {
    #[error("invalid package id {0:?} (expected [a-z0-9_]+(.[a-z0-9_]+)+)")]
    BadPackageId(String),
    #[error("fingerprint must be exactly 64 lowercase hex characters, got {len} characters")]
    BadFingerprint { len: usize },
    #[error("signing key label must not be empty")]
    EmptyLabel,
    #[error("app must declare exactly one of signing_fingerprint or signing_key")]
    SigningIdentity,
}

/// Dotted application identifier (`com.walmart.android`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PackageId(String);

impl PackageId {
    pub fn parse(raw: &str) -> Result<Self, IdentityError> {
        let mut parts = 0;
        for part in raw.split('.') {
            let ok = !part.is_empty()
                && part
                    .bytes()
                    .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_');
            if !ok {
                return Err(IdentityError::BadPackageId(raw.to_owned()));
            }
            parts += 1;
        }
        if parts < 2 {
            return Err(IdentityError::BadPackageId(raw.to_owned()));
        }
        Ok(Self(raw.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn components(&self) -> impl Iterator<Item = &str> {
        self.0.split('.')
    }
}

impl fmt::Display for PackageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for PackageId {
    type Err = IdentityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl TryFrom<String> for PackageId {
    type Error = IdentityError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::parse(&value)
    }
}

impl From<PackageId> for String {
    fn from(value: PackageId) -> Self {
        value.0
    }
}

/// SHA-256 digest of a code-signing certificate, as 64 lowercase hex chars.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Fingerprint(String);

impl Fingerprint {
    pub fn parse(raw: &str) -> Result<Self, IdentityError> {
        let ok = raw.len() == 64
            && raw
                .bytes()
                .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        if ok {
            Ok(Self(raw.to_owned()))
        } else {
            Err(IdentityError::BadFingerprint { len: raw.len() })
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for Fingerprint {
    type Error = IdentityError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::parse(&value)
    }
}

impl From<Fingerprint> for String {
    fn from(value: Fingerprint) -> Self {
        value.0
    }
}

/// Simulated code signing: a signing key is a label and its certificate
/// fingerprint is the SHA-256 of the label's UTF-8 bytes.
pub fn fingerprint(signing_key_label: &str) -> Result<Fingerprint, IdentityError> {
    if signing_key_label.is_empty() {
        return Err(IdentityError::EmptyLabel);
    }
    let digest = Sha256::digest(signing_key_label.as_bytes());
    Ok(Fingerprint(hex::encode(digest)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreMetadata {
    pub developer_website: DomainName,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawApp", into = "RawApp")]
pub struct AppIdentity {
    pub package_id: PackageId,
    pub signing_fingerprint: Fingerprint,
    pub entitled_domains: Vec<DomainName>,
    pub store_metadata: Option<StoreMetadata>,
}

impl AppIdentity {
    pub fn new(package_id: PackageId, signing_fingerprint: Fingerprint) -> Self {
        Self {
            package_id,
            signing_fingerprint,
            entitled_domains: Vec::new(),
            store_metadata: None,
        }
    }

    /// Builder-style helper for a label-signed app.
    pub fn signed(package_id: &str, key_label: &str) -> Result<Self, IdentityError> {
        Ok(Self::new(
            PackageId::parse(package_id)?,
            fingerprint(key_label)?,
        ))
    }

    pub fn entitled(mut self, domains: impl IntoIterator<Item = DomainName>) -> Self {
        self.entitled_domains.extend(domains);
        self
    }

    pub fn with_developer_website(mut self, site: DomainName) -> Self {
        self.store_metadata = Some(StoreMetadata {
            developer_website: site,
        });
        self
    }

    /// Same package and same signing certificate.
    pub fn same_identity(&self, other: &AppIdentity) -> bool {
        self.package_id == other.package_id && self.signing_fingerprint == other.signing_fingerprint
    }
}

impl fmt::Display for AppIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}]",
            self.package_id,
            &self.signing_fingerprint.as_str()[..12]
        )
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawApp {
    package_id: PackageId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    signing_fingerprint: Option<Fingerprint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    signing_key: Option<String>,
    #[serde(default)]
    entitled_domains: Vec<DomainName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    store_metadata: Option<StoreMetadata>,
}

impl TryFrom<RawApp> for AppIdentity {
    type Error = IdentityError;
    fn try_from(raw: RawApp) -> Result<Self, Self::Error> {
        let signing_fingerprint = match (raw.signing_fingerprint, raw.signing_key) {
            (Some(fp), None) => fp,
            (None, Some(label)) => fingerprint(&label)?,
            _ => return Err(IdentityError::SigningIdentity),
        };
        Ok(Self {
            package_id: raw.package_id,
            signing_fingerprint,
            entitled_domains: raw.entitled_domains,
            store_metadata: raw.store_metadata,
        })
    }
}

impl From<AppIdentity> for RawApp {
    fn from(app: AppIdentity) -> Self {
        RawApp {
            package_id: app.package_id,
            signing_fingerprint: Some(app.signing_fingerprint),
            signing_key: None,
            entitled_domains: app.entitled_domains,
            store_metadata: app.store_metadata,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Computed with coreutils `printf 'keyA' | sha256sum`.
    const KEY_A: &str = "8a197f6f60e55bf203457b7e3a0f7aad287a1740cc672d01f2c588770a2c6a2b";
    const KEY_B: &str = "d458717df9623e5387314594ebbd9477551d27ac6e8325404353e7c63fc4b1fd";

    #[test]
    fn fingerprint_matches_reference_digests() {
        assert_eq!(fingerprint("keyA").unwrap().as_str(), KEY_A);
        assert_eq!(fingerprint("keyB").unwrap().as_str(), KEY_B);
        assert_eq!(fingerprint("keyA").unwrap(), fingerprint("keyA").unwrap());
        assert_ne!(fingerprint("keyA").unwrap(), fingerprint("keyB").unwrap());
        assert_eq!(fingerprint(""), Err(IdentityError::EmptyLabel));
    }

    #[test]
    fn fingerprint_parse_is_strict() {
        assert!(Fingerprint::parse(KEY_A).is_ok());
        assert_eq!(
            Fingerprint::parse(&KEY_A[..63]),
            Err(IdentityError::BadFingerprint { len: 63 })
        );
        assert!(Fingerprint::parse(&KEY_A.to_uppercase()).is_err());
    }

    #[test]
    fn package_id_grammar() {
        assert!(PackageId::parse("com.walmart.evil").is_ok());
        assert!(PackageId::parse("org.my_app2.x").is_ok());
        assert!(PackageId::parse("walmart").is_err());
        assert!(PackageId::parse("com..walmart").is_err());
        assert!(PackageId::parse("Com.walmart").is_err());
        assert!(PackageId::parse("com.wal-mart").is_err());
    }

    #[test]
    fn app_json_accepts_key_label_and_renders_fingerprint() {
        let app: AppIdentity = serde_json::from_str(
            r#"{"package_id":"com.walmart.evil","signing_key":"keyA","entitled_domains":["walmart.com"]}"#,
        )
        .unwrap();
        assert_eq!(app.signing_fingerprint.as_str(), KEY_A);
        let rendered = serde_json::to_string(&app).unwrap();
        assert!(rendered.contains(KEY_A));
        let back: AppIdentity = serde_json::from_str(&rendered).unwrap();
        assert_eq!(back, app);

        let both = r#"{"package_id":"com.a.b","signing_key":"k","signing_fingerprint":"00"}"#;
        assert!(serde_json::from_str::<AppIdentity>(both).is_err());
    }
}
