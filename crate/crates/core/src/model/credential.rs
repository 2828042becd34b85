use std::fmt;

use serde::{Deserialize, Serialize};

use super::app::PackageId;
use super::domain::{DomainName, Origin};

/// A secret string. `Debug` and `Display` never print the contents.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(<redacted>)")
    }
}

impl fmt::Display for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<redacted>")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CredentialId(pub String);

impl fmt::Display for CredentialId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Credential {
    pub id: CredentialId,
    pub username: String,
    pub password: Secret,
    #[serde(rename = "domain")]
    pub mapped_domain: DomainName,
}

impl fmt::Display for Credential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} @ {})",
            self.id, self.username, self.mapped_domain
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManualMapping {
    pub package_id: PackageId,
    pub domain: DomainName,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vault {
    #[serde(default)]
    pub credentials: Vec<Credential>,
    #[serde(default)]
    pub manual_app_mappings: Vec<ManualMapping>,
}

impl Vault {
    /// Distinct stored domains in first-seen order.
    pub fn known_domains(&self) -> Vec<DomainName> {
        let mut out: Vec<DomainName> = Vec::new();
        for cred in &self.credentials {
            if !out.contains(&cred.mapped_domain) {
                out.push(cred.mapped_domain.clone());
            }
        }
        out
    }

    pub fn credential(&self, id: &CredentialId) -> Option<&Credential> {
        self.credentials.iter().find(|c| &c.id == id)
    }

    /// Looks a value up against every stored password.
    pub fn credential_with_password(&self, value: &str) -> Option<&Credential> {
        self.credentials
            .iter()
            .find(|c| c.password.expose() == value)
    }
}

/// Credentials whose mapped domain shares a registrable domain with the
/// origin, ordered by id. Transport security is not considered here.
pub fn credentials_for_domain(vault: &Vault, origin: &Origin) -> Vec<Credential> {
    credentials_for(vault, &origin.domain)
}

pub fn credentials_for(vault: &Vault, domain: &DomainName) -> Vec<Credential> {
    let mut out: Vec<Credential> = vault
        .credentials
        .iter()
        .filter(|c| c.mapped_domain.same_registrable(domain))
        .cloned()
        .collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::domain::ConnectionSecurity;

    fn cred(id: &str, domain: &str) -> Credential {
        Credential {
            id: CredentialId(id.into()),
            username: format!("{id}-user"),
            password: Secret::new(format!("{id}-pw")),
            mapped_domain: DomainName::parse(domain).unwrap(),
        }
    }

    fn vault(creds: Vec<Credential>) -> Vault {
        Vault {
            credentials: creds,
            manual_app_mappings: vec![],
        }
    }

    #[test]
    fn exact_domain_match() {
        let v = vault(vec![cred("A", "walmart.com")]);
        let got = credentials_for_domain(&v, &Origin::https("walmart.com"));
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].id.0, "A");
    }

    #[test]
    fn other_domain_gets_nothing() {
        let v = vault(vec![cred("A", "walmart.com")]);
        assert!(credentials_for_domain(&v, &Origin::https("evil.com")).is_empty());
    }

    #[test]
    fn security_kind_is_ignored_and_order_is_by_id() {
        let v = vault(vec![cred("B", "walmart.com"), cred("A", "walmart.com")]);
        let http = Origin::new(
            DomainName::parse("walmart.com").unwrap(),
            ConnectionSecurity::Http,
        );
        let ids: Vec<_> = credentials_for_domain(&v, &http)
            .into_iter()
            .map(|c| c.id.0)
            .collect();
        assert_eq!(ids, ["A", "B"]);
    }

    #[test]
    fn secret_is_redacted_in_debug_and_display() {
        let c = cred("A", "walmart.com");
        assert!(!format!("{c:?}").contains("A-pw"));
        assert!(!format!("{c}").contains("A-pw"));
        assert!(!format!("{:#?}", vault(vec![c])).contains("A-pw"));
    }
}
