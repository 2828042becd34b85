//! Credential-to-app mapping: association files, bidirectional verification
//! and the heuristics individual password managers use instead.

mod file;
mod heuristic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AppIdentity, ConnectionSecurity, DomainName, Scene};

pub use file::{
    normalize_fingerprint, parse_association_file, AssociationEntry, Platform, SiteAssociationFile,
    DAL_LOGIN_RELATION,
};
pub use heuristic::{
    inverted_prefix, map_by_heuristic, substring_components, FingerprintEntry, MappingScheme,
    TableEntry, SUBSTRING_SKIP,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssociationError {
    #[error("association file schema error: {0}")]
    Schema(String),
    #[error("bad certificate fingerprint {0:?}")]
    BadFingerprint(String),
    #[error("package {0} listed more than once")]
    DuplicatePackage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NotVerifiedReason {
    /// The app does not claim the domain.
    NotEntitled,
    NoAssociationFile,
    /// The domain's association file exists but cannot be parsed.
    MalformedAssociationFile,
    AppNotListed,
    FingerprintMismatch,
    /// The association file was not fetched over a valid HTTPS connection.
    InsecureTransport,
    NoHeuristicMatch,
    NotInTable,
    NoDeveloperWebsite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Verified,
    NotVerified(NotVerifiedReason),
    UserConfirmRequired,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingVerdict {
    pub decision: Decision,
    pub matched_domains: Vec<DomainName>,
}

impl MappingVerdict {
    pub fn verified(domains: Vec<DomainName>) -> Self {
        debug_assert!(!domains.is_empty());
        Self {
            decision: Decision::Verified,
            matched_domains: domains,
        }
    }

    pub fn confirm(domains: Vec<DomainName>) -> Self {
        Self {
            decision: Decision::UserConfirmRequired,
            matched_domains: domains,
        }
    }

    pub fn not_verified(reason: NotVerifiedReason) -> Self {
        Self {
            decision: Decision::NotVerified(reason),
            matched_domains: Vec::new(),
        }
    }

    pub fn is_verified(&self) -> bool {
        self.decision == Decision::Verified
    }

    pub fn reason(&self) -> Option<NotVerifiedReason> {
        match self.decision {
            Decision::NotVerified(r) => Some(r),
            _ => None,
        }
    }
}

/// Checks both directions of an app-to-domain claim, in order:
/// the app is entitled to the domain, the domain's association file lists
/// the package, the listed fingerprint matches the app's signing key, and
/// the file arrived over a valid HTTPS connection.
pub fn verify_bidirectional(
    app: &AppIdentity,
    domain: &DomainName,
    assoc: Option<&SiteAssociationFile>,
    fetched_over: &ConnectionSecurity,
) -> MappingVerdict {
    use NotVerifiedReason::*;
    if !app
        .entitled_domains
        .iter()
        .any(|d| d.same_registrable(domain))
    {
        return MappingVerdict::not_verified(NotEntitled);
    }
    let Some(assoc) = assoc else {
        return MappingVerdict::not_verified(NoAssociationFile);
    };
    let Some(entry) = assoc.entry(&app.package_id) else {
        return MappingVerdict::not_verified(AppNotListed);
    };
    if !entry.fingerprints.contains(&app.signing_fingerprint) {
        return MappingVerdict::not_verified(FingerprintMismatch);
    }
    if !fetched_over.is_authenticated() {
        return MappingVerdict::not_verified(InsecureTransport);
    }
    MappingVerdict::verified(vec![domain.clone()])
}

/// Fetches and parses `domain`'s association file for `platform`.
pub fn fetch_association(
    scene: &Scene,
    domain: &DomainName,
    platform: Platform,
) -> Option<Result<(SiteAssociationFile, ConnectionSecurity), AssociationError>> {
    let source = scene.association(domain, platform.well_known_path())?;
    Some(parse_association_file(platform, &source.text).map(|f| (f, source.served_over.clone())))
}

/// [`verify_bidirectional`] against the file `domain` serves in `scene`.
pub fn verify_in_scene(
    app: &AppIdentity,
    domain: &DomainName,
    scene: &Scene,
    platform: Platform,
) -> MappingVerdict {
    match fetch_association(scene, domain, platform) {
        None => verify_bidirectional(app, domain, None, &ConnectionSecurity::HttpsValid),
        Some(Ok((file, over))) => verify_bidirectional(app, domain, Some(&file), &over),
        Some(Err(_)) => {
            let entitled = verify_bidirectional(app, domain, None, &ConnectionSecurity::HttpsValid);
            if entitled.reason() == Some(NotVerifiedReason::NotEntitled) {
                entitled
            } else {
                MappingVerdict::not_verified(NotVerifiedReason::MalformedAssociationFile)
            }
        }
    }
}

/// Verified if any of `platforms` verifies; otherwise the first failure.
pub fn verify_any_platform(
    app: &AppIdentity,
    domain: &DomainName,
    scene: &Scene,
    platforms: &[Platform],
) -> MappingVerdict {
    let mut first = None;
    for &p in platforms {
        let v = verify_in_scene(app, domain, scene, p);
        if v.is_verified() {
            return v;
        }
        first.get_or_insert(v);
    }
    first.unwrap_or_else(|| MappingVerdict::not_verified(NotVerifiedReason::NoAssociationFile))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fingerprint;

    fn d(s: &str) -> DomainName {
        s.parse().unwrap()
    }

    fn dal_listing(package: &str, key: &str) -> SiteAssociationFile {
        SiteAssociationFile {
            platform: Platform::DalStyle,
            entries: vec![AssociationEntry {
                package_id: package.parse().unwrap(),
                fingerprints: vec![fingerprint(key).unwrap()],
            }],
        }
    }

    #[test]
    fn genuine_app_is_verified() {
        let app = AppIdentity::signed("com.walmart.android", "walmart-release")
            .unwrap()
            .entitled([d("walmart.com")]);
        let file = dal_listing("com.walmart.android", "walmart-release");
        let v = verify_bidirectional(
            &app,
            &d("walmart.com"),
            Some(&file),
            &ConnectionSecurity::HttpsValid,
        );
        assert_eq!(v, MappingVerdict::verified(vec![d("walmart.com")]));
    }

    #[test]
    fn look_alike_fails_on_fingerprint() {
        let app = AppIdentity::signed("com.walmart.android", "lookalike-key")
            .unwrap()
            .entitled([d("walmart.com")]);
        let file = dal_listing("com.walmart.android", "walmart-release");
        let v = verify_bidirectional(
            &app,
            &d("walmart.com"),
            Some(&file),
            &ConnectionSecurity::HttpsValid,
        );
        assert_eq!(v.reason(), Some(NotVerifiedReason::FingerprintMismatch));
        assert!(v.matched_domains.is_empty());
    }

    #[test]
    fn clauses_are_checked_in_order() {
        let app = AppIdentity::signed("com.a.b", "k").unwrap();
        let v = verify_bidirectional(&app, &d("a.com"), None, &ConnectionSecurity::Http);
        assert_eq!(v.reason(), Some(NotVerifiedReason::NotEntitled));
        let app = app.entitled([d("a.com")]);
        let v = verify_bidirectional(&app, &d("a.com"), None, &ConnectionSecurity::Http);
        assert_eq!(v.reason(), Some(NotVerifiedReason::NoAssociationFile));
        let other = dal_listing("com.x.y", "k");
        let v = verify_bidirectional(&app, &d("a.com"), Some(&other), &ConnectionSecurity::Http);
        assert_eq!(v.reason(), Some(NotVerifiedReason::AppNotListed));
        let listed = dal_listing("com.a.b", "k");
        let v = verify_bidirectional(&app, &d("a.com"), Some(&listed), &ConnectionSecurity::Http);
        assert_eq!(v.reason(), Some(NotVerifiedReason::InsecureTransport));
    }
}
