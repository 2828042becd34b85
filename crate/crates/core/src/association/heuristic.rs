use serde::{Deserialize, Serialize};

use super::{fetch_association, verify_any_platform, MappingVerdict, NotVerifiedReason, Platform};
use crate::model::{AppIdentity, DomainName, Fingerprint, PackageId, Scene};

/// Package components the substring heuristic never matches on, in addition
/// to public-suffix labels.
pub const SUBSTRING_SKIP: &[&str] = &["com", "android", "app"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub package_id: PackageId,
    pub domain: DomainName,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerprintEntry {
    pub package_id: PackageId,
    pub fingerprint: Fingerprint,
    pub domain: DomainName,
}

/// How a password manager decides which stored domains belong to an app.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MappingScheme {
    Bidirectional,
    StaticTable {
        table: Vec<TableEntry>,
    },
    PackageInversion {
        #[serde(default)]
        inverted_domains: Vec<DomainName>,
        #[serde(default)]
        alternate_mapping: Vec<TableEntry>,
    },
    Substring,
    Prefix,
    DalOnly,
    DevWebsite,
    Manual,
    AllowlistWithFingerprint {
        table: Vec<FingerprintEntry>,
    },
}

impl MappingScheme {
    pub fn id(&self) -> &'static str {
        match self {
            MappingScheme::Bidirectional => "bidirectional",
            MappingScheme::StaticTable { .. } => "static-table",
            MappingScheme::PackageInversion { .. } => "package-inversion",
            MappingScheme::Substring => "substring",
            MappingScheme::Prefix => "prefix",
            MappingScheme::DalOnly => "dal-only",
            MappingScheme::DevWebsite => "dev-website",
            MappingScheme::Manual => "manual",
            MappingScheme::AllowlistWithFingerprint { .. } => "allowlist-with-fingerprint",
        }
    }
}

/// The first two package components, reversed: `com.walmart.evil` gives
/// `["walmart", "com"]`.
pub fn inverted_prefix(package: &PackageId) -> Vec<&str> {
    let mut first_two: Vec<&str> = package.components().take(2).collect();
    first_two.reverse();
    first_two
}

/// True when the inverted prefix names `domain`'s registrable domain. The
/// prefix only has to cover the leading labels, so `co.bbc.news` matches
/// `bbc.co.uk`.
fn prefix_matches(prefix: &[&str], domain: &DomainName) -> bool {
    let registrable = domain.registrable();
    let labels = registrable.labels();
    labels.len() >= prefix.len() && labels.iter().zip(prefix).all(|(a, b)| a == b)
}

/// Package components eligible for substring matching.
pub fn substring_components(package: &PackageId) -> Vec<&str> {
    package
        .components()
        .filter(|c| !DomainName::is_public_suffix_label(c) && !SUBSTRING_SKIP.contains(c))
        .collect()
}

fn dedup(mut domains: Vec<DomainName>) -> Vec<DomainName> {
    let mut seen = Vec::new();
    domains.retain(|d| {
        if seen.contains(d) {
            false
        } else {
            seen.push(d.clone());
            true
        }
    });
    domains
}

fn matched_or(domains: Vec<DomainName>, reason: NotVerifiedReason) -> MappingVerdict {
    let domains = dedup(domains);
    if domains.is_empty() {
        MappingVerdict::not_verified(reason)
    } else {
        MappingVerdict::verified(domains)
    }
}

/// Applies a manager's mapping scheme. `known_domains` are the domains the
/// vault holds credentials for; `scene` supplies the vault's manual
/// mappings and, for `DalOnly` and `Bidirectional`, the association files.
///
/// A `Verified` decision here means the scheme accepts the mapping; only
/// `Bidirectional` and `DalOnly` back that with a signature check.
pub fn map_by_heuristic(
    scheme: &MappingScheme,
    app: &AppIdentity,
    known_domains: &[DomainName],
    scene: &Scene,
) -> MappingVerdict {
    use NotVerifiedReason::*;
    let package = &app.package_id;
    match scheme {
        MappingScheme::Bidirectional => {
            let mut first_failure = None;
            let mut matched = Vec::new();
            for domain in known_domains {
                let v = verify_any_platform(app, domain, scene, &Platform::ALL);
                if v.is_verified() {
                    matched.push(domain.clone());
                } else {
                    first_failure.get_or_insert(v);
                }
            }
            if matched.is_empty() {
                first_failure.unwrap_or_else(|| MappingVerdict::not_verified(NotEntitled))
            } else {
                MappingVerdict::verified(matched)
            }
        }
        MappingScheme::StaticTable { table } => matched_or(
            table
                .iter()
                .filter(|e| &e.package_id == package)
                .map(|e| e.domain.clone())
                .collect(),
            NotInTable,
        ),
        MappingScheme::PackageInversion {
            inverted_domains,
            alternate_mapping,
        } => {
            let alternate: Vec<DomainName> = alternate_mapping
                .iter()
                .filter(|e| &e.package_id == package)
                .map(|e| e.domain.clone())
                .collect();
            if !alternate.is_empty() {
                return MappingVerdict::verified(dedup(alternate));
            }
            let prefix = inverted_prefix(package);
            matched_or(
                known_domains
                    .iter()
                    .chain(inverted_domains)
                    .filter(|d| prefix_matches(&prefix, d))
                    .cloned()
                    .collect(),
                NoHeuristicMatch,
            )
        }
        MappingScheme::Prefix => {
            let prefix = inverted_prefix(package);
            matched_or(
                known_domains
                    .iter()
                    .filter(|d| prefix_matches(&prefix, d))
                    .cloned()
                    .collect(),
                NoHeuristicMatch,
            )
        }
        MappingScheme::Substring => {
            let parts = substring_components(package);
            matched_or(
                known_domains
                    .iter()
                    .filter(|d| {
                        let text = d.to_string();
                        parts.iter().any(|p| text.contains(p))
                    })
                    .cloned()
                    .collect(),
                NoHeuristicMatch,
            )
        }
        MappingScheme::DalOnly => {
            let mut any_file = false;
            let mut matched = Vec::new();
            for domain in known_domains {
                if let Some(fetched) = fetch_association(scene, domain, Platform::DalStyle) {
                    any_file = true;
                    if let Ok((file, over)) = fetched {
                        if over.is_authenticated() && file.lists(package, &app.signing_fingerprint)
                        {
                            matched.push(domain.clone());
                        }
                    }
                }
            }
            matched_or(
                matched,
                if any_file {
                    AppNotListed
                } else {
                    NoAssociationFile
                },
            )
        }
        MappingScheme::DevWebsite => match &app.store_metadata {
            Some(meta) => MappingVerdict::confirm(vec![meta.developer_website.clone()]),
            None => MappingVerdict::not_verified(NoDeveloperWebsite),
        },
        MappingScheme::Manual => {
            let mapped: Vec<DomainName> = scene
                .vault
                .manual_app_mappings
                .iter()
                .filter(|m| &m.package_id == package)
                .map(|m| m.domain.clone())
                .collect();
            if !mapped.is_empty() {
                MappingVerdict::verified(dedup(mapped))
            } else if known_domains.is_empty() {
                MappingVerdict::not_verified(NoHeuristicMatch)
            } else {
                MappingVerdict::confirm(known_domains.to_vec())
            }
        }
        MappingScheme::AllowlistWithFingerprint { table } => {
            let rows: Vec<&FingerprintEntry> =
                table.iter().filter(|e| &e.package_id == package).collect();
            if rows.is_empty() {
                return MappingVerdict::not_verified(NotInTable);
            }
            matched_or(
                rows.iter()
                    .filter(|e| e.fingerprint == app.signing_fingerprint)
                    .map(|e| e.domain.clone())
                    .collect(),
                FingerprintMismatch,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::Decision;
    use crate::model::{fingerprint, ManualMapping};

    fn d(s: &str) -> DomainName {
        s.parse().unwrap()
    }

    fn app(package: &str) -> AppIdentity {
        AppIdentity::signed(package, "attacker-key").unwrap()
    }

    fn run(scheme: &MappingScheme, app: &AppIdentity, known: &[&str]) -> MappingVerdict {
        let known: Vec<DomainName> = known.iter().map(|s| d(s)).collect();
        map_by_heuristic(scheme, app, &known, &Scene::default())
    }

    #[test]
    fn prefix_matches_first_two_components() {
        let v = run(
            &MappingScheme::Prefix,
            &app("com.walmart.evil"),
            &["walmart.com", "bank.org"],
        );
        assert_eq!(v, MappingVerdict::verified(vec![d("walmart.com")]));
        let v = run(
            &MappingScheme::Prefix,
            &app("org.walmart.evil"),
            &["walmart.com"],
        );
        assert_eq!(v.reason(), Some(NotVerifiedReason::NoHeuristicMatch));
        let v = run(&MappingScheme::Prefix, &app("co.bbc.news"), &["bbc.co.uk"]);
        assert!(v.is_verified());
    }

    #[test]
    fn substring_skips_common_components() {
        let v = run(
            &MappingScheme::Substring,
            &app("com.wal.evil"),
            &["walmart.com", "bank.org"],
        );
        assert_eq!(v, MappingVerdict::verified(vec![d("walmart.com")]));
        assert_eq!(
            substring_components(&"com.android.app.wal".parse().unwrap()),
            ["wal"]
        );
        let v = run(
            &MappingScheme::Substring,
            &app("com.android.app"),
            &["android.com"],
        );
        assert!(!v.is_verified());
    }

    #[test]
    fn package_inversion_with_alternate_precedence() {
        let scheme = MappingScheme::PackageInversion {
            inverted_domains: vec![d("facebook.com")],
            alternate_mapping: vec![TableEntry {
                package_id: "com.mobile.ign".parse().unwrap(),
                domain: d("ign.com"),
            }],
        };
        assert_eq!(
            run(&scheme, &app("com.walmart.evil"), &["walmart.com"]).matched_domains,
            [d("walmart.com")]
        );
        assert_eq!(
            run(&scheme, &app("com.facebook.katana"), &[]).matched_domains,
            [d("facebook.com")]
        );
        assert_eq!(
            run(&scheme, &app("com.mobile.ign"), &["mobile.com"]).matched_domains,
            [d("ign.com")]
        );
    }

    #[test]
    fn dev_website_requires_confirmation() {
        let liar = app("com.totally.legit").with_developer_website(d("walmart.com"));
        let v = run(&MappingScheme::DevWebsite, &liar, &["walmart.com"]);
        assert_eq!(v.decision, Decision::UserConfirmRequired);
        assert_eq!(v.matched_domains, [d("walmart.com")]);
        let v = run(
            &MappingScheme::DevWebsite,
            &app("com.totally.legit"),
            &["walmart.com"],
        );
        assert_eq!(v.reason(), Some(NotVerifiedReason::NoDeveloperWebsite));
    }

    #[test]
    fn static_table_and_allowlist() {
        let table = MappingScheme::StaticTable {
            table: vec![TableEntry {
                package_id: "com.walmart.android".parse().unwrap(),
                domain: d("walmart.com"),
            }],
        };
        assert!(run(&table, &app("com.walmart.android"), &[]).is_verified());
        assert_eq!(
            run(&table, &app("com.walmart.evil"), &["walmart.com"]).reason(),
            Some(NotVerifiedReason::NotInTable)
        );
        let allow = MappingScheme::AllowlistWithFingerprint {
            table: vec![FingerprintEntry {
                package_id: "com.walmart.android".parse().unwrap(),
                fingerprint: fingerprint("walmart-release").unwrap(),
                domain: d("walmart.com"),
            }],
        };
        let genuine = AppIdentity::signed("com.walmart.android", "walmart-release").unwrap();
        assert!(run(&allow, &genuine, &[]).is_verified());
        assert_eq!(
            run(&allow, &app("com.walmart.android"), &[]).reason(),
            Some(NotVerifiedReason::FingerprintMismatch)
        );
    }

    #[test]
    fn manual_mapping() {
        let mut scene = Scene::default();
        let known = [d("walmart.com"), d("bank.org")];
        let v = map_by_heuristic(&MappingScheme::Manual, &app("com.x.y"), &known, &scene);
        assert_eq!(v.decision, Decision::UserConfirmRequired);
        assert_eq!(v.matched_domains, known);
        scene.vault.manual_app_mappings.push(ManualMapping {
            package_id: "com.x.y".parse().unwrap(),
            domain: d("bank.org"),
        });
        let v = map_by_heuristic(&MappingScheme::Manual, &app("com.x.y"), &known, &scene);
        assert_eq!(v, MappingVerdict::verified(vec![d("bank.org")]));
    }

    #[test]
    fn scheme_json_shape() {
        let s: MappingScheme = serde_json::from_str(
            r#"{"kind":"static-table","table":[{"package_id":"com.a.b","domain":"a.com"}]}"#,
        )
        .unwrap();
        assert_eq!(s.id(), "static-table");
        let s: MappingScheme = serde_json::from_str(r#"{"kind":"prefix"}"#).unwrap();
        assert_eq!(s, MappingScheme::Prefix);
        assert!(serde_json::from_str::<MappingScheme>(r#"{"kind":"psychic"}"#).is_err());
    }
}
