use serde::Deserialize;
use serde_json::Value;

use super::AssociationError;
use crate::model::{
    fingerprint, Fingerprint, PackageId, APPLE_ASSOCIATION_PATH, DAL_ASSOCIATION_PATH,
};

/// The login-sharing relation a DAL statement must carry to count.
pub const DAL_LOGIN_RELATION: &str = "delegate_permission/common.get_login_creds";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Platform {
    AppleStyle,
    DalStyle,
}

impl Platform {
    pub const ALL: [Platform; 2] = [Platform::AppleStyle, Platform::DalStyle];

    pub fn well_known_path(self) -> &'static str {
        match self {
            Platform::AppleStyle => APPLE_ASSOCIATION_PATH,
            Platform::DalStyle => DAL_ASSOCIATION_PATH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationEntry {
    pub package_id: PackageId,
    pub fingerprints: Vec<Fingerprint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteAssociationFile {
    pub platform: Platform,
    pub entries: Vec<AssociationEntry>,
}

impl SiteAssociationFile {
    pub fn entry(&self, package: &PackageId) -> Option<&AssociationEntry> {
        self.entries.iter().find(|e| &e.package_id == package)
    }

    /// True when the file lists `package` with `fp` among its fingerprints.
    pub fn lists(&self, package: &PackageId, fp: &Fingerprint) -> bool {
        self.entry(package)
            .is_some_and(|e| e.fingerprints.contains(fp))
    }
}

/// Normalizes a certificate fingerprint: colons removed, lowercased, and
/// required to be 64 hex digits.
pub fn normalize_fingerprint(raw: &str) -> Result<Fingerprint, AssociationError> {
    let cleaned: String = raw
        .chars()
        .filter(|c| *c != ':')
        .collect::<String>()
        .to_ascii_lowercase();
    Fingerprint::parse(&cleaned).map_err(|_| AssociationError::BadFingerprint(raw.to_owned()))
}

pub fn parse_association_file(
    platform: Platform,
    text: &str,
) -> Result<SiteAssociationFile, AssociationError> {
    let entries = match platform {
        Platform::AppleStyle => parse_apple(text)?,
        Platform::DalStyle => parse_dal(text)?,
    };
    Ok(SiteAssociationFile { platform, entries })
}

fn schema(e: impl std::fmt::Display) -> AssociationError {
    AssociationError::Schema(e.to_string())
}

#[derive(Deserialize)]
struct AppleFile {
    #[serde(default)]
    webcredentials: Option<AppleApps>,
    #[serde(default)]
    applinks: Option<AppleLinks>,
    #[serde(flatten)]
    _other: serde_json::Map<String, Value>,
}

#[derive(Deserialize)]
struct AppleApps {
    apps: Vec<String>,
}

#[derive(Deserialize)]
struct AppleLinks {
    #[serde(default)]
    details: Vec<AppleDetail>,
    #[serde(flatten)]
    _other: serde_json::Map<String, Value>,
}

#[derive(Deserialize)]
struct AppleDetail {
    #[serde(rename = "appID")]
    app_id: String,
    #[serde(flatten)]
    _other: serde_json::Map<String, Value>,
}

/// Splits `TEAMID.package` at the first dot. The team id is treated as the
/// signing key label, so the entry's fingerprint is `fingerprint(TEAMID)`.
fn split_app_id(app_id: &str) -> Result<(PackageId, Fingerprint), AssociationError> {
    let (team, package) = app_id
        .split_once('.')
        .ok_or_else(|| schema(format!("appID {app_id:?} is not TEAMID.package")))?;
    let fp =
        fingerprint(team).map_err(|_| schema(format!("appID {app_id:?} has an empty team id")))?;
    let package = PackageId::parse(package).map_err(schema)?;
    Ok((package, fp))
}

fn parse_apple(text: &str) -> Result<Vec<AssociationEntry>, AssociationError> {
    let file: AppleFile = serde_json::from_str(text).map_err(schema)?;
    let mut entries: Vec<AssociationEntry> = Vec::new();
    let sections = [
        file.webcredentials.map(|w| w.apps).unwrap_or_default(),
        file.applinks
            .map(|l| l.details.into_iter().map(|d| d.app_id).collect())
            .unwrap_or_default(),
    ];
    for section in sections {
        let mut in_section: Vec<PackageId> = Vec::new();
        for app_id in section {
            let (package, fp) = split_app_id(&app_id)?;
            if in_section.contains(&package) {
                return Err(AssociationError::DuplicatePackage(package.to_string()));
            }
            in_section.push(package.clone());
            match entries.iter().find(|e| e.package_id == package) {
                // The same app listed in both sections is normal.
                Some(existing) if existing.fingerprints == [fp.clone()] => {}
                Some(_) => return Err(AssociationError::DuplicatePackage(package.to_string())),
                None => entries.push(AssociationEntry {
                    package_id: package,
                    fingerprints: vec![fp],
                }),
            }
        }
    }
    Ok(entries)
}

#[derive(Deserialize)]
struct DalStatement {
    relation: Vec<String>,
    target: DalTarget,
}

#[derive(Deserialize)]
struct DalTarget {
    namespace: String,
    #[serde(default)]
    package_name: Option<String>,
    #[serde(default)]
    sha256_cert_fingerprints: Option<Vec<String>>,
    #[serde(flatten)]
    _other: serde_json::Map<String, Value>,
}

fn parse_dal(text: &str) -> Result<Vec<AssociationEntry>, AssociationError> {
    let statements: Vec<DalStatement> = serde_json::from_str(text).map_err(schema)?;
    let mut entries: Vec<AssociationEntry> = Vec::new();
    for st in statements {
        if st.target.namespace != "android_app" {
            continue;
        }
        let (Some(name), Some(fps)) = (st.target.package_name, st.target.sha256_cert_fingerprints)
        else {
            return Err(schema(
                "android_app target requires package_name and sha256_cert_fingerprints",
            ));
        };
        let package = PackageId::parse(&name).map_err(schema)?;
        let fingerprints = fps
            .iter()
            .map(|f| normalize_fingerprint(f))
            .collect::<Result<Vec<_>, _>>()?;
        if !st.relation.iter().any(|r| r == DAL_LOGIN_RELATION) {
            continue;
        }
        if entries.iter().any(|e| e.package_id == package) {
            return Err(AssociationError::DuplicatePackage(package.to_string()));
        }
        entries.push(AssociationEntry {
            package_id: package,
            fingerprints,
        });
    }
    Ok(entries)
}
