//! The scene file: a complete simulated world in one JSON document.
//!
//! Loading goes through a string-typed raw layer first. Structural
//! problems are `Schema` errors, bad values are `Invariant` errors and
//! dangling references are `Reference` errors. The format is documented in
//! `docs/scene-schema-v1.md`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::app::{fingerprint, AppIdentity, Fingerprint, PackageId, StoreMetadata};
use super::credential::{Credential, CredentialId, ManualMapping, Secret, Vault};
use super::domain::{ConnectionSecurity, DomainName, Origin};
use super::UserAgent;
use crate::webdoc::{self, Document, DocumentSpec, Endpoint, WebDocError, MAX_FRAME_DEPTH};

pub const APPLE_ASSOCIATION_PATH: &str = "/.well-known/apple-app-site-association";
pub const DAL_ASSOCIATION_PATH: &str = "/.well-known/assetlinks.json";

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene schema error: {0}")]
    Schema(String),
    #[error("scene invariant violated: {0}")]
    Invariant(String),
    #[error("dangling reference: {0}")]
    Reference(String),
    #[error("document {domain}{path}: {source}")]
    Document {
        domain: String,
        path: String,
        #[source]
        source: WebDocError,
    },
}

/// An association file as served by a domain, kept as raw text. It may be
/// malformed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssociationSource {
    #[serde(default = "https_valid")]
    pub served_over: ConnectionSecurity,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DocumentBody {
    Html(String),
    Structured(DocumentSpec),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(into = "RawDocumentSource")]
pub struct DocumentSource {
    pub served_over: ConnectionSecurity,
    pub body: DocumentBody,
}

impl DocumentSource {
    pub fn html(served_over: ConnectionSecurity, html: impl Into<String>) -> Self {
        Self {
            served_over,
            body: DocumentBody::Html(html.into()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DomainEntry {
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub association_files: BTreeMap<String, AssociationSource>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub documents: BTreeMap<String, DocumentSource>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Scene {
    pub vault: Vault,
    pub apps: Vec<AppIdentity>,
    pub domains: BTreeMap<DomainName, DomainEntry>,
    pub user_agent: UserAgent,
}

impl Default for Scene {
    fn default() -> Self {
        Self {
            vault: Vault::default(),
            apps: Vec::new(),
            domains: BTreeMap::new(),
            user_agent: UserAgent::AlwaysApprove,
        }
    }
}

fn https_valid() -> ConnectionSecurity {
    ConnectionSecurity::HttpsValid
}

impl Scene {
    /// Every app installed under `package`, in declaration order.
    pub fn apps_with_package<'a>(
        &'a self,
        package: &'a PackageId,
    ) -> impl Iterator<Item = &'a AppIdentity> {
        self.apps.iter().filter(move |a| &a.package_id == package)
    }

    pub fn association(&self, domain: &DomainName, path: &str) -> Option<&AssociationSource> {
        self.domains.get(domain)?.association_files.get(path)
    }

    pub fn document_source(&self, domain: &DomainName, path: &str) -> Option<&DocumentSource> {
        self.domains.get(domain)?.documents.get(path)
    }

    /// Loads the document at `domain` + `path` with the security it is
    /// declared to be served over, resolving frames recursively.
    pub fn document(&self, domain: &DomainName, path: &str) -> Result<Document, SceneError> {
        let source = self
            .document_source(domain, path)
            .ok_or_else(|| SceneError::Reference(format!("no document {domain}{path} in scene")))?;
        let origin = Origin::new(domain.clone(), source.served_over.clone());
        self.mount(source, &origin, domain, path, 0)
    }

    /// Loads the document an endpoint points at, mounted at the endpoint's
    /// own origin (which is how a frame sees it).
    pub fn document_at(&self, endpoint: &Endpoint) -> Result<Document, SceneError> {
        self.load_frame(endpoint, 0)
    }

    fn load_frame(&self, endpoint: &Endpoint, depth: usize) -> Result<Document, SceneError> {
        let domain = &endpoint.origin.domain;
        let source = self
            .document_source(domain, &endpoint.path)
            .ok_or_else(|| {
                SceneError::Reference(format!(
                    "frame source {endpoint} is not a document in the scene"
                ))
            })?;
        self.mount(source, &endpoint.origin, domain, &endpoint.path, depth)
    }

    fn mount(
        &self,
        source: &DocumentSource,
        origin: &Origin,
        domain: &DomainName,
        path: &str,
        depth: usize,
    ) -> Result<Document, SceneError> {
        let doc_err = |source: WebDocError| SceneError::Document {
            domain: domain.to_string(),
            path: path.to_owned(),
            source,
        };
        if depth > MAX_FRAME_DEPTH {
            return Err(doc_err(WebDocError::FrameDepth));
        }
        let mut doc = match &source.body {
            DocumentBody::Html(html) => webdoc::parse_document(html, origin),
            DocumentBody::Structured(spec) => spec.resolve(origin),
        }
        .map_err(doc_err)?;
        for frame in &mut doc.frames {
            frame.document = self.load_frame(&frame.src, depth + 1)?;
        }
        Ok(doc)
    }
}

// ---- raw layer --------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScene {
    #[serde(default)]
    vault: RawVault,
    #[serde(default)]
    apps: Vec<RawApp>,
    #[serde(default)]
    domains: BTreeMap<String, RawDomainEntry>,
    #[serde(default = "default_user")]
    user_agent: UserAgent,
}

fn default_user() -> UserAgent {
    UserAgent::AlwaysApprove
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawVault {
    #[serde(default)]
    credentials: Vec<RawCredential>,
    #[serde(default)]
    manual_app_mappings: Vec<RawMapping>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCredential {
    id: String,
    username: String,
    password: String,
    domain: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMapping {
    package_id: String,
    domain: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawApp {
    package_id: String,
    #[serde(default)]
    signing_fingerprint: Option<String>,
    #[serde(default)]
    signing_key: Option<String>,
    #[serde(default)]
    entitled_domains: Vec<String>,
    #[serde(default)]
    store_metadata: Option<RawStoreMetadata>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStoreMetadata {
    developer_website: String,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDomainEntry {
    #[serde(default)]
    association_files: BTreeMap<String, AssociationSource>,
    #[serde(default)]
    documents: BTreeMap<String, RawDocumentSource>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocumentSource {
    #[serde(default = "https_valid")]
    served_over: ConnectionSecurity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    html: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    structured: Option<DocumentSpec>,
}

impl From<DocumentSource> for RawDocumentSource {
    fn from(src: DocumentSource) -> Self {
        let (html, structured) = match src.body {
            DocumentBody::Html(h) => (Some(h), None),
            DocumentBody::Structured(s) => (None, Some(s)),
        };
        RawDocumentSource {
            served_over: src.served_over,
            html,
            structured,
        }
    }
}

fn invariant(what: impl std::fmt::Display) -> SceneError {
    SceneError::Invariant(what.to_string())
}

fn domain(raw: &str) -> Result<DomainName, SceneError> {
    DomainName::parse(raw).map_err(|e| invariant(format!("{raw:?}: {e}")))
}

fn package(raw: &str) -> Result<PackageId, SceneError> {
    PackageId::parse(raw).map_err(invariant)
}

/// Parses and fully validates a scene.
pub fn load_scene(source: &str) -> Result<Scene, SceneError> {
    let raw: RawScene =
        serde_json::from_str(source).map_err(|e| SceneError::Schema(e.to_string()))?;

    let mut credentials = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for c in raw.vault.credentials {
        if !seen_ids.insert(c.id.clone()) {
            return Err(invariant(format!("duplicate credential id {:?}", c.id)));
        }
        credentials.push(Credential {
            mapped_domain: domain(&c.domain)?,
            id: CredentialId(c.id),
            username: c.username,
            password: Secret::new(c.password),
        });
    }

    let mut apps: Vec<AppIdentity> = Vec::new();
    for a in raw.apps {
        let package_id = package(&a.package_id)?;
        let signing_fingerprint = match (a.signing_fingerprint, a.signing_key) {
            (Some(fp), None) => Fingerprint::parse(&fp).map_err(invariant)?,
            (None, Some(label)) => fingerprint(&label).map_err(invariant)?,
            _ => {
                return Err(SceneError::Schema(format!(
                "app {package_id} must declare exactly one of signing_fingerprint or signing_key"
            )))
            }
        };
        let app = AppIdentity {
            package_id,
            signing_fingerprint,
            entitled_domains: a
                .entitled_domains
                .iter()
                .map(|d| domain(d))
                .collect::<Result<_, _>>()?,
            store_metadata: a
                .store_metadata
                .map(|m| {
                    Ok::<_, SceneError>(StoreMetadata {
                        developer_website: domain(&m.developer_website)?,
                    })
                })
                .transpose()?,
        };
        if apps.iter().any(|other| other.same_identity(&app)) {
            return Err(invariant(format!("app {app} declared twice")));
        }
        apps.push(app);
    }

    let mut manual_app_mappings = Vec::new();
    for m in raw.vault.manual_app_mappings {
        let package_id = package(&m.package_id)?;
        if !apps.iter().any(|a| a.package_id == package_id) {
            return Err(SceneError::Reference(format!(
                "manual mapping names package {package_id} which is not in the scene"
            )));
        }
        manual_app_mappings.push(ManualMapping {
            package_id,
            domain: domain(&m.domain)?,
        });
    }

    let mut domains = BTreeMap::new();
    for (name, entry) in raw.domains {
        let name = domain(&name)?;
        for path in entry.association_files.keys() {
            if path != APPLE_ASSOCIATION_PATH && path != DAL_ASSOCIATION_PATH {
                return Err(invariant(format!(
                    "{name}{path} is not a well-known association file path"
                )));
            }
        }
        let mut documents = BTreeMap::new();
        for (path, doc) in entry.documents {
            if !path.starts_with('/') {
                return Err(invariant(format!(
                    "document path {path:?} must start with '/'"
                )));
            }
            let body = match (doc.html, doc.structured) {
                (Some(h), None) => DocumentBody::Html(h),
                (None, Some(s)) => DocumentBody::Structured(s),
                _ => {
                    return Err(SceneError::Schema(format!(
                        "document {name}{path} must have exactly one of html or structured"
                    )))
                }
            };
            documents.insert(
                path,
                DocumentSource {
                    served_over: doc.served_over,
                    body,
                },
            );
        }
        domains.insert(
            name,
            DomainEntry {
                association_files: entry.association_files,
                documents,
            },
        );
    }

    let scene = Scene {
        vault: Vault {
            credentials,
            manual_app_mappings,
        },
        apps,
        domains,
        user_agent: raw.user_agent,
    };
    validate_documents(&scene)?;
    Ok(scene)
}

fn validate_documents(scene: &Scene) -> Result<(), SceneError> {
    for (name, entry) in &scene.domains {
        for path in entry.documents.keys() {
            let doc = scene.document(name, path)?;
            for (_, sub) in doc.walk() {
                for form in &sub.forms {
                    if !scene.domains.contains_key(&form.action.origin.domain) {
                        return Err(SceneError::Reference(format!(
                            "form action {} in {name}{path} points at an undeclared domain",
                            form.action
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Canonical JSON rendering; `load_scene(&render_scene(s))` equals `s`.
/// Passwords are written out in clear.
pub fn render_scene(scene: &Scene) -> String {
    serde_json::to_string_pretty(scene).expect("scene serialization is infallible")
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEY_A: &str = "8a197f6f60e55bf203457b7e3a0f7aad287a1740cc672d01f2c588770a2c6a2b";

    #[test]
    fn empty_scene() {
        let scene = load_scene(
            r#"{"vault":{"credentials":[]},"apps":[],"domains":{},"user_agent":"always-approve"}"#,
        )
        .unwrap();
        assert!(scene.vault.credentials.is_empty());
        assert!(scene.apps.is_empty());
    }

    #[test]
    fn squatting_app_scene_is_valid() {
        let src = format!(
            r#"{{
              "vault": {{"credentials": [{{"id":"w1","username":"alice","password":"pw","domain":"walmart.com"}}]}},
              "apps": [{{"package_id":"com.walmart.evil","signing_fingerprint":"{KEY_A}"}}],
              "domains": {{"walmart.com": {{}}}},
              "user_agent": "always-deny"
            }}"#
        );
        let scene = load_scene(&src).unwrap();
        assert_eq!(scene.apps[0].package_id.as_str(), "com.walmart.evil");
        assert_eq!(scene.vault.credentials.len(), 1);
        assert_eq!(scene.user_agent, UserAgent::AlwaysDeny);
    }

    #[test]
    fn short_fingerprint_is_an_invariant_error() {
        let src = format!(
            r#"{{"apps": [{{"package_id":"com.walmart.evil","signing_fingerprint":"{}"}}]}}"#,
            &KEY_A[..63]
        );
        assert!(matches!(load_scene(&src), Err(SceneError::Invariant(_))));
    }

    #[test]
    fn error_classes() {
        assert!(matches!(
            load_scene(r#"{"vault":{},"extra":1}"#),
            Err(SceneError::Schema(_))
        ));
        assert!(matches!(load_scene("[1,2]"), Err(SceneError::Schema(_))));
        let dangling =
            r#"{"vault":{"manual_app_mappings":[{"package_id":"com.a.b","domain":"a.com"}]}}"#;
        assert!(matches!(
            load_scene(dangling),
            Err(SceneError::Reference(_))
        ));
        let dup = r#"{"vault":{"credentials":[
            {"id":"x","username":"u","password":"p","domain":"a.com"},
            {"id":"x","username":"u","password":"p","domain":"b.com"}]}}"#;
        assert!(matches!(load_scene(dup), Err(SceneError::Invariant(_))));
        let bad_html = r#"{"domains":{"a.com":{"documents":{"/":{"html":"<div>"}}}}}"#;
        assert!(matches!(
            load_scene(bad_html),
            Err(SceneError::Document { .. })
        ));
        let missing_frame = r#"{"domains":{"a.com":{"documents":{"/":{"html":"<iframe src=\"/nope\"></iframe>"}}}}}"#;
        assert!(matches!(
            load_scene(missing_frame),
            Err(SceneError::Reference(_))
        ));
        let undeclared_action = r#"{"domains":{"a.com":{"documents":{"/":{"html":"<form action=\"https://b.com/x\"><input name=u></form>"}}}}}"#;
        assert!(matches!(
            load_scene(undeclared_action),
            Err(SceneError::Reference(_))
        ));
    }

    #[test]
    fn self_framing_document_hits_depth_limit() {
        let src =
            r#"{"domains":{"a.com":{"documents":{"/":{"html":"<iframe src=\"/\"></iframe>"}}}}}"#;
        match load_scene(src) {
            Err(SceneError::Document { source, .. }) => assert_eq!(source, WebDocError::FrameDepth),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn frames_are_resolved_and_round_trip_holds() {
        let src = r#"{
          "apps": [{"package_id":"com.walmart.android","signing_key":"walmart-release","entitled_domains":["walmart.com"]}],
          "domains": {
            "evil.com": {"documents": {"/": {"html": "<iframe src=\"https://walmart.com/login\" hidden></iframe>"}}},
            "walmart.com": {
              "association_files": {"/.well-known/assetlinks.json": {"text": "[]"}},
              "documents": {
                "/login": {"html": "<form method=post><input name=u><input type=password name=p></form>"},
                "/login-http": {"served_over": "http", "structured": {"forms": [{"method": "post", "fields": [
                    {"name": "u", "kind": "text"}, {"name": "p", "kind": "password"}]}]}}
              }
            }
          }
        }"#;
        let scene = load_scene(src).unwrap();
        let top = scene.document(&"evil.com".parse().unwrap(), "/").unwrap();
        assert_eq!(top.frames[0].document.forms.len(), 1);
        assert!(top.is_cross_origin(&[0]).unwrap());
        let http = scene
            .document(&"walmart.com".parse().unwrap(), "/login-http")
            .unwrap();
        assert_eq!(http.origin.security, ConnectionSecurity::Http);
        let again = load_scene(&render_scene(&scene)).unwrap();
        assert_eq!(again, scene);
    }
}
