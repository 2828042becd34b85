//! Simplified web documents: login forms, nested frames, and declarative
//! script events standing in for page and host-app JavaScript.
//!
//! Documents come from either a tiny HTML subset ([`parse_document`]) or a
//! structured [`DocumentSpec`]. Both resolve URLs against the document origin
//! the same way.

mod detect;
mod parse;
mod script;
mod submit;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ConnectionSecurity, DomainName, Origin, PackageId};

pub use detect::{classify_fields, detect_in_tree, detect_login_form, LoginFormMatch};
pub use parse::parse_document;
pub use script::{run_script_phase, scrape_form, Mount};
pub use submit::{is_placeholder, make_placeholder, submit_form, Substitution};

/// Maximum frame nesting depth below the top-level document.
pub const MAX_FRAME_DEPTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WebDocError {
    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported tag <{tag}> at {line}:{column}")]
    UnsupportedTag {
        tag: String,
        line: usize,
        column: usize,
    },
    #[error("invalid URL {0:?}")]
    BadUrl(String),
    #[error("no form with index {0} in document")]
    BadFormIndex(usize),
    #[error("no frame at path {0:?}")]
    BadFramePath(Vec<usize>),
    #[error("no substitution available for this submission")]
    MissingSubstitution,
    #[error("host-app script executed outside a WebView")]
    HostScriptOutsideWebView,
    #[error("frame nesting deeper than {MAX_FRAME_DEPTH}")]
    FrameDepth,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Username,
    Password,
    Text,
    Other(String),
}

impl FieldKind {
    pub fn is_text_entry(&self) -> bool {
        matches!(self, Self::Username | Self::Text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Field {
    pub name: String,
    pub kind: FieldKind,
    #[serde(default = "default_true")]
    pub visible: bool,
    #[serde(default)]
    pub autocomplete_off: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

fn default_true() -> bool {
    true
}

impl Field {
    pub fn new(name: &str, kind: FieldKind) -> Self {
        Self {
            name: name.to_owned(),
            kind,
            visible: true,
            autocomplete_off: false,
            value: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Get,
    Post,
}

/// An origin plus a path: where a form posts or a frame loads from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Endpoint {
    pub origin: Origin,
    pub path: String,
}

impl Endpoint {
    pub fn new(origin: Origin, path: &str) -> Self {
        Self {
            origin,
            path: normalize_path(path),
        }
    }

    /// Resolves `url` against the document origin `base`.
    ///
    /// Relative paths keep the base origin. An absolute `https://` URL on the
    /// base host inherits the base's certificate status; any other `https://`
    /// host is assumed to present a valid certificate.
    pub fn resolve(url: &str, base: &Origin) -> Result<Endpoint, WebDocError> {
        let url = url.trim();
        if url.is_empty() {
            return Ok(Endpoint::new(base.clone(), "/"));
        }
        if url.starts_with('/') && !url.starts_with("//") {
            return Ok(Endpoint::new(base.clone(), url));
        }
        let (security, rest) = if let Some(rest) = url.strip_prefix("https://") {
            (ConnectionSecurity::HttpsValid, rest)
        } else if let Some(rest) = url.strip_prefix("http://") {
            (ConnectionSecurity::Http, rest)
        } else {
            return Err(WebDocError::BadUrl(url.to_owned()));
        };
        let (host, path) = match rest.find('/') {
            Some(i) => (&rest[..i], &rest[i..]),
            None => (rest, "/"),
        };
        let domain = DomainName::parse(host).map_err(|_| WebDocError::BadUrl(url.to_owned()))?;
        let security =
            if domain == base.domain && security.kind() != crate::model::SecurityKind::Http {
                match base.security {
                    ConnectionSecurity::Http => security,
                    ref s => s.clone(),
                }
            } else {
                security
            };
        Ok(Endpoint::new(Origin::new(domain, security), path))
    }

    pub fn url(&self) -> String {
        format!(
            "{}://{}{}",
            self.origin.security.scheme(),
            self.origin.domain,
            self.path
        )
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.url())
    }
}

fn normalize_path(path: &str) -> String {
    if path.starts_with('/') {
        path.to_owned()
    } else {
        format!("/{path}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Form {
    pub action: Endpoint,
    pub method: Method,
    pub fields: Vec<Field>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub src: Endpoint,
    pub hidden: bool,
    pub document: Document,
}

impl Frame {
    pub fn origin(&self) -> &Origin {
        &self.document.origin
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub origin: Origin,
    pub forms: Vec<Form>,
    pub frames: Vec<Frame>,
    pub scripts: Vec<ScriptEvent>,
}

impl Document {
    pub fn empty(origin: Origin) -> Self {
        Self {
            origin,
            forms: Vec::new(),
            frames: Vec::new(),
            scripts: Vec::new(),
        }
    }

    /// The document at `path` (empty path = self).
    pub fn frame_doc(&self, path: &[usize]) -> Result<&Document, WebDocError> {
        let mut doc = self;
        for &i in path {
            doc = &doc
                .frames
                .get(i)
                .ok_or_else(|| WebDocError::BadFramePath(path.to_vec()))?
                .document;
        }
        Ok(doc)
    }

    pub fn frame_doc_mut(&mut self, path: &[usize]) -> Result<&mut Document, WebDocError> {
        let mut doc = self;
        for &i in path {
            doc = &mut doc
                .frames
                .get_mut(i)
                .ok_or_else(|| WebDocError::BadFramePath(path.to_vec()))?
                .document;
        }
        Ok(doc)
    }

    pub fn form(&self, form_ref: &FormRef) -> Result<&Form, WebDocError> {
        self.frame_doc(&form_ref.frame_path)?
            .forms
            .get(form_ref.form)
            .ok_or(WebDocError::BadFormIndex(form_ref.form))
    }

    /// True when the frame at `path` is not same-origin with this (top) document.
    pub fn is_cross_origin(&self, path: &[usize]) -> Result<bool, WebDocError> {
        let doc = self.frame_doc(path)?;
        Ok(!doc.origin.same_origin(&self.origin))
    }

    /// Nesting depth of the deepest frame.
    pub fn depth(&self) -> usize {
        self.frames
            .iter()
            .map(|f| 1 + f.document.depth())
            .max()
            .unwrap_or(0)
    }

    /// Pre-order walk over (frame path, document).
    pub fn walk(&self) -> Vec<(Vec<usize>, &Document)> {
        fn go<'a>(
            doc: &'a Document,
            path: &mut Vec<usize>,
            out: &mut Vec<(Vec<usize>, &'a Document)>,
        ) {
            out.push((path.clone(), doc));
            for (i, frame) in doc.frames.iter().enumerate() {
                path.push(i);
                go(&frame.document, path, out);
                path.pop();
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScriptPhase {
    OnLoad,
    PreFill,
    PostFill,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Injector {
    #[default]
    Page,
    HostApp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptAction {
    RewriteAction { form: usize, to: Endpoint },
    ScrapeFields { form: usize },
    ExfiltrateTo(Origin),
    PostToBridge { channel: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptEvent {
    pub phase: ScriptPhase,
    pub action: ScriptAction,
    pub injected_by: Injector,
}

/// Identifies a form anywhere in a document tree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct FormRef {
    #[serde(default, rename = "frame")]
    pub frame_path: Vec<usize>,
    pub form: usize,
}

impl FormRef {
    pub fn top(form: usize) -> Self {
        Self {
            frame_path: Vec::new(),
            form,
        }
    }

    pub fn field(&self, field: usize) -> FieldRef {
        FieldRef {
            frame_path: self.frame_path.clone(),
            form: self.form,
            field,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldRef {
    pub frame_path: Vec<usize>,
    pub form: usize,
    pub field: usize,
}

impl FieldRef {
    pub fn form_ref(&self) -> FormRef {
        FormRef {
            frame_path: self.frame_path.clone(),
            form: self.form,
        }
    }
}

/// Values currently visible in form fields, keyed by field identity. These
/// are exactly what page or host scripts can observe.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FillState {
    values: BTreeMap<FieldRef, String>,
}

impl FillState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, field: FieldRef, value: impl Into<String>) {
        self.values.insert(field, value.into());
    }

    pub fn get(&self, field: &FieldRef) -> Option<&str> {
        self.values.get(field).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = (&FieldRef, &str)> {
        self.values.iter().map(|(k, v)| (k, v.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExfilChannel {
    /// Script-initiated network request to an origin.
    Network(Origin),
    /// Message posted to a native bridge handler exposed by the hosting app.
    Bridge { channel: String, host: PackageId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exfiltration {
    pub source: Origin,
    pub injected_by: Injector,
    pub channel: ExfilChannel,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutboundRequest {
    pub destination: Endpoint,
    pub method: Method,
    pub body_params: BTreeMap<String, String>,
    pub url_params: BTreeMap<String, String>,
}

impl OutboundRequest {
    pub fn all_values(&self) -> impl Iterator<Item = &str> {
        self.body_params
            .values()
            .chain(self.url_params.values())
            .map(String::as_str)
    }
}

// ---- structured documents ---------------------------------------------------

/// Declarative document description; URLs stay unresolved strings until the
/// document is mounted at an origin.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentSpec {
    #[serde(default)]
    pub forms: Vec<FormSpec>,
    #[serde(default)]
    pub frames: Vec<FrameSpec>,
    #[serde(default)]
    pub scripts: Vec<ScriptSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormSpec {
    #[serde(default)]
    pub action: String,
    #[serde(default = "default_method")]
    pub method: Method,
    pub fields: Vec<Field>,
}

// HTML forms default to GET.
fn default_method() -> Method {
    Method::Get
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub src: String,
    #[serde(default)]
    pub hidden: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawScriptSpec")]
pub struct ScriptSpec {
    pub phase: ScriptPhase,
    #[serde(flatten)]
    pub action: ScriptActionSpec,
    #[serde(default)]
    pub injected_by: Injector,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScriptSpec {
    phase: ScriptPhase,
    #[serde(rename = "do")]
    action: String,
    #[serde(default)]
    form: Option<usize>,
    #[serde(default)]
    to: Option<String>,
    #[serde(default)]
    channel: Option<String>,
    #[serde(default)]
    injected_by: Injector,
}

impl TryFrom<RawScriptSpec> for ScriptSpec {
    type Error = String;
    fn try_from(raw: RawScriptSpec) -> Result<Self, Self::Error> {
        let need = |v: Option<String>, key: &str| {
            v.ok_or_else(|| format!("script action {:?} requires {key:?}", raw.action))
        };
        let unexpected = |present: bool, key: &str| {
            if present {
                Err(format!(
                    "script action {:?} does not take {key:?}",
                    raw.action
                ))
            } else {
                Ok(())
            }
        };
        let action = match raw.action.as_str() {
            "rewrite-action" => {
                unexpected(raw.channel.is_some(), "channel")?;
                ScriptActionSpec::RewriteAction {
                    form: raw.form.unwrap_or(0),
                    to: need(raw.to.clone(), "to")?,
                }
            }
            "scrape" => {
                unexpected(raw.to.is_some(), "to")?;
                unexpected(raw.channel.is_some(), "channel")?;
                ScriptActionSpec::Scrape {
                    form: raw.form.unwrap_or(0),
                }
            }
            "exfiltrate" => {
                unexpected(raw.form.is_some(), "form")?;
                unexpected(raw.channel.is_some(), "channel")?;
                ScriptActionSpec::Exfiltrate {
                    to: need(raw.to.clone(), "to")?,
                }
            }
            "post-to-bridge" => {
                unexpected(raw.form.is_some(), "form")?;
                unexpected(raw.to.is_some(), "to")?;
                ScriptActionSpec::PostToBridge {
                    channel: need(raw.channel.clone(), "channel")?,
                }
            }
            other => return Err(format!("unknown script action {other:?}")),
        };
        Ok(ScriptSpec {
            phase: raw.phase,
            action,
            injected_by: raw.injected_by,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "do", rename_all = "kebab-case")]
pub enum ScriptActionSpec {
    RewriteAction {
        #[serde(default)]
        form: usize,
        to: String,
    },
    Scrape {
        #[serde(default)]
        form: usize,
    },
    Exfiltrate {
        to: String,
    },
    PostToBridge {
        channel: String,
    },
}

impl ScriptSpec {
    pub fn resolve(&self, base: &Origin) -> Result<ScriptEvent, WebDocError> {
        let action = match &self.action {
            ScriptActionSpec::RewriteAction { form, to } => ScriptAction::RewriteAction {
                form: *form,
                to: Endpoint::resolve(to, base)?,
            },
            ScriptActionSpec::Scrape { form } => ScriptAction::ScrapeFields { form: *form },
            ScriptActionSpec::Exfiltrate { to } => {
                ScriptAction::ExfiltrateTo(Endpoint::resolve(to, base)?.origin)
            }
            ScriptActionSpec::PostToBridge { channel } => ScriptAction::PostToBridge {
                channel: channel.clone(),
            },
        };
        Ok(ScriptEvent {
            phase: self.phase,
            action,
            injected_by: self.injected_by,
        })
    }
}

impl DocumentSpec {
    /// Mounts the description at `origin`. Frame documents are left empty
    /// (origin taken from their URL) until a scene resolves them.
    pub fn resolve(&self, origin: &Origin) -> Result<Document, WebDocError> {
        let forms = self
            .forms
            .iter()
            .map(|f| {
                Ok(Form {
                    action: Endpoint::resolve(&f.action, origin)?,
                    method: f.method,
                    fields: f.fields.clone(),
                })
            })
            .collect::<Result<Vec<_>, WebDocError>>()?;
        let frames = self
            .frames
            .iter()
            .map(|f| {
                let src = Endpoint::resolve(&f.src, origin)?;
                Ok(Frame {
                    document: Document::empty(src.origin.clone()),
                    src,
                    hidden: f.hidden,
                })
            })
            .collect::<Result<Vec<_>, WebDocError>>()?;
        let scripts = self
            .scripts
            .iter()
            .map(|s| s.resolve(origin))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Document {
            origin: origin.clone(),
            forms,
            frames,
            scripts,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_resolution() {
        let base = Origin::https("walmart.com");
        let e = Endpoint::resolve("/login", &base).unwrap();
        assert_eq!(e.url(), "https://walmart.com/login");
        let e = Endpoint::resolve("https://evil.com", &base).unwrap();
        assert_eq!(e.url(), "https://evil.com/");
        let e = Endpoint::resolve("http://walmart.com/x", &base).unwrap();
        assert_eq!(e.origin.security, ConnectionSecurity::Http);
        assert!(Endpoint::resolve("ftp://x.com/", &base).is_err());
        assert!(Endpoint::resolve("//x.com/", &base).is_err());
    }

    #[test]
    fn same_host_https_inherits_bad_cert() {
        let base = Origin::new(
            DomainName::parse("walmart.com").unwrap(),
            ConnectionSecurity::HttpsInvalidCert("self-signed".into()),
        );
        let e = Endpoint::resolve("https://walmart.com/login", &base).unwrap();
        assert!(e.origin.same_origin(&base));
        let e = Endpoint::resolve("https://evil.com/login", &base).unwrap();
        assert_eq!(e.origin.security, ConnectionSecurity::HttpsValid);
    }

    #[test]
    fn script_spec_json_shape() {
        let spec: ScriptSpec = serde_json::from_str(
            r#"{"phase":"post-fill","do":"post-to-bridge","channel":"callbackHandler","injected_by":"host-app"}"#,
        )
        .unwrap();
        assert_eq!(spec.injected_by, Injector::HostApp);
        let ev = spec.resolve(&Origin::https("walmart.com")).unwrap();
        assert_eq!(
            ev.action,
            ScriptAction::PostToBridge {
                channel: "callbackHandler".into()
            }
        );
        let back: ScriptSpec =
            serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        let stray = r#"{"phase":"post-fill","do":"scrape","channel":"x"}"#;
        assert!(serde_json::from_str::<ScriptSpec>(stray).is_err());
        let unknown = r#"{"phase":"post-fill","do":"scrape","color":"red"}"#;
        assert!(serde_json::from_str::<ScriptSpec>(unknown).is_err());
    }
}
