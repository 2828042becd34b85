//! The autofill ceremony engine: four framework policies deciding whether a
//! user gate is needed, which credentials are offered, and how filled values
//! are protected until they leave the device.

mod ceremony;
mod fill;
mod policy;
mod profile;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::association::{MappingVerdict, NotVerifiedReason};
use crate::model::{AppIdentity, Credential, DomainName, Origin};
use crate::webdoc::{Document, Field, FormRef, ScriptEvent, WebDocError};

pub use ceremony::{run_ceremony, Capture, CaptureVia, CeremonyLog, Destination};
pub use fill::{
    complete_transmission, execute_fill, execute_fill_with_rng, FilledState, NativeFill, Refusal,
    Transmission,
};
pub use policy::suggest;
pub use profile::{
    manager_ids, preset, presets, IframePolicy, ManagerProfile, PresetError, TransportPolicy,
    WebViewPolicy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameworkId {
    IosExtensions,
    IosPasswordAutofill,
    AndroidAutofillService,
    SecureModel,
}

impl FrameworkId {
    pub const ALL: [FrameworkId; 4] = [
        FrameworkId::IosPasswordAutofill,
        FrameworkId::IosExtensions,
        FrameworkId::AndroidAutofillService,
        FrameworkId::SecureModel,
    ];

    pub fn id(self) -> &'static str {
        match self {
            FrameworkId::IosExtensions => "ios-extensions",
            FrameworkId::IosPasswordAutofill => "ios-password-autofill",
            FrameworkId::AndroidAutofillService => "android-autofill-service",
            FrameworkId::SecureModel => "secure-model",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            FrameworkId::IosExtensions => "iOS App Extensions",
            FrameworkId::IosPasswordAutofill => "iOS Password AutoFill",
            FrameworkId::AndroidAutofillService => "Android Autofill Service",
            FrameworkId::SecureModel => "Secure Model",
        }
    }

    /// Whether the framework hands some decisions to the password manager.
    pub fn delegates(self) -> bool {
        matches!(
            self,
            FrameworkId::IosExtensions | FrameworkId::AndroidAutofillService
        )
    }
}

impl fmt::Display for FrameworkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for FrameworkId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FrameworkId::ALL
            .into_iter()
            .find(|f| f.id() == s)
            .ok_or_else(|| format!("unknown framework {s:?}"))
    }
}

/// The individual security checks, one per column of the verdict tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckId {
    InteractionRequired,
    DomainMapping,
    HttpsDowngrade,
    BadCert,
    ActionStatic,
    ActionDynamic,
    MethodGet,
    CrossOriginIframe,
    FillOnTransmission,
    AppToDomain,
    DomainToApp,
    OtherAppAccess,
    #[serde(rename = "webview-host-access")]
    WebViewHostAccess,
}

impl CheckId {
    pub const ALL: [CheckId; 13] = [
        CheckId::InteractionRequired,
        CheckId::DomainMapping,
        CheckId::HttpsDowngrade,
        CheckId::BadCert,
        CheckId::ActionStatic,
        CheckId::ActionDynamic,
        CheckId::MethodGet,
        CheckId::CrossOriginIframe,
        CheckId::FillOnTransmission,
        CheckId::AppToDomain,
        CheckId::DomainToApp,
        CheckId::OtherAppAccess,
        CheckId::WebViewHostAccess,
    ];

    pub fn id(self) -> &'static str {
        match self {
            CheckId::InteractionRequired => "interaction-required",
            CheckId::DomainMapping => "domain-mapping",
            CheckId::HttpsDowngrade => "https-downgrade",
            CheckId::BadCert => "bad-cert",
            CheckId::ActionStatic => "action-static",
            CheckId::ActionDynamic => "action-dynamic",
            CheckId::MethodGet => "method-get",
            CheckId::CrossOriginIframe => "cross-origin-iframe",
            CheckId::FillOnTransmission => "fill-on-transmission",
            CheckId::AppToDomain => "app-to-domain",
            CheckId::DomainToApp => "domain-to-app",
            CheckId::OtherAppAccess => "other-app-access",
            CheckId::WebViewHostAccess => "webview-host-access",
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for CheckId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CheckId::ALL
            .into_iter()
            .find(|c| c.id() == s)
            .ok_or_else(|| format!("unknown check {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Secure,
    Partial,
    Insecure,
    Delegated,
    NotApplicable,
}

impl Verdict {
    pub fn glyph(self) -> &'static str {
        match self {
            Verdict::Secure => "●",
            Verdict::Partial => "◐",
            Verdict::Insecure => "○",
            Verdict::Delegated => "✎",
            Verdict::NotApplicable => "–",
        }
    }

    /// Ordering used when several probes feed one cell: the worst wins.
    pub fn severity(self) -> u8 {
        match self {
            Verdict::NotApplicable => 0,
            Verdict::Secure => 1,
            Verdict::Partial => 2,
            Verdict::Insecure => 3,
            Verdict::Delegated => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gate {
    UserGateRequired,
    NoGate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillMode {
    IntoDocument,
    OnTransmission,
}

/// A native login screen inside an app.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NativeScreen {
    pub fields: Vec<Field>,
    /// Fields carry explicit autofill hints; otherwise the document
    /// detection heuristic is reused.
    #[serde(default)]
    pub annotated: bool,
}

impl NativeScreen {
    pub fn login() -> Self {
        use crate::webdoc::FieldKind;
        Self {
            fields: vec![
                Field::new("username", FieldKind::Username),
                Field::new("password", FieldKind::Password),
            ],
            annotated: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FillContext {
    BrowserPage {
        document: Document,
        target: FormRef,
    },
    NativeUi {
        app: AppIdentity,
        screen: NativeScreen,
        /// Domain the app asks the manager for, where the framework lets
        /// apps name one.
        requested_domain: Option<DomainName>,
    },
    WebViewInApp {
        host: AppIdentity,
        document: Document,
        host_scripts: Vec<ScriptEvent>,
        target: FormRef,
    },
    /// UI the framework cannot introspect at all.
    CustomDrawnUi {
        app: AppIdentity,
    },
}

impl FillContext {
    pub fn document(&self) -> Option<&Document> {
        match self {
            FillContext::BrowserPage { document, .. }
            | FillContext::WebViewInApp { document, .. } => Some(document),
            _ => None,
        }
    }
}

/// Which fields a fill writes to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FillTarget {
    Form {
        form: FormRef,
        username: usize,
        password: usize,
    },
    Native {
        username: usize,
        password: usize,
    },
}

/// Why a framework offered nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockReason {
    Check(CheckId),
    Mapping(NotVerifiedReason),
}

impl fmt::Display for BlockReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockReason::Check(c) => write!(f, "{c}"),
            BlockReason::Mapping(r) => {
                let s = serde_json::to_value(r).expect("reason serializes");
                write!(f, "mapping: {}", s.as_str().unwrap_or_default())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FillDecision {
    pub gate: Gate,
    pub offered: Vec<Credential>,
    pub fill_mode: FillMode,
    /// Decision points this run resolved without a manager profile; the
    /// framework left them to the manager.
    pub checks: Vec<(CheckId, Verdict)>,
    pub warning: Option<String>,
    pub target: FillTarget,
    /// Action origin of the target form when the decision was made.
    pub action_origin: Option<Origin>,
    pub refused: Option<BlockReason>,
    pub mapping: Option<MappingVerdict>,
}

impl FillDecision {
    pub fn is_delegated(&self, check: CheckId) -> bool {
        self.checks
            .iter()
            .any(|(c, v)| *c == check && *v == Verdict::Delegated)
    }
}

#[derive(Debug, Error)]
pub enum FrameworkError {
    #[error("unsupported fill context: {0}")]
    UnsupportedContext(String),
    #[error("credentials were offered without a user gate")]
    GateBypassAttempt,
    #[error("manager profile {manager} belongs to {expected}, not {actual}")]
    ManagerMismatch {
        manager: String,
        expected: FrameworkId,
        actual: FrameworkId,
    },
    #[error("no login form at the fill target")]
    NoLoginForm,
    #[error(transparent)]
    WebDoc(#[from] WebDocError),
}
