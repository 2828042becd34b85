use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::FrameworkId;
use crate::association::MappingScheme;

const PRESETS_JSON: &str = include_str!("../../data/manager-presets.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WebViewPolicy {
    /// Offer credentials for the domain of the page shown in the WebView.
    #[default]
    ByPageDomain,
    /// Offer credentials mapped to the app hosting the WebView.
    ByAppMapping,
    Refuse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum IframePolicy {
    #[default]
    Fill,
    /// Fill after telling the user the form lives in a frame from another site.
    Warn,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TransportPolicy {
    #[default]
    Fill,
    Warn,
    Refuse,
}

/// Behaviour a framework leaves to the individual password manager.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManagerProfile {
    pub id: String,
    pub display_name: String,
    pub framework: FrameworkId,
    pub native_scheme: Option<MappingScheme>,
    /// Consulted when `native_scheme` finds nothing.
    pub fallback_scheme: Option<MappingScheme>,
    pub webview_policy: WebViewPolicy,
    pub iframe_policy: IframePolicy,
    pub warns_on_manual: bool,
    pub on_http: TransportPolicy,
    pub on_bad_cert: TransportPolicy,
}

impl ManagerProfile {
    /// Stand-in used when a delegating framework runs without a manager:
    /// page-domain WebView mapping, manual app mapping, frames and insecure
    /// transports filled without comment.
    pub fn reference(framework: FrameworkId) -> Self {
        Self {
            id: "reference".into(),
            display_name: "reference".into(),
            framework,
            native_scheme: Some(MappingScheme::Manual),
            fallback_scheme: None,
            webview_policy: WebViewPolicy::ByPageDomain,
            iframe_policy: IframePolicy::Fill,
            warns_on_manual: false,
            on_http: TransportPolicy::Fill,
            on_bad_cert: TransportPolicy::Fill,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    display_name: String,
    #[serde(default)]
    native_scheme: Option<MappingScheme>,
    #[serde(default)]
    fallback_scheme: Option<MappingScheme>,
    #[serde(default)]
    webview_policy: WebViewPolicy,
    #[serde(default)]
    iframe_policy: IframePolicy,
    #[serde(default)]
    warns_on_manual: bool,
    #[serde(default)]
    on_http: TransportPolicy,
    #[serde(default)]
    on_bad_cert: TransportPolicy,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PresetError {
    #[error("no manager {manager:?} for {framework}; known: {known}")]
    UnknownManager {
        framework: FrameworkId,
        manager: String,
        known: String,
    },
}

fn load() -> BTreeMap<FrameworkId, Vec<ManagerProfile>> {
    let raw: BTreeMap<FrameworkId, BTreeMap<String, RawProfile>> =
        serde_json::from_str(PRESETS_JSON).expect("bundled manager presets are valid");
    raw.into_iter()
        .map(|(framework, managers)| {
            let profiles = managers
                .into_iter()
                .map(|(id, p)| ManagerProfile {
                    id,
                    display_name: p.display_name,
                    framework,
                    native_scheme: p.native_scheme,
                    fallback_scheme: p.fallback_scheme,
                    webview_policy: p.webview_policy,
                    iframe_policy: p.iframe_policy,
                    warns_on_manual: p.warns_on_manual,
                    on_http: p.on_http,
                    on_bad_cert: p.on_bad_cert,
                })
                .collect();
            (framework, profiles)
        })
        .collect()
}

/// All bundled presets, keyed by framework, managers sorted by id.
pub fn presets() -> &'static BTreeMap<FrameworkId, Vec<ManagerProfile>> {
    static PRESETS: OnceLock<BTreeMap<FrameworkId, Vec<ManagerProfile>>> = OnceLock::new();
    PRESETS.get_or_init(load)
}

pub fn manager_ids(framework: FrameworkId) -> Vec<&'static str> {
    presets()
        .get(&framework)
        .map(|ps| ps.iter().map(|p| p.id.as_str()).collect())
        .unwrap_or_default()
}

pub fn preset(framework: FrameworkId, manager: &str) -> Result<ManagerProfile, PresetError> {
    presets()
        .get(&framework)
        .and_then(|ps| ps.iter().find(|p| p.id == manager))
        .cloned()
        .ok_or_else(|| PresetError::UnknownManager {
            framework,
            manager: manager.to_owned(),
            known: manager_ids(framework).join(", "),
        })
}
