use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HarnessError, Suite};
use crate::frameworks::{CheckId, FillContext, NativeScreen};
use crate::model::{fingerprint, load_scene, AppIdentity, DomainName, PackageId, Scene};
use crate::webdoc::{Field, FieldKind, FormRef, ScriptSpec};

pub const FIXTURES_ENV: &str = "AUTOFILL_SIM_FIXTURES";

/// `AUTOFILL_SIM_FIXTURES` if set, else the fixtures shipped with the crate.
pub fn fixtures_dir() -> PathBuf {
    std::env::var_os(FIXTURES_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures"))
}

/// An app in the fixture scene, written `package` or `package@key-label`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AppRef(pub String);

impl AppRef {
    pub fn resolve(&self, scene: &Scene) -> Result<AppIdentity, String> {
        let (pkg, key) = match self.0.split_once('@') {
            Some((p, k)) => (p, Some(k)),
            None => (self.0.as_str(), None),
        };
        let pkg = PackageId::parse(pkg).map_err(|e| e.to_string())?;
        let fp = key
            .map(fingerprint)
            .transpose()
            .map_err(|e| e.to_string())?;
        let mut found = scene
            .apps_with_package(&pkg)
            .filter(|a| fp.as_ref().is_none_or(|f| &a.signing_fingerprint == f));
        let app = found
            .next()
            .ok_or_else(|| format!("no app {} in scene", self.0))?;
        if found.next().is_some() {
            return Err(format!("app reference {} is ambiguous", self.0));
        }
        Ok(app.clone())
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ContextSpec {
    Browser {
        domain: DomainName,
        path: String,
        #[serde(default)]
        form: FormRef,
    },
    Native {
        app: AppRef,
        #[serde(default)]
        requested_domain: Option<DomainName>,
        #[serde(default = "default_true")]
        annotated: bool,
    },
    #[serde(rename = "webview")]
    WebView {
        host: AppRef,
        domain: DomainName,
        path: String,
        #[serde(default)]
        form: FormRef,
        #[serde(default)]
        host_scripts: Vec<ScriptSpec>,
    },
}

impl ContextSpec {
    pub fn build(&self, scene: &Scene) -> Result<FillContext, String> {
        Ok(match self {
            ContextSpec::Browser { domain, path, form } => FillContext::BrowserPage {
                document: scene.document(domain, path).map_err(|e| e.to_string())?,
                target: form.clone(),
            },
            ContextSpec::Native {
                app,
                requested_domain,
                annotated,
            } => FillContext::NativeUi {
                app: app.resolve(scene)?,
                screen: if *annotated {
                    NativeScreen::login()
                } else {
                    NativeScreen {
                        fields: vec![
                            Field::new("user", FieldKind::Text),
                            Field::new("pass", FieldKind::Password),
                        ],
                        annotated: false,
                    }
                },
                requested_domain: requested_domain.clone(),
            },
            ContextSpec::WebView {
                host,
                domain,
                path,
                form,
                host_scripts,
            } => {
                let document = scene.document(domain, path).map_err(|e| e.to_string())?;
                let host_scripts = host_scripts
                    .iter()
                    .map(|s| s.resolve(&document.origin))
                    .collect::<Result<_, _>>()
                    .map_err(|e| e.to_string())?;
                FillContext::WebViewInApp {
                    host: host.resolve(scene)?,
                    document,
                    host_scripts,
                    target: form.clone(),
                }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CeremonyMode {
    /// No real secret may reach a destination outside its mapping.
    NoTheft,
    /// No real secret may sit in document-visible field state.
    NoVisibleSecret,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProbeKind {
    /// Offers must be gated, and a denying user gets nothing.
    Gate,
    /// Every offered credential must belong to one of `appropriate`.
    Offer {
        appropriate: Vec<DomainName>,
    },
    Ceremony {
        mode: CeremonyMode,
    },
    /// Another app tries to read the filled native fields.
    NativeIsolation {
        observer: AppRef,
    },
    /// A WebView page inside the app tries to scrape the native fill.
    NativeWebview {
        domain: DomainName,
        path: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(try_from = "RawProbe")]
pub struct Probe {
    pub check: CheckId,
    pub kind: ProbeKind,
    pub context: ContextSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProbe {
    check: CheckId,
    kind: String,
    context: ContextSpec,
    #[serde(default)]
    appropriate: Option<Vec<DomainName>>,
    #[serde(default)]
    mode: Option<CeremonyMode>,
    #[serde(default)]
    observer: Option<AppRef>,
    #[serde(default)]
    page: Option<PageRef>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PageRef {
    domain: DomainName,
    path: String,
}

impl TryFrom<RawProbe> for Probe {
    type Error = String;
    fn try_from(raw: RawProbe) -> Result<Self, Self::Error> {
        let extra = [
            ("appropriate", raw.appropriate.is_some()),
            ("mode", raw.mode.is_some()),
            ("observer", raw.observer.is_some()),
            ("page", raw.page.is_some()),
        ];
        let allowed: &[&str] = match raw.kind.as_str() {
            "gate" => &[],
            "offer" => &["appropriate"],
            "ceremony" => &["mode"],
            "native-isolation" => &["observer"],
            "native-webview" => &["page"],
            other => return Err(format!("unknown probe kind {other:?}")),
        };
        if let Some((key, _)) = extra
            .iter()
            .find(|(k, present)| *present && !allowed.contains(k))
        {
            return Err(format!("probe kind {:?} does not take {key:?}", raw.kind));
        }
        let missing = |key: &str| format!("probe kind {:?} requires {key:?}", raw.kind);
        let kind = match raw.kind.as_str() {
            "gate" => ProbeKind::Gate,
            "offer" => ProbeKind::Offer {
                appropriate: raw.appropriate.ok_or_else(|| missing("appropriate"))?,
            },
            "ceremony" => ProbeKind::Ceremony {
                mode: raw.mode.ok_or_else(|| missing("mode"))?,
            },
            "native-isolation" => ProbeKind::NativeIsolation {
                observer: raw.observer.ok_or_else(|| missing("observer"))?,
            },
            _ => {
                let page = raw.page.ok_or_else(|| missing("page"))?;
                ProbeKind::NativeWebview {
                    domain: page.domain,
                    path: page.path,
                }
            }
        };
        Ok(Probe {
            check: raw.check,
            kind,
            context: raw.context,
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChecksFile {
    suite: Suite,
    probes: Vec<Probe>,
}

/// A suite's scene plus its probes.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub suite: Suite,
    pub scene: Scene,
    pub probes: Vec<Probe>,
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|_| HarnessError::FixtureMissing(path.to_owned()))
}

/// Loads `<dir>/<suite>/scene.json` and `<dir>/<suite>/checks.json`.
pub fn load_fixture(suite: Suite, dir: &Path) -> Result<Fixture, HarnessError> {
    let base = dir.join(suite.id());
    let scene_path = base.join("scene.json");
    let checks_path = base.join("checks.json");
    let scene = load_scene(&read(&scene_path)?).map_err(|source| HarnessError::Scene {
        path: scene_path.clone(),
        source,
    })?;
    let bad = |message: String| HarnessError::BadFixture {
        path: checks_path.clone(),
        message,
    };
    let checks: ChecksFile =
        serde_json::from_str(&read(&checks_path)?).map_err(|e| bad(e.to_string()))?;
    if checks.suite != suite {
        return Err(bad(format!("declares suite {}", checks.suite)));
    }
    for probe in &checks.probes {
        if !suite.columns().contains(&probe.check) {
            return Err(bad(format!("{} is not a {suite} column", probe.check)));
        }
        probe
            .context
            .build(&scene)
            .map_err(|e| bad(format!("{}: {e}", probe.check)))?;
    }
    for check in suite.columns() {
        if !checks.probes.iter().any(|p| p.check == *check) {
            return Err(HarnessError::UncoveredCheck {
                suite,
                check: *check,
            });
        }
    }
    Ok(Fixture {
        suite,
        scene,
        probes: checks.probes,
    })
}
