#![allow(dead_code)]

use autofill_sim::frameworks::{presets, FillContext, FrameworkId, ManagerProfile, NativeScreen};
use autofill_sim::model::{
    fingerprint, load_scene, DomainName, Scene, APPLE_ASSOCIATION_PATH, DAL_ASSOCIATION_PATH,
};
use autofill_sim::webdoc::{Endpoint, FormRef, Injector, ScriptAction, ScriptEvent, ScriptPhase};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

pub const DOMAINS: [&str; 5] = [
    "walmart.com",
    "bank.org",
    "evil.com",
    "shop.co.uk",
    "tracker.net",
];
pub const PACKAGES: [&str; 6] = [
    "com.walmart.android",
    "com.walmart.evil",
    "org.bank.mobile",
    "com.evil.browser",
    "uk.co.shop.app",
    "com.wal.evil",
];
pub const KEYS: [&str; 4] = [
    "walmart-release",
    "bank-release",
    "shop-release",
    "attacker-key",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn domain(raw: &str) -> DomainName {
    DomainName::parse(raw).unwrap()
}

/// Every (framework, manager) pair: each framework bare plus each bundled
/// preset.
pub fn all_policies() -> Vec<(FrameworkId, Option<ManagerProfile>)> {
    let mut out = Vec::new();
    for fw in FrameworkId::ALL {
        out.push((fw, None));
        for m in presets().get(&fw).into_iter().flatten() {
            out.push((fw, Some(m.clone())));
        }
    }
    out
}

fn pick<'a, R: Rng>(rng: &mut R, items: &[&'a str]) -> &'a str {
    items.choose(rng).unwrap()
}

fn security<R: Rng>(rng: &mut R) -> Value {
    match rng.gen_range(0..6) {
        0 => json!("http"),
        1 => json!({"https-invalid-cert": "self-signed"}),
        _ => json!("https-valid"),
    }
}

fn script_html<R: Rng>(rng: &mut R) -> String {
    let phase = pick(rng, &["on-load", "pre-fill", "post-fill"]);
    let target = pick(rng, &DOMAINS);
    match rng.gen_range(0..4) {
        0 => format!(
            r#"<script-event phase="{phase}" do="rewrite-action" to="https://{target}/s"/>"#
        ),
        1 => format!(r#"<script-event phase="{phase}" do="scrape"/>"#),
        2 => format!(r#"<script-event phase="{phase}" do="exfiltrate" to="https://{target}/s"/>"#),
        _ => format!(r#"<script-event phase="{phase}" do="post-to-bridge" channel="cb"/>"#),
    }
}

fn login_form<R: Rng>(rng: &mut R) -> String {
    let action = match rng.gen_range(0..4) {
        0 => "".to_owned(),
        1 => format!("https://{}/s", pick(rng, &DOMAINS)),
        2 => format!("http://{}/s", pick(rng, &DOMAINS)),
        _ => "/s".to_owned(),
    };
    let method = if rng.gen_bool(0.3) { "get" } else { "post" };
    let user = if rng.gen_bool(0.5) {
        r#"<input name="username" autocomplete="username">"#
    } else {
        r#"<input type="email" name="email">"#
    };
    format!(
        r#"<form action="{action}" method="{method}">{user}<input type="password" name="password"></form>"#
    )
}

/// A random but valid scene, plus fill contexts that exercise it.
pub struct Generated {
    pub scene: Scene,
    pub contexts: Vec<FillContext>,
}

pub fn random_scene<R: Rng>(rng: &mut R) -> Generated {
    let mut creds = Vec::new();
    for i in 0..rng.gen_range(1..4) {
        creds.push(json!({
            "id": format!("cred-{i}"),
            "username": format!("user{i}"),
            "password": format!("Secret-{i}-{:08x}", rng.gen::<u32>()),
            "domain": pick(rng, &DOMAINS),
        }));
    }

    let mut apps: Vec<(String, String)> = Vec::new();
    let mut app_json = Vec::new();
    for _ in 0..rng.gen_range(0..5) {
        let pkg = pick(rng, &PACKAGES).to_owned();
        let key = pick(rng, &KEYS).to_owned();
        if apps.contains(&(pkg.clone(), key.clone())) {
            continue;
        }
        let entitled: Vec<&str> = DOMAINS
            .iter()
            .copied()
            .filter(|_| rng.gen_bool(0.3))
            .collect();
        let mut app = json!({"package_id": pkg, "signing_key": key, "entitled_domains": entitled});
        if rng.gen_bool(0.5) {
            app["store_metadata"] = json!({"developer_website": pick(rng, &DOMAINS)});
        }
        app_json.push(app);
        apps.push((pkg, key));
    }

    let mut mappings = Vec::new();
    for (pkg, _) in &apps {
        if rng.gen_bool(0.3) {
            mappings.push(json!({"package_id": pkg, "domain": pick(rng, &DOMAINS)}));
        }
    }

    let mut domains = Map::new();
    let mut pages: Vec<(String, String, bool)> = Vec::new();
    for d in DOMAINS {
        let mut files = Map::new();
        if !apps.is_empty() && rng.gen_bool(0.6) {
            let listed: Vec<&(String, String)> =
                apps.iter().filter(|_| rng.gen_bool(0.6)).collect();
            let key_for = |rng: &mut R, k: &str| {
                if rng.gen_bool(0.8) {
                    k.to_owned()
                } else {
                    pick(rng, &KEYS).to_owned()
                }
            };
            let dal: Vec<Value> = listed
                .iter()
                .map(|(p, k)| {
                    let fp = fingerprint(&key_for(rng, k)).unwrap();
                    json!({
                        "relation": ["delegate_permission/common.get_login_creds"],
                        "target": {"namespace": "android_app", "package_name": p, "sha256_cert_fingerprints": [fp.as_str()]}
                    })
                })
                .collect();
            let apple: Vec<String> = listed
                .iter()
                .map(|(p, k)| format!("{}.{p}", key_for(rng, k)))
                .collect();
            files.insert(
                DAL_ASSOCIATION_PATH.into(),
                json!({"served_over": security(rng), "text": Value::from(dal).to_string()}),
            );
            files.insert(
                APPLE_ASSOCIATION_PATH.into(),
                json!({"served_over": security(rng), "text": json!({"webcredentials": {"apps": apple}}).to_string()}),
            );
        }
        let mut docs = Map::new();
        docs.insert("/s".into(), json!({"html": ""}));
        docs.insert("/f".into(), json!({"html": login_form(rng)}));
        pages.push((d.to_owned(), "/f".into(), false));
        for p in 0..rng.gen_range(0..3) {
            let mut html = login_form(rng);
            let framed = rng.gen_bool(0.3);
            if framed {
                let hidden = if rng.gen_bool(0.5) { " hidden" } else { "" };
                html.push_str(&format!(
                    r#"<iframe src="https://{}/f"{hidden}></iframe>"#,
                    pick(rng, &DOMAINS)
                ));
            }
            for _ in 0..rng.gen_range(0..4) {
                html.push_str(&script_html(rng));
            }
            let path = format!("/p{p}");
            docs.insert(
                path.clone(),
                json!({"served_over": security(rng), "html": html}),
            );
            pages.push((d.to_owned(), path, framed));
        }
        let mut entry = Map::new();
        if !files.is_empty() {
            entry.insert("association_files".into(), Value::Object(files));
        }
        entry.insert("documents".into(), Value::Object(docs));
        domains.insert(d.to_owned(), Value::Object(entry));
    }

    let source = json!({
        "vault": {"credentials": creds, "manual_app_mappings": mappings},
        "apps": app_json,
        "domains": domains,
    });
    let scene = load_scene(&source.to_string()).expect("generated scene is valid");

    let mut contexts = Vec::new();
    for (d, path, framed) in &pages {
        let document = scene.document(&domain(d), path).unwrap();
        contexts.push(FillContext::BrowserPage {
            document: document.clone(),
            target: FormRef::top(0),
        });
        if *framed {
            contexts.push(FillContext::BrowserPage {
                document: document.clone(),
                target: FormRef {
                    frame_path: vec![0],
                    form: 0,
                },
            });
        }
        if let Some(host) = scene.apps.choose(rng) {
            let host_scripts = (0..rng.gen_range(0..3))
                .map(|_| host_script(rng, &document.origin))
                .collect();
            contexts.push(FillContext::WebViewInApp {
                host: host.clone(),
                document,
                host_scripts,
                target: FormRef::top(0),
            });
        }
    }
    for app in &scene.apps {
        contexts.push(FillContext::NativeUi {
            app: app.clone(),
            screen: NativeScreen::login(),
            requested_domain: rng.gen_bool(0.5).then(|| domain(pick(rng, &DOMAINS))),
        });
    }
    Generated { scene, contexts }
}

pub fn host_script<R: Rng>(rng: &mut R, origin: &autofill_sim::model::Origin) -> ScriptEvent {
    let phase = *[
        ScriptPhase::OnLoad,
        ScriptPhase::PreFill,
        ScriptPhase::PostFill,
    ]
    .choose(rng)
    .unwrap();
    let action = match rng.gen_range(0..4) {
        0 => ScriptAction::RewriteAction {
            form: 0,
            to: Endpoint::resolve(&format!("https://{}/s", pick(rng, &DOMAINS)), origin).unwrap(),
        },
        1 => ScriptAction::ScrapeFields { form: 0 },
        2 => ScriptAction::ExfiltrateTo(autofill_sim::model::Origin::https(pick(rng, &DOMAINS))),
        _ => ScriptAction::PostToBridge {
            channel: "cb".into(),
        },
    };
    ScriptEvent {
        phase,
        action,
        injected_by: Injector::HostApp,
    }
}

/// Every vault password that occurs anywhere in `haystack`.
pub fn secrets_in(scene: &Scene, haystack: &str) -> Vec<String> {
    scene
        .vault
        .credentials
        .iter()
        .map(|c| c.password.expose().to_owned())
        .filter(|p| haystack.contains(p.as_str()))
        .collect()
}

// ---- shared property checks -------------------------------------------------

use autofill_sim::association::{
    parse_association_file, verify_bidirectional, MappingVerdict, NotVerifiedReason, Platform,
};
use autofill_sim::frameworks::{
    run_ceremony, suggest, CaptureVia, CheckId, Destination, Gate, Transmission,
};
use autofill_sim::model::{AppIdentity, ConnectionSecurity, Origin, UserAgent};
use autofill_sim::webdoc::parse_document;
use rayon::prelude::*;

#[derive(Debug, Default)]
pub struct Tally {
    pub runs: usize,
    /// Runs where something was offered (P1) or really filled (transmission).
    pub exercised: usize,
    pub special: usize,
    pub violations: Vec<String>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.runs += other.runs;
        self.exercised += other.exercised;
        self.special += other.special;
        self.violations.extend(other.violations);
        self
    }
}

/// P1 over `scenes` random scenes and every policy: offers are always
/// gated, and a denying user leaks no vault password anywhere.
pub fn p1_tally(scenes: u64, seed: u64) -> Tally {
    let policies = all_policies();
    (0..scenes)
        .into_par_iter()
        .map(|i| {
            let g = random_scene(&mut rng(seed.wrapping_add(i)));
            let mut t = Tally::default();
            for (fw, m) in &policies {
                for (ci, ctx) in g.contexts.iter().enumerate() {
                    t.runs += 1;
                    if let Ok(d) = suggest(*fw, m.as_ref(), ctx, &g.scene) {
                        if !d.offered.is_empty() {
                            t.exercised += 1;
                            if d.gate != Gate::UserGateRequired {
                                t.violations
                                    .push(format!("scene {i} ctx {ci} {fw}: ungated offer"));
                            }
                        }
                    }
                    if let Ok(log) =
                        run_ceremony(*fw, m.as_ref(), ctx, &g.scene, UserAgent::AlwaysDeny)
                    {
                        let seen = format!(
                            "{:?}{:?}{:?}{:?}{:?}",
                            log.filled.fill,
                            log.filled.native,
                            log.transmission,
                            log.captures,
                            log.document
                        );
                        let leaked = secrets_in(&g.scene, &seen);
                        if !leaked.is_empty() {
                            t.violations
                                .push(format!("scene {i} ctx {ci} {fw}: deny leaked {leaked:?}"));
                        }
                    }
                }
            }
            t
        })
        .reduce(Tally::default, Tally::merge)
}

fn fot_page<R: Rng>(rng: &mut R) -> String {
    let mut html = String::from(
        r#"<form action="/session" method="post"><input name="username" autocomplete="username"><input type="password" name="password"></form>"#,
    );
    for _ in 0..rng.gen_range(0..6) {
        let phase = pick(rng, &["on-load", "pre-fill", "post-fill"]);
        let to = pick(
            rng,
            &[
                "https://evil.com/collect",
                "http://walmart.com/session",
                "/other",
                "https://walmart.com/session",
            ],
        );
        html.push_str(&match rng.gen_range(0..4) {
            0 => format!(r#"<script-event phase="{phase}" do="rewrite-action" to="{to}"/>"#),
            1 => format!(r#"<script-event phase="{phase}" do="scrape"/>"#),
            2 => format!(
                r#"<script-event phase="{phase}" do="exfiltrate" to="https://evil.com/collect"/>"#
            ),
            _ => format!(r#"<script-event phase="{phase}" do="post-to-bridge" channel="cb"/>"#),
        });
    }
    html
}

/// Random script sequences against a login page under the secure model:
/// no real secret in document-visible state, real secrets only travel to
/// the fill-time action origin, and a post-fill action change is refused.
pub fn fill_on_transmission_tally(runs: u64, seed: u64, scene: &Scene) -> Tally {
    let origin = Origin::https("walmart.com");
    let host = scene.apps.first().cloned();
    (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut r = rng(seed.wrapping_add(i));
            let html = fot_page(&mut r);
            let document = parse_document(&html, &origin).unwrap();
            let ctx = match (&host, r.gen_bool(0.3)) {
                (Some(h), true) => FillContext::WebViewInApp {
                    host: h.clone(),
                    document,
                    host_scripts: (0..r.gen_range(0..3)).map(|_| host_script(&mut r, &origin)).collect(),
                    target: FormRef::top(0),
                },
                _ => FillContext::BrowserPage {
                    document,
                    target: FormRef::top(0),
                },
            };
            let mut t = Tally {
                runs: 1,
                ..Tally::default()
            };
            let log = match run_ceremony(FrameworkId::SecureModel, None, &ctx, scene, UserAgent::AlwaysApprove) {
                Ok(log) => log,
                Err(e) => {
                    t.violations.push(format!("run {i}: {e}"));
                    return t;
                }
            };
            let visible = secrets_in(scene, &format!("{:?}", log.filled.fill));
            if !visible.is_empty() {
                t.violations.push(format!("run {i}: secret visible in document state"));
            }
            let fill_origin = log.decision.action_origin.clone();
            for c in &log.captures {
                if secrets_in(scene, &format!("{:?}", c.values)).is_empty() {
                    continue;
                }
                let to_action = matches!(&c.destination, Destination::Origin(o) if Some(o) == fill_origin.as_ref());
                if c.via != CaptureVia::FormSubmission || !to_action {
                    t.violations.push(format!("run {i}: secret captured by {:?} via {:?}", c.destination, c.via));
                }
            }
            if let Transmission::Sent(req) = &log.transmission {
                let carried = secrets_in(scene, &format!("{:?}", req.all_values().collect::<Vec<_>>()));
                if !carried.is_empty() && Some(&req.destination.origin) != fill_origin.as_ref() {
                    t.violations.push(format!("run {i}: secret sent to {}", req.destination));
                }
            }
            if !log.filled.is_empty() {
                t.exercised += 1;
                let final_origin = log.document.as_ref().and_then(|d| d.forms.first()).map(|f| f.action.origin.clone());
                if final_origin != fill_origin {
                    t.special += 1;
                    let refused = matches!(&log.transmission, Transmission::Refused(r) if r.check == CheckId::ActionDynamic);
                    if !refused {
                        t.violations.push(format!("run {i}: dynamic rewrite not refused: {:?}", log.transmission));
                    }
                }
            }
            t
        })
        .reduce(Tally::default, Tally::merge)
}

/// One row of the bidirectional clause table.
pub struct ClauseRow {
    pub platform: Platform,
    pub entitled: bool,
    pub listed: bool,
    pub key_matches: bool,
    pub https: bool,
    pub verdict: MappingVerdict,
}

pub fn association_text(platform: Platform, package: &str, key: &str) -> String {
    match platform {
        Platform::AppleStyle => {
            json!({"webcredentials": {"apps": [format!("{key}.{package}")]}}).to_string()
        }
        Platform::DalStyle => json!([{
            "relation": ["delegate_permission/common.get_login_creds"],
            "target": {
                "namespace": "android_app",
                "package_name": package,
                "sha256_cert_fingerprints": [fingerprint(key).unwrap().as_str()]
            }
        }])
        .to_string(),
    }
}

/// All 16 combinations of the four clauses, for each platform.
pub fn clause_table() -> Vec<ClauseRow> {
    let site = domain("walmart.com");
    let mut rows = Vec::new();
    for platform in Platform::ALL {
        for bits in 0u8..16 {
            let [entitled, listed, key_matches, https] = [0, 1, 2, 3].map(|b| bits & (1 << b) != 0);
            let mut app = AppIdentity::signed("com.walmart.android", "walmart-release").unwrap();
            if entitled {
                app = app.entitled([site.clone()]);
            }
            let package = if listed {
                "com.walmart.android"
            } else {
                "com.walmart.other"
            };
            let key = if key_matches {
                "walmart-release"
            } else {
                "attacker-key"
            };
            let file = parse_association_file(platform, &association_text(platform, package, key))
                .unwrap();
            let over = if https {
                ConnectionSecurity::HttpsValid
            } else {
                ConnectionSecurity::Http
            };
            rows.push(ClauseRow {
                platform,
                entitled,
                listed,
                key_matches,
                https,
                verdict: verify_bidirectional(&app, &site, Some(&file), &over),
            });
        }
    }
    rows
}

/// The reason the first failing clause gives, in checking order.
pub fn expected_reason(row: &ClauseRow) -> Option<NotVerifiedReason> {
    if !row.entitled {
        Some(NotVerifiedReason::NotEntitled)
    } else if !row.listed {
        Some(NotVerifiedReason::AppNotListed)
    } else if !row.key_matches {
        Some(NotVerifiedReason::FingerprintMismatch)
    } else if !row.https {
        Some(NotVerifiedReason::InsecureTransport)
    } else {
        None
    }
}

/// Re-signs `app` with `key`, keeping every declared attribute.
pub fn look_alike(app: &AppIdentity, key: &str) -> AppIdentity {
    AppIdentity {
        signing_fingerprint: fingerprint(key).unwrap(),
        ..app.clone()
    }
}
