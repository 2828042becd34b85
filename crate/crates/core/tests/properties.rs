mod common;

use autofill_sim::association::{verify_bidirectional, NotVerifiedReason, Platform};
use autofill_sim::harness::{fixtures_dir, load_fixture, Suite};
use autofill_sim::model::{load_scene, render_scene, ConnectionSecurity, Origin, PackageId};
use autofill_sim::webdoc::{
    run_script_phase, Document, Endpoint, ExfilChannel, Field, FieldKind, FillState, Form, FormRef,
    Injector, Method, Mount, ScriptAction, ScriptEvent, ScriptPhase,
};
use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scene_round_trips(seed in any::<u64>()) {
        let g = random_scene(&mut rng(seed));
        let text = render_scene(&g.scene);
        let back = load_scene(&text).unwrap();
        prop_assert_eq!(&back, &g.scene);
        prop_assert_eq!(render_scene(&back), text);
    }

    #[test]
    fn look_alike_of_verified_app_is_rejected(
        platform in prop::sample::select(Platform::ALL.to_vec()),
        pkg in prop::sample::select(PACKAGES.to_vec()),
        site in prop::sample::select(DOMAINS.to_vec()),
        key in prop::sample::select(KEYS.to_vec()),
        other in prop::sample::select(KEYS.to_vec()),
    ) {
        prop_assume!(key != other);
        let site = domain(site);
        let app = autofill_sim::model::AppIdentity::signed(pkg, key).unwrap().entitled([site.clone()]);
        let file = autofill_sim::association::parse_association_file(platform, &association_text(platform, pkg, key)).unwrap();
        let https = ConnectionSecurity::HttpsValid;
        prop_assert!(verify_bidirectional(&app, &site, Some(&file), &https).is_verified());
        let fake = look_alike(&app, other);
        prop_assert_eq!(
            verify_bidirectional(&fake, &site, Some(&file), &https).reason(),
            Some(NotVerifiedReason::FingerprintMismatch)
        );
    }

    #[test]
    fn scraping_matches_a_naive_interpreter(
        form_sizes in prop::collection::vec(1usize..4, 1..4),
        values in prop::collection::vec(prop::option::of("[a-z]{1,6}"), 12),
        ops in prop::collection::vec((0u8..3, 0usize..3), 0..10),
        in_webview in any::<bool>(),
    ) {
        let origin = Origin::https("shop.co.uk");
        let forms: Vec<Form> = form_sizes
            .iter()
            .map(|n| Form {
                action: Endpoint::new(origin.clone(), "/s"),
                method: Method::Post,
                fields: (0..*n).map(|i| Field::new(&format!("f{i}"), FieldKind::Text)).collect(),
            })
            .collect();
        let mut fill = FillState::new();
        let mut slots = values.iter();
        for (fi, n) in form_sizes.iter().enumerate() {
            for i in 0..*n {
                if let Some(Some(v)) = slots.next() {
                    fill.set(FormRef::top(fi).field(i), v.clone());
                }
            }
        }
        let scripts: Vec<ScriptEvent> = ops
            .iter()
            .map(|(op, form)| ScriptEvent {
                phase: ScriptPhase::PostFill,
                action: match op {
                    0 => ScriptAction::ScrapeFields { form: form % form_sizes.len() },
                    1 => ScriptAction::ExfiltrateTo(Origin::https("evil.com")),
                    _ => ScriptAction::PostToBridge { channel: "cb".into() },
                },
                injected_by: Injector::Page,
            })
            .collect();

        let mut expected: Vec<(bool, Vec<String>)> = Vec::new();
        let mut buffer: Vec<String> = Vec::new();
        for s in &scripts {
            match &s.action {
                ScriptAction::ScrapeFields { form } => {
                    for i in 0..form_sizes[*form] {
                        if let Some(v) = fill.get(&FormRef::top(*form).field(i)) {
                            buffer.push(v.to_owned());
                        }
                    }
                }
                ScriptAction::ExfiltrateTo(_) => expected.push((false, buffer.clone())),
                ScriptAction::PostToBridge { .. } if in_webview => expected.push((true, buffer.clone())),
                _ => {}
            }
        }

        let mut doc = Document { origin, forms, frames: Vec::new(), scripts };
        let mount = if in_webview {
            Mount::WebView { host: PackageId::parse("com.evil.browser").unwrap(), host_scripts: Vec::new() }
        } else {
            Mount::Browser
        };
        let got: Vec<(bool, Vec<String>)> = run_script_phase(&mut doc, ScriptPhase::PostFill, &fill, &mount)
            .unwrap()
            .into_iter()
            .map(|e| (matches!(e.channel, ExfilChannel::Bridge { .. }), e.values))
            .collect();
        prop_assert_eq!(got, expected);
    }
}

#[test]
fn bidirectional_clause_table() {
    let rows = clause_table();
    assert_eq!(rows.len(), 32);
    for row in &rows {
        let all = row.entitled && row.listed && row.key_matches && row.https;
        assert_eq!(
            row.verdict.is_verified(),
            all,
            "{:?} e={} l={} k={} h={}",
            row.platform,
            row.entitled,
            row.listed,
            row.key_matches,
            row.https
        );
        assert_eq!(row.verdict.reason(), expected_reason(row));
    }
}

#[test]
fn p1_holds_on_random_scenes() {
    let t = p1_tally(200, 0x5eed_0001);
    assert!(
        t.violations.is_empty(),
        "{:#?}",
        &t.violations[..t.violations.len().min(10)]
    );
    assert!(t.exercised > 1000, "only {} offers exercised", t.exercised);
}

#[test]
fn fill_on_transmission_holds_for_random_scripts() {
    let scene = load_fixture(Suite::Browser, &fixtures_dir()).unwrap().scene;
    let t = fill_on_transmission_tally(300, 0x5eed_0002, &scene);
    assert!(
        t.violations.is_empty(),
        "{:#?}",
        &t.violations[..t.violations.len().min(10)]
    );
    assert!(t.exercised > 50 && t.special > 5, "{t:?}");
}
