use std::path::Path;

use rayon::prelude::*;

use super::fixtures::{load_fixture, CeremonyMode, Fixture, Probe, ProbeKind};
use super::report::{AttackRecord, Cell, ConformanceReport, FrameworkAttacks, Matrix, Subject};
use super::{HarnessError, Suite, Verdict};
use crate::attacks::{find_thefts, run_attack, AttackKind};
use crate::frameworks::{
    execute_fill, run_ceremony, suggest, CheckId, FillDecision, FrameworkError, FrameworkId, Gate,
    ManagerProfile,
};
use crate::model::{Scene, UserAgent};
use crate::webdoc::{run_script_phase, Mount, ScriptPhase};

struct ProbeRun {
    verdict: Verdict,
    decision: FillDecision,
}

fn warned(decision: &FillDecision, bad: bool) -> Verdict {
    match (bad, decision.warning.is_some()) {
        (false, _) => Verdict::Secure,
        (true, true) => Verdict::Partial,
        (true, false) => Verdict::Insecure,
    }
}

fn holds_secret(values: &[String], scene: &Scene) -> bool {
    values
        .iter()
        .any(|v| scene.vault.credential_with_password(v).is_some())
}

fn probe_inner(
    probe: &Probe,
    framework: FrameworkId,
    manager: Option<&ManagerProfile>,
    scene: &Scene,
) -> Result<ProbeRun, FrameworkError> {
    let ctx = probe
        .context
        .build(scene)
        .map_err(FrameworkError::UnsupportedContext)?;
    let approve = UserAgent::AlwaysApprove;
    Ok(match &probe.kind {
        ProbeKind::Gate => {
            let decision = suggest(framework, manager, &ctx, scene)?;
            let ungated = !decision.offered.is_empty() && decision.gate != Gate::UserGateRequired;
            let denied = execute_fill(&decision, UserAgent::AlwaysDeny, &ctx)?;
            let leaked_on_deny = !denied.is_empty() || !denied.fill.is_empty();
            ProbeRun {
                verdict: if ungated || leaked_on_deny {
                    Verdict::Insecure
                } else {
                    Verdict::Secure
                },
                decision,
            }
        }
        ProbeKind::Offer { appropriate } => {
            let decision = suggest(framework, manager, &ctx, scene)?;
            let bad = decision.offered.iter().any(|c| {
                !appropriate
                    .iter()
                    .any(|d| d.same_registrable(&c.mapped_domain))
            });
            ProbeRun {
                verdict: warned(&decision, bad),
                decision,
            }
        }
        ProbeKind::Ceremony { mode } => {
            let log = run_ceremony(framework, manager, &ctx, scene, approve)?;
            let bad = match mode {
                CeremonyMode::NoTheft => !find_thefts(&log.captures, scene).is_empty(),
                CeremonyMode::NoVisibleSecret => {
                    let visible: Vec<String> = log
                        .filled
                        .fill
                        .values()
                        .map(|(_, v)| v.to_owned())
                        .collect();
                    holds_secret(&visible, scene)
                }
            };
            ProbeRun {
                verdict: warned(&log.decision, bad),
                decision: log.decision,
            }
        }
        ProbeKind::NativeIsolation { observer } => {
            let observer = observer
                .resolve(scene)
                .map_err(FrameworkError::UnsupportedContext)?;
            let log = run_ceremony(framework, manager, &ctx, scene, approve)?;
            let read = log
                .filled
                .native
                .as_ref()
                .and_then(|n| n.read_native_fields(&observer))
                .unwrap_or_default();
            ProbeRun {
                verdict: if holds_secret(&read, scene) {
                    Verdict::Insecure
                } else {
                    Verdict::Secure
                },
                decision: log.decision,
            }
        }
        ProbeKind::NativeWebview { domain, path } => {
            let log = run_ceremony(framework, manager, &ctx, scene, approve)?;
            let crate::frameworks::FillContext::NativeUi { app, .. } = &ctx else {
                return Err(FrameworkError::UnsupportedContext(
                    "native-webview probes need a native context".into(),
                ));
            };
            let mut page = scene
                .document(domain, path)
                .map_err(|e| FrameworkError::UnsupportedContext(e.to_string()))?;
            let mount = Mount::WebView {
                host: app.package_id.clone(),
                host_scripts: Vec::new(),
            };
            let mut seen = Vec::new();
            for phase in [
                ScriptPhase::OnLoad,
                ScriptPhase::PreFill,
                ScriptPhase::PostFill,
            ] {
                for ex in run_script_phase(&mut page, phase, &log.filled.fill, &mount)? {
                    seen.extend(ex.values);
                }
            }
            ProbeRun {
                verdict: if holds_secret(&seen, scene) {
                    Verdict::Insecure
                } else {
                    Verdict::Secure
                },
                decision: log.decision,
            }
        }
    })
}

/// Runs one probe and returns its verdict for `probe.check`.
pub fn run_probe(
    probe: &Probe,
    framework: FrameworkId,
    manager: Option<&ManagerProfile>,
    scene: &Scene,
) -> Result<Verdict, HarnessError> {
    let run =
        probe_inner(probe, framework, manager, scene).map_err(|source| HarnessError::Probe {
            check: probe.check,
            framework,
            source,
        })?;
    Ok(if run.decision.is_delegated(probe.check) {
        Verdict::Delegated
    } else {
        run.verdict
    })
}

fn cells(
    fixture: &Fixture,
    framework: FrameworkId,
    manager: Option<&ManagerProfile>,
) -> Result<Vec<Cell>, HarnessError> {
    let verdicts: Vec<(CheckId, Verdict)> = fixture
        .probes
        .par_iter()
        .map(|p| run_probe(p, framework, manager, &fixture.scene).map(|v| (p.check, v)))
        .collect::<Result<_, _>>()?;
    Ok(fixture
        .suite
        .columns()
        .iter()
        .map(|check| Cell {
            check: *check,
            verdict: verdicts
                .iter()
                .filter(|(c, _)| c == check)
                .map(|(_, v)| *v)
                .max_by_key(|v| v.severity())
                .unwrap_or(Verdict::NotApplicable),
        })
        .collect())
}

/// Runs every probe of `suite` from the fixtures in `dir`.
pub fn run_suite_in(
    suite: Suite,
    framework: FrameworkId,
    manager: Option<&ManagerProfile>,
    dir: &Path,
) -> Result<ConformanceReport, HarnessError> {
    let fixture = load_fixture(suite, dir)?;
    Ok(ConformanceReport {
        suite,
        subject: Subject {
            framework,
            manager: manager.map(|m| m.id.clone()),
        },
        cells: cells(&fixture, framework, manager)?,
        attack_outcomes: None,
    })
}

/// [`run_suite_in`] against [`super::fixtures_dir`].
pub fn run_suite(
    suite: Suite,
    framework: FrameworkId,
    manager: Option<&ManagerProfile>,
) -> Result<ConformanceReport, HarnessError> {
    run_suite_in(suite, framework, manager, &super::fixtures_dir())
}

/// Every attack against `framework` under `user`, in attack order.
pub fn attack_records(
    framework: FrameworkId,
    manager: Option<&ManagerProfile>,
    user: UserAgent,
) -> Result<Vec<AttackRecord>, HarnessError> {
    AttackKind::ALL
        .par_iter()
        .map(|kind| {
            let outcome = run_attack(*kind, framework, manager, user)?;
            Ok(AttackRecord {
                attack: *kind,
                user,
                outcome: outcome.label(),
            })
        })
        .collect()
}

/// All suites against all frameworks without manager profiles, plus the
/// attack library under an approving user.
pub fn matrix(dir: &Path) -> Result<Matrix, HarnessError> {
    let fixtures: Vec<Fixture> = Suite::ALL
        .iter()
        .map(|s| load_fixture(*s, dir))
        .collect::<Result<_, _>>()?;
    let jobs: Vec<(&Fixture, FrameworkId)> = fixtures
        .iter()
        .flat_map(|f| FrameworkId::ALL.into_iter().map(move |fw| (f, fw)))
        .collect();
    let reports = jobs
        .par_iter()
        .map(|(fixture, fw)| {
            Ok(ConformanceReport {
                suite: fixture.suite,
                subject: Subject {
                    framework: *fw,
                    manager: None,
                },
                cells: cells(fixture, *fw, None)?,
                attack_outcomes: None,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let attacks = FrameworkId::ALL
        .par_iter()
        .map(|fw| {
            Ok(FrameworkAttacks {
                framework: *fw,
                outcomes: attack_records(*fw, None, UserAgent::AlwaysApprove)?,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(Matrix { reports, attacks })
}
