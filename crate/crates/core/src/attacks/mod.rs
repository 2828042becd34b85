//! Constructive attack scenarios and outcome classification.

mod scenario;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::association::{map_by_heuristic, verify_any_platform, MappingScheme, Platform};
use crate::frameworks::{
    run_ceremony, BlockReason, Capture, CaptureVia, CeremonyLog, CheckId, Destination,
    FrameworkError, FrameworkId, Gate, ManagerProfile, Transmission,
};
use crate::model::{
    AppIdentity, CredentialId, DomainName, PackageId, Scene, SceneError, UserAgent,
};

pub use scenario::{
    build_scenario, legit_app, Scenario, ATTACKER_APP, ATTACKER_DOMAIN, ATTACKER_KEY, VICTIMS,
};

/// Package-name heuristics an attacker can satisfy by choosing a package id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SquatScheme {
    Prefix,
    Substring,
    PackageInversion,
}

impl SquatScheme {
    pub const ALL: [SquatScheme; 3] = [
        SquatScheme::Prefix,
        SquatScheme::Substring,
        SquatScheme::PackageInversion,
    ];

    pub fn scheme(self) -> MappingScheme {
        match self {
            SquatScheme::Prefix => MappingScheme::Prefix,
            SquatScheme::Substring => MappingScheme::Substring,
            SquatScheme::PackageInversion => MappingScheme::PackageInversion {
                inverted_domains: Vec::new(),
                alternate_mapping: Vec::new(),
            },
        }
    }
}

/// How a malicious page in a WebView gets the filled values out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PageExfil {
    /// The form posts straight to the attacker.
    FormSubmit,
    /// The form posts to the victim; a page script copies the fields out.
    PageScript,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttackKind {
    CrossOriginIframePhish,
    WebViewMaliciousPage(PageExfil),
    WebViewMaliciousApp,
    NetworkInjectionHttp,
    NetworkInjectionBadCert,
    ActionRewriteStatic,
    ActionRewriteDynamic,
    GetMethodLeak,
    LookAlikeApp,
    SideLoadedImpersonation,
    PackageNameSquat(SquatScheme),
}

impl AttackKind {
    pub const ALL: [AttackKind; 14] = [
        AttackKind::CrossOriginIframePhish,
        AttackKind::WebViewMaliciousPage(PageExfil::FormSubmit),
        AttackKind::WebViewMaliciousPage(PageExfil::PageScript),
        AttackKind::WebViewMaliciousApp,
        AttackKind::NetworkInjectionHttp,
        AttackKind::NetworkInjectionBadCert,
        AttackKind::ActionRewriteStatic,
        AttackKind::ActionRewriteDynamic,
        AttackKind::GetMethodLeak,
        AttackKind::LookAlikeApp,
        AttackKind::SideLoadedImpersonation,
        AttackKind::PackageNameSquat(SquatScheme::Prefix),
        AttackKind::PackageNameSquat(SquatScheme::Substring),
        AttackKind::PackageNameSquat(SquatScheme::PackageInversion),
    ];

    pub fn id(self) -> &'static str {
        match self {
            AttackKind::CrossOriginIframePhish => "cross-origin-iframe-phish",
            AttackKind::WebViewMaliciousPage(PageExfil::FormSubmit) => "webview-malicious-page",
            AttackKind::WebViewMaliciousPage(PageExfil::PageScript) => {
                "webview-malicious-page-script"
            }
            AttackKind::WebViewMaliciousApp => "webview-malicious-app",
            AttackKind::NetworkInjectionHttp => "network-injection-http",
            AttackKind::NetworkInjectionBadCert => "network-injection-bad-cert",
            AttackKind::ActionRewriteStatic => "action-rewrite-static",
            AttackKind::ActionRewriteDynamic => "action-rewrite-dynamic",
            AttackKind::GetMethodLeak => "get-method-leak",
            AttackKind::LookAlikeApp => "look-alike-app",
            AttackKind::SideLoadedImpersonation => "side-loaded-impersonation",
            AttackKind::PackageNameSquat(SquatScheme::Prefix) => "package-name-squat-prefix",
            AttackKind::PackageNameSquat(SquatScheme::Substring) => "package-name-squat-substring",
            AttackKind::PackageNameSquat(SquatScheme::PackageInversion) => {
                "package-name-squat-package-inversion"
            }
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for AttackKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttackKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| format!("unknown attack {s:?}"))
    }
}

impl Serialize for AttackKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for AttackKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Real secrets that reached a destination not mapped to their credential.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Theft {
    pub credentials: Vec<CredentialId>,
    pub captured_by: Destination,
    pub via: CaptureVia,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AfterGate {
    Stolen(Theft),
    Safe,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttackOutcome {
    /// Secrets escaped with no user gate in between.
    Stolen(Theft),
    /// The framework asked the user first; `then` is what followed.
    UserGated {
        then: AfterGate,
    },
    Blocked(BlockReason),
}

impl AttackOutcome {
    pub fn is_stolen(&self) -> bool {
        matches!(
            self,
            AttackOutcome::Stolen(_)
                | AttackOutcome::UserGated {
                    then: AfterGate::Stolen(_)
                }
        )
    }

    pub fn theft(&self) -> Option<&Theft> {
        match self {
            AttackOutcome::Stolen(t)
            | AttackOutcome::UserGated {
                then: AfterGate::Stolen(t),
            } => Some(t),
            _ => None,
        }
    }

    /// Short stable label used in reports.
    pub fn label(&self) -> String {
        match self {
            AttackOutcome::Stolen(_) => "stolen".into(),
            AttackOutcome::UserGated {
                then: AfterGate::Stolen(_),
            } => "user-gated→stolen".into(),
            AttackOutcome::UserGated {
                then: AfterGate::Safe,
            } => "user-gated→safe".into(),
            AttackOutcome::Blocked(r) => format!("blocked({r})"),
        }
    }
}

impl fmt::Display for AttackOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("{0} admits no package-name squat")]
    UnsquattableScheme(&'static str),
    #[error("victim {0} has no credential in the canonical vault")]
    UnknownVictim(DomainName),
    #[error("victim {0} has a registrable label shorter than three characters")]
    VictimTooShort(DomainName),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Framework(#[from] FrameworkError),
}

/// An attacker app whose package id the given scheme maps to `victim`.
pub fn squat_generator(
    scheme: &MappingScheme,
    victim: &DomainName,
) -> Result<AppIdentity, AttackError> {
    let registrable = victim.registrable();
    let label = registrable.registrable_label();
    if label.chars().count() < 3 {
        return Err(AttackError::VictimTooShort(victim.clone()));
    }
    let suffix_head = registrable
        .public_suffix()
        .labels()
        .first()
        .cloned()
        .unwrap_or_else(|| "com".into());
    let package = match scheme {
        MappingScheme::Prefix | MappingScheme::PackageInversion { .. } => {
            format!("{suffix_head}.{label}.evil")
        }
        MappingScheme::Substring => {
            let head: String = label.chars().take(3).collect();
            format!("com.{head}.evil")
        }
        other => return Err(AttackError::UnsquattableScheme(other.id())),
    };
    let package = PackageId::parse(&package).expect("generated package ids are well formed");
    let app = AppIdentity::signed(package.as_str(), ATTACKER_KEY).expect("static key label");
    let check = map_by_heuristic(
        scheme,
        &app,
        std::slice::from_ref(victim),
        &Scene::default(),
    );
    assert!(
        check.matched_domains.contains(victim),
        "squat {package} does not match {victim} under {}",
        scheme.id()
    );
    Ok(app)
}

/// Whether `destination` is entitled to credentials of `domain`.
pub fn is_mapped(destination: &Destination, domain: &DomainName, scene: &Scene) -> bool {
    match destination {
        Destination::Origin(o) => o.domain.same_registrable(domain),
        Destination::App(app) => {
            verify_any_platform(app, domain, scene, &Platform::ALL).is_verified()
        }
    }
}

/// Every real secret in `captures` that reached an unmapped destination,
/// grouped per capture in log order.
pub fn find_thefts(captures: &[Capture], scene: &Scene) -> Vec<Theft> {
    let mut out = Vec::new();
    for capture in captures {
        let mut stolen: Vec<CredentialId> = Vec::new();
        for value in &capture.values {
            if let Some(cred) = scene.vault.credential_with_password(value) {
                if !is_mapped(&capture.destination, &cred.mapped_domain, scene)
                    && !stolen.contains(&cred.id)
                {
                    stolen.push(cred.id.clone());
                }
            }
        }
        if !stolen.is_empty() {
            out.push(Theft {
                credentials: stolen,
                captured_by: capture.destination.clone(),
                via: capture.via,
            });
        }
    }
    out
}

/// Runs the ceremony and adds the read an app performs on its own native
/// login screen.
pub fn run_logged(
    scenario: &Scenario,
    framework: FrameworkId,
    manager: Option<&ManagerProfile>,
    user: UserAgent,
) -> Result<CeremonyLog, AttackError> {
    let mut log = run_ceremony(framework, manager, &scenario.context, &scenario.scene, user)?;
    if let Some(native) = &log.filled.native {
        let owner = native.owner().clone();
        if let Some(values) = native.read_native_fields(&owner) {
            log.captures.push(Capture {
                destination: Destination::App(owner),
                via: CaptureVia::NativeRead,
                values,
            });
        }
    }
    Ok(log)
}

/// Classifies a finished run.
pub fn classify(log: &CeremonyLog, scene: &Scene, user: UserAgent) -> AttackOutcome {
    let decision = &log.decision;
    let theft = find_thefts(&log.captures, scene).into_iter().next();
    if decision.offered.is_empty() {
        if let Some(t) = theft {
            return AttackOutcome::Stolen(t);
        }
        return AttackOutcome::Blocked(
            decision
                .refused
                .unwrap_or(BlockReason::Check(CheckId::DomainMapping)),
        );
    }
    let gated = decision.gate == Gate::UserGateRequired;
    match (theft, gated) {
        (Some(t), true) => AttackOutcome::UserGated {
            then: AfterGate::Stolen(t),
        },
        (Some(t), false) => AttackOutcome::Stolen(t),
        (None, _) if !user.approves() => AttackOutcome::UserGated {
            then: AfterGate::Safe,
        },
        (None, _) => AttackOutcome::Blocked(match &log.transmission {
            Transmission::Refused(r) => BlockReason::Check(r.check),
            _ if log.filled.pending_substitution() => {
                BlockReason::Check(CheckId::FillOnTransmission)
            }
            _ => decision
                .refused
                .unwrap_or(BlockReason::Check(CheckId::DomainMapping)),
        }),
    }
}

/// Builds the scenario for `kind` against walmart.com and runs it.
pub fn run_attack(
    kind: AttackKind,
    framework: FrameworkId,
    manager: Option<&ManagerProfile>,
    user: UserAgent,
) -> Result<AttackOutcome, AttackError> {
    run_attack_on(
        kind,
        &VICTIMS[0].parse().expect("static victim"),
        framework,
        manager,
        user,
    )
}

pub fn run_attack_on(
    kind: AttackKind,
    victim: &DomainName,
    framework: FrameworkId,
    manager: Option<&ManagerProfile>,
    user: UserAgent,
) -> Result<AttackOutcome, AttackError> {
    let scenario = build_scenario(kind, victim)?;
    let log = run_logged(&scenario, framework, manager, user)?;
    Ok(classify(&log, &scenario.scene, user))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walmart() -> DomainName {
        "walmart.com".parse().unwrap()
    }

    #[test]
    fn literal_squats() {
        let p = squat_generator(&MappingScheme::Prefix, &walmart()).unwrap();
        assert_eq!(p.package_id.as_str(), "com.walmart.evil");
        let s = squat_generator(&MappingScheme::Substring, &walmart()).unwrap();
        assert_eq!(s.package_id.as_str(), "com.wal.evil");
        assert!(matches!(
            squat_generator(&MappingScheme::Bidirectional, &walmart()),
            Err(AttackError::UnsquattableScheme("bidirectional"))
        ));
        assert!(matches!(
            squat_generator(&MappingScheme::Prefix, &"ab.com".parse().unwrap()),
            Err(AttackError::VictimTooShort(_))
        ));
    }

    #[test]
    fn ids_round_trip() {
        for k in AttackKind::ALL {
            assert_eq!(k.id().parse::<AttackKind>().unwrap(), k);
        }
    }
}
