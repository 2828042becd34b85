use super::{
    BlockReason, CheckId, FillContext, FillDecision, FillMode, FillTarget, FrameworkError,
    FrameworkId, Gate, IframePolicy, ManagerProfile, NativeScreen, TransportPolicy, Verdict,
    WebViewPolicy,
};
use crate::association::{
    map_by_heuristic, verify_any_platform, verify_in_scene, Decision, MappingScheme,
    MappingVerdict, NotVerifiedReason, Platform,
};
use crate::model::{
    credentials_for, AppIdentity, ConnectionSecurity, Credential, DomainName, Scene,
};
use crate::webdoc::{
    classify_fields, detect_login_form, Document, FieldKind, FormRef, Injector, Method,
};

#[derive(Default)]
struct Draft {
    offered: Vec<Credential>,
    warnings: Vec<String>,
    refused: Option<BlockReason>,
    checks: Vec<(CheckId, Verdict)>,
    mapping: Option<MappingVerdict>,
}

impl Draft {
    fn refuse(&mut self, reason: BlockReason) {
        self.offered.clear();
        self.refused.get_or_insert(reason);
    }

    fn delegated(&mut self, check: CheckId) {
        if !self.checks.contains(&(check, Verdict::Delegated)) {
            self.checks.push((check, Verdict::Delegated));
        }
    }

    fn offer(&mut self, creds: Vec<Credential>, otherwise: BlockReason) {
        if creds.is_empty() {
            self.refuse(otherwise);
        } else {
            self.offered = creds;
        }
    }
}

fn creds_for_domains(scene: &Scene, domains: &[DomainName]) -> Vec<Credential> {
    let mut out: Vec<Credential> = Vec::new();
    for d in domains {
        for c in credentials_for(&scene.vault, d) {
            if !out.iter().any(|o| o.id == c.id) {
                out.push(c);
            }
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

/// Decides gate, offer and fill mode for one autofill request.
///
/// Delegating frameworks consult `manager`; without one they fall back to
/// [`ManagerProfile::reference`] and mark each decision point they resolved
/// that way as `Delegated` in `checks`.
pub fn suggest(
    framework: FrameworkId,
    manager: Option<&ManagerProfile>,
    ctx: &FillContext,
    scene: &Scene,
) -> Result<FillDecision, FrameworkError> {
    if let Some(m) = manager {
        if m.framework != framework {
            return Err(FrameworkError::ManagerMismatch {
                manager: m.id.clone(),
                expected: m.framework,
                actual: framework,
            });
        }
    }
    let reference = manager.is_none() && framework.delegates();
    let profile = manager
        .cloned()
        .unwrap_or_else(|| ManagerProfile::reference(framework));
    let engine = Engine {
        framework,
        profile: &profile,
        reference,
        scene,
    };

    let mut draft = Draft::default();
    let (target, action_origin, mode) = match ctx {
        FillContext::BrowserPage { document, target } => {
            let t = engine.document(&mut draft, document, target, None)?;
            (
                t,
                Some(document.form(target)?.action.origin.clone()),
                engine.mode(),
            )
        }
        FillContext::WebViewInApp {
            host,
            document,
            host_scripts,
            target,
        } => {
            if host_scripts
                .iter()
                .any(|s| s.injected_by != Injector::HostApp)
            {
                return Err(FrameworkError::UnsupportedContext(
                    "host scripts must be injected by the host app".into(),
                ));
            }
            let t = engine.document(&mut draft, document, target, Some(host))?;
            (
                t,
                Some(document.form(target)?.action.origin.clone()),
                engine.mode(),
            )
        }
        FillContext::NativeUi {
            app,
            screen,
            requested_domain,
        } => {
            let t = native_target(screen)?;
            engine.native(&mut draft, app, requested_domain.as_ref());
            // Native fields are written straight into the app's own UI.
            (t, None, FillMode::IntoDocument)
        }
        FillContext::CustomDrawnUi { app } => {
            return Err(FrameworkError::UnsupportedContext(format!(
                "{} draws its own login UI",
                app.package_id
            )))
        }
    };

    Ok(FillDecision {
        gate: Gate::UserGateRequired,
        offered: draft.offered,
        fill_mode: mode,
        checks: draft.checks,
        warning: (!draft.warnings.is_empty()).then(|| draft.warnings.join("; ")),
        target,
        action_origin,
        refused: draft.refused,
        mapping: draft.mapping,
    })
}

fn native_target(screen: &NativeScreen) -> Result<FillTarget, FrameworkError> {
    let hinted = || {
        let u = screen
            .fields
            .iter()
            .position(|f| f.kind == FieldKind::Username)?;
        let p = screen
            .fields
            .iter()
            .position(|f| f.kind == FieldKind::Password)?;
        Some((u, p))
    };
    let found = if screen.annotated {
        hinted().or_else(|| classify_fields(&screen.fields))
    } else {
        classify_fields(&screen.fields)
    };
    let (username, password) = found.ok_or(FrameworkError::NoLoginForm)?;
    Ok(FillTarget::Native { username, password })
}

struct Engine<'a> {
    framework: FrameworkId,
    profile: &'a ManagerProfile,
    reference: bool,
    scene: &'a Scene,
}

impl Engine<'_> {
    fn mode(&self) -> FillMode {
        if self.framework == FrameworkId::SecureModel {
            FillMode::OnTransmission
        } else {
            FillMode::IntoDocument
        }
    }

    fn document(
        &self,
        d: &mut Draft,
        doc: &Document,
        target: &FormRef,
        host: Option<&AppIdentity>,
    ) -> Result<FillTarget, FrameworkError> {
        let page = doc.frame_doc(&target.frame_path)?;
        let found = detect_login_form(page)
            .into_iter()
            .find(|m| m.form.form == target.form)
            .ok_or(FrameworkError::NoLoginForm)?;
        let fill_target = FillTarget::Form {
            form: target.clone(),
            username: found.username,
            password: found.password,
        };
        let page_origin = &page.origin;
        let form = doc.form(target)?;
        let cross_origin = doc.is_cross_origin(&target.frame_path)?;
        let by_page = creds_for_domains(self.scene, std::slice::from_ref(&page_origin.domain));
        let no_creds = BlockReason::Check(CheckId::DomainMapping);

        // Worst transport among the top document and the framed page.
        let transport = [&doc.origin.security, &page_origin.security]
            .into_iter()
            .find(|s| matches!(s, ConnectionSecurity::Http))
            .or_else(|| {
                [&doc.origin.security, &page_origin.security]
                    .into_iter()
                    .find(|s| !s.is_authenticated())
            });

        match self.framework {
            FrameworkId::SecureModel => {
                if let Some(sec) = transport {
                    d.refuse(BlockReason::Check(transport_check(sec)));
                } else if cross_origin {
                    d.refuse(BlockReason::Check(CheckId::CrossOriginIframe));
                } else if !form.action.origin.same_origin(page_origin) {
                    d.refuse(BlockReason::Check(CheckId::ActionStatic));
                } else if form.method == Method::Get {
                    d.refuse(BlockReason::Check(CheckId::MethodGet));
                } else {
                    d.offer(by_page, no_creds);
                }
            }
            FrameworkId::IosPasswordAutofill => d.offer(by_page, no_creds),
            FrameworkId::IosExtensions | FrameworkId::AndroidAutofillService => {
                if cross_origin {
                    if self.framework == FrameworkId::IosExtensions {
                        d.refuse(BlockReason::Check(CheckId::CrossOriginIframe));
                        return Ok(fill_target);
                    }
                    if self.reference {
                        d.delegated(CheckId::CrossOriginIframe);
                    }
                    match self.profile.iframe_policy {
                        IframePolicy::Fill => {}
                        IframePolicy::Warn => d
                            .warnings
                            .push(format!("login form is framed from {}", page_origin)),
                        IframePolicy::Block => {
                            d.refuse(BlockReason::Check(CheckId::CrossOriginIframe));
                            return Ok(fill_target);
                        }
                    }
                }
                if let Some(sec) = transport {
                    let policy = match sec {
                        ConnectionSecurity::Http => self.profile.on_http,
                        _ => self.profile.on_bad_cert,
                    };
                    match policy {
                        TransportPolicy::Fill => {}
                        TransportPolicy::Warn => d
                            .warnings
                            .push(format!("connection to {page_origin} is not secure")),
                        TransportPolicy::Refuse => {
                            d.refuse(BlockReason::Check(transport_check(sec)));
                            return Ok(fill_target);
                        }
                    }
                }
                match host {
                    None => d.offer(by_page, no_creds),
                    Some(host) => {
                        if self.reference {
                            d.delegated(CheckId::DomainMapping);
                        }
                        match self.profile.webview_policy {
                            WebViewPolicy::ByPageDomain => d.offer(by_page, no_creds),
                            WebViewPolicy::ByAppMapping => self.offer_app_mapping(d, host),
                            WebViewPolicy::Refuse => d.refuse(no_creds),
                        }
                    }
                }
            }
        }
        Ok(fill_target)
    }

    fn native(&self, d: &mut Draft, app: &AppIdentity, requested: Option<&DomainName>) {
        let known = self.scene.vault.known_domains();
        match self.framework {
            FrameworkId::IosPasswordAutofill | FrameworkId::SecureModel => {
                let platforms: &[Platform] = if self.framework == FrameworkId::SecureModel {
                    &Platform::ALL
                } else {
                    &[Platform::AppleStyle]
                };
                let mut verified = Vec::new();
                let mut first_failure = None;
                for domain in &known {
                    let v = if platforms.len() == 1 {
                        verify_in_scene(app, domain, self.scene, platforms[0])
                    } else {
                        verify_any_platform(app, domain, self.scene, platforms)
                    };
                    match v.reason() {
                        None => verified.push(domain.clone()),
                        Some(r) => {
                            // Prefer the most specific failure over "not entitled".
                            if first_failure.is_none()
                                || (first_failure == Some(NotVerifiedReason::NotEntitled)
                                    && r != NotVerifiedReason::NotEntitled)
                            {
                                first_failure = Some(r);
                            }
                        }
                    }
                }
                let reason = first_failure.unwrap_or(NotVerifiedReason::NotEntitled);
                d.mapping = Some(if verified.is_empty() {
                    MappingVerdict::not_verified(reason)
                } else {
                    MappingVerdict::verified(verified.clone())
                });
                d.offer(
                    creds_for_domains(self.scene, &verified),
                    BlockReason::Mapping(reason),
                );
            }
            FrameworkId::IosExtensions => {
                // The app names the domain; nothing checks the claim.
                let domains: Vec<DomainName> = match requested {
                    Some(dom) => vec![dom.clone()],
                    None => app.entitled_domains.clone(),
                };
                d.offer(
                    creds_for_domains(self.scene, &domains),
                    BlockReason::Mapping(NotVerifiedReason::NoHeuristicMatch),
                );
            }
            FrameworkId::AndroidAutofillService => {
                if self.reference {
                    d.delegated(CheckId::AppToDomain);
                    d.delegated(CheckId::DomainToApp);
                }
                self.offer_app_mapping(d, app);
            }
        }
    }

    /// Offers whatever the manager maps `app` to.
    fn offer_app_mapping(&self, d: &mut Draft, app: &AppIdentity) {
        if self.framework == FrameworkId::IosExtensions {
            d.offer(
                creds_for_domains(self.scene, &app.entitled_domains),
                BlockReason::Mapping(NotVerifiedReason::NotEntitled),
            );
            return;
        }
        let known = self.scene.vault.known_domains();
        let primary = self
            .profile
            .native_scheme
            .clone()
            .unwrap_or(MappingScheme::Manual);
        let mut used = primary.clone();
        let mut verdict = map_by_heuristic(&primary, app, &known, self.scene);
        if let (Decision::NotVerified(_), Some(fallback)) =
            (verdict.decision, &self.profile.fallback_scheme)
        {
            let second = map_by_heuristic(fallback, app, &known, self.scene);
            if !matches!(second.decision, Decision::NotVerified(_)) {
                verdict = second;
                used = fallback.clone();
            }
        }
        match (&used, verdict.decision) {
            (MappingScheme::DevWebsite, Decision::UserConfirmRequired) => d.warnings.push(format!(
                "{} is mapped by its unverified developer website",
                app.package_id
            )),
            (MappingScheme::Manual, Decision::UserConfirmRequired)
                if self.profile.warns_on_manual =>
            {
                d.warnings.push(format!(
                    "associating {} with a domain is up to you",
                    app.package_id
                ))
            }
            _ => {}
        }
        match verdict.decision {
            Decision::NotVerified(r) => d.refuse(BlockReason::Mapping(r)),
            _ => d.offer(
                creds_for_domains(self.scene, &verdict.matched_domains),
                BlockReason::Mapping(NotVerifiedReason::NoHeuristicMatch),
            ),
        }
        d.mapping = Some(verdict);
    }
}

fn transport_check(sec: &ConnectionSecurity) -> CheckId {
    match sec {
        ConnectionSecurity::Http => CheckId::HttpsDowngrade,
        _ => CheckId::BadCert,
    }
}
