use super::{
    complete_transmission, execute_fill, suggest, FillContext, FillDecision, FilledState,
    FrameworkError, FrameworkId, ManagerProfile, Transmission,
};
use crate::model::{AppIdentity, Origin, Scene, UserAgent};
use crate::webdoc::{
    run_script_phase, Document, ExfilChannel, Exfiltration, FillState, Method, Mount, ScriptPhase,
};

/// Who ended up holding a set of values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Destination {
    Origin(Origin),
    App(AppIdentity),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaptureVia {
    FormSubmission,
    Script,
    Bridge,
    /// Query parameters visible to frames embedded in the submitting page.
    Referer,
    NativeRead,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Capture {
    pub destination: Destination,
    pub via: CaptureVia,
    pub values: Vec<String>,
}

/// Everything observable about one end-to-end autofill run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CeremonyLog {
    pub decision: FillDecision,
    pub filled: FilledState,
    pub transmission: Transmission,
    pub captures: Vec<Capture>,
    /// The document after every script phase ran.
    pub document: Option<Document>,
}

/// Runs load scripts, the framework decision, the fill, post-fill scripts
/// and finally the form submission.
pub fn run_ceremony(
    framework: FrameworkId,
    manager: Option<&ManagerProfile>,
    ctx: &FillContext,
    scene: &Scene,
    user: UserAgent,
) -> Result<CeremonyLog, FrameworkError> {
    let mut ctx = ctx.clone();
    let (mount, host) = match &ctx {
        FillContext::WebViewInApp {
            host, host_scripts, ..
        } => (
            Mount::WebView {
                host: host.package_id.clone(),
                host_scripts: host_scripts.clone(),
            },
            Some(host.clone()),
        ),
        _ => (Mount::Browser, None),
    };
    let mut captures = Vec::new();
    let empty = FillState::new();

    if let Some(doc) = document_mut(&mut ctx) {
        let ex = run_script_phase(doc, ScriptPhase::OnLoad, &empty, &mount)?;
        captures.extend(ex.into_iter().map(|e| capture(e, host.as_ref())));
    }
    let decision = suggest(framework, manager, &ctx, scene)?;
    if let Some(doc) = document_mut(&mut ctx) {
        let ex = run_script_phase(doc, ScriptPhase::PreFill, &empty, &mount)?;
        captures.extend(ex.into_iter().map(|e| capture(e, host.as_ref())));
    }
    let filled = execute_fill(&decision, user, &ctx)?;
    let mut transmission = Transmission::None;
    if let Some(doc) = document_mut(&mut ctx) {
        let ex = run_script_phase(doc, ScriptPhase::PostFill, &filled.fill, &mount)?;
        captures.extend(ex.into_iter().map(|e| capture(e, host.as_ref())));
        transmission = complete_transmission(&filled, doc)?;
        if let (Transmission::Sent(request), Some(form)) = (&transmission, &filled.form) {
            let values: Vec<String> = request.all_values().map(str::to_owned).collect();
            captures.push(Capture {
                destination: Destination::Origin(request.destination.origin.clone()),
                via: CaptureVia::FormSubmission,
                values,
            });
            if request.method == Method::Get && !request.url_params.is_empty() {
                let page = doc.frame_doc(&form.frame_path)?;
                for frame in &page.frames {
                    if !frame.origin().same_origin(&page.origin) {
                        captures.push(Capture {
                            destination: Destination::Origin(frame.origin().clone()),
                            via: CaptureVia::Referer,
                            values: request.url_params.values().cloned().collect(),
                        });
                    }
                }
            }
        }
    }
    let document = ctx.document().cloned();
    Ok(CeremonyLog {
        decision,
        filled,
        transmission,
        captures,
        document,
    })
}

fn document_mut(ctx: &mut FillContext) -> Option<&mut Document> {
    match ctx {
        FillContext::BrowserPage { document, .. } | FillContext::WebViewInApp { document, .. } => {
            Some(document)
        }
        _ => None,
    }
}

fn capture(e: Exfiltration, host: Option<&AppIdentity>) -> Capture {
    match e.channel {
        ExfilChannel::Network(origin) => Capture {
            destination: Destination::Origin(origin),
            via: CaptureVia::Script,
            values: e.values,
        },
        ExfilChannel::Bridge { .. } => Capture {
            destination: Destination::App(host.cloned().expect("bridge only exists in a WebView")),
            via: CaptureVia::Bridge,
            values: e.values,
        },
    }
}
