use super::{
    Document, ExfilChannel, Exfiltration, FillState, FormRef, Injector, ScriptAction, ScriptEvent,
    ScriptPhase, WebDocError,
};
use crate::model::PackageId;

/// Where a document is being displayed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mount {
    Browser,
    /// Inside a WebView owned by `host`, which may inject its own scripts
    /// into the top-level document.
    WebView {
        host: PackageId,
        host_scripts: Vec<ScriptEvent>,
    },
}

impl Mount {
    fn host(&self) -> Option<&PackageId> {
        match self {
            Mount::Browser => None,
            Mount::WebView { host, .. } => Some(host),
        }
    }
}

/// Values a script can read from a form: everything currently placed in its
/// fields, in field order.
pub fn scrape_form(
    doc: &Document,
    form: &FormRef,
    fill: &FillState,
) -> Result<Vec<String>, WebDocError> {
    let target = doc.form(form)?;
    Ok((0..target.fields.len())
        .filter_map(|i| fill.get(&form.field(i)).map(str::to_owned))
        .collect())
}

/// Runs every script registered for `phase`: page scripts of each frame in
/// pre-order, then host-injected scripts against the top-level document.
///
/// Scripts only touch forms of the document they live in. Each document
/// keeps its own scrape buffer for the phase; exfiltration events carry
/// whatever that buffer holds at the time they run.
pub fn run_script_phase(
    doc: &mut Document,
    phase: ScriptPhase,
    fill: &FillState,
    mount: &Mount,
) -> Result<Vec<Exfiltration>, WebDocError> {
    let mut out = Vec::new();
    let paths: Vec<Vec<usize>> = doc.walk().into_iter().map(|(p, _)| p).collect();
    for path in paths {
        let scripts: Vec<ScriptEvent> = doc
            .frame_doc(&path)?
            .scripts
            .iter()
            .filter(|s| s.phase == phase)
            .cloned()
            .collect();
        run_batch(doc, &path, &scripts, fill, mount, &mut out)?;
    }
    if let Mount::WebView { host_scripts, .. } = mount {
        let scripts: Vec<ScriptEvent> = host_scripts
            .iter()
            .filter(|s| s.phase == phase)
            .cloned()
            .collect();
        run_batch(doc, &[], &scripts, fill, mount, &mut out)?;
    }
    Ok(out)
}

fn run_batch(
    root: &mut Document,
    path: &[usize],
    scripts: &[ScriptEvent],
    fill: &FillState,
    mount: &Mount,
    out: &mut Vec<Exfiltration>,
) -> Result<(), WebDocError> {
    let mut buffer: Vec<String> = Vec::new();
    for script in scripts {
        if script.injected_by == Injector::HostApp && mount.host().is_none() {
            return Err(WebDocError::HostScriptOutsideWebView);
        }
        let doc = root.frame_doc_mut(path)?;
        let source = doc.origin.clone();
        match &script.action {
            ScriptAction::RewriteAction { form, to } => {
                let target = doc
                    .forms
                    .get_mut(*form)
                    .ok_or(WebDocError::BadFormIndex(*form))?;
                target.action = to.clone();
            }
            ScriptAction::ScrapeFields { form } => {
                let form_ref = FormRef {
                    frame_path: path.to_vec(),
                    form: *form,
                };
                buffer.extend(scrape_form(root, &form_ref, fill)?);
            }
            ScriptAction::ExfiltrateTo(dest) => out.push(Exfiltration {
                source,
                injected_by: script.injected_by,
                channel: ExfilChannel::Network(dest.clone()),
                values: buffer.clone(),
            }),
            ScriptAction::PostToBridge { channel } => {
                // Without a hosting app there is no bridge to post to.
                if let Some(host) = mount.host() {
                    out.push(Exfiltration {
                        source,
                        injected_by: script.injected_by,
                        channel: ExfilChannel::Bridge {
                            channel: channel.clone(),
                            host: host.clone(),
                        },
                        values: buffer.clone(),
                    });
                }
            }
        }
    }
    Ok(())
}
