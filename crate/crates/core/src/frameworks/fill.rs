use std::collections::BTreeMap;

use rand::{Rng, RngCore};

use super::{CheckId, FillContext, FillDecision, FillMode, FillTarget, FrameworkError, Gate};
use crate::model::{AppIdentity, CredentialId, UserAgent};
use crate::webdoc::{
    make_placeholder, submit_form, Document, Endpoint, FillState, FormRef, OutboundRequest,
    Substitution, WebDocError,
};

/// Values written into a native login screen. Only the app that owns the
/// screen can read them back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NativeFill {
    owner: AppIdentity,
    values: BTreeMap<usize, String>,
}

impl NativeFill {
    pub fn owner(&self) -> &AppIdentity {
        &self.owner
    }

    /// Field values in field order, if `reader` is the owning app.
    pub fn read_native_fields(&self, reader: &AppIdentity) -> Option<Vec<String>> {
        reader
            .same_identity(&self.owner)
            .then(|| self.values.values().cloned().collect())
    }
}

/// Result of executing a fill decision.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FilledState {
    pub fill: FillState,
    pub native: Option<NativeFill>,
    pub credential: Option<CredentialId>,
    pub form: Option<FormRef>,
    substitution: Option<Substitution>,
}

impl FilledState {
    pub fn is_empty(&self) -> bool {
        self.credential.is_none()
    }

    /// Whether the framework still holds secrets to substitute on submit.
    pub fn pending_substitution(&self) -> bool {
        self.substitution.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Refusal {
    pub check: CheckId,
    pub destination: Endpoint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transmission {
    Sent(OutboundRequest),
    Refused(Refusal),
    /// Nothing was filled into a document.
    None,
}

pub fn execute_fill(
    decision: &FillDecision,
    user: UserAgent,
    ctx: &FillContext,
) -> Result<FilledState, FrameworkError> {
    execute_fill_with_rng(decision, user, ctx, &mut rand::thread_rng())
}

/// [`execute_fill`] with an explicit source for placeholder nonces.
pub fn execute_fill_with_rng<R: RngCore>(
    decision: &FillDecision,
    user: UserAgent,
    ctx: &FillContext,
    rng: &mut R,
) -> Result<FilledState, FrameworkError> {
    if decision.offered.is_empty() {
        return Ok(FilledState::default());
    }
    if decision.gate == Gate::NoGate {
        return Err(FrameworkError::GateBypassAttempt);
    }
    if !user.approves() {
        return Ok(FilledState::default());
    }
    let credential = &decision.offered[0];
    let mut out = FilledState {
        credential: Some(credential.id.clone()),
        ..FilledState::default()
    };
    match (&decision.target, ctx) {
        (
            FillTarget::Form {
                form,
                username,
                password,
            },
            FillContext::BrowserPage { .. } | FillContext::WebViewInApp { .. },
        ) => {
            out.fill
                .set(form.field(*username), credential.username.clone());
            let password_value = match decision.fill_mode {
                FillMode::IntoDocument => credential.password.expose().to_owned(),
                FillMode::OnTransmission => {
                    let nonce = format!("{:032x}", rng.gen::<u128>());
                    let placeholder = make_placeholder(&credential.id, &nonce);
                    let issued_for = decision.action_origin.clone().ok_or_else(|| {
                        FrameworkError::UnsupportedContext("no action origin to bind".into())
                    })?;
                    out.substitution = Some(Substitution {
                        issued_for,
                        entries: BTreeMap::from([(
                            placeholder.clone(),
                            credential.password.clone(),
                        )]),
                    });
                    placeholder
                }
            };
            out.fill.set(form.field(*password), password_value);
            out.form = Some(form.clone());
        }
        (FillTarget::Native { username, password }, FillContext::NativeUi { app, .. }) => {
            out.native = Some(NativeFill {
                owner: app.clone(),
                values: BTreeMap::from([
                    (*username, credential.username.clone()),
                    (*password, credential.password.expose().to_owned()),
                ]),
            });
        }
        _ => {
            return Err(FrameworkError::UnsupportedContext(
                "fill target does not match the context".into(),
            ))
        }
    }
    Ok(out)
}

/// Submits the filled form of `doc` as it stands now, substituting held
/// secrets when the destination is the one they were issued for.
pub fn complete_transmission(
    filled: &FilledState,
    doc: &Document,
) -> Result<Transmission, FrameworkError> {
    let Some(form) = &filled.form else {
        return Ok(Transmission::None);
    };
    match submit_form(doc, form, &filled.fill, filled.substitution.as_ref()) {
        Ok(request) => Ok(Transmission::Sent(request)),
        Err(WebDocError::MissingSubstitution) => Ok(Transmission::Refused(Refusal {
            check: CheckId::ActionDynamic,
            destination: doc.form(form)?.action.clone(),
        })),
        Err(e) => Err(e.into()),
    }
}
