use std::collections::BTreeMap;

use super::{Document, FillState, FormRef, Method, OutboundRequest, WebDocError};
use crate::model::{CredentialId, Origin, Secret};

const PH_OPEN: &str = "⟦PH:";
const PH_CLOSE: &str = "⟧";

pub fn make_placeholder(id: &CredentialId, nonce: &str) -> String {
    format!("{PH_OPEN}{id}:{nonce}{PH_CLOSE}")
}

pub fn is_placeholder(value: &str) -> bool {
    value.starts_with(PH_OPEN) && value.ends_with(PH_CLOSE)
}

/// Placeholder-to-secret table held by the autofill framework. It is only
/// honoured for requests whose destination is `issued_for`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Substitution {
    pub issued_for: Origin,
    pub entries: BTreeMap<String, Secret>,
}

/// Serializes the form at `form` against its current action.
///
/// Field values come from `fill`, falling back to the field's own `value`.
/// With a substitution table every placeholder is swapped for its secret;
/// a placeholder with no entry, or a destination other than the one the
/// table was issued for, fails with `MissingSubstitution`.
pub fn submit_form(
    doc: &Document,
    form: &FormRef,
    fill: &FillState,
    substitution: Option<&Substitution>,
) -> Result<OutboundRequest, WebDocError> {
    let target = doc.form(form)?;
    let mut params = BTreeMap::new();
    for (i, field) in target.fields.iter().enumerate() {
        let value = match fill.get(&form.field(i)) {
            Some(v) => v.to_owned(),
            None => match &field.value {
                Some(v) => v.clone(),
                None => continue,
            },
        };
        let value = match substitution {
            Some(sub) if is_placeholder(&value) => {
                if !target.action.origin.same_origin(&sub.issued_for) {
                    return Err(WebDocError::MissingSubstitution);
                }
                sub.entries
                    .get(&value)
                    .ok_or(WebDocError::MissingSubstitution)?
                    .expose()
                    .to_owned()
            }
            _ => value,
        };
        let key = if field.name.is_empty() {
            format!("field{i}")
        } else {
            field.name.clone()
        };
        params.insert(key, value);
    }
    let (body_params, url_params) = match target.method {
        Method::Post => (params, BTreeMap::new()),
        Method::Get => (BTreeMap::new(), params),
    };
    Ok(OutboundRequest {
        destination: target.action.clone(),
        method: target.method,
        body_params,
        url_params,
    })
}
