use super::{Document, Field, FieldKind, FormRef};

/// A detected login form: the form plus the field indices the autofill
/// engine writes to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoginFormMatch {
    pub form: FormRef,
    pub username: usize,
    pub password: usize,
}

/// Login forms in the top-level document, in form order.
///
/// A form qualifies when it has exactly one password field and at least one
/// text-entry field. The username field is the nearest text-entry field
/// before the password field, or the first one after it when none precedes.
/// Visibility is ignored: hidden password fields still qualify.
pub fn detect_login_form(doc: &Document) -> Vec<LoginFormMatch> {
    doc.forms
        .iter()
        .enumerate()
        .filter_map(|(i, form)| classify_fields(&form.fields).map(|(u, p)| (FormRef::top(i), u, p)))
        .map(|(form, username, password)| LoginFormMatch {
            form,
            username,
            password,
        })
        .collect()
}

/// Login forms anywhere in the frame tree, in pre-order.
pub fn detect_in_tree(doc: &Document) -> Vec<LoginFormMatch> {
    let mut out = Vec::new();
    for (path, sub) in doc.walk() {
        for mut found in detect_login_form(sub) {
            found.form.frame_path = path.clone();
            out.push(found);
        }
    }
    out
}

/// (username, password) field indices of a login field set, if it is one.
pub fn classify_fields(fields: &[Field]) -> Option<(usize, usize)> {
    let mut passwords = fields
        .iter()
        .enumerate()
        .filter(|(_, f)| f.kind == FieldKind::Password)
        .map(|(i, _)| i);
    let password = passwords.next()?;
    if passwords.next().is_some() {
        return None;
    }
    let text_entry = |i: &usize| fields[*i].kind.is_text_entry();
    let username = (0..password)
        .rev()
        .find(text_entry)
        .or_else(|| (password + 1..fields.len()).find(text_entry))?;
    Some((username, password))
}
