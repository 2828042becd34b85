//! Parser for the HTML subset used by scene documents.
//!
//! Supported tags are `form`, `input`, `iframe` and the custom
//! `script-event`. Text between tags and `<!-- comments -->` are ignored.
//! The grammar is documented in `docs/html-subset.md`.

use super::{
    Document, DocumentSpec, Field, FieldKind, FormSpec, FrameSpec, Injector, Method,
    ScriptActionSpec, ScriptPhase, ScriptSpec, WebDocError,
};
use crate::model::Origin;

/// Parses `source` and mounts it at `origin`.
pub fn parse_document(source: &str, origin: &Origin) -> Result<Document, WebDocError> {
    parse_spec(source)?.resolve(origin)
}

pub(crate) fn parse_spec(source: &str) -> Result<DocumentSpec, WebDocError> {
    Parser::new(source).run()
}

struct Tag {
    name: String,
    closing: bool,
    self_closing: bool,
    attrs: Vec<(String, Option<String>)>,
    at: usize,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

const FORM_ATTRS: &[&str] = &["action", "method"];
const INPUT_ATTRS: &[&str] = &["type", "name", "autocomplete", "hidden", "value"];
const IFRAME_ATTRS: &[&str] = &["src", "hidden"];
const SCRIPT_ATTRS: &[&str] = &["phase", "do", "form", "to", "channel", "by"];

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    fn line_col(&self, at: usize) -> (usize, usize) {
        let before = &self.src[..at];
        let line = before.matches('\n').count() + 1;
        let column = before.rfind('\n').map_or(at, |nl| at - nl - 1) + 1;
        (line, column)
    }

    fn error(&self, at: usize, message: impl Into<String>) -> WebDocError {
        let (line, column) = self.line_col(at);
        WebDocError::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn run(mut self) -> Result<DocumentSpec, WebDocError> {
        let mut doc = DocumentSpec::default();
        let mut open_form: Option<(FormSpec, usize)> = None;

        // Text content up to the next tag is skipped.
        while let Some(off) = self.rest().find('<') {
            self.pos += off;
            if self.rest().starts_with("<!--") {
                let start = self.pos;
                match self.rest().find("-->") {
                    Some(end) => self.pos += end + 3,
                    None => return Err(self.error(start, "unterminated comment")),
                }
                continue;
            }
            let tag = self.tag()?;
            match (tag.name.as_str(), tag.closing) {
                ("form", false) => {
                    if open_form.is_some() {
                        return Err(self.error(tag.at, "nested <form>"));
                    }
                    self.check_attrs(&tag, FORM_ATTRS)?;
                    let method = match attr(&tag, "method").map(str::to_ascii_lowercase) {
                        None => Method::Get,
                        Some(m) if m == "get" => Method::Get,
                        Some(m) if m == "post" => Method::Post,
                        Some(m) => return Err(self.error(tag.at, format!("unknown method {m:?}"))),
                    };
                    let form = FormSpec {
                        action: attr(&tag, "action").unwrap_or("").to_owned(),
                        method,
                        fields: Vec::new(),
                    };
                    if tag.self_closing {
                        doc.forms.push(form);
                    } else {
                        open_form = Some((form, tag.at));
                    }
                }
                ("form", true) => match open_form.take() {
                    Some((form, _)) => doc.forms.push(form),
                    None => return Err(self.error(tag.at, "</form> without open <form>")),
                },
                ("input", false) => {
                    self.check_attrs(&tag, INPUT_ATTRS)?;
                    let Some((form, _)) = open_form.as_mut() else {
                        return Err(self.error(tag.at, "<input> outside of a <form>"));
                    };
                    form.fields.push(input_field(&tag));
                }
                ("iframe", false) => {
                    self.check_attrs(&tag, IFRAME_ATTRS)?;
                    let Some(src) = attr(&tag, "src") else {
                        return Err(self.error(tag.at, "<iframe> requires src"));
                    };
                    doc.frames.push(FrameSpec {
                        src: src.to_owned(),
                        hidden: has_attr(&tag, "hidden"),
                    });
                    if !tag.self_closing {
                        self.expect_close("iframe", tag.at)?;
                    }
                }
                ("script-event", false) => {
                    self.check_attrs(&tag, SCRIPT_ATTRS)?;
                    doc.scripts.push(self.script_event(&tag)?);
                    if !tag.self_closing {
                        self.expect_close("script-event", tag.at)?;
                    }
                }
                ("input", true) => return Err(self.error(tag.at, "</input> is not allowed")),
                ("iframe" | "script-event", true) => {
                    return Err(self.error(tag.at, format!("unexpected </{}>", tag.name)))
                }
                (other, _) => {
                    let (line, column) = self.line_col(tag.at);
                    return Err(WebDocError::UnsupportedTag {
                        tag: other.to_owned(),
                        line,
                        column,
                    });
                }
            }
        }

        if let Some((_, at)) = open_form {
            return Err(self.error(at, "unclosed <form>"));
        }
        Ok(doc)
    }

    fn expect_close(&mut self, name: &str, opened_at: usize) -> Result<(), WebDocError> {
        let text_end = self.rest().find('<').map(|o| self.pos + o);
        let Some(end) = text_end else {
            return Err(self.error(opened_at, format!("unclosed <{name}>")));
        };
        if !self.src[self.pos..end].trim().is_empty() {
            return Err(self.error(self.pos, format!("<{name}> must not have content")));
        }
        self.pos = end;
        let tag = self.tag()?;
        if tag.closing && tag.name == name {
            Ok(())
        } else {
            Err(self.error(tag.at, format!("expected </{name}>")))
        }
    }

    fn tag(&mut self) -> Result<Tag, WebDocError> {
        let at = self.pos;
        self.bump(); // '<'
        let closing = if self.peek() == Some('/') {
            self.bump();
            true
        } else {
            false
        };
        let name = self.ident();
        if name.is_empty() {
            return Err(self.error(at, "expected tag name"));
        }
        let mut attrs = Vec::new();
        let mut self_closing = false;
        loop {
            self.skip_ws();
            match self.peek() {
                None => return Err(self.error(at, "unterminated tag")),
                Some('>') => {
                    self.bump();
                    break;
                }
                Some('/') if self.rest().starts_with("/>") => {
                    self.pos += 2;
                    self_closing = true;
                    break;
                }
                Some(_) => {
                    if closing {
                        return Err(self.error(self.pos, "closing tag takes no attributes"));
                    }
                    let attr_at = self.pos;
                    let key = self.ident();
                    if key.is_empty() {
                        return Err(self.error(attr_at, "expected attribute name"));
                    }
                    self.skip_ws();
                    let value = if self.peek() == Some('=') {
                        self.bump();
                        self.skip_ws();
                        Some(self.attr_value()?)
                    } else {
                        None
                    };
                    if attrs.iter().any(|(k, _): &(String, _)| *k == key) {
                        return Err(self.error(attr_at, format!("duplicate attribute {key:?}")));
                    }
                    attrs.push((key, value));
                }
            }
        }
        Ok(Tag {
            name: name.to_ascii_lowercase(),
            closing,
            self_closing,
            attrs,
            at,
        })
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            self.bump();
        }
        self.src[start..self.pos].to_ascii_lowercase()
    }

    fn attr_value(&mut self) -> Result<String, WebDocError> {
        let at = self.pos;
        match self.peek() {
            Some(q @ ('"' | '\'')) => {
                self.bump();
                let Some(end) = self.rest().find(q) else {
                    return Err(self.error(at, "unterminated attribute value"));
                };
                let value = self.rest()[..end].to_owned();
                self.pos += end + 1;
                Ok(value)
            }
            _ => {
                let start = self.pos;
                while self
                    .peek()
                    .is_some_and(|c| !c.is_whitespace() && c != '>' && c != '"' && c != '\'')
                {
                    if self.rest().starts_with("/>") {
                        break;
                    }
                    self.bump();
                }
                if start == self.pos {
                    return Err(self.error(at, "expected attribute value"));
                }
                Ok(self.src[start..self.pos].to_owned())
            }
        }
    }

    fn check_attrs(&self, tag: &Tag, allowed: &[&str]) -> Result<(), WebDocError> {
        for (key, _) in &tag.attrs {
            if !allowed.contains(&key.as_str()) {
                return Err(self.error(
                    tag.at,
                    format!("attribute {key:?} is not supported on <{}>", tag.name),
                ));
            }
        }
        Ok(())
    }

    fn script_event(&self, tag: &Tag) -> Result<ScriptSpec, WebDocError> {
        let required = |key: &str| {
            attr(tag, key)
                .ok_or_else(|| self.error(tag.at, format!("<script-event> requires {key}")))
        };
        let phase = match required("phase")? {
            "on-load" => ScriptPhase::OnLoad,
            "pre-fill" => ScriptPhase::PreFill,
            "post-fill" => ScriptPhase::PostFill,
            other => return Err(self.error(tag.at, format!("unknown phase {other:?}"))),
        };
        let form = match attr(tag, "form") {
            None => 0,
            Some(v) => v
                .parse()
                .map_err(|_| self.error(tag.at, format!("bad form index {v:?}")))?,
        };
        let action = match required("do")? {
            "rewrite-action" => ScriptActionSpec::RewriteAction {
                form,
                to: required("to")?.to_owned(),
            },
            "scrape" => ScriptActionSpec::Scrape { form },
            "exfiltrate" => ScriptActionSpec::Exfiltrate {
                to: required("to")?.to_owned(),
            },
            "post-to-bridge" => ScriptActionSpec::PostToBridge {
                channel: required("channel")?.to_owned(),
            },
            other => return Err(self.error(tag.at, format!("unknown script action {other:?}"))),
        };
        let injected_by = match attr(tag, "by") {
            None | Some("page") => Injector::Page,
            Some("host-app") => Injector::HostApp,
            Some(other) => return Err(self.error(tag.at, format!("unknown injector {other:?}"))),
        };
        Ok(ScriptSpec {
            phase,
            action,
            injected_by,
        })
    }
}

fn attr<'t>(tag: &'t Tag, key: &str) -> Option<&'t str> {
    tag.attrs
        .iter()
        .find(|(k, _)| k == key)
        .and_then(|(_, v)| v.as_deref())
}

fn has_attr(tag: &Tag, key: &str) -> bool {
    tag.attrs.iter().any(|(k, _)| k == key)
}

fn input_field(tag: &Tag) -> Field {
    let ty = attr(tag, "type").unwrap_or("text").to_ascii_lowercase();
    let autocomplete = attr(tag, "autocomplete").map(str::to_ascii_lowercase);
    let kind = match ty.as_str() {
        "password" => FieldKind::Password,
        "text" | "email" | "tel" if autocomplete.as_deref() == Some("username") => {
            FieldKind::Username
        }
        "text" | "email" | "tel" => FieldKind::Text,
        other => FieldKind::Other(other.to_owned()),
    };
    Field {
        name: attr(tag, "name").unwrap_or("").to_owned(),
        visible: !has_attr(tag, "hidden") && ty != "hidden",
        autocomplete_off: autocomplete.as_deref() == Some("off"),
        value: attr(tag, "value").map(str::to_owned),
        kind,
    }
}
