//! Parser for the declarative schema format.
//!
//! ```text
//! domain <name>
//! type <name> [: <parent>]
//! predicate <name>(<type>, ...) [unique] [visibility]
//! action <name>(?v: <type>, ...)
//!   pre <lit>, ...
//!   add <atom>, ...
//!   del <atom>, ...
//! end
//! rule <id>: <lit|guard>, ... => <lit>
//! query <atom> observe
//! query <atom> reveal ?v via <action>
//! query <atom> reveal location(?v) via <action>
//! ```
//!
//! A literal is an atom optionally prefixed with `!`. Guards are `?a != ?b`
//! and `?v : <type>`. `#` starts a comment.

use std::collections::{BTreeMap, BTreeSet};

use super::{
    ActionTemplate, Atom, DomainError, DomainSchema, EntailmentRule, Guard, Literal, Param,
    PredicateDecl, QueryPolicy, RevealTarget, Term, TypeDecl,
};
use crate::store::is_ident_char;

fn err(line: usize, msg: impl Into<String>) -> DomainError {
    DomainError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Splits on commas that are not nested inside parentheses.
fn split_top(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    let tail = s[start..].trim();
    if !tail.is_empty() || !out.is_empty() {
        out.push(tail);
    }
    out.into_iter().filter(|p| !p.is_empty()).collect()
}

fn ident(line: usize, s: &str) -> Result<String, DomainError> {
    let s = s.trim();
    if s.is_empty() || !s.chars().all(is_ident_char) {
        return Err(err(line, format!("bad identifier `{s}`")));
    }
    Ok(s.to_string())
}

fn var(line: usize, s: &str) -> Result<String, DomainError> {
    let s = s.trim();
    match s.strip_prefix('?') {
        Some(v) => ident(line, v),
        None => Err(err(line, format!("expected variable, got `{s}`"))),
    }
}

fn term(line: usize, s: &str) -> Result<Term, DomainError> {
    let s = s.trim();
    if s.starts_with('?') {
        Ok(Term::Var(var(line, s)?))
    } else {
        Ok(Term::Const(ident(line, s)?))
    }
}

fn atom(line: usize, s: &str) -> Result<Atom, DomainError> {
    let s = s.trim();
    let open = s
        .find('(')
        .ok_or_else(|| err(line, format!("expected atom, got `{s}`")))?;
    if !s.ends_with(')') {
        return Err(err(line, format!("unterminated atom `{s}`")));
    }
    let predicate = ident(line, &s[..open])?;
    let inner = &s[open + 1..s.len() - 1];
    let args = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner
            .split(',')
            .map(|a| term(line, a))
            .collect::<Result<_, _>>()?
    };
    Ok(Atom { predicate, args })
}

fn literal(line: usize, s: &str) -> Result<Literal, DomainError> {
    let s = s.trim();
    match s.strip_prefix('!') {
        Some(rest) => Ok(Literal {
            atom: atom(line, rest)?,
            value: false,
        }),
        None => Ok(Literal {
            atom: atom(line, s)?,
            value: true,
        }),
    }
}

fn guard(line: usize, s: &str) -> Result<Option<Guard>, DomainError> {
    if let Some((a, b)) = s.split_once("!=") {
        return Ok(Some(Guard::Distinct(var(line, a)?, var(line, b)?)));
    }
    if s.trim_start().starts_with('?') {
        if let Some((v, t)) = s.split_once(':') {
            return Ok(Some(Guard::HasType(var(line, v)?, ident(line, t)?)));
        }
    }
    Ok(None)
}

#[derive(Default)]
struct ActionDraft {
    name: String,
    params: Vec<Param>,
    pre: Vec<Literal>,
    add: Vec<Atom>,
    del: Vec<Atom>,
}

/// `<id>: <premises and guards> => <conclusion>`.
pub(super) fn rule(line: usize, rest: &str) -> Result<EntailmentRule, DomainError> {
    let (id, body) = rest
        .split_once(':')
        .ok_or_else(|| err(line, "rule needs `<id>:`"))?;
    let id = ident(line, id)?;
    let (lhs, rhs) = body
        .split_once("=>")
        .ok_or_else(|| err(line, "rule needs `=>`"))?;
    let mut premises = Vec::new();
    let mut guards = Vec::new();
    for item in split_top(lhs) {
        match guard(line, item)? {
            Some(g) => guards.push(g),
            None => premises.push(literal(line, item)?),
        }
    }
    Ok(EntailmentRule {
        id,
        premises,
        conclusion: literal(line, rhs)?,
        guards,
        enabled: true,
    })
}

pub(super) fn parse_schema(text: &str) -> Result<DomainSchema, DomainError> {
    let mut schema = DomainSchema {
        name: String::new(),
        types: Vec::new(),
        predicates: Vec::new(),
        actions: Vec::new(),
        rules: Vec::new(),
        queries: Vec::new(),
    };
    let mut draft: Option<ActionDraft> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (kw, rest) = content
            .split_once(char::is_whitespace)
            .map(|(k, r)| (k, r.trim()))
            .unwrap_or((content, ""));

        if let Some(d) = draft.as_mut() {
            match kw {
                "pre" => d.pre.extend(
                    split_top(rest)
                        .into_iter()
                        .map(|s| literal(line, s))
                        .collect::<Result<Vec<_>, _>>()?,
                ),
                "add" => d.add.extend(
                    split_top(rest)
                        .into_iter()
                        .map(|s| atom(line, s))
                        .collect::<Result<Vec<_>, _>>()?,
                ),
                "del" => d.del.extend(
                    split_top(rest)
                        .into_iter()
                        .map(|s| atom(line, s))
                        .collect::<Result<Vec<_>, _>>()?,
                ),
                "end" => {
                    let d = draft.take().unwrap();
                    schema.actions.push(ActionTemplate {
                        name: d.name,
                        params: d.params,
                        preconditions: d.pre,
                        add_effects: d.add,
                        delete_effects: d.del,
                    });
                }
                other => return Err(err(line, format!("unexpected `{other}` inside action"))),
            }
            continue;
        }

        match kw {
            "domain" => schema.name = ident(line, rest)?,
            "type" => {
                let (name, parent) = match rest.split_once(':') {
                    Some((n, p)) => (ident(line, n)?, Some(ident(line, p)?)),
                    None => (ident(line, rest)?, None),
                };
                schema.types.push(TypeDecl { name, parent });
            }
            "predicate" => {
                let close = rest
                    .rfind(')')
                    .ok_or_else(|| err(line, "predicate needs a parameter list"))?;
                let head = &rest[..=close];
                let flags: Vec<&str> = rest[close + 1..].split_whitespace().collect();
                let open = head.find('(').ok_or_else(|| err(line, "missing `(`"))?;
                let name = ident(line, &head[..open])?;
                let inner = &head[open + 1..head.len() - 1];
                let params = if inner.trim().is_empty() {
                    Vec::new()
                } else {
                    inner
                        .split(',')
                        .map(|t| ident(line, t))
                        .collect::<Result<_, _>>()?
                };
                let mut decl = PredicateDecl {
                    name,
                    params,
                    unique: false,
                    visibility: false,
                };
                for f in flags {
                    match f {
                        "unique" => decl.unique = true,
                        "visibility" => decl.visibility = true,
                        other => return Err(err(line, format!("unknown predicate flag `{other}`"))),
                    }
                }
                schema.predicates.push(decl);
            }
            "action" => {
                let open = rest.find('(').ok_or_else(|| err(line, "bad action header"))?;
                if !rest.ends_with(')') {
                    return Err(err(line, "bad action header"));
                }
                let name = ident(line, &rest[..open])?;
                let inner = &rest[open + 1..rest.len() - 1];
                let mut params = Vec::new();
                for p in inner.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    let (v, t) = p
                        .split_once(':')
                        .ok_or_else(|| err(line, format!("parameter `{p}` needs a type")))?;
                    params.push(Param {
                        var: var(line, v)?,
                        ty: ident(line, t)?,
                    });
                }
                draft = Some(ActionDraft {
                    name,
                    params,
                    ..Default::default()
                });
            }
            "rule" => schema.rules.push(rule(line, rest)?),
            "query" => {
                let close = rest.find(')').ok_or_else(|| err(line, "query needs an atom"))?;
                let a = atom(line, &rest[..=close])?;
                let tail: Vec<&str> = rest[close + 1..].split_whitespace().collect();
                let reveal = match tail.as_slice() {
                    ["observe"] => RevealTarget::Observe,
                    ["reveal", target, "via", action] => {
                        let via = ident(line, action)?;
                        if let Some(inner) = target
                            .strip_prefix("location(")
                            .and_then(|t| t.strip_suffix(')'))
                        {
                            RevealTarget::LocationOf {
                                var: var(line, inner)?,
                                via,
                            }
                        } else {
                            RevealTarget::Receptacle {
                                var: var(line, target)?,
                                via,
                            }
                        }
                    }
                    _ => return Err(err(line, "query expects `observe` or `reveal <target> via <action>`")),
                };
                schema.queries.push(QueryPolicy { atom: a, reveal });
            }
            other => return Err(err(line, format!("unknown keyword `{other}`"))),
        }
    }
    if draft.is_some() {
        return Err(err(text.lines().count(), "action block missing `end`"));
    }
    validate(&schema)?;
    Ok(schema)
}

fn check_atom(
    schema: &DomainSchema,
    a: &Atom,
    vars: Option<&BTreeMap<String, String>>,
) -> Result<(), DomainError> {
    let decl = schema
        .predicate(&a.predicate)
        .ok_or_else(|| DomainError::Undeclared {
            kind: "predicate",
            name: a.predicate.clone(),
        })?;
    if decl.params.len() != a.args.len() {
        return Err(DomainError::Arity {
            pred: a.predicate.clone(),
            expected: decl.params.len(),
            got: a.args.len(),
        });
    }
    if let Some(vars) = vars {
        for t in &a.args {
            if let Term::Var(v) = t {
                if !vars.contains_key(v) {
                    return Err(DomainError::Undeclared {
                        kind: "variable",
                        name: format!("?{v}"),
                    });
                }
            }
        }
    }
    Ok(())
}

pub(super) fn check_rule(schema: &DomainSchema, r: &EntailmentRule) -> Result<(), DomainError> {
    if r.premises.is_empty() {
        return Err(DomainError::BadRule(r.id.clone(), "no premises".into()));
    }
    if r.premises.contains(&r.conclusion) {
        return Err(DomainError::BadRule(
            r.id.clone(),
            "conclusion repeats a premise".into(),
        ));
    }
    for l in r.premises.iter().chain(std::iter::once(&r.conclusion)) {
        check_atom(schema, &l.atom, None)?;
    }
    let mut seen = BTreeSet::new();
    for l in r.premises.iter().chain(std::iter::once(&r.conclusion)) {
        for t in &l.atom.args {
            if let Term::Var(v) = t {
                seen.insert(v.clone());
            }
        }
    }
    for g in &r.guards {
        let (names, ty) = match g {
            Guard::Distinct(a, b) => (vec![a, b], None),
            Guard::HasType(v, t) => (vec![v], Some(t)),
        };
        for n in names {
            if !seen.contains(n) {
                return Err(DomainError::BadRule(
                    r.id.clone(),
                    format!("guard mentions unbound ?{n}"),
                ));
            }
        }
        if let Some(t) = ty {
            if !schema.has_type(t) {
                return Err(DomainError::Undeclared {
                    kind: "type",
                    name: t.clone(),
                });
            }
        }
    }
    Ok(())
}

fn validate(schema: &DomainSchema) -> Result<(), DomainError> {
    let mut names = BTreeSet::new();
    for t in &schema.types {
        if !names.insert(format!("type:{}", t.name)) {
            return Err(DomainError::Duplicate(t.name.clone()));
        }
    }
    for t in &schema.types {
        if let Some(p) = &t.parent {
            if !schema.has_type(p) {
                return Err(DomainError::Undeclared {
                    kind: "type",
                    name: p.clone(),
                });
            }
        }
    }
    for p in &schema.predicates {
        if !names.insert(format!("pred:{}", p.name)) {
            return Err(DomainError::Duplicate(p.name.clone()));
        }
        for t in &p.params {
            if !schema.has_type(t) {
                return Err(DomainError::Undeclared {
                    kind: "type",
                    name: t.clone(),
                });
            }
        }
        if p.unique && p.params.len() != 2 {
            return Err(DomainError::Parse {
                line: 0,
                msg: format!("unique predicate `{}` must be binary", p.name),
            });
        }
        if p.visibility && p.params.len() != 1 {
            return Err(DomainError::Parse {
                line: 0,
                msg: format!("visibility predicate `{}` must be unary", p.name),
            });
        }
    }
    for a in &schema.actions {
        if !names.insert(format!("action:{}", a.name)) {
            return Err(DomainError::Duplicate(a.name.clone()));
        }
        let vars: BTreeMap<String, String> = a
            .params
            .iter()
            .map(|p| (p.var.clone(), p.ty.clone()))
            .collect();
        for p in &a.params {
            if !schema.has_type(&p.ty) {
                return Err(DomainError::Undeclared {
                    kind: "type",
                    name: p.ty.clone(),
                });
            }
        }
        for l in &a.preconditions {
            check_atom(schema, &l.atom, Some(&vars))?;
        }
        for at in a.add_effects.iter().chain(&a.delete_effects) {
            check_atom(schema, at, Some(&vars))?;
        }
    }
    for r in &schema.rules {
        if !names.insert(format!("rule:{}", r.id)) {
            return Err(DomainError::Duplicate(r.id.clone()));
        }
        check_rule(schema, r)?;
    }
    for q in &schema.queries {
        check_atom(schema, &q.atom, None)?;
        match &q.reveal {
            RevealTarget::Observe => {}
            RevealTarget::Receptacle { via, .. } | RevealTarget::LocationOf { via, .. } => {
                if schema.action(via).is_none() {
                    return Err(DomainError::Undeclared {
                        kind: "action",
                        name: via.clone(),
                    });
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_minimal_schema() {
        let s = parse_schema(
            "domain tiny\ntype box\npredicate open(box) visibility\n\
             action open(?b: box)\n  pre !open(?b)\n  add open(?b)\nend\n\
             query open(?b) observe\n",
        )
        .unwrap();
        assert_eq!(s.name, "tiny");
        assert!(!s.actions[0].preconditions[0].value);
        assert!(s.predicates[0].visibility);
    }

    #[test]
    fn parses_rules_with_guards() {
        let s = DomainSchema::household();
        let r = s.rules.iter().find(|r| r.id == "r04-fridge-cold").unwrap();
        assert_eq!(r.premises.len(), 1);
        assert_eq!(r.guards, vec![Guard::HasType("f".into(), "fridge".into())]);
        let e = s.rules.iter().find(|r| r.id == "r01-location-exclusive").unwrap();
        assert_eq!(e.guards, vec![Guard::Distinct("a".into(), "b".into())]);
        assert!(!e.conclusion.value);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            parse_schema("type a\npredicate p(b)\n"),
            Err(DomainError::Undeclared { kind: "type", .. })
        ));
        assert!(parse_schema("type a\ntype a\n").is_err());
        assert!(parse_schema("type a\npredicate p(a)\naction f(?x: a)\n pre p(?x)\n").is_err());
        assert!(parse_schema("type a\npredicate p(a)\nrule r: ?x : a => p(?x)\n").is_err());
        assert!(parse_schema("type a\npredicate p(a)\nrule r: p(?x) => p(?x)\n").is_err());
        assert!(parse_schema("type a\npredicate p(a)\naction f(?x: a)\n pre p(?y)\nend\n").is_err());
        assert!(parse_schema("frobnicate\n").is_err());
    }

    #[test]
    fn split_respects_parentheses() {
        assert_eq!(split_top("in(?o, ?r), open(?r)"), vec!["in(?o, ?r)", "open(?r)"]);
        assert!(split_top("").is_empty());
    }
}
