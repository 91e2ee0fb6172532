use std::collections::BTreeSet;
use std::fmt;

use crate::symbol::Symbol;

use super::{Action, Condition, Operand, PrefKind, Provenance, RelOp, RhsValue, Rule, Test};

/// A problem found while loading an agent file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    LParen,
    RParen,
    LBrace,
    RBrace,
    Caret,
    Arrow,
    Minus,
    Plus,
    Eq,
    Rel(RelOp),
    Var(String),
    Sym(String),
    Num(Symbol),
    Quoted(String),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn is_sym_char(c: char) -> bool {
    c.is_alphanumeric()
        || matches!(
            c,
            '-' | '_' | '*' | '.' | '?' | '!' | '/' | ':' | '&' | '$' | '%' | '@' | '~' | '\''
        )
}

fn is_var_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '-' | '_' | '*')
}

fn lex(text: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut diags = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize, chars: &[char]| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let push = |toks: &mut Vec<Token>, tok| {
            toks.push(Token {
                tok,
                line: tl,
                col: tc,
            })
        };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1, &chars);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1, &chars);
            }
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (tok, len) = match c {
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '{' => (Tok::LBrace, 1),
            '}' => (Tok::RBrace, 1),
            '^' => (Tok::Caret, 1),
            '+' => (Tok::Plus, 1),
            '=' => (Tok::Eq, 1),
            '-' if next == Some('-') && chars.get(i + 2) == Some(&'>') => (Tok::Arrow, 3),
            '-' if next.is_some_and(|n| n.is_ascii_digit() || n == '.') => {
                let mut j = i + 1;
                while j < chars.len() && is_sym_char(chars[j]) {
                    j += 1;
                }
                let s: String = chars[i..j].iter().collect();
                match Symbol::parse_token(&s) {
                    sym @ (Symbol::Int(_) | Symbol::Float(_)) => (Tok::Num(sym), j - i),
                    _ => (Tok::Minus, 1),
                }
            }
            '-' => (Tok::Minus, 1),
            '<' => {
                let mut j = i + 1;
                while j < chars.len() && is_var_char(chars[j]) {
                    j += 1;
                }
                if j > i + 1 && chars.get(j) == Some(&'>') {
                    let name: String = chars[i..=j].iter().collect();
                    (Tok::Var(name), j + 1 - i)
                } else if next == Some('>') {
                    (Tok::Rel(RelOp::Ne), 2)
                } else if next == Some('=') {
                    (Tok::Rel(RelOp::Le), 2)
                } else {
                    (Tok::Rel(RelOp::Lt), 1)
                }
            }
            '>' if next == Some('=') => (Tok::Rel(RelOp::Ge), 2),
            '>' => (Tok::Rel(RelOp::Gt), 1),
            '|' => {
                let mut j = i + 1;
                while j < chars.len() && chars[j] != '|' {
                    j += 1;
                }
                if j >= chars.len() {
                    diags.push(Diagnostic {
                        line: tl,
                        column: tc,
                        message: "unterminated quoted symbol".into(),
                    });
                    let rest = chars.len() - i;
                    advance(&mut i, &mut line, &mut col, rest, &chars);
                    continue;
                }
                (Tok::Quoted(chars[i + 1..j].iter().collect()), j + 1 - i)
            }
            c if is_sym_char(c) => {
                let mut j = i;
                while j < chars.len() && is_sym_char(chars[j]) {
                    j += 1;
                }
                let s: String = chars[i..j].iter().collect();
                let tok = match Symbol::parse_token(&s) {
                    sym @ (Symbol::Int(_) | Symbol::Float(_)) => Tok::Num(sym),
                    _ => Tok::Sym(s),
                };
                (tok, j - i)
            }
            other => {
                diags.push(Diagnostic {
                    line: tl,
                    column: tc,
                    message: format!("unexpected character '{other}'"),
                });
                advance(&mut i, &mut line, &mut col, 1, &chars);
                continue;
            }
        };
        push(&mut toks, tok);
        advance(&mut i, &mut line, &mut col, len, &chars);
    }
    (toks, diags)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof: (usize, usize),
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|t| (t.line, t.col))
            .unwrap_or(self.eof)
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        let (line, column) = self.here();
        Err(Diagnostic {
            line,
            column,
            message: message.into(),
        })
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> PResult<()> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn constant(tok: &Tok) -> Option<Symbol> {
        match tok {
            Tok::Sym(s) => Some(Symbol::str(s)),
            Tok::Quoted(s) => Some(Symbol::str(s)),
            Tok::Num(n) => Some(n.clone()),
            _ => None,
        }
    }

    fn operand(&mut self) -> PResult<Operand> {
        match self.peek().cloned() {
            Some(Tok::Var(v)) => {
                self.pos += 1;
                Ok(Operand::Var(v))
            }
            Some(t) => match Self::constant(&t) {
                Some(c) => {
                    self.pos += 1;
                    Ok(Operand::Const(c))
                }
                None => self.err("expected comparison operand"),
            },
            None => self.err("expected comparison operand"),
        }
    }

    fn simple_test(&mut self) -> PResult<Test> {
        match self.peek().cloned() {
            Some(Tok::Var(v)) => {
                self.pos += 1;
                Ok(Test::Var(v))
            }
            Some(Tok::Rel(op)) => {
                self.pos += 1;
                Ok(Test::Compare(op, self.operand()?))
            }
            Some(t) => match Self::constant(&t) {
                Some(c) => {
                    self.pos += 1;
                    Ok(Test::Const(c))
                }
                None => self.err("expected a test"),
            },
            None => self.err("expected a test"),
        }
    }

    fn test(&mut self) -> PResult<Test> {
        if self.peek() == Some(&Tok::LBrace) {
            self.pos += 1;
            let mut items = Vec::new();
            while self.peek() != Some(&Tok::RBrace) {
                if self.peek().is_none() {
                    return self.err("unbalanced braces in conjunctive test");
                }
                items.push(self.simple_test()?);
            }
            self.pos += 1;
            if items.is_empty() {
                return self.err("empty conjunctive test");
            }
            return Ok(if items.len() == 1 {
                items.pop().unwrap()
            } else {
                Test::Conj(items)
            });
        }
        self.simple_test()
    }

    fn condition_clause(&mut self, out: &mut Vec<Condition>) -> PResult<()> {
        let negated = if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            true
        } else {
            false
        };
        self.expect(Tok::LParen, "'('")?;
        let state = if matches!(self.peek(), Some(Tok::Sym(s)) if s == "state") {
            self.pos += 1;
            true
        } else {
            false
        };
        let id = self.test()?;
        if id.main_var().is_none() {
            return self.err("condition identifier must be a variable");
        }
        let mut pairs = Vec::new();
        while self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let attr = self.test()?;
            let value = self.test()?;
            let acceptable = if self.peek() == Some(&Tok::Plus) {
                self.pos += 1;
                true
            } else {
                false
            };
            pairs.push((attr, value, acceptable));
        }
        self.expect(Tok::RParen, "')' closing condition")?;
        if pairs.is_empty() {
            if !state {
                return self.err("condition needs at least one attribute test");
            }
            pairs.push((
                Test::Const(Symbol::str("superstate")),
                Test::Var("<_super>".into()),
                false,
            ));
        }
        if negated && pairs.len() > 1 {
            return self.err("conjunctive negation is not supported");
        }
        for (k, (attr, value, acceptable)) in pairs.into_iter().enumerate() {
            out.push(Condition {
                negated,
                state: state && k == 0,
                id: id.clone(),
                attr,
                value,
                acceptable,
            });
        }
        Ok(())
    }

    fn rhs_value(&mut self) -> PResult<RhsValue> {
        match self.bump() {
            Some(Tok::Var(v)) => Ok(RhsValue::Var(v)),
            Some(t) => match Self::constant(&t) {
                Some(c) => Ok(RhsValue::Const(c)),
                None => {
                    self.pos -= 1;
                    self.err("expected a value")
                }
            },
            None => self.err("expected a value"),
        }
    }

    fn action_clause(&mut self, out: &mut Vec<Action>) -> PResult<()> {
        self.expect(Tok::LParen, "'(' starting action")?;
        if matches!(self.peek(), Some(Tok::Sym(s)) if s == "halt") {
            self.pos += 1;
            self.expect(Tok::RParen, "')' after halt")?;
            out.push(Action::Halt);
            return Ok(());
        }
        let id = match self.bump() {
            Some(Tok::Var(v)) => v,
            _ => {
                self.pos -= 1;
                return self.err("action identifier must be a variable");
            }
        };
        if self.peek() != Some(&Tok::Caret) {
            return self.err("expected '^' in action");
        }
        while self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let attr = self.rhs_value()?;
            let value = self.rhs_value()?;
            let is_operator = matches!(&attr, RhsValue::Const(c) if c == &Symbol::str("operator"));
            if is_operator {
                let RhsValue::Var(op) = value else {
                    return self.err("preference must name an operator variable");
                };
                let before = out.len();
                self.preference_glyphs(&id, &op, out)?;
                if out.len() == before {
                    return self.err("operator action requires a preference glyph");
                }
            } else {
                match self.peek() {
                    Some(Tok::Minus) => {
                        self.pos += 1;
                        out.push(Action::Remove {
                            id: id.clone(),
                            attr,
                            value,
                        });
                    }
                    Some(Tok::Plus) => {
                        return self.err("acceptable preference on a non-operator attribute")
                    }
                    Some(Tok::Sym(s))
                        if !s.is_empty() && !s.starts_with(|c: char| c.is_alphanumeric()) =>
                    {
                        return self.err(format!("unknown preference glyph {s}"));
                    }
                    _ => out.push(Action::Make {
                        id: id.clone(),
                        attr,
                        value,
                    }),
                }
            }
        }
        self.expect(Tok::RParen, "')' closing action")
    }

    fn preference_glyphs(&mut self, state: &str, op: &str, out: &mut Vec<Action>) -> PResult<()> {
        let pref = |kind, referent: Option<String>, value: Option<f64>| Action::Pref {
            state: state.to_string(),
            op: op.to_string(),
            kind,
            referent,
            value,
        };
        loop {
            match self.peek().cloned() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    out.push(pref(PrefKind::Acceptable, None, None));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    out.push(pref(PrefKind::Reject, None, None));
                }
                Some(Tok::Rel(op @ (RelOp::Gt | RelOp::Lt))) => {
                    self.pos += 1;
                    let (unary, binary) = if op == RelOp::Gt {
                        (PrefKind::Best, PrefKind::Better)
                    } else {
                        (PrefKind::Worst, PrefKind::Worse)
                    };
                    if let Some(Tok::Var(r)) = self.peek().cloned() {
                        self.pos += 1;
                        out.push(pref(binary, Some(r), None));
                    } else {
                        out.push(pref(unary, None, None));
                    }
                }
                Some(Tok::Eq) => {
                    self.pos += 1;
                    match self.peek().cloned() {
                        Some(Tok::Var(r)) => {
                            self.pos += 1;
                            out.push(pref(PrefKind::BinaryIndifferent, Some(r), None));
                        }
                        Some(Tok::Num(n)) => {
                            self.pos += 1;
                            let v = n.as_number().unwrap_or(f64::NAN);
                            if !v.is_finite() {
                                return self.err("numeric preference must be finite");
                            }
                            out.push(pref(PrefKind::Numeric, None, Some(v)));
                        }
                        _ => out.push(pref(PrefKind::UnaryIndifferent, None, None)),
                    }
                }
                Some(Tok::Caret) | Some(Tok::RParen) | None => return Ok(()),
                Some(Tok::Sym(s)) => return self.err(format!("unknown preference glyph {s}")),
                Some(Tok::Rel(r)) => {
                    return self.err(format!("unknown preference glyph {}", r.glyph()))
                }
                Some(_) => return self.err("unknown preference glyph"),
            }
        }
    }

    fn block_body(&mut self) -> PResult<Rule> {
        let name = match self.bump() {
            Some(Tok::Sym(s)) => s,
            Some(Tok::Quoted(s)) => s,
            _ => {
                self.pos -= 1;
                return self.err("expected rule name");
            }
        };
        let mut conditions = Vec::new();
        while self.peek() != Some(&Tok::Arrow) {
            if matches!(self.peek(), None | Some(Tok::RBrace)) {
                return self.err("expected '-->'");
            }
            self.condition_clause(&mut conditions)?;
        }
        self.pos += 1;
        let mut actions = Vec::new();
        while self.peek() != Some(&Tok::RBrace) {
            if self.peek().is_none() {
                return self.err("unbalanced braces: missing '}'");
            }
            self.action_clause(&mut actions)?;
        }
        self.pos += 1;
        if conditions.is_empty() {
            return self.err("rule has no conditions");
        }
        Ok(Rule {
            name,
            conditions,
            actions,
            class: super::FunctionClass::Elaboration,
            rl: false,
            provenance: Provenance::Loaded,
        })
    }

    /// Skips to just past the `}` that closes the block whose `{` is at `open`.
    fn recover(&mut self, open: usize) -> bool {
        let mut depth = 0i32;
        let mut k = open;
        while k < self.toks.len() {
            match self.toks[k].tok {
                Tok::LBrace => depth += 1,
                Tok::RBrace => {
                    depth -= 1;
                    if depth == 0 {
                        self.pos = k + 1;
                        return true;
                    }
                }
                Tok::Sym(ref s)
                    if s == "sp"
                        && k > open
                        && matches!(self.toks.get(k + 1).map(|t| &t.tok), Some(Tok::LBrace)) =>
                {
                    self.pos = k;
                    return false;
                }
                _ => {}
            }
            k += 1;
        }
        self.pos = self.toks.len();
        false
    }
}

/// Checks variable binding constraints; returns the first violation.
pub(crate) fn check_bindings(rule: &Rule) -> Result<(), String> {
    let Some(first) = rule.conditions.first() else {
        return Err("rule has no conditions".into());
    };
    if first.negated || !first.state {
        return Err("first condition must be a positive state test".into());
    }
    let bound = rule.bound_vars();
    let mut prior: BTreeSet<String> = BTreeSet::new();
    for c in &rule.conditions {
        if c.negated {
            for v in c.vars() {
                if !prior.contains(&v) {
                    return Err(format!("unbound variable {v} in negated condition"));
                }
            }
        } else {
            let mut ops = Vec::new();
            c.id.operand_vars(&mut ops);
            c.attr.operand_vars(&mut ops);
            c.value.operand_vars(&mut ops);
            for v in ops {
                if !bound.contains(&v) {
                    return Err(format!("unbound variable {v} in comparison"));
                }
            }
            let mut b = Vec::new();
            c.id.binding_vars(&mut b);
            c.attr.binding_vars(&mut b);
            c.value.binding_vars(&mut b);
            prior.extend(b);
        }
    }
    let mut created: BTreeSet<String> = BTreeSet::new();
    for a in &rule.actions {
        match a {
            Action::Make {
                value: RhsValue::Var(v),
                ..
            } if !bound.contains(v) => {
                created.insert(v.clone());
            }
            Action::Pref { op, .. } if !bound.contains(op) => {
                created.insert(op.clone());
            }
            _ => {}
        }
    }
    let known = |v: &str| bound.contains(v) || created.contains(v);
    for a in &rule.actions {
        match a {
            Action::Make { id, attr, .. } => {
                if !known(id) {
                    return Err(format!("unbound variable {id}"));
                }
                if let Some(v) = attr.var() {
                    if !bound.contains(v) {
                        return Err(format!("unbound variable {v}"));
                    }
                }
            }
            Action::Remove { id, attr, value } => {
                for v in [Some(id.as_str()), attr.var(), value.var()]
                    .into_iter()
                    .flatten()
                {
                    if !bound.contains(v) {
                        return Err(format!("unbound variable {v}"));
                    }
                }
            }
            Action::Pref {
                state, referent, ..
            } => {
                if !bound.contains(state) {
                    return Err(format!("unbound variable {state}"));
                }
                if let Some(r) = referent {
                    if !known(r) {
                        return Err(format!("unbound variable {r}"));
                    }
                }
            }
            Action::Halt => {}
        }
    }
    Ok(())
}

/// Parses an agent file into rules plus one diagnostic per malformed block.
pub fn parse_agent_file(text: &str) -> (Vec<Rule>, Vec<Diagnostic>) {
    let (toks, mut diags) = lex(text);
    let eof = {
        let lines = text.split('\n').count();
        (
            lines.max(1),
            text.rsplit('\n')
                .next()
                .map(|l| l.chars().count() + 1)
                .unwrap_or(1),
        )
    };
    let mut p = Parser { toks, pos: 0, eof };
    let mut rules = Vec::new();
    while p.pos < p.toks.len() {
        let start = p.here();
        let is_sp = matches!(p.peek(), Some(Tok::Sym(s)) if s == "sp");
        if !is_sp || p.peek_at(1) != Some(&Tok::LBrace) {
            diags.push(Diagnostic {
                line: start.0,
                column: start.1,
                message: "expected 'sp {'".into(),
            });
            p.pos += 1;
            while p.pos < p.toks.len()
                && !(matches!(p.peek(), Some(Tok::Sym(s)) if s == "sp")
                    && p.peek_at(1) == Some(&Tok::LBrace))
            {
                p.pos += 1;
            }
            continue;
        }
        p.pos += 2;
        let open = p.pos - 1;
        match p.block_body() {
            Ok(mut rule) => {
                let checked = check_bindings(&rule)
                    .and_then(|_| super::classify_rule(&rule).map_err(|e| e.to_string()));
                match checked {
                    Ok((class, rl)) => {
                        rule.class = class;
                        rule.rl = rl;
                        rules.push(rule);
                    }
                    Err(message) => diags.push(Diagnostic {
                        line: start.0,
                        column: start.1,
                        message,
                    }),
                }
            }
            Err(d) => {
                let closed = p.recover(open);
                let d = if closed || d.message.starts_with("unbalanced") {
                    d
                } else {
                    Diagnostic {
                        message: format!("unbalanced braces: {}", d.message),
                        ..d
                    }
                };
                diags.push(d);
            }
        }
    }
    (rules, diags)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unstack_proposal_structure() {
        let src = "sp {p (state <s> ^block <b>) (<b> ^clear true ^on <c>) --> (<s> ^operator <o> +) (<o> ^name unstack ^target <b>)}";
        let (rules, diags) = parse_agent_file(src);
        assert!(diags.is_empty(), "{diags:?}");
        assert_eq!(rules.len(), 1);
        let r = &rules[0];
        // two source clauses; the second desugars into one condition per attribute
        assert_eq!(r.conditions.len(), 3);
        assert!(r.conditions[0].state);
        assert_eq!(r.actions.len(), 3);
        let prefs = r
            .actions
            .iter()
            .filter(|a| {
                matches!(
                    a,
                    Action::Pref {
                        kind: PrefKind::Acceptable,
                        ..
                    }
                )
            })
            .count();
        let makes = r
            .actions
            .iter()
            .filter(|a| matches!(a, Action::Make { .. }))
            .count();
        assert_eq!((prefs, makes), (1, 2));
    }

    #[test]
    fn unbound_action_variable() {
        let (rules, diags) = parse_agent_file("sp {p (state <s>) --> (<t> ^a 1)}");
        assert!(rules.is_empty());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].message, "unbound variable <t>");
    }

    #[test]
    fn unbound_negation_variable() {
        let (rules, diags) =
            parse_agent_file("sp {p (state <s> ^b <b>) -(<x> ^on <b>) --> (<s> ^c 1)}");
        assert!(rules.is_empty());
        assert!(diags[0].message.contains("<x>"));
    }

    #[test]
    fn unknown_glyph_is_a_diagnostic() {
        let (rules, diags) =
            parse_agent_file("sp {p (state <s> ^x <o>) --> (<s> ^operator <o> ~)}");
        assert!(rules.is_empty());
        assert!(
            diags[0].message.contains("unknown preference glyph"),
            "{:?}",
            diags
        );
    }

    #[test]
    fn good_blocks_survive_bad_ones() {
        let src = "
# first is fine
sp {a (state <s> ^x 1) --> (<s> ^y 2)}
sp {b (state <s> ^x 1) --> (<s> ^y 2 }
sp {c (state <s> ^x 1) --> (<s> ^z 3)}
";
        let (rules, diags) = parse_agent_file(src);
        assert_eq!(
            rules.iter().map(|r| r.name.as_str()).collect::<Vec<_>>(),
            vec!["a", "c"]
        );
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].line, 4);
    }

    #[test]
    fn unbalanced_braces() {
        let (rules, diags) = parse_agent_file("sp {a (state <s> ^x 1) --> (<s> ^y 2)");
        assert!(rules.is_empty());
        assert_eq!(diags.len(), 1);
        assert!(
            diags[0].message.contains("unbalanced"),
            "{}",
            diags[0].message
        );
    }

    #[test]
    fn comparisons_and_conjunctions() {
        let (rules, diags) = parse_agent_file(
            "sp {c (state <s> ^count { <c> < 5 } ^limit <l> ^other { <o> <> <c> >= <l> }) --> (<s> ^ok yes)}",
        );
        assert!(diags.is_empty(), "{diags:?}");
        let c = &rules[0].conditions[0];
        assert_eq!(
            c.value,
            Test::Conj(vec![
                Test::Var("<c>".into()),
                Test::Compare(RelOp::Lt, Operand::Const(Symbol::Int(5)))
            ])
        );
        assert_eq!(
            rules[0].conditions[2].value,
            Test::Conj(vec![
                Test::Var("<o>".into()),
                Test::Compare(RelOp::Ne, Operand::Var("<c>".into())),
                Test::Compare(RelOp::Ge, Operand::Var("<l>".into())),
            ])
        );
    }

    #[test]
    fn preference_glyph_variants() {
        let (rules, diags) = parse_agent_file(
            "sp {e (state <s> ^operator <a> + ^operator <b> +) --> (<s> ^operator <a> > <b>) (<s> ^operator <b> <) (<s> ^operator <a> = <b>) (<s> ^operator <b> = -0.25) (<s> ^operator <a> -)}",
        );
        assert!(diags.is_empty(), "{diags:?}");
        let kinds: Vec<PrefKind> = rules[0]
            .actions
            .iter()
            .map(|a| match a {
                Action::Pref { kind, .. } => *kind,
                _ => panic!(),
            })
            .collect();
        assert_eq!(
            kinds,
            vec![
                PrefKind::Better,
                PrefKind::Worst,
                PrefKind::BinaryIndifferent,
                PrefKind::Numeric,
                PrefKind::Reject
            ]
        );
        assert!(matches!(rules[0].actions[3], Action::Pref { value: Some(v), .. } if v == -0.25));
    }

    #[test]
    fn halt_and_remove_actions() {
        let (rules, diags) = parse_agent_file(
            "sp {apply (state <s> ^operator <o> ^count <c>) (<o> ^name count) --> (<s> ^count <c> -) (<s> ^count 3) (halt)}",
        );
        assert!(diags.is_empty(), "{diags:?}");
        assert!(matches!(rules[0].actions[0], Action::Remove { .. }));
        assert_eq!(rules[0].actions[2], Action::Halt);
    }

    #[test]
    fn bare_state_condition() {
        let (rules, diags) = parse_agent_file("sp {p (state <s>) --> (<s> ^a 1)}");
        assert!(diags.is_empty());
        assert_eq!(rules[0].conditions.len(), 1);
        assert!(rules[0].conditions[0].state);
    }
}
