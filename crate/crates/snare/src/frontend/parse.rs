//! The protocol input language: lexer, syntax tree, parser, and the
//! canonical printer used for round-tripping.
//!
//! A file is a sequence of sections: `sorts`, `agents`, `roles`,
//! `scenario`, `property`. Keywords are contextual, so step names like
//! `send` stay available as identifiers elsewhere.

use std::fmt;

use num_rational::BigRational;
use num_traits::One;

use crate::terms::{BinOp, Sort, SortProfile};
use crate::timed::parse_rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Number(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const TWO_CHAR: [&str; 4] = ["->", "<=", ">=", "!="];
const ONE_CHAR: &str = "{}()<>,:.=&|!@*+-/";

fn lex(source: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        if c.is_ascii_alphabetic() || c == '_' {
            let mut text = String::new();
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'')
            {
                text.push(chars[i]);
                i += 1;
                col += 1;
            }
            out.push(Token { tok: Tok::Ident(text), line, col: start_col });
            continue;
        }
        if c.is_ascii_digit() {
            let mut text = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                text.push(chars[i]);
                i += 1;
                col += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                text.push('.');
                i += 1;
                col += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    text.push(chars[i]);
                    i += 1;
                    col += 1;
                }
            }
            out.push(Token { tok: Tok::Number(text), line, col: start_col });
            continue;
        }
        if i + 1 < chars.len() {
            let pair: String = [c, chars[i + 1]].iter().collect();
            if let Some(&sym) = TWO_CHAR.iter().find(|&&s| s == pair) {
                out.push(Token { tok: Tok::Sym(sym), line, col: start_col });
                i += 2;
                col += 2;
                continue;
            }
        }
        if let Some(idx) = ONE_CHAR.find(c) {
            let sym = &ONE_CHAR[idx..idx + c.len_utf8()];
            out.push(Token { tok: Tok::Sym(sym), line, col: start_col });
            i += 1;
            col += 1;
            continue;
        }
        return Err(ParseError { line, col, message: format!("unexpected character '{}'", c) });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawTerm {
    /// `<a, b, c>`, at least two components, right-nested at compile time.
    Tuple(Vec<RawTerm>),
    App(BinOp, Box<RawTerm>, Box<RawTerm>),
    Priv(Box<RawTerm>),
    /// `@t`: a timestamp variable.
    TimeVar(String),
    /// Numeric literal, a timestamp under the timed profile.
    Number(String),
    Ident(String),
    /// `session.name`: a fresh name or variable of a specific session.
    Qualified(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentDecl {
    pub name: String,
    pub corrupt: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Fresh(Sort, Vec<String>),
    Send(RawTerm),
    Recv { pattern: RawTerm, at: Option<String>, send: Option<RawTerm> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Role {
    pub name: String,
    pub params: Vec<String>,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionDecl {
    pub label: String,
    pub role: String,
    pub args: Vec<RawTerm>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Scenario {
    pub sessions: Vec<SessionDecl>,
    pub knows: Vec<RawTerm>,
    pub schedule: Option<Vec<(String, usize)>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormulaAst {
    Eq(RawTerm, RawTerm),
    Neq(RawTerm, RawTerm),
    Not(Box<FormulaAst>),
    And(Box<FormulaAst>, Box<FormulaAst>),
    Or(Box<FormulaAst>, Box<FormulaAst>),
    False,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelAst {
    Lt,
    Le,
    Gt,
    Ge,
}

impl RelAst {
    fn symbol(self) -> &'static str {
        match self {
            RelAst::Lt => "<",
            RelAst::Le => "<=",
            RelAst::Gt => ">",
            RelAst::Ge => ">=",
        }
    }
}

/// One signed summand of a linear expression: `coeff * var` or a constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinTerm {
    pub coeff: BigRational,
    pub var: Option<RawTerm>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeAtomAst {
    pub lhs: Vec<LinTerm>,
    pub rel: RelAst,
    pub rhs: Vec<LinTerm>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rho1Ast {
    Guarded,
    Subterm,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertyAst {
    Secrecy(RawTerm),
    KeyCycle { strict: bool, rho1: Option<Rho1Ast>, on: Vec<RawTerm> },
    Ordering { precedes: Vec<(RawTerm, RawTerm)>, on: Vec<RawTerm> },
    Logic(FormulaAst),
    Timed { integer: bool, atoms: Vec<TimeAtomAst> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct File {
    pub profile: SortProfile,
    pub sort_names: Vec<(Sort, String)>,
    pub agents: Vec<AgentDecl>,
    pub roles: Vec<Role>,
    pub scenario: Scenario,
    pub property: PropertyAst,
}

pub fn parse(source: &str) -> Result<File, ParseError> {
    let toks = lex(source)?;
    Parser { toks, pos: 0 }.parse_file()
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let at = &self.toks[self.pos];
        Err(ParseError { line: at.line, col: at.col, message: message.into() })
    }

    fn peek_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.peek_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected '{}'", s))
        }
    }

    fn peek_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.peek_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(format!("expected '{}'", kw))
        }
    }

    fn expect_ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(t) => {
                self.bump();
                Ok(t)
            }
            _ => self.err("expected an identifier"),
        }
    }

    fn parse_file(&mut self) -> Result<File, ParseError> {
        let mut profile = SortProfile::Untyped;
        let mut sort_names = Vec::new();
        let mut agents: Option<Vec<AgentDecl>> = None;
        let mut roles: Option<Vec<Role>> = None;
        let mut scenario: Option<Scenario> = None;
        let mut property: Option<PropertyAst> = None;
        let mut saw_sorts = false;

        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(section) => match section.as_str() {
                    "sorts" => {
                        if saw_sorts {
                            return self.err("duplicate sorts section");
                        }
                        saw_sorts = true;
                        self.bump();
                        let (p, names) = self.parse_sorts()?;
                        profile = p;
                        sort_names = names;
                    }
                    "agents" => {
                        if agents.is_some() {
                            return self.err("duplicate agents section");
                        }
                        self.bump();
                        agents = Some(self.parse_agents()?);
                    }
                    "roles" => {
                        if roles.is_some() {
                            return self.err("duplicate roles section");
                        }
                        self.bump();
                        roles = Some(self.parse_roles()?);
                    }
                    "scenario" => {
                        if scenario.is_some() {
                            return self.err("duplicate scenario section");
                        }
                        self.bump();
                        scenario = Some(self.parse_scenario()?);
                    }
                    "property" => {
                        if property.is_some() {
                            return self.err("duplicate property section");
                        }
                        self.bump();
                        property = Some(self.parse_property()?);
                    }
                    _ => return self.err(format!("unknown section '{}'", section)),
                },
                _ => return self.err("expected a section name"),
            }
        }
        let scenario = match scenario {
            Some(s) => s,
            None => return self.err("missing scenario section"),
        };
        let property = match property {
            Some(p) => p,
            None => return self.err("missing property section"),
        };
        Ok(File {
            profile,
            sort_names,
            agents: agents.unwrap_or_default(),
            roles: roles.unwrap_or_default(),
            scenario,
            property,
        })
    }

    fn parse_sorts(&mut self) -> Result<(SortProfile, Vec<(Sort, String)>), ParseError> {
        self.expect_sym("{")?;
        let mut profile = SortProfile::Untyped;
        let mut names = Vec::new();
        while !self.eat_sym("}") {
            match self.expect_ident()?.as_str() {
                "profile" => profile = self.parse_profile()?,
                "msg" => self.parse_name_list(Sort::Msg, &mut names)?,
                "key" => self.parse_name_list(Sort::Key, &mut names)?,
                "time" => self.parse_name_list(Sort::Time, &mut names)?,
                other => {
                    return self.err(format!(
                        "expected 'profile', 'msg', 'key' or 'time', got '{}'",
                        other
                    ))
                }
            }
        }
        Ok((profile, names))
    }

    fn parse_profile(&mut self) -> Result<SortProfile, ParseError> {
        match self.expect_ident()?.as_str() {
            "untyped" => Ok(SortProfile::Untyped),
            "atomic" => {
                self.expect_sym("-")?;
                self.expect_kw("keys")?;
                Ok(SortProfile::AtomicKeys)
            }
            "timed" => Ok(SortProfile::Timed),
            other => self.err(format!("unknown profile '{}'", other)),
        }
    }

    fn parse_name_list(
        &mut self,
        sort: Sort,
        out: &mut Vec<(Sort, String)>,
    ) -> Result<(), ParseError> {
        loop {
            out.push((sort, self.expect_ident()?));
            if !self.eat_sym(",") {
                return Ok(());
            }
        }
    }

    fn parse_agents(&mut self) -> Result<Vec<AgentDecl>, ParseError> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        while !self.eat_sym("}") {
            let corrupt = match self.expect_ident()?.as_str() {
                "honest" => false,
                "corrupt" => true,
                other => {
                    return self.err(format!("expected 'honest' or 'corrupt', got '{}'", other))
                }
            };
            loop {
                out.push(AgentDecl { name: self.expect_ident()?, corrupt });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        Ok(out)
    }

    fn parse_roles(&mut self) -> Result<Vec<Role>, ParseError> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        while !self.eat_sym("}") {
            self.expect_kw("role")?;
            let name = self.expect_ident()?;
            self.expect_sym("(")?;
            let mut params = Vec::new();
            if !self.peek_sym(")") {
                loop {
                    params.push(self.expect_ident()?);
                    if !self.eat_sym(",") {
                        break;
                    }
                }
            }
            self.expect_sym(")")?;
            self.expect_sym("{")?;
            let mut steps = Vec::new();
            while !self.eat_sym("}") {
                steps.push(self.parse_step()?);
            }
            out.push(Role { name, params, steps });
        }
        Ok(out)
    }

    fn parse_step(&mut self) -> Result<Step, ParseError> {
        if self.eat_kw("fresh") {
            let sort = if self.peek_kw("msg") || self.peek_kw("key") || self.peek_kw("time") {
                // a sort keyword binds only when a name list follows
                let kw = match self.peek() {
                    Tok::Ident(t) => t.clone(),
                    _ => unreachable!(),
                };
                if matches!(&self.toks[self.pos + 1].tok, Tok::Ident(_)) {
                    self.bump();
                    match kw.as_str() {
                        "key" => Sort::Key,
                        "time" => Sort::Time,
                        _ => Sort::Msg,
                    }
                } else {
                    Sort::Msg
                }
            } else {
                Sort::Msg
            };
            let mut names = vec![self.expect_ident()?];
            while self.eat_sym(",") {
                names.push(self.expect_ident()?);
            }
            return Ok(Step::Fresh(sort, names));
        }
        if self.eat_kw("send") {
            return Ok(Step::Send(self.parse_term()?));
        }
        if self.eat_kw("recv") {
            let pattern = self.parse_term()?;
            let at = if self.eat_sym("@") { Some(self.expect_ident()?) } else { None };
            let send = if self.eat_sym("->") {
                self.expect_kw("send")?;
                Some(self.parse_term()?)
            } else {
                None
            };
            return Ok(Step::Recv { pattern, at, send });
        }
        self.err("expected 'fresh', 'send' or 'recv'")
    }

    fn parse_scenario(&mut self) -> Result<Scenario, ParseError> {
        self.expect_sym("{")?;
        let mut scenario = Scenario::default();
        while !self.eat_sym("}") {
            if self.eat_kw("session") {
                let label = self.expect_ident()?;
                self.expect_sym(":")?;
                let role = self.expect_ident()?;
                self.expect_sym("(")?;
                let mut args = Vec::new();
                if !self.peek_sym(")") {
                    loop {
                        args.push(self.parse_term()?);
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                }
                self.expect_sym(")")?;
                scenario.sessions.push(SessionDecl { label, role, args });
            } else if self.eat_kw("knows") {
                loop {
                    scenario.knows.push(self.parse_term()?);
                    if !self.eat_sym(",") {
                        break;
                    }
                }
            } else if self.eat_kw("schedule") {
                if scenario.schedule.is_some() {
                    return self.err("duplicate schedule");
                }
                let mut entries = Vec::new();
                loop {
                    let label = self.expect_ident()?;
                    self.expect_sym(".")?;
                    let step = match self.peek().clone() {
                        Tok::Number(n) => {
                            self.bump();
                            match n.parse::<usize>() {
                                Ok(v) if v >= 1 => v,
                                _ => return self.err("schedule steps count from 1"),
                            }
                        }
                        _ => return self.err("expected a step number"),
                    };
                    entries.push((label, step));
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                scenario.schedule = Some(entries);
            } else {
                return self.err("expected 'session', 'knows' or 'schedule'");
            }
        }
        Ok(scenario)
    }

    fn parse_property(&mut self) -> Result<PropertyAst, ParseError> {
        self.expect_sym("{")?;
        let prop = if self.eat_kw("secrecy") {
            PropertyAst::Secrecy(self.parse_term()?)
        } else if self.peek_kw("strict") || self.peek_kw("keycycle") {
            let strict = self.eat_kw("strict");
            self.expect_kw("keycycle")?;
            let rho1 = if self.eat_kw("via") {
                Some(match self.expect_ident()?.as_str() {
                    "guarded" => Rho1Ast::Guarded,
                    "subterm" => Rho1Ast::Subterm,
                    other => return self.err(format!("unknown relation '{}'", other)),
                })
            } else {
                None
            };
            let on = self.parse_on_list()?;
            PropertyAst::KeyCycle { strict, rho1, on }
        } else if self.eat_kw("ordering") {
            let mut precedes = Vec::new();
            loop {
                let a = self.parse_term()?;
                self.expect_sym("<")?;
                let b = self.parse_term()?;
                precedes.push((a, b));
                if !self.eat_sym(",") {
                    break;
                }
            }
            let on = self.parse_on_list()?;
            PropertyAst::Ordering { precedes, on }
        } else if self.eat_kw("formula") {
            PropertyAst::Logic(self.parse_formula()?)
        } else if self.eat_kw("timed") {
            let integer = self.eat_kw("integer");
            let mut atoms = vec![self.parse_time_atom()?];
            while self.eat_sym("&") {
                atoms.push(self.parse_time_atom()?);
            }
            PropertyAst::Timed { integer, atoms }
        } else {
            return self.err(
                "expected 'secrecy', 'keycycle', 'strict keycycle', 'ordering', \
                 'formula' or 'timed'",
            );
        };
        self.expect_sym("}")?;
        Ok(prop)
    }

    fn parse_on_list(&mut self) -> Result<Vec<RawTerm>, ParseError> {
        if !self.eat_kw("on") {
            return Ok(Vec::new());
        }
        let mut out = vec![self.parse_term()?];
        while self.eat_sym(",") {
            out.push(self.parse_term()?);
        }
        Ok(out)
    }

    fn parse_formula(&mut self) -> Result<FormulaAst, ParseError> {
        let mut f = self.parse_formula_and()?;
        while self.eat_sym("|") {
            f = FormulaAst::Or(Box::new(f), Box::new(self.parse_formula_and()?));
        }
        Ok(f)
    }

    fn parse_formula_and(&mut self) -> Result<FormulaAst, ParseError> {
        let mut f = self.parse_formula_not()?;
        while self.eat_sym("&") {
            f = FormulaAst::And(Box::new(f), Box::new(self.parse_formula_not()?));
        }
        Ok(f)
    }

    fn parse_formula_not(&mut self) -> Result<FormulaAst, ParseError> {
        if self.eat_sym("!") {
            return Ok(FormulaAst::Not(Box::new(self.parse_formula_not()?)));
        }
        if self.eat_sym("(") {
            let f = self.parse_formula()?;
            self.expect_sym(")")?;
            return Ok(f);
        }
        if self.eat_kw("false") {
            return Ok(FormulaAst::False);
        }
        let a = self.parse_term()?;
        if self.eat_sym("=") {
            Ok(FormulaAst::Eq(a, self.parse_term()?))
        } else if self.eat_sym("!=") {
            Ok(FormulaAst::Neq(a, self.parse_term()?))
        } else {
            self.err("expected '=' or '!=' after the term")
        }
    }

    fn parse_time_atom(&mut self) -> Result<TimeAtomAst, ParseError> {
        let lhs = self.parse_linexpr()?;
        let rel = if self.eat_sym("<=") {
            RelAst::Le
        } else if self.eat_sym("<") {
            RelAst::Lt
        } else if self.eat_sym(">=") {
            RelAst::Ge
        } else if self.eat_sym(">") {
            RelAst::Gt
        } else {
            return self.err("expected a comparison");
        };
        let rhs = self.parse_linexpr()?;
        Ok(TimeAtomAst { lhs, rel, rhs })
    }

    fn parse_linexpr(&mut self) -> Result<Vec<LinTerm>, ParseError> {
        let negated = self.eat_negation();
        let mut out = vec![self.parse_linterm(negated)?];
        loop {
            if self.eat_sym("+") {
                out.push(self.parse_linterm(false)?);
            } else if self.eat_sym("-") {
                out.push(self.parse_linterm(true)?);
            } else {
                return Ok(out);
            }
        }
    }

    fn eat_negation(&mut self) -> bool {
        self.eat_sym("-")
    }

    fn parse_linterm(&mut self, negate: bool) -> Result<LinTerm, ParseError> {
        let mut term = match self.peek().clone() {
            Tok::Number(_) => {
                let coeff = self.parse_rational_literal()?;
                if self.eat_sym("*") {
                    LinTerm { coeff, var: Some(self.parse_timeref()?) }
                } else {
                    LinTerm { coeff, var: None }
                }
            }
            _ => LinTerm { coeff: BigRational::one(), var: Some(self.parse_timeref()?) },
        };
        if negate {
            term.coeff = -term.coeff;
        }
        Ok(term)
    }

    fn parse_rational_literal(&mut self) -> Result<BigRational, ParseError> {
        let first = match self.bump() {
            Tok::Number(n) => n,
            _ => return self.err("expected a number"),
        };
        let text = if self.eat_sym("/") {
            match self.bump() {
                Tok::Number(d) => format!("{}/{}", first, d),
                _ => return self.err("expected a denominator"),
            }
        } else {
            first
        };
        match parse_rational(&text) {
            Some(r) => Ok(r),
            None => self.err(format!("invalid rational '{}'", text)),
        }
    }

    fn parse_timeref(&mut self) -> Result<RawTerm, ParseError> {
        if self.eat_sym("@") {
            return Ok(RawTerm::TimeVar(self.expect_ident()?));
        }
        let id = self.expect_ident()?;
        if self.eat_sym(".") {
            Ok(RawTerm::Qualified(id, self.expect_ident()?))
        } else {
            Ok(RawTerm::Ident(id))
        }
    }

    fn parse_term(&mut self) -> Result<RawTerm, ParseError> {
        match self.peek().clone() {
            Tok::Sym("<") => {
                self.bump();
                let mut items = vec![self.parse_term()?];
                while self.eat_sym(",") {
                    items.push(self.parse_term()?);
                }
                self.expect_sym(">")?;
                if items.len() < 2 {
                    return self.err("a tuple needs at least two components");
                }
                Ok(RawTerm::Tuple(items))
            }
            Tok::Sym("@") => {
                self.bump();
                Ok(RawTerm::TimeVar(self.expect_ident()?))
            }
            Tok::Number(n) => {
                self.bump();
                Ok(RawTerm::Number(n))
            }
            Tok::Ident(id) => {
                self.bump();
                let op = match id.as_str() {
                    "enc" => Some(BinOp::Enc),
                    "enca" => Some(BinOp::Enca),
                    "sign" => Some(BinOp::Sign),
                    "pair" => Some(BinOp::Pair),
                    _ => None,
                };
                if let Some(op) = op {
                    if self.peek_sym("(") {
                        self.bump();
                        let a = self.parse_term()?;
                        self.expect_sym(",")?;
                        let b = self.parse_term()?;
                        self.expect_sym(")")?;
                        return Ok(RawTerm::App(op, Box::new(a), Box::new(b)));
                    }
                }
                if id == "priv" && self.peek_sym("(") {
                    self.bump();
                    let a = self.parse_term()?;
                    self.expect_sym(")")?;
                    return Ok(RawTerm::Priv(Box::new(a)));
                }
                if self.eat_sym(".") {
                    Ok(RawTerm::Qualified(id, self.expect_ident()?))
                } else {
                    Ok(RawTerm::Ident(id))
                }
            }
            _ => self.err("expected a term"),
        }
    }
}

// canonical printing

fn term_text(t: &RawTerm) -> String {
    match t {
        RawTerm::Tuple(items) => {
            let inner: Vec<String> = items.iter().map(term_text).collect();
            format!("<{}>", inner.join(", "))
        }
        RawTerm::App(op, a, b) => {
            let name = match op {
                BinOp::Enc => "enc",
                BinOp::Enca => "enca",
                BinOp::Sign => "sign",
                BinOp::Pair => "pair",
            };
            format!("{}({}, {})", name, term_text(a), term_text(b))
        }
        RawTerm::Priv(a) => format!("priv({})", term_text(a)),
        RawTerm::TimeVar(t) => format!("@{}", t),
        RawTerm::Number(n) => n.clone(),
        RawTerm::Ident(n) => n.clone(),
        RawTerm::Qualified(s, n) => format!("{}.{}", s, n),
    }
}

fn formula_text(f: &FormulaAst) -> String {
    match f {
        FormulaAst::Eq(a, b) => format!("{} = {}", term_text(a), term_text(b)),
        FormulaAst::Neq(a, b) => format!("{} != {}", term_text(a), term_text(b)),
        FormulaAst::Not(g) => format!("!({})", formula_text(g)),
        FormulaAst::And(g, h) => format!("({} & {})", formula_text(g), formula_text(h)),
        FormulaAst::Or(g, h) => format!("({} | {})", formula_text(g), formula_text(h)),
        FormulaAst::False => "false".to_string(),
    }
}

fn linexpr_text(terms: &[LinTerm]) -> String {
    let mut out = String::new();
    for (i, t) in terms.iter().enumerate() {
        let negative = t.coeff < BigRational::from_integer(0.into());
        let magnitude = if negative { -t.coeff.clone() } else { t.coeff.clone() };
        if i == 0 {
            if negative {
                out.push('-');
            }
        } else {
            out.push_str(if negative { " - " } else { " + " });
        }
        match &t.var {
            None => out.push_str(&magnitude.to_string()),
            Some(v) => {
                if magnitude.is_one() {
                    out.push_str(&term_text(v));
                } else {
                    out.push_str(&format!("{}*{}", magnitude, term_text(v)));
                }
            }
        }
    }
    out
}

fn property_text(p: &PropertyAst) -> String {
    match p {
        PropertyAst::Secrecy(t) => format!("secrecy {}", term_text(t)),
        PropertyAst::KeyCycle { strict, rho1, on } => {
            let mut out = String::new();
            if *strict {
                out.push_str("strict ");
            }
            out.push_str("keycycle");
            match rho1 {
                Some(Rho1Ast::Guarded) => out.push_str(" via guarded"),
                Some(Rho1Ast::Subterm) => out.push_str(" via subterm"),
                None => {}
            }
            if !on.is_empty() {
                let items: Vec<String> = on.iter().map(term_text).collect();
                out.push_str(&format!(" on {}", items.join(", ")));
            }
            out
        }
        PropertyAst::Ordering { precedes, on } => {
            let pairs: Vec<String> = precedes
                .iter()
                .map(|(a, b)| format!("{} < {}", term_text(a), term_text(b)))
                .collect();
            let mut out = format!("ordering {}", pairs.join(", "));
            if !on.is_empty() {
                let items: Vec<String> = on.iter().map(term_text).collect();
                out.push_str(&format!(" on {}", items.join(", ")));
            }
            out
        }
        PropertyAst::Logic(f) => format!("formula {}", formula_text(f)),
        PropertyAst::Timed { integer, atoms } => {
            let mut out = String::from("timed ");
            if *integer {
                out.push_str("integer ");
            }
            let parts: Vec<String> = atoms
                .iter()
                .map(|a| {
                    format!(
                        "{} {} {}",
                        linexpr_text(&a.lhs),
                        a.rel.symbol(),
                        linexpr_text(&a.rhs)
                    )
                })
                .collect();
            out.push_str(&parts.join(" & "));
            out
        }
    }
}

impl File {
    pub fn property_text(&self) -> String {
        property_text(&self.property)
    }

    /// Prints the file in the canonical form; parsing the result yields an
    /// equal syntax tree.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        out.push_str("sorts {\n");
        let profile = match self.profile {
            SortProfile::Untyped => "untyped",
            SortProfile::AtomicKeys => "atomic-keys",
            SortProfile::Timed => "timed",
        };
        out.push_str(&format!("  profile {}\n", profile));
        for (sort, name) in &self.sort_names {
            let kw = match sort {
                Sort::Key => "key",
                Sort::Time => "time",
                _ => "msg",
            };
            out.push_str(&format!("  {} {}\n", kw, name));
        }
        out.push_str("}\n");

        if !self.agents.is_empty() {
            out.push_str("agents {\n");
            for a in &self.agents {
                let kw = if a.corrupt { "corrupt" } else { "honest" };
                out.push_str(&format!("  {} {}\n", kw, a.name));
            }
            out.push_str("}\n");
        }

        if !self.roles.is_empty() {
            out.push_str("roles {\n");
            for r in &self.roles {
                out.push_str(&format!("  role {}({}) {{\n", r.name, r.params.join(", ")));
                for s in &r.steps {
                    match s {
                        Step::Fresh(sort, names) => {
                            let kw = match sort {
                                Sort::Key => "key ",
                                Sort::Time => "time ",
                                _ => "",
                            };
                            out.push_str(&format!("    fresh {}{}\n", kw, names.join(", ")));
                        }
                        Step::Send(t) => {
                            out.push_str(&format!("    send {}\n", term_text(t)))
                        }
                        Step::Recv { pattern, at, send } => {
                            out.push_str(&format!("    recv {}", term_text(pattern)));
                            if let Some(t) = at {
                                out.push_str(&format!(" @ {}", t));
                            }
                            if let Some(t) = send {
                                out.push_str(&format!(" -> send {}", term_text(t)));
                            }
                            out.push('\n');
                        }
                    }
                }
                out.push_str("  }\n");
            }
            out.push_str("}\n");
        }

        out.push_str("scenario {\n");
        for s in &self.scenario.sessions {
            let args: Vec<String> = s.args.iter().map(term_text).collect();
            out.push_str(&format!("  session {}: {}({})\n", s.label, s.role, args.join(", ")));
        }
        if !self.scenario.knows.is_empty() {
            let items: Vec<String> = self.scenario.knows.iter().map(term_text).collect();
            out.push_str(&format!("  knows {}\n", items.join(", ")));
        }
        if let Some(entries) = &self.scenario.schedule {
            let items: Vec<String> =
                entries.iter().map(|(l, n)| format!("{}.{}", l, n)).collect();
            out.push_str(&format!("  schedule {}\n", items.join(", ")));
        }
        out.push_str("}\n");

        out.push_str(&format!("property {{ {} }}\n", property_text(&self.property)));
        out
    }
}
