//! Environment markers (`python_version >= "3.8" and extra == "plot"`).

use std::collections::{BTreeMap, BTreeSet};

use crate::model::normalize_name;
use crate::version::{parse_specifier_set, parse_version};

/// Target environment the markers are evaluated against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerEnv {
    pub python_version: String,
    pub sys_platform: String,
    /// Extras requested for the package whose metadata is evaluated.
    pub extras: BTreeSet<String>,
    /// Other marker variables (`os_name`, `platform_system`, ...).
    pub vars: BTreeMap<String, String>,
    /// Value of a comparison that references an unknown variable.
    pub unknown_is_true: bool,
}

impl MarkerEnv {
    /// CPython on x86_64 Linux with the given `X.Y` or `X.Y.Z` version.
    pub fn linux_cpython(python_version: &str) -> Self {
        let parts: Vec<&str> = python_version.split('.').collect();
        let short = parts.iter().take(2).copied().collect::<Vec<_>>().join(".");
        let full = if parts.len() >= 3 {
            python_version.to_string()
        } else {
            format!("{short}.0")
        };
        let vars = [
            ("os_name", "posix"),
            ("platform_system", "Linux"),
            ("platform_machine", "x86_64"),
            ("platform_python_implementation", "CPython"),
            ("implementation_name", "cpython"),
            ("implementation_version", full.as_str()),
            ("python_full_version", full.as_str()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        MarkerEnv {
            python_version: short,
            sys_platform: "linux".to_string(),
            extras: BTreeSet::new(),
            vars,
            unknown_is_true: true,
        }
    }

    pub fn with_extras<I: IntoIterator<Item = String>>(&self, extras: I) -> MarkerEnv {
        MarkerEnv {
            extras: extras.into_iter().collect(),
            ..self.clone()
        }
    }

    fn lookup(&self, var: &str) -> Option<String> {
        match var {
            "python_version" => Some(self.python_version.clone()),
            "sys_platform" => Some(self.sys_platform.clone()),
            // legacy spellings
            "os.name" => self.vars.get("os_name").cloned(),
            "sys.platform" => Some(self.sys_platform.clone()),
            "platform.python_implementation" => self.vars.get("platform_python_implementation").cloned(),
            "platform.machine" => self.vars.get("platform_machine").cloned(),
            other => self.vars.get(other).cloned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MarkerOutcome {
    pub value: bool,
    /// Reasons the value is not exact: unknown variables, grammar errors,
    /// undefined comparisons.
    pub warnings: Vec<String>,
}

/// Evaluate `marker` in `env`. Never fails: unparseable markers evaluate
/// to true with a warning so the requirement is kept.
pub fn evaluate_marker(marker: &str, env: &MarkerEnv) -> MarkerOutcome {
    let mut warnings = Vec::new();
    let value = match parse(marker) {
        Ok(expr) => eval(&expr, env, &mut warnings),
        Err(e) => {
            warnings.push(format!("cannot parse marker {marker:?}: {e}"));
            true
        }
    };
    MarkerOutcome { value, warnings }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Str(String),
    Word(String),
    Op(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
enum Operand {
    Var(String),
    Lit(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Cmp(Operand, &'static str, Operand),
}

const OPS: [&str; 8] = ["===", "==", "!=", "<=", ">=", "~=", "<", ">"];

fn tokenize(s: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '(' {
            out.push(Tok::LParen);
            i += 1;
        } else if c == ')' {
            out.push(Tok::RParen);
            i += 1;
        } else if c == '"' || c == '\'' {
            let end = chars[i + 1..]
                .iter()
                .position(|&d| d == c)
                .ok_or_else(|| "unterminated string".to_string())?;
            out.push(Tok::Str(chars[i + 1..i + 1 + end].iter().collect()));
            i += end + 2;
        } else if let Some(op) = OPS.iter().find(|op| {
            let n = op.len();
            i + n <= chars.len() && chars[i..i + n].iter().collect::<String>() == **op
        }) {
            out.push(Tok::Op(op));
            i += op.len();
        } else if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                i += 1;
            }
            out.push(Tok::Word(chars[start..i].iter().collect()));
        } else {
            return Err(format!("unexpected character {c:?}"));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(x)) if x == w)
    }

    fn or(&mut self) -> Result<Expr, String> {
        let mut left = self.and()?;
        while self.is_word("or") {
            self.pos += 1;
            left = Expr::Or(Box::new(left), Box::new(self.and()?));
        }
        Ok(left)
    }

    fn and(&mut self) -> Result<Expr, String> {
        let mut left = self.atom()?;
        while self.is_word("and") {
            self.pos += 1;
            left = Expr::And(Box::new(left), Box::new(self.atom()?));
        }
        Ok(left)
    }

    fn atom(&mut self) -> Result<Expr, String> {
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            let e = self.or()?;
            if self.next() != Some(Tok::RParen) {
                return Err("missing `)`".to_string());
            }
            return Ok(e);
        }
        let lhs = self.operand()?;
        let op = match self.next() {
            Some(Tok::Op(op)) => op,
            Some(Tok::Word(w)) if w == "in" => "in",
            Some(Tok::Word(w)) if w == "not" => {
                if !self.is_word("in") {
                    return Err("expected `in` after `not`".to_string());
                }
                self.pos += 1;
                "not in"
            }
            other => return Err(format!("expected a comparison operator, found {other:?}")),
        };
        let rhs = self.operand()?;
        Ok(Expr::Cmp(lhs, op, rhs))
    }

    fn operand(&mut self) -> Result<Operand, String> {
        match self.next() {
            Some(Tok::Str(s)) => Ok(Operand::Lit(s)),
            Some(Tok::Word(w)) if !matches!(w.as_str(), "and" | "or" | "in" | "not") => Ok(Operand::Var(w)),
            other => Err(format!("expected a variable or string, found {other:?}")),
        }
    }
}

fn parse(marker: &str) -> Result<Expr, String> {
    let mut p = Parser {
        toks: tokenize(marker)?,
        pos: 0,
    };
    let e = p.or()?;
    if p.pos != p.toks.len() {
        return Err(format!("unexpected trailing {:?}", p.toks[p.pos]));
    }
    Ok(e)
}

fn eval(e: &Expr, env: &MarkerEnv, warnings: &mut Vec<String>) -> bool {
    match e {
        // evaluate both sides so every uncertainty is reported
        Expr::And(a, b) => {
            let (x, y) = (eval(a, env, warnings), eval(b, env, warnings));
            x && y
        }
        Expr::Or(a, b) => {
            let (x, y) = (eval(a, env, warnings), eval(b, env, warnings));
            x || y
        }
        Expr::Cmp(l, op, r) => compare(l, op, r, env, warnings),
    }
}

fn compare(l: &Operand, op: &str, r: &Operand, env: &MarkerEnv, warnings: &mut Vec<String>) -> bool {
    let is_extra = |o: &Operand| matches!(o, Operand::Var(v) if v == "extra");
    if is_extra(l) || is_extra(r) {
        let other = if is_extra(l) { r } else { l };
        let Operand::Lit(want) = other else {
            warnings.push("`extra` compared with a variable".to_string());
            return env.unknown_is_true;
        };
        let want = normalize_name(want)
            .map(|n| n.normalized().to_string())
            .unwrap_or_else(|_| want.clone());
        let present = env.extras.contains(&want);
        return match op {
            "==" | "===" => present,
            "!=" => !present,
            _ => {
                warnings.push(format!("operator {op} is undefined for `extra`"));
                env.unknown_is_true
            }
        };
    }
    let resolve = |o: &Operand, warnings: &mut Vec<String>| match o {
        Operand::Lit(s) => Some(s.clone()),
        Operand::Var(v) => {
            let value = env.lookup(v);
            if value.is_none() {
                warnings.push(format!("unknown marker variable {v}"));
            }
            value
        }
    };
    let (Some(lhs), Some(rhs)) = (resolve(l, warnings), resolve(r, warnings)) else {
        return env.unknown_is_true;
    };
    match op {
        "in" => return rhs.contains(&lhs),
        "not in" => return !rhs.contains(&lhs),
        "===" => return lhs == rhs,
        _ => {}
    }
    if let (Ok(spec), Ok(v)) = (parse_specifier_set(&format!("{op}{rhs}")), parse_version(&lhs)) {
        return spec.contains(&v, true);
    }
    match op {
        "==" => lhs == rhs,
        "!=" => lhs != rhs,
        _ => {
            warnings.push(format!("comparison {lhs:?} {op} {rhs:?} is undefined for non-versions"));
            env.unknown_is_true
        }
    }
}
