//! Generic s-expression reader with source locations.
//!
//! Iterative, so hostile nesting cannot overflow the stack.

use super::ParseError;

/// Paren nesting beyond this is rejected outright.
pub const MAX_NESTING: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub enum SExprKind {
    Atom(String),
    List(Vec<SExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SExpr {
    pub kind: SExprKind,
    pub line: usize,
    pub column: usize,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }
}

fn is_delimiter(c: char) -> bool {
    c.is_whitespace() || c == '(' || c == ')' || c == ';'
}

/// Text of the source line at `line`, starting from `column`, truncated.
pub fn snippet_at(source: &str, line: usize, column: usize) -> String {
    source
        .lines()
        .nth(line.saturating_sub(1))
        .map(|l| {
            l.chars()
                .skip(column.saturating_sub(1))
                .take(32)
                .collect::<String>()
        })
        .unwrap_or_default()
}

fn error(source: &str, line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column,
        message: message.into(),
        snippet: snippet_at(source, line, column),
    }
}

/// Reads exactly one top-level form.
pub fn read(source: &str) -> Result<SExpr, ParseError> {
    let mut cur = Cursor {
        chars: source.chars().peekable(),
        line: 1,
        column: 1,
    };
    // Open lists: (line, column, items).
    let mut stack: Vec<(usize, usize, Vec<SExpr>)> = Vec::new();
    let mut top: Option<SExpr> = None;

    loop {
        let Some(c) = cur.peek() else { break };
        let (line, column) = (cur.line, cur.column);
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == ';' {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if top.is_some() {
            return Err(error(source, line, column, "unexpected input after the program"));
        }
        let finished = match c {
            '(' => {
                cur.bump();
                if stack.len() >= MAX_NESTING {
                    return Err(error(source, line, column, "lists nested too deeply"));
                }
                stack.push((line, column, Vec::new()));
                None
            }
            ')' => {
                cur.bump();
                let Some((l, col, items)) = stack.pop() else {
                    return Err(error(source, line, column, "unbalanced `)`"));
                };
                Some(SExpr {
                    kind: SExprKind::List(items),
                    line: l,
                    column: col,
                })
            }
            _ => {
                let mut atom = String::new();
                while let Some(c) = cur.peek() {
                    if is_delimiter(c) {
                        break;
                    }
                    atom.push(c);
                    cur.bump();
                }
                Some(SExpr {
                    kind: SExprKind::Atom(atom),
                    line,
                    column,
                })
            }
        };
        if let Some(expr) = finished {
            match stack.last_mut() {
                Some((_, _, items)) => items.push(expr),
                None => top = Some(expr),
            }
        }
    }

    if let Some((line, column, _)) = stack.last() {
        // Report the innermost list still open.
        return Err(error(source, *line, *column, "unclosed list"));
    }
    top.ok_or_else(|| {
        let (line, column) = (cur.line, cur.column);
        ParseError {
            line: if source.is_empty() { 1 } else { line },
            column: if source.is_empty() { 1 } else { column.saturating_sub(1).max(1) },
            message: "empty program".to_string(),
            snippet: String::new(),
        }
    })
}
