//! Maps a field path to its line and column in JSON text.
//!
//! `serde_json` values carry no positions, so validation errors found after
//! parsing re-scan the text. The scanner assumes the text already parsed.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Key(String),
    Index(usize),
}

/// `cbfs[1].transform.base` style rendering.
pub fn display_path(path: &[Segment]) -> String {
    let mut out = String::new();
    for seg in path {
        match seg {
            Segment::Key(k) => {
                if !out.is_empty() {
                    out.push('.');
                }
                out.push_str(k);
            }
            Segment::Index(i) => {
                let _ = write!(out, "[{i}]");
            }
        }
    }
    if out.is_empty() {
        "(root)".into()
    } else {
        out
    }
}

struct Scanner<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
    target: &'a [Segment],
    /// Deepest matched prefix length and its position.
    best: (usize, (usize, usize)),
}

impl Scanner<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn here(&self) -> (usize, usize) {
        (self.line, self.column)
    }

    fn string(&mut self) -> String {
        let mut s = String::new();
        self.bump();
        while let Some(c) = self.bump() {
            match c {
                '"' => break,
                '\\' => {
                    if let Some(e) = self.bump() {
                        s.push(e);
                    }
                }
                _ => s.push(c),
            }
        }
        s
    }

    fn note(&mut self, path: &[Segment], at: (usize, usize)) -> bool {
        let matched = path.len() <= self.target.len() && self.target[..path.len()] == *path;
        if matched && path.len() >= self.best.0 {
            self.best = (path.len(), at);
        }
        matched && path.len() == self.target.len()
    }

    /// Returns `true` once the target has been reached.
    fn value(&mut self, path: &mut Vec<Segment>) -> bool {
        self.skip_ws();
        match self.peek() {
            Some('{') => {
                self.bump();
                loop {
                    self.skip_ws();
                    match self.peek() {
                        Some('"') => {
                            let at = self.here();
                            let k = self.string();
                            path.push(Segment::Key(k));
                            if self.note(path, at) {
                                return true;
                            }
                            self.skip_ws();
                            self.bump();
                            if self.value(path) {
                                return true;
                            }
                            path.pop();
                        }
                        Some(',') => {
                            self.bump();
                        }
                        Some('}') => {
                            self.bump();
                            return false;
                        }
                        _ => return false,
                    }
                }
            }
            Some('[') => {
                self.bump();
                let mut i = 0;
                loop {
                    self.skip_ws();
                    match self.peek() {
                        Some(']') => {
                            self.bump();
                            return false;
                        }
                        Some(',') => {
                            self.bump();
                            i += 1;
                        }
                        Some(_) => {
                            path.push(Segment::Index(i));
                            let at = self.here();
                            if self.note(path, at) || self.value(path) {
                                return true;
                            }
                            path.pop();
                        }
                        None => return false,
                    }
                }
            }
            Some('"') => {
                self.string();
                false
            }
            Some(_) => {
                while self.peek().is_some_and(|c| !matches!(c, ',' | ']' | '}') && !c.is_whitespace()) {
                    self.bump();
                }
                false
            }
            None => false,
        }
    }
}

/// One-based line and column of `path` in `text`. A path that does not
/// exist resolves to its deepest existing ancestor.
pub fn locate(text: &str, path: &[Segment]) -> Option<(usize, usize)> {
    let mut scanner = Scanner {
        chars: text.chars().collect(),
        pos: 0,
        line: 1,
        column: 1,
        target: path,
        best: (0, (1, 1)),
    };
    scanner.skip_ws();
    scanner.best = (0, scanner.here());
    let found = scanner.value(&mut Vec::new());
    if found || scanner.best.0 > 0 || path.is_empty() {
        Some(scanner.best.1)
    } else {
        None
    }
}
