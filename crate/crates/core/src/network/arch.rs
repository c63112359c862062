//! Architecture strings.
//!
//! ```text
//! arch    := names '-' layers
//! layers  := width '-' layers | head
//! head    := names | '[' branch (',' branch)* ']'
//! branch  := (width '-')* names
//! names   := '(' ident (',' ident)* ')'
//! ```
//!
//! Whitespace is ignored. `(x,t)-64-50-50-50-(u)` is one input pair, a
//! 64-wide first layer, three 50-wide layers and a single output `u`;
//! `(x,y)-64-20-[20-(u),20-(v)]` splits into two branches after the shared
//! layers. Combining accents (U+0300..U+036F) are dropped from identifiers.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    pub hidden: Vec<usize>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub inputs: Vec<String>,
    pub shared: Vec<usize>,
    pub branches: Vec<Branch>,
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        let chars = src
            .chars()
            .filter(|c| !c.is_whitespace() && !('\u{300}'..='\u{36f}').contains(c))
            .collect();
        Cursor { chars, pos: 0, src }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn err(&self, what: &str) -> Error {
        Error::Parse(format!("{what} at position {} in {:?}", self.pos, self.src))
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{c}'")))
        }
    }

    fn names(&mut self) -> Result<Vec<String>> {
        self.expect('(')?;
        let mut names = Vec::new();
        loop {
            let start = self.pos;
            while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '_') {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.err("expected identifier"));
            }
            names.push(self.chars[start..self.pos].iter().collect());
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(')') => {
                    self.pos += 1;
                    return Ok(names);
                }
                _ => return Err(self.err("expected ',' or ')'")),
            }
        }
    }

    fn width(&mut self) -> Result<usize> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        match text.parse::<usize>() {
            Ok(0) => Err(self.err("layer width must be positive")),
            Ok(w) => Ok(w),
            Err(_) => Err(self.err("expected layer width")),
        }
    }

    /// `(width '-')*` followed by whatever `tail` parses.
    fn widths_then<T>(&mut self, tail: impl Fn(&mut Self) -> Result<T>) -> Result<(Vec<usize>, T)> {
        let mut widths = Vec::new();
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            widths.push(self.width()?);
            self.expect('-')?;
        }
        Ok((widths, tail(self)?))
    }
}

impl Architecture {
    pub fn parse(src: &str) -> Result<Self> {
        let mut cur = Cursor::new(src);
        let inputs = cur.names()?;
        cur.expect('-')?;
        let (shared, branches) = cur.widths_then(|c| match c.peek() {
            Some('[') => {
                c.pos += 1;
                let mut branches = Vec::new();
                loop {
                    let (hidden, outputs) = c.widths_then(Cursor::names)?;
                    branches.push(Branch { hidden, outputs });
                    match c.peek() {
                        Some(',') => c.pos += 1,
                        Some(']') => {
                            c.pos += 1;
                            return Ok(branches);
                        }
                        _ => return Err(c.err("expected ',' or ']'")),
                    }
                }
            }
            Some('(') => Ok(vec![Branch {
                hidden: Vec::new(),
                outputs: c.names()?,
            }]),
            _ => Err(c.err("expected output names or branch list")),
        })?;
        if cur.pos != cur.chars.len() {
            return Err(cur.err("trailing characters"));
        }
        let arch = Architecture {
            inputs,
            shared,
            branches,
        };
        let mut seen = std::collections::HashSet::new();
        for name in arch.output_names() {
            if !seen.insert(name) {
                return Err(Error::Parse(format!("duplicate output {name:?}")));
            }
        }
        Ok(arch)
    }

    pub fn output_names(&self) -> impl Iterator<Item = &str> {
        self.branches
            .iter()
            .flat_map(|b| b.outputs.iter().map(String::as_str))
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Architecture::parse(s)
    }
}

fn write_names(f: &mut fmt::Formatter<'_>, names: &[String]) -> fmt::Result {
    write!(f, "({})", names.join(","))
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_names(f, &self.inputs)?;
        for w in &self.shared {
            write!(f, "-{w}")?;
        }
        f.write_str("-")?;
        let single = self.branches.len() == 1 && self.branches[0].hidden.is_empty();
        if single {
            return write_names(f, &self.branches[0].outputs);
        }
        f.write_str("[")?;
        for (i, b) in self.branches.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            for w in &b.hidden {
                write!(f, "{w}-")?;
            }
            write_names(f, &b.outputs)?;
        }
        f.write_str("]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_output() {
        let a = Architecture::parse("(x,t)-64-50-50-50-(u)").unwrap();
        assert_eq!(a.inputs, vec!["x", "t"]);
        assert_eq!(a.shared, vec![64, 50, 50, 50]);
        assert_eq!(a.branches.len(), 1);
        assert_eq!(a.branches[0].outputs, vec!["u"]);
    }

    #[test]
    fn branched_with_spaces_and_hats() {
        let a = Architecture::parse(
            "(x, y, t) - 64-50-50-50- [50-50-50-(u\u{302}), 50-50-50-(v\u{302}), 50-50-50-(p\u{302})]",
        )
        .unwrap();
        assert_eq!(a.inputs.len(), 3);
        assert_eq!(a.branches.len(), 3);
        assert_eq!(a.branches[2].hidden, vec![50, 50, 50]);
        assert_eq!(a.output_names().collect::<Vec<_>>(), vec!["u", "v", "p"]);
        assert_eq!(
            a.to_string(),
            "(x,y,t)-64-50-50-50-[50-50-50-(u),50-50-50-(v),50-50-50-(p)]"
        );
    }

    #[test]
    fn no_hidden_layers() {
        let a = Architecture::parse("(x)-(u)").unwrap();
        assert!(a.shared.is_empty());
    }

    #[test]
    fn rejects_malformed() {
        for s in [
            "",
            "x-10-(u)",
            "(x)-0-(u)",
            "(x)-10",
            "(x)-10-(u)-",
            "(x)-10-[(u),(u)]",
            "(x)-10-[10-(u)",
            "(x,)-10-(u)",
        ] {
            assert!(matches!(Architecture::parse(s), Err(Error::Parse(_))), "{s}");
        }
    }

    proptest! {
        #[test]
        fn display_round_trips(
            shared in prop::collection::vec(1usize..200, 0..5),
            branches in prop::collection::vec(prop::collection::vec(1usize..100, 0..4), 1..4),
        ) {
            let arch = Architecture {
                inputs: vec!["x".into(), "t".into()],
                shared,
                branches: branches
                    .into_iter()
                    .enumerate()
                    .map(|(i, hidden)| Branch { hidden, outputs: vec![format!("o{i}")] })
                    .collect(),
            };
            let text = arch.to_string();
            prop_assert_eq!(Architecture::parse(&text).unwrap(), arch);
        }
    }
}
