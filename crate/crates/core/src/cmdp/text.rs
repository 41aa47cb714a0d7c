//! Plain-text matrix format for CMDPs.
//!
//! ```text
//! # lines starting with '#' and blank lines are ignored
//! cmdp 1
//! n_states 2
//! n_actions 2
//! n_constraints 1
//! discount 0.9
//! thresholds 0.15
//! initial
//! 1 0
//! transition
//! 0 1        # one row per (s, a), s-major, each with n_states entries
//! 1 0
//! 0 1
//! 0 1
//! reward
//! 0 0        # one row per state, each with n_actions entries
//! 1 1
//! cost 0
//! 1 0
//! 0 0
//! ```
//!
//! `thresholds` carries one value per constraint and one `cost <i>` block
//! follows for every constraint in order. Numbers are written in Rust's
//! shortest round-trip notation, so `parse(write(x)) == x` bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use super::Cmdp;
use crate::error::{Error, Result};

const MAGIC: &str = "cmdp";
const VERSION: &str = "1";

/// Serialises a CMDP in the text format.
pub fn write_cmdp(cmdp: &Cmdp) -> String {
    let (s_n, a_n) = (cmdp.n_states(), cmdp.n_actions());
    let mut out = String::new();
    let row = |vals: &[f64]| {
        vals.iter()
            .map(|x| format!("{x:?}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "n_states {s_n}");
    let _ = writeln!(out, "n_actions {a_n}");
    let _ = writeln!(out, "n_constraints {}", cmdp.n_constraints());
    let _ = writeln!(out, "discount {:?}", cmdp.discount());
    let _ = writeln!(out, "thresholds {}", row(cmdp.thresholds()));
    let _ = writeln!(out, "initial\n{}", row(cmdp.initial()));
    out.push_str("transition\n");
    for chunk in cmdp.transition().chunks(s_n) {
        let _ = writeln!(out, "{}", row(chunk));
    }
    out.push_str("reward\n");
    for chunk in cmdp.reward().chunks(a_n) {
        let _ = writeln!(out, "{}", row(chunk));
    }
    for (i, cost) in cmdp.costs().iter().enumerate() {
        let _ = writeln!(out, "cost {i}");
        for chunk in cost.chunks(a_n) {
            let _ = writeln!(out, "{}", row(chunk));
        }
    }
    out
}

struct Lines<'a> {
    inner: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let inner = text
            .lines()
            .enumerate()
            .filter_map(|(i, line)| {
                let content = line.split('#').next().unwrap_or("").trim();
                (!content.is_empty()).then_some((i + 1, content))
            })
            .collect();
        Self { inner, pos: 0 }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let line = self.inner.get(self.pos).copied().ok_or_else(|| Error::Parse {
            line: self.inner.last().map_or(0, |l| l.0),
            message: format!("unexpected end of input, expected {what}"),
        })?;
        self.pos += 1;
        Ok(line)
    }

    fn keyword(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (line, content) = self.next(key)?;
        let mut parts = content.split_whitespace();
        match parts.next() {
            Some(k) if k == key => Ok((line, parts.collect())),
            other => Err(Error::Parse {
                line,
                message: format!("expected '{key}', found '{}'", other.unwrap_or("")),
            }),
        }
    }

    fn scalar<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (line, values) = self.keyword(key)?;
        match values.as_slice() {
            [v] => v.parse().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse value '{v}' for {key}"),
            }),
            _ => Err(Error::Parse {
                line,
                message: format!("{key} takes exactly one value"),
            }),
        }
    }

    fn numbers(&mut self, what: &str, count: usize) -> Result<Vec<f64>> {
        let (line, content) = self.next(what)?;
        parse_numbers(line, content.split_whitespace(), count, what)
    }
}

fn parse_numbers<'a>(
    line: usize,
    tokens: impl Iterator<Item = &'a str>,
    count: usize,
    what: &str,
) -> Result<Vec<f64>> {
    let values = tokens
        .map(|t| {
            t.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse number '{t}' in {what}"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != count {
        return Err(Error::Parse {
            line,
            message: format!("{what}: expected {count} numbers, found {}", values.len()),
        });
    }
    Ok(values)
}

/// Parses the text format and validates the result as a [`Cmdp`].
pub fn parse_cmdp(text: &str) -> Result<Cmdp> {
    let mut lines = Lines::new(text);
    let (line, version) = lines.keyword(MAGIC)?;
    if version != [VERSION] {
        return Err(Error::Parse {
            line,
            message: format!("unsupported format version {version:?}"),
        });
    }
    let s_n: usize = lines.scalar("n_states")?;
    let a_n: usize = lines.scalar("n_actions")?;
    let m: usize = lines.scalar("n_constraints")?;
    let gamma: f64 = lines.scalar("discount")?;
    let (line, tokens) = lines.keyword("thresholds")?;
    let thresholds = parse_numbers(line, tokens.into_iter(), m, "thresholds")?;
    lines.keyword("initial")?;
    let initial = lines.numbers("initial distribution", s_n)?;
    lines.keyword("transition")?;
    let mut transition = Vec::with_capacity(s_n * a_n * s_n);
    for _ in 0..s_n * a_n {
        transition.extend(lines.numbers("transition row", s_n)?);
    }
    lines.keyword("reward")?;
    let mut reward = Vec::with_capacity(s_n * a_n);
    for _ in 0..s_n {
        reward.extend(lines.numbers("reward row", a_n)?);
    }
    let mut builder = Cmdp::builder(s_n, a_n)
        .discount(gamma)
        .initial(initial)
        .transition(transition)
        .reward(reward);
    for (i, &d) in thresholds.iter().enumerate() {
        let (line, idx) = lines.keyword("cost")?;
        if idx != [i.to_string().as_str()] {
            return Err(Error::Parse {
                line,
                message: format!("expected 'cost {i}'"),
            });
        }
        let mut cost = Vec::with_capacity(s_n * a_n);
        for _ in 0..s_n {
            cost.extend(lines.numbers("cost row", a_n)?);
        }
        builder = builder.constraint(cost, d);
    }
    if let Some(&(line, extra)) = lines.inner.get(lines.pos) {
        return Err(Error::Parse {
            line,
            message: format!("trailing content '{extra}'"),
        });
    }
    builder.build()
}

pub fn read_cmdp(path: &Path) -> Result<Cmdp> {
    parse_cmdp(&std::fs::read_to_string(path)?)
}

pub fn write_cmdp_file(cmdp: &Cmdp, path: &Path) -> Result<()> {
    std::fs::write(path, write_cmdp(cmdp))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC_EXAMPLE: &str = "\
# lines starting with '#' and blank lines are ignored
cmdp 1
n_states 2
n_actions 2
n_constraints 1
discount 0.9
thresholds 0.15
initial
1 0
transition
0 1        # one row per (s, a)
1 0
0 1
0 1
reward
0 0
1 1
cost 0
1 0
0 0
";

    #[test]
    fn parses_documented_example() {
        let cmdp = parse_cmdp(DOC_EXAMPLE).unwrap();
        assert_eq!(cmdp.n_states(), 2);
        assert_eq!(cmdp.next_states(0, 1), &[1.0, 0.0]);
        assert_eq!(cmdp.reward(), &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(cmdp.threshold(0), 0.15);
        assert_eq!(parse_cmdp(&write_cmdp(&cmdp)).unwrap(), cmdp);
    }

    #[test]
    fn reports_line_numbers() {
        let broken = DOC_EXAMPLE.replace("1 1\ncost", "1 x\ncost");
        match parse_cmdp(&broken) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 17),
            other => panic!("unexpected {other:?}"),
        }
        let short = DOC_EXAMPLE.replace("0 1        # one row per (s, a)", "0");
        assert!(matches!(parse_cmdp(&short), Err(Error::Parse { .. })));
        let trailing = format!("{DOC_EXAMPLE}extra\n");
        assert!(matches!(parse_cmdp(&trailing), Err(Error::Parse { .. })));
    }

    #[test]
    fn invalid_tables_fail_validation() {
        let bad = DOC_EXAMPLE.replace("1 0\n0 1\n0 1\nreward", "1 0.5\n0 1\n0 1\nreward");
        assert!(matches!(parse_cmdp(&bad), Err(Error::InvalidCmdp(_))));
    }
}
