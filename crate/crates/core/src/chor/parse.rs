use thiserror::Error;

use super::{AbstractMessage, Branch, Choreography, OpLabel, Role};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Zero,
    Arrow,
    Colon,
    Lt,
    Gt,
    Comma,
    Dot,
    Plus,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Zero => "`0`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Plus => "`+`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
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
        let single = match c {
            ':' => Some(Tok::Colon),
            '<' => Some(Tok::Lt),
            '>' => Some(Tok::Gt),
            ',' => Some(Tok::Comma),
            '.' => Some(Tok::Dot),
            '+' => Some(Tok::Plus),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Spanned {
                tok,
                line: l0,
                col: c0,
            });
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' {
            if chars.get(i + 1) == Some(&'>') {
                out.push(Spanned {
                    tok: Tok::Arrow,
                    line: l0,
                    col: c0,
                });
                i += 2;
                col += 2;
                continue;
            }
            return Err(ParseError {
                line: l0,
                col: c0,
                message: "expected `->`".into(),
            });
        }
        if c.is_alphanumeric() || c == '_' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'')
            {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = if word == "0" {
                Tok::Zero
            } else {
                Tok::Ident(word)
            };
            out.push(Spanned {
                tok,
                line: l0,
                col: c0,
            });
            continue;
        }
        return Err(ParseError {
            line: l0,
            col: c0,
            message: format!("unexpected character `{c}`"),
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, t: &Spanned, message: impl Into<String>) -> ParseError {
        ParseError {
            line: t.line,
            col: t.col,
            message: message.into(),
        }
    }

    fn expect(&mut self, want: Tok) -> Result<Spanned, ParseError> {
        let t = self.bump();
        if t.tok == want {
            Ok(t)
        } else {
            Err(self.error_at(
                &t,
                format!("expected {}, found {}", want.describe(), t.tok.describe()),
            ))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Spanned), ParseError> {
        let t = self.bump();
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t.clone())),
            other => Err(self.error_at(&t, format!("expected {what}, found {}", other.describe()))),
        }
    }

    fn choreography(&mut self) -> Result<Choreography, ParseError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Zero => {
                self.bump();
                Ok(Choreography::Zero)
            }
            Tok::Ident(_) => Ok(Choreography::Com(vec![self.branch()?])),
            Tok::LParen => {
                self.bump();
                if self.peek().tok == Tok::Zero {
                    self.bump();
                    self.expect(Tok::RParen)?;
                    return Ok(Choreography::Zero);
                }
                if self.peek().tok == Tok::LParen {
                    let inner = self.choreography()?;
                    self.expect(Tok::RParen)?;
                    return Ok(inner);
                }
                let first = self.branch()?;
                let mut branches = vec![first];
                while self.peek().tok == Tok::Plus {
                    self.bump();
                    let at = self.peek().clone();
                    let b = self.branch()?;
                    if b.sender != branches[0].sender || b.receiver != branches[0].receiver {
                        return Err(self.error_at(
                            &at,
                            format!(
                                "branch `{} -> {}` differs from the group's `{} -> {}`",
                                b.sender, b.receiver, branches[0].sender, branches[0].receiver
                            ),
                        ));
                    }
                    branches.push(b);
                }
                self.expect(Tok::RParen)?;
                Ok(Choreography::Com(branches))
            }
            other => Err(self.error_at(
                &t,
                format!("expected a choreography, found {}", other.describe()),
            )),
        }
    }

    fn branch(&mut self) -> Result<Branch, ParseError> {
        let (sender, at) = self.ident("a sender role")?;
        self.expect(Tok::Arrow)?;
        let (receiver, _) = self.ident("a receiver role")?;
        if sender == receiver {
            return Err(self.error_at(&at, format!("role `{sender}` cannot send to itself")));
        }
        self.expect(Tok::Colon)?;
        let (op, _) = self.ident("an operation label")?;
        self.expect(Tok::Lt)?;
        let payload = self.messages(Tok::Gt)?;
        self.expect(Tok::Gt)?;
        self.expect(Tok::Dot)?;
        let continuation = self.choreography()?;
        Ok(Branch {
            sender: Role(sender),
            receiver: Role(receiver),
            op: OpLabel(op),
            payload,
            continuation,
        })
    }

    fn messages(&mut self, close: Tok) -> Result<Vec<AbstractMessage>, ParseError> {
        let mut out = Vec::new();
        if self.peek().tok == close {
            return Ok(out);
        }
        out.push(self.message()?);
        while self.peek().tok == Tok::Comma {
            self.bump();
            out.push(self.message()?);
        }
        Ok(out)
    }

    fn message(&mut self) -> Result<AbstractMessage, ParseError> {
        let (word, at) = self.ident("a message")?;
        if word == "box" && self.peek().tok == Tok::LBracket {
            self.bump();
            let contents = self.messages(Tok::RBracket)?;
            self.expect(Tok::RBracket)?;
            self.expect(Tok::LBrace)?;
            let (from, _) = self.ident("the box's originating role")?;
            self.expect(Tok::Comma)?;
            let (to, _) = self.ident("the box's addressee role")?;
            self.expect(Tok::RBrace)?;
            if from == to {
                return Err(self.error_at(&at, format!("box addressed from `{from}` to itself")));
            }
            return Ok(AbstractMessage::Box {
                contents,
                from: Role(from),
                to: Role(to),
            });
        }
        Ok(AbstractMessage::Value(word))
    }
}

/// Parses `.chor` source into a choreography.
pub fn parse_choreography(source: &str) -> Result<Choreography, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser { toks, pos: 0 };
    let c = p.choreography()?;
    let t = p.peek().clone();
    if t.tok != Tok::Eof {
        return Err(p.error_at(
            &t,
            format!("unexpected {} after choreography", t.tok.describe()),
        ));
    }
    Ok(c)
}
