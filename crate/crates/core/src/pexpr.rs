//! Tiny arithmetic evaluator for edge-probability expressions in configs,
//! e.g. `"8*ln(n)/n"` or `"(ln(n)+ln(ln(n))+4)/n"`. Supported: numbers, `n`,
//! `+ - * /`, parentheses, unary minus, and the functions `ln`, `log2`,
//! `sqrt`, `exp`.

use crate::{Error, Result};

pub fn eval_p_expr(expr: &str, n: usize) -> Result<f64> {
    let tokens = tokenize(expr)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        n: n as f64,
    };
    let value = parser.expression()?;
    if parser.pos != parser.tokens.len() {
        return Err(Error::Config(format!(
            "trailing input in expression '{expr}'"
        )));
    }
    Ok(value)
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Name(String),
    Plus,
    Minus,
    Star,
    Slash,
    Open,
    Close,
}

fn tokenize(expr: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = expr.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        match ch {
            ' ' | '\t' => i += 1,
            '+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            '-' => {
                tokens.push(Token::Minus);
                i += 1;
            }
            '*' => {
                tokens.push(Token::Star);
                i += 1;
            }
            '/' => {
                tokens.push(Token::Slash);
                i += 1;
            }
            '(' => {
                tokens.push(Token::Open);
                i += 1;
            }
            ')' => {
                tokens.push(Token::Close);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let value: f64 = text
                    .parse()
                    .map_err(|_| Error::Config(format!("bad number '{text}' in expression")))?;
                tokens.push(Token::Number(value));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                tokens.push(Token::Name(chars[start..i].iter().collect()));
            }
            other => return Err(Error::Config(format!("unexpected character '{other}'"))),
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    n: f64,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expression(&mut self) -> Result<f64> {
        let mut value = self.term()?;
        while let Some(op) = self.peek() {
            match op {
                Token::Plus => {
                    self.pos += 1;
                    value += self.term()?;
                }
                Token::Minus => {
                    self.pos += 1;
                    value -= self.term()?;
                }
                _ => break,
            }
        }
        Ok(value)
    }

    fn term(&mut self) -> Result<f64> {
        let mut value = self.factor()?;
        while let Some(op) = self.peek() {
            match op {
                Token::Star => {
                    self.pos += 1;
                    value *= self.factor()?;
                }
                Token::Slash => {
                    self.pos += 1;
                    value /= self.factor()?;
                }
                _ => break,
            }
        }
        Ok(value)
    }

    fn factor(&mut self) -> Result<f64> {
        match self.next() {
            Some(Token::Number(x)) => Ok(x),
            Some(Token::Minus) => Ok(-self.factor()?),
            Some(Token::Open) => {
                let value = self.expression()?;
                match self.next() {
                    Some(Token::Close) => Ok(value),
                    _ => Err(Error::Config("missing closing parenthesis".into())),
                }
            }
            Some(Token::Name(name)) if name == "n" => Ok(self.n),
            Some(Token::Name(name)) => {
                if self.next() != Some(Token::Open) {
                    return Err(Error::Config(format!(
                        "function '{name}' needs parentheses"
                    )));
                }
                let arg = self.expression()?;
                if self.next() != Some(Token::Close) {
                    return Err(Error::Config("missing closing parenthesis".into()));
                }
                match name.as_str() {
                    "ln" => Ok(arg.ln()),
                    "log2" => Ok(arg.log2()),
                    "sqrt" => Ok(arg.sqrt()),
                    "exp" => Ok(arg.exp()),
                    other => Err(Error::Config(format!("unknown function '{other}'"))),
                }
            }
            other => Err(Error::Config(format!("unexpected token {other:?}"))),
        }
    }
}
