//! Gauge expressions.
//!
//! A gauge `V(t) = exp(−i θ₁(t) X₁) · exp(−i θ₂(t) X₂) · …` is written as
//! `;`-separated factors `X: θ`, with `X` one of `q`, `p` and `θ` a
//! polynomial in the times `t1 … tN`:
//!
//! ```text
//! gauge  := factor (';' factor)*
//! factor := ('q' | 'p') ':' poly
//! poly   := ['+' | '-'] term (('+' | '-') term)*
//! term   := atom ('*' atom)*
//! atom   := number | 't' index ['^' exponent]
//! ```
//!
//! Example: `q: t1 - 0.5*t2; p: 0.4*t1*t2 + t2^2`.

use crate::hierarchy::{Basis, Gauge, GaugeFactor, PhasePolynomial};

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Q,
    P,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeSpec {
    pub factors: Vec<(Generator, PhasePolynomial)>,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.src[self.pos..]
                .chars()
                .next()
                .map_or(1, char::len_utf8);
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn err(&self, what: &str) -> CliError {
        CliError::Config(format!(
            "gauge expression at column {}: {what}",
            self.pos + 1
        ))
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> &'a str {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.src[self.pos..].chars().next() {
            if !f(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
        &self.src[start..self.pos]
    }

    fn number(&mut self) -> Result<f64, CliError> {
        let start = self.pos;
        let mut text = self
            .take_while(|c| c.is_ascii_digit() || c == '.')
            .to_string();
        if matches!(self.src[self.pos..].chars().next(), Some('e' | 'E')) {
            self.pos += 1;
            text.push('e');
            if let Some(sign @ ('+' | '-')) = self.src[self.pos..].chars().next() {
                self.pos += 1;
                text.push(sign);
            }
            text.push_str(self.take_while(|c| c.is_ascii_digit()));
        }
        text.parse().map_err(|_| {
            self.pos = start;
            self.err("malformed number")
        })
    }

    fn integer(&mut self) -> Result<u32, CliError> {
        let digits = self.take_while(|c| c.is_ascii_digit());
        digits.parse().map_err(|_| self.err("expected an integer"))
    }
}

fn term(lx: &mut Lexer, n_times: usize) -> Result<(f64, Vec<u32>), CliError> {
    let mut coeff = 1.0;
    let mut exps = vec![0u32; n_times];
    loop {
        match lx.peek() {
            Some('t') => {
                lx.pos += 1;
                let idx = lx.integer()? as usize;
                if idx == 0 || idx > n_times {
                    return Err(lx.err(&format!("time t{idx} outside t1..t{n_times}")));
                }
                let power = if lx.eat('^') { lx.integer()? } else { 1 };
                exps[idx - 1] += power;
            }
            Some(c) if c.is_ascii_digit() || c == '.' => coeff *= lx.number()?,
            _ => return Err(lx.err("expected a number or a time t<i>")),
        }
        if !lx.eat('*') {
            return Ok((coeff, exps));
        }
    }
}

fn poly(lx: &mut Lexer, n_times: usize) -> Result<PhasePolynomial, CliError> {
    let mut terms = Vec::new();
    let mut sign = if lx.eat('-') {
        -1.0
    } else {
        lx.eat('+');
        1.0
    };
    loop {
        let (c, e) = term(lx, n_times)?;
        terms.push((sign * c, e));
        sign = if lx.eat('+') {
            1.0
        } else if lx.eat('-') {
            -1.0
        } else {
            return Ok(PhasePolynomial::new(terms));
        };
    }
}

impl GaugeSpec {
    pub fn parse(src: &str, n_times: usize) -> Result<Self, CliError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut factors = Vec::new();
        loop {
            let generator = match lx.peek() {
                Some('q') => Generator::Q,
                Some('p') => Generator::P,
                _ => return Err(lx.err("expected generator 'q' or 'p'")),
            };
            lx.pos += 1;
            if !lx.eat(':') {
                return Err(lx.err("expected ':' after the generator"));
            }
            factors.push((generator, poly(&mut lx, n_times)?));
            if lx.eat(';') {
                continue;
            }
            if lx.peek().is_some() {
                return Err(lx.err("unexpected trailing input"));
            }
            return Ok(Self { factors });
        }
    }

    pub fn build(&self, n_times: usize, basis: Basis, dim: usize) -> crate::Result<Gauge> {
        let (q, p) = basis.operators(dim)?;
        let factors = self
            .factors
            .iter()
            .map(|(g, phase)| GaugeFactor {
                generator: match g {
                    Generator::Q => q.clone(),
                    Generator::P => p.clone(),
                },
                phase: phase.clone(),
            })
            .collect();
        Gauge::exponential_product(n_times, factors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_factors_and_polynomials() {
        let g = GaugeSpec::parse("q: t1 - 0.5*t2 ; p: -2*t1^2*t2 + 1.5e-1", 2).unwrap();
        assert_eq!(g.factors.len(), 2);
        assert_eq!(g.factors[0].0, Generator::Q);
        let t = [0.3, 0.8];
        assert!((g.factors[0].1.value(&t) - (0.3 - 0.4)).abs() < 1e-15);
        assert!((g.factors[1].1.value(&t) - (-2.0 * 0.09 * 0.8 + 0.15)).abs() < 1e-15);
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in [
            "", "x: t1", "q t1", "q: t3", "q: t1 +", "q: t1 t2", "q: 1.2.3",
        ] {
            let err = GaugeSpec::parse(bad, 2).unwrap_err();
            assert!(err.to_string().contains("column"), "{bad}: {err}");
        }
    }
}
