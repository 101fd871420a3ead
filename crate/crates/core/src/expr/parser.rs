use super::lexer::{tokenize, Spanned, Token};
use super::{BinaryOp, Constant, Function, Node, ParseError, ParseErrorKind};

/// Recursive-descent parser over the fixed grammar
///
/// ```text
/// expr   := term (('+' | '-') term)*
/// term   := unary (('*' | '/') unary)*
/// unary  := '-' unary | power
/// power  := atom ('^' unary)?
/// atom   := number | 't' | 'pi' | 'e' | func '(' args ')' | '(' expr ')'
/// ```
pub(crate) fn parse_node(text: &str) -> Result<Node, ParseError> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(ParseError {
            offset: 0,
            kind: ParseErrorKind::Syntax("empty expression".into()),
        });
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.len(),
    };
    let node = parser.expr()?;
    if let Some(tok) = parser.peek() {
        return Err(parser.syntax_at(tok.offset, format!("unexpected {}", tok.token.describe())));
    }
    Ok(node)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.tokens.get(self.pos)
    }

    fn peek_token(&self) -> Option<&Token> {
        self.peek().map(|s| &s.token)
    }

    fn next(&mut self) -> Option<Spanned> {
        let tok = self.tokens.get(self.pos).cloned();
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |s| s.offset)
    }

    fn syntax_at(&self, offset: usize, message: String) -> ParseError {
        ParseError {
            offset,
            kind: ParseErrorKind::Syntax(message),
        }
    }

    fn expect(&mut self, want: Token) -> Result<(), ParseError> {
        match self.next() {
            Some(s) if s.token == want => Ok(()),
            Some(s) => Err(self.syntax_at(
                s.offset,
                format!("expected {}, found {}", want.describe(), s.token.describe()),
            )),
            None => Err(self.syntax_at(
                self.end,
                format!("expected {}, found end of input", want.describe()),
            )),
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek_token() {
                Some(Token::Plus) => BinaryOp::Add,
                Some(Token::Minus) => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek_token() {
                Some(Token::Star) => BinaryOp::Mul,
                Some(Token::Slash) => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if let Some(Token::Minus) = self.peek_token() {
            self.pos += 1;
            let operand = self.unary()?;
            return Ok(Node::Neg(Box::new(operand)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if let Some(Token::Caret) = self.peek_token() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Node::Binary(
                BinaryOp::Pow,
                Box::new(base),
                Box::new(exponent),
            ));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let offset = self.offset();
        let Some(spanned) = self.next() else {
            return Err(self.syntax_at(offset, "expected operand, found end of input".into()));
        };
        match spanned.token {
            Token::Number(x) => Ok(Node::Number(x)),
            Token::LParen => {
                let inner = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(inner)
            }
            Token::Ident(name) => self.identifier(&name, offset),
            other => Err(self.syntax_at(
                offset,
                format!("expected operand, found {}", other.describe()),
            )),
        }
    }

    fn identifier(&mut self, name: &str, offset: usize) -> Result<Node, ParseError> {
        match name {
            "t" => return Ok(Node::Var),
            "pi" => return Ok(Node::Constant(Constant::Pi)),
            "e" => return Ok(Node::Constant(Constant::E)),
            _ => {}
        }
        let Some(func) = Function::from_name(name) else {
            return Err(ParseError {
                offset,
                kind: ParseErrorKind::UnknownIdentifier(name.to_string()),
            });
        };
        self.expect(Token::LParen)?;
        let mut args = vec![self.expr()?];
        while let Some(Token::Comma) = self.peek_token() {
            self.pos += 1;
            args.push(self.expr()?);
        }
        self.expect(Token::RParen)?;
        if args.len() != func.arity() {
            return Err(self.syntax_at(
                offset,
                format!(
                    "`{}` takes {} argument(s), got {}",
                    func.name(),
                    func.arity(),
                    args.len()
                ),
            ));
        }
        let mut args = args.into_iter();
        let first = Box::new(args.next().expect("arity checked"));
        Ok(match args.next() {
            Some(second) => Node::Call2(func, first, Box::new(second)),
            None => Node::Call(func, first),
        })
    }
}
