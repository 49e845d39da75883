#include "pibwb/parse.hpp"

#include <cctype>

namespace pibwb {

namespace {

struct Lexer {
  const std::string& s;
  size_t i = 0;

  explicit Lexer(const std::string& text) : s(text) {}

  void ws() {
    while (i < s.size()) {
      if (std::isspace((unsigned char)s[i])) {
        ++i;
      } else if (s[i] == '/' && i + 1 < s.size() && s[i + 1] == '/') {
        while (i < s.size() && s[i] != '\n') ++i;
      } else {
        break;
      }
    }
  }

  bool eof() {
    ws();
    return i >= s.size();
  }

  char peekc() {
    ws();
    return i < s.size() ? s[i] : '\0';
  }

  bool eat(char c) {
    ws();
    if (i < s.size() && s[i] == c) {
      ++i;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!eat(c)) throw ParseError(std::string("expected '") + c + "'", i);
  }

  static bool ident_start(char c) {
    return std::isalpha((unsigned char)c) || c == '_' || c == '\'';
  }
  static bool ident_cont(char c) {
    return std::isalnum((unsigned char)c) || c == '_' || c == '\'';
  }

  // identifiers may embed '!' when it glues two ident chunks (b!i, b!o).
  // Integer literals (optionally negative) are also names: encoded programs
  // transmit ground values as name tokens.
  std::string ident() {
    ws();
    if (i < s.size() && (std::isdigit((unsigned char)s[i]) ||
                         (s[i] == '-' && i + 1 < s.size() &&
                          std::isdigit((unsigned char)s[i + 1])))) {
      size_t start = i;
      if (s[i] == '-') ++i;
      while (i < s.size() && std::isdigit((unsigned char)s[i])) ++i;
      return s.substr(start, i - start);
    }
    if (i >= s.size() || !ident_start(s[i])) throw ParseError("expected name", i);
    size_t start = i;
    ++i;
    while (i < s.size()) {
      if (ident_cont(s[i])) {
        ++i;
      } else if (s[i] == '!' && i + 1 < s.size() && ident_cont(s[i + 1])) {
        i += 2;
      } else {
        break;
      }
    }
    return s.substr(start, i - start);
  }

  bool peek_ident(const std::string& kw) {
    ws();
    size_t save = i;
    if (i >= s.size() || !ident_start(s[i])) return false;
    std::string id = ident();
    i = save;
    return id == kw;
  }

  bool eat_ident(const std::string& kw) {
    if (!peek_ident(kw)) return false;
    ident();
    return true;
  }

  long long number() {
    ws();
    if (i >= s.size() || !std::isdigit((unsigned char)s[i])) throw ParseError("expected number", i);
    size_t start = i;
    while (i < s.size() && std::isdigit((unsigned char)s[i])) ++i;
    return std::stoll(s.substr(start, i - start));
  }
};

struct Parser {
  Lexer lx;
  bool polyadic;

  Parser(const std::string& text, bool poly) : lx(text), polyadic(poly) {}

  Capacity capacity() {
    if (lx.eat_ident("inf")) return Capacity::inf();
    size_t at = lx.i;
    long long n = lx.number();
    if (n <= 0) throw ParseError("buffer capacity must be positive", at);
    return Capacity::of(n);
  }

  Mark mark() {
    if (lx.eat('*')) return lx.eat('*') ? Mark::SimIfTrue : Mark::Sim;
    return Mark::None;
  }

  std::vector<Name> name_list(char close) {
    std::vector<Name> out;
    out.push_back(lx.ident());
    while (lx.eat(',')) out.push_back(lx.ident());
    lx.expect(close);
    if (!polyadic && out.size() != 1)
      throw ParseError("polyadic prefix outside polyadic mode", lx.i);
    return out;
  }

  // term := parE
  // parE := choiceE ("|" choiceE)*
  // choiceE := seqE ("+" seqE)*            (multi-branch operands must be prefixed)
  // seqE := prefix "." seqE | atom
  // atom := "0" | "!"seqE | "new" ... | "("parE")" | "["test"]" {..}{..} | F[...]
  TermPtr parE() {
    std::vector<TermPtr> parts{choiceE()};
    while (lx.eat('|')) parts.push_back(choiceE());
    return parts.size() == 1 ? parts[0] : par(std::move(parts));
  }

  TermPtr choiceE() {
    size_t at = lx.i;
    TermPtr first = seqE();
    if (lx.peekc() != '+') return first;
    std::vector<Branch> bs = branches_of(first, at);
    while (lx.eat('+')) {
      size_t at2 = lx.i;
      TermPtr next = seqE();
      auto more = branches_of(next, at2);
      bs.insert(bs.end(), more.begin(), more.end());
    }
    return choice(std::move(bs));
  }

  std::vector<Branch> branches_of(const TermPtr& t, size_t at) {
    auto* c = std::get_if<ChoiceT>(&t->v);
    if (!c || c->branches.empty())
      throw ParseError("choice operands must be prefixed", at);
    return c->branches;
  }

  TermPtr seqE() {
    lx.ws();
    // try a prefix: ident followed by '(' or '<', or the tau keyword
    size_t save = lx.i;
    if (lx.peek_ident("tau")) {
      lx.ident();
      Mark m = mark();
      lx.expect('.');
      return seq(Prefix{PrefixKind::Tau, "", {}, m}, seqE());
    }
    if (lx.i < lx.s.size() && Lexer::ident_start(lx.s[lx.i])) {
      std::string id = lx.ident();
      if (id != "new" && (id != "F" || !polyadic)) {
        if (lx.peekc() == '(') {
          lx.eat('(');
          auto names = name_list(')');
          Mark m = mark();
          lx.expect('.');
          return seq(Prefix{PrefixKind::Input, id, std::move(names), m}, seqE());
        }
        if (lx.peekc() == '<') {
          lx.eat('<');
          auto names = name_list('>');
          Mark m = mark();
          lx.expect('.');
          return seq(Prefix{PrefixKind::Output, id, std::move(names), m}, seqE());
        }
      }
      lx.i = save;
    }
    return atom();
  }

  TermPtr atom() {
    lx.ws();
    size_t at = lx.i;
    char c = lx.peekc();
    if (c == '0') {
      ++lx.i;
      return nil();
    }
    if (c == '!') {
      ++lx.i;
      return repl(seqE());
    }
    if (c == '(') {
      lx.eat('(');
      TermPtr t = parE();
      lx.expect(')');
      return t;
    }
    if (c == '[') {
      lx.eat('[');
      Name l = lx.ident();
      TestOp op;
      if (lx.eat('='))
        op = TestOp::Eq;
      else if (lx.eat('<'))
        op = TestOp::Lt;
      else
        throw ParseError("expected '=' or '<' in test", lx.i);
      Name r = lx.ident();
      lx.expect(']');
      lx.expect('{');
      TermPtr tb = parE();
      lx.expect('}');
      lx.expect('{');
      TermPtr eb = parE();
      lx.expect('}');
      return mk(TestT{op, l, r, tb, eb});
    }
    if (lx.peek_ident("new")) {
      lx.ident();
      Name n = lx.ident();
      if (lx.eat(':')) {
        Capacity cp = capacity();
        Mark m = mark();
        if (!lx.eat_ident("in")) throw ParseError("expected 'in'", lx.i);
        return nubuf(n, cp, parE(), m);
      }
      if (!lx.eat_ident("in")) throw ParseError("expected 'in'", lx.i);
      return nu(n, parE());
    }
    if (polyadic && lx.peek_ident("F")) {
      lx.ident();
      lx.expect('[');
      FAgentT f;
      f.cap = capacity();
      lx.expect(';');
      if (lx.peekc() == '(') {
        do {
          lx.expect('(');
          Name a = lx.ident();
          lx.expect(',');
          Name b = lx.ident();
          lx.expect(')');
          f.queue.emplace_back(a, b);
        } while (lx.eat(','));
      }
      lx.expect(';');
      f.in_name = lx.ident();
      lx.expect(',');
      f.out_name = lx.ident();
      lx.expect(']');
      return mk(std::move(f));
    }
    throw ParseError("expected a process term", at);
  }

  BufferStore store() {
    BufferStore b;
    lx.expect('{');
    if (lx.peekc() != '}') {
      do {
        Name key = lx.ident();
        lx.expect('-');
        lx.expect('>');
        lx.expect('(');
        Buffer buf;
        buf.cap = capacity();
        lx.expect(',');
        lx.expect('[');
        if (lx.peekc() != ']') {
          do {
            if (lx.eat('(')) {
              if (!lx.eat_ident("new")) throw ParseError("expected 'new'", lx.i);
              buf.queue.push_back({lx.ident(), true});
              lx.expect(')');
            } else {
              buf.queue.push_back({lx.ident(), false});
            }
          } while (lx.eat(','));
        }
        lx.expect(']');
        lx.expect(')');
        if (!buf.cap.infinite && (long long)buf.queue.size() > buf.cap.n)
          throw ParseError("buffer longer than its capacity", lx.i);
        if (b.count(key)) throw ParseError("duplicate buffer name " + key, lx.i);
        b.emplace(std::move(key), std::move(buf));
      } while (lx.eat(','));
    }
    lx.expect('}');
    return b;
  }
};

}  // namespace

TermPtr parse_term(const std::string& text, bool polyadic) {
  Parser p(text, polyadic);
  TermPtr t = p.parE();
  if (!p.lx.eof()) throw ParseError("trailing input", p.lx.i);
  return t;
}

BufferStore parse_store(const std::string& text) {
  Parser p(text, false);
  BufferStore b = p.store();
  if (!p.lx.eof()) throw ParseError("trailing input", p.lx.i);
  return b;
}

Config parse_config(const std::string& text, bool polyadic) {
  Parser p(text, polyadic);
  Config c;
  c.process = p.parE();
  if (p.lx.eat('@')) c.store = p.store();
  if (!p.lx.eof()) throw ParseError("trailing input", p.lx.i);
  return c;
}

}  // namespace pibwb
