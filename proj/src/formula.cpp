#include "qmon/formula.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <utility>

namespace qmon {

struct Formula::Node {
  Op op;
  std::string name;
  std::vector<Formula> children;
  std::size_t hash;
  bool temporal;
};

namespace {

std::size_t mix(std::size_t seed, std::size_t value) {
  return seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

bool is_temporal_op(Op op) {
  return op == Op::Next || op == Op::Until || op == Op::Release || op == Op::Eventually ||
         op == Op::Always;
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::True: return "true";
    case Op::False: return "false";
    case Op::Atom: return "atom";
    case Op::Not: return "!";
    case Op::And: return "&";
    case Op::Or: return "|";
    case Op::Next: return "X";
    case Op::Until: return "U";
    case Op::Release: return "R";
    case Op::Eventually: return "F";
    case Op::Always: return "G";
  }
  return "?";
}

Formula Formula::make(Op op, std::string name, std::vector<Formula> children) {
  std::size_t h = std::hash<int>{}(static_cast<int>(op));
  if (op == Op::Atom) h = mix(h, std::hash<std::string>{}(name));
  bool temporal = is_temporal_op(op);
  for (const auto& c : children) {
    h = mix(h, c.hash());
    temporal = temporal || c.is_temporal();
  }
  auto node = std::make_shared<const Node>(
      Node{op, std::move(name), std::move(children), h, temporal});
  return Formula(std::move(node));
}

Formula Formula::top() {
  static const Formula f = make(Op::True, {}, {});
  return f;
}
Formula Formula::bottom() {
  static const Formula f = make(Op::False, {}, {});
  return f;
}
Formula Formula::atom(std::string name) {
  if (name.empty()) throw std::invalid_argument("atom name must be nonempty");
  return make(Op::Atom, std::move(name), {});
}
Formula Formula::negation(Formula f) { return make(Op::Not, {}, {std::move(f)}); }
Formula Formula::conj(Formula lhs, Formula rhs) {
  return make(Op::And, {}, {std::move(lhs), std::move(rhs)});
}
Formula Formula::disj(Formula lhs, Formula rhs) {
  return make(Op::Or, {}, {std::move(lhs), std::move(rhs)});
}
Formula Formula::next(Formula f) { return make(Op::Next, {}, {std::move(f)}); }
Formula Formula::until(Formula lhs, Formula rhs) {
  return make(Op::Until, {}, {std::move(lhs), std::move(rhs)});
}
Formula Formula::release(Formula lhs, Formula rhs) {
  return make(Op::Release, {}, {std::move(lhs), std::move(rhs)});
}
Formula Formula::eventually(Formula f) { return make(Op::Eventually, {}, {std::move(f)}); }
Formula Formula::always(Formula f) { return make(Op::Always, {}, {std::move(f)}); }

Op Formula::op() const { return node_->op; }
const std::string& Formula::name() const { return node_->name; }
std::size_t Formula::arity() const { return node_->children.size(); }
const Formula& Formula::child(std::size_t i) const { return node_->children.at(i); }
std::size_t Formula::hash() const { return node_->hash; }
bool Formula::is_temporal() const { return node_->temporal; }

bool operator==(const Formula& a, const Formula& b) {
  if (a.node_ == b.node_) return true;
  if (a.node_->hash != b.node_->hash || a.node_->op != b.node_->op ||
      a.node_->name != b.node_->name || a.node_->children.size() != b.node_->children.size())
    return false;
  for (std::size_t i = 0; i < a.node_->children.size(); ++i)
    if (a.node_->children[i] != b.node_->children[i]) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

std::string describe(const std::vector<std::string>& expected) {
  std::string out;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i) out += ", ";
    out += expected[i];
  }
  return out;
}

}  // namespace

ParseError::ParseError(std::size_t column, std::vector<std::string> expected,
                       const std::string& message)
    : std::runtime_error("column " + std::to_string(column) + ": " + message +
                         (expected.empty() ? "" : " (expected " + describe(expected) + ")")),
      column_(column),
      expected_(std::move(expected)) {}

namespace {

enum class Tok {
  End,
  LParen,
  RParen,
  True,
  False,
  Ident,
  Not,
  And,
  Or,
  Implies,
  Iff,
  Next,
  Until,
  Release,
  Eventually,
  Always,
};

struct Token {
  Tok kind;
  std::string text;
  std::size_t column;
};

const std::vector<std::string> kOperandStart = {"(", "!", "F", "G", "X", "false", "identifier",
                                                "true"};
const std::vector<std::string> kAfterOperand = {"&", "|", "->", "<->", "U", "R", ")",
                                                "end of input"};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      const std::size_t col = column_;
      if (pos_ >= text_.size()) {
        out.push_back({Tok::End, "", col});
        return out;
      }
      const char c = text_[pos_];
      if (c == '(') { advance(1); out.push_back({Tok::LParen, "(", col}); continue; }
      if (c == ')') { advance(1); out.push_back({Tok::RParen, ")", col}); continue; }
      if (c == '!') { advance(1); out.push_back({Tok::Not, "!", col}); continue; }
      if (c == '&') { advance(1); out.push_back({Tok::And, "&", col}); continue; }
      if (c == '|') { advance(1); out.push_back({Tok::Or, "|", col}); continue; }
      if (c == '-') {
        if (starts_with("->")) { advance(2); out.push_back({Tok::Implies, "->", col}); continue; }
        throw ParseError(col, {}, "unknown operator '-'");
      }
      if (c == '<') {
        if (starts_with("<->")) { advance(3); out.push_back({Tok::Iff, "<->", col}); continue; }
        throw ParseError(col, {}, "unknown operator '<'");
      }
      if (starts_with("¬")) { advance_bytes(2); out.push_back({Tok::Not, "!", col}); continue; }
      if (starts_with("∧")) { advance_bytes(3); out.push_back({Tok::And, "&", col}); continue; }
      if (starts_with("∨")) { advance_bytes(3); out.push_back({Tok::Or, "|", col}); continue; }
      if (starts_with("→")) { advance_bytes(3); out.push_back({Tok::Implies, "->", col}); continue; }
      if (starts_with("↔")) { advance_bytes(3); out.push_back({Tok::Iff, "<->", col}); continue; }
      if (c >= 'A' && c <= 'Z') {
        Tok kind;
        switch (c) {
          case 'X': kind = Tok::Next; break;
          case 'U': kind = Tok::Until; break;
          case 'R': kind = Tok::Release; break;
          case 'F': kind = Tok::Eventually; break;
          case 'G': kind = Tok::Always; break;
          default: throw ParseError(col, {}, std::string("unknown operator '") + c + "'");
        }
        advance(1);
        out.push_back({kind, std::string(1, c), col});
        continue;
      }
      if ((c >= 'a' && c <= 'z') || c == '_') {
        std::size_t end = pos_;
        while (end < text_.size() &&
               ((text_[end] >= 'a' && text_[end] <= 'z') || (text_[end] >= '0' && text_[end] <= '9') ||
                text_[end] == '_'))
          ++end;
        std::string word(text_.substr(pos_, end - pos_));
        advance(end - pos_);
        if (word == "true") out.push_back({Tok::True, word, col});
        else if (word == "false") out.push_back({Tok::False, word, col});
        else out.push_back({Tok::Ident, word, col});
        continue;
      }
      if (static_cast<unsigned char>(c) >= 0x80) {
        throw ParseError(col, {}, "unknown operator (non-ASCII character)");
      }
      throw ParseError(col, {}, std::string("unknown operator '") + c + "'");
    }
  }

 private:
  bool starts_with(std::string_view s) const { return text_.substr(pos_).starts_with(s); }
  void advance(std::size_t n) { pos_ += n; column_ += n; }
  // A multi-byte code point counts as one column.
  void advance_bytes(std::size_t n) { pos_ += n; column_ += 1; }
  void skip_space() {
    while (pos_ < text_.size() &&
           (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' || text_[pos_] == '\r'))
      advance(1);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t column_ = 1;
};

class Parser {
 public:
  Parser(std::vector<Token> tokens, const std::set<std::string>* atoms)
      : tokens_(std::move(tokens)), atoms_(atoms) {}

  Formula run() {
    Formula f = iff();
    if (peek().kind != Tok::End) {
      if (peek().kind == Tok::RParen)
        throw ParseError(peek().column, kAfterOperand, "unbalanced ')'");
      throw ParseError(peek().column, kAfterOperand, "unexpected '" + peek().text + "'");
    }
    return f;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  Token take() { return tokens_[pos_++]; }

  Formula iff() {
    Formula lhs = implies();
    if (peek().kind == Tok::Iff) {
      take();
      Formula rhs = iff();
      // (l -> r) & (r -> l)
      return Formula::conj(Formula::disj(Formula::negation(lhs), rhs),
                           Formula::disj(Formula::negation(rhs), lhs));
    }
    return lhs;
  }

  Formula implies() {
    Formula lhs = disjunction();
    if (peek().kind == Tok::Implies) {
      take();
      Formula rhs = implies();
      return Formula::disj(Formula::negation(lhs), rhs);
    }
    return lhs;
  }

  Formula disjunction() {
    Formula f = conjunction();
    while (peek().kind == Tok::Or) {
      take();
      f = Formula::disj(f, conjunction());
    }
    return f;
  }

  Formula conjunction() {
    Formula f = binary_temporal();
    while (peek().kind == Tok::And) {
      take();
      f = Formula::conj(f, binary_temporal());
    }
    return f;
  }

  Formula binary_temporal() {
    Formula lhs = unary();
    if (peek().kind == Tok::Until) {
      take();
      return Formula::until(lhs, binary_temporal());
    }
    if (peek().kind == Tok::Release) {
      take();
      return Formula::release(lhs, binary_temporal());
    }
    return lhs;
  }

  Formula unary() {
    switch (peek().kind) {
      case Tok::Not: take(); return Formula::negation(unary());
      case Tok::Next: take(); return Formula::next(unary());
      case Tok::Eventually: take(); return Formula::eventually(unary());
      case Tok::Always: take(); return Formula::always(unary());
      default: return primary();
    }
  }

  Formula primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::True: take(); return Formula::top();
      case Tok::False: take(); return Formula::bottom();
      case Tok::Ident: {
        if (atoms_ && !atoms_->count(t.text))
          throw ParseError(t.column, {}, "unknown atom '" + t.text + "'");
        take();
        return Formula::atom(t.text);
      }
      case Tok::LParen: {
        take();
        Formula f = iff();
        if (peek().kind != Tok::RParen)
          throw ParseError(peek().column, kAfterOperand, "missing ')'");
        take();
        return f;
      }
      case Tok::End:
        throw ParseError(t.column, kOperandStart, "unexpected end of input");
      default:
        throw ParseError(t.column, kOperandStart, "unexpected '" + t.text + "'");
    }
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  const std::set<std::string>* atoms_;
};

}  // namespace

Formula parse(std::string_view text, const std::set<std::string>* atoms) {
  return Parser(Lexer(text).run(), atoms).run();
}

Formula parse(std::string_view text, const std::set<std::string>& atoms) {
  return parse(text, &atoms);
}

// ---------------------------------------------------------------------------
// Printing

namespace {

int precedence(Op op) {
  switch (op) {
    case Op::Or: return 1;
    case Op::And: return 2;
    case Op::Until:
    case Op::Release: return 3;
    case Op::Not:
    case Op::Next:
    case Op::Eventually:
    case Op::Always: return 4;
    default: return 5;
  }
}

void print(const Formula& f, std::ostream& os);

void print_child(const Formula& child, bool parens, std::ostream& os) {
  if (parens) os << '(';
  print(child, os);
  if (parens) os << ')';
}

void print(const Formula& f, std::ostream& os) {
  const int p = precedence(f.op());
  switch (f.op()) {
    case Op::True: os << "true"; return;
    case Op::False: os << "false"; return;
    case Op::Atom: os << f.name(); return;
    case Op::Not:
      os << '!';
      print_child(f.child(0), precedence(f.child(0).op()) < p, os);
      return;
    case Op::Next:
    case Op::Eventually:
    case Op::Always:
      os << op_name(f.op()) << ' ';
      print_child(f.child(0), precedence(f.child(0).op()) < p, os);
      return;
    case Op::And:
    case Op::Or: {
      // left associative
      const int lp = precedence(f.lhs().op());
      const int rp = precedence(f.rhs().op());
      print_child(f.lhs(), lp < p, os);
      os << ' ' << op_name(f.op()) << ' ';
      print_child(f.rhs(), rp <= p, os);
      return;
    }
    case Op::Until:
    case Op::Release: {
      // right associative
      const int lp = precedence(f.lhs().op());
      const int rp = precedence(f.rhs().op());
      print_child(f.lhs(), lp <= p, os);
      os << ' ' << op_name(f.op()) << ' ';
      print_child(f.rhs(), rp < p, os);
      return;
    }
  }
}

}  // namespace

std::string to_string(const Formula& f) {
  std::ostringstream os;
  print(f, os);
  return os.str();
}

// ---------------------------------------------------------------------------
// Normal forms and measures

namespace {

Formula nnf(const Formula& f, bool negated) {
  switch (f.op()) {
    case Op::True: return negated ? Formula::bottom() : f;
    case Op::False: return negated ? Formula::top() : f;
    case Op::Atom: return negated ? Formula::negation(f) : f;
    case Op::Not: return nnf(f.child(0), !negated);
    case Op::And:
      return negated ? Formula::disj(nnf(f.lhs(), true), nnf(f.rhs(), true))
                     : Formula::conj(nnf(f.lhs(), false), nnf(f.rhs(), false));
    case Op::Or:
      return negated ? Formula::conj(nnf(f.lhs(), true), nnf(f.rhs(), true))
                     : Formula::disj(nnf(f.lhs(), false), nnf(f.rhs(), false));
    case Op::Next: {
      Formula inner = Formula::next(nnf(f.child(0), false));
      return negated ? Formula::negation(inner) : inner;
    }
    case Op::Until:
      return negated ? Formula::release(nnf(f.lhs(), true), nnf(f.rhs(), true))
                     : Formula::until(nnf(f.lhs(), false), nnf(f.rhs(), false));
    case Op::Release:
      return negated ? Formula::until(nnf(f.lhs(), true), nnf(f.rhs(), true))
                     : Formula::release(nnf(f.lhs(), false), nnf(f.rhs(), false));
    case Op::Eventually:
      return negated ? Formula::always(nnf(f.child(0), true))
                     : Formula::eventually(nnf(f.child(0), false));
    case Op::Always:
      return negated ? Formula::eventually(nnf(f.child(0), true))
                     : Formula::always(nnf(f.child(0), false));
  }
  return f;
}

bool safe_nnf(const Formula& f) {
  switch (f.op()) {
    case Op::True:
    case Op::False:
    case Op::Atom: return true;
    case Op::Not: return f.child(0).op() == Op::Atom;  // !X g is outside the fragment
    case Op::And:
    case Op::Or:
    case Op::Release: return safe_nnf(f.lhs()) && safe_nnf(f.rhs());
    case Op::Next:
    case Op::Always: return safe_nnf(f.child(0));
    case Op::Until:
    case Op::Eventually: return false;
  }
  return false;
}

void collect_atoms(const Formula& f, std::set<std::string>& out) {
  if (f.op() == Op::Atom) {
    out.insert(f.name());
    return;
  }
  for (std::size_t i = 0; i < f.arity(); ++i) collect_atoms(f.child(i), out);
}

}  // namespace

Formula to_nnf(const Formula& f) { return nnf(f, false); }

bool is_safe(const Formula& f) { return safe_nnf(to_nnf(f)); }

std::size_t size(const Formula& f) {
  std::size_t n = 1;
  for (std::size_t i = 0; i < f.arity(); ++i) n += size(f.child(i));
  return n;
}

std::size_t depth(const Formula& f) {
  std::size_t d = 0;
  for (std::size_t i = 0; i < f.arity(); ++i) d = std::max(d, depth(f.child(i)));
  return d + 1;
}

std::set<std::string> atoms(const Formula& f) {
  std::set<std::string> out;
  collect_atoms(f, out);
  return out;
}

}  // namespace qmon
