#include "mfc/expr.hpp"

#include <cctype>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace mfc {

struct Expr::Node {
  enum class Kind { Number, Variable, Unary, Binary, Call } kind;
  double value = 0.0;
  std::string name;
  char op = 0;
  std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

struct Parser {
  const std::string& s;
  std::size_t pos = 0;

  explicit Parser(const std::string& text) : s(text) {}

  void skip() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }

  bool eat(char c) {
    skip();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("expression error at offset " + std::to_string(pos) + ": " + what);
  }

  NodePtr make(Expr::Node n) { return std::make_shared<Expr::Node>(std::move(n)); }

  // sum := product (('+'|'-') product)*
  NodePtr parse_sum() {
    NodePtr left = parse_product();
    while (true) {
      skip();
      if (pos >= s.size() || (s[pos] != '+' && s[pos] != '-')) return left;
      const char op = s[pos++];
      NodePtr right = parse_product();
      left = make({Expr::Node::Kind::Binary, 0.0, "", op, left, right});
    }
  }

  NodePtr parse_product() {
    NodePtr left = parse_power();
    while (true) {
      skip();
      if (pos >= s.size() || (s[pos] != '*' && s[pos] != '/')) return left;
      const char op = s[pos++];
      NodePtr right = parse_power();
      left = make({Expr::Node::Kind::Binary, 0.0, "", op, left, right});
    }
  }

  // right-associative power
  NodePtr parse_power() {
    NodePtr base = parse_unary();
    skip();
    if (pos < s.size() && s[pos] == '^') {
      ++pos;
      NodePtr exp = parse_power();
      return make({Expr::Node::Kind::Binary, 0.0, "", '^', base, exp});
    }
    return base;
  }

  NodePtr parse_unary() {
    skip();
    if (pos < s.size() && s[pos] == '-') {
      ++pos;
      NodePtr inner = parse_unary();
      return make({Expr::Node::Kind::Unary, 0.0, "", '-', inner, nullptr});
    }
    if (pos < s.size() && s[pos] == '+') {
      ++pos;
      return parse_unary();
    }
    return parse_atom();
  }

  NodePtr parse_atom() {
    skip();
    if (pos >= s.size()) fail("unexpected end of input");
    const char c = s[pos];
    if (c == '(') {
      ++pos;
      NodePtr inner = parse_sum();
      if (!eat(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t end = 0;
      double v;
      try {
        v = std::stod(s.substr(pos), &end);
      } catch (const std::exception&) {
        fail("bad number");
      }
      pos += end;
      return make({Expr::Node::Kind::Number, v, "", 0, nullptr, nullptr});
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos;
      while (pos < s.size() &&
             (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
        ++pos;
      std::string name = s.substr(start, pos - start);
      skip();
      if (pos < s.size() && s[pos] == '(') {
        ++pos;
        NodePtr a = parse_sum();
        NodePtr b;
        if (eat(',')) b = parse_sum();
        if (!eat(')')) fail("expected ')' after call arguments");
        return make({Expr::Node::Kind::Call, 0.0, std::move(name), 0, a, b});
      }
      if (name == "pi")
        return make({Expr::Node::Kind::Number, 3.14159265358979323846, "", 0, nullptr, nullptr});
      return make({Expr::Node::Kind::Variable, 0.0, std::move(name), 0, nullptr, nullptr});
    }
    fail(std::string("unexpected character '") + c + "'");
  }
};

double eval_node(const Expr::Node& n, const std::map<std::string, double>& vars) {
  switch (n.kind) {
    case Expr::Node::Kind::Number:
      return n.value;
    case Expr::Node::Kind::Variable: {
      auto it = vars.find(n.name);
      if (it == vars.end()) throw std::invalid_argument("unknown variable: " + n.name);
      return it->second;
    }
    case Expr::Node::Kind::Unary:
      return -eval_node(*n.a, vars);
    case Expr::Node::Kind::Binary: {
      const double a = eval_node(*n.a, vars);
      const double b = eval_node(*n.b, vars);
      switch (n.op) {
        case '+': return a + b;
        case '-': return a - b;
        case '*': return a * b;
        case '/': return a / b;
        case '^': return std::pow(a, b);
      }
      throw std::logic_error("bad operator");
    }
    case Expr::Node::Kind::Call: {
      const double a = eval_node(*n.a, vars);
      if (n.b) {
        const double b = eval_node(*n.b, vars);
        if (n.name == "pow") return std::pow(a, b);
        if (n.name == "min") return std::min(a, b);
        if (n.name == "max") return std::max(a, b);
        throw std::invalid_argument("unknown two-argument function: " + n.name);
      }
      if (n.name == "sin") return std::sin(a);
      if (n.name == "cos") return std::cos(a);
      if (n.name == "tan") return std::tan(a);
      if (n.name == "tanh") return std::tanh(a);
      if (n.name == "exp") return std::exp(a);
      if (n.name == "log") return std::log(a);
      if (n.name == "sqrt") return std::sqrt(a);
      if (n.name == "abs") return std::abs(a);
      throw std::invalid_argument("unknown function: " + n.name);
    }
  }
  throw std::logic_error("bad node");
}

}  // namespace

Expr Expr::parse(const std::string& text) {
  Parser p(text);
  Expr e;
  e.root_ = p.parse_sum();
  p.skip();
  if (p.pos != text.size()) p.fail("trailing input");
  e.text_ = text;
  return e;
}

double Expr::eval(const std::map<std::string, double>& vars) const {
  if (!root_) throw std::logic_error("empty expression");
  return eval_node(*root_, vars);
}

}  // namespace mfc
