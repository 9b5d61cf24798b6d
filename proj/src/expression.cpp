#include "metacont/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace metacont {

struct Expression::Node {
  enum class Kind { Constant, State, Mu, Add, Sub, Mul, Div, Neg, Pow, Exp };
  Kind kind = Kind::Constant;
  double value = 0.0;
  /// 0-based state index for Kind::State.
  int var = 0;
  std::shared_ptr<const Node> a, b;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make_node(Node::Kind kind, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

class Parser {
 public:
  Parser(const std::string& text, int dim_state) : text_(text), dim_(dim_state) {}

  NodePtr run() {
    NodePtr root = parse_sum();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream msg;
    msg << "expression parse error at position " << pos_ << " in '" << text_
        << "': " << what;
    throw std::invalid_argument(msg.str());
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_space();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  NodePtr parse_sum() {
    NodePtr left = parse_product();
    while (true) {
      if (accept('+')) {
        left = make_node(Node::Kind::Add, left, parse_product());
      } else if (accept('-')) {
        left = make_node(Node::Kind::Sub, left, parse_product());
      } else {
        return left;
      }
    }
  }

  NodePtr parse_product() {
    NodePtr left = parse_unary();
    while (true) {
      if (accept('*')) {
        left = make_node(Node::Kind::Mul, left, parse_unary());
      } else if (accept('/')) {
        left = make_node(Node::Kind::Div, left, parse_unary());
      } else {
        return left;
      }
    }
  }

  // Unary minus binds looser than '^', so -a^b reads -(a^b).
  NodePtr parse_unary() {
    if (accept('-')) return make_node(Node::Kind::Neg, parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (accept('^')) {
      // Right associative, and the exponent may carry its own sign:
      // a^b^c = a^(b^c), a^-b = a^(-b).
      return make_node(Node::Kind::Pow, base, parse_unary());
    }
    return base;
  }

  NodePtr parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("expected a value");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr inner = parse_sum();
      if (!accept(')')) fail("missing ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail(std::string("unexpected character '") + c + "'");
  }

  NodePtr parse_number() {
    const char* begin = text_.c_str() + pos_;
    char* end = nullptr;
    const double value = std::strtod(begin, &end);
    if (end == begin) fail("malformed number");
    pos_ += static_cast<std::size_t>(end - begin);
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Constant;
    n->value = value;
    return n;
  }

  NodePtr parse_identifier() {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string name = text_.substr(start, pos_ - start);
    if (name == "mu") return make_node(Node::Kind::Mu);
    if (name == "exp") {
      if (!accept('(')) fail("exp requires parentheses");
      NodePtr arg = parse_sum();
      if (!accept(')')) fail("missing ')' after exp argument");
      return make_node(Node::Kind::Exp, arg);
    }
    if (name == "pow") {
      if (!accept('(')) fail("pow requires parentheses");
      NodePtr base = parse_sum();
      if (!accept(',')) fail("pow requires two arguments");
      NodePtr exponent = parse_sum();
      if (!accept(')')) fail("missing ')' after pow arguments");
      return make_node(Node::Kind::Pow, base, exponent);
    }
    if (name.size() >= 2 && name[0] == 'x') {
      char* end = nullptr;
      const long index = std::strtol(name.c_str() + 1, &end, 10);
      if (*end == '\0' && index >= 1 && index <= dim_) {
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::State;
        n->var = static_cast<int>(index - 1);
        return n;
      }
      if (*end == '\0') {
        pos_ = start;
        fail("state variable '" + name + "' out of range for dimension " +
             std::to_string(dim_));
      }
    }
    pos_ = start;
    fail("unknown identifier '" + name + "'");
  }

  const std::string& text_;
  int dim_ = 0;
  std::size_t pos_ = 0;
};

double eval_node(const Node& n, const Eigen::VectorXd& x, double mu) {
  switch (n.kind) {
    case Node::Kind::Constant: return n.value;
    case Node::Kind::State: return x[n.var];
    case Node::Kind::Mu: return mu;
    case Node::Kind::Add: return eval_node(*n.a, x, mu) + eval_node(*n.b, x, mu);
    case Node::Kind::Sub: return eval_node(*n.a, x, mu) - eval_node(*n.b, x, mu);
    case Node::Kind::Mul: return eval_node(*n.a, x, mu) * eval_node(*n.b, x, mu);
    case Node::Kind::Div: return eval_node(*n.a, x, mu) / eval_node(*n.b, x, mu);
    case Node::Kind::Neg: return -eval_node(*n.a, x, mu);
    case Node::Kind::Pow:
      return std::pow(eval_node(*n.a, x, mu), eval_node(*n.b, x, mu));
    case Node::Kind::Exp: return std::exp(eval_node(*n.a, x, mu));
  }
  return 0.0;
}

bool mentions_state(const Node& n) {
  if (n.kind == Node::Kind::State) return true;
  if (n.a && mentions_state(*n.a)) return true;
  if (n.b && mentions_state(*n.b)) return true;
  return false;
}

}  // namespace

Expression Expression::parse(const std::string& text, int dim_state) {
  if (dim_state < 1) {
    throw std::invalid_argument("Expression::parse: dim_state must be positive");
  }
  Expression e;
  e.root_ = Parser(text, dim_state).run();
  e.text_ = text;
  e.dim_state_ = dim_state;
  return e;
}

bool Expression::depends_on_state() const {
  return root_ && mentions_state(*root_);
}

double Expression::eval(const Eigen::VectorXd& x, double mu) const {
  if (!root_) throw std::logic_error("Expression::eval: empty expression");
  if (static_cast<int>(x.size()) != dim_state_) {
    throw std::invalid_argument("Expression::eval: state dimension mismatch");
  }
  return eval_node(*root_, x, mu);
}

SdeSystem make_expression_system(const std::string& name, int dim_state, int dim_noise,
                                 const std::vector<std::string>& drift,
                                 const std::vector<std::vector<std::string>>& diffusion,
                                 const std::optional<std::vector<std::vector<std::string>>>& jacobian,
                                 const std::optional<std::string>& potential) {
  if (dim_state < 1 || dim_noise < 1) {
    throw std::invalid_argument("make_expression_system: dimensions must be positive");
  }
  if (static_cast<int>(drift.size()) != dim_state) {
    throw std::invalid_argument("make_expression_system: drift needs one expression per state");
  }
  if (static_cast<int>(diffusion.size()) != dim_state) {
    throw std::invalid_argument("make_expression_system: diffusion needs dim_state rows");
  }
  for (const auto& row : diffusion) {
    if (static_cast<int>(row.size()) != dim_noise) {
      throw std::invalid_argument("make_expression_system: diffusion needs dim_noise columns");
    }
  }

  std::vector<Expression> f;
  f.reserve(drift.size());
  for (const auto& text : drift) f.push_back(Expression::parse(text, dim_state));

  std::vector<std::vector<Expression>> g(diffusion.size());
  for (std::size_t i = 0; i < diffusion.size(); ++i) {
    for (const auto& text : diffusion[i]) {
      g[i].push_back(Expression::parse(text, dim_state));
    }
  }

  SdeSystem s;
  s.dim_state = dim_state;
  s.dim_noise = dim_noise;
  s.name = name;
  s.drift = [f, dim_state](const Eigen::VectorXd& x, double mu) {
    Eigen::VectorXd out(dim_state);
    for (int i = 0; i < dim_state; ++i) out[i] = f[static_cast<std::size_t>(i)].eval(x, mu);
    return out;
  };
  s.diffusion = [g, dim_state, dim_noise](const Eigen::VectorXd& x, double mu) {
    Eigen::MatrixXd out(dim_state, dim_noise);
    for (int i = 0; i < dim_state; ++i) {
      for (int j = 0; j < dim_noise; ++j) {
        out(i, j) = g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].eval(x, mu);
      }
    }
    return out;
  };
  if (jacobian) {
    if (static_cast<int>(jacobian->size()) != dim_state) {
      throw std::invalid_argument("make_expression_system: jacobian needs dim_state rows");
    }
    std::vector<std::vector<Expression>> jg(jacobian->size());
    for (std::size_t i = 0; i < jacobian->size(); ++i) {
      if (static_cast<int>((*jacobian)[i].size()) != dim_state) {
        throw std::invalid_argument("make_expression_system: jacobian must be square");
      }
      for (const auto& text : (*jacobian)[i]) {
        jg[i].push_back(Expression::parse(text, dim_state));
      }
    }
    s.jacobian = [jg, dim_state](const Eigen::VectorXd& x, double mu) {
      Eigen::MatrixXd out(dim_state, dim_state);
      for (int i = 0; i < dim_state; ++i) {
        for (int j = 0; j < dim_state; ++j) {
          out(i, j) = jg[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].eval(x, mu);
        }
      }
      return out;
    };
  }
  if (potential) {
    Expression u = Expression::parse(*potential, dim_state);
    s.potential = [u](const Eigen::VectorXd& x, double mu) { return u.eval(x, mu); };
  }
  return s;
}

}  // namespace metacont
