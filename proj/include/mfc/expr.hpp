#pragma once

#include <map>
#include <memory>
#include <string>

namespace mfc {

/// Compiled scalar expression over named variables.  Supports the usual
/// arithmetic (+ - * / ^, unary minus), parentheses, numeric literals,
/// `pi`, and the one/two argument functions sin cos tan tanh exp log
/// sqrt abs pow min max.
class Expr {
 public:
  static Expr parse(const std::string& text);
  double eval(const std::map<std::string, double>& vars) const;
  const std::string& text() const { return text_; }

  struct Node;
  Expr() = default;

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace mfc
