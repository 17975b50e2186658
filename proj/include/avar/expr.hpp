#ifndef AVAR_EXPR_HPP
#define AVAR_EXPR_HPP

#include <memory>
#include <string>

namespace avar::expr {

// One-variable arithmetic expressions: numbers, x, + - * / ^, parentheses,
// exp(...) and log(...). Used by the diffusion model spec files.
class Expression {
 public:
  static Expression parse(const std::string& text);

  double operator()(double x) const;
  const std::string& text() const { return text_; }

  struct Node;

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace avar::expr

#endif
