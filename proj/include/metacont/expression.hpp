#pragma once

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "metacont/models.hpp"

namespace metacont {

/// Small arithmetic expression over the state variables x1..xn and the
/// parameter mu. Supported grammar: + - * / unary minus, ^ and pow(a, b),
/// exp(a), parentheses and numeric literals. This is enough for polynomial,
/// rational and logistic right-hand sides supplied through a config file.
class Expression {
 public:
  /// Parses `text` for a system with `dim_state` state variables.
  /// Malformed input raises std::invalid_argument with the offending position.
  [[nodiscard]] static Expression parse(const std::string& text, int dim_state);

  [[nodiscard]] double eval(const Eigen::VectorXd& x, double mu) const;

  /// True when any state variable appears; used to tell constant from
  /// state-dependent diffusion entries.
  [[nodiscard]] bool depends_on_state() const;

  [[nodiscard]] const std::string& text() const { return text_; }

  struct Node;

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
  int dim_state_ = 0;
};

/// Assembles an SdeSystem from expression strings. `drift` has dim_state
/// entries; `diffusion` is a dim_state x dim_noise grid; `jacobian` (optional)
/// is a dim_state x dim_state grid; `potential` (optional) marks a gradient
/// system. Entry counts are validated.
[[nodiscard]] SdeSystem make_expression_system(
    const std::string& name, int dim_state, int dim_noise,
    const std::vector<std::string>& drift,
    const std::vector<std::vector<std::string>>& diffusion,
    const std::optional<std::vector<std::vector<std::string>>>& jacobian = {},
    const std::optional<std::string>& potential = {});

}  // namespace metacont
