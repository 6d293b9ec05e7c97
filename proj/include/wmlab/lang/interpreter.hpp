#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wmlab/lang/program.hpp"

namespace wmlab::lang {

WMLAB_DEFINE_ERROR(ArityMismatch);

enum class RuntimeErrorKind { Overflow, DivisionByZero, Uninitialized, MissingReturn };

inline const char* to_string(RuntimeErrorKind k) {
  switch (k) {
    case RuntimeErrorKind::Overflow: return "overflow";
    case RuntimeErrorKind::DivisionByZero: return "division_by_zero";
    case RuntimeErrorKind::Uninitialized: return "uninitialized";
    case RuntimeErrorKind::MissingReturn: return "missing_return";
  }
  return "?";
}

struct EvalOutcome {
  enum Status { Ok, RuntimeError, StepLimitExceeded } status = Ok;
  std::int64_t value = 0;                          // Ok
  RuntimeErrorKind error = RuntimeErrorKind::Overflow;  // RuntimeError

  static EvalOutcome ok(std::int64_t v) { return {Ok, v, {}}; }
  static EvalOutcome runtime_error(RuntimeErrorKind k) { return {RuntimeError, 0, k}; }
  static EvalOutcome step_limit() { return {StepLimitExceeded, 0, {}}; }

  bool is_ok(std::int64_t expected) const noexcept { return status == Ok && value == expected; }
  friend bool operator==(const EvalOutcome&, const EvalOutcome&) = default;
};

inline constexpr std::int64_t kDefaultStepLimit = 100000;

// Dead snippet k performs sink = (sink * 31 + k + 1) mod 1000003 on a sink
// that no program token can name.
inline constexpr std::int64_t kSinkModulus = 1000003;

namespace detail {

class Evaluator {
 public:
  Evaluator(const Program& p, std::int64_t step_limit)
      : ast_(p.ast()), env_(p.variables().size()), limit_(step_limit) {}

  EvalOutcome run(std::span<const std::int64_t> inputs) {
    for (std::size_t i = 0; i < ast_.params.size(); ++i) env_[static_cast<std::size_t>(ast_.params[i])] = inputs[i];
    Flow f = exec_block(ast_.body);
    if (f == Flow::Returned) return EvalOutcome::ok(ret_);
    if (f == Flow::Failed) return failure_;
    return EvalOutcome::runtime_error(RuntimeErrorKind::MissingReturn);
  }

  std::int64_t sink() const noexcept { return sink_; }

 private:
  enum class Flow { Normal, Returned, Failed };

  bool tick() {
    if (++steps_ > limit_) {
      failure_ = EvalOutcome::step_limit();
      return false;
    }
    return true;
  }

  Flow fail(RuntimeErrorKind k) {
    failure_ = EvalOutcome::runtime_error(k);
    return Flow::Failed;
  }

  Flow exec_block(const std::vector<int>& body) {
    for (int s : body) {
      Flow f = exec(ast_.stmts[static_cast<std::size_t>(s)]);
      if (f != Flow::Normal) return f;
    }
    return Flow::Normal;
  }

  // Slot statements are free so that filling or emptying them can never
  // move a program across the step limit.
  Flow exec(const StmtNode& s) {
    if (s.kind != StmtNode::Comment && s.kind != StmtNode::Dead && !tick()) return Flow::Failed;
    switch (s.kind) {
      case StmtNode::Let:
      case StmtNode::Assign: {
        auto v = eval(s.expr);
        if (!v) return Flow::Failed;
        env_[static_cast<std::size_t>(s.var)] = *v;
        return Flow::Normal;
      }
      case StmtNode::Return: {
        auto v = eval(s.expr);
        if (!v) return Flow::Failed;
        ret_ = *v;
        return Flow::Returned;
      }
      case StmtNode::If: {
        auto c = eval(s.expr);
        if (!c) return Flow::Failed;
        if (*c != 0) return exec_block(s.body);
        if (s.has_else) return exec_block(s.else_body);
        return Flow::Normal;
      }
      case StmtNode::While: {
        for (;;) {
          auto c = eval(s.expr);
          if (!c) return Flow::Failed;
          if (*c == 0) return Flow::Normal;
          Flow f = exec_block(s.body);
          if (f != Flow::Normal) return f;
          if (!tick()) return Flow::Failed;
        }
      }
      case StmtNode::Comment:
        return Flow::Normal;
      case StmtNode::Dead:
        if (s.payload >= 0) sink_ = (sink_ * 31 + s.payload + 1) % kSinkModulus;
        return Flow::Normal;
    }
    return Flow::Normal;
  }

  std::optional<std::int64_t> eval(int idx) {
    const ExprNode& e = ast_.exprs[static_cast<std::size_t>(idx)];
    switch (e.kind) {
      case ExprNode::Literal:
        return e.value;
      case ExprNode::Var: {
        const auto& slot = env_[static_cast<std::size_t>(e.var)];
        if (!slot) {
          fail(RuntimeErrorKind::Uninitialized);
          return std::nullopt;
        }
        return *slot;
      }
      case ExprNode::Neg: {
        auto v = eval(e.lhs);
        if (!v) return std::nullopt;
        std::int64_t r;
        if (__builtin_sub_overflow(std::int64_t{0}, *v, &r)) {
          fail(RuntimeErrorKind::Overflow);
          return std::nullopt;
        }
        return r;
      }
      case ExprNode::Binary: {
        auto a = eval(e.lhs);
        if (!a) return std::nullopt;
        auto b = eval(e.rhs);
        if (!b) return std::nullopt;
        return binary(e.op, *a, *b);
      }
    }
    return std::nullopt;
  }

  std::optional<std::int64_t> binary(BinOp op, std::int64_t a, std::int64_t b) {
    std::int64_t r = 0;
    bool overflow = false;
    switch (op) {
      case BinOp::Add: overflow = __builtin_add_overflow(a, b, &r); break;
      case BinOp::Sub: overflow = __builtin_sub_overflow(a, b, &r); break;
      case BinOp::Mul: overflow = __builtin_mul_overflow(a, b, &r); break;
      case BinOp::Div:
      case BinOp::Mod:
        if (b == 0) {
          fail(RuntimeErrorKind::DivisionByZero);
          return std::nullopt;
        }
        if (a == INT64_MIN && b == -1) {
          overflow = true;
          break;
        }
        r = op == BinOp::Div ? a / b : a % b;
        break;
      case BinOp::Lt: r = a < b; break;
      case BinOp::Le: r = a <= b; break;
      case BinOp::Gt: r = a > b; break;
      case BinOp::Ge: r = a >= b; break;
      case BinOp::Eq: r = a == b; break;
      case BinOp::Ne: r = a != b; break;
    }
    if (overflow) {
      fail(RuntimeErrorKind::Overflow);
      return std::nullopt;
    }
    return r;
  }

  const FunctionAst& ast_;
  std::vector<std::optional<std::int64_t>> env_;
  std::int64_t limit_;
  std::int64_t steps_ = 0;
  std::int64_t ret_ = 0;
  std::int64_t sink_ = 0;
  EvalOutcome failure_;
};

}  // namespace detail

/// Runs the function on `inputs`. Every executed non-slot statement and
/// every loop back-edge costs one step.
inline EvalOutcome interpret(const Program& program, std::span<const std::int64_t> inputs,
                             std::int64_t step_limit = kDefaultStepLimit) {
  if (inputs.size() != program.param_count()) {
    throw ArityMismatch("expected " + std::to_string(program.param_count()) + " inputs, got " +
                        std::to_string(inputs.size()));
  }
  return detail::Evaluator(program, step_limit).run(inputs);
}

inline EvalOutcome interpret(const Program& program, std::initializer_list<std::int64_t> inputs,
                             std::int64_t step_limit = kDefaultStepLimit) {
  return interpret(program, std::span<const std::int64_t>(inputs.begin(), inputs.size()), step_limit);
}

}  // namespace wmlab::lang
