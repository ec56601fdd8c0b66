#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "labrig/backends.hpp"
#include "labrig/constraints.hpp"
#include "labrig/plan.hpp"
#include "labrig/symbolic.hpp"
#include "labrig/tasks.hpp"

namespace labrig {

struct CorrectionStalled : std::runtime_error {
  explicit CorrectionStalled(size_t n)
      : std::runtime_error("correction stalled: the same " + std::to_string(n) +
                           " violation(s) survived two passes") {}
};

struct ReasonerConfig {
  int max_phi_iters = 5;
  std::shared_ptr<Backend> backend;
  std::vector<Constraint> constraint_pack = default_constraint_pack();
};

// ---- prompt construction (stable text: replay fixtures key on it) ----

inline constexpr const char* kPlannerSystemPrompt =
    "You are a laboratory task planner. Think through the goal, the required "
    "objects and conditions, the decomposition into subtasks, and the "
    "validity of every step. Answer each request with exactly what it asks "
    "for and nothing else.";

inline CompletionRequest interpret_request(const Goal& goal) {
  CompletionRequest req;
  req.system = kPlannerSystemPrompt;
  req.tag = "reasoner.interpret";
  req.user = "Goal: " + goal.text() + "\nState the core objective in one sentence.";
  return req;
}

inline CompletionRequest prerequisites_request(const std::string& objective) {
  CompletionRequest req;
  req.system = kPlannerSystemPrompt;
  req.tag = "reasoner.prerequisites";
  req.user = "Objective: " + objective +
             "\nList the required objects and conditions as a JSON object with "
             "keys \"objects\" and \"conditions\".";
  return req;
}

inline CompletionRequest decompose_request(const std::string& objective,
                                           const PrerequisiteSet& prereqs) {
  CompletionRequest req;
  req.system = kPlannerSystemPrompt;
  req.tag = "reasoner.decompose";
  req.user = "Objective: " + objective +
             "\nPrerequisites: " + prerequisites_to_json(prereqs).dump() +
             "\nWrite the plan as a numbered list, one subtask per line. Allowed "
             "verbs: pick up, place, move, pour, stir, add, wait, weigh, shake.";
  return req;
}

inline CompletionRequest correct_request(const Plan& plan,
                                         const std::vector<Violation>& violations) {
  CompletionRequest req;
  req.system = kPlannerSystemPrompt;
  req.tag = "reasoner.correct";
  req.user = "Objective: " + plan.core_objective +
             "\nViolations: " + violations_to_json(violations).dump() + "\nPlan:\n" +
             render_plan(plan) + "\nRewrite the numbered plan resolving every violation.";
  return req;
}

// ---- chain-of-thought stages ----

inline std::string interpret(const Goal& goal, Backend& backend) {
  if (trim(goal.text()).empty()) throw std::invalid_argument("goal text is empty");
  return trim(backend.complete(interpret_request(goal)));
}

inline PrerequisiteSet derive_prerequisites(const std::string& objective, Backend& backend) {
  std::string response = backend.complete(prerequisites_request(objective));
  try {
    return prerequisites_from_json(json::parse(response));
  } catch (const json::exception&) {
    throw BackendError("prerequisites response is not valid JSON: " + response);
  }
}

inline Plan decompose(const std::string& objective, const PrerequisiteSet& prereqs,
                      const WorldSchema& schema, Backend& backend) {
  std::string response = backend.complete(decompose_request(objective, prereqs));
  Plan plan = parse_plan(response, &schema);
  plan.core_objective = objective;
  plan.prerequisites = prereqs;
  plan.revision = 0;
  return plan;
}

// ---- verification and correction ----

inline std::vector<Violation> check_constraints(
    const Plan& plan, const WorldSchema& schema,
    const std::vector<Constraint>& pack = default_constraint_pack()) {
  return symbolic_execute(plan, schema, pack).violations;
}

namespace detail {

inline Plan correct_once(const Plan& plan, const WorldSchema& schema,
                         const std::vector<Violation>& violations, Backend& backend) {
  std::string response = backend.complete(correct_request(plan, violations));
  Plan out = plan;
  try {
    Plan corrected = parse_plan(response, &schema);
    out.steps = corrected.steps;
  } catch (const EmptyPlan&) {
    out.steps.clear();  // every step was deleted; an empty plan is a legal result
    out.audit.push_back("corrected-to-empty");
  }
  out.revision = plan.revision + 1;
  return out;
}

}  // namespace detail

inline Plan validate_and_correct(const Plan& plan, const WorldSchema& schema, Backend& backend,
                                 const std::vector<Constraint>& pack = default_constraint_pack()) {
  auto violations = check_constraints(plan, schema, pack);
  if (violations.empty()) {
    Plan out = plan;
    out.revision = plan.revision + 1;
    return out;
  }
  return detail::correct_once(plan, schema, violations, backend);
}

// Iterate check-and-correct until the plan text stops changing (or the
// budget runs out, leaving the non-converged flag set).
inline Plan refine_plan(Plan plan, const WorldSchema& schema, const ReasonerConfig& config) {
  if (config.max_phi_iters < 1) throw std::invalid_argument("max_phi_iters must be >= 1");
  if (!config.backend) throw std::invalid_argument("reasoner config has no backend");
  plan.converged = false;
  plan.audit.push_back("phi-0: " + render_plan(plan));
  std::optional<std::vector<Violation>> prev;
  for (int k = 1; k <= config.max_phi_iters; ++k) {
    auto violations = check_constraints(plan, schema, config.constraint_pack);
    if (!violations.empty() && prev && same_violations(*prev, violations))
      throw CorrectionStalled(violations.size());
    Plan next;
    if (violations.empty()) {
      next = plan;
      next.revision = plan.revision + 1;
    } else {
      next = detail::correct_once(plan, schema, violations, *config.backend);
    }
    bool fixed_point = violations.empty() && diff_plans(plan, next).empty();
    prev = std::move(violations);
    plan = std::move(next);
    plan.audit.push_back("phi-" + std::to_string(k) + ": " + render_plan(plan));
    if (fixed_point) {
      plan.converged = true;
      break;
    }
  }
  return plan;
}

inline Plan refine_loop(const Goal& goal, const WorldSchema& schema,
                        const ReasonerConfig& config) {
  if (!config.backend) throw std::invalid_argument("reasoner config has no backend");
  Backend& be = *config.backend;
  Plan plan;
  plan.goal = goal;
  plan.core_objective = interpret(goal, be);
  plan.low_confidence = trim(plan.core_objective) == trim(goal.text());
  plan.audit.push_back("objective: " + plan.core_objective);
  plan.prerequisites = derive_prerequisites(plan.core_objective, be);
  try {
    Plan decomposed = decompose(plan.core_objective, plan.prerequisites, schema, be);
    plan.steps = decomposed.steps;
  } catch (const EmptyPlan&) {
    plan.audit.push_back("decompose-empty");
  }
  plan.revision = 0;
  return refine_plan(std::move(plan), schema, config);
}

// ---- fallback refinement under constraints discovered at run time ----

struct RefinementState {
  Plan plan;
  std::vector<Constraint> discovered;  // grows monotonically, never pruned
  bool infeasible = false;
};

inline bool goal_reachable(const Plan& plan, const WorldSchema& schema,
                           const std::vector<Constraint>& pack) {
  SymbolicResult result = symbolic_execute(plan, schema, pack);
  if (!result.violations.empty()) return false;
  TaskSpec spec = spec_of_objective(plan.core_objective);
  if (!spec.valid()) return false;
  return symbolic_goal_holds(spec.kind, spec.bindings, result.state);
}

inline RefinementState fallback_refine(const RefinementState& state, const Constraint& discovered,
                                       const WorldSchema& schema, const ReasonerConfig& config) {
  RefinementState out = state;
  for (const auto& c : out.discovered)
    if (c == discovered) return out;  // nothing new: the plan already respects it
  out.discovered.push_back(discovered);

  ReasonerConfig extended = config;
  extended.constraint_pack.insert(extended.constraint_pack.end(), out.discovered.begin(),
                                  out.discovered.end());
  try {
    out.plan = refine_loop(state.plan.goal, schema, extended);
  } catch (const CorrectionStalled&) {
    out.infeasible = true;
    return out;
  }
  out.infeasible =
      !out.plan.converged || !goal_reachable(out.plan, schema, extended.constraint_pack);
  return out;
}

// ---- per-plan error audit ----

struct ErrorAudit {
  bool e1 = false;
  bool e2 = false;
  std::vector<Violation> violations;
};

inline ErrorAudit audit_errors(const Plan& plan, const WorldSchema& schema,
                               const std::vector<Constraint>& pack = default_constraint_pack()) {
  ErrorAudit audit;
  audit.violations = check_constraints(plan, schema, pack);
  for (const auto& v : audit.violations) {
    if (v.category == ErrorCat::E1_Redundant) audit.e1 = true;
    if (v.category == ErrorCat::E2_Logical) audit.e2 = true;
  }
  return audit;
}

}  // namespace labrig
