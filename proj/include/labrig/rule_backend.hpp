#pragma once

#include <memory>
#include <optional>
#include <string>

#include "labrig/backends.hpp"
#include "labrig/constraints.hpp"
#include "labrig/grounder.hpp"
#include "labrig/tasks.hpp"

namespace labrig {

// Deterministic offline engine: answers every pipeline prompt from the
// canonical task tables, so the full stack runs without a hosted model.

namespace detail {

inline std::optional<std::string> line_after(const std::string& text, const std::string& prefix) {
  for (const auto& raw : split_lines(text)) {
    std::string line = trim(raw);
    if (starts_with(line, prefix)) return trim(line.substr(prefix.size()));
  }
  return std::nullopt;
}

inline std::string answer_interpret(const std::string& user) {
  std::string goal = line_after(user, "Goal:").value_or("");
  auto m = match_goal(goal);
  if (!m) return goal;  // echo; the caller treats this as low confidence
  return objective_for(m->kind, m->explicit_bindings);
}

inline std::string answer_prerequisites(const std::string& user) {
  std::string objective = line_after(user, "Objective:").value_or("");
  return prerequisites_to_json(task_prerequisites(spec_of_objective(objective))).dump();
}

inline std::string answer_decompose(const std::string& user) {
  std::string objective = line_after(user, "Objective:").value_or("");
  TaskSpec spec = spec_of_objective(objective);
  if (!spec.valid()) return objective.empty() ? "" : "1. " + objective;
  auto texts = canonical_plan_texts(spec);
  std::vector<std::string> lines;
  lines.reserve(texts.size());
  for (size_t i = 0; i < texts.size(); ++i)
    lines.push_back(std::to_string(i + 1) + ". " + texts[i]);
  return join(lines, "\n");
}

inline std::string answer_correct(const std::string& user) {
  std::vector<Violation> violations;
  if (auto line = line_after(user, "Violations:"))
    violations = violations_from_json(json::parse(*line));
  Plan plan;
  try {
    plan = parse_plan(user);  // numbered lines only; prose and markers skip
  } catch (const EmptyPlan&) {
    return "(empty)";
  }
  WorldSchema no_schema;
  Plan fixed = apply_fixes(plan, violations, no_schema);
  std::string out = render_plan(fixed);
  return out.empty() ? "(empty)" : out;
}

inline std::string answer_ground(const std::string& user) {
  GroundingContext ctx;
  std::string scene;
  bool in_scene = false;
  for (const auto& raw : split_lines(user)) {
    std::string line = trim(raw);
    if (starts_with(line, "Subtask:")) {
      ctx.subtask = parse_subtask(1, trim(line.substr(8)), nullptr);
      continue;
    }
    if (line == "Scene:") {
      in_scene = true;
      continue;
    }
    if (starts_with(line, "Avoid:")) {
      in_scene = false;
      std::string cur;
      auto commit = [&] {
        if (!trim(cur).empty()) ctx.avoid.insert(trim(cur));
        cur.clear();
      };
      for (char c : line.substr(6)) {
        if (c == ',')
          commit();
        else
          cur += c;
      }
      commit();
      continue;
    }
    if (starts_with(line, "Prediction:") || starts_with(line, "Primitives:") ||
        starts_with(line, "The previous output was invalid") ||
        starts_with(line, "Respond again")) {
      in_scene = false;
      continue;
    }
    if (in_scene && !line.empty()) scene += line + "\n";
  }
  ctx.observation_summary = scene;
  return render_primitives(rule_ground(ctx));
}

}  // namespace detail

inline std::shared_ptr<Backend> make_rule_backend() {
  return std::make_shared<FunctionBackend>("rule", [](const CompletionRequest& req) -> std::string {
    if (req.tag == "reasoner.interpret") return detail::answer_interpret(req.user);
    if (req.tag == "reasoner.prerequisites") return detail::answer_prerequisites(req.user);
    if (req.tag == "reasoner.decompose") return detail::answer_decompose(req.user);
    if (req.tag == "reasoner.correct") return detail::answer_correct(req.user);
    if (req.tag == "grounder.ground" || req.tag == "grounder.repair")
      return detail::answer_ground(req.user);
    throw BackendError("rule backend has no handler for tag: " + req.tag);
  });
}

}  // namespace labrig
