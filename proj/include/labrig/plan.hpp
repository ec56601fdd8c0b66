#pragma once

#include <atomic>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "labrig/common.hpp"

namespace labrig {

using json = nlohmann::json;

// ============================ task & verb vocabulary ============================

enum class TaskKind { PickPlace, Pour, Stir, Mix, Crystallize, Weigh, Shake, Freeform };

inline const char* task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::PickPlace:   return "pick_place";
    case TaskKind::Pour:        return "pour";
    case TaskKind::Stir:        return "stir";
    case TaskKind::Mix:         return "mix";
    case TaskKind::Crystallize: return "crystallize";
    case TaskKind::Weigh:       return "weigh";
    case TaskKind::Shake:       return "shake";
    case TaskKind::Freeform:    return "freeform";
  }
  return "freeform";
}

inline TaskKind task_kind_from(const std::string& s) {
  for (TaskKind k : {TaskKind::PickPlace, TaskKind::Pour, TaskKind::Stir, TaskKind::Mix,
                     TaskKind::Crystallize, TaskKind::Weigh, TaskKind::Shake})
    if (s == task_kind_name(k)) return k;
  return TaskKind::Freeform;
}

inline const std::vector<TaskKind>& all_template_tasks() {
  static const std::vector<TaskKind> kinds = {
      TaskKind::PickPlace, TaskKind::Pour, TaskKind::Stir, TaskKind::Mix,
      TaskKind::Crystallize, TaskKind::Weigh, TaskKind::Shake};
  return kinds;
}

enum class Verb { Pick, Place, Move, Pour, Stir, Add, Wait, Weigh, Shake };

inline const char* verb_name(Verb v) {
  switch (v) {
    case Verb::Pick:  return "pick";
    case Verb::Place: return "place";
    case Verb::Move:  return "move";
    case Verb::Pour:  return "pour";
    case Verb::Stir:  return "stir";
    case Verb::Add:   return "add";
    case Verb::Wait:  return "wait";
    case Verb::Weigh: return "weigh";
    case Verb::Shake: return "shake";
  }
  return "move";
}

inline std::optional<Verb> verb_from(const std::string& s) {
  for (Verb v : {Verb::Pick, Verb::Place, Verb::Move, Verb::Pour, Verb::Stir, Verb::Add,
                 Verb::Wait, Verb::Weigh, Verb::Shake})
    if (s == verb_name(v)) return v;
  return std::nullopt;
}

// ============================ goal-access instrumentation ============================
// Execution layers (grounding, control) must never read the Goal; trial runners
// open an ExecutionScope around those phases and the accessors count reads.

namespace detail {
inline std::atomic<int>& exec_scope_depth() {
  static std::atomic<int> d{0};
  return d;
}
inline std::atomic<uint64_t>& goal_access_count() {
  static std::atomic<uint64_t> c{0};
  return c;
}
}  // namespace detail

struct ExecutionScope {
  ExecutionScope() { ++detail::exec_scope_depth(); }
  ~ExecutionScope() { --detail::exec_scope_depth(); }
  ExecutionScope(const ExecutionScope&) = delete;
  ExecutionScope& operator=(const ExecutionScope&) = delete;
};

inline uint64_t goal_accesses_in_execution() { return detail::goal_access_count().load(); }
inline void reset_goal_access_count() { detail::goal_access_count().store(0); }

class Goal {
 public:
  Goal() = default;
  Goal(std::string text, TaskKind kind) : text_(std::move(text)), kind_(kind) {}

  const std::string& text() const { note_access(); return text_; }
  TaskKind task_kind() const { note_access(); return kind_; }
  bool empty() const { return text_.empty(); }

 private:
  void note_access() const {
    if (detail::exec_scope_depth().load(std::memory_order_relaxed) > 0)
      detail::goal_access_count().fetch_add(1, std::memory_order_relaxed);
  }
  std::string text_;
  TaskKind kind_ = TaskKind::Freeform;
};

// ============================ core plan types ============================

struct Subtask {
  int index = 0;  // 1-based
  std::string text;
  Verb verb = Verb::Move;
  bool verb_recognized = true;
  std::vector<std::string> args;
  std::vector<std::string> arg_preps;   // preposition introducing each arg; "" = direct object
  std::vector<std::string> unresolved;  // args that failed schema resolution

  // Verb/args are a pure function of text (+schema), so text equality is
  // content equality.
  bool operator==(const Subtask& o) const { return text == o.text; }
  bool operator!=(const Subtask& o) const { return !(*this == o); }
};

struct PrerequisiteSet {
  std::set<std::string> required_objects;
  std::set<std::string> required_conditions;  // atoms like "container-empty(beaker)"

  bool operator==(const PrerequisiteSet& o) const {
    return required_objects == o.required_objects && required_conditions == o.required_conditions;
  }
};

enum class ConstraintKind { Temporal, Causal, Physical };

inline const char* constraint_kind_name(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::Temporal: return "temporal";
    case ConstraintKind::Causal:   return "causal";
    case ConstraintKind::Physical: return "physical";
  }
  return "physical";
}

inline ConstraintKind constraint_kind_from(const std::string& s) {
  if (s == "temporal") return ConstraintKind::Temporal;
  if (s == "causal") return ConstraintKind::Causal;
  return ConstraintKind::Physical;
}

// Rules are referenced by name; the symbolic executor owns their semantics.
struct Constraint {
  ConstraintKind kind = ConstraintKind::Physical;
  std::string name;
  std::string arg_pattern;  // "*" or comma list of object classes/ids the rule applies to
  std::string description;

  bool operator==(const Constraint& o) const {
    return kind == o.kind && name == o.name && arg_pattern == o.arg_pattern;
  }
};

enum class ErrorCat { E1_Redundant, E2_Logical };

struct Violation {
  int step_index = 0;
  ErrorCat category = ErrorCat::E2_Logical;
  ConstraintKind constraint_kind = ConstraintKind::Physical;
  std::string message;
  std::string rule;                              // which constraint fired
  std::map<std::string, std::string> fix_args;   // context for the corrector
};

inline bool same_violations(const std::vector<Violation>& a, const std::vector<Violation>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i].step_index != b[i].step_index || a[i].category != b[i].category ||
        a[i].message != b[i].message)
      return false;
  return true;
}

// ============================ world schema ============================

enum class ObjectClass { Cuboid, Cylinder, Cup, Stick, Beaker, PetriDish };

inline const char* object_class_name(ObjectClass c) {
  switch (c) {
    case ObjectClass::Cuboid:    return "cuboid";
    case ObjectClass::Cylinder:  return "cylinder";
    case ObjectClass::Cup:       return "cup";
    case ObjectClass::Stick:     return "stick";
    case ObjectClass::Beaker:    return "beaker";
    case ObjectClass::PetriDish: return "petri_dish";
  }
  return "cuboid";
}

inline ObjectClass object_class_from(const std::string& s) {
  for (ObjectClass c : {ObjectClass::Cuboid, ObjectClass::Cylinder, ObjectClass::Cup,
                        ObjectClass::Stick, ObjectClass::Beaker, ObjectClass::PetriDish})
    if (s == object_class_name(c)) return c;
  throw std::invalid_argument("unknown object class: " + s);
}

struct SchemaObject {
  std::string id;
  ObjectClass cls = ObjectClass::Cuboid;
  bool graspable = true;
  bool container = false;
  std::map<std::string, int> contents;  // liquid id -> mL, initial symbolic state
  std::string at_station;               // "" when on the bench
};

struct WorldSchema {
  std::vector<SchemaObject> objects;
  std::vector<std::string> stations;
  std::vector<std::string> liquids;
  std::set<std::string> predicates;

  const SchemaObject* find(const std::string& id) const {
    for (const auto& o : objects)
      if (o.id == id) return &o;
    return nullptr;
  }
  SchemaObject* find(const std::string& id) {
    for (auto& o : objects)
      if (o.id == id) return &o;
    return nullptr;
  }
  bool is_station(const std::string& id) const {
    for (const auto& s : stations)
      if (s == id) return true;
    return false;
  }
  bool is_liquid(const std::string& id) const {
    for (const auto& l : liquids)
      if (l == id) return true;
    return false;
  }
  bool resolves(const std::string& id) const {
    return find(id) != nullptr || is_station(id) || is_liquid(id);
  }
};

inline std::set<std::string> default_predicates() {
  return {"holding",     "contained-in", "container-empty", "container-has",
          "at-station",  "mixed",        "crystallized",    "shaken",
          "on-bench",    "weighed"};
}

// ============================ plan ============================

struct Plan {
  Goal goal;
  std::string core_objective;
  PrerequisiteSet prerequisites;
  std::vector<Subtask> steps;
  int revision = 0;
  bool low_confidence = false;
  bool converged = true;
  std::vector<std::string> audit;

  bool operator==(const Plan& o) const {
    if (steps.size() != o.steps.size()) return false;
    for (size_t i = 0; i < steps.size(); ++i)
      if (steps[i] != o.steps[i]) return false;
    return core_objective == o.core_objective && prerequisites == o.prerequisites &&
           revision == o.revision;
  }
};

// ============================ errors ============================

struct EmptyPlan : std::runtime_error {
  EmptyPlan() : std::runtime_error("no parseable plan lines") {}
};
struct MalformedLine : std::runtime_error {
  explicit MalformedLine(int line)
      : std::runtime_error("numbered line " + std::to_string(line) + " has empty instruction"),
        line_no(line) {}
  int line_no;
};
struct UnresolvedReference : std::runtime_error {
  explicit UnresolvedReference(const std::string& name)
      : std::runtime_error("unresolved reference: " + name), name(name) {}
  std::string name;
};

// ============================ verb synonym table ============================

struct VerbSynonyms {
  // longest-phrase-first match at the start of a lowercased instruction
  std::vector<std::pair<std::string, Verb>> phrases;

  static const VerbSynonyms& defaults() {
    static const VerbSynonyms table = [] {
      VerbSynonyms t;
      auto add = [&](const char* p, Verb v) { t.phrases.emplace_back(p, v); };
      add("pick up", Verb::Pick);
      add("pick", Verb::Pick);
      add("grab", Verb::Pick);
      add("take", Verb::Pick);
      add("grasp", Verb::Pick);
      add("retrieve", Verb::Pick);
      add("set down", Verb::Place);
      add("place", Verb::Place);
      add("put", Verb::Place);
      add("position", Verb::Place);
      add("deposit", Verb::Place);
      add("load", Verb::Place);
      add("move", Verb::Move);
      add("relocate", Verb::Move);
      add("transfer", Verb::Move);
      add("bring", Verb::Move);
      add("carry", Verb::Move);
      add("pour", Verb::Pour);
      add("decant", Verb::Pour);
      add("empty", Verb::Pour);
      add("perform stirring", Verb::Stir);
      add("stir", Verb::Stir);
      add("mix", Verb::Stir);
      add("blend", Verb::Stir);
      add("add", Verb::Add);
      add("introduce", Verb::Add);
      add("dispense", Verb::Add);
      add("wait for", Verb::Wait);
      add("wait", Verb::Wait);
      add("weigh", Verb::Weigh);
      add("measure the weight of", Verb::Weigh);
      add("measure", Verb::Weigh);
      add("shake", Verb::Shake);
      add("agitate", Verb::Shake);
      std::stable_sort(t.phrases.begin(), t.phrases.end(),
                       [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
      return t;
    }();
    return table;
  }

  json to_json() const {
    json arr = json::array();
    for (const auto& [phrase, verb] : phrases)
      arr.push_back({{"phrase", phrase}, {"verb", verb_name(verb)}});
    return arr;
  }

  static VerbSynonyms from_json(const json& arr) {
    VerbSynonyms t;
    for (const auto& e : arr) {
      auto v = verb_from(e.at("verb").get<std::string>());
      if (!v) throw std::invalid_argument("bad verb in synonym table");
      t.phrases.emplace_back(e.at("phrase").get<std::string>(), *v);
    }
    std::stable_sort(t.phrases.begin(), t.phrases.end(),
                     [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
    return t;
  }
};

// ============================ instruction grammar ============================

namespace detail {

inline bool is_fill_word(const std::string& w) {
  static const std::set<std::string> fill = {"the",      "a",       "an",       "some",
                                             "contents", "mixture", "solution", "liquid",
                                             "liquids",  "it",      "up",       "down"};
  return fill.count(w) > 0;
}

inline bool is_preposition(const std::string& w) {
  static const std::set<std::string> preps = {"in",   "into", "on",   "onto",   "to",   "from",
                                              "at",   "with", "next", "beside", "near", "under",
                                              "over", "by",   "inside", "of"};
  return preps.count(w) > 0;
}

struct ParsedInstruction {
  Verb verb;
  std::vector<std::string> args;
  std::vector<std::string> preps;
};

inline std::optional<Verb> match_verb_phrase(const std::string& lowered, size_t& consumed,
                                             const VerbSynonyms& table) {
  for (const auto& [phrase, verb] : table.phrases) {
    if (!starts_with(lowered, phrase)) continue;
    if (lowered.size() > phrase.size() && lowered[phrase.size()] != ' ') continue;
    consumed = phrase.size();
    return verb;
  }
  return std::nullopt;
}

inline std::optional<ParsedInstruction> parse_instruction(const std::string& text,
                                                          const VerbSynonyms& table) {
  std::string lowered = to_lower(trim(text));
  size_t consumed = 0;
  auto verb = match_verb_phrase(lowered, consumed, table);
  if (!verb) return std::nullopt;

  ParsedInstruction out;
  out.verb = *verb;
  if (*verb == Verb::Wait) return out;  // everything after "wait" is annotation, not objects

  std::vector<std::string> words = split_words(lowered.substr(consumed));
  std::string cur, cur_prep, pending_prep;
  auto flush = [&] {
    if (cur.empty()) return;
    out.args.push_back(cur);
    out.preps.push_back(cur_prep);
    cur.clear();
  };
  for (auto& raw : words) {
    std::string w = strip_punct_tail(raw);
    if (w.empty()) continue;
    if (w == "and") {
      flush();
      pending_prep.clear();
      continue;
    }
    if (is_preposition(w)) {
      flush();
      pending_prep = pending_prep.empty() ? w : pending_prep + " " + w;  // "next to"
      continue;
    }
    // fill words are skipped only at the start of a noun phrase: "the solution"
    // drops, but "reagent a" and "salt solution" keep their tails
    if (is_fill_word(w) && cur.empty()) continue;
    if (cur.empty()) {
      cur_prep = pending_prep;
      pending_prep.clear();
      cur = w;
    } else {
      cur += " " + w;  // multiword id like "petri dish"
    }
  }
  flush();
  return out;
}

inline std::optional<std::string> resolve_arg(const std::string& phrase, const WorldSchema& schema) {
  if (schema.resolves(phrase)) return phrase;
  std::string underscored = phrase;
  std::replace(underscored.begin(), underscored.end(), ' ', '_');
  if (schema.resolves(underscored)) return underscored;
  return std::nullopt;
}

}  // namespace detail

// ============================ parse / render / diff ============================

inline Subtask parse_subtask(int index, const std::string& text, const WorldSchema* schema,
                             const VerbSynonyms& table = VerbSynonyms::defaults()) {
  Subtask st;
  st.index = index;
  st.text = trim(text);
  auto parsed = detail::parse_instruction(st.text, table);
  if (parsed) {
    st.verb = parsed->verb;
    st.args = parsed->args;
    st.arg_preps = parsed->preps;
  } else {
    st.verb = Verb::Move;  // placeholder; verb_recognized carries the truth
    st.verb_recognized = false;
    st.unresolved.push_back(st.text);
    return st;
  }
  if (schema) {
    for (auto& a : st.args) {
      auto r = detail::resolve_arg(a, *schema);
      if (r)
        a = *r;
      else
        st.unresolved.push_back(a);
    }
  }
  return st;
}

inline Plan parse_plan(const std::string& text, const WorldSchema* schema = nullptr,
                       const VerbSynonyms& table = VerbSynonyms::defaults()) {
  Plan plan;
  int line_no = 0;
  for (const auto& raw : split_lines(text)) {
    ++line_no;
    std::string line = trim(raw);
    size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i == 0 || i >= line.size()) continue;           // prose or bare number: skip
    if (line[i] != '.' && line[i] != ')') continue;     // not a numbered item
    std::string instruction = trim(line.substr(i + 1));
    if (instruction.empty()) throw MalformedLine(line_no);
    plan.steps.push_back(
        parse_subtask(static_cast<int>(plan.steps.size()) + 1, instruction, schema, table));
  }
  if (plan.steps.empty()) throw EmptyPlan();
  return plan;
}

inline std::string render_plan(const Plan& plan) {
  std::vector<std::string> lines;
  lines.reserve(plan.steps.size());
  for (size_t i = 0; i < plan.steps.size(); ++i)
    lines.push_back(std::to_string(i + 1) + ". " + plan.steps[i].text);
  return join(lines, "\n");
}

// Mutable overload: leaves a marker in the audit trail when asked to render
// a plan with no steps.
inline std::string render_plan(Plan& plan) {
  if (plan.steps.empty()) plan.audit.push_back("rendered-empty");
  return render_plan(static_cast<const Plan&>(plan));
}

enum class EditKind { Insert, Delete, Replace };

struct PlanEdit {
  EditKind kind;
  size_t pos;       // position in plan a (for Insert: insert before this position)
  Subtask payload;  // from b for Insert/Replace, from a for Delete
};

inline std::vector<PlanEdit> diff_plans(const Plan& a, const Plan& b) {
  const auto& A = a.steps;
  const auto& B = b.steps;
  size_t n = A.size(), m = B.size();
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1, 0));
  for (size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i)
    for (size_t j = 1; j <= m; ++j) {
      int sub = d[i - 1][j - 1] + (A[i - 1] == B[j - 1] ? 0 : 1);
      d[i][j] = std::min({sub, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  std::vector<PlanEdit> edits;
  size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && A[i - 1] == B[j - 1] && d[i][j] == d[i - 1][j - 1]) {
      --i; --j;
    } else if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + 1) {
      edits.push_back({EditKind::Replace, i - 1, B[j - 1]});
      --i; --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      edits.push_back({EditKind::Delete, i - 1, A[i - 1]});
      --i;
    } else {
      edits.push_back({EditKind::Insert, i, B[j - 1]});
      --j;
    }
  }
  std::reverse(edits.begin(), edits.end());
  return edits;
}

// ============================ plan file I/O ============================

inline json prerequisites_to_json(const PrerequisiteSet& p) {
  return {{"objects", p.required_objects}, {"conditions", p.required_conditions}};
}

inline PrerequisiteSet prerequisites_from_json(const json& j) {
  PrerequisiteSet p;
  for (const auto& o : j.value("objects", json::array())) p.required_objects.insert(o.get<std::string>());
  for (const auto& c : j.value("conditions", json::array()))
    p.required_conditions.insert(c.get<std::string>());
  return p;
}

inline std::string save_plan_text(const Plan& plan) {
  json footer = {
      {"goal", {{"text", plan.goal.text()}, {"task_kind", task_kind_name(plan.goal.task_kind())}}},
      {"core_objective", plan.core_objective},
      {"prerequisites", prerequisites_to_json(plan.prerequisites)},
      {"revision", plan.revision},
      {"low_confidence", plan.low_confidence},
      {"converged", plan.converged},
      {"audit", plan.audit},
  };
  std::string body = render_plan(plan);
  if (body.empty()) body = "(empty)";
  return body + "\n" + footer.dump() + "\n";
}

inline Plan load_plan_text(const std::string& text, const WorldSchema* schema = nullptr) {
  auto lines = split_lines(text);
  std::string footer_line;
  std::vector<std::string> body;
  for (auto& l : lines) {
    std::string t = trim(l);
    if (!t.empty() && t[0] == '{')
      footer_line = t;
    else
      body.push_back(l);
  }
  Plan plan;
  std::string body_text = join(body, "\n");
  if (trim(body_text) == "(empty)" || trim(body_text).empty()) {
    // footer-only file: legal for empty plans
  } else {
    plan = parse_plan(body_text, schema);
  }
  if (!footer_line.empty()) {
    json f = json::parse(footer_line);
    plan.goal = Goal(f["goal"].value("text", ""),
                     task_kind_from(f["goal"].value("task_kind", "freeform")));
    plan.core_objective = f.value("core_objective", "");
    plan.prerequisites = prerequisites_from_json(f.value("prerequisites", json::object()));
    plan.revision = f.value("revision", 0);
    plan.low_confidence = f.value("low_confidence", false);
    plan.converged = f.value("converged", true);
    for (const auto& a : f.value("audit", json::array())) plan.audit.push_back(a.get<std::string>());
  }
  return plan;
}

// Canonical step text shared by the plan generator and the rule planner,
// guaranteed to re-parse to (verb, args, preps).
inline std::string canonical_step_text(Verb verb, const std::vector<std::string>& args,
                                       const std::vector<std::string>& preps = {}) {
  auto prep_for = [&](size_t i, const char* dflt) -> std::string {
    if (i < preps.size() && !preps[i].empty()) return preps[i];
    return dflt;
  };
  auto arg_word = [&](size_t i) {
    std::string a = args[i];
    std::replace(a.begin(), a.end(), '_', ' ');
    return a;
  };
  switch (verb) {
    case Verb::Pick:
      return args.empty() ? "pick up" : "pick up " + arg_word(0);
    case Verb::Place: {
      if (args.size() < 2) return args.empty() ? "place" : "place " + arg_word(0);
      return "place " + arg_word(0) + " " + prep_for(1, "in") + " " + arg_word(1);
    }
    case Verb::Move: {
      if (args.size() < 2) return args.empty() ? "move" : "move " + arg_word(0);
      return "move " + arg_word(0) + " " + prep_for(1, "to") + " " + arg_word(1);
    }
    case Verb::Pour: {
      if (args.empty()) return "pour";
      if (args.size() == 1 && prep_for(0, "") == "from") return "pour contents from " + arg_word(0);
      if (args.size() == 1) return "pour " + arg_word(0);
      return "pour " + arg_word(0) + " " + prep_for(1, "into") + " " + arg_word(1);
    }
    case Verb::Stir: {
      if (args.empty()) return "perform stirring";
      return "stir the solution in " + arg_word(args.size() - 1);
    }
    case Verb::Add: {
      if (args.size() < 2) return args.empty() ? "add" : "add " + arg_word(0);
      return "add " + arg_word(0) + " " + prep_for(1, "to") + " " + arg_word(1);
    }
    case Verb::Wait:
      return "wait for the process to finish";
    case Verb::Weigh:
      return args.empty() ? "weigh" : "weigh " + arg_word(0) + " with the balance";
    case Verb::Shake:
      return args.empty() ? "shake" : "shake " + arg_word(0);
  }
  return "move";
}

}  // namespace labrig
