#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "labrig/backends.hpp"
#include "labrig/control_types.hpp"
#include "labrig/plan.hpp"
#include "labrig/primitives.hpp"
#include "labrig/symbolic.hpp"

namespace labrig {

struct GroundingFailed : std::runtime_error {
  explicit GroundingFailed(const std::string& why) : std::runtime_error("grounding failed: " + why) {}
};

// ---- scene digest: the symbolic observation fed to grounding prompts ----
//
// One line per entity:
//   gripper: held=<id|none>
//   <id>: class=<cls> station=<name|-> contents=<liq:ml[,liq:ml]|->
struct SceneDigest {
  struct Entry {
    std::string id;
    ObjectClass cls = ObjectClass::Cuboid;
    std::string station;               // "" = loose on the bench
    std::map<std::string, int> contents;
  };
  std::string held;
  std::vector<Entry> entries;

  const Entry* find(const std::string& id) const {
    for (const auto& e : entries)
      if (e.id == id) return &e;
    return nullptr;
  }
};

inline std::string render_scene_digest(const SceneDigest& d) {
  std::string out = "gripper: held=" + (d.held.empty() ? "none" : d.held) + "\n";
  for (const auto& e : d.entries) {
    out += e.id + ": class=" + object_class_name(e.cls);
    out += " station=" + (e.station.empty() ? "-" : e.station);
    out += " contents=";
    if (e.contents.empty()) {
      out += "-";
    } else {
      bool first = true;
      for (const auto& [liq, ml] : e.contents) {
        if (!first) out += ",";
        out += liq + ":" + std::to_string(ml);
        first = false;
      }
    }
    out += "\n";
  }
  return out;
}

inline SceneDigest parse_scene_digest(const std::string& text) {
  SceneDigest d;
  for (const auto& raw : split_lines(text)) {
    std::string line = trim(raw);
    if (line.empty()) continue;
    size_t colon = line.find(": ");
    if (colon == std::string::npos) continue;
    std::string id = line.substr(0, colon);
    std::string rest = line.substr(colon + 2);
    if (id == "gripper") {
      if (starts_with(rest, "held=")) {
        std::string h = rest.substr(5);
        d.held = h == "none" ? "" : h;
      }
      continue;
    }
    SceneDigest::Entry e;
    e.id = id;
    for (const auto& field : split_words(rest)) {
      size_t eq = field.find('=');
      if (eq == std::string::npos) continue;
      std::string key = field.substr(0, eq);
      std::string val = field.substr(eq + 1);
      if (key == "class") {
        e.cls = object_class_from(val);
      } else if (key == "station") {
        e.station = val == "-" ? "" : val;
      } else if (key == "contents" && val != "-") {
        std::string item;
        auto commit = [&] {
          size_t sep = item.find(':');
          if (sep != std::string::npos)
            e.contents[item.substr(0, sep)] = std::atoi(item.c_str() + sep + 1);
          item.clear();
        };
        for (char c : val) {
          if (c == ',')
            commit();
          else
            item += c;
        }
        commit();
      }
    }
    d.entries.push_back(e);
  }
  return d;
}

// The catalog view of a digest, for resolving subtask args at grounding time.
inline WorldSchema digest_schema(const SceneDigest& d) {
  WorldSchema s;
  s.stations = {kStationBalance, kStationShaker, kStationCrystallization, kStationBench};
  s.predicates = default_predicates();
  std::set<std::string> liquids;
  for (const auto& e : d.entries) {
    bool graspable = e.cls == ObjectClass::Cuboid || e.cls == ObjectClass::Cylinder ||
                     e.cls == ObjectClass::Cup || e.cls == ObjectClass::Stick;
    bool container =
        e.cls == ObjectClass::Cup || e.cls == ObjectClass::Beaker || e.cls == ObjectClass::PetriDish;
    s.objects.push_back({e.id, e.cls, graspable, container, e.contents, e.station});
    for (const auto& [liq, ml] : e.contents) liquids.insert(liq);
  }
  s.liquids.assign(liquids.begin(), liquids.end());
  return s;
}

struct GroundingContext {
  Subtask subtask;
  std::string observation_summary;         // rendered SceneDigest of the live world
  std::vector<StateVec> predicted_states;  // optional lookahead from the predictor
  std::vector<std::string> tracked;        // ids behind the state-vector slots
  std::set<std::string> avoid;             // targets of discovered avoid constraints
};

// ---- prompt construction ----

inline constexpr const char* kGrounderSystemPrompt =
    "You control a two-fingered laboratory manipulator. Translate the given "
    "subtask into action primitives. The only legal primitives are:\n"
    "  move to <target>\n"
    "  grasp 1\n"
    "  grasp 0\n"
    "  pour\n"
    "  stir\n"
    "Targets are object ids or station names from the scene. Respond with "
    "primitives only, one per line, no commentary.";

inline CompletionRequest build_prompt(const GroundingContext& ctx) {
  CompletionRequest req;
  req.system = kGrounderSystemPrompt;
  req.tag = "grounder.ground";
  req.user = "Subtask: " + ctx.subtask.text + "\n";
  req.user += "Scene:\n" + ctx.observation_summary;
  if (!ctx.avoid.empty()) {
    req.user += "Avoid: ";
    bool first = true;
    for (const auto& id : ctx.avoid) {
      if (!first) req.user += ", ";
      req.user += id;
      first = false;
    }
    req.user += "\n";
  }
  req.attachments.push_back(ctx.observation_summary);
  if (!ctx.predicted_states.empty()) {
    std::string digest = render_prediction_digest(ctx.predicted_states, ctx.tracked);
    req.user += "Prediction:\n" + digest;
    req.attachments.push_back(digest);
  }
  req.user += "Primitives:";
  return req;
}

// ---- deterministic rule grounder ----

namespace detail {

struct GroundPlanBuilder {
  const SceneDigest& scene;
  const WorldSchema schema;
  const std::set<std::string>& avoid;
  std::vector<Primitive> prims;
  std::string held;

  GroundPlanBuilder(const SceneDigest& d, const std::set<std::string>& av)
      : scene(d), schema(digest_schema(d)), avoid(av), held(d.held) {}

  void release() {
    if (held.empty()) return;
    prims.push_back(Primitive::grasp(false));
    held.clear();
  }
  void fetch(const std::string& obj) {
    if (held == obj) return;
    release();
    prims.push_back(Primitive::move(obj));
    prims.push_back(Primitive::grasp(true));
    held = obj;
  }
  void put(const std::string& dest) {
    prims.push_back(Primitive::move(dest.empty() ? kStationBench : dest));
    prims.push_back(Primitive::grasp(false));
    held.clear();
  }

  std::string container_holding(const std::string& liquid, const std::string& exclude = "") const {
    for (const auto& e : scene.entries) {
      if (e.id == exclude) continue;
      auto it = e.contents.find(liquid);
      if (it != e.contents.end() && it->second > 0) return e.id;
    }
    return "";
  }
  std::string first_stirrer() const {
    for (const auto& e : scene.entries)
      if (e.cls == ObjectClass::Stick && !avoid.count(e.id)) return e.id;
    return "";
  }
  std::string station_of(const std::string& id) const {
    const auto* e = scene.find(id);
    return e ? e->station : "";
  }
};

}  // namespace detail

// Total over the closed verb vocabulary: unknown situations ground to the
// empty sequence (a no-op for the controller) rather than failing.
inline PrimitiveSeq rule_ground(const GroundingContext& ctx) {
  SceneDigest scene = parse_scene_digest(ctx.observation_summary);
  detail::GroundPlanBuilder b(scene, ctx.avoid);
  Subtask step = parse_subtask(ctx.subtask.index, ctx.subtask.text, &b.schema);

  PrimitiveSeq seq;
  seq.provenance = step.text;
  auto arg = [&](size_t i) { return i < step.args.size() ? step.args[i] : std::string(); };
  auto prep = [&](size_t i) { return i < step.arg_preps.size() ? step.arg_preps[i] : std::string(); };

  if (!step.verb_recognized) return seq;

  switch (step.verb) {
    case Verb::Pick: {
      std::string obj = arg(0);
      if (obj.empty() || b.held == obj) break;
      b.fetch(obj);
      break;
    }
    case Verb::Place:
    case Verb::Move: {
      std::string obj = arg(0);
      if (obj.empty()) break;
      b.fetch(obj);
      b.put(arg(1));
      break;
    }
    case Verb::Pour: {
      std::string source, dest;
      std::string p0 = prep(0);
      if (!step.args.empty() && (p0 == "from" || p0 == "of")) {
        source = arg(0);
        dest = arg(1);
      } else {
        std::string liquid;
        for (const auto& a : step.args) {
          if (b.schema.is_liquid(a) && liquid.empty()) liquid = a;
          else if (b.schema.find(a) && dest.empty()) dest = a;
        }
        const auto* in_hand = scene.find(b.held);
        if (in_hand && in_hand->contents.count(liquid) && in_hand->contents.at(liquid) > 0)
          source = b.held;
        else
          source = b.container_holding(liquid, dest);
      }
      if (source.empty()) break;
      b.fetch(source);
      if (!dest.empty()) b.prims.push_back(Primitive::move(dest));
      b.prims.push_back(Primitive::pour());
      break;  // source stays in hand; the plan's next step sets it down
    }
    case Verb::Stir: {
      std::string container = step.args.empty() ? "" : step.args.back();
      if (container.empty())
        for (const auto& e : scene.entries)
          if (!e.contents.empty()) { container = e.id; break; }
      std::string stirrer = b.first_stirrer();
      if (container.empty() || stirrer.empty()) break;
      b.fetch(stirrer);
      b.prims.push_back(Primitive::move(container));
      b.prims.push_back(Primitive::stir());
      b.prims.push_back(Primitive::grasp(false));
      b.held.clear();
      break;
    }
    case Verb::Add: {
      std::string liquid = arg(0), dest = arg(1);
      std::string source = b.container_holding(liquid, dest);
      if (source.empty() || dest.empty()) break;
      b.fetch(source);
      b.prims.push_back(Primitive::move(dest));
      b.prims.push_back(Primitive::pour());
      b.put(kStationBench);
      break;
    }
    case Verb::Wait:
      break;  // purely temporal; the station does the work
    case Verb::Weigh: {
      std::string container;
      for (const auto& a : step.args)
        if (b.schema.find(a)) { container = a; break; }
      if (container.empty()) break;
      if (b.station_of(container) == kStationBalance) break;  // already in place: skip
      b.fetch(container);
      b.put(kStationBalance);
      break;
    }
    case Verb::Shake: {
      std::string container = arg(0);
      if (container.empty()) break;
      if (b.station_of(container) == kStationShaker) break;
      b.fetch(container);
      b.put(kStationShaker);
      break;
    }
  }
  seq.prims = std::move(b.prims);
  return seq;
}

// ---- backend-mediated grounding with one repair round ----

inline PrimitiveSeq ground(const GroundingContext& ctx, Backend& backend) {
  if (!ctx.subtask.verb_recognized)
    throw GroundingFailed("unknown verb in subtask: " + ctx.subtask.text);

  SceneDigest scene = parse_scene_digest(ctx.observation_summary);
  bool initially_engaged = !scene.held.empty();
  // pick and pour both hand the grasped object to the following subtask
  bool carrying = ctx.subtask.verb == Verb::Pick || ctx.subtask.verb == Verb::Pour;

  auto attempt = [&](const CompletionRequest& req) -> PrimitiveSeq {
    std::string response = backend.complete(req);
    PrimitiveSeq seq = parse_primitives(response);
    static_check(seq, initially_engaged, carrying);
    seq.provenance = ctx.subtask.text;
    return seq;
  };

  CompletionRequest req = build_prompt(ctx);
  std::string first_error;
  try {
    return attempt(req);
  } catch (const SyntaxError& e) {
    first_error = e.what();
  } catch (const StaticCheckError& e) {
    first_error = e.what();
  }

  CompletionRequest repair = req;
  repair.tag = "grounder.repair";
  repair.user += "\nThe previous output was invalid: " + first_error +
                 "\nRespond again with legal primitives only.";
  try {
    return attempt(repair);
  } catch (const SyntaxError& e) {
    throw GroundingFailed(std::string(e.what()) + " (after repair round)");
  } catch (const StaticCheckError& e) {
    throw GroundingFailed(std::string(e.what()) + " (after repair round)");
  }
}

}  // namespace labrig
