#include <catch2/catch_amalgamated.hpp>

#include "labrig/grounder.hpp"
#include "labrig/tasks.hpp"

using namespace labrig;

namespace {

SceneDigest digest_for(TaskKind kind, std::string held = "") {
  WorldSchema s = task_schema(default_task_spec(kind));
  SceneDigest d;
  d.held = std::move(held);
  for (const auto& o : s.objects) d.entries.push_back({o.id, o.cls, o.at_station, o.contents});
  return d;
}

GroundingContext make_ctx(TaskKind kind, const std::string& subtask_text,
                          const std::string& held = "") {
  WorldSchema s = task_schema(default_task_spec(kind));
  GroundingContext ctx;
  ctx.subtask = parse_subtask(1, subtask_text, &s);
  ctx.observation_summary = render_scene_digest(digest_for(kind, held));
  return ctx;
}

std::vector<std::string> prim_lines(const PrimitiveSeq& seq) {
  return split_lines(render_primitives(seq));
}

}  // namespace

TEST_CASE("scene digest renders and parses losslessly") {
  SceneDigest d;
  d.held = "cup";
  d.entries = {{"cup", ObjectClass::Cup, "", {{"water", 50}}},
               {"beaker", ObjectClass::Beaker, "", {}},
               {"petri_dish", ObjectClass::PetriDish, kStationCrystallization,
                {{"salt_solution", 30}, {"water", 5}}},
               {"stick", ObjectClass::Stick, "", {}}};

  std::string text = render_scene_digest(d);
  REQUIRE(text.find("gripper: held=cup\n") == 0);
  REQUIRE(text.find("beaker: class=beaker station=- contents=-") != std::string::npos);
  REQUIRE(text.find("petri_dish: class=petri_dish station=crystallization "
                    "contents=salt_solution:30,water:5") != std::string::npos);

  SceneDigest back = parse_scene_digest(text);
  REQUIRE(back.held == "cup");
  REQUIRE(back.entries.size() == 4);
  for (size_t i = 0; i < d.entries.size(); ++i) {
    REQUIRE(back.entries[i].id == d.entries[i].id);
    REQUIRE(back.entries[i].cls == d.entries[i].cls);
    REQUIRE(back.entries[i].station == d.entries[i].station);
    REQUIRE(back.entries[i].contents == d.entries[i].contents);
  }

  SECTION("empty hand renders as none") {
    d.held.clear();
    std::string t2 = render_scene_digest(d);
    REQUIRE(t2.find("gripper: held=none\n") == 0);
    REQUIRE(parse_scene_digest(t2).held.empty());
  }
}

TEST_CASE("digest reconstructs a resolvable catalog") {
  SceneDigest d = digest_for(TaskKind::Mix);
  WorldSchema s = digest_schema(d);
  REQUIRE(s.find("cup_a") != nullptr);
  REQUIRE(s.find("cup_a")->container);
  REQUIRE(s.find("cup_a")->graspable);
  REQUIRE(s.find("beaker") != nullptr);
  REQUIRE_FALSE(s.find("beaker")->graspable);
  REQUIRE(s.find("stick") != nullptr);
  REQUIRE_FALSE(s.find("stick")->container);
  REQUIRE(s.is_liquid("reagent_a"));
  REQUIRE(s.is_liquid("reagent_b"));
  REQUIRE(s.is_station("balance"));
  REQUIRE(s.is_station("bench"));
}

TEST_CASE("prompt is deterministic and carries the scene") {
  GroundingContext ctx = make_ctx(TaskKind::Pour, "pour water into beaker", "cup");
  CompletionRequest a = build_prompt(ctx);
  CompletionRequest b = build_prompt(ctx);
  REQUIRE(a.user == b.user);
  REQUIRE(request_hash(a) == request_hash(b));
  REQUIRE(a.tag == "grounder.ground");
  REQUIRE(a.user.find("Subtask: pour water into beaker") != std::string::npos);
  REQUIRE(a.user.find("gripper: held=cup") != std::string::npos);
  REQUIRE(a.user.find("Prediction:") == std::string::npos);
  REQUIRE(a.attachments.size() == 1);

  SECTION("prediction digest appears when states are provided") {
    StateVec s0 = zero_state(), s1 = zero_state();
    s1[sv::gripper_x] = 0.25;
    ctx.predicted_states = {s0, s1};
    ctx.tracked = {"cup"};
    CompletionRequest c = build_prompt(ctx);
    REQUIRE(c.user.find("Prediction:") != std::string::npos);
    REQUIRE(c.user.find("gripper: dx=+0.250") != std::string::npos);
    REQUIRE(c.attachments.size() == 2);
  }
  SECTION("avoid list is surfaced") {
    ctx.avoid = {"stick"};
    REQUIRE(build_prompt(ctx).user.find("Avoid: stick") != std::string::npos);
  }
}

TEST_CASE("rule grounding of pick") {
  auto seq = rule_ground(make_ctx(TaskKind::Pour, "pick up cup"));
  REQUIRE(prim_lines(seq) == std::vector<std::string>{"move to cup", "grasp 1"});

  SECTION("already holding the target is a no-op") {
    REQUIRE(rule_ground(make_ctx(TaskKind::Pour, "pick up cup", "cup")).prims.empty());
  }
  SECTION("holding something else releases first") {
    auto s = rule_ground(make_ctx(TaskKind::Pour, "pick up cuboid", "cup"));
    REQUIRE(prim_lines(s) ==
            std::vector<std::string>{"grasp 0", "move to cuboid", "grasp 1"});
  }
}

TEST_CASE("rule grounding of place") {
  SECTION("while holding the object") {
    auto s = rule_ground(make_ctx(TaskKind::Pour, "place cup in beaker", "cup"));
    REQUIRE(prim_lines(s) == std::vector<std::string>{"move to beaker", "grasp 0"});
  }
  SECTION("fetches when not holding") {
    auto s = rule_ground(make_ctx(TaskKind::Pour, "place cup in beaker"));
    REQUIRE(prim_lines(s) ==
            std::vector<std::string>{"move to cup", "grasp 1", "move to beaker", "grasp 0"});
  }
  SECTION("no destination defaults to the bench") {
    auto s = rule_ground(make_ctx(TaskKind::Pour, "put down cup", "cup"));
    REQUIRE(prim_lines(s) == std::vector<std::string>{"move to bench", "grasp 0"});
  }
}

TEST_CASE("rule grounding of pour") {
  SECTION("holding the source") {
    auto s = rule_ground(make_ctx(TaskKind::Pour, "pour water into beaker", "cup"));
    REQUIRE(prim_lines(s) == std::vector<std::string>{"move to beaker", "pour"});
  }
  SECTION("fetches the container that holds the liquid") {
    auto s = rule_ground(make_ctx(TaskKind::Pour, "pour water into beaker"));
    REQUIRE(prim_lines(s) ==
            std::vector<std::string>{"move to cup", "grasp 1", "move to beaker", "pour"});
  }
  SECTION("source-form names the container directly") {
    auto s = rule_ground(make_ctx(TaskKind::Pour, "pour contents from cup"));
    REQUIRE(prim_lines(s) == std::vector<std::string>{"move to cup", "grasp 1", "pour"});
  }
  SECTION("no container holds the liquid") {
    SceneDigest d = digest_for(TaskKind::Pour);
    d.entries[0].contents.clear();  // empty the cup
    GroundingContext ctx = make_ctx(TaskKind::Pour, "pour water into beaker");
    ctx.observation_summary = render_scene_digest(d);
    REQUIRE(rule_ground(ctx).prims.empty());
  }
}

TEST_CASE("rule grounding of stir") {
  auto s = rule_ground(make_ctx(TaskKind::Stir, "stir the solution in beaker"));
  REQUIRE(prim_lines(s) == std::vector<std::string>{"move to stick", "grasp 1",
                                                    "move to beaker", "stir", "grasp 0"});

  SECTION("unnamed container falls back to the one with contents") {
    auto s2 = rule_ground(make_ctx(TaskKind::Stir, "stir"));
    REQUIRE(prim_lines(s2) == prim_lines(s));
  }
}

TEST_CASE("avoided objects are routed around") {
  SceneDigest d = digest_for(TaskKind::Stir);
  d.entries.push_back({"stick_2", ObjectClass::Stick, "", {}});
  GroundingContext ctx = make_ctx(TaskKind::Stir, "stir the solution in beaker");
  ctx.observation_summary = render_scene_digest(d);
  ctx.avoid = {"stick"};

  auto s = rule_ground(ctx);
  REQUIRE(prim_lines(s) == std::vector<std::string>{"move to stick_2", "grasp 1",
                                                    "move to beaker", "stir", "grasp 0"});

  SECTION("no usable stirrer grounds to nothing") {
    ctx.avoid = {"stick", "stick_2"};
    REQUIRE(rule_ground(ctx).prims.empty());
  }
}

TEST_CASE("rule grounding of add") {
  auto s = rule_ground(make_ctx(TaskKind::Mix, "add reagent a to beaker"));
  REQUIRE(prim_lines(s) ==
          std::vector<std::string>{"move to cup_a", "grasp 1", "move to beaker", "pour",
                                   "move to bench", "grasp 0"});
}

TEST_CASE("rule grounding of wait is empty") {
  REQUIRE(rule_ground(make_ctx(TaskKind::Crystallize, "wait for crystallization")).prims.empty());
}

TEST_CASE("rule grounding of weigh") {
  auto s = rule_ground(make_ctx(TaskKind::Weigh, "weigh cup with the balance"));
  REQUIRE(prim_lines(s) ==
          std::vector<std::string>{"move to cup", "grasp 1", "move to balance", "grasp 0"});

  SECTION("skips when the container is already on the balance") {
    SceneDigest d = digest_for(TaskKind::Weigh);
    d.entries[0].station = kStationBalance;
    GroundingContext ctx = make_ctx(TaskKind::Weigh, "weigh cup with the balance");
    ctx.observation_summary = render_scene_digest(d);
    REQUIRE(rule_ground(ctx).prims.empty());
  }
}

TEST_CASE("rule grounding of shake") {
  auto s = rule_ground(make_ctx(TaskKind::Shake, "shake cup"));
  REQUIRE(prim_lines(s) ==
          std::vector<std::string>{"move to cup", "grasp 1", "move to shaker", "grasp 0"});

  SECTION("skips when already on the shaker") {
    SceneDigest d = digest_for(TaskKind::Shake);
    d.entries[0].station = kStationShaker;
    GroundingContext ctx = make_ctx(TaskKind::Shake, "shake cup");
    ctx.observation_summary = render_scene_digest(d);
    REQUIRE(rule_ground(ctx).prims.empty());
  }
}

TEST_CASE("unrecognized subtasks ground to the empty sequence") {
  GroundingContext ctx;
  ctx.subtask = parse_subtask(1, "calibrate the flux", nullptr);
  ctx.observation_summary = render_scene_digest(digest_for(TaskKind::Pour));
  REQUIRE_FALSE(ctx.subtask.verb_recognized);
  REQUIRE(rule_ground(ctx).prims.empty());
}

TEST_CASE("every canonical plan grounds to statically valid sequences") {
  for (TaskKind kind : all_template_tasks()) {
    TaskSpec spec = default_task_spec(kind);
    WorldSchema schema = task_schema(spec);
    std::string held;
    int index = 0;
    for (const auto& text : canonical_plan_texts(spec)) {
      INFO("task " << task_kind_name(kind) << " step: " << text);
      GroundingContext ctx;
      ctx.subtask = parse_subtask(++index, text, &schema);
      REQUIRE(ctx.subtask.verb_recognized);
      ctx.observation_summary = render_scene_digest(digest_for(kind, held));

      PrimitiveSeq seq = rule_ground(ctx);
      bool carrying =
          ctx.subtask.verb == Verb::Pick || ctx.subtask.verb == Verb::Pour;
      REQUIRE_NOTHROW(static_check(seq, !held.empty(), carrying));

      // thread the gripper state into the next step's scene
      std::string last_move;
      for (const auto& p : seq.prims) {
        if (p.kind == Primitive::Kind::Move) last_move = p.target;
        if (p.kind == Primitive::Kind::Grasp) held = p.engage ? last_move : "";
      }
    }
  }
}

TEST_CASE("backend grounding parses and checks the response") {
  GroundingContext ctx = make_ctx(TaskKind::Pour, "pick up cup");
  FunctionBackend be("rule", [&](const CompletionRequest&) {
    return render_primitives(rule_ground(ctx));
  });

  PrimitiveSeq seq = ground(ctx, be);
  REQUIRE(prim_lines(seq) == std::vector<std::string>{"move to cup", "grasp 1"});
  REQUIRE(seq.provenance == "pick up cup");
}

TEST_CASE("one repair round fixes a malformed response") {
  GroundingContext ctx = make_ctx(TaskKind::Pour, "pick up cup");
  std::vector<std::string> tags;
  FunctionBackend be("flaky", [&](const CompletionRequest& req) -> std::string {
    tags.push_back(req.tag);
    if (tags.size() == 1) return "flap the wings";
    REQUIRE(req.user.find("previous output was invalid") != std::string::npos);
    return "move to cup\ngrasp 1";
  });

  PrimitiveSeq seq = ground(ctx, be);
  REQUIRE(seq.prims.size() == 2);
  REQUIRE(tags == std::vector<std::string>{"grounder.ground", "grounder.repair"});
}

TEST_CASE("a statically invalid response also triggers repair") {
  GroundingContext ctx = make_ctx(TaskKind::Pour, "pour water into beaker", "cup");
  int calls = 0;
  FunctionBackend be("flaky", [&](const CompletionRequest&) -> std::string {
    return ++calls == 1 ? "pour\ngrasp 1" : "move to beaker\npour";
  });
  PrimitiveSeq seq = ground(ctx, be);
  REQUIRE(calls == 2);
  REQUIRE(prim_lines(seq) == std::vector<std::string>{"move to beaker", "pour"});
}

TEST_CASE("grounding fails after a failed repair round") {
  GroundingContext ctx = make_ctx(TaskKind::Pour, "pick up cup");
  FunctionBackend be("broken", [](const CompletionRequest&) { return "gibberish"; });
  REQUIRE_THROWS_AS(ground(ctx, be), GroundingFailed);
}

TEST_CASE("grounding rejects unknown verbs without consulting the backend") {
  GroundingContext ctx;
  ctx.subtask = parse_subtask(1, "defragment the bench", nullptr);
  ctx.observation_summary = render_scene_digest(digest_for(TaskKind::Pour));
  bool called = false;
  FunctionBackend be("unused", [&](const CompletionRequest&) {
    called = true;
    return "";
  });
  REQUIRE_THROWS_AS(ground(ctx, be), GroundingFailed);
  REQUIRE_FALSE(called);
}
