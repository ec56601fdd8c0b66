#include <catch2/catch_amalgamated.hpp>

#include "labrig/primitives.hpp"
#include "labrig/rng.hpp"

using namespace labrig;

namespace {

// generator that respects the state machine so produced sequences are valid
PrimitiveSeq random_seq(Rng& rng, bool& initially_engaged) {
  static const std::vector<std::string> targets = {"cuboid", "cup", "beaker", "petri dish",
                                                   "stick", "balance", "shaker"};
  initially_engaged = rng.uniform01() < 0.5;
  bool engaged = initially_engaged;
  PrimitiveSeq seq;
  int n = rng.uniform_int(1, 10);
  for (int i = 0; i < n; ++i) {
    switch (rng.uniform_int(0, 3)) {
      case 0: seq.prims.push_back(Primitive::move(targets[rng.index(targets.size())])); break;
      case 1:
        seq.prims.push_back(Primitive::grasp(!engaged));
        engaged = !engaged;
        break;
      case 2:
        if (engaged)
          seq.prims.push_back(Primitive::pour());
        else
          seq.prims.push_back(Primitive::move(targets[rng.index(targets.size())]));
        break;
      default:
        if (engaged)
          seq.prims.push_back(Primitive::stir());
        else
          seq.prims.push_back(Primitive::move(targets[rng.index(targets.size())]));
        break;
    }
  }
  return seq;
}

}  // namespace

TEST_CASE("'move to X and grasp 1' parses to two primitives") {
  auto seq = parse_primitives("move to cuboid and grasp 1");
  REQUIRE(seq.prims.size() == 2);
  CHECK(seq.prims[0] == Primitive::move("cuboid"));
  CHECK(seq.prims[1] == Primitive::grasp(true));
}

TEST_CASE("single grasp release parses") {
  auto seq = parse_primitives("grasp 0");
  REQUIRE(seq.prims.size() == 1);
  CHECK(seq.prims[0] == Primitive::grasp(false));
}

TEST_CASE("keywords are case-insensitive, ids verbatim") {
  auto seq = parse_primitives("MOVE TO Petri Dish\nGrasp 1\nPOUR");
  REQUIRE(seq.prims.size() == 3);
  CHECK(seq.prims[0].target == "Petri Dish");
  CHECK(seq.prims[1].engage);
  CHECK(seq.prims[2].kind == Primitive::Kind::Pour);
}

TEST_CASE("newline and 'and' separators mix freely") {
  auto seq = parse_primitives("move to stick and grasp 1\nmove to beaker and stir and grasp 0");
  REQUIRE(seq.prims.size() == 5);
  CHECK(seq.prims[3].kind == Primitive::Kind::Stir);
  CHECK(seq.prims[4] == Primitive::grasp(false));
}

TEST_CASE("syntax errors carry line and column") {
  try {
    parse_primitives("move to cup\nfling beaker");
    FAIL("expected SyntaxError");
  } catch (const SyntaxError& e) {
    CHECK(e.line == 2);
    CHECK(e.column == 1);
  }
  CHECK_THROWS_AS(parse_primitives("grasp 2"), SyntaxError);
  CHECK_THROWS_AS(parse_primitives("move cuboid"), SyntaxError);
  CHECK_THROWS_AS(parse_primitives("move to"), SyntaxError);
  CHECK_THROWS_AS(parse_primitives("pour and"), SyntaxError);
  CHECK_THROWS_AS(parse_primitives("and pour"), SyntaxError);
}

TEST_CASE("parse rejects sequences invalid under every entry state") {
  CHECK_THROWS_AS(parse_primitives("grasp 1 and grasp 1"), StaticCheckError);
  CHECK_THROWS_AS(parse_primitives("grasp 0\ngrasp 0"), StaticCheckError);
  CHECK_THROWS_AS(parse_primitives("grasp 0 and pour"), StaticCheckError);
  CHECK_THROWS_AS(parse_primitives("grasp 0 and stir"), StaticCheckError);
  // pour with no grasp in sight is allowed at parse time (context may engage)
  CHECK_NOTHROW(parse_primitives("move to beaker and pour"));
}

TEST_CASE("context-full static check enforces gripper discipline") {
  auto pick = parse_primitives("move to cuboid and grasp 1");
  CHECK_NOTHROW(static_check(pick, false, /*carrying=*/true));
  CHECK_THROWS_AS(static_check(pick, false, false), StaticCheckError);  // ends engaged, not carrying
  CHECK_THROWS_AS(static_check(pick, true, true), StaticCheckError);    // grasp 1 while engaged

  auto pour = parse_primitives("move to beaker and pour");
  CHECK_NOTHROW(static_check(pour, true));
  CHECK_THROWS_AS(static_check(pour, false), StaticCheckError);  // pour disengaged

  auto place = parse_primitives("move to petri dish and grasp 0");
  CHECK_NOTHROW(static_check(place, true));
  CHECK_THROWS_AS(static_check(place, false), StaticCheckError);
}

TEST_CASE("render emits one primitive per line") {
  PrimitiveSeq seq;
  seq.prims = {Primitive::move("beaker"), Primitive::pour()};
  CHECK(render_primitives(seq) == "move to beaker\npour");
  CHECK(render_primitives(PrimitiveSeq{}).empty());
}

TEST_CASE("parse-render round trip over generated sequences") {
  Rng rng(777001);
  for (int trial = 0; trial < 2000; ++trial) {
    bool initially_engaged = false;
    PrimitiveSeq seq = random_seq(rng, initially_engaged);
    std::string text = render_primitives(seq);
    PrimitiveSeq back = parse_primitives(text);
    REQUIRE(back == seq);
    CHECK(render_primitives(back) == text);
    CHECK_NOTHROW(static_check(back, initially_engaged, /*carrying=*/true));
  }
}
