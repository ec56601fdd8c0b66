#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "labrig/common.hpp"

namespace labrig {

struct Primitive {
  enum class Kind { Move, Grasp, Pour, Stir };
  Kind kind = Kind::Move;
  std::string target;   // Move
  bool engage = false;  // Grasp

  static Primitive move(std::string target) { return {Kind::Move, std::move(target), false}; }
  static Primitive grasp(bool engage) { return {Kind::Grasp, "", engage}; }
  static Primitive pour() { return {Kind::Pour, "", false}; }
  static Primitive stir() { return {Kind::Stir, "", false}; }

  bool operator==(const Primitive& o) const {
    return kind == o.kind && target == o.target && engage == o.engage;
  }
};

struct PrimitiveSeq {
  std::vector<Primitive> prims;
  std::string provenance;  // which subtask produced it

  bool operator==(const PrimitiveSeq& o) const { return prims == o.prims; }
};

struct SyntaxError : std::runtime_error {
  SyntaxError(int line, int column, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ", col " + std::to_string(column) +
                           ": " + msg),
        line(line),
        column(column) {}
  int line, column;
};

struct StaticCheckError : std::runtime_error {
  explicit StaticCheckError(const std::string& msg) : std::runtime_error(msg) {}
};

// Context-full validity: the caller knows the gripper state entering the
// sequence and whether the subtask hands the object to the next one.
inline void static_check(const PrimitiveSeq& seq, bool initially_engaged,
                         bool carrying_subtask = false) {
  bool engaged = initially_engaged;
  const bool started_disengaged = !initially_engaged;
  for (size_t i = 0; i < seq.prims.size(); ++i) {
    const Primitive& p = seq.prims[i];
    switch (p.kind) {
      case Primitive::Kind::Grasp:
        if (p.engage == engaged)
          throw StaticCheckError("grasp " + std::string(p.engage ? "1" : "0") +
                                 " repeats the current gripper state at primitive " +
                                 std::to_string(i + 1));
        engaged = p.engage;
        break;
      case Primitive::Kind::Pour:
      case Primitive::Kind::Stir:
        if (!engaged)
          throw StaticCheckError(std::string(p.kind == Primitive::Kind::Pour ? "pour" : "stir") +
                                 " at primitive " + std::to_string(i + 1) +
                                 " requires an engaged gripper");
        break;
      case Primitive::Kind::Move:
        if (p.target.empty()) throw StaticCheckError("move with empty target");
        break;
    }
  }
  if (started_disengaged && !carrying_subtask && engaged)
    throw StaticCheckError("non-carrying sequence ends with the gripper engaged");
}

namespace detail {

// Context-free subset used at parse time: only flags what is invalid under
// every possible entry state.
inline void partial_static_check(const PrimitiveSeq& seq) {
  std::optional<bool> engaged;
  for (size_t i = 0; i < seq.prims.size(); ++i) {
    const Primitive& p = seq.prims[i];
    switch (p.kind) {
      case Primitive::Kind::Grasp:
        if (engaged.has_value() && *engaged == p.engage)
          throw StaticCheckError("consecutive identical grasp states at primitive " +
                                 std::to_string(i + 1));
        engaged = p.engage;
        break;
      case Primitive::Kind::Pour:
      case Primitive::Kind::Stir:
        if (engaged.has_value() && !*engaged)
          throw StaticCheckError(std::string(p.kind == Primitive::Kind::Pour ? "pour" : "stir") +
                                 " after grasp 0 at primitive " + std::to_string(i + 1));
        break;
      case Primitive::Kind::Move:
        if (p.target.empty()) throw StaticCheckError("move with empty target");
        break;
    }
  }
}

}  // namespace detail

inline PrimitiveSeq parse_primitives(const std::string& text) {
  PrimitiveSeq seq;
  auto lines = split_lines(text);
  for (size_t li = 0; li < lines.size(); ++li) {
    const std::string& line = lines[li];
    // tokenize, remembering column of each token
    std::vector<std::pair<std::string, int>> toks;
    size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
      if (pos >= line.size()) break;
      size_t start = pos;
      while (pos < line.size() && !std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
      toks.emplace_back(line.substr(start, pos - start), static_cast<int>(start) + 1);
    }
    size_t t = 0;
    int line_no = static_cast<int>(li) + 1;
    bool expect_statement = false;  // set after "and"
    while (t < toks.size()) {
      std::string kw = to_lower(toks[t].first);
      int col = toks[t].second;
      if (kw == "and") {
        if (seq.prims.empty() || expect_statement)
          throw SyntaxError(line_no, col, "dangling 'and'");
        expect_statement = true;
        ++t;
        continue;
      }
      expect_statement = false;
      if (kw == "move") {
        ++t;
        if (t >= toks.size() || to_lower(toks[t].first) != "to")
          throw SyntaxError(line_no, col, "expected 'to' after 'move'");
        ++t;
        std::vector<std::string> id_words;
        while (t < toks.size() && to_lower(toks[t].first) != "and") {
          id_words.push_back(toks[t].first);
          ++t;
        }
        if (id_words.empty()) throw SyntaxError(line_no, col, "missing move target");
        seq.prims.push_back(Primitive::move(join(id_words, " ")));
      } else if (kw == "grasp") {
        ++t;
        if (t >= toks.size() || (toks[t].first != "1" && toks[t].first != "0"))
          throw SyntaxError(line_no, col, "expected '1' or '0' after 'grasp'");
        seq.prims.push_back(Primitive::grasp(toks[t].first == "1"));
        ++t;
      } else if (kw == "pour") {
        seq.prims.push_back(Primitive::pour());
        ++t;
      } else if (kw == "stir") {
        seq.prims.push_back(Primitive::stir());
        ++t;
      } else {
        throw SyntaxError(line_no, col, "unknown primitive '" + toks[t].first + "'");
      }
    }
    if (expect_statement) throw SyntaxError(line_no, static_cast<int>(line.size()), "dangling 'and'");
  }
  detail::partial_static_check(seq);
  return seq;
}

inline std::string render_primitives(const PrimitiveSeq& seq) {
  std::vector<std::string> lines;
  lines.reserve(seq.prims.size());
  for (const auto& p : seq.prims) {
    switch (p.kind) {
      case Primitive::Kind::Move:  lines.push_back("move to " + p.target); break;
      case Primitive::Kind::Grasp: lines.push_back(p.engage ? "grasp 1" : "grasp 0"); break;
      case Primitive::Kind::Pour:  lines.push_back("pour"); break;
      case Primitive::Kind::Stir:  lines.push_back("stir"); break;
    }
  }
  return join(lines, "\n");
}

}  // namespace labrig
