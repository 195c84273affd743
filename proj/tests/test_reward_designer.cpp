#include <catch2/catch_amalgamated.hpp>

#include "laenet/reward_designer.hpp"

using namespace laenet;

namespace {

// One user right under the start pose: episodes finish in a step or two, so
// designer runs stay cheap.
Scenario tiny_scenario() {
  Scenario s;
  s.users = {{0, {0.0, 0.0, 0.0}, 1, 0.0, 1e6, 0.1}};
  s.uav_start = {0.0, 0.0, 100.0};
  s.phys.horizon_slots = 5;
  return s;
}

EvalBudget tiny_budget() {
  EvalBudget b;
  b.train_episodes = 2;
  b.eval_episodes = 1;
  b.seeds = {1};
  b.steps_per_update = 8;
  return b;
}

const std::string kRound1 =
    R"json([{"name": "tail", "rationale": "penalize worst backlog", "program": "-max(backlog)"},
        {"name": "broken", "rationale": "oops", "program": "frob(backlog)"},
        {"name": "sum", "rationale": "total backlog", "program": "-sum(backlog)/1e6"}])json";

const std::string kRound2 =
    R"json([{"name": "tail-scaled", "rationale": "refined", "program": "-max(backlog)/1e6",
         "parent": 0}])json";

}  // namespace

TEST_CASE("extract_programs") {
  SECTION("json array with optional parent") {
    const auto progs = detail::extract_programs(kRound2);
    REQUIRE(progs.size() == 1);
    CHECK(progs[0].name == "tail-scaled");
    CHECK(progs[0].program == "-max(backlog)/1e6");
    REQUIRE(progs[0].parent.has_value());
    CHECK(*progs[0].parent == 0);
    CHECK_FALSE(detail::extract_programs(kRound1)[0].parent.has_value());
  }
  SECTION("fenced blocks as fallback") {
    const std::string text =
        "Here are two ideas:\n```\n-max(backlog)\n```\nand\n```text\nsum(rate)\n```\ndone";
    const auto progs = detail::extract_programs(text);
    REQUIRE(progs.size() == 2);
    CHECK(progs[0].program == "-max(backlog)");
    CHECK(progs[1].program == "sum(rate)");
  }
  SECTION("garbage yields nothing") {
    CHECK(detail::extract_programs("I cannot help with that.").empty());
    CHECK(detail::extract_programs("{\"program\": \"x\"}").empty());  // object, not array
  }
}

TEST_CASE("parse_candidates validates and caps") {
  int next_id = 5;
  const auto cands = parse_candidates(kRound1, 2, 0, next_id);
  REQUIRE(cands.size() == 2);  // capped at K=2
  CHECK(next_id == 7);
  CHECK(cands[0].id == 5);
  CHECK(cands[0].valid);
  CHECK(cands[0].round == 0);
  CHECK_FALSE(cands[1].valid);
  CHECK_THAT(cands[1].diagnostic, Catch::Matchers::ContainsSubstring("frob"));
}

TEST_CASE("generate_candidates retries once") {
  const PromptBundle bundle = build_prompt(tiny_scenario());
  int next_id = 0;
  DesignRound rec;
  SECTION("garbage then valid uses two calls") {
    MockChatClient client({"no programs here", kRound1});
    const auto cands = generate_candidates(bundle, client, 4, 0, next_id, rec);
    CHECK(client.call_count() == 2);
    CHECK(rec.responses.size() == 2);
    REQUIRE(cands.size() == 3);
    CHECK(cands[0].valid);
  }
  SECTION("garbage twice aborts") {
    MockChatClient client({"nope", "still nope"});
    CHECK_THROWS_AS(generate_candidates(bundle, client, 4, 0, next_id, rec), ClientError);
    CHECK(client.call_count() == 2);
    CHECK(rec.responses.size() == 2);
  }
  SECTION("exhausted mock is a ClientError") {
    MockChatClient client({});
    CHECK_THROWS_AS(generate_candidates(bundle, client, 4, 0, next_id, rec), ClientError);
  }
}

TEST_CASE("evaluate_candidates scores valid programs and isolates failures") {
  const Scenario sc = tiny_scenario();
  const ArpoSolution sol = arpo_solve(make_instance(sc));
  int next_id = 0;
  // third candidate parses but always fails at evaluation (index 5 of 1 user)
  const std::string resp =
      R"json([{"name": "a", "program": "-max(backlog)"},
          {"name": "b", "program": "frob(q)"},
          {"name": "c", "program": "backlog[5]"}])json";
  const auto cands = parse_candidates(resp, 4, 0, next_id);
  const auto scores = evaluate_candidates(cands, sc, sol, tiny_budget());
  REQUIRE(scores.size() == 3);
  CHECK(scores[0].valid);
  CHECK(scores[0].score > -1e9);
  CHECK(scores[0].score < 0.0);  // negated latency
  CHECK(scores[0].episodes_used == 3);
  CHECK_FALSE(scores[1].valid);
  CHECK_FALSE(scores[2].valid);
  CHECK(scores[2].score == -std::numeric_limits<double>::infinity());

  SECTION("scoring is deterministic") {
    const auto again = evaluate_candidates(cands, sc, sol, tiny_budget());
    CHECK(again[0].score == scores[0].score);
  }
}

TEST_CASE("full design loop over a mock client") {
  const Scenario sc = tiny_scenario();
  const ArpoSolution sol = arpo_solve(make_instance(sc));
  DesignerConfig cfg;
  cfg.candidates_per_round = 4;
  cfg.rounds = 2;
  cfg.top_m = 2;
  cfg.budget = tiny_budget();
  cfg.human_notes = "prefer scale-free rewards";

  MockChatClient client({kRound1, kRound2});
  const DesignResult res = design(sc, sol, client, cfg);

  CHECK(client.call_count() == 2);  // strictly offline, one call per round
  REQUIRE(res.transcript.rounds.size() == 2);
  CHECK(res.transcript.rounds[0].candidates.size() == 3);
  CHECK(res.transcript.rounds[1].candidates.size() == 1);
  CHECK(res.transcript.rounds[1].candidates[0].parent_id == 0);
  CHECK(res.transcript.rounds[1].candidates[0].id == 3);  // ids keep counting

  SECTION("round-2 prompt carries scores and human insights") {
    const std::string& user_msg = res.transcript.rounds[1].prompt.at(1).content;
    CHECK_THAT(user_msg, Catch::Matchers::ContainsSubstring("Scores"));
    CHECK_THAT(user_msg, Catch::Matchers::ContainsSubstring("candidate 0"));
    CHECK_THAT(user_msg, Catch::Matchers::ContainsSubstring("prefer scale-free rewards"));
    CHECK_THAT(user_msg, Catch::Matchers::ContainsSubstring("invalid"));
  }

  SECTION("selection is the argmax over all rounds") {
    REQUIRE(res.best.has_value());
    REQUIRE(res.transcript.selected_id.has_value());
    double best_score = -std::numeric_limits<double>::infinity();
    int best_id = -1;
    for (const auto& r : res.transcript.rounds)
      for (const auto& s : r.scores)
        if (s.valid && s.score > best_score) {
          best_score = s.score;
          best_id = s.candidate_id;
        }
    CHECK(*res.transcript.selected_id == best_id);
    CHECK(res.best->id == best_id);
    CHECK(res.transcript.selected_program == res.best->program_text);
  }

  SECTION("repeat run is identical") {
    MockChatClient client2({kRound1, kRound2});
    const DesignResult res2 = design(sc, sol, client2, cfg);
    CHECK(res2.transcript.selected_id == res.transcript.selected_id);
    REQUIRE(res2.transcript.rounds.size() == 2);
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t i = 0; i < res.transcript.rounds[r].scores.size(); ++i)
        CHECK(res2.transcript.rounds[r].scores[i].score ==
              res.transcript.rounds[r].scores[i].score);
  }

  SECTION("transcript round-trips through json and replays the selection") {
    const Json j = transcript_to_json(res.transcript);
    const DesignTranscript back = transcript_from_json(j);
    REQUIRE(back.rounds.size() == 2);
    CHECK(back.rounds[0].candidates[0].program_text ==
          res.transcript.rounds[0].candidates[0].program_text);
    CHECK(back.rounds[1].candidates[0].parent_id == 0);
    std::string program;
    const auto replayed = select_best(back, &program);
    CHECK(replayed == res.transcript.selected_id);
    CHECK(program == res.transcript.selected_program);
    CHECK(transcript_to_json(back).dump(2) == j.dump(2));
  }
}

TEST_CASE("design edge cases") {
  const Scenario sc = tiny_scenario();
  const ArpoSolution sol = arpo_solve(make_instance(sc));
  DesignerConfig cfg;
  cfg.rounds = 1;
  cfg.budget = tiny_budget();

  SECTION("single round never sends feedback") {
    MockChatClient client({kRound1});
    const DesignResult res = design(sc, sol, client, cfg);
    CHECK(client.call_count() == 1);
    CHECK_THAT(res.transcript.rounds[0].prompt.at(1).content,
               !Catch::Matchers::ContainsSubstring("Feedback"));
    CHECK(res.best.has_value());
  }
  SECTION("zero rounds is rejected") {
    cfg.rounds = 0;
    MockChatClient client({});
    CHECK_THROWS_AS(design(sc, sol, client, cfg), std::invalid_argument);
  }
  SECTION("persistent garbage aborts the loop") {
    cfg.rounds = 2;
    MockChatClient client({"nope", "nope", "nope"});
    CHECK_THROWS_AS(design(sc, sol, client, cfg), ClientError);
  }
}
