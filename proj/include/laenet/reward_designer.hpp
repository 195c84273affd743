#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "laenet/ppo.hpp"
#include "laenet/reward_dsl.hpp"
#include "laenet/scenario.hpp"

namespace laenet {

// Grammar summary embedded into prompts; the full document ships in
// docs/reward_dsl.md.
inline constexpr const char* kDslGrammarText = R"(Reward expression language:
  per-user vectors : backlog, rate, transmitted, dist_to, delta_dist_to
  scalars          : slot, slot_len, num_users
  indexing         : v[i] selects user i (0-based); argmax(v) gives an index
  reducers         : sum(v), mean(v), max(v), min(v), var_q(v, q) with q in (0,1)
  elementwise      : min(a, b), max(a, b), clamp(x, lo, hi), indicator(x)
  arithmetic       : + - * /, unary minus, comparisons < <= > >= == (yield 0/1)
  Example: -var_q(backlog, 0.9) + 1e-6*sum(min(backlog, rate*slot_len))
           + 0.001*delta_dist_to(argmax(backlog))
Expressions must evaluate to a scalar. No loops, no assignments, no
identifiers beyond the list above.)";

struct ChatMessage {
  std::string role;
  std::string content;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
  virtual int call_count() const = 0;
};

class ClientError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Canned responses, consumed in order. The test-suite default.
class MockChatClient : public ChatClient {
 public:
  explicit MockChatClient(std::vector<std::string> responses)
      : responses_(std::move(responses)) {}

  static MockChatClient from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ClientError("cannot open mock transcript: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const Json j = Json::parse(ss.str());
    std::vector<std::string> responses;
    for (const auto& r : j) responses.push_back(r.get<std::string>());
    return MockChatClient(std::move(responses));
  }

  std::string complete(const std::vector<ChatMessage>&) override {
    ++calls_;
    if (next_ >= responses_.size()) throw ClientError("mock transcript exhausted");
    return responses_[next_++];
  }

  int call_count() const override { return calls_; }

 private:
  std::vector<std::string> responses_;
  std::size_t next_ = 0;
  int calls_ = 0;
};

struct PromptBundle {
  std::string role_text;
  std::string task_text;
  std::string requirements_text;
  std::string code_snippets;

  std::vector<ChatMessage> messages() const {
    return {{"system", role_text},
            {"user", task_text + "\n\n" + requirements_text + "\n\n" + code_snippets}};
  }
};

struct Candidate {
  int id = 0;
  std::string name;
  std::string program_text;
  bool valid = false;
  std::string diagnostic;
  int round = 0;
  std::optional<int> parent_id;
};

struct ScoreRecord {
  int candidate_id = 0;
  double score = -std::numeric_limits<double>::infinity();  // higher is better
  bool valid = false;
  int episodes_used = 0;
};

struct EvalBudget {
  int train_episodes = 40;
  int eval_episodes = 3;
  std::vector<std::uint64_t> seeds = {1, 2};
  int steps_per_update = 256;
};

struct DesignerConfig {
  int candidates_per_round = 4;  // K
  int rounds = 3;
  int top_m = 3;
  EvalBudget budget;
  std::string human_notes;  // optional free text
};

struct DesignRound {
  std::vector<ChatMessage> prompt;
  std::vector<std::string> responses;  // includes any retry
  std::vector<Candidate> candidates;
  std::vector<ScoreRecord> scores;
};

struct DesignTranscript {
  std::vector<DesignRound> rounds;
  std::optional<int> selected_id;
  std::string selected_program;
};

// ---- prompt assembly -----------------------------------------------------

inline PromptBundle build_prompt(const Scenario& sc, const std::string& round_feedback = "") {
  PromptBundle b;
  b.role_text =
      "You are an expert in reward design for reinforcement learning. You write reward "
      "functions as expressions in a small domain-specific language and respond only with a "
      "JSON array of objects {\"name\": string, \"rationale\": string, \"program\": string}. "
      "Do not assume any information beyond what is given.";
  std::ostringstream task;
  task << "A UAV serves " << sc.users.size()
       << " ground users over a slotted horizon of " << sc.phys.horizon_slots << " slots of "
       << sc.phys.slot_len_s
       << " s. Each user has a fixed uplink payload (backlog, bits) that drains at a "
          "distance-dependent rate. The objective is to minimize the maximum per-user total "
          "latency (upload + inference + downlink). The policy controls per-slot UAV movement "
          "only; resolutions and powers are fixed upstream. Design per-step reward functions "
          "that guide the UAV to minimize the worst-case latency.";
  b.task_text = task.str();
  b.requirements_text =
      std::string("Requirements:\n") + kDslGrammarText +
      "\nPrioritize the most relevant factors; prefer simple expressions. Backlogs are in "
      "bits (up to ~5e7), rates in bits/s (~1e6-1e7), distances in meters (~1000).";
  if (!round_feedback.empty())
    b.requirements_text += "\n\nFeedback from the previous round:\n" + round_feedback;
  b.code_snippets =
      "State features per user: relative position (m), resolution, transmit power, channel "
      "gain, remaining backlog. Action: (dx, dy, dz) movement per slot, clamped to speed and "
      "altitude limits.";
  return b;
}

// ---- response parsing ----------------------------------------------------

namespace detail {

struct ExtractedProgram {
  std::string name;
  std::string program;
  std::optional<int> parent;
};

inline std::vector<ExtractedProgram> extract_programs(const std::string& response) {
  std::vector<ExtractedProgram> out;
  try {
    const Json j = Json::parse(response);
    if (j.is_array()) {
      for (const auto& e : j) {
        if (e.is_object() && e.contains("program")) {
          ExtractedProgram p{e.value("name", ""), e["program"].get<std::string>(), {}};
          if (e.contains("parent") && e["parent"].is_number_integer())
            p.parent = e["parent"].get<int>();
          out.push_back(std::move(p));
        }
      }
      if (!out.empty()) return out;
    }
  } catch (const nlohmann::json::parse_error&) {
    // fall through to fenced-block extraction
  }
  std::size_t pos = 0;
  while ((pos = response.find("```", pos)) != std::string::npos) {
    std::size_t start = response.find('\n', pos);
    if (start == std::string::npos) break;
    ++start;
    const std::size_t end = response.find("```", start);
    if (end == std::string::npos) break;
    std::string body = response.substr(start, end - start);
    while (!body.empty() && (body.back() == '\n' || body.back() == ' ')) body.pop_back();
    if (!body.empty()) out.push_back({"", body, {}});
    pos = end + 3;
  }
  return out;
}

}  // namespace detail

inline std::vector<Candidate> parse_candidates(const std::string& response, int max_k,
                                               int round, int& next_id) {
  std::vector<Candidate> out;
  for (const auto& p : detail::extract_programs(response)) {
    if (static_cast<int>(out.size()) >= max_k) break;
    Candidate c;
    c.id = next_id++;
    c.name = p.name;
    c.program_text = p.program;
    c.round = round;
    c.parent_id = p.parent;
    try {
      (void)dsl::RewardProgram::parse(p.program);
      c.valid = true;
    } catch (const dsl::ParseError& e) {
      c.valid = false;
      c.diagnostic = e.what();
    }
    out.push_back(std::move(c));
  }
  return out;
}

// One generation call with a single retry if nothing parses.
inline std::vector<Candidate> generate_candidates(const PromptBundle& bundle, ChatClient& client,
                                                  int k, int round, int& next_id,
                                                  DesignRound& record) {
  record.prompt = bundle.messages();
  std::string response = client.complete(record.prompt);
  record.responses.push_back(response);
  std::vector<Candidate> cands = parse_candidates(response, k, round, next_id);
  const bool any_valid =
      std::any_of(cands.begin(), cands.end(), [](const Candidate& c) { return c.valid; });
  if (!any_valid) {
    response = client.complete(record.prompt);
    record.responses.push_back(response);
    cands = parse_candidates(response, k, round, next_id);
    if (std::none_of(cands.begin(), cands.end(), [](const Candidate& c) { return c.valid; }))
      throw ClientError("no valid candidates after retry");
  }
  return cands;
}

// Train a fresh policy per candidate and score it by negated mean
// max-latency; any runtime failure invalidates the candidate only.
inline std::vector<ScoreRecord> evaluate_candidates(const std::vector<Candidate>& candidates,
                                                    const Scenario& sc, const ArpoSolution& sol,
                                                    const EvalBudget& budget) {
  std::vector<ScoreRecord> out;
  for (const auto& c : candidates) {
    ScoreRecord rec;
    rec.candidate_id = c.id;
    if (!c.valid) {
      out.push_back(rec);
      continue;
    }
    try {
      const auto program = std::make_shared<dsl::RewardProgram>(
          dsl::RewardProgram::parse(c.program_text));
      double sum = 0.0;
      int runs = 0;
      for (std::uint64_t seed : budget.seeds) {
        TrainConfig cfg;
        cfg.total_episodes = budget.train_episodes;
        cfg.steps_per_update = budget.steps_per_update;
        cfg.seed = seed;
        TrainResult tr = train(sc, sol,
                               [program](const RewardContext& ctx) {
                                 return program->evaluate(ctx);
                               },
                               cfg);
        for (int e = 0; e < budget.eval_episodes; ++e) {
          Env env(sc, sol, seed * 1000 + static_cast<std::uint64_t>(e));
          const Policy pol = policy_of(tr.policy, env);
          run_episode(env, pol);
          sum += episode_latency(env).max_s;
          ++runs;
        }
        rec.episodes_used += budget.train_episodes + budget.eval_episodes;
      }
      rec.score = -sum / runs;
      rec.valid = true;
    } catch (const std::exception& e) {
      rec.valid = false;
      rec.score = -std::numeric_limits<double>::infinity();
    }
    out.push_back(rec);
  }
  return out;
}

inline std::string score_feedback(const std::vector<Candidate>& candidates,
                                  const std::vector<ScoreRecord>& scores, int top_m,
                                  const std::string& human_notes) {
  // top-m valid candidates by score, ties to lowest id
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i].valid) idx.push_back(i);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a].score != scores[b].score) return scores[a].score > scores[b].score;
    return scores[a].candidate_id < scores[b].candidate_id;
  });
  if (static_cast<int>(idx.size()) > top_m) idx.resize(top_m);
  std::ostringstream fb;
  fb << "Scores (higher is better; score = -mean worst-case latency in seconds):\n";
  for (const auto& s : scores) {
    fb << "  candidate " << s.candidate_id << ": "
       << (s.valid ? std::to_string(s.score) : "invalid") << "\n";
  }
  fb << "Top candidates to refine:\n";
  for (std::size_t i : idx)
    fb << "  [" << candidates[i].id << "] " << candidates[i].program_text << "\n";
  if (!human_notes.empty()) fb << "Human insights:\n" << human_notes << "\n";
  return fb.str();
}

// ---- transcript persistence ----------------------------------------------

inline Json transcript_to_json(const DesignTranscript& t) {
  Json j;
  j["rounds"] = Json::array();
  for (const auto& r : t.rounds) {
    Json jr;
    jr["prompt"] = Json::array();
    for (const auto& m : r.prompt) jr["prompt"].push_back({{"role", m.role}, {"content", m.content}});
    jr["responses"] = r.responses;
    jr["candidates"] = Json::array();
    for (const auto& c : r.candidates) {
      Json jc{{"id", c.id},         {"name", c.name},   {"program", c.program_text},
              {"valid", c.valid},   {"round", c.round}, {"diagnostic", c.diagnostic}};
      if (c.parent_id) jc["parent_id"] = *c.parent_id;
      jr["candidates"].push_back(jc);
    }
    jr["scores"] = Json::array();
    for (const auto& s : r.scores) {
      jr["scores"].push_back({{"candidate_id", s.candidate_id},
                              {"score", s.valid ? Json(s.score) : Json()},
                              {"valid", s.valid},
                              {"episodes_used", s.episodes_used}});
    }
    j["rounds"].push_back(jr);
  }
  if (t.selected_id) j["selected_id"] = *t.selected_id;
  j["selected_program"] = t.selected_program;
  return j;
}

inline DesignTranscript transcript_from_json(const Json& j) {
  DesignTranscript t;
  for (const auto& jr : j.at("rounds")) {
    DesignRound r;
    for (const auto& m : jr.value("prompt", Json::array()))
      r.prompt.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
    for (const auto& s : jr.value("responses", Json::array()))
      r.responses.push_back(s.get<std::string>());
    for (const auto& jc : jr.at("candidates")) {
      Candidate c;
      c.id = jc.at("id").get<int>();
      c.name = jc.value("name", "");
      c.program_text = jc.at("program").get<std::string>();
      c.valid = jc.at("valid").get<bool>();
      c.round = jc.value("round", 0);
      c.diagnostic = jc.value("diagnostic", "");
      if (jc.contains("parent_id")) c.parent_id = jc["parent_id"].get<int>();
      r.candidates.push_back(std::move(c));
    }
    for (const auto& js : jr.at("scores")) {
      ScoreRecord s;
      s.candidate_id = js.at("candidate_id").get<int>();
      s.valid = js.at("valid").get<bool>();
      if (s.valid) s.score = js.at("score").get<double>();
      s.episodes_used = js.value("episodes_used", 0);
      r.scores.push_back(s);
    }
    t.rounds.push_back(std::move(r));
  }
  if (j.contains("selected_id")) t.selected_id = j["selected_id"].get<int>();
  t.selected_program = j.value("selected_program", "");
  return t;
}

// argmax over every recorded score; ties to the lowest candidate id.
inline std::optional<int> select_best(const DesignTranscript& t, std::string* program_out) {
  std::optional<int> best_id;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& r : t.rounds) {
    for (const auto& s : r.scores) {
      if (!s.valid) continue;
      if (s.score > best_score ||
          (s.score == best_score && (!best_id || s.candidate_id < *best_id))) {
        best_score = s.score;
        best_id = s.candidate_id;
      }
    }
  }
  if (best_id && program_out) {
    for (const auto& r : t.rounds)
      for (const auto& c : r.candidates)
        if (c.id == *best_id) *program_out = c.program_text;
  }
  return best_id;
}

struct DesignResult {
  std::optional<Candidate> best;
  DesignTranscript transcript;
};

// Full offline loop: generate, evaluate, then refine/evaluate per round.
// If `partial_out` is given it tracks progress, so the caller can persist
// the transcript accumulated so far even when a client error aborts.
inline DesignResult design(const Scenario& sc, const ArpoSolution& sol, ChatClient& client,
                           const DesignerConfig& cfg, DesignTranscript* partial_out = nullptr) {
  if (cfg.rounds < 1) throw std::invalid_argument("rounds must be >= 1");
  DesignResult result;
  DesignTranscript local;
  DesignTranscript& t = partial_out ? *partial_out : local;
  t = DesignTranscript{};
  int next_id = 0;
  std::vector<Candidate> all_candidates;

  for (int round = 0; round < cfg.rounds; ++round) {
    DesignRound rec;
    std::string feedback;
    if (round > 0)
      feedback = score_feedback(t.rounds.back().candidates, t.rounds.back().scores, cfg.top_m,
                                cfg.human_notes);
    const PromptBundle bundle = build_prompt(sc, feedback);
    std::vector<Candidate> cands;
    try {
      cands = generate_candidates(bundle, client, cfg.candidates_per_round, round, next_id, rec);
    } catch (const ClientError&) {
      t.rounds.push_back(std::move(rec));
      throw;
    }
    rec.candidates = cands;
    rec.scores = evaluate_candidates(cands, sc, sol, cfg.budget);
    t.rounds.push_back(std::move(rec));
    for (auto& c : cands) all_candidates.push_back(std::move(c));
  }

  std::string program;
  t.selected_id = select_best(t, &program);
  t.selected_program = program;
  if (t.selected_id) {
    for (const auto& c : all_candidates)
      if (c.id == *t.selected_id) result.best = c;
  }
  result.transcript = t;
  return result;
}

}  // namespace laenet
