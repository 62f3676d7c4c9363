#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "shaker/perception.hpp"
#include "shaker/plan.hpp"
#include "shaker/recipe_corpus.hpp"
#include "shaker/reconciliation.hpp"
#include "shaker/sim.hpp"

namespace shaker {

enum class SessionState {
  kOrdered,
  kRetrieved,
  kReconciling,
  kAwaitingUser,
  kResolved,
  kCompiled,
  kExecuting,
  kServed,
  kFailed,
  kAborted,
};

inline constexpr SessionState kAllSessionStates[] = {
    SessionState::kOrdered,   SessionState::kRetrieved, SessionState::kReconciling,
    SessionState::kAwaitingUser, SessionState::kResolved, SessionState::kCompiled,
    SessionState::kExecuting, SessionState::kServed,    SessionState::kFailed,
    SessionState::kAborted,
};

std::string_view to_string(SessionState state);
std::optional<SessionState> session_state_from_string(std::string_view name);
bool is_terminal(SessionState state);

enum class StimulusKind { kRetrieve, kReconcile, kEvaluate, kAnswer, kCompile, kExecute, kFinish, kAbort };

inline constexpr StimulusKind kAllStimulusKinds[] = {
    StimulusKind::kRetrieve, StimulusKind::kReconcile, StimulusKind::kEvaluate,
    StimulusKind::kAnswer,   StimulusKind::kCompile,   StimulusKind::kExecute,
    StimulusKind::kFinish,   StimulusKind::kAbort,
};

std::string_view to_string(StimulusKind kind);

struct Stimulus {
  StimulusKind kind;
  std::string anomaly_id;  // kAnswer only
  std::string choice;      // kAnswer only

  static Stimulus of(StimulusKind kind) { return {kind, {}, {}}; }
  static Stimulus answer(std::string anomaly_id, std::string choice) {
    return {StimulusKind::kAnswer, std::move(anomaly_id), std::move(choice)};
  }
};

// The declared machine: states reachable from `from` under `stimulus`. Empty
// means the stimulus is illegal there.
std::vector<SessionState> declared_targets(SessionState from, StimulusKind stimulus);

// The stimulus the orchestrator applies on its own in `state`, if any.
std::optional<StimulusKind> automatic_stimulus(SessionState state);

struct Intent {
  enum class Kind { kMakeDrink, kListRecipes, kUnknown };
  Kind kind = Kind::kUnknown;
  std::string name;  // kMakeDrink: normalized drink name
  std::string raw;
};

// "make (me)? (a|an)? <name>" and "list recipes", case-insensitive.
Intent parse_order(std::string_view text);

struct SessionEvent {
  std::uint64_t seq = 0;  // 1-based, gap-free
  double time_s = 0.0;    // simulated session clock
  std::string kind;
  nlohmann::json payload;
};

nlohmann::json to_json(const SessionEvent& event);

// Append-only, gap-free event sequence. Any number of readers may follow it;
// `wait_after` blocks until an event newer than `seq` exists, the log is
// closed, or the timeout passes.
class EventLog {
 public:
  std::uint64_t append(double time_s, std::string kind, nlohmann::json payload);
  std::vector<SessionEvent> after(std::uint64_t seq) const;
  std::vector<SessionEvent> wait_after(std::uint64_t seq, std::chrono::milliseconds timeout) const;
  void close();
  bool closed() const;
  std::uint64_t last_seq() const;

 private:
  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  std::vector<SessionEvent> events_;
  bool closed_ = false;
};

// Speech adapters. The default implementations are text loopbacks; real
// speech recognition and synthesis plug in here.
class SpeechIn {
 public:
  virtual ~SpeechIn() = default;
  virtual std::string transcribe(std::string_view input) = 0;
};

class SpeechOut {
 public:
  virtual ~SpeechOut() = default;
  virtual void say(std::string_view text) = 0;
};

class TextLoopbackIn : public SpeechIn {
 public:
  std::string transcribe(std::string_view input) override { return std::string(input); }
};

class TextLoopbackOut : public SpeechOut {
 public:
  void say(std::string_view) override {}
};

struct OrchestratorConfig {
  double min_retrieval_score = 0.2;
  bool unattended = false;
  // Emit a pour_progress event every this many sensor samples.
  std::size_t progress_every_samples = 25;
};

// Everything a session needs from the outside world. The snapshot is pinned
// at order time.
struct SessionContext {
  std::shared_ptr<const RecipeIndex> index;
  std::shared_ptr<const InventorySnapshot> snapshot;
  SubstitutionTable rules;
  DiffOptions diff_options;
  sim::SimConfig sim;
  OrchestratorConfig orchestrator;
  std::uint64_t seed = 0;
  std::shared_ptr<SpeechOut> speech_out = std::make_shared<TextLoopbackOut>();
};

// One order's lifecycle. Not internally synchronized apart from its event
// log; callers serialize stimuli.
class Session {
 public:
  Session(std::string session_id, std::string order_text, SessionContext context);

  const std::string& id() const { return id_; }
  SessionState state() const { return state_; }
  const std::string& order_text() const { return order_text_; }
  const Intent& intent() const { return intent_; }
  const std::optional<std::string>& recipe_id() const { return recipe_id_; }
  const std::vector<UserPrompt>& outstanding_prompts() const { return prompts_; }
  const std::optional<ActionProgram>& program() const { return program_; }
  const std::optional<sim::ExecutionReport>& report() const { return report_; }
  const std::string& failure() const { return failure_; }
  const std::vector<SessionState>& state_trace() const { return trace_; }
  double clock_s() const { return clock_s_; }

  const EventLog& events() const { return *events_; }
  std::shared_ptr<const EventLog> event_log() const { return events_; }

  // Applies one stimulus. Errors: kIllegalStimulus when the machine does not
  // declare it in the current state (or an answer names a closed prompt),
  // kIllegalOption for a choice the prompt does not offer. The session is
  // unchanged on error.
  void advance(const Stimulus& stimulus);

  // Applies automatic stimuli until the session waits for the user or ends.
  void run_until_blocked();

  nlohmann::json snapshot_json() const;

 private:
  void transition(SessionState to, StimulusKind via, nlohmann::json detail = nlohmann::json::object());
  void say(const std::string& text);
  void fail(StimulusKind via, const std::string& reason);
  void emit(std::string kind, nlohmann::json payload);

  void do_retrieve();
  void do_reconcile();
  void do_evaluate();
  void do_answer(const Stimulus& stimulus);
  void do_compile();
  void do_execute();
  void do_finish();

  std::string id_;
  std::string order_text_;
  SessionContext ctx_;
  Intent intent_;
  SessionState state_ = SessionState::kOrdered;
  std::vector<SessionState> trace_{SessionState::kOrdered};
  double clock_s_ = 0.0;

  std::optional<std::string> recipe_id_;
  std::optional<Reconciler> reconciler_;
  std::vector<UserPrompt> prompts_;
  std::optional<ResolvedRecipe> resolved_;
  std::optional<ActionProgram> program_;
  std::optional<sim::ExecutionReport> report_;
  std::string failure_;

  std::shared_ptr<EventLog> events_ = std::make_shared<EventLog>();
};

// What the event log alone says about a session.
struct ReplayedSession {
  SessionState state = SessionState::kOrdered;
  std::optional<std::string> recipe_id;
  std::optional<std::string> program_id;
  std::vector<std::string> outstanding_prompt_ids;
  std::vector<SessionState> state_trace{SessionState::kOrdered};
};

// Folds "state", "retrieval", "prompts" and "program" events. Errors:
// kIllegalStimulus if the log records an undeclared transition or has a seq gap.
ReplayedSession replay(std::span<const SessionEvent> events);

}  // namespace shaker
