#include "shaker/session.hpp"

#include <algorithm>
#include <regex>

#include "shaker/error.hpp"
#include "shaker/text.hpp"

namespace shaker {

using nlohmann::json;

std::string_view to_string(SessionState state) {
  switch (state) {
    case SessionState::kOrdered: return "Ordered";
    case SessionState::kRetrieved: return "Retrieved";
    case SessionState::kReconciling: return "Reconciling";
    case SessionState::kAwaitingUser: return "AwaitingUser";
    case SessionState::kResolved: return "Resolved";
    case SessionState::kCompiled: return "Compiled";
    case SessionState::kExecuting: return "Executing";
    case SessionState::kServed: return "Served";
    case SessionState::kFailed: return "Failed";
    case SessionState::kAborted: return "Aborted";
  }
  return "?";
}

std::optional<SessionState> session_state_from_string(std::string_view name) {
  for (const auto s : kAllSessionStates) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

bool is_terminal(SessionState state) {
  return state == SessionState::kServed || state == SessionState::kFailed ||
         state == SessionState::kAborted;
}

std::string_view to_string(StimulusKind kind) {
  switch (kind) {
    case StimulusKind::kRetrieve: return "retrieve";
    case StimulusKind::kReconcile: return "reconcile";
    case StimulusKind::kEvaluate: return "evaluate";
    case StimulusKind::kAnswer: return "answer";
    case StimulusKind::kCompile: return "compile";
    case StimulusKind::kExecute: return "execute";
    case StimulusKind::kFinish: return "finish";
    case StimulusKind::kAbort: return "abort";
  }
  return "?";
}

namespace {

std::optional<StimulusKind> stimulus_from_string(std::string_view name) {
  for (const auto k : kAllStimulusKinds) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

}  // namespace

std::vector<SessionState> declared_targets(SessionState from, StimulusKind stimulus) {
  using S = SessionState;
  using K = StimulusKind;
  if (is_terminal(from)) return {};
  if (stimulus == K::kAbort) return {S::kAborted};
  switch (from) {
    case S::kOrdered:
      if (stimulus == K::kRetrieve) return {S::kRetrieved, S::kFailed};
      break;
    case S::kRetrieved:
      if (stimulus == K::kReconcile) return {S::kReconciling, S::kFailed};
      break;
    case S::kReconciling:
      if (stimulus == K::kEvaluate) return {S::kAwaitingUser, S::kResolved, S::kFailed};
      break;
    case S::kAwaitingUser:
      if (stimulus == K::kAnswer) return {S::kReconciling, S::kAborted};
      break;
    case S::kResolved:
      if (stimulus == K::kCompile) return {S::kCompiled, S::kFailed};
      break;
    case S::kCompiled:
      if (stimulus == K::kExecute) return {S::kExecuting};
      break;
    case S::kExecuting:
      if (stimulus == K::kFinish) return {S::kServed, S::kFailed};
      break;
    default:
      break;
  }
  return {};
}

std::optional<StimulusKind> automatic_stimulus(SessionState state) {
  switch (state) {
    case SessionState::kOrdered: return StimulusKind::kRetrieve;
    case SessionState::kRetrieved: return StimulusKind::kReconcile;
    case SessionState::kReconciling: return StimulusKind::kEvaluate;
    case SessionState::kResolved: return StimulusKind::kCompile;
    case SessionState::kCompiled: return StimulusKind::kExecute;
    case SessionState::kExecuting: return StimulusKind::kFinish;
    default: return std::nullopt;
  }
}

Intent parse_order(std::string_view text) {
  static const std::regex make_re(R"(^make (?:me )?(?:an? )?(.+)$)");
  Intent intent;
  intent.raw = std::string(text);
  const std::string norm = normalize_text(text);
  std::smatch m;
  if (norm == "list recipes") {
    intent.kind = Intent::Kind::kListRecipes;
  } else if (std::regex_match(norm, m, make_re)) {
    intent.kind = Intent::Kind::kMakeDrink;
    intent.name = m[1].str();
  }
  return intent;
}

json to_json(const SessionEvent& e) {
  return {{"seq", e.seq}, {"time_s", e.time_s}, {"kind", e.kind}, {"payload", e.payload}};
}

std::uint64_t EventLog::append(double time_s, std::string kind, json payload) {
  std::uint64_t seq = 0;
  {
    std::lock_guard lock(mutex_);
    seq = events_.size() + 1;
    events_.push_back({seq, time_s, std::move(kind), std::move(payload)});
  }
  changed_.notify_all();
  return seq;
}

std::vector<SessionEvent> EventLog::after(std::uint64_t seq) const {
  std::lock_guard lock(mutex_);
  if (seq >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(seq), events_.end()};
}

std::vector<SessionEvent> EventLog::wait_after(std::uint64_t seq, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  changed_.wait_for(lock, timeout, [&] { return closed_ || events_.size() > seq; });
  if (seq >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(seq), events_.end()};
}

void EventLog::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  changed_.notify_all();
}

bool EventLog::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

std::uint64_t EventLog::last_seq() const {
  std::lock_guard lock(mutex_);
  return events_.size();
}

Session::Session(std::string session_id, std::string order_text, SessionContext context)
    : id_(std::move(session_id)),
      order_text_(std::move(order_text)),
      ctx_(std::move(context)),
      intent_(parse_order(order_text_)) {
  if (!ctx_.index || !ctx_.snapshot) {
    throw Error(ErrorCode::kInvalidArgument, "session needs a recipe index and a snapshot");
  }
  if (!ctx_.speech_out) ctx_.speech_out = std::make_shared<TextLoopbackOut>();
  emit("order", {{"session_id", id_}, {"text", order_text_}});
}

void Session::emit(std::string kind, json payload) {
  events_->append(clock_s_, std::move(kind), std::move(payload));
}

void Session::say(const std::string& text) {
  ctx_.speech_out->say(text);
  emit("speech_out", {{"text", text}});
}

void Session::transition(SessionState to, StimulusKind via, json detail) {
  const SessionState from = state_;
  state_ = to;
  trace_.push_back(to);
  detail["from"] = to_string(from);
  detail["to"] = to_string(to);
  detail["stimulus"] = to_string(via);
  emit("state", std::move(detail));
}

void Session::fail(StimulusKind via, const std::string& reason) {
  failure_ = reason;
  prompts_.clear();
  transition(SessionState::kFailed, via, {{"reason", reason}});
  say("Sorry, I cannot make this drink: " + reason + ".");
}

void Session::advance(const Stimulus& stimulus) {
  if (declared_targets(state_, stimulus.kind).empty()) {
    throw Error(ErrorCode::kIllegalStimulus,
                std::string("stimulus '") + std::string(to_string(stimulus.kind)) + "' is illegal in state " +
                    std::string(to_string(state_)),
                std::string(to_string(state_)) + "/" + std::string(to_string(stimulus.kind)));
  }
  switch (stimulus.kind) {
    case StimulusKind::kRetrieve: do_retrieve(); break;
    case StimulusKind::kReconcile: do_reconcile(); break;
    case StimulusKind::kEvaluate: do_evaluate(); break;
    case StimulusKind::kAnswer: do_answer(stimulus); break;
    case StimulusKind::kCompile: do_compile(); break;
    case StimulusKind::kExecute: do_execute(); break;
    case StimulusKind::kFinish: do_finish(); break;
    case StimulusKind::kAbort:
      prompts_.clear();
      transition(SessionState::kAborted, StimulusKind::kAbort);
      say("Your order has been cancelled.");
      break;
  }
  if (is_terminal(state_)) events_->close();
}

void Session::run_until_blocked() {
  while (const auto next = automatic_stimulus(state_)) advance(Stimulus::of(*next));
}

void Session::do_retrieve() {
  if (intent_.kind == Intent::Kind::kListRecipes) {
    fail(StimulusKind::kRetrieve, "listing recipes is not a drink order");
    return;
  }
  const std::string query = intent_.kind == Intent::Kind::kMakeDrink ? intent_.name : intent_.raw;
  const auto hits = ctx_.index->retrieve(query, 1);
  if (hits.empty()) {
    fail(StimulusKind::kRetrieve, "the recipe book is empty");
    return;
  }
  const auto recipe = ctx_.index->find(hits.front().recipe_id);
  emit("retrieval", {{"query", query},
                     {"recipe_id", hits.front().recipe_id},
                     {"recipe_name", recipe ? recipe->name : ""},
                     {"score", hits.front().score}});
  if (hits.front().score < ctx_.orchestrator.min_retrieval_score) {
    fail(StimulusKind::kRetrieve, "no matching recipe");
    return;
  }
  recipe_id_ = hits.front().recipe_id;
  transition(SessionState::kRetrieved, StimulusKind::kRetrieve, {{"recipe_id", *recipe_id_}});
}

void Session::do_reconcile() {
  const auto recipe = ctx_.index->find(*recipe_id_);
  if (!recipe) {
    fail(StimulusKind::kReconcile, "recipe " + *recipe_id_ + " was removed");
    return;
  }
  reconciler_.emplace(*recipe, *ctx_.snapshot, ctx_.rules, ctx_.diff_options);
  json anomalies = json::array();
  for (const auto& a : reconciler_->anomalies()) anomalies.push_back(to_json(a));
  emit("anomalies", {{"anomalies", anomalies}});
  transition(SessionState::kReconciling, StimulusKind::kReconcile);
}

void Session::do_evaluate() {
  if (!reconciler_->resolved() && ctx_.orchestrator.unattended) {
    try {
      reconciler_->resolve_unattended();
      json subs = json::array();
      for (const auto& s : reconciler_->applied_substitutions()) {
        subs.push_back({{"from", s.from_label}, {"to", s.to_label}, {"automatic", s.automatic}});
      }
      emit("auto_resolved", {{"applied_substitutions", subs}});
    } catch (const Error& e) {
      fail(StimulusKind::kEvaluate, std::string("unresolvable ingredient problem (") + e.detail() + ")");
      return;
    }
  }
  if (reconciler_->resolved()) {
    resolved_ = reconciler_->result();
    prompts_.clear();
    transition(SessionState::kResolved, StimulusKind::kEvaluate);
    say("All ingredients for " + resolved_->recipe_name + " are ready.");
    return;
  }
  const auto previous = prompts_;
  prompts_ = reconciler_->prompts();
  json list = json::array();
  for (const auto& p : prompts_) list.push_back(to_json(p));
  emit("prompts", {{"prompts", list}});
  transition(SessionState::kAwaitingUser, StimulusKind::kEvaluate,
             {{"outstanding", static_cast<int>(prompts_.size())}});
  for (const auto& p : prompts_) {
    if (std::find(previous.begin(), previous.end(), p) == previous.end()) say(p.text);
  }
}

void Session::do_answer(const Stimulus& stimulus) {
  const auto prompt = std::find_if(prompts_.begin(), prompts_.end(), [&](const UserPrompt& p) {
    return p.anomaly_id == stimulus.anomaly_id;
  });
  if (prompt == prompts_.end()) {
    throw Error(ErrorCode::kIllegalStimulus, "no open prompt for anomaly '" + stimulus.anomaly_id + "'",
                "AwaitingUser/answer");
  }
  if (std::find(prompt->options.begin(), prompt->options.end(), stimulus.choice) == prompt->options.end()) {
    throw Error(ErrorCode::kIllegalOption,
                "'" + stimulus.choice + "' is not an option for " + stimulus.anomaly_id, stimulus.choice);
  }
  emit("answer", {{"anomaly_id", stimulus.anomaly_id}, {"choice", stimulus.choice}});
  if (stimulus.choice == kAbortOption) {
    prompts_.clear();
    transition(SessionState::kAborted, StimulusKind::kAnswer);
    say("Your order has been cancelled.");
    return;
  }
  reconciler_->answer(stimulus.anomaly_id, stimulus.choice);
  transition(SessionState::kReconciling, StimulusKind::kAnswer);
  json anomalies = json::array();
  for (const auto& a : reconciler_->anomalies()) anomalies.push_back(to_json(a));
  emit("anomalies", {{"anomalies", anomalies}});
}

void Session::do_compile() {
  try {
    ActionProgram program = compile(*resolved_, *ctx_.snapshot);
    if (auto violations = validate(program); !violations.empty()) throw ValidationError(std::move(violations));
    program_ = std::move(program);
  } catch (const Error& e) {
    fail(StimulusKind::kCompile, std::string("could not plan the drink (") + e.what() + ")");
    return;
  }
  emit("program", to_json(*program_));
  transition(SessionState::kCompiled, StimulusKind::kCompile, {{"program_id", program_->program_id}});
  say("Preparing your " + resolved_->recipe_name + ".");
}

void Session::do_execute() {
  transition(SessionState::kExecuting, StimulusKind::kExecute);
  const double base = clock_s_;
  try {
    report_ = sim::execute(*program_, *ctx_.snapshot, ctx_.sim, ctx_.seed);
  } catch (const Error& e) {
    failure_ = std::string(to_string(e.code())) + ": " + e.what();
    emit("execution_error", {{"error", std::string(to_string(e.code()))}, {"message", e.what()}});
    return;
  }

  std::size_t pour_index = 0;
  const std::size_t every = std::max<std::size_t>(1, ctx_.orchestrator.progress_every_samples);
  const std::size_t window = std::max<std::size_t>(1, ctx_.sim.controller.filter_window);
  for (const auto& e : report_->events) {
    clock_s_ = base + e.t_s;
    json payload = {{"action_index", e.action_index}, {"op", e.op}, {"detail", e.payload}};
    emit(e.kind, std::move(payload));
    if (e.kind == "action_start" && e.op == "pour_liquid" && pour_index < report_->traces.size()) {
      const auto& trace = report_->traces[pour_index++];
      for (std::size_t i = every - 1; i < trace.samples.size(); i += every) {
        const std::size_t from = i + 1 >= window ? i + 1 - window : 0;
        double filtered = 0.0;
        for (std::size_t j = from; j <= i; ++j) filtered += trace.samples[j].measured_g;
        filtered /= static_cast<double>(i + 1 - from);
        clock_s_ = base + trace.samples[i].t_s;
        emit("pour_progress", {{"action_index", e.action_index},
                               {"item_id", trace.item_id},
                               {"target_mass_g", trace.target_mass_g},
                               {"filtered_g", filtered},
                               {"tilt_rad", trace.samples[i].tilt_rad}});
      }
    }
  }
  clock_s_ = base + report_->final_state.clock_s;
}

void Session::do_finish() {
  if (!report_) {
    fail(StimulusKind::kFinish, failure_.empty() ? "execution did not run" : failure_);
    return;
  }
  if (!report_->ok) {
    fail(StimulusKind::kFinish, report_->error_code + ": " + report_->error_message);
    return;
  }
  if (!report_->all_pours_within_tolerance()) {
    fail(StimulusKind::kFinish, "a pour ended outside its tolerance band");
    return;
  }
  transition(SessionState::kServed, StimulusKind::kFinish,
             {{"glass_mass_g", report_->final_state.glass_arm.glass_mass_g}});
  say("Your " + resolved_->recipe_name + " is ready. Enjoy!");
}

json Session::snapshot_json() const {
  json prompts = json::array();
  for (const auto& p : prompts_) prompts.push_back(to_json(p));
  json j = {{"session_id", id_},
            {"state", to_string(state_)},
            {"order_text", order_text_},
            {"recipe_id", recipe_id_ ? json(*recipe_id_) : json(nullptr)},
            {"prompts", prompts},
            {"program_id", program_ ? json(program_->program_id) : json(nullptr)},
            {"last_seq", events_->last_seq()},
            {"clock_s", clock_s_}};
  if (!failure_.empty()) j["failure"] = failure_;
  if (report_) {
    json pours = json::array();
    for (const auto& t : report_->traces) {
      pours.push_back({{"item_id", t.item_id},
                       {"target_mass_g", t.target_mass_g},
                       {"final_mass_g", t.outcome.final_mass_g},
                       {"within_tolerance", t.outcome.within_tolerance}});
    }
    j["execution"] = {{"ok", report_->ok},
                      {"glass_mass_g", report_->final_state.glass_arm.glass_mass_g},
                      {"pours", pours}};
  }
  return j;
}

ReplayedSession replay(std::span<const SessionEvent> events) {
  ReplayedSession r;
  std::uint64_t expected = 1;
  for (const auto& e : events) {
    if (e.seq != expected++) {
      throw Error(ErrorCode::kIllegalStimulus, "event log has a gap at seq " + std::to_string(e.seq));
    }
    if (e.kind == "state") {
      const auto from = session_state_from_string(e.payload.at("from").get<std::string>());
      const auto to = session_state_from_string(e.payload.at("to").get<std::string>());
      const auto via = stimulus_from_string(e.payload.at("stimulus").get<std::string>());
      if (!from || !to || !via || *from != r.state) {
        throw Error(ErrorCode::kIllegalStimulus, "event log transition does not follow its own state");
      }
      const auto allowed = declared_targets(*from, *via);
      if (std::find(allowed.begin(), allowed.end(), *to) == allowed.end()) {
        throw Error(ErrorCode::kIllegalStimulus, "event log records an undeclared transition");
      }
      r.state = *to;
      r.state_trace.push_back(*to);
      if (*to != SessionState::kAwaitingUser) r.outstanding_prompt_ids.clear();
    } else if (e.kind == "retrieval") {
      r.recipe_id = e.payload.at("recipe_id").get<std::string>();
    } else if (e.kind == "prompts") {
      r.outstanding_prompt_ids.clear();
      for (const auto& p : e.payload.at("prompts")) {
        r.outstanding_prompt_ids.push_back(p.at("anomaly_id").get<std::string>());
      }
    } else if (e.kind == "program") {
      r.program_id = e.payload.at("program_id").get<std::string>();
    }
  }
  return r;
}

}  // namespace shaker
