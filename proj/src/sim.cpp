#include "shaker/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace shaker::sim {

using nlohmann::json;

double FlowModel::rate_ml_per_s(double tilt_rad) const {
  return q_max_ml_per_s * std::max(0.0, (tilt_rad - theta_min_rad) / (kHalfPi - theta_min_rad));
}

void FlowModel::validate() const {
  if (!(q_max_ml_per_s > 0.0)) throw Error(ErrorCode::kInvalidArgument, "q_max must be > 0", "q_max_ml_per_s");
  if (!(theta_min_rad >= 0.0 && theta_min_rad < kHalfPi)) {
    throw Error(ErrorCode::kInvalidArgument, "theta_min must be within [0, pi/2)", "theta_min_rad");
  }
}

void FtSensorModel::validate() const {
  if (!(noise_sigma_g >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "noise_sigma must be >= 0", "noise_sigma_g");
  if (!(sample_period_s > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sample_period must be > 0", "sample_period_s");
  if (latency_samples < 0) throw Error(ErrorCode::kInvalidArgument, "latency must be >= 0", "latency_samples");
}

void SimConfig::validate() const {
  flow.validate();
  sensor.validate();
  if (controller.filter_window == 0) throw Error(ErrorCode::kInvalidArgument, "filter window must be >= 1", "filter_window");
  if (!(controller.timeout_s > 0.0)) throw Error(ErrorCode::kInvalidArgument, "timeout must be > 0", "timeout_s");
}

double step_flow(CellState& state, const FlowModel& flow, double dt) {
  if (!state.bottle_arm.held) throw Error(ErrorCode::kNoBottleHeld, "no bottle held");
  Bottle& bottle = state.bottles.at(*state.bottle_arm.held);
  const double poured = std::min(flow.rate_ml_per_s(state.bottle_arm.tilt_rad) * dt, bottle.remaining_ml);
  bottle.remaining_ml -= poured;
  state.glass_arm.glass_mass_g += poured * bottle.density_g_per_ml;
  return poured;
}

FtSensor::FtSensor(FtSensorModel model, double initial_mass_g) : model_(model), seen_g_(initial_mass_g) {
  model_.validate();
  history_.assign(static_cast<std::size_t>(model_.latency_samples), initial_mass_g);
}

double FtSensor::sample(double true_mass_g, Rng& rng) {
  history_.push_back(true_mass_g);
  seen_g_ = history_.front();
  history_.pop_front();
  const double noise = model_.noise_sigma_g > 0.0 ? model_.noise_sigma_g * noise_(rng) : 0.0;
  return model_.tare_g + seen_g_ - zero_g_ + noise;
}

void FtSensor::tare() { zero_g_ = model_.tare_g + seen_g_; }

double read_sensor(const CellState& state, FtSensor& sensor, Rng& rng) {
  return sensor.sample(state.glass_arm.glass_mass_g, rng);
}

PourError::PourError(ErrorCode code, const std::string& message, PourTrace trace)
    : Error(code, message, trace.item_id), trace_(std::move(trace)) {}

namespace {

// One closed-loop pour. Phases:
//   fast   full tilt until the lag-compensated filtered reading reaches
//          fast_fraction of the target
//   settle tilt 0, wait out latency, average a window of readings
//   slow   slow tilt, closed-loop, for calibration_fraction of what is left
//   settle, then open-loop top-ups at the learned slow rate
class PourRun {
 public:
  PourRun(double target, double tol, CellState& state, const FtSensorModel& sensor_model,
          const FlowModel& flow, const PourControllerConfig& ctrl, Rng& rng)
      : target_(target),
        tol_(tol),
        state_(state),
        flow_(flow),
        ctrl_(ctrl),
        rng_(rng),
        dt_(sensor_model.sample_period_s),
        latency_(static_cast<std::size_t>(sensor_model.latency_samples)),
        sigma_(sensor_model.noise_sigma_g),
        sensor_(sensor_model, state.glass_arm.glass_mass_g),
        start_mass_(state.glass_arm.glass_mass_g),
        start_clock_(state.clock_s) {
    trace_.item_id = *state.bottle_arm.held;
    trace_.target_mass_g = target;
    trace_.tolerance_rel = tol;
    sensor_.tare();
  }

  PourTrace run() {
    const double lower = target_ * (1.0 - tol_);
    const double done_band = 0.25 * tol_ * target_;
    const std::size_t window = ctrl_.filter_window;
    const double lag = static_cast<double>(latency_) + (static_cast<double>(window) - 1.0) / 2.0 + 1.0;
    const double margin = 3.0 * sigma_ / std::sqrt(static_cast<double>(window));
    const std::size_t measure = measure_window();
    const double slow_tilt = flow_.theta_min_rad + ctrl_.slow_tilt_offset_rad;

    while (!dry_) {
      tick(kHalfPi, lower);
      if (filtered() + std::max(0.0, recent_rate()) * lag + margin >= ctrl_.fast_fraction * target_) break;
    }
    double mass = settle_and_measure(measure, lower);

    if (!dry_ && target_ - mass > done_band) {
      const double goal = mass + (target_ - mass) * ctrl_.calibration_fraction;
      std::size_t slow_samples = 0;
      while (!dry_) {
        tick(slow_tilt, lower);
        ++slow_samples;
        if (filtered() >= goal) break;
      }
      const double before = mass;
      mass = settle_and_measure(measure, lower);
      const double rate = (mass - before) / static_cast<double>(slow_samples);

      for (int i = 0; i < ctrl_.max_top_ups && !dry_ && rate > 0.0; ++i) {
        const double remaining = target_ - mass;
        if (remaining <= done_band) break;
        const auto n = static_cast<std::size_t>(std::llround(remaining / rate));
        if (n == 0) break;
        for (std::size_t k = 0; k < n && !dry_; ++k) tick(slow_tilt, lower);
        mass = settle_and_measure(measure, lower);
      }
    }

    state_.bottle_arm.tilt_rad = 0.0;
    const double gained = state_.glass_arm.glass_mass_g - start_mass_;
    trace_.outcome.final_mass_g = gained;
    trace_.outcome.within_tolerance = std::abs(gained - target_) <= tol_ * target_;
    trace_.outcome.duration_s = static_cast<double>(ticks_) * dt_;
    return std::move(trace_);
  }

 private:
  std::size_t measure_window() const {
    const double wanted = std::ceil(std::pow(8.0 * sigma_ / (tol_ * target_), 2.0));
    return std::clamp(static_cast<std::size_t>(wanted), ctrl_.min_measure_samples,
                      std::max(ctrl_.min_measure_samples, ctrl_.max_measure_samples));
  }

  void tick(double tilt, double lower) {
    state_.bottle_arm.tilt_rad = tilt;
    step_flow(state_, flow_, dt_);
    ++ticks_;
    state_.clock_s = start_clock_ + static_cast<double>(ticks_) * dt_;
    const double reading = read_sensor(state_, sensor_, rng_);
    readings_.push_back(reading);
    const double gained = state_.glass_arm.glass_mass_g - start_mass_;
    trace_.samples.push_back({state_.clock_s, gained, reading, tilt});

    if (state_.bottles.at(trace_.item_id).remaining_ml <= 0.0) {
      if (gained < lower) {
        state_.bottle_arm.tilt_rad = 0.0;
        finish_partial();
        throw PourError(ErrorCode::kBottleExhausted,
                        "bottle " + trace_.item_id + " ran dry after " + std::to_string(gained) + " g",
                        std::move(trace_));
      }
      dry_ = true;
    }
    if (static_cast<double>(ticks_) * dt_ >= ctrl_.timeout_s) {
      state_.bottle_arm.tilt_rad = 0.0;
      finish_partial();
      throw PourError(ErrorCode::kTimeout, "pour did not finish within timeout", std::move(trace_));
    }
  }

  void finish_partial() {
    const double gained = state_.glass_arm.glass_mass_g - start_mass_;
    trace_.outcome.final_mass_g = gained;
    trace_.outcome.within_tolerance = std::abs(gained - target_) <= tol_ * target_;
    trace_.outcome.duration_s = static_cast<double>(ticks_) * dt_;
  }

  double mean_of(std::size_t from, std::size_t to) const {
    return std::accumulate(readings_.begin() + static_cast<std::ptrdiff_t>(from),
                           readings_.begin() + static_cast<std::ptrdiff_t>(to), 0.0) /
           static_cast<double>(to - from);
  }

  double filtered() const {
    const std::size_t n = readings_.size();
    return mean_of(n - std::min(n, ctrl_.filter_window), n);
  }

  // Mass per sample, from the means of the newest and oldest filter windows
  // inside the last rate_window readings.
  double recent_rate() const {
    const std::size_t w = ctrl_.filter_window;
    const std::size_t n = readings_.size();
    const std::size_t span = std::min(n, ctrl_.rate_window);
    if (span < 2 * w) return 0.0;
    const double newest = mean_of(n - w, n);
    const double oldest = mean_of(n - span, n - span + w);
    return (newest - oldest) / static_cast<double>(span - w);
  }

  double settle_and_measure(std::size_t window, double lower) {
    for (std::size_t i = 0; i < latency_ + ctrl_.settle_extra_samples; ++i) tick(0.0, lower);
    for (std::size_t i = 0; i < window; ++i) tick(0.0, lower);
    return mean_of(readings_.size() - window, readings_.size());
  }

  double target_, tol_;
  CellState& state_;
  const FlowModel& flow_;
  const PourControllerConfig& ctrl_;
  Rng& rng_;
  double dt_;
  std::size_t latency_;
  double sigma_;
  FtSensor sensor_;
  double start_mass_;
  double start_clock_;
  std::size_t ticks_ = 0;
  bool dry_ = false;
  std::vector<double> readings_;
  PourTrace trace_;
};

}  // namespace

PourTrace pour_closed_loop(double target_mass_g, double tolerance_rel, CellState& state,
                           const FtSensorModel& sensor, const FlowModel& flow,
                           const PourControllerConfig& controller, Rng& rng) {
  if (!state.bottle_arm.held) throw Error(ErrorCode::kNoBottleHeld, "pour_liquid with no bottle held");
  if (!state.bottles.contains(*state.bottle_arm.held)) {
    throw Error(ErrorCode::kBindingMismatch, "held bottle is unknown", *state.bottle_arm.held);
  }
  if (!state.glass_arm.holding_glass) throw Error(ErrorCode::kInvalidArgument, "pour_liquid with no glass held");
  if (!(target_mass_g > 0.0)) throw Error(ErrorCode::kInvalidArgument, "target mass must be > 0");
  if (!(tolerance_rel > 0.0 && tolerance_rel <= 0.1)) {
    throw Error(ErrorCode::kInvalidArgument, "tolerance must be within (0, 0.1]");
  }
  flow.validate();
  sensor.validate();
  return PourRun(target_mass_g, tolerance_rel, state, sensor, flow, controller, rng).run();
}

double ExecutionReport::conservation_drift_g() const {
  return std::abs(bottle_mass_loss_g - glass_mass_gain_g);
}

bool ExecutionReport::all_pours_within_tolerance() const {
  return std::all_of(traces.begin(), traces.end(),
                     [](const PourTrace& t) { return t.outcome.within_tolerance; });
}

namespace {

json action_args(const Action& action) {
  json j = to_json(action);
  j.erase("op");
  return j;
}

}  // namespace

ExecutionReport execute(const ActionProgram& program, const InventorySnapshot& snapshot,
                        const SimConfig& config, std::uint64_t seed) {
  if (auto violations = validate(program); !violations.empty()) {
    throw ValidationError(std::move(violations));
  }
  config.validate();

  ExecutionReport report;
  report.program_id = program.program_id;
  CellState& state = report.final_state;
  for (const auto& action : program.actions) {
    const auto* take = std::get_if<TakeBottle>(&action);
    if (take == nullptr || state.bottles.contains(take->item_id)) continue;
    const InventoryItem* item = snapshot.find(take->item_id);
    if (item == nullptr) {
      throw Error(ErrorCode::kBindingMismatch,
                  "program references " + take->item_id + ", which the snapshot lacks", take->item_id);
    }
    const ItemBudget* budget = program.budget_for(take->item_id);
    state.bottles[take->item_id] = {item->available_ml, budget ? budget->density_g_per_ml : 1.0};
  }

  // Per-bottle ledger so the conservation check does not depend on summation order.
  std::map<std::string, double> initial_ml;
  for (const auto& [id, b] : state.bottles) initial_ml[id] = b.remaining_ml;
  const double initial_glass = state.glass_arm.glass_mass_g;

  Rng rng(seed);
  const auto emit = [&](std::string kind, std::size_t index, const Action& action, json payload) {
    report.events.push_back({state.clock_s, std::move(kind), index, std::string(op_name(action)),
                             std::move(payload)});
  };

  report.ok = true;
  for (std::size_t i = 0; i < program.actions.size() && report.ok; ++i) {
    const Action& action = program.actions[i];
    emit("action_start", i, action, action_args(action));
    try {
      json result = json::object();
      if (std::holds_alternative<TakeGlass>(action)) {
        state.glass_arm.holding_glass = true;
        state.clock_s += config.durations.take_glass_s;
      } else if (const auto* take = std::get_if<TakeBottle>(&action)) {
        state.bottle_arm.held = take->item_id;
        state.bottle_arm.tilt_rad = 0.0;
        state.clock_s += config.durations.take_bottle_s;
      } else if (std::holds_alternative<LeftBottle>(action)) {
        state.bottle_arm.held.reset();
        state.clock_s += config.durations.left_bottle_s;
      } else if (const auto* pour = std::get_if<PourLiquid>(&action)) {
        report.traces.push_back(pour_closed_loop(pour->target_mass_g, pour->tolerance_rel, state,
                                                 config.sensor, config.flow, config.controller, rng));
        const auto& outcome = report.traces.back().outcome;
        result = {{"final_mass_g", outcome.final_mass_g},
                  {"within_tolerance", outcome.within_tolerance},
                  {"duration_s", outcome.duration_s}};
      } else if (std::holds_alternative<GiveUser>(action)) {
        state.glass_arm.holding_glass = false;
        state.clock_s += config.durations.give_user_s;
        result = {{"glass_mass_g", state.glass_arm.glass_mass_g}};
      }
      emit("action_end", i, action, std::move(result));
    } catch (const PourError& e) {
      report.traces.push_back(e.trace());
      report.ok = false;
      report.error_code = std::string(to_string(e.code()));
      report.error_message = e.what();
      emit("action_failed", i, action, {{"error", report.error_code}, {"message", report.error_message}});
    } catch (const Error& e) {
      report.ok = false;
      report.error_code = std::string(to_string(e.code()));
      report.error_message = e.what();
      emit("action_failed", i, action, {{"error", report.error_code}, {"message", report.error_message}});
    }
  }

  for (const auto& [id, b] : state.bottles) {
    report.bottle_mass_loss_g += (initial_ml[id] - b.remaining_ml) * b.density_g_per_ml;
  }
  report.glass_mass_gain_g = state.glass_arm.glass_mass_g - initial_glass;
  return report;
}

json to_json(const PourTrace& trace) {
  json samples = json::array();
  for (const auto& s : trace.samples) samples.push_back({s.t_s, s.true_mass_g, s.measured_g, s.tilt_rad});
  return {{"item_id", trace.item_id},
          {"target_mass_g", trace.target_mass_g},
          {"tolerance_rel", trace.tolerance_rel},
          {"sample_columns", {"t_s", "true_mass_g", "measured_g", "tilt_rad"}},
          {"samples", samples},
          {"outcome",
           {{"final_mass_g", trace.outcome.final_mass_g},
            {"within_tolerance", trace.outcome.within_tolerance},
            {"duration_s", trace.outcome.duration_s}}}};
}

json to_json(const CellState& s) {
  json bottles = json::object();
  for (const auto& [id, b] : s.bottles) {
    bottles[id] = {{"remaining_ml", b.remaining_ml}, {"density_g_per_ml", b.density_g_per_ml}};
  }
  return {{"glass_arm", {{"holding_glass", s.glass_arm.holding_glass}, {"glass_mass_g", s.glass_arm.glass_mass_g}}},
          {"bottle_arm",
           {{"held", s.bottle_arm.held ? json(*s.bottle_arm.held) : json(nullptr)},
            {"tilt_rad", s.bottle_arm.tilt_rad}}},
          {"bottles", bottles},
          {"clock_s", s.clock_s}};
}

json to_json(const ExecutionReport& r) {
  json events = json::array();
  for (const auto& e : r.events) {
    events.push_back({{"t_s", e.t_s},
                      {"kind", e.kind},
                      {"action_index", e.action_index},
                      {"op", e.op},
                      {"payload", e.payload}});
  }
  json traces = json::array();
  for (const auto& t : r.traces) traces.push_back(to_json(t));
  json j = {{"program_id", r.program_id},
            {"ok", r.ok},
            {"events", events},
            {"traces", traces},
            {"final_state", to_json(r.final_state)},
            {"bottle_mass_loss_g", r.bottle_mass_loss_g},
            {"glass_mass_gain_g", r.glass_mass_gain_g},
            {"all_pours_within_tolerance", r.all_pours_within_tolerance()}};
  if (!r.ok) j["error"] = {{"code", r.error_code}, {"message", r.error_message}};
  return j;
}

}  // namespace shaker::sim
