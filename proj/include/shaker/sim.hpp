#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "shaker/error.hpp"
#include "shaker/perception.hpp"
#include "shaker/plan.hpp"

namespace shaker::sim {

using Rng = std::mt19937_64;

inline constexpr double kHalfPi = 1.57079632679489661923;

// Outflow as a linear function of tilt above the pour threshold:
// q(tilt) = q_max * max(0, (tilt - theta_min) / (pi/2 - theta_min)).
struct FlowModel {
  double q_max_ml_per_s = 30.0;
  double theta_min_rad = 0.35;

  double rate_ml_per_s(double tilt_rad) const;
  void validate() const;
};

struct FtSensorModel {
  double tare_g = 0.0;
  double noise_sigma_g = 0.5;
  double sample_period_s = 0.01;
  int latency_samples = 5;

  void validate() const;
};

struct Bottle {
  double remaining_ml = 0.0;
  double density_g_per_ml = 1.0;

  friend bool operator==(const Bottle&, const Bottle&) = default;
};

struct CellState {
  struct GlassArm {
    bool holding_glass = false;
    double glass_mass_g = 0.0;  // liquid in the glass
    friend bool operator==(const GlassArm&, const GlassArm&) = default;
  } glass_arm;
  struct BottleArm {
    std::optional<std::string> held;
    double tilt_rad = 0.0;
    friend bool operator==(const BottleArm&, const BottleArm&) = default;
  } bottle_arm;
  std::map<std::string, Bottle> bottles;
  double clock_s = 0.0;

  friend bool operator==(const CellState&, const CellState&) = default;
};

// Pours for `dt` at the current tilt of the held bottle, clipped by what is
// left in it. Returns the volume moved. Errors: kNoBottleHeld.
double step_flow(CellState& state, const FlowModel& flow, double dt);

// Force-torque sensor under the glass: reports
// tare + (true mass latency_samples ago) + N(0, sigma).
class FtSensor {
 public:
  FtSensor(FtSensorModel model, double initial_mass_g);

  // Records the current true mass and returns one reading.
  double sample(double true_mass_g, Rng& rng);
  // Zeroes the reading against the mass the sensor currently sees.
  void tare();

  const FtSensorModel& model() const { return model_; }

 private:
  FtSensorModel model_;
  std::deque<double> history_;
  double seen_g_ = 0.0;  // true mass currently visible through the latency line
  double zero_g_ = 0.0;
  std::normal_distribution<double> noise_{0.0, 1.0};
};

double read_sensor(const CellState& state, FtSensor& sensor, Rng& rng);

struct PourSample {
  double t_s = 0.0;
  double true_mass_g = 0.0;  // gained since the pour started
  double measured_g = 0.0;   // tared reading
  double tilt_rad = 0.0;

  friend bool operator==(const PourSample&, const PourSample&) = default;
};

struct PourOutcome {
  double final_mass_g = 0.0;
  bool within_tolerance = false;
  double duration_s = 0.0;

  friend bool operator==(const PourOutcome&, const PourOutcome&) = default;
};

struct PourTrace {
  std::string item_id;
  double target_mass_g = 0.0;
  double tolerance_rel = 0.0;
  std::vector<PourSample> samples;
  PourOutcome outcome;

  friend bool operator==(const PourTrace&, const PourTrace&) = default;
};

struct PourControllerConfig {
  // Fast phase stops once the predicted mass reaches this share of the target.
  double fast_fraction = 0.9;
  double slow_tilt_offset_rad = 0.1;
  std::size_t filter_window = 5;
  std::size_t settle_extra_samples = 10;
  // Share of the remaining mass poured closed-loop at slow tilt to learn the
  // slow flow rate before the open-loop top-up.
  double calibration_fraction = 0.6;
  std::size_t rate_window = 40;
  std::size_t min_measure_samples = 50;
  std::size_t max_measure_samples = 1500;
  int max_top_ups = 3;
  double timeout_s = 120.0;
};

class PourError : public Error {
 public:
  PourError(ErrorCode code, const std::string& message, PourTrace trace);
  const PourTrace& trace() const noexcept { return trace_; }

 private:
  PourTrace trace_;
};

// Closed-loop pour of `target_mass_g` from the held bottle into the held glass.
// Tares at start. Errors: kNoBottleHeld, kInvalidArgument (no glass, bad
// target/tolerance); PourError with kBottleExhausted or kTimeout carrying the
// partial trace (the state reflects everything poured so far).
PourTrace pour_closed_loop(double target_mass_g, double tolerance_rel, CellState& state,
                           const FtSensorModel& sensor, const FlowModel& flow,
                           const PourControllerConfig& controller, Rng& rng);

struct ActionDurations {
  double take_glass_s = 2.0;
  double take_bottle_s = 2.0;
  double left_bottle_s = 2.0;
  double give_user_s = 2.0;
};

struct SimConfig {
  FlowModel flow;
  FtSensorModel sensor;
  PourControllerConfig controller;
  ActionDurations durations;

  void validate() const;
};

struct ExecutionEvent {
  double t_s = 0.0;
  std::string kind;  // action_start | action_end | action_failed
  std::size_t action_index = 0;
  std::string op;
  nlohmann::json payload;
};

struct ExecutionReport {
  std::string program_id;
  bool ok = false;
  std::string error_code;
  std::string error_message;
  std::vector<ExecutionEvent> events;
  std::vector<PourTrace> traces;
  CellState final_state;
  double bottle_mass_loss_g = 0.0;
  double glass_mass_gain_g = 0.0;

  double conservation_drift_g() const;
  bool all_pours_within_tolerance() const;
};

// Interprets a validated program against a simulated cell seeded from the
// snapshot. Throws ValidationError for invalid programs and kBindingMismatch
// when a take_bottle names an item the snapshot lacks; runtime failures end
// the run early with ok = false and a partial report.
ExecutionReport execute(const ActionProgram& program, const InventorySnapshot& snapshot,
                        const SimConfig& config, std::uint64_t seed);

nlohmann::json to_json(const PourTrace& trace);
nlohmann::json to_json(const CellState& state);
nlohmann::json to_json(const ExecutionReport& report);

}  // namespace shaker::sim
