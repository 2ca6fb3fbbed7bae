// Seeded kinematic lane world.
//
// Straight multi-lane road along +x.  The ego vehicle (index 0) drives with
// IDM longitudinal control and pure-pursuit lane keeping; traffic vehicles
// follow IDM or cruise at constant speed.  Scripted anomaly schedules override
// the ego's actions inside their window.  Everything is a pure function of
// (seed, config).

#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "trapkit/geometry.hpp"
#include "trapkit/rng.hpp"
#include "trapkit/trajectory.hpp"

namespace trapkit {

enum class ScheduleKind : int {
    kZigzag = 0,
    kSuddenBraking,
    kSuddenTurn,
    kLaneWeaving,
    kTailgating,
};
inline constexpr int kScheduleKindCount = 5;

std::string_view schedule_kind_name(ScheduleKind kind);
std::optional<ScheduleKind> schedule_kind_from_name(std::string_view name);

struct AnomalySchedule {
    ScheduleKind kind = ScheduleKind::kZigzag;
    int start = 100;
    int duration = 100;
    double magnitude = 1.0;
};

struct ScenarioConfig {
    int lane_count = 3;
    double lane_width = 3.5;      // meters
    double road_length = 500.0;   // meters
    int traffic_count = 6;
    double dt = 0.1;              // seconds
    int max_steps = 400;
    int lidar_beam_count = 24;
    double lidar_range = 50.0;    // meters
    int lane_detector_count = 12;
    int side_detector_count = 12;
    double expert_action_noise = 0.0;  // epsilon, uniform on [-eps, eps]
    std::optional<AnomalySchedule> anomaly_schedule;
};

// Throws std::invalid_argument when an invariant fails.
void validate_config(const ScenarioConfig& cfg);

// Optional scripted speed change for a cruise vehicle.
struct TrafficScript {
    int brake_start = -1;  // step index; -1 disables
    int brake_steps = 0;
    double decel = 0.0;    // m/s^2, positive magnitude
};

struct Vehicle {
    KinematicState state;
    double length = 4.5;
    double width = 1.8;
    bool idm = true;  // false: cruise at desired_speed (modulo script)
    double desired_speed = 12.0;
    TrafficScript script;
};

struct WorldState {
    std::vector<Vehicle> vehicles;  // index 0 is the ego
    int lane_count = 3;
    double lane_width = 3.5;
    double road_length = 500.0;

    double road_width() const { return lane_count * lane_width; }
    double lane_center(int lane) const { return (lane + 0.5) * lane_width; }
    int lane_of(double y) const;
    OrientedRect rect(int index) const;
    // Road edges (y = 0 and y = road_width), extended past both road ends.
    std::vector<Segment> boundary_segments() const;
    // Interior lane lines only.
    std::vector<Segment> lane_line_segments() const;
};

// Beam k at ego-relative angle 2*pi*k/beam_count; reading = min(nearest hit on
// a non-ego vehicle or road boundary, max_range) / max_range.
std::vector<double> cast_lidar(const WorldState& world, int beam_count, double max_range);

// `count` rays across the forward half-plane (relative angles
// -pi/2 + pi*(j+0.5)/count), intersected with the interior lane lines.
std::vector<double> cast_lane_detectors(const WorldState& world, int count, double max_range);

// Same ray fan intersected with the road boundaries.
std::vector<double> cast_side_detectors(const WorldState& world, int count, double max_range);

// Crash when the ego rectangle overlaps any other vehicle (crash takes
// precedence); off-road when the ego center leaves the road's lateral extent.
std::optional<WctKind> detect_wct(const WorldState& world);

// Step-by-step driver for the world; simulate_scenario wraps it.  The
// two-argument constructor builds the scenario (vehicle placement randomized
// from the seed, adapted to the schedule kind); the world-state constructor
// lets tests start from a hand-built world.
class Simulation {
public:
    Simulation(std::uint64_t seed, const ScenarioConfig& cfg);
    Simulation(std::uint64_t seed, const ScenarioConfig& cfg, WorldState world,
               int ego_target_lane);

    // Advances one step (records it); returns false when the episode is over.
    bool step(std::optional<Action> forced_action = std::nullopt);
    bool done() const { return done_; }
    const WorldState& world() const { return world_; }

    // Finalizes meta and returns the recorded trajectory.
    Trajectory take_result();

private:
    Action controller(int t);
    double idm_accel(int index) const;
    double pursuit_steer(double target_y) const;
    void integrate();
    void common_init(std::uint64_t seed);

    ScenarioConfig cfg_;
    WorldState world_;
    Rng noise_rng_;
    Trajectory traj_;
    int ego_target_lane_ = 0;
    int t_ = 0;
    bool done_ = false;
    int prev_lane_index_ = 0;
    // Scenario anchors used by schedule overrides.
    int scenario_partner_ = -1;   // lead (tailgating) / follower (braking) / parallel (weaving)
    double turn_direction_ = -1.0;
    double weave_line_y_ = 3.5;
    double partner_prev_speed_ = 0.0;
};

Trajectory simulate_scenario(std::uint64_t seed, const ScenarioConfig& cfg);

// How generate_dataset assigns behavior to each seed.
struct MixSpec {
    enum class Mode { kExpert, kScripted, kTest };
    Mode mode = Mode::kExpert;
    // kExpert: epsilon cycles through the ladder by seed.
    std::vector<double> epsilon_ladder = {0.0, 0.2, 0.4, 0.6, 0.8};
    // kScripted: fixed kind, or cycling through all five when unset.
    std::optional<ScheduleKind> scripted_kind;
    // kTest: seeds alternate clean (epsilon 0) and scripted slots.
    double test_clean_fraction = 0.5;
};

// One trajectory per seed in [seed_begin, seed_end); scenario parameters
// (lane count, traffic, speeds) are randomized per seed within bounds, and the
// mix spec sets epsilon / schedule.  `threads` <= 0 uses the hardware count.
std::vector<Trajectory> generate_dataset(std::uint64_t seed_begin, std::uint64_t seed_end,
                                         const ScenarioConfig& base, const MixSpec& mix,
                                         int threads = 1);

}  // namespace trapkit
