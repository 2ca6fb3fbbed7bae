#include "trapkit/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "trapkit/threading.hpp"

namespace trapkit {

namespace {

// Bicycle model (ego) and IDM constants.
constexpr double kWheelbase = 2.8;       // m
constexpr double kMaxSteerAngle = 0.5;   // rad at |steer| = 1
constexpr double kMaxAccel = 4.0;        // m/s^2 at |accel| = 1
constexpr double kIdmAccel = 2.0;        // m/s^2
constexpr double kIdmDecel = 3.0;        // comfortable, m/s^2
constexpr double kIdmHeadway = 1.5;      // s
constexpr double kIdmMinGap = 2.0;       // m
constexpr double kEgoDesiredSpeed = 15.0;
constexpr double kRoadEndMargin = 5.0;

// Tailgating gap servo (critically damped for the gap double integrator).
constexpr double kServoGapGain = 2.25;
constexpr double kServoSpeedGain = 3.0;
constexpr double kServoTargetGap = 0.4;  // bumper-to-bumper, m

double heading_angle(const Vec2& h) { return std::atan2(h.y, h.x); }

double wrap_angle(double a) {
    while (a > M_PI) a -= 2.0 * M_PI;
    while (a < -M_PI) a += 2.0 * M_PI;
    return a;
}

// Triangle wave with period 1, range [-1, 1], starting upward from 0.
double triangle_wave(double u) {
    const double p = u - std::floor(u);
    if (p < 0.25) return 4.0 * p;
    if (p < 0.75) return 2.0 - 4.0 * p;
    return 4.0 * p - 4.0;
}

std::vector<double> cast_rays(Vec2 origin, double base_angle,
                              const std::vector<double>& offsets,
                              const std::vector<Segment>& segments, double max_range) {
    std::vector<double> out;
    out.reserve(offsets.size());
    for (double offset : offsets) {
        const Vec2 dir = heading_from_angle(base_angle + offset);
        double nearest = std::numeric_limits<double>::infinity();
        for (const Segment& seg : segments)
            nearest = std::min(nearest, ray_segment_distance(origin, dir, seg));
        out.push_back(std::min(nearest, max_range) / max_range);
    }
    return out;
}

std::vector<double> full_circle_offsets(int count) {
    std::vector<double> offsets(count);
    for (int k = 0; k < count; ++k) offsets[k] = 2.0 * M_PI * k / count;
    return offsets;
}

std::vector<double> forward_fan_offsets(int count) {
    std::vector<double> offsets(count);
    for (int j = 0; j < count; ++j) offsets[j] = -M_PI / 2.0 + M_PI * (j + 0.5) / count;
    return offsets;
}

}  // namespace

std::string_view schedule_kind_name(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::kZigzag: return "zigzag";
        case ScheduleKind::kSuddenBraking: return "sudden_braking";
        case ScheduleKind::kSuddenTurn: return "sudden_turn";
        case ScheduleKind::kLaneWeaving: return "lane_weaving";
        case ScheduleKind::kTailgating: return "tailgating";
    }
    return "unknown";
}

std::optional<ScheduleKind> schedule_kind_from_name(std::string_view name) {
    for (int i = 0; i < kScheduleKindCount; ++i) {
        const auto kind = static_cast<ScheduleKind>(i);
        if (schedule_kind_name(kind) == name) return kind;
    }
    return std::nullopt;
}

void validate_config(const ScenarioConfig& cfg) {
    auto fail = [](const char* what) { throw std::invalid_argument(what); };
    if (cfg.lane_count < 1) fail("lane_count must be positive");
    if (!(cfg.lane_width > 0.0)) fail("lane_width must be positive");
    if (!(cfg.road_length > 100.0)) fail("road_length must exceed 100 m");
    if (cfg.traffic_count < 0) fail("traffic_count must be nonnegative");
    if (!(cfg.dt > 0.0)) fail("dt must be positive");
    if (cfg.max_steps < 1) fail("max_steps must be positive");
    if (cfg.lidar_beam_count < 1) fail("lidar_beam_count must be positive");
    if (!(cfg.lidar_range > 0.0)) fail("lidar_range must be positive");
    if (cfg.lane_detector_count < 1) fail("lane_detector_count must be positive");
    if (cfg.side_detector_count < 1) fail("side_detector_count must be positive");
    if (cfg.expert_action_noise < 0.0) fail("expert_action_noise must be >= 0");
    if (cfg.anomaly_schedule) {
        if (cfg.anomaly_schedule->start < 0) fail("schedule start must be >= 0");
        if (cfg.anomaly_schedule->duration < 1) fail("schedule duration must be >= 1");
        if (!(cfg.anomaly_schedule->magnitude > 0.0)) fail("schedule magnitude must be > 0");
    }
}

int WorldState::lane_of(double y) const {
    const int lane = static_cast<int>(std::floor(y / lane_width));
    return std::clamp(lane, 0, lane_count - 1);
}

OrientedRect WorldState::rect(int index) const {
    const Vehicle& v = vehicles[index];
    return {v.state.position, v.state.heading, v.length, v.width};
}

std::vector<Segment> WorldState::boundary_segments() const {
    const double x0 = -100.0, x1 = road_length + 100.0;
    return {Segment{{x0, 0.0}, {x1, 0.0}},
            Segment{{x0, road_width()}, {x1, road_width()}}};
}

std::vector<Segment> WorldState::lane_line_segments() const {
    std::vector<Segment> lines;
    const double x0 = -100.0, x1 = road_length + 100.0;
    for (int i = 1; i < lane_count; ++i) {
        const double y = i * lane_width;
        lines.push_back({{x0, y}, {x1, y}});
    }
    return lines;
}

std::vector<double> cast_lidar(const WorldState& world, int beam_count, double max_range) {
    std::vector<Segment> obstacles = world.boundary_segments();
    for (std::size_t i = 1; i < world.vehicles.size(); ++i)
        for (const Segment& edge : world.rect(static_cast<int>(i)).edges())
            obstacles.push_back(edge);
    const Vehicle& ego = world.vehicles[0];
    return cast_rays(ego.state.position, heading_angle(ego.state.heading),
                     full_circle_offsets(beam_count), obstacles, max_range);
}

std::vector<double> cast_lane_detectors(const WorldState& world, int count, double max_range) {
    const Vehicle& ego = world.vehicles[0];
    return cast_rays(ego.state.position, heading_angle(ego.state.heading),
                     forward_fan_offsets(count), world.lane_line_segments(), max_range);
}

std::vector<double> cast_side_detectors(const WorldState& world, int count, double max_range) {
    const Vehicle& ego = world.vehicles[0];
    return cast_rays(ego.state.position, heading_angle(ego.state.heading),
                     forward_fan_offsets(count), world.boundary_segments(), max_range);
}

std::optional<WctKind> detect_wct(const WorldState& world) {
    const OrientedRect ego = world.rect(0);
    for (std::size_t i = 1; i < world.vehicles.size(); ++i)
        if (rects_overlap(ego, world.rect(static_cast<int>(i)))) return WctKind::kCrash;
    const double y = world.vehicles[0].state.position.y;
    if (y < 0.0 || y > world.road_width()) return WctKind::kOffRoad;
    return std::nullopt;
}

// --- scenario construction ---------------------------------------------------

namespace {

Vehicle make_vehicle(double x, double y, double speed, bool idm, double desired) {
    Vehicle v;
    v.state.position = {x, y};
    v.state.heading = {1.0, 0.0};
    v.state.speed = speed;
    v.state.lane_index = 0;  // fixed up by the caller
    v.idm = idm;
    v.desired_speed = desired;
    return v;
}

struct BuiltScenario {
    WorldState world;
    int ego_target_lane = 0;
    int partner = -1;
    double turn_direction = -1.0;
    double weave_line_y = 3.5;
};

// Places traffic so that clean runs stay calm: vehicles in the ego's lane sit
// far ahead at near-expert speed (or well behind), and same-lane spacing never
// forces emergency IDM braking.
void place_extras(BuiltScenario& built, Rng& rng, const ScenarioConfig& cfg, int count,
                  int min_lane) {
    WorldState& world = built.world;
    const double ego_x = world.vehicles[0].state.position.x;
    const int ego_lane = world.vehicles[0].state.lane_index;
    if (min_lane > world.lane_count - 1) return;
    for (int i = 0; i < count; ++i) {
        for (int attempt = 0; attempt < 20; ++attempt) {
            const int lane =
                static_cast<int>(rng.uniform_int(min_lane, world.lane_count - 1));
            double x = ego_x + rng.uniform(-80.0, 220.0);
            double speed = rng.uniform(8.0, 13.0);
            if (lane == ego_lane) {
                if (x < ego_x + 60.0 && x > ego_x - 20.0) continue;
                if (x >= ego_x + 60.0) speed = rng.uniform(11.0, 13.0);
            }
            x = std::clamp(x, 10.0, cfg.road_length - 10.0);
            bool ok = true;
            for (const Vehicle& other : world.vehicles) {
                if (world.lane_of(other.state.position.y) != lane) continue;
                if (std::abs(other.state.position.x - x) < 15.0) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            Vehicle v = make_vehicle(x, world.lane_center(lane), speed, true, speed);
            v.state.lane_index = lane;
            world.vehicles.push_back(v);
            break;
        }
    }
}

BuiltScenario build_scenario(std::uint64_t seed, const ScenarioConfig& cfg) {
    Rng rng(derive_seed(seed, "world"));
    BuiltScenario built;
    WorldState& world = built.world;
    world.lane_count = cfg.lane_count;
    world.lane_width = cfg.lane_width;
    world.road_length = cfg.road_length;

    const auto kind = cfg.anomaly_schedule
                          ? std::optional<ScheduleKind>(cfg.anomaly_schedule->kind)
                          : std::nullopt;

    // Ego start lane and speed depend on the scripted kind: zigzag and weaving
    // need the edge lane (their lateral excursions exit through the near
    // boundary or straddle the first interior line).
    int ego_lane = static_cast<int>(rng.uniform_int(0, cfg.lane_count - 1));
    double ego_speed = rng.uniform(10.0, 13.0);
    if (kind == ScheduleKind::kZigzag || kind == ScheduleKind::kLaneWeaving) {
        ego_lane = 0;
        ego_speed = kind == ScheduleKind::kZigzag ? 13.0 : 12.0;
    } else if (kind == ScheduleKind::kSuddenBraking || kind == ScheduleKind::kTailgating) {
        ego_speed = 12.0;
    }

    Vehicle ego = make_vehicle(50.0, world.lane_center(ego_lane), ego_speed, false,
                               kEgoDesiredSpeed);
    ego.state.lane_index = ego_lane;
    world.vehicles.push_back(ego);
    built.ego_target_lane = ego_lane;
    built.turn_direction = ego_lane < (cfg.lane_count + 1) / 2 ? -1.0 : 1.0;
    built.weave_line_y = ego_lane + 1 < cfg.lane_count
                             ? (ego_lane + 1) * cfg.lane_width
                             : ego_lane * cfg.lane_width;

    const double ego_x = 50.0;
    if (kind == ScheduleKind::kSuddenBraking) {
        // Cruise follower close behind: it does not react when the ego brakes.
        Vehicle follower =
            make_vehicle(ego_x - 12.5, world.lane_center(ego_lane), ego_speed, false, ego_speed);
        follower.state.lane_index = ego_lane;
        world.vehicles.push_back(follower);
        built.partner = 1;
    } else if (kind == ScheduleKind::kTailgating) {
        // Slow cruising lead; it brakes hard late in the window, after the gap
        // servo has held the ego inside the proximity bound long enough.
        Vehicle lead =
            make_vehicle(ego_x + 19.5, world.lane_center(ego_lane), 10.0, false, 10.0);
        lead.state.lane_index = ego_lane;
        lead.script.brake_start =
            cfg.anomaly_schedule->start + 90 + static_cast<int>(rng.uniform_int(0, 20));
        lead.script.brake_steps = 20;
        lead.script.decel = 4.0;
        world.vehicles.push_back(lead);
        built.partner = 1;
    } else if (kind == ScheduleKind::kLaneWeaving && cfg.lane_count >= 2) {
        // Parallel car in the neighboring lane, slightly slower, so the
        // weaving ego eventually overtakes through it.
        Vehicle parallel =
            make_vehicle(ego_x + 55.0, world.lane_center(1), 12.0, false, 12.0);
        parallel.state.lane_index = 1;
        world.vehicles.push_back(parallel);
        built.partner = 1;
    }

    // Background traffic.  Scripted scenarios keep the maneuver lanes clear.
    const bool scripted = kind.has_value();
    const int extras = scripted ? std::min(cfg.traffic_count, 6) : cfg.traffic_count;
    place_extras(built, rng, cfg, extras, scripted ? 2 : 0);

    for (auto& v : world.vehicles) v.state.lane_index = world.lane_of(v.state.position.y);
    return built;
}

}  // namespace

// --- simulation --------------------------------------------------------------

Simulation::Simulation(std::uint64_t seed, const ScenarioConfig& cfg)
    : cfg_(cfg), noise_rng_(derive_seed(seed, "actions")) {
    validate_config(cfg_);
    BuiltScenario built = build_scenario(seed, cfg_);
    world_ = std::move(built.world);
    ego_target_lane_ = built.ego_target_lane;
    scenario_partner_ = built.partner;
    turn_direction_ = built.turn_direction;
    weave_line_y_ = built.weave_line_y;
    common_init(seed);
}

Simulation::Simulation(std::uint64_t seed, const ScenarioConfig& cfg, WorldState world,
                       int ego_target_lane)
    : cfg_(cfg), world_(std::move(world)), noise_rng_(derive_seed(seed, "actions")),
      ego_target_lane_(ego_target_lane) {
    validate_config(cfg_);
    if (world_.vehicles.empty()) throw std::invalid_argument("world needs an ego vehicle");
    common_init(seed);
}

void Simulation::common_init(std::uint64_t seed) {
    prev_lane_index_ = world_.lane_of(world_.vehicles[0].state.position.y);
    if (scenario_partner_ >= 0)
        partner_prev_speed_ = world_.vehicles[scenario_partner_].state.speed;
    traj_.id = "sim-" + std::to_string(seed);
    traj_.seed = seed;
}

double Simulation::idm_accel(int index) const {
    const Vehicle& self = world_.vehicles[index];
    const double v = self.state.speed;
    const double v0 = std::max(self.desired_speed, 0.1);
    double accel = kIdmAccel * (1.0 - std::pow(v / v0, 4.0));

    // Nearest vehicle ahead in the same lane.
    const int lane = world_.lane_of(self.state.position.y);
    const Vehicle* lead = nullptr;
    for (std::size_t j = 0; j < world_.vehicles.size(); ++j) {
        if (static_cast<int>(j) == index) continue;
        const Vehicle& other = world_.vehicles[j];
        if (world_.lane_of(other.state.position.y) != lane) continue;
        if (other.state.position.x <= self.state.position.x) continue;
        if (!lead || other.state.position.x < lead->state.position.x) lead = &other;
    }
    if (lead) {
        const double gap = std::max(
            lead->state.position.x - self.state.position.x - (self.length + lead->length) / 2.0,
            0.1);
        const double dv = v - lead->state.speed;
        const double desired_gap =
            kIdmMinGap + std::max(0.0, v * kIdmHeadway +
                                           v * dv / (2.0 * std::sqrt(kIdmAccel * kIdmDecel)));
        accel -= kIdmAccel * (desired_gap / gap) * (desired_gap / gap);
    }
    return accel;
}

double Simulation::pursuit_steer(double target_y) const {
    const Vehicle& ego = world_.vehicles[0];
    const double theta = heading_angle(ego.state.heading);
    const double lookahead = std::max(5.0, ego.state.speed);
    const double alpha =
        wrap_angle(std::atan2(target_y - ego.state.position.y, lookahead) - theta);
    const double curvature = 2.0 * std::sin(alpha) / lookahead;
    const double steer_angle = std::atan(curvature * kWheelbase);
    return std::clamp(steer_angle / kMaxSteerAngle, -1.0, 1.0);
}

Action Simulation::controller(int t) {
    const Vehicle& ego = world_.vehicles[0];
    double steer = pursuit_steer(world_.lane_center(ego_target_lane_));
    double accel = std::clamp(idm_accel(0) / kMaxAccel, -1.0, 1.0);

    // Noise is drawn every step (even at epsilon 0) to keep the stream stable.
    const double eps = cfg_.expert_action_noise;
    const double steer_noise = noise_rng_.uniform(-eps, eps);
    const double accel_noise = noise_rng_.uniform(-eps, eps);
    steer += steer_noise;
    accel += accel_noise;

    if (cfg_.anomaly_schedule) {
        const AnomalySchedule& schedule = *cfg_.anomaly_schedule;
        const int local = t - schedule.start;
        if (local >= 0 && local < schedule.duration) {
            const double mag = schedule.magnitude;
            switch (schedule.kind) {
                case ScheduleKind::kZigzag:
                    steer = mag * 0.6 * std::sin(2.0 * M_PI * local / 20.0);
                    break;
                case ScheduleKind::kSuddenBraking:
                    accel = -1.0 * mag;
                    break;
                case ScheduleKind::kSuddenTurn:
                    steer = turn_direction_ * 0.8 * mag;
                    break;
                case ScheduleKind::kLaneWeaving: {
                    const double target =
                        weave_line_y_ + mag * 0.3 * triangle_wave(local / 40.0);
                    steer = pursuit_steer(target);
                    // Hold speed instead of yielding to traffic in the straddled lane.
                    accel = std::clamp(0.25 * (kEgoDesiredSpeed - ego.state.speed), -1.0, 1.0);
                    break;
                }
                case ScheduleKind::kTailgating: {
                    if (scenario_partner_ >= 0) {
                        const Vehicle& lead = world_.vehicles[scenario_partner_];
                        const double gap = lead.state.position.x - ego.state.position.x -
                                           (ego.length + lead.length) / 2.0;
                        const double a =
                            std::clamp(kServoGapGain * (gap - kServoTargetGap) +
                                           kServoSpeedGain *
                                               (partner_prev_speed_ - ego.state.speed),
                                       -kMaxAccel, kMaxAccel);
                        accel = a / kMaxAccel;
                    }
                    break;
                }
            }
        }
    }
    return {std::clamp(steer, -1.0, 1.0), std::clamp(accel, -1.0, 1.0)};
}

void Simulation::integrate() {
    const Action& action = traj_.steps.back().action;
    const double dt = cfg_.dt;

    if (scenario_partner_ >= 0)
        partner_prev_speed_ = world_.vehicles[scenario_partner_].state.speed;

    // Ego: kinematic bicycle with Euler integration.
    Vehicle& ego = world_.vehicles[0];
    const double v = ego.state.speed;
    double theta = heading_angle(ego.state.heading);
    ego.state.position = ego.state.position + ego.state.heading * (v * dt);
    theta += (v / kWheelbase) * std::tan(kMaxSteerAngle * action.steer) * dt;
    ego.state.heading = heading_from_angle(theta);
    ego.state.speed = std::max(0.0, v + kMaxAccel * action.accel * dt);
    ego.state.lane_index = world_.lane_of(ego.state.position.y);

    // Traffic: longitudinal only.
    for (std::size_t i = 1; i < world_.vehicles.size(); ++i) {
        Vehicle& veh = world_.vehicles[i];
        veh.state.position.x += veh.state.speed * dt;
        const bool braking = veh.script.brake_start >= 0 && t_ >= veh.script.brake_start &&
                             t_ < veh.script.brake_start + veh.script.brake_steps;
        double accel = 0.0;
        if (braking) {
            accel = -veh.script.decel;
        } else if (veh.idm) {
            accel = std::clamp(idm_accel(static_cast<int>(i)), -6.0, kIdmAccel);
        }
        veh.state.speed = std::max(0.0, veh.state.speed + accel * dt);
    }
}

bool Simulation::step(std::optional<Action> forced_action) {
    if (done_) return false;

    const Vehicle& ego = world_.vehicles[0];
    TimeStep step;
    step.t = t_;
    step.obs.lidar = cast_lidar(world_, cfg_.lidar_beam_count, cfg_.lidar_range);
    step.obs.lane = cast_lane_detectors(world_, cfg_.lane_detector_count, cfg_.lidar_range);
    step.obs.side = cast_side_detectors(world_, cfg_.side_detector_count, cfg_.lidar_range);
    const int lane_now = world_.lane_of(ego.state.position.y);
    bool near_line = false;
    for (int i = 1; i < world_.lane_count; ++i)
        near_line |= std::abs(ego.state.position.y - i * world_.lane_width) <= 0.2;
    step.obs.crossed_lane_line = (lane_now != prev_lane_index_) || near_line;
    prev_lane_index_ = lane_now;

    step.state = ego.state;
    step.state.lane_index = lane_now;
    step.action = forced_action ? *forced_action : controller(t_);

    const std::optional<WctKind> wct = detect_wct(world_);
    traj_.steps.push_back(std::move(step));

    if (wct) {
        traj_.wct = WctEvent{*wct, t_};
        traj_.wct_label = 1;
        done_ = true;
    } else if (ego.state.position.x >= cfg_.road_length - kRoadEndMargin) {
        done_ = true;
    } else if (t_ + 1 >= cfg_.max_steps) {
        done_ = true;
    } else {
        integrate();
    }
    ++t_;
    return !done_;
}

Trajectory Simulation::take_result() {
    traj_.meta["dt"] = cfg_.dt;
    traj_.meta["lane_count"] = static_cast<double>(world_.lane_count);
    traj_.meta["lane_width"] = world_.lane_width;
    traj_.meta["road_length"] = world_.road_length;
    traj_.meta["traffic_count"] = static_cast<double>(world_.vehicles.size()) - 1.0;
    traj_.meta["lidar_beam_count"] = static_cast<double>(cfg_.lidar_beam_count);
    traj_.meta["lidar_range"] = cfg_.lidar_range;
    traj_.meta["lane_detector_count"] = static_cast<double>(cfg_.lane_detector_count);
    traj_.meta["side_detector_count"] = static_cast<double>(cfg_.side_detector_count);
    traj_.meta["epsilon"] = cfg_.expert_action_noise;
    traj_.meta["ego_lane"] = static_cast<double>(ego_target_lane_);
    if (cfg_.anomaly_schedule) {
        traj_.meta["schedule_kind"] =
            std::string(schedule_kind_name(cfg_.anomaly_schedule->kind));
        traj_.meta["schedule_start"] = static_cast<double>(cfg_.anomaly_schedule->start);
        traj_.meta["schedule_duration"] =
            static_cast<double>(cfg_.anomaly_schedule->duration);
        traj_.meta["schedule_magnitude"] = cfg_.anomaly_schedule->magnitude;
    }
    return std::move(traj_);
}

Trajectory simulate_scenario(std::uint64_t seed, const ScenarioConfig& cfg) {
    Simulation sim(seed, cfg);
    while (sim.step()) {
    }
    return sim.take_result();
}

// --- dataset generation ------------------------------------------------------

namespace {

AnomalySchedule make_schedule(ScheduleKind kind, Rng& rng, int max_steps) {
    AnomalySchedule schedule;
    schedule.kind = kind;
    schedule.magnitude = 1.0;
    const int cap = std::max(1, max_steps / 3);
    switch (kind) {
        case ScheduleKind::kZigzag:
            schedule.start = static_cast<int>(rng.uniform_int(60, 100));
            schedule.duration = 250;
            break;
        case ScheduleKind::kSuddenBraking:
            schedule.start = static_cast<int>(rng.uniform_int(60, 120));
            schedule.duration = 40;
            break;
        case ScheduleKind::kSuddenTurn:
            schedule.start = static_cast<int>(rng.uniform_int(60, 120));
            schedule.duration = 8;
            break;
        case ScheduleKind::kLaneWeaving:
            schedule.start = 30;
            schedule.duration = 330;
            break;
        case ScheduleKind::kTailgating:
            schedule.start = static_cast<int>(rng.uniform_int(30, 50));
            schedule.duration = 300;
            break;
    }
    schedule.start = std::min(schedule.start, cap);
    return schedule;
}

}  // namespace

std::vector<Trajectory> generate_dataset(std::uint64_t seed_begin, std::uint64_t seed_end,
                                         const ScenarioConfig& base, const MixSpec& mix,
                                         int threads) {
    if (seed_begin >= seed_end) throw std::invalid_argument("empty seed range");
    validate_config(base);
    if (mix.mode == MixSpec::Mode::kExpert && mix.epsilon_ladder.empty())
        throw std::invalid_argument("expert mix needs a nonempty epsilon ladder");

    const std::size_t count = static_cast<std::size_t>(seed_end - seed_begin);
    std::vector<Trajectory> out(count);
    parallel_for(count, threads, [&](std::size_t i) {
        const std::uint64_t seed = seed_begin + i;
        Rng mix_rng(derive_seed(seed, "mix"));
        ScenarioConfig cfg = base;
        std::string mix_tag;

        std::optional<ScheduleKind> scripted;
        if (mix.mode == MixSpec::Mode::kExpert) {
            cfg.expert_action_noise = mix.epsilon_ladder[seed % mix.epsilon_ladder.size()];
            mix_tag = "expert";
        } else if (mix.mode == MixSpec::Mode::kScripted) {
            scripted = mix.scripted_kind
                           ? *mix.scripted_kind
                           : static_cast<ScheduleKind>(seed % kScheduleKindCount);
        } else {
            const int slot = static_cast<int>(seed % 10);
            const int clean_slots =
                std::clamp(static_cast<int>(std::lround(mix.test_clean_fraction * 10.0)), 0, 10);
            if (slot < clean_slots) {
                cfg.expert_action_noise = 0.0;
                mix_tag = "clean";
            } else {
                scripted = static_cast<ScheduleKind>((slot - clean_slots) % kScheduleKindCount);
            }
        }

        if (scripted) {
            cfg.expert_action_noise = 0.0;
            // Same world-randomization ladder as the expert mix, minus 2-lane
            // roads: the maneuvers keep lanes 0-1 while extras fill the rest,
            // so scripted worlds read like expert worlds on the sensors.
            cfg.lane_count = static_cast<int>(mix_rng.uniform_int(3, 4));
            cfg.traffic_count = static_cast<int>(mix_rng.uniform_int(3, 8));
            cfg.anomaly_schedule = make_schedule(*scripted, mix_rng, cfg.max_steps);
            mix_tag = "scripted";
        } else {
            // Scenario randomization within bounds.
            cfg.lane_count = static_cast<int>(mix_rng.uniform_int(2, 4));
            cfg.traffic_count = static_cast<int>(mix_rng.uniform_int(3, 8));
            cfg.anomaly_schedule.reset();
        }

        Trajectory traj = simulate_scenario(seed, cfg);
        traj.meta["mix"] = mix_tag;
        out[i] = std::move(traj);
    });
    return out;
}

}  // namespace trapkit
