#include "vega/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "vega/charging.hpp"
#include "vega/energy.hpp"
#include "vega/env.hpp"
#include "vega/errors.hpp"
#include "vega/estimator.hpp"
#include "vega/ppo.hpp"
#include "vega/road_graph.hpp"
#include "vega/route_plan.hpp"
#include "vega/teacher.hpp"

namespace vega {

namespace {

constexpr double kSnapRadiusKm = 50.0;

GeoPoint parse_latlon(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) {
    throw ParseError("expected 'lat,lon', got '" + s + "'");
  }
  try {
    GeoPoint p{std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
    validate(p);
    return p;
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  } catch (const std::exception&) {
    throw ParseError("expected 'lat,lon', got '" + s + "'");
  }
}

int snap_or_throw(const RoadGraph& g, const GeoPoint& p, const char* which) {
  const int node = g.nearest_node(p);
  const double d = haversine_km(p, g.node(node).pos);
  if (d > kSnapRadiusKm) {
    throw SnapFailure(std::string(which) + " point is " + std::to_string(d) +
                      " km from the nearest node (snap radius 50 km)");
  }
  return node;
}

std::optional<std::uint64_t> env_seed_override() {
  const char* s = std::getenv("VEGA_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    return static_cast<std::uint64_t>(std::stoull(s));
  } catch (const std::exception&) {
    throw ParseError("VEGA_SEED must be an unsigned integer");
  }
}

void emit(std::ostream& out, const nlohmann::json& j) { out << j.dump(2) << '\n'; }

struct PlanArgs {
  std::string graph, params, curve, checkpoint, from, to, mode = "teacher", trace;
  double soc0 = 80.0;
  double cap = 80.0;
};

// Rebuilds the table-style segments from an executed policy trajectory.
RoutePlan plan_from_policy_rollout(EvEnv& env, const PolicyNet& net, int goal) {
  const RoadGraph& g = env.graph();
  RoutePlan plan;
  PlanSegment seg;
  seg.start = g.node(env.state().current).pos;
  seg.node_path = {env.state().current};
  seg.polyline = {seg.start};
  double arrival_soc = env.state().soc_pct;
  double dwell_min = 0.0;

  std::array<double, kActionCount> logits{};
  std::array<double, kActionCount> logps{};
  Observation obs = env.observation();
  bool done = false;
  while (!done) {
    const auto mask = env.action_mask();
    double value = 0.0;
    net.forward(obs.v.data(), logits.data(), &value, nullptr);
    masked_log_softmax(logits.data(), mask.data(), kActionCount, logps.data());
    const int action = argmax_masked(logps.data(), mask.data(), kActionCount);
    const StepResult res = env.step(action);
    if (res.info.moved) {
      if (dwell_min > 0.0) {
        seg.end_soc_pct = arrival_soc;
        seg.charging_time_h = dwell_min / 60.0;
        plan.segments.push_back(seg);
        seg = PlanSegment{};
        const int node = res.info.edge.from;
        seg.start = g.node(node).pos;
        seg.node_path = {node};
        seg.polyline = {seg.start};
        dwell_min = 0.0;
      }
      const SegmentCost sc = segment_cost(res.info.edge, env.params());
      seg.distance_km += res.info.edge.length_km;
      seg.driving_time_h += sc.time_h;
      seg.energy_kwh += sc.energy_kwh;
      seg.node_path.push_back(res.info.edge.to);
      seg.polyline.push_back(g.node(res.info.edge.to).pos);
      arrival_soc = res.state.soc_pct;
    } else {
      dwell_min += res.info.charge_minutes;
    }
    obs = res.obs;
    done = res.done;
    if (done && res.state.done_reason != DoneReason::Success) {
      throw NoFeasiblePath(std::string("policy rollout ended by ") +
                           to_string(res.state.done_reason));
    }
  }
  if (env.state().current != goal && seg.node_path.size() < 2 && plan.segments.empty()) {
    throw NoFeasiblePath("policy rollout made no progress");
  }
  seg.end_soc_pct = arrival_soc;
  seg.charging_time_h = dwell_min / 60.0;
  plan.segments.push_back(seg);
  plan.totals = compute_totals(plan.segments);
  return plan;
}

int cmd_plan(const PlanArgs& a, std::ostream& out, std::ostream& err) {
  const RoadGraph g = RoadGraph::load(a.graph);
  const VehicleParams params = a.params.empty() ? VehicleParams{} : VehicleParams::load(a.params);
  params.validate();
  const ChargeCurve curve = a.curve.empty() ? default_charge_curve() : ChargeCurve::load(a.curve);
  const int start = snap_or_throw(g, parse_latlon(a.from), "--from");
  const int goal = snap_or_throw(g, parse_latlon(a.to), "--to");

  if (start == goal) {
    emit(out, to_json(zero_length_plan(g, start, a.soc0)));
    return 0;
  }

  RoutePlan route;
  if (a.mode == "teacher") {
    TeacherConfig tc;
    tc.v_max_kmh = std::max(tc.v_max_kmh, g.max_speed_kmh());
    tc.charge_cap_pct = a.cap;
    const TeacherPlan tp = plan(g, tc, params, curve, start, goal, a.soc0);
    if (!tp.feasible) {
      throw NoFeasiblePath("teacher found no SoC-feasible path within budget");
    }
    route = build_plan_from_path(g, params, curve, tp.path, a.soc0, a.cap);
  } else if (a.mode == "policy") {
    if (a.checkpoint.empty()) throw ParseError("--mode policy requires --checkpoint");
    const PolicyNet net = PolicyNet::load(a.checkpoint);
    EnvConfig env_cfg;
    env_cfg.charge_cap_pct = a.cap;
    env_cfg.strict_action_slots = false;
    TeacherConfig tc;
    tc.v_max_kmh = std::max(tc.v_max_kmh, g.max_speed_kmh());
    EvEnv env(g, env_cfg, params, curve, tc);
    env.reset_manual(start, goal, a.soc0);
    if (!a.trace.empty()) {
      // Trace written on a second identical rollout to keep plan building simple.
      std::ofstream trace(a.trace);
      if (!trace) throw Error("cannot open trace file: " + a.trace);
      EvEnv tenv(g, env_cfg, params, curve, tc);
      tenv.reset_manual(start, goal, a.soc0);
      Observation obs = tenv.observation();
      std::array<double, kActionCount> logits{}, logps{};
      bool done = false;
      while (!done) {
        const auto mask = tenv.action_mask();
        double value = 0.0;
        net.forward(obs.v.data(), logits.data(), &value, nullptr);
        masked_log_softmax(logits.data(), mask.data(), kActionCount, logps.data());
        const int action = argmax_masked(logps.data(), mask.data(), kActionCount);
        const StepResult res = tenv.step(action);
        write_trace_record(trace, res.state, action, res.reward);
        obs = res.obs;
        done = res.done;
      }
    }
    route = plan_from_policy_rollout(env, net, goal);
  } else {
    throw ParseError("--mode must be teacher or policy");
  }

  if (!replay_feasible(g, params, curve, route, a.soc0, a.cap)) {
    err << "internal: emitted plan failed feasibility replay\n";
    return 1;
  }
  emit(out, to_json(route));
  return 0;
}

int cmd_estimate(const std::string& log_path, const std::string& out_path,
                 EstimatorConfig cfg, std::ostream& out, std::ostream& err) {
  if (const auto seed = env_seed_override()) cfg.seed = *seed;
  const DriveLog log = DriveLog::load_csv(log_path);
  const EstimateResult result = estimate(log, cfg);
  err << "estimate: residual_rms_w=" << result.residual_rms_w
      << " data_loss=" << result.loss.data << " converged=" << result.converged
      << " iterations=" << result.iterations_run << '\n';
  if (out_path.empty()) {
    emit(out, result.params.to_json());
  } else {
    result.params.save(out_path);
    emit(out, nlohmann::json{{"params", out_path},
                             {"residual_rms_w", result.residual_rms_w},
                             {"converged", result.converged}});
  }
  return 0;
}

int cmd_train(const std::string& graph_path, const std::string& params_path,
              const std::string& config_path, const std::string& out_path,
              const std::string& log_path, const std::string& curve_path,
              std::ostream& out, std::ostream& err) {
  const RoadGraph g = RoadGraph::load(graph_path);
  const VehicleParams params =
      params_path.empty() ? VehicleParams{} : VehicleParams::load(params_path);
  const ChargeCurve curve =
      curve_path.empty() ? default_charge_curve() : ChargeCurve::load(curve_path);
  TrainConfig cfg = TrainConfig::load(config_path);
  if (const auto seed = env_seed_override()) cfg.ppo.seed = *seed;

  const TrainResult result = train(g, params, curve, cfg, &err);
  result.net.save(out_path, cfg.config_hash());
  {
    std::ofstream log(log_path);
    if (!log) throw Error("cannot open training log: " + log_path);
    write_training_log(log, result.rows);
  }
  nlohmann::json stages = nlohmann::json::array();
  for (const StageSummary& s : result.summaries) {
    stages.push_back({{"stage", s.stage},
                      {"expanded", s.expanded},
                      {"skipped", s.skipped},
                      {"episodes", s.episodes},
                      {"success_rate", s.success_rate},
                      {"mean_return", s.mean_return},
                      {"compliance_rate", s.compliance_rate},
                      {"depletion_rate", s.depletion_rate}});
  }
  emit(out, nlohmann::json{{"checkpoint", out_path},
                           {"training_log", log_path},
                           {"config_hash", cfg.config_hash()},
                           {"stages", stages}});
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"charge-aware EV route planning and training"};
  app.require_subcommand(1);

  PlanArgs plan_args;
  auto* plan_cmd = app.add_subcommand("plan", "plan a charge-aware route");
  plan_cmd->add_option("--graph", plan_args.graph, "road graph JSON")->required();
  plan_cmd->add_option("--params", plan_args.params, "vehicle params JSON");
  plan_cmd->add_option("--curve", plan_args.curve, "charge curve JSON");
  plan_cmd->add_option("--from", plan_args.from, "start lat,lon")->required();
  plan_cmd->add_option("--to", plan_args.to, "goal lat,lon")->required();
  plan_cmd->add_option("--soc0", plan_args.soc0, "initial SoC percent");
  plan_cmd->add_option("--cap", plan_args.cap, "charging cap percent");
  plan_cmd->add_option("--mode", plan_args.mode, "teacher | policy");
  plan_cmd->add_option("--checkpoint", plan_args.checkpoint, "policy checkpoint");
  plan_cmd->add_option("--trace", plan_args.trace, "episode trace JSONL (policy mode)");

  std::string est_log, est_out;
  EstimatorConfig est_cfg;
  auto* est_cmd = app.add_subcommand("estimate", "fit vehicle parameters from a drive log");
  est_cmd->add_option("--log", est_log, "drive log CSV")->required();
  est_cmd->add_option("--out", est_out, "output params JSON (default: stdout)");
  est_cmd->add_option("--iterations", est_cfg.iterations, "optimizer iterations");
  est_cmd->add_option("--seed", est_cfg.seed, "optimizer seed");

  std::string tr_graph, tr_params, tr_config, tr_out, tr_log = "train_log.csv", tr_curve;
  auto* tr_cmd = app.add_subcommand("train", "curriculum-train a routing policy");
  tr_cmd->add_option("--graph", tr_graph, "road graph JSON")->required();
  tr_cmd->add_option("--params", tr_params, "vehicle params JSON");
  tr_cmd->add_option("--config", tr_config, "training config JSON")->required();
  tr_cmd->add_option("--out", tr_out, "checkpoint output path")->required();
  tr_cmd->add_option("--log", tr_log, "training log CSV path");
  tr_cmd->add_option("--curve", tr_curve, "charge curve JSON");

  std::string exp_plan;
  auto* exp_cmd = app.add_subcommand("export-geojson", "convert a plan JSON to GeoJSON");
  exp_cmd->add_option("plan", exp_plan, "plan JSON file")->required();

  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic graph");
  gen_cmd->require_subcommand(1);
  int gc_nodes = 25, gc_every = 1, gg_rows = 5, gg_cols = 5, gg_every = 3;
  double gc_hop = 230.0, gc_speed = 100.0, gg_hop = 50.0, gg_speed = 100.0;
  std::uint64_t gc_seed = 0, gg_seed = 0;
  std::string gc_out, gg_out;
  auto* gc = gen_cmd->add_subcommand("corridor", "bidirectional chain");
  gc->add_option("--nodes", gc_nodes, "node count");
  gc->add_option("--hop-km", gc_hop, "hop length km");
  gc->add_option("--charger-every", gc_every, "charger stride");
  gc->add_option("--speed-kmh", gc_speed, "speed limit");
  gc->add_option("--seed", gc_seed, "origin seed");
  gc->add_option("--out", gc_out, "output path (default: stdout)");
  auto* gg = gen_cmd->add_subcommand("grid", "4-neighbor lattice");
  gg->add_option("--rows", gg_rows, "rows");
  gg->add_option("--cols", gg_cols, "cols");
  gg->add_option("--hop-km", gg_hop, "hop length km");
  gg->add_option("--charger-every", gg_every, "charger stride");
  gg->add_option("--speed-kmh", gg_speed, "speed limit");
  gg->add_option("--seed", gg_seed, "origin seed");
  gg->add_option("--out", gg_out, "output path (default: stdout)");

  std::vector<const char*> argv;
  argv.push_back("vega");
  for (const std::string& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    std::stringstream help_out;
    const int code = app.exit(e, help_out, help_out);
    (code == 0 ? out : err) << help_out.str();
    return code == 0 ? 0 : 2;
  }

  try {
    if (plan_cmd->parsed()) return cmd_plan(plan_args, out, err);
    if (est_cmd->parsed()) return cmd_estimate(est_log, est_out, est_cfg, out, err);
    if (tr_cmd->parsed()) {
      return cmd_train(tr_graph, tr_params, tr_config, tr_out, tr_log, tr_curve, out, err);
    }
    if (exp_cmd->parsed()) {
      std::ifstream in(exp_plan);
      if (!in) throw ParseError("cannot open plan file: " + exp_plan);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(exp_plan + ": " + e.what());
      }
      emit(out, plan_to_geojson(route_plan_from_json(j)));
      return 0;
    }
    if (gen_cmd->parsed()) {
      const std::uint64_t seed_default = env_seed_override().value_or(0);
      RoadGraph g = gc->parsed()
                        ? gen_corridor(gc_nodes, gc_hop, gc_every, gc_speed,
                                       gc->count("--seed") ? gc_seed : seed_default)
                        : gen_grid(gg_rows, gg_cols, gg_hop, gg_every, gg_speed,
                                   gg->count("--seed") ? gg_seed : seed_default);
      const std::string& path = gc->parsed() ? gc_out : gg_out;
      if (path.empty()) {
        emit(out, g.to_json());
      } else {
        g.save(path);
        emit(out, nlohmann::json{{"graph", path},
                                 {"nodes", g.size()},
                                 {"edges", g.edge_count()}});
      }
      return 0;
    }
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NoFeasiblePath& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const MissingPowerChannel& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const NoGoalAtDistance& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const SnapFailure& e) {
    err << "error: " << e.what() << '\n';
    return 4;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace vega
