#include "mmc/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "mmc/servo.hpp"

namespace mmc::cli {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelSource {
  std::string builtin;
  std::string urdf;
  std::string dh;
  std::string tip;
};

void add_model_options(CLI::App* sub, ModelSource& src) {
  auto* b = sub->add_option("--builtin", src.builtin, "Bundled model: panda, ur5, planar2r");
  auto* u = sub->add_option("--urdf", src.urdf, "URDF file");
  auto* d = sub->add_option("--dh", src.dh, "DH table file");
  sub->add_option("--tip", src.tip, "Tip link for URDF models");
  b->excludes(u)->excludes(d);
  u->excludes(d);
}

RobotModel resolve_model(const ModelSource& src) {
  if (!src.builtin.empty()) {
    return builtin_model(src.builtin);
  }
  if (!src.urdf.empty()) {
    return load_urdf_file(src.urdf, src.tip);
  }
  if (!src.dh.empty()) {
    return load_dh_file(src.dh);
  }
  throw UsageError("a model source is required (--builtin, --urdf or --dh)");
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) {
        throw std::invalid_argument(item);
      }
    } catch (const std::logic_error&) {
      throw UsageError(what + ": cannot parse '" + item + "' as a number");
    }
  }
  return values;
}

JointConfig parse_config(const std::string& text, const RobotModel& model, const std::string& what) {
  const std::vector<double> v = parse_list(text, what);
  if (static_cast<int>(v.size()) != model.n()) {
    throw UsageError(what + " has " + std::to_string(v.size()) + " values but " + model.name() + " has " +
                     std::to_string(model.n()) + " joints");
  }
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

AxisSelection parse_axes(const std::string& s) {
  if (s == "all") return AxisSelection::all;
  if (s == "trans") return AxisSelection::translational;
  if (s == "rot") return AxisSelection::rotational;
  if (s == "trans-xy") return AxisSelection::translational_xy;
  throw UsageError("unknown axes '" + s + "'");
}

// Options shared by the servo and experiment subcommands.
struct ServoOptions {
  double gain = 1.0;
  double dt = 0.02;
  double t_max = 30.0;
  double max_linear = 0.5;
  double max_angular = 1.0;
  double arrive_translation = 1e-3;
  double arrive_rotation_deg = 0.5;
  double lambda_q = 0.01;
  std::string lambda_delta = "inverse";
  double lambda_delta_cap = 1e6;
  double eta = 1.0;
  double rho_i_deg = 50.0;
  double rho_s_deg = 2.0;
  double park_gain = 100.0;
  double slack_bound = 10.0;
  double singular_eps = kDefaultSingularEps;
  double capsule_radius = 0.03;
  bool no_clamp = false;
  bool timing = false;
};

void add_servo_options(CLI::App* sub, ServoOptions& o) {
  sub->add_option("--gain", o.gain, "Servo gain")->capture_default_str();
  sub->add_option("--dt", o.dt, "Control period (s)")->capture_default_str();
  sub->add_option("--t-max", o.t_max, "Trial timeout (s)")->capture_default_str();
  sub->add_option("--max-linear", o.max_linear, "Linear twist cap (m/s)")->capture_default_str();
  sub->add_option("--max-angular", o.max_angular, "Angular twist cap (rad/s)")->capture_default_str();
  sub->add_option("--arrive-translation", o.arrive_translation, "Arrival tolerance (m)")->capture_default_str();
  sub->add_option("--arrive-rotation-deg", o.arrive_rotation_deg, "Arrival tolerance (deg)")->capture_default_str();
  sub->add_option("--lambda-q", o.lambda_q, "Joint velocity weight")->capture_default_str();
  sub->add_option("--lambda-delta", o.lambda_delta, "Slack weight: 'inverse' or a number")->capture_default_str();
  sub->add_option("--lambda-delta-cap", o.lambda_delta_cap, "Cap on the inverse-error slack weight")
      ->capture_default_str();
  sub->add_option("--eta", o.eta, "Velocity damper gain")->capture_default_str();
  sub->add_option("--rho-i-deg", o.rho_i_deg, "Damper influence distance (deg)")->capture_default_str();
  sub->add_option("--rho-s-deg", o.rho_s_deg, "Damper stopping distance (deg)")->capture_default_str();
  sub->add_option("--park-gain", o.park_gain, "Null-space gain for park and baur")->capture_default_str();
  sub->add_option("--slack-bound", o.slack_bound, "Box bound on each slack component")->capture_default_str();
  sub->add_option("--singular-eps", o.singular_eps, "Manipulability singularity guard")->capture_default_str();
  sub->add_option("--capsule-radius", o.capsule_radius, "Self-collision proxy radius (m), 0 disables")
      ->capture_default_str();
  sub->add_flag("--no-clamp", o.no_clamp, "Do not saturate rrmc/park/baur joint velocities");
  sub->add_flag("--timing", o.timing, "Record controller wall time per step");
}

PBSConfig make_pbs(const ServoOptions& o) {
  PBSConfig pbs;
  pbs.gain = o.gain;
  pbs.dt = o.dt;
  pbs.t_max = o.t_max;
  pbs.max_linear_speed = o.max_linear;
  pbs.max_angular_speed = o.max_angular;
  pbs.arrival.translation = o.arrive_translation;
  pbs.arrival.rotation = deg2rad(o.arrive_rotation_deg);
  pbs.clamp_velocity = !o.no_clamp;
  pbs.record_timing = o.timing;
  pbs.capsule_radius = o.capsule_radius;
  ControllerConfig& c = pbs.control;
  c.lambda_q = o.lambda_q;
  if (o.lambda_delta == "inverse") {
    c.lambda_delta = InverseErrorSlackPenalty{o.lambda_delta_cap};
  } else {
    const std::vector<double> v = parse_list(o.lambda_delta, "--lambda-delta");
    if (v.size() != 1) {
      throw UsageError("--lambda-delta expects 'inverse' or a single number");
    }
    c.lambda_delta = FixedSlackPenalty{v[0]};
  }
  c.eta = o.eta;
  c.rho_i = deg2rad(o.rho_i_deg);
  c.rho_s = deg2rad(o.rho_s_deg);
  c.park_gain = o.park_gain;
  c.slack_min = Vector6d::Constant(-o.slack_bound);
  c.slack_max = Vector6d::Constant(o.slack_bound);
  c.singular_eps = o.singular_eps;
  try {
    pbs.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return pbs;
}

void print_matrix(std::ostream& out, const Eigen::MatrixXd& M) {
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
      out << (c ? " " : "") << M(r, c);
    }
    out << '\n';
  }
}

void print_row(std::ostream& out, const Eigen::VectorXd& v) { print_matrix(out, v.transpose()); }

int cmd_model_info(const ModelSource& src, std::ostream& out) {
  const RobotModel model = resolve_model(src);
  const JointLimits& lim = model.limits();
  out << "model: " << model.name() << '\n';
  out << "joints: " << model.n() << '\n';
  out << "ets length: " << model.ets().size() << '\n';
  out << "ets:";
  for (const auto& et : model.ets()) {
    out << ' ' << et.to_string();
  }
  out << '\n';
  out << "joint type q_min q_max qd_min qd_max\n";
  for (int i = 0; i < model.n(); ++i) {
    out << i << ' ' << to_string(model.joint_type(i)) << ' ' << lim.position_min[i] << ' ' << lim.position_max[i]
        << ' ' << lim.velocity_min[i] << ' ' << lim.velocity_max[i] << '\n';
  }
  return kOk;
}

int cmd_eval(const ModelSource& src, const std::string& q_text, const std::string& what, const std::string& axes_text,
             std::ostream& out) {
  const RobotModel model = resolve_model(src);
  const JointConfig q = parse_config(q_text, model, "--q");
  const AxisSelection axes = parse_axes(axes_text);
  if (what == "fk") {
    print_matrix(out, forward_kinematics(model, q).isometry().matrix());
  } else if (what == "jacobian") {
    print_matrix(out, jacobian(model, q));
  } else if (what == "manip") {
    out << manipulability(jacobian(model, q), axes) << '\n';
  } else if (what == "jm") {
    print_row(out, manipulability_jacobian(model, q, axes));
  } else if (what == "ellipsoid") {
    const VelocityEllipsoid e = velocity_ellipsoid(jacobian(model, q), axes);
    out << "radii: ";
    print_row(out, e.radii);
    out << "axes:\n";
    print_matrix(out, e.axes);
  } else {
    throw UsageError("unknown quantity '" + what + "'");
  }
  return kOk;
}

int cmd_servo(const ModelSource& src, const ServoOptions& opts, const std::string& controller, std::uint64_t seed,
              const std::string& start_text, const std::string& goal_text, std::ostream& out) {
  const RobotModel model = resolve_model(src);
  PBSConfig pbs = make_pbs(opts);
  pbs.controller = parse_controller(controller);
  pbs.seed = seed;

  TrialSpec spec;
  spec.model = model.name();
  spec.seed = seed;
  const std::vector<TrialSpec> sampled = make_trials(model, 1, seed, pbs.capsule_radius);
  spec.q_start = start_text.empty() ? sampled[0].q_start : parse_config(start_text, model, "--start");
  spec.goal = goal_text.empty() ? sampled[0].goal
                                 : forward_kinematics(model, parse_config(goal_text, model, "--goal-q"));

  const TrialResult r = run_trial(model, spec, pbs);
  out << "controller: " << to_string(pbs.controller) << '\n';
  out << "outcome: " << to_string(r.outcome) << '\n';
  out << "steps: " << r.steps << '\n';
  out << "mean_m: " << r.mean_m << '\n';
  out << "final_m: " << r.final_m << '\n';
  out << "max_deviation: " << r.max_deviation << '\n';
  out << "mean_deviation: " << r.mean_deviation << '\n';
  out << "final_translation_error: " << r.final_translation_error << '\n';
  out << "final_rotation_error: " << r.final_rotation_error << '\n';
  if (pbs.record_timing) {
    out << "ms_per_step: " << r.wall_time_per_step * 1e3 << '\n';
  }
  out << "q_final: ";
  print_row(out, r.q_final);
  return kOk;
}

std::vector<ControllerKind> parse_controllers(const std::string& text) {
  std::vector<ControllerKind> kinds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const ControllerKind k = parse_controller(item);
    if (std::find(kinds.begin(), kinds.end(), k) != kinds.end()) {
      throw UsageError("controller '" + item + "' listed twice");
    }
    kinds.push_back(k);
  }
  if (kinds.empty()) {
    throw UsageError("--controllers is empty");
  }
  return kinds;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw std::ios_base::failure("cannot open '" + path + "' for writing");
  }
  f << content;
  f.close();
  if (!f) {
    throw std::ios_base::failure("failed writing '" + path + "'");
  }
}

int cmd_experiment(const ModelSource& src, const ServoOptions& opts, const std::string& controllers, int n,
                   std::uint64_t seed, int jobs, const std::string& csv_path, const std::string& json_path,
                   std::ostream& out) {
  const RobotModel model = resolve_model(src);
  PBSConfig pbs = make_pbs(opts);
  pbs.seed = seed;
  const std::vector<ControllerKind> kinds = parse_controllers(controllers);
  const ExperimentResult res = run_experiment(model, n, kinds, pbs, jobs);

  if (!csv_path.empty()) {
    std::ostringstream csv;
    write_trials_csv(csv, res.records, pbs.record_timing);
    write_file(csv_path, csv.str());
  }
  if (!json_path.empty()) {
    std::ostringstream json;
    write_summary_json(json, res.summary);
    write_file(json_path, json.str());
  }
  write_summary_table(out, res.summary);
  return kOk;
}

std::string env_name(const std::string& long_name) {
  std::string s = "MMC_";
  for (char c : long_name) {
    s += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return s;
}

// Gives every long option of every subcommand an MMC_<NAME> environment override.
void attach_env_names(CLI::App& app) {
  for (CLI::App* sub : app.get_subcommands([](CLI::App*) { return true; })) {
    for (CLI::Option* opt : sub->get_options()) {
      if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") {
        continue;
      }
      opt->envname(env_name(opt->get_lnames().front()));
    }
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool has_flag(const std::vector<std::string>& args, const std::string& name) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == "--" + name || a.rfind("--" + name + "=", 0) == 0;
  });
}

// Expands `--config FILE` into flags. File lines are `key = value` with `#`
// comments; keys use the flag names with or without the leading dashes.
// Flags on the command line and MMC_* variables take precedence over the file.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) {
        throw UsageError("--config needs a file name");
      }
      path = args[i + 1];
      args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<long>(i));
      break;
    }
  }
  if (path.empty()) {
    if (const char* env = std::getenv("MMC_CONFIG")) {
      path = env;
    }
  }
  if (path.empty()) {
    return args;
  }
  std::ifstream f(path);
  if (!f) {
    throw UsageError("cannot read config file '" + path + "'");
  }
  std::vector<std::string> extra;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    key.erase(0, key.find_first_not_of('-'));
    std::replace(key.begin(), key.end(), '_', '-');
    if (key.empty()) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": empty key");
    }
    if (has_flag(args, key) || std::getenv(env_name(key).c_str()) != nullptr) {
      continue;
    }
    extra.push_back("--" + key + "=" + value);
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Manipulability-maximising motion control toolkit", "mmc"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  app.footer(
      "Every flag can also be set through MMC_<FLAG> (dashes become underscores)\n"
      "or a key = value file given with --config.");

  ModelSource src;

  auto* info = app.add_subcommand("model-info", "Describe a robot model");
  add_model_options(info, src);

  std::string q_text;
  std::string what;
  std::string axes = "all";
  auto* eval = app.add_subcommand("eval", "Evaluate a kinematic quantity at one configuration");
  add_model_options(eval, src);
  eval->add_option("what", what, "fk, jacobian, manip, jm or ellipsoid")
      ->required()
      ->check(CLI::IsMember({"fk", "jacobian", "manip", "jm", "ellipsoid"}));
  eval->add_option("--q", q_text, "Comma-separated joint coordinates")->required();
  eval->add_option("--axes", axes, "all, trans, rot or trans-xy")
      ->check(CLI::IsMember({"all", "trans", "rot", "trans-xy"}))
      ->capture_default_str();

  ServoOptions servo_opts;
  std::string controller = "mmc";
  std::uint64_t seed = 42;
  std::string start_text;
  std::string goal_text;
  auto* servo = app.add_subcommand("servo", "Run one servoing trial and report its metrics");
  add_model_options(servo, src);
  add_servo_options(servo, servo_opts);
  servo->add_option("--controller", controller, "rrmc, park, baur or mmc")->capture_default_str();
  servo->add_option("--seed", seed, "Seed for the sampled start and goal")->capture_default_str();
  servo->add_option("--start", start_text, "Start configuration (default: sampled)");
  servo->add_option("--goal-q", goal_text, "Configuration whose pose is the goal (default: sampled)");

  std::string controllers = "rrmc,park,baur,mmc";
  int n_trials = 100;
  int jobs = 1;
  std::string csv_path = "trials.csv";
  std::string json_path = "summary.json";
  auto* exp = app.add_subcommand("experiment", "Run every controller on the same seeded trials");
  add_model_options(exp, src);
  add_servo_options(exp, servo_opts);
  exp->add_option("--controllers", controllers, "Comma-separated controller list")->capture_default_str();
  exp->add_option("--n", n_trials, "Number of trials")->check(CLI::PositiveNumber)->capture_default_str();
  exp->add_option("--seed", seed, "Experiment seed")->capture_default_str();
  exp->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  exp->add_option("--csv", csv_path, "Per-trial CSV output, empty to skip")->capture_default_str();
  exp->add_option("--json", json_path, "Summary JSON output, empty to skip")->capture_default_str();

  attach_env_names(app);

  const std::streamsize old_precision = out.precision(6);
  struct RestorePrecision {
    std::ostream& os;
    std::streamsize p;
    ~RestorePrecision() { os.precision(p); }
  } restore{out, old_precision};

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (info->parsed()) {
      return cmd_model_info(src, out);
    }
    if (eval->parsed()) {
      return cmd_eval(src, q_text, what, axes, out);
    }
    if (servo->parsed()) {
      return cmd_servo(src, servo_opts, controller, seed, start_text, goal_text, out);
    }
    return cmd_experiment(src, servo_opts, controllers, n_trials, seed, jobs, csv_path, json_path, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << '\n';
    return kModelError;
  } catch (const SingularityError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace mmc::cli
