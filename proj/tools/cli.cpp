#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "fbcast/chain_model.hpp"
#include "fbcast/feedback_lp.hpp"
#include "fbcast/mrp.hpp"
#include "fbcast/sim.hpp"

namespace fbcast::cli {

namespace {

std::vector<double> parse_double_list(const std::string& text,
                                      std::size_t expected) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(std::stod(item));
  }
  if (out.size() != expected) {
    throw RejectedInputError("expected " + std::to_string(expected) +
                             " comma-separated values, got '" + text + "'");
  }
  return out;
}

std::vector<std::uint64_t> parse_u64_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(std::stoull(item));
  }
  return out;
}

std::vector<double> parse_range(const std::string& text) {
  // a:b:step, inclusive of b up to floating slack.
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.size() != 3) {
    throw RejectedInputError("range must be start:stop:step");
  }
  const double a = std::stod(parts[0]);
  const double b = std::stod(parts[1]);
  const double step = std::stod(parts[2]);
  if (step <= 0.0 || b < a) {
    throw RejectedInputError("range requires stop >= start and step > 0");
  }
  std::vector<double> out;
  const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i) out.push_back(a + step * static_cast<double>(i));
  return out;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") {
      stream_ = &std::cout;
    } else {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw RejectedInputError("cannot open output file: " + path);
      stream_ = file_.get();
    }
  }
  std::ostream& os() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_ = nullptr;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RejectedInputError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_mrp(const std::string& spec_path, const std::string& horizon,
            const std::string& prior_text, const std::string& out_path) {
  std::ifstream in(spec_path);
  if (!in) throw RejectedInputError("cannot open spec file: " + spec_path);
  MrpSpec spec = mrp_from_text(in);
  CanonicalMrp canon = canonicalize(spec);

  std::optional<unsigned> n;
  if (horizon != "inf") {
    const long v = std::stol(horizon);
    if (v <= 0) throw RejectedInputError("horizon must be positive or 'inf'");
    n = static_cast<unsigned>(v);
  }
  std::optional<std::vector<double>> prior;
  if (!prior_text.empty()) {
    prior = parse_double_list(prior_text, spec.num_states());
  }
  RewardSummary summary = unscaled_rewards(canon, n, prior);

  Output out(out_path);
  out.os() << "# fbcast-mrp-csv v1\n";
  out.os() << "state,reward_horizon,value\n";
  out.os().precision(12);
  for (std::size_t i = 0; i < spec.num_states(); ++i) {
    out.os() << (i + 1) << ',' << horizon << ',' << summary.per_state[i] << '\n';
  }
  if (summary.with_prior) {
    out.os() << "prior," << horizon << ',' << *summary.with_prior << '\n';
  }
  return 0;
}

int cmd_uncoded(const std::string& eps_text, const std::string& d_text,
                const std::string& out_path) {
  const auto e = parse_double_list(eps_text, 3);
  ChannelTriple eps{{e[0], e[1], e[2]}};
  DistortionTriple d{{0.0, 0.0, 0.0}};
  if (!d_text.empty()) {
    const auto dv = parse_double_list(d_text, 3);
    d = DistortionTriple{{dv[0], dv[1], dv[2]}};
  }
  OptimalityReport report = optimality_report(eps, d);

  Output out(out_path);
  out.os() << "# fbcast-uncoded-csv v1\n";
  out.os() << "eps1,eps2,eps3,t0,t1,t2,t3,t_star,w_minus,w_plus,"
              "q_res1,q_res2,q_res3,theorem2,theorem3\n";
  out.os().precision(12);
  out.os() << eps[0] << ',' << eps[1] << ',' << eps[2];
  out.os() << ',' << report.uncoded.t0;
  for (double t : report.uncoded.t) out.os() << ',' << t;
  out.os() << ',' << report.uncoded.t_star;
  out.os() << ',' << report.bounds.w_minus << ',' << report.bounds.w_plus;
  for (double q : report.uncoded.residual_queues) out.os() << ',' << q;
  out.os() << ',' << (report.theorem2_holds ? 1 : 0) << ','
           << (report.theorem3_holds ? 1 : 0) << '\n';
  return 0;
}

int cmd_chain_region(double eps_i, double eps_k, const std::string& sweep,
                     std::uint64_t n_symbols, bool asymptotic,
                     bool unconditional, const std::string& out_path) {
  BoundarySpec spec;
  spec.eps_i = eps_i;
  spec.eps_k = eps_k;
  spec.eps_u_values = parse_range(sweep);
  if (!asymptotic) {
    if (n_symbols == 0) {
      throw RejectedInputError("provide --N or --asymptotic");
    }
    spec.n_symbols = n_symbols;
  }
  spec.unconditional_decode_reward = unconditional;
  const auto curve = distortion_boundary(spec);

  Output out(out_path);
  out.os() << "# fbcast-chain-region-csv v1\n";
  out.os() << "eps_u,d_hat_u,e_reward_u,e_reward_E,d_i_boundary\n";
  out.os().precision(12);
  for (const auto& p : curve) {
    out.os() << p.eps_u << ',' << p.d_hat_u << ',' << p.e_reward_u << ','
             << p.e_reward_E << ',' << p.d_i_boundary << '\n';
  }
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& out_path,
                 const std::string& trace_path) {
  SimConfig cfg = sim_config_from_json(read_file(config_path));
  std::unique_ptr<std::ofstream> trace;
  if (!trace_path.empty()) {
    cfg.trace = true;
    trace = std::make_unique<std::ofstream>(trace_path);
    if (!*trace) throw RejectedInputError("cannot open trace file: " + trace_path);
  } else if (cfg.trace) {
    trace = std::make_unique<std::ofstream>("trace.csv");
  }
  Simulator sim(cfg, trace.get());
  SimResult result = sim.run();

  Output out(out_path);
  out.os() << "# fbcast-sim-csv v1\n";
  out.os() << SimResult::csv_header() << '\n';
  out.os() << result.csv_row() << '\n';
  return 0;
}

struct SweepRow {
  double value = 0.0;
  std::uint64_t seed = 0;
  std::string result_row;
  std::string error;
  double latency = 0.0;
  double uncoded = 0.0;
  bool ok = false;
};

SimConfig apply_axis(const SimConfig& base, const std::string& axis,
                     double value) {
  SimConfig cfg = base;
  auto eps = cfg.eps.eps;
  auto d = cfg.d.d;
  if (axis == "eps1" || axis == "eps2" || axis == "eps3") {
    eps[static_cast<std::size_t>(axis[3] - '1')] = value;
    cfg.eps = ChannelTriple{eps};
  } else if (axis == "d1" || axis == "d2" || axis == "d3") {
    d[static_cast<std::size_t>(axis[1] - '1')] = value;
    cfg.d = DistortionTriple{d};
  } else if (axis == "n_symbols") {
    cfg.n_symbols = static_cast<std::uint64_t>(value);
  } else {
    throw RejectedInputError("unknown sweep axis: " + axis);
  }
  return cfg;
}

int cmd_sweep(const std::string& config_path, const std::string& axis,
              const std::string& values_text, const std::string& seeds_text,
              const std::string& out_path, const std::string& agg_path) {
  const SimConfig base = sim_config_from_json(read_file(config_path));
  std::vector<double> values;
  {
    std::stringstream ss(values_text);
    std::string item;
    while (std::getline(ss, item, ',')) values.push_back(std::stod(item));
  }
  std::vector<std::uint64_t> seeds = parse_u64_list(seeds_text);
  std::sort(values.begin(), values.end());
  std::sort(seeds.begin(), seeds.end());

  std::vector<SweepRow> rows;
  for (double value : values) {
    for (std::uint64_t seed : seeds) {
      SweepRow row;
      row.value = value;
      row.seed = seed;
      try {
        SimConfig cfg = apply_axis(base, axis, value);
        cfg.seed = seed;
        cfg.trace = false;
        Simulator sim(cfg);
        SimResult res = sim.run();
        row.result_row = res.csv_row();
        row.latency = res.latency;
        row.uncoded = res.t_hat0 + res.t_hat[0] + res.t_hat[1] + res.t_hat[2];
        row.ok = true;
      } catch (const std::exception& err) {
        std::string msg = err.what();
        std::replace(msg.begin(), msg.end(), ',', ';');
        row.error = msg;
      }
      rows.push_back(std::move(row));
    }
  }

  Output out(out_path);
  out.os() << "# fbcast-sweep-csv v1\n";
  out.os() << "axis,value," << SimResult::csv_header() << ",error\n";
  out.os().precision(12);
  for (const auto& row : rows) {
    out.os() << axis << ',' << row.value << ',';
    if (row.ok) {
      out.os() << row.result_row << ",";
    } else {
      // Keep the column count: empty measurement fields, then the error.
      const auto columns =
          std::count(SimResult::csv_header().begin(),
                     SimResult::csv_header().end(), ',') + 1;
      for (long c = 0; c < columns; ++c) out.os() << ',';
    }
    out.os() << row.error << '\n';
  }

  if (!agg_path.empty()) {
    Output agg(agg_path);
    agg.os() << "# fbcast-sweep-agg-csv v1\n";
    agg.os() << "axis,value,runs,mean_latency,se_latency,mean_uncoded,"
                "se_uncoded,t_star,w_plus\n";
    agg.os().precision(12);
    for (double value : values) {
      std::vector<const SweepRow*> group;
      for (const auto& row : rows) {
        if (row.value == value && row.ok) group.push_back(&row);
      }
      const SimConfig cfg = apply_axis(base, axis, value);
      const UncodedSolution lp = solve_uncoded_lp(cfg.eps);
      const LatencyBounds wb = latency_bounds(cfg.eps, cfg.d);
      double mean_lat = 0.0, mean_unc = 0.0;
      for (const auto* row : group) {
        mean_lat += row->latency;
        mean_unc += row->uncoded;
      }
      const double count = static_cast<double>(group.size());
      if (!group.empty()) {
        mean_lat /= count;
        mean_unc /= count;
      }
      double var_lat = 0.0, var_unc = 0.0;
      for (const auto* row : group) {
        var_lat += (row->latency - mean_lat) * (row->latency - mean_lat);
        var_unc += (row->uncoded - mean_unc) * (row->uncoded - mean_unc);
      }
      double se_lat = 0.0, se_unc = 0.0;
      if (group.size() > 1) {
        se_lat = std::sqrt(var_lat / (count - 1.0) / count);
        se_unc = std::sqrt(var_unc / (count - 1.0) / count);
      }
      agg.os() << axis << ',' << value << ',' << group.size() << ','
               << mean_lat << ',' << se_lat << ',' << mean_unc << ','
               << se_unc << ',' << lp.t_star << ',' << wb.w_plus << '\n';
    }
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"analysis and simulation of feedback-assisted erasure broadcast"};
  app.require_subcommand(1);

  auto* mrp = app.add_subcommand(
      "mrp", "expected accumulated rewards of an absorbing reward chain");
  std::string mrp_spec, mrp_horizon = "inf", mrp_prior, mrp_out = "-";
  mrp->add_option("--spec", mrp_spec, "chain file: transition then reward matrix")
      ->required();
  mrp->add_option("--horizon", mrp_horizon, "positive step count or 'inf'");
  mrp->add_option("--prior", mrp_prior, "comma-separated initial distribution");
  mrp->add_option("--out", mrp_out, "output CSV path, '-' for stdout");

  auto* unc = app.add_subcommand(
      "uncoded-lp", "latency analysis of the instantly-decodable phase");
  std::string unc_eps, unc_d, unc_out = "-";
  unc->add_option("--eps", unc_eps, "erasure rates e1,e2,e3")->required();
  unc->add_option("--d", unc_d, "distortion targets d1,d2,d3");
  unc->add_option("--out", unc_out, "output CSV path");

  auto* region = app.add_subcommand(
      "chain-region", "certified distortion boundary of the chaining scheme");
  double region_eps_i = 0.0, region_eps_k = 0.0;
  std::string region_sweep, region_out = "-";
  std::uint64_t region_n = 0;
  bool region_asym = false;
  bool region_uncond = false;
  region->add_option("--eps-i", region_eps_i, "builder erasure rate")->required();
  region->add_option("--eps-k", region_eps_k, "fixed target erasure rate")
      ->required();
  region->add_option("--sweep-eps-u", region_sweep, "swept target rate a:b:step")
      ->required();
  region->add_option("--N", region_n, "block length for the floor bound");
  region->add_flag("--asymptotic", region_asym, "drop the floor (N to infinity)");
  region->add_flag("--unconditional", region_uncond,
                   "use the unconditional decode reward");
  region->add_option("--out", region_out, "output CSV path");

  auto* sim = app.add_subcommand("simulate", "run one seeded experiment");
  std::string sim_config, sim_out = "-", sim_trace;
  sim->add_option("--config", sim_config, "JSON config path")->required();
  sim->add_option("--out", sim_out, "output CSV path");
  sim->add_option("--trace", sim_trace, "per-slot trace output path");

  auto* sweep = app.add_subcommand("sweep", "parameter sweep of experiments");
  std::string sweep_config, sweep_axis, sweep_values, sweep_seeds;
  std::string sweep_out = "-", sweep_agg;
  sweep->add_option("--config", sweep_config, "base JSON config")->required();
  sweep->add_option("--axis", sweep_axis, "config field to vary")->required();
  sweep->add_option("--values", sweep_values, "comma-separated axis values")
      ->required();
  sweep->add_option("--seeds", sweep_seeds, "comma-separated seeds")->required();
  sweep->add_option("--out", sweep_out, "per-run CSV path");
  sweep->add_option("--aggregate", sweep_agg, "per-axis-value aggregate CSV");

  std::vector<const char*> argv;
  argv.push_back("fbcast");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*mrp) return cmd_mrp(mrp_spec, mrp_horizon, mrp_prior, mrp_out);
    if (*unc) return cmd_uncoded(unc_eps, unc_d, unc_out);
    if (*region) {
      return cmd_chain_region(region_eps_i, region_eps_k, region_sweep,
                              region_n, region_asym, region_uncond, region_out);
    }
    if (*sim) return cmd_simulate(sim_config, sim_out, sim_trace);
    if (*sweep) {
      return cmd_sweep(sweep_config, sweep_axis, sweep_values, sweep_seeds,
                       sweep_out, sweep_agg);
    }
  } catch (const RejectedInputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace fbcast::cli
