#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nuwa/error.hpp"
#include "nuwa/experiments.hpp"
#include "nuwa/fixed/tanh.hpp"
#include "nuwa/rl/server.hpp"

namespace {

using namespace nuwa;
using core::SimTime;

struct Common {
  std::uint64_t seed = 1;
  std::string out = "-";
  std::string event_log;
};

struct LinkFlags {
  std::string trace;
  std::int64_t queue = 250;
  double delay_ms = 20.0;
  double ack_delay_ms = 20.0;
  double loss = 0.0;
  int mtu = core::kDefaultMtu;
  bool no_loop = false;
};

struct NuwaFlags {
  int k = 7;
  std::int64_t td = 5000;
  std::int64_t rho = 2500;
  bool literal_sign = false;
};

void add_link_flags(CLI::App* cmd, LinkFlags& f, bool trace_required) {
  auto* t = cmd->add_option("--trace", f.trace, "Trace file, one delivery-opportunity timestamp in ms per line");
  if (trace_required) t->required();
  cmd->add_option("--queue", f.queue, "Bottleneck buffer in packets")->check(CLI::PositiveNumber);
  cmd->add_option("--delay-ms", f.delay_ms, "One-way propagation delay, sender to receiver")->check(CLI::NonNegativeNumber);
  cmd->add_option("--ack-delay-ms", f.ack_delay_ms, "ACK path delay")->check(CLI::NonNegativeNumber);
  cmd->add_option("--loss", f.loss, "Random loss probability at the bottleneck")->check(CLI::Range(0.0, 0.999999));
  cmd->add_option("--mtu", f.mtu, "Packet size in bytes")->check(CLI::PositiveNumber);
  cmd->add_flag("--no-loop", f.no_loop, "Fail instead of repeating a trace shorter than the run");
}

void add_nuwa_flags(CLI::App* cmd, NuwaFlags& f) {
  cmd->add_option("--k", f.k, "Aggressiveness")->check(CLI::Range(1, 9));
  cmd->add_option("--td", f.td, "Target queueing delay in us")->check(CLI::NonNegativeNumber);
  cmd->add_option("--rho", f.rho, "Trend sensitivity in us")->check(CLI::PositiveNumber);
  cmd->add_flag("--literal-sign", f.literal_sign, "Use the literal (Q_t-Q_m)-(R_t-R_m) delay sign");
}

SimTime from_ms_double(double ms) { return SimTime{static_cast<std::int64_t>(ms * 1000.0)}; }

netsim::LinkConfig link_without_trace(const LinkFlags& f, const Common& c) {
  netsim::LinkConfig link;
  link.queue_capacity = f.queue;
  link.one_way_prop_delay = from_ms_double(f.delay_ms);
  link.reverse_path_delay = from_ms_double(f.ack_delay_ms);
  link.random_loss_rate = f.loss;
  link.rng_seed = c.seed;
  link.mtu = f.mtu;
  link.loop_trace = !f.no_loop;
  return link;
}

netsim::LinkConfig make_link(const LinkFlags& f, const Common& c, std::optional<core::TraceSchedule> fallback = {}) {
  auto link = link_without_trace(f, c);
  if (!f.trace.empty()) {
    link.trace = core::load_trace_file(f.trace);
  } else if (fallback) {
    link.trace = std::move(*fallback);
  } else {
    throw ConfigError("a trace is required");
  }
  link.validate();
  return link;
}

cc::ControllerSpec make_spec(cc::Algo algo, const NuwaFlags& n) {
  cc::ControllerSpec spec;
  spec.algo = algo;
  spec.nuwa.k = n.k;
  spec.nuwa.target_delay_us = n.td;
  spec.nuwa.sensitivity_us = n.rho;
  if (n.literal_sign) spec.estimator.sign = owd::SignConvention::kAsPrinted;
  return spec;
}

SimTime seconds_arg(double s) {
  if (!(s > 0.0)) throw ConfigError("duration must be positive");
  return SimTime{static_cast<std::int64_t>(s * 1e6)};
}

// Opens --out, or stdout for "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path != "-") {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw Error("cannot open '" + path + "' for writing");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::unique_ptr<std::ofstream> open_event_log(const Common& c) {
  if (c.event_log.empty()) return nullptr;
  auto f = std::make_unique<std::ofstream>(c.event_log);
  if (!*f) throw Error("cannot open '" + c.event_log + "' for writing");
  return f;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven simulator for receiver-driven congestion control"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--seed", common.seed, "Seed for random loss and jitter");
  app.add_option("--out", common.out, "Output file, - for stdout");
  app.add_option("--event-log", common.event_log, "Write per-packet events as JSON lines");

  // run
  auto* run = app.add_subcommand("run", "Run flows over one bottleneck and write per-100ms metrics CSV");
  LinkFlags run_link;
  NuwaFlags run_nuwa;
  std::string run_algo = "nuwa";
  double run_dur = 60.0;
  int run_flows = 1;
  double run_stagger = 0.0;
  double run_fixed = 10.0;
  add_link_flags(run, run_link, true);
  add_nuwa_flags(run, run_nuwa);
  run->add_option("--algo", run_algo, "nuwa, cubic, reno or fixed");
  run->add_option("--dur", run_dur, "Duration in seconds");
  run->add_option("--flows", run_flows, "Number of identical flows")->check(CLI::Range(1, 64));
  run->add_option("--stagger", run_stagger, "Seconds between flow starts")->check(CLI::NonNegativeNumber);
  run->add_option("--window", run_fixed, "Window for --algo fixed")->check(CLI::PositiveNumber);

  // fairness
  auto* fair = app.add_subcommand("fairness", "Staggered-start competition; per-second rates and Jain index CSV");
  LinkFlags fair_link;
  NuwaFlags fair_nuwa{7, 64000, 32000, false};
  std::string pair = "nuwa,cubic";
  int per_algo = 2;
  double stagger = 10.0;
  double fair_dur = 60.0;
  double fair_mbps = 10.0;
  add_link_flags(fair, fair_link, false);
  add_nuwa_flags(fair, fair_nuwa);
  fair->add_option("--pair", pair, "Two controllers, first,second");
  fair->add_option("--flows-per-algo", per_algo)->check(CLI::Range(1, 16));
  fair->add_option("--stagger", stagger, "Seconds between flow starts")->check(CLI::PositiveNumber);
  fair->add_option("--dur", fair_dur, "Duration in seconds");
  fair->add_option("--mbps", fair_mbps, "Constant capacity when no --trace is given")->check(CLI::PositiveNumber);

  // sweep-k
  auto* sweep = app.add_subcommand("sweep-k", "One Nuwa run per k in [1, 9]; summary CSV");
  LinkFlags sweep_link;
  NuwaFlags sweep_nuwa;
  double sweep_dur = 60.0;
  add_link_flags(sweep, sweep_link, true);
  add_nuwa_flags(sweep, sweep_nuwa);
  sweep->add_option("--dur", sweep_dur, "Duration in seconds");

  // trace-validate
  auto* validate = app.add_subcommand("trace-validate", "Parse a trace and print a JSON summary");
  std::string validate_path;
  int validate_mtu = core::kDefaultMtu;
  validate->add_option("trace", validate_path, "Trace file")->required();
  validate->add_option("--mtu", validate_mtu)->check(CLI::PositiveNumber);

  // trace-gen
  auto* gen = app.add_subcommand("trace-gen", "Write a synthetic trace");
  std::string gen_kind = "constant";
  double gen_high = 24.0, gen_low = 6.0;
  std::int64_t gen_period = 10000, gen_dur = 60000, gen_segment = 1000;
  gen->add_option("kind", gen_kind, "constant, square or fluctuating")
      ->check(CLI::IsMember({"constant", "square", "fluctuating"}));
  gen->add_option("--high", gen_high, "Mbit/s (constant uses this)")->check(CLI::PositiveNumber);
  gen->add_option("--low", gen_low, "Mbit/s")->check(CLI::PositiveNumber);
  gen->add_option("--half-period-ms", gen_period)->check(CLI::PositiveNumber);
  gen->add_option("--segment-ms", gen_segment)->check(CLI::PositiveNumber);
  gen->add_option("--dur-ms", gen_dur)->check(CLI::PositiveNumber);

  // env-serve
  auto* serve = app.add_subcommand("env-serve", "Serve the RL environment over newline-delimited JSON/TCP");
  LinkFlags serve_link;
  NuwaFlags serve_nuwa;
  std::string host = "127.0.0.1";
  int port = 9000;
  add_link_flags(serve, serve_link, false);
  add_nuwa_flags(serve, serve_nuwa);
  serve->add_option("--host", host);
  serve->add_option("--port", port, "0 picks a free port")->check(CLI::Range(0, 65535));

  // tanh-table
  auto* table = app.add_subcommand("tanh-table", "Write the fixed-point tanh table as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*run) {
      const auto link = make_link(run_link, common);
      const auto algo = cc::parse_algo(run_algo);
      auto spec = make_spec(algo, run_nuwa);
      spec.fixed_window = run_fixed;
      std::vector<netsim::FlowSpec> flows;
      for (int i = 0; i < run_flows; ++i) flows.push_back({from_ms_double(run_stagger * 1000.0 * i), spec});
      const auto dur = seconds_arg(run_dur);
      if (flows.back().start >= dur) throw ConfigError("duration must exceed the last flow start");
      auto log = open_event_log(common);
      const auto res = netsim::run(link, flows, dur, {log.get()});
      Output out(common.out);
      core::write_metrics_csv(out.stream(), res.flows);
    } else if (*fair) {
      const auto comma = pair.find(',');
      if (comma == std::string::npos) throw ConfigError("--pair needs two controllers, e.g. nuwa,cubic");
      experiments::FairnessConfig cfg;
      const auto ms = static_cast<std::int64_t>(fair_dur * 1000.0) + 1;
      cfg.link = make_link(fair_link, common, core::constant_trace(fair_mbps, ms, fair_link.mtu));
      cfg.first = make_spec(cc::parse_algo(pair.substr(0, comma)), fair_nuwa);
      cfg.second = make_spec(cc::parse_algo(pair.substr(comma + 1)), fair_nuwa);
      cfg.flows_per_algo = per_algo;
      cfg.stagger = seconds_arg(stagger);
      cfg.duration = seconds_arg(fair_dur);
      auto log = open_event_log(common);
      const auto res = experiments::run_fairness(cfg, {log.get()});
      Output out(common.out);
      experiments::write_fairness_csv(out.stream(), res);
    } else if (*sweep) {
      const auto link = make_link(sweep_link, common);
      const auto rows = experiments::sweep_k(link, make_spec(cc::Algo::kNuwa, sweep_nuwa), seconds_arg(sweep_dur));
      Output out(common.out);
      experiments::write_sweep_csv(out.stream(), rows);
    } else if (*validate) {
      const auto trace = core::load_trace_file(validate_path);
      nlohmann::json report{{"ok", true},
                            {"opportunities", trace.opportunities.size()},
                            {"duration_ms", trace.duration_ms},
                            {"mean_mbps", trace.mean_capacity_bps(validate_mtu) / 1e6}};
      Output out(common.out);
      out.stream() << report.dump() << '\n';
    } else if (*gen) {
      core::TraceSchedule trace;
      if (gen_kind == "constant") {
        trace = core::constant_trace(gen_high, gen_dur);
      } else if (gen_kind == "square") {
        trace = core::square_wave_trace(gen_high, gen_low, gen_period, gen_dur);
      } else {
        trace = core::fluctuating_trace(gen_low, gen_high, gen_segment, gen_dur, common.seed);
      }
      Output out(common.out);
      out.stream() << core::serialize_trace(trace);
    } else if (*serve) {
      rl::EnvConfig cfg;
      cfg.link = link_without_trace(serve_link, common);
      if (!serve_link.trace.empty()) cfg.link = make_link(serve_link, common);
      const auto spec = make_spec(cc::Algo::kNuwa, serve_nuwa);
      cfg.nuwa = spec.nuwa;
      cfg.estimator = spec.estimator;
      rl::install_stop_signals();
      rl::EnvServer server(cfg);
      const int bound = server.listen(host, port);
      std::fprintf(stderr, "listening on %s:%d\n", host.c_str(), bound);
      server.serve();
    } else if (*table) {
      Output out(common.out);
      fixed::write_table_csv(out.stream(), fixed::kGoldenTanhTable);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
