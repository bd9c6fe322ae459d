#include "nuwa/experiments.hpp"

#include <algorithm>
#include <cstdio>

#include "nuwa/error.hpp"

namespace nuwa::experiments {

namespace {

constexpr std::int64_t kStepWindowMs = 1000;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::optional<CapacityStep> largest_step(const core::TraceSchedule& trace, int mtu, bool up) {
  const auto cap = trace.capacity_series_bps(kStepWindowMs, mtu);
  std::optional<CapacityStep> best;
  double best_delta = 0.0;
  // The trailing partial window is too short to judge.
  const auto full = static_cast<std::size_t>(trace.duration_ms / kStepWindowMs);
  for (std::size_t i = 1; i < std::min(full, cap.size()); ++i) {
    const double delta = up ? cap[i] - cap[i - 1] : cap[i - 1] - cap[i];
    if (delta > best_delta) {
      best_delta = delta;
      best = CapacityStep{core::from_ms(static_cast<std::int64_t>(i) * kStepWindowMs), cap[i - 1], cap[i]};
    }
  }
  return best;
}

}  // namespace

std::vector<netsim::FlowSpec> fairness_schedule(const FairnessConfig& cfg) {
  if (cfg.flows_per_algo < 1) throw ConfigError("need at least one flow per algorithm");
  std::vector<netsim::FlowSpec> flows;
  for (int i = 0; i < 2 * cfg.flows_per_algo; ++i) {
    netsim::FlowSpec f;
    f.start = cfg.stagger * i;
    f.controller = i < cfg.flows_per_algo ? cfg.first : cfg.second;
    flows.push_back(f);
  }
  if (flows.back().start >= cfg.duration) throw ConfigError("duration must exceed the last flow start");
  return flows;
}

std::vector<double> mean_rates(const netsim::SimResult& sim, SimTime begin, SimTime end) {
  if (end <= begin) throw ConfigError("empty rate window");
  std::vector<double> out;
  for (const auto& f : sim.flows) {
    std::int64_t bytes = 0;
    for (const auto& d : f.deliveries) {
      if (d.t >= begin && d.t < end) bytes += d.bytes;
    }
    out.push_back(static_cast<double>(bytes) * 8.0 / core::to_seconds(end - begin));
  }
  return out;
}

FairnessResult run_fairness(const FairnessConfig& cfg, netsim::SimOptions opts) {
  const auto flows = fairness_schedule(cfg);
  FairnessResult r;
  for (const auto& f : flows) {
    r.algos.push_back(f.controller.algo);
    r.starts.push_back(f.start);
  }
  r.sim = netsim::run(cfg.link, flows, cfg.duration, opts);

  const auto seconds = cfg.duration / std::chrono::seconds(1);
  for (std::int64_t s = 0; s < seconds; ++s) {
    const SimTime begin = std::chrono::seconds(s);
    auto rates = mean_rates(r.sim, begin, begin + std::chrono::seconds(1));
    std::vector<double> active;
    for (std::size_t i = 0; i < rates.size(); ++i) {
      if (r.starts[i] <= begin) active.push_back(rates[i]);
    }
    double jain = 0.0;
    try {
      jain = core::jain_index(active);
    } catch (const UndefinedError&) {
      jain = 0.0;  // nothing delivered in this second
    }
    r.rate.push_back(std::move(rates));
    r.jain.push_back(jain);
  }
  return r;
}

void write_fairness_csv(std::ostream& out, const FairnessResult& r) {
  out << "t_s";
  for (std::size_t i = 0; i < r.algos.size(); ++i) out << ",flow" << i << '_' << cc::algo_name(r.algos[i]) << "_bps";
  out << ",jain\n";
  for (std::size_t s = 0; s < r.rate.size(); ++s) {
    out << s + 1;
    for (double v : r.rate[s]) out << ',' << num(v);
    out << ',' << num(r.jain[s]) << '\n';
  }
}

std::optional<CapacityStep> largest_step_up(const core::TraceSchedule& trace, int mtu) {
  return largest_step(trace, mtu, true);
}

std::optional<CapacityStep> largest_step_down(const core::TraceSchedule& trace, int mtu) {
  return largest_step(trace, mtu, false);
}

std::optional<SimTime> time_to_track(const core::FlowMetrics& m, const CapacityStep& step, double fraction) {
  const auto series = m.throughput_series();
  const auto first = static_cast<std::size_t>(step.at / core::kMetricsBucket);
  for (std::size_t b = first; b < series.size(); ++b) {
    if (series[b] >= fraction * step.after_bps) {
      return core::kMetricsBucket * static_cast<std::int64_t>(b + 1) - step.at;
    }
  }
  return std::nullopt;
}

std::int64_t losses_between(const core::FlowMetrics& m, SimTime begin, SimTime end) {
  return std::count_if(m.loss_times.begin(), m.loss_times.end(),
                       [&](SimTime t) { return t >= begin && t < end; });
}

std::vector<SweepRow> sweep_k(const netsim::LinkConfig& link, const cc::ControllerSpec& nuwa, SimTime duration) {
  if (nuwa.algo != cc::Algo::kNuwa) throw ConfigError("k sweep needs a nuwa controller");
  const auto up = largest_step_up(link.trace, link.mtu);
  const auto down = largest_step_down(link.trace, link.mtu);

  std::vector<SweepRow> rows;
  for (int k = cc::kMinAggressiveness; k <= cc::kMaxAggressiveness; ++k) {
    auto spec = nuwa;
    spec.nuwa.k = k;
    const auto res = netsim::run(link, {netsim::FlowSpec{SimTime{0}, spec}}, duration);
    const auto& m = res.flows.front();
    const auto s = core::summarize(m, {SimTime{0}, duration});

    SweepRow row;
    row.k = k;
    row.throughput_bps = s.mean_throughput_bps;
    row.mean_queue_delay_us = s.mean_queue_delay_us;
    row.max_queue_delay_us = s.max_queue_delay_us;
    row.lost = m.packets_lost;
    if (up && up->at < duration) row.time_to_track = time_to_track(m, *up);
    if (down && down->at < duration) row.drop_edge_losses = losses_between(m, down->at, down->at + kDropEdgeHorizon);
    rows.push_back(row);
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "k,thru_bps,mean_qdelay_us,max_qdelay_us,lost,time_to_track_ms,drop_edge_lost\n";
  for (const auto& r : rows) {
    out << r.k << ',' << num(r.throughput_bps) << ',' << num(r.mean_queue_delay_us) << ','
        << num(r.max_queue_delay_us) << ',' << r.lost << ',';
    if (r.time_to_track) out << core::to_ms(*r.time_to_track);
    out << ',' << r.drop_edge_losses << '\n';
  }
}

}  // namespace nuwa::experiments
