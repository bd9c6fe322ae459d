#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "nuwa/cc/controller.hpp"
#include "nuwa/netsim/simulator.hpp"

namespace nuwa::experiments {

using core::SimTime;

/// Staggered-start competition: flow i starts at i·stagger. The default is
/// two flows of `first` followed by two of `second`.
struct FairnessConfig {
  netsim::LinkConfig link;
  cc::ControllerSpec first;
  cc::ControllerSpec second;
  int flows_per_algo = 2;
  SimTime stagger = std::chrono::seconds(10);
  SimTime duration = std::chrono::seconds(60);
};

struct FairnessResult {
  std::vector<cc::Algo> algos;            // per flow
  std::vector<SimTime> starts;            // per flow
  std::vector<std::vector<double>> rate;  // [second][flow] bits/s
  std::vector<double> jain;               // per second, over started flows
  netsim::SimResult sim;
};

std::vector<netsim::FlowSpec> fairness_schedule(const FairnessConfig& cfg);
FairnessResult run_fairness(const FairnessConfig& cfg, netsim::SimOptions opts = {});

/// `t_s,flow0_bps,...,flowN_bps,jain`
void write_fairness_csv(std::ostream& out, const FairnessResult& r);

/// Mean rate of each flow over [begin, end) in bits/s.
std::vector<double> mean_rates(const netsim::SimResult& sim, SimTime begin, SimTime end);

struct CapacityStep {
  SimTime at{};
  double before_bps = 0.0;
  double after_bps = 0.0;
};

/// Largest increase (or decrease) of capacity between consecutive 1 s
/// windows of the trace. nullopt if capacity never moves that way.
std::optional<CapacityStep> largest_step_up(const core::TraceSchedule& trace, int mtu = core::kDefaultMtu);
std::optional<CapacityStep> largest_step_down(const core::TraceSchedule& trace, int mtu = core::kDefaultMtu);

/// First time after the step when a 100 ms throughput bucket reaches
/// `fraction` of the new capacity, measured from the step.
std::optional<SimTime> time_to_track(const core::FlowMetrics& m, const CapacityStep& step,
                                     double fraction = 0.9);

/// Losses in [at, at + horizon).
std::int64_t losses_between(const core::FlowMetrics& m, SimTime begin, SimTime end);

struct SweepRow {
  int k = 0;
  double throughput_bps = 0.0;
  double mean_queue_delay_us = 0.0;
  double max_queue_delay_us = 0.0;
  std::int64_t lost = 0;
  std::optional<SimTime> time_to_track;
  std::int64_t drop_edge_losses = 0;
};

inline constexpr SimTime kDropEdgeHorizon = std::chrono::seconds(5);

/// One single-flow Nuwa run per k in [1, 9] on the same link.
std::vector<SweepRow> sweep_k(const netsim::LinkConfig& link, const cc::ControllerSpec& nuwa,
                              SimTime duration);

/// `k,thru_bps,mean_qdelay_us,max_qdelay_us,lost,time_to_track_ms,drop_edge_lost`;
/// time_to_track_ms is empty when the flow never tracks the step.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace nuwa::experiments
