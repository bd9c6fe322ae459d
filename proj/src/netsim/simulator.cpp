#include "nuwa/netsim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "nuwa/error.hpp"

namespace nuwa::netsim {

using core::FlowMetrics;
using core::Packet;

struct Simulator::Flow {
  FlowSpec spec;
  std::unique_ptr<cc::SenderController> sender;
  std::optional<cc::NuwaReceiver> receiver;
  bool started = false;

  std::int64_t next_seq = 0;
  std::deque<Outstanding> outstanding;
  std::int64_t inflight = 0;
  SimTime last_progress{};
  bool rto_armed = false;
  double srtt_us = 0.0;

  FlowMetrics metrics;
};

// Newline-delimited JSON with a fixed field order so logs compare bytewise.
class Simulator::EventLog {
 public:
  explicit EventLog(std::ostream& out) : out_(out) {}

  void record(SimTime t, const char* kind, std::uint32_t flow, std::int64_t seq, std::int64_t qlen,
              const std::string& extra = {}) {
    char buf[160];
    std::snprintf(buf, sizeof buf, R"({"t_us":%lld,"kind":"%s","flow":%u,"seq":%lld,"qlen":%lld)",
                  static_cast<long long>(t.count()), kind, flow, static_cast<long long>(seq),
                  static_cast<long long>(qlen));
    out_ << buf << extra << "}\n";
  }

  static std::string field(const char* name, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, R"(,"%s":%.9g)", name, v);
    return buf;
  }
  static std::string field(const char* name, std::int64_t v) {
    return std::string(",\"") + name + "\":" + std::to_string(v);
  }
  static std::string field(const char* name, const char* v) {
    return std::string(",\"") + name + "\":\"" + v + "\"";
  }

 private:
  std::ostream& out_;
};

bool Simulator::Later::operator()(const Event& a, const Event& b) const {
  if (a.t != b.t) return a.t > b.t;
  if (a.kind != b.kind) return a.kind > b.kind;
  return a.order > b.order;
}

Simulator::Simulator(LinkConfig link, std::vector<FlowSpec> flows, SimOptions opts)
    : link_(std::move(link)),
      opts_(opts),
      queue_(link_.queue_capacity),
      cursor_(link_.trace, link_.loop_trace),
      rng_(link_.rng_seed) {
  link_.validate();
  if (flows.empty()) throw ConfigError("simulation needs at least one flow");
  if (opts_.event_log) log_ = std::make_unique<EventLog>(*opts_.event_log);

  for (std::uint32_t i = 0; i < flows.size(); ++i) {
    auto f = std::make_unique<Flow>();
    f->spec = flows[i];
    if (f->spec.start.count() < 0) throw ConfigError("flow start must be >= 0");
    f->sender = cc::make_sender(f->spec.controller);
    if (f->spec.controller.algo == cc::Algo::kNuwa) {
      f->receiver.emplace(f->spec.controller.nuwa, f->spec.controller.estimator);
    }
    flows_.push_back(std::move(f));
    Event start;
    start.t = flows[i].start;
    start.kind = EventKind::kTimer;
    start.timer = TimerKind::kFlowStart;
    start.flow = i;
    push(start);
  }
  schedule_next_opportunity();
  next_tick_ = core::kMetricsBucket;
  Event tick;
  tick.t = next_tick_;
  tick.kind = EventKind::kTimer;
  tick.timer = TimerKind::kTick;
  push(tick);
}

Simulator::~Simulator() = default;

void Simulator::push(Event ev) {
  ev.order = next_order_++;
  heap_.push_back(ev);
  std::push_heap(heap_.begin(), heap_.end(), Later{});
}

double Simulator::uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

void Simulator::schedule_next_opportunity() {
  if (const auto t = cursor_.peek()) {
    Event ev;
    ev.t = *t;
    ev.kind = EventKind::kDelivery;
    push(ev);
    cursor_.advance();
  }
}

void Simulator::run_until(SimTime end) {
  while (!heap_.empty() && heap_.front().t < end) {
    std::pop_heap(heap_.begin(), heap_.end(), Later{});
    const Event ev = heap_.back();
    heap_.pop_back();
    now_ = ev.t;
    handle(ev);
  }
  if (end > now_) now_ = end;
}

void Simulator::handle(const Event& ev) {
  switch (ev.kind) {
    case EventKind::kEnqueue: on_enqueue(ev); break;
    case EventKind::kDelivery: on_delivery(ev); break;
    case EventKind::kReceive: on_receive(ev); break;
    case EventKind::kAck: on_ack(ev); break;
    case EventKind::kTimer: on_timer(ev); break;
  }
}

void Simulator::record_drop(const Packet& pkt, const char* cause) {
  auto& m = flows_[pkt.flow_id]->metrics;
  ++m.packets_lost;
  m.loss_times.push_back(now_);
  if (log_) log_->record(now_, "drop", pkt.flow_id, pkt.seq, queue_.occupancy(), EventLog::field("cause", cause));
}

void Simulator::on_enqueue(const Event& ev) {
  if (link_.random_loss_rate > 0.0 && uniform() < link_.random_loss_rate) {
    record_drop(ev.packet, "random");
    return;
  }
  if (queue_.enqueue(ev.packet, now_) == EnqueueResult::kDropped) {
    record_drop(ev.packet, "overflow");
    return;
  }
  if (log_) log_->record(now_, "enqueue", ev.packet.flow_id, ev.packet.seq, queue_.occupancy());
}

void Simulator::on_delivery(const Event&) {
  if (auto dep = queue_.deliver_opportunity(now_)) {
    ++opportunities_used_;
    if (log_) {
      log_->record(now_, "deliver", dep->packet.flow_id, dep->packet.seq, queue_.occupancy(),
                   EventLog::field("wait_us", dep->queue_wait.count()));
    }
    Event rx;
    rx.t = now_ + link_.from_bottleneck();
    rx.kind = EventKind::kReceive;
    rx.flow = dep->packet.flow_id;
    rx.packet = dep->packet;
    rx.aux = dep->queue_wait.count();
    push(rx);
  } else {
    ++opportunities_wasted_;
  }
  schedule_next_opportunity();
}

void Simulator::on_receive(const Event& ev) {
  auto& f = *flows_[ev.flow];
  auto& m = f.metrics;
  const auto& pkt = ev.packet;

  ++m.packets_delivered;
  m.bytes_delivered += pkt.size;
  m.deliveries.push_back({now_, ev.aux, (now_ - pkt.sent_at).count(), pkt.size});
  const auto bucket = static_cast<std::size_t>(now_ / core::kMetricsBucket);
  if (m.bucket_bytes.size() <= bucket) m.bucket_bytes.resize(bucket + 1, 0);
  m.bucket_bytes[bucket] += pkt.size;

  std::int64_t advertised = kUnlimitedAdvertisedWindow;
  if (f.receiver) {
    const auto u = f.receiver->on_packet(pkt.sent_at, now_, pkt.size);
    advertised = u.advertised;
    m.qd_estimates.push_back({now_, u.owd.q_delay_us});
    if (log_) {
      const auto q = queue_.occupancy();
      log_->record(now_, "owd", ev.flow, pkt.seq, q,
                   EventLog::field("d_c", u.owd.d_c_us) + EventLog::field("delta_m", u.owd.delta_m_bytes) +
                       EventLog::field("q_d", u.owd.q_delay_us) + EventLog::field("gain", u.owd.gain));
      log_->record(now_, "nuwa", ev.flow, pkt.seq, q,
                   EventLog::field("q_d", u.owd.q_delay_us) + EventLog::field("x", u.x.to_double()) +
                       EventLog::field("theta", u.theta.to_double()) + EventLog::field("w", u.window));
    }
  } else if (log_) {
    log_->record(now_, "recv", ev.flow, pkt.seq, queue_.occupancy());
  }

  Event ack;
  ack.t = now_ + link_.reverse_path_delay;
  if (link_.reverse_jitter.count() > 0) {
    ack.t += SimTime{static_cast<std::int64_t>(uniform() * static_cast<double>(link_.reverse_jitter.count()))};
  }
  ack.kind = EventKind::kAck;
  ack.flow = ev.flow;
  ack.packet = pkt;
  ack.aux = advertised;
  ack.aux_t = now_;
  push(ack);
}

SimTime Simulator::rto(const Flow& f) const {
  return std::max(kMinRto, SimTime{static_cast<std::int64_t>(2.0 * f.srtt_us)});
}

void Simulator::on_ack(const Event& ev) {
  auto& f = *flows_[ev.flow];
  const auto seq = ev.packet.seq;
  const auto rtt = now_ - ev.packet.sent_at;
  f.metrics.rtt_samples.push_back({now_, static_cast<double>(rtt.count())});
  f.srtt_us = f.srtt_us == 0.0 ? static_cast<double>(rtt.count())
                               : 0.875 * f.srtt_us + 0.125 * static_cast<double>(rtt.count());
  f.last_progress = now_;
  if (log_) log_->record(now_, "ack", ev.flow, seq, queue_.occupancy(), EventLog::field("awnd", ev.aux));

  if (!f.outstanding.empty() && seq >= f.outstanding.front().seq) {
    auto& entry = f.outstanding[static_cast<std::size_t>(seq - f.outstanding.front().seq)];
    if (entry.state == Outstanding::State::kInFlight) {
      entry.state = Outstanding::State::kAcked;
      --f.inflight;
    }
  }

  std::optional<std::int64_t> first_lost;
  for (auto& o : f.outstanding) {
    if (o.seq > seq - kReorderThreshold) break;
    if (o.state != Outstanding::State::kInFlight) continue;
    o.state = Outstanding::State::kLost;
    --f.inflight;
    if (!first_lost) first_lost = o.seq;
    if (log_) log_->record(now_, "loss", ev.flow, o.seq, queue_.occupancy());
  }
  while (!f.outstanding.empty() && f.outstanding.front().state != Outstanding::State::kInFlight) {
    f.outstanding.pop_front();
  }

  if (first_lost) f.sender->on_loss({now_, *first_lost, f.next_seq - 1});
  f.sender->on_ack({now_, rtt, seq, ev.aux});
  try_send(ev.flow);
}

void Simulator::on_timer(const Event& ev) {
  switch (ev.timer) {
    case TimerKind::kFlowStart: {
      auto& f = *flows_[ev.flow];
      f.started = true;
      f.last_progress = now_;
      if (log_) log_->record(now_, "start", ev.flow, 0, queue_.occupancy());
      try_send(ev.flow);
      break;
    }
    case TimerKind::kRto: {
      auto& f = *flows_[ev.flow];
      f.rto_armed = false;
      if (f.inflight == 0) break;
      if (now_ - f.last_progress >= rto(f)) {
        for (auto& o : f.outstanding) {
          if (o.state == Outstanding::State::kInFlight) o.state = Outstanding::State::kLost;
        }
        f.outstanding.clear();
        f.inflight = 0;
        f.last_progress = now_;
        if (log_) log_->record(now_, "timeout", ev.flow, f.next_seq, queue_.occupancy());
        f.sender->on_timeout(now_);
        try_send(ev.flow);
      } else {
        arm_rto(ev.flow);
      }
      break;
    }
    case TimerKind::kTick: {
      const auto bucket = static_cast<std::size_t>(now_ / core::kMetricsBucket) - 1;
      for (auto& fp : flows_) {
        auto& m = fp->metrics;
        if (m.bucket_window.size() <= bucket) m.bucket_window.resize(bucket + 1, 0.0);
        m.bucket_window[bucket] = fp->started ? fp->sender->window() : 0.0;
        if (m.bucket_bytes.size() <= bucket) m.bucket_bytes.resize(bucket + 1, 0);
      }
      next_tick_ += core::kMetricsBucket;
      Event tick;
      tick.t = next_tick_;
      tick.kind = EventKind::kTimer;
      tick.timer = TimerKind::kTick;
      push(tick);
      break;
    }
  }
}

void Simulator::arm_rto(std::uint32_t flow) {
  auto& f = *flows_[flow];
  if (f.rto_armed || f.inflight == 0) return;
  f.rto_armed = true;
  Event ev;
  ev.t = std::max(now_, f.last_progress + rto(f));
  if (ev.t == now_) ev.t += SimTime{1};
  ev.kind = EventKind::kTimer;
  ev.timer = TimerKind::kRto;
  ev.flow = flow;
  push(ev);
}

void Simulator::try_send(std::uint32_t flow) {
  auto& f = *flows_[flow];
  if (!f.started) return;
  const double window = f.sender->window();
  while (static_cast<double>(f.inflight) < std::floor(window)) {
    Packet pkt;
    pkt.flow_id = flow;
    pkt.seq = f.next_seq++;
    pkt.size = link_.mtu;
    pkt.sent_at = now_;
    f.outstanding.push_back({pkt.seq, now_, Outstanding::State::kInFlight});
    ++f.inflight;
    ++f.metrics.packets_sent;
    if (log_) log_->record(now_, "send", flow, pkt.seq, queue_.occupancy());

    Event arrive;
    arrive.t = now_ + link_.to_bottleneck();
    arrive.kind = EventKind::kEnqueue;
    arrive.flow = flow;
    arrive.packet = pkt;
    push(arrive);
  }
  arm_rto(flow);
}

const core::FlowMetrics& Simulator::metrics(std::size_t flow) const { return flows_.at(flow)->metrics; }

const cc::SenderController& Simulator::sender(std::size_t flow) const { return *flows_.at(flow)->sender; }

cc::NuwaReceiver* Simulator::nuwa_receiver(std::size_t flow) {
  auto& r = flows_.at(flow)->receiver;
  return r ? &*r : nullptr;
}

std::int64_t Simulator::in_network(std::size_t flow) const {
  std::int64_t n = queue_.count_flow(static_cast<core::FlowId>(flow));
  for (const auto& ev : heap_) {
    if ((ev.kind == EventKind::kEnqueue || ev.kind == EventKind::kReceive) && ev.flow == flow) ++n;
  }
  return n;
}

SimResult Simulator::finish() {
  SimResult r;
  r.duration = now_;
  r.opportunities_used = opportunities_used_;
  r.opportunities_wasted = opportunities_wasted_;
  const auto buckets = static_cast<std::size_t>((now_.count() + core::kMetricsBucket.count() - 1) /
                                                core::kMetricsBucket.count());
  for (auto& f : flows_) {
    auto m = std::move(f->metrics);
    m.bucket_bytes.resize(buckets, 0);
    if (m.bucket_window.size() < buckets) {
      m.bucket_window.resize(buckets, f->started ? f->sender->window() : 0.0);
    }
    m.bucket_window.resize(buckets);
    r.flows.push_back(std::move(m));
  }
  return r;
}

SimResult run(const LinkConfig& link, const std::vector<FlowSpec>& flows, SimTime duration, SimOptions opts) {
  if (duration.count() <= 0) throw ConfigError("duration must be positive");
  if (!link.loop_trace && duration > core::from_ms(link.trace.duration_ms)) {
    throw ConfigError("duration exceeds the trace and looping is disabled");
  }
  Simulator sim(link, flows, opts);
  sim.run_until(duration);
  return sim.finish();
}

}  // namespace nuwa::netsim
